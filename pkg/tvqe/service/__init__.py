from tvqe.service.dataset import augment, clip_window, make_batch, sample_patches, sample_patches_from_planes
from tvqe.service.degrade import degrade_sequence, make_test_pattern, rate_kbps, synth_degrade
from tvqe.service.enhancer import QualityEnhancer
from tvqe.service.losses import charbonnier_loss, combined_loss, mse_loss
from tvqe.service.metrics import bd_rate, delta_metrics, per_frame_series, psnr, ssim
from tvqe.service.optim import OptimState, adam_step, clip_grad_norm
from tvqe.service.trainer import TrainResult, TwoStageTrainer, two_stage_train

__all__ = [
    "augment", "clip_window", "make_batch", "sample_patches", "sample_patches_from_planes",
    "degrade_sequence", "make_test_pattern", "rate_kbps", "synth_degrade",
    "QualityEnhancer",
    "charbonnier_loss", "combined_loss", "mse_loss",
    "bd_rate", "delta_metrics", "per_frame_series", "psnr", "ssim",
    "OptimState", "adam_step", "clip_grad_norm",
    "TrainResult", "TwoStageTrainer", "two_stage_train",
]
