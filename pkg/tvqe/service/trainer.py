import logging
from typing import Callable, List, Optional

import numpy as np

from tvqe.autograd.tensor import Tape, Tensor, backward
from tvqe.entity.clip import TrainingPair
from tvqe.entity.errors import NumericError, TrainingDivergedError, UsageError
from tvqe.entity.model import ModelConfig
from tvqe.entity.optim import OptimState
from tvqe.entity.training import LossRecord, TrainSchedule
from tvqe.model.network import tvqe_forward
from tvqe.model.params import ModelParams, param_init
from tvqe.repository.checkpoint_repo import Checkpoint, CheckpointRepo
from tvqe.service.dataset import augment, make_batch
from tvqe.service.losses import combined_loss
from tvqe.service.optim import adam_step, clip_grad_norm

LossCallback = Callable[[LossRecord], None]

# 前向出错时本步损失尚未算出
UNAVAILABLE = {"charbonnier": float("nan"), "mse": float("nan"), "total": float("nan")}


class TrainResult:
    """训练结果：最终检查点、逐步损失记录、周期性检查点路径"""

    def __init__(self, checkpoint: Checkpoint, history: List[LossRecord], checkpoint_paths: List[str]):
        self.checkpoint = checkpoint
        self.history = history
        self.checkpoint_paths = checkpoint_paths


class TwoStageTrainer:
    """
    两阶段训练服务。
    第一阶段用 Charbonnier 损失（α=1, β=0），第二阶段用 L2 损失（α=0, β=1），学习率恒定。
    给定相同的种子和数据，损失历史与参数逐位可复现。
    """

    def __init__(
        self,
        config: ModelConfig,
        schedule: TrainSchedule,
        checkpoint_repo: Optional[CheckpointRepo] = None,
        checkpoint_dir: str = "checkpoints",
        callback: Optional[LossCallback] = None,
    ):
        """
        初始化训练服务

        Args:
            config: 模型配置
            schedule: 训练计划
            checkpoint_repo: 周期性检查点的存储库；为 None 时不保存
            checkpoint_dir: 周期性检查点的目录
            callback: 每步调用一次的损失回调
        """
        self.config = config
        self.schedule = schedule
        self.checkpoint_repo = checkpoint_repo
        self.checkpoint_dir = checkpoint_dir
        self.callback = callback
        self.logger = logging.getLogger(__name__)

    def _draw_batch(self, pairs: List[TrainingPair], rng: np.random.Generator) -> List[TrainingPair]:
        size = self.schedule.batch_size
        index = rng.choice(len(pairs), size=size, replace=len(pairs) < size)
        batch = [pairs[int(i)] for i in index]
        if self.schedule.augment:
            batch = [augment(p, rng) for p in batch]
        return batch

    def train(self, pairs: List[TrainingPair], params: Optional[ModelParams] = None) -> TrainResult:
        """
        运行两阶段训练

        Args:
            pairs: 训练块
            params: 初始参数；为 None 时按计划种子初始化

        Returns:
            TrainResult: 训练结果

        Raises:
            UsageError: 数据集为空时抛出
            TrainingDivergedError: 损失出现 NaN/Inf 时抛出
        """
        schedule, config = self.schedule, self.config
        if params is None:
            params = param_init(config, schedule.seed)
        params.requires_grad_(True)
        optim = OptimState(params, lr=schedule.lr)
        history: List[LossRecord] = []
        saved: List[str] = []

        if schedule.total_steps == 0:
            self.logger.info("训练步数为 0，返回初始参数")
            return TrainResult(Checkpoint(config, params, optim), history, saved)
        if not pairs:
            raise UsageError("training needs at least one patch pair")

        rng = np.random.default_rng(schedule.seed + 1)
        dtype = config.np_dtype
        self.logger.info(
            f"开始训练: 第一阶段 {schedule.stage1_steps} 步, 第二阶段 {schedule.stage2_steps} 步, "
            f"lr={schedule.lr}, batch={schedule.batch_size}, {len(pairs)} 个训练块"
        )

        current_stage = 0
        for step in range(schedule.total_steps):
            stage, loss_cfg = schedule.stage_at(step)
            if stage != current_stage:
                self.logger.info(f"进入第 {stage} 阶段（step {step}, α={loss_cfg.alpha}, β={loss_cfg.beta}）")
                current_stage = stage

            frames, targets = make_batch(self._draw_batch(pairs, rng))
            components = dict(UNAVAILABLE)
            try:
                with Tape() as tape:
                    pred = tvqe_forward(Tensor(frames, dtype=dtype), params, config)
                    loss, components = combined_loss(pred, Tensor(targets, dtype=dtype), loss_cfg)
                backward(loss, tape)
            except NumericError as e:
                params.zero_grad()
                raise TrainingDivergedError(step, schedule.lr, dict(components, op=e.op)) from e
            if not all(np.isfinite(v) for v in components.values()):
                raise TrainingDivergedError(step, schedule.lr, components)

            if schedule.clip_grad_norm is not None:
                clip_grad_norm(params, schedule.clip_grad_norm)
            adam_step(params, optim)

            record = LossRecord(step=step, stage=stage, alpha=loss_cfg.alpha, beta=loss_cfg.beta, **components)
            history.append(record)
            if self.callback is not None:
                self.callback(record)
            if step % schedule.log_every == 0 or step == schedule.total_steps - 1:
                self.logger.info(
                    f"step {step} stage {stage} α={loss_cfg.alpha} β={loss_cfg.beta} "
                    f"charbonnier={components['charbonnier']:.6f} mse={components['mse']:.6f} "
                    f"total={components['total']:.6f}"
                )
            if self.checkpoint_repo is not None and schedule.checkpoint_every \
                    and (step + 1) % schedule.checkpoint_every == 0:
                path = f"{self.checkpoint_dir}/ckpt_{step + 1:06d}.tvqe"
                self.checkpoint_repo.save(path, Checkpoint(config, params, optim))
                saved.append(path)

        self.logger.info(f"训练结束: 最终损失 {history[-1].total:.6f}")
        return TrainResult(Checkpoint(config, params, optim), history, saved)


def two_stage_train(
    config: ModelConfig,
    pairs: List[TrainingPair],
    schedule: TrainSchedule,
    params: Optional[ModelParams] = None,
) -> TrainResult:
    """不保存周期性检查点的便捷入口"""
    return TwoStageTrainer(config, schedule).train(pairs, params)
