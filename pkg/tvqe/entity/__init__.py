from tvqe.entity.clip import ClipWindow, TrainingPair
from tvqe.entity.errors import (
    TVQEError, UsageError, ConfigError, DimensionError, DataIOError,
    CheckpointError, ChecksumError, ConfigMismatchError, NumericError,
    TrainingDivergedError, OracleError, GradCheckError, CurveValidationError, BDRateError, FrameIndexError,
)
from tvqe.entity.metrics import PSNR_INF, is_infinite, RDPoint, QualitySeries, DeltaReport
from tvqe.entity.model import ModelConfig, WindowGrid
from tvqe.entity.optim import OptimState
from tvqe.entity.sequence import (
    YuvSequence, DegradeProfile, QP_PRESETS, JCTVC_SEQUENCES, desk_extent, sequence_class,
)
from tvqe.entity.training import LossConfig, TrainSchedule, LossRecord

__all__ = [
    "ClipWindow", "TrainingPair",
    "TVQEError", "UsageError", "ConfigError", "DimensionError", "DataIOError",
    "CheckpointError", "ChecksumError", "ConfigMismatchError", "NumericError",
    "TrainingDivergedError", "OracleError", "GradCheckError", "CurveValidationError", "BDRateError",
    "FrameIndexError",
    "PSNR_INF", "is_infinite", "RDPoint", "QualitySeries", "DeltaReport",
    "ModelConfig", "WindowGrid", "OptimState",
    "YuvSequence", "DegradeProfile", "QP_PRESETS", "JCTVC_SEQUENCES", "desk_extent", "sequence_class",
    "LossConfig", "TrainSchedule", "LossRecord",
]
