from tvqe.repository.checkpoint_repo import (
    Checkpoint, CheckpointRepo, FileCheckpointRepo, MemoryCheckpointRepo,
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint,
)
from tvqe.repository.report_repo import RESOLVED_CONFIG, ReportRepo, read_rd_curve

__all__ = [
    "Checkpoint", "CheckpointRepo", "FileCheckpointRepo", "MemoryCheckpointRepo",
    "decode_checkpoint", "encode_checkpoint", "load_checkpoint", "save_checkpoint",
    "RESOLVED_CONFIG", "ReportRepo", "read_rd_curve",
]
