from functools import lru_cache
from typing import Optional

from tvqe.config import Settings, get_settings
from tvqe.repository import CheckpointRepo, FileCheckpointRepo, MemoryCheckpointRepo, ReportRepo
from tvqe.storage import SequenceStore, get_store


@lru_cache()
def app_settings() -> Settings:
    """进程内共享的配置实例"""
    return get_settings()


# 存储依赖
@lru_cache()
def get_sequence_store(storage_type: Optional[str] = None) -> SequenceStore:
    """根据配置获取序列存储实现。同一进程内的内存存储是共享的。"""
    return get_store(storage_type or app_settings().SEQUENCE_STORAGE)


@lru_cache()
def get_checkpoint_repo(storage_type: Optional[str] = None) -> CheckpointRepo:
    """根据配置获取检查点存储库，与序列存储使用同一种后端。"""
    if (storage_type or app_settings().SEQUENCE_STORAGE) == "memory":
        return MemoryCheckpointRepo()
    return FileCheckpointRepo()


def get_report_repo(output_dir: str) -> ReportRepo:
    """获取输出目录的报告存储库。"""
    return ReportRepo(output_dir)


def reset_dependencies() -> None:
    """清空缓存的配置与存储实例（测试之间调用）"""
    app_settings.cache_clear()
    get_sequence_store.cache_clear()
    get_checkpoint_repo.cache_clear()
