from tvqe.storage.base import SequenceStore, neutral_chroma, quantize_plane
from tvqe.storage.filesystem import YuvFileStore, read_y_plane, write_y_plane
from tvqe.storage.memory import MemorySequenceStore
from tvqe.storage.preview import export_previews, save_plane_png


def get_store(storage_type: str, base_dir: str = ".") -> SequenceStore:
    """
    根据配置创建适当的序列存储实现。

    Args:
        storage_type: 存储类型 ("filesystem", "memory")
        base_dir: 文件系统存储的基础目录

    Returns:
        存储实现实例

    Raises:
        ValueError: 当存储类型无效时抛出
    """
    if storage_type == "filesystem":
        return YuvFileStore(base_dir)
    elif storage_type == "memory":
        return MemorySequenceStore()
    else:
        raise ValueError(f"Unknown storage type: {storage_type}")


__all__ = [
    "get_store", "SequenceStore", "YuvFileStore", "MemorySequenceStore",
    "quantize_plane", "neutral_chroma", "read_y_plane", "write_y_plane",
    "save_plane_png", "export_previews",
]
