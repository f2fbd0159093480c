from typing import Dict, Optional

from tvqe.entity.errors import DataIOError
from tvqe.storage.base import SequenceStore


class MemorySequenceStore(SequenceStore):
    """
    内存存储实现，将序列字节保存在字典中。
    主要用于测试目的。
    """

    def __init__(self):
        """初始化内存存储。"""
        # 键是序列路径，值是序列内容
        self._files: Dict[str, bytearray] = {}

    def exists(self, path: str) -> bool:
        return path in self._files

    def _get(self, path: str) -> bytearray:
        if path not in self._files:
            raise DataIOError(f"sequence not found in memory: {path}")
        return self._files[path]

    def size(self, path: str) -> int:
        return len(self._get(path))

    def read_bytes(self, path: str, offset: int, count: int) -> bytes:
        data = self._get(path)
        if offset + count > len(data):
            raise DataIOError(f"{path}: expected {count} bytes at offset {offset}, only {len(data)} stored")
        return bytes(data[offset:offset + count])

    def write_bytes(self, path: str, data: bytes) -> None:
        self._files[path] = bytearray(data)

    def patch_bytes(self, path: str, offset: int, data: bytes) -> None:
        buf = self._get(path)
        if offset + len(data) > len(buf):
            raise DataIOError(f"{path}: write of {len(data)} bytes at offset {offset} exceeds {len(buf)} bytes")
        buf[offset:offset + len(data)] = data

    def clear(self) -> None:
        """清除所有存储的序列。"""
        self._files.clear()

    def get_content(self, path: str) -> Optional[bytes]:
        """
        获取序列内容。
        用于测试目的。

        Args:
            path: 序列路径

        Returns:
            序列内容，如果不存在则返回None
        """
        data = self._files.get(path)
        return bytes(data) if data is not None else None
