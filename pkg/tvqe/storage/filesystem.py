import os
from pathlib import Path

import numpy as np

from tvqe.entity.errors import DataIOError
from tvqe.entity.sequence import YuvSequence
from tvqe.storage.base import SequenceStore


class YuvFileStore(SequenceStore):
    """
    文件系统存储实现，序列是无文件头的 .yuv 文件。
    相对路径相对于 base_dir 解析。
    """

    def __init__(self, base_dir: str = "."):
        """
        初始化文件系统存储。

        Args:
            base_dir: 基础目录路径
        """
        self.base_dir = Path(base_dir)

    def _resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def exists(self, path: str) -> bool:
        return self._resolve(path).is_file()

    def size(self, path: str) -> int:
        full_path = self._resolve(path)
        try:
            return os.path.getsize(full_path)
        except OSError as e:
            raise DataIOError(f"cannot stat sequence {full_path}: {e}") from e

    def read_bytes(self, path: str, offset: int, count: int) -> bytes:
        full_path = self._resolve(path)
        try:
            with open(full_path, "rb") as f:
                f.seek(offset)
                data = f.read(count)
        except OSError as e:
            raise DataIOError(f"failed to read {full_path}: {e}") from e
        if len(data) != count:
            raise DataIOError(f"{full_path}: expected {count} bytes at offset {offset}, got {len(data)}")
        return data

    def write_bytes(self, path: str, data: bytes) -> None:
        full_path = self._resolve(path)
        try:
            # 确保目标目录存在
            os.makedirs(full_path.parent, exist_ok=True)
            with open(full_path, "wb") as f:
                f.write(data)
        except OSError as e:
            raise DataIOError(f"failed to write {full_path}: {e}") from e

    def patch_bytes(self, path: str, offset: int, data: bytes) -> None:
        full_path = self._resolve(path)
        try:
            with open(full_path, "r+b") as f:
                f.seek(offset)
                f.write(data)
        except OSError as e:
            raise DataIOError(f"failed to write {full_path}: {e}") from e


_default_store = YuvFileStore()


def read_y_plane(seq: YuvSequence, t: int) -> np.ndarray:
    """从 .yuv 文件读取第 t 帧 Y 平面，取值 [0, 1]"""
    return _default_store.read_y_plane(seq, t)


def write_y_plane(seq: YuvSequence, t: int, plane: np.ndarray) -> None:
    """覆盖 .yuv 文件中第 t 帧的 Y 平面（8-bit 量化）"""
    _default_store.write_y_plane(seq, t, plane)
