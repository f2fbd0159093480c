from abc import ABC, abstractmethod
from typing import Iterable, List, Optional

import numpy as np

from tvqe.entity.errors import DataIOError, DimensionError, FrameIndexError
from tvqe.entity.sequence import YuvSequence


def quantize_plane(plane: np.ndarray) -> np.ndarray:
    """
    把 [0, 1] 的亮度平面截断后量化为 8-bit

    Args:
        plane: 浮点平面

    Returns:
        np.ndarray: uint8 平面
    """
    return np.rint(np.clip(np.asarray(plane, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def neutral_chroma(width: int, height: int) -> bytes:
    """灰色（128）的 U、V 平面"""
    return bytes([128]) * (2 * (width // 2) * (height // 2))


class SequenceStore(ABC):
    """
    YUV 序列存储抽象基类。
    具体实现包括文件系统存储和内存存储；Y 平面的偏移计算在基类中完成，子类只负责字节读写。
    """

    @abstractmethod
    def exists(self, path: str) -> bool:
        """序列是否存在"""
        pass

    @abstractmethod
    def size(self, path: str) -> int:
        """
        序列的字节数

        Raises:
            DataIOError: 序列不存在时抛出
        """
        pass

    @abstractmethod
    def read_bytes(self, path: str, offset: int, count: int) -> bytes:
        """
        读取一段字节

        Raises:
            DataIOError: 读取失败或数据不足时抛出
        """
        pass

    @abstractmethod
    def write_bytes(self, path: str, data: bytes) -> None:
        """
        用 data 替换整个序列

        Raises:
            DataIOError: 写入失败时抛出
        """
        pass

    @abstractmethod
    def patch_bytes(self, path: str, offset: int, data: bytes) -> None:
        """
        原地覆盖一段字节

        Raises:
            DataIOError: 写入失败时抛出
        """
        pass

    def open(self, path: str, width: int, height: int, frame_count: Optional[int] = None) -> YuvSequence:
        """
        打开序列

        Args:
            path: 序列路径
            width: 宽度
            height: 高度
            frame_count: 帧数；为 None 时从数据大小推断

        Returns:
            YuvSequence: 序列描述

        Raises:
            DimensionError: 宽或高为奇数时抛出
            DataIOError: 数据大小与尺寸不符（被截断）时抛出
        """
        if width % 2 or height % 2:
            raise DimensionError(f"{path}: 4:2:0 planes need even dimensions, got {width}x{height}")
        size = self.size(path)
        if frame_count is None:
            return YuvSequence.from_size(path, width, height, size)
        seq = YuvSequence(path=path, width=width, height=height, frame_count=frame_count)
        if size < seq.expected_size:
            raise DataIOError(f"{path}: truncated, expected {seq.expected_size} bytes, found {size}")
        return seq

    def _frame_offset(self, seq: YuvSequence, t: int) -> int:
        if not 0 <= t < seq.frame_count:
            raise FrameIndexError(f"frame {t} out of range for {seq.frame_count}-frame sequence {seq.path}")
        offset = t * seq.frame_bytes
        size = self.size(seq.path)
        if size < offset + seq.frame_bytes:
            raise DataIOError(
                f"{seq.path}: truncated, expected {seq.expected_size} bytes, found {size}"
            )
        return offset

    def read_y_plane(self, seq: YuvSequence, t: int) -> np.ndarray:
        """
        读取第 t 帧的 Y 平面，色度字节按偏移跳过

        Args:
            seq: 序列描述
            t: 帧序号

        Returns:
            np.ndarray: [H, W] float64，取值 byte/255

        Raises:
            FrameIndexError: t 越界时抛出
            DataIOError: 数据被截断时抛出
        """
        offset = self._frame_offset(seq, t)
        raw = self.read_bytes(seq.path, offset, seq.luma_bytes)
        plane = np.frombuffer(raw, dtype=np.uint8).reshape(seq.height, seq.width)
        return plane.astype(np.float64) / 255.0

    def read_chroma(self, seq: YuvSequence, t: int) -> bytes:
        """读取第 t 帧的 U、V 平面原始字节"""
        offset = self._frame_offset(seq, t)
        return self.read_bytes(seq.path, offset + seq.luma_bytes, seq.chroma_bytes)

    def read_y_planes(self, seq: YuvSequence) -> np.ndarray:
        """读取全部 Y 平面，[T, H, W]"""
        if seq.frame_count == 0:
            return np.zeros((0, seq.height, seq.width))
        return np.stack([self.read_y_plane(seq, t) for t in range(seq.frame_count)])

    def write_y_plane(self, seq: YuvSequence, t: int, plane: np.ndarray) -> None:
        """
        覆盖第 t 帧的 Y 平面，色度不变

        Args:
            seq: 序列描述
            t: 帧序号
            plane: [H, W]，[0, 1] 浮点或 uint8
        """
        offset = self._frame_offset(seq, t)
        plane = np.asarray(plane)
        if plane.shape != (seq.height, seq.width):
            raise DataIOError(f"plane shape {plane.shape} does not match {seq.width}x{seq.height}")
        data = plane if plane.dtype == np.uint8 else quantize_plane(plane)
        self.patch_bytes(seq.path, offset, data.tobytes())

    def write_sequence(
        self,
        path: str,
        width: int,
        height: int,
        planes: Iterable[np.ndarray],
        chroma: Optional[List[bytes]] = None,
    ) -> YuvSequence:
        """
        写出完整序列

        Args:
            path: 目标路径
            width: 宽度
            height: 高度
            planes: 逐帧 Y 平面，[0, 1] 浮点或 uint8
            chroma: 逐帧 U、V 原始字节；为 None 时写入灰色

        Returns:
            YuvSequence: 新序列的描述
        """
        chunks = []
        count = 0
        for t, plane in enumerate(planes):
            plane = np.asarray(plane)
            if plane.shape != (height, width):
                raise DataIOError(f"frame {t} has shape {plane.shape}, expected {height}x{width}")
            data = plane if plane.dtype == np.uint8 else quantize_plane(plane)
            chunks.append(data.tobytes())
            uv = chroma[t] if chroma is not None else neutral_chroma(width, height)
            if len(uv) != 2 * (width // 2) * (height // 2):
                raise DataIOError(f"frame {t} chroma holds {len(uv)} bytes, expected {2 * (width // 2) * (height // 2)}")
            chunks.append(uv)
            count += 1
        self.write_bytes(path, b"".join(chunks))
        return YuvSequence(path=path, width=width, height=height, frame_count=count)
