import logging
import os
from typing import List

import numpy as np
from PIL import Image

from tvqe.entity.errors import DataIOError
from tvqe.storage.base import quantize_plane

logger = logging.getLogger(__name__)


def save_plane_png(plane: np.ndarray, path: str) -> None:
    """
    把一个亮度平面保存为 8-bit 灰度 PNG

    Args:
        plane: [H, W]，[0, 1] 浮点或 uint8
        path: 输出路径

    Raises:
        DataIOError: 写入失败时抛出
    """
    plane = np.asarray(plane)
    data = plane if plane.dtype == np.uint8 else quantize_plane(plane)
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        Image.fromarray(data).save(path, format="PNG")
    except OSError as e:
        raise DataIOError(f"failed to write preview {path}: {e}") from e


def export_previews(planes: List[np.ndarray], directory: str, stem: str = "frame") -> List[str]:
    """
    逐帧导出 PNG 预览

    Args:
        planes: 逐帧亮度平面
        directory: 输出目录
        stem: 文件名前缀

    Returns:
        List[str]: 写出的文件路径
    """
    paths = []
    for t, plane in enumerate(planes):
        path = os.path.join(directory, f"{stem}_{t:04d}.png")
        save_plane_png(plane, path)
        paths.append(path)
    logger.info(f"已导出 {len(paths)} 张预览图到 {directory}")
    return paths
