import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

import numpy as np

from tvqe.entity.errors import DimensionError
from tvqe.entity.model import ModelConfig
from tvqe.entity.sequence import YuvSequence
from tvqe.model.network import tvqe_forward
from tvqe.model.params import ModelParams
from tvqe.service.dataset import clip_from_planes
from tvqe.storage.base import SequenceStore
from tvqe.storage.preview import export_previews


class QualityEnhancer:
    """
    推理服务：对序列的每一帧用其 2R+1 帧窗口做增强。
    多线程时输出顺序与帧序一致，结果与单线程逐位相同。
    """

    def __init__(self, config: ModelConfig, params: ModelParams, workers: int = 1):
        """
        初始化推理服务

        Args:
            config: 模型配置
            params: 模型参数（只读）
            workers: 线程数
        """
        self.config = config
        self.params = params
        self.workers = max(1, int(workers))
        self.logger = logging.getLogger(__name__)

    def enhance_frame(self, planes: np.ndarray, t: int) -> np.ndarray:
        """
        增强第 t 帧

        Args:
            planes: [T, H, W] 压缩序列
            t: 帧序号

        Returns:
            np.ndarray: [H, W] float64，已截断到 [0, 1]
        """
        clip = clip_from_planes(planes, t, self.config.radius)
        out = tvqe_forward(clip, self.params, self.config)
        return np.clip(out.data[0, 0].astype(np.float64), 0.0, 1.0)

    def enhance_planes(self, planes: np.ndarray) -> np.ndarray:
        """
        增强整段序列

        Args:
            planes: [T, H, W] 压缩序列

        Returns:
            np.ndarray: [T, H, W] 增强序列
        """
        planes = np.asarray(planes, dtype=np.float64)
        if planes.ndim != 3:
            raise DimensionError(f"expected [T, H, W] planes, got shape {planes.shape}")
        count = planes.shape[0]
        if count == 0:
            return planes.copy()
        if self.workers == 1:
            frames = [self.enhance_frame(planes, t) for t in range(count)]
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                frames = list(pool.map(lambda t: self.enhance_frame(planes, t), range(count)))
        return np.stack(frames)

    def enhance_sequence(
        self,
        store: SequenceStore,
        seq: YuvSequence,
        out_path: str,
        preview_dir: Optional[str] = None,
    ) -> YuvSequence:
        """
        增强一个 YUV 序列并写出，色度平面原样复制

        Args:
            store: 序列存储
            seq: 输入序列
            out_path: 输出路径
            preview_dir: 给出时导出增强帧的 PNG 预览

        Returns:
            YuvSequence: 输出序列，尺寸与帧数与输入一致
        """
        self.logger.info(f"开始增强 {seq.path}: {seq.width}x{seq.height}, {seq.frame_count} 帧, {self.workers} 线程")
        planes = store.read_y_planes(seq)
        enhanced = self.enhance_planes(planes)
        chroma: List[bytes] = [store.read_chroma(seq, t) for t in range(seq.frame_count)]
        out = store.write_sequence(out_path, seq.width, seq.height, enhanced, chroma)
        if preview_dir:
            export_previews(list(enhanced), preview_dir, stem="enhanced")
        self.logger.info(f"增强结果已写出: {out_path}")
        return out
