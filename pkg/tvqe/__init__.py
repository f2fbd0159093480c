"""
TVQE - 压缩视频质量增强
Swin-Transformer 时空融合 + Restormer 质量增强网络，纯 numpy 实现的训练、推理与评估工具
"""

__version__ = "0.1.0"
