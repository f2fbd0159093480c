"""
完整的增强网络：SSTF（时空融合）+ CAQE（通道注意力质量增强）。

SSTF：patch partition -> 三阶段 Swin 编码器 -> 带跳跃连接的三阶段解码器 -> 1×1 卷积 + pixel shuffle。
CAQE：若干 Restormer 块 -> 3×3 重建卷积 -> 与目标帧相加（残差学习）。
"""
from typing import Union

import numpy as np

from tvqe.autograd import ops
from tvqe.autograd.tensor import Tensor
from tvqe.entity.clip import ClipWindow
from tvqe.entity.errors import DimensionError, UsageError
from tvqe.entity.model import ModelConfig
from tvqe.model.params import ModelParams
from tvqe.model.restormer import restormer_block
from tvqe.model.swin import patch_expanding, patch_merging, patch_partition, swin_stage

ClipInput = Union[ClipWindow, Tensor, np.ndarray]


def as_network_input(v: ClipInput, config: ModelConfig) -> Tensor:
    """
    把输入统一为 [n, 2R+1, H, W] 的张量

    Args:
        v: ClipWindow、[2R+1, H, W] 或 [n, 2R+1, H, W]
        config: 模型配置

    Raises:
        UsageError: 帧数与配置的 R 不一致时抛出
    """
    if isinstance(v, ClipWindow):
        tensor = Tensor(v.frames[None], dtype=config.np_dtype)
    elif isinstance(v, Tensor):
        tensor = v if v.dtype == config.np_dtype else Tensor(v.data, requires_grad=v.requires_grad,
                                                              dtype=config.np_dtype)
        if tensor.ndim == 3:
            tensor = ops.reshape(tensor, (1,) + tensor.shape)
    else:
        data = np.asarray(v)
        tensor = Tensor(data[None] if data.ndim == 3 else data, dtype=config.np_dtype)
    if tensor.ndim != 4:
        raise UsageError(f"network input must be [n, frames, H, W], got shape {tensor.shape}")
    if tensor.shape[1] != config.num_frames:
        raise UsageError(f"got {tensor.shape[1]} frames, config radius {config.radius} needs {config.num_frames}")
    return tensor


def padded_extent(height: int, width: int, config: ModelConfig) -> tuple:
    """反射填充后的尺寸"""
    m = config.pad_multiple
    return height + (-height) % m, width + (-width) % m


def sstf_forward(v: ClipInput, params: ModelParams, config: ModelConfig, use_skips: bool = True) -> Tensor:
    """
    时空融合模块

    E₁=Estage1(V), E₂=Estage2(E₁), E₃=Estage3(E₂)；
    D₃=Dstage1(E₃)+E₃, D₂=Dstage2(D₃)+E₂, X^m=Dstage3(D₂)+E₁。

    Args:
        v: 2R+1 帧输入
        params: 模型参数
        config: 模型配置
        use_skips: 为 False 时去掉三处跳跃连接（消融用）

    Returns:
        Tensor: X^m，[n, embed_dim, H, W]
    """
    x = as_network_input(v, config)
    n, _, height, width = x.shape
    ph, pw = padded_extent(height, width, config)
    if (ph, pw) != (height, width):
        x = ops.pad_reflect(x, ((0, 0), (0, 0), (0, ph - height), (0, pw - width)))

    ws, eps = config.window_size, config.ln_eps
    depths, heads = config.depths, config.heads

    # 编码器
    e1, h1, w1 = patch_partition(x, params, "sstf.enc.stage1.partition", config.patch)
    e1 = swin_stage(e1, params, "sstf.enc.stage1", depths[0], h1, w1, heads[0], ws, eps)
    h2, w2 = h1 // 2, w1 // 2
    e2 = patch_merging(e1, params, "sstf.enc.stage2.merge", h1, w1, eps)
    e2 = swin_stage(e2, params, "sstf.enc.stage2", depths[1], h2, w2, heads[1], ws, eps)
    h3, w3 = h2 // 2, w2 // 2
    e3 = patch_merging(e2, params, "sstf.enc.stage3.merge", h2, w2, eps)
    e3 = swin_stage(e3, params, "sstf.enc.stage3", depths[2], h3, w3, heads[2], ws, eps)

    # 解码器
    d3 = swin_stage(e3, params, "sstf.dec.stage1", depths[2], h3, w3, heads[2], ws, eps)
    if use_skips:
        d3 = ops.add(d3, e3)
    d2 = patch_expanding(d3, params, "sstf.dec.stage2.expand", h3, w3, eps)
    d2 = swin_stage(d2, params, "sstf.dec.stage2", depths[1], h2, w2, heads[1], ws, eps)
    if use_skips:
        d2 = ops.add(d2, e2)
    xm = patch_expanding(d2, params, "sstf.dec.stage3.expand", h2, w2, eps)
    xm = swin_stage(xm, params, "sstf.dec.stage3", depths[0], h1, w1, heads[0], ws, eps)
    if use_skips:
        xm = ops.add(xm, e1)

    # 恢复到输入分辨率
    c = config.embed_dim
    xm = ops.permute(ops.reshape(xm, (n, h1, w1, c)), (0, 3, 1, 2))
    xm = ops.conv2d(xm, params["sstf.head.weight"], params["sstf.head.bias"])
    xm = ops.pixel_shuffle(xm, config.patch)
    return ops.crop(xm, height, width)


def caqe_forward(x_m: Tensor, x_t: Union[Tensor, np.ndarray], params: ModelParams, config: ModelConfig) -> Tensor:
    """
    通道注意力质量增强：I_t = Rec(Res(X^m))，X^e = I_t + X_t

    Args:
        x_m: [n, embed_dim, H, W]
        x_t: 目标帧，[H, W] 或 [n, 1, H, W]
        params: 模型参数
        config: 模型配置

    Returns:
        Tensor: [n, 1, H, W]

    Raises:
        DimensionError: 空间尺寸不一致时抛出
    """
    if not isinstance(x_t, Tensor):
        x_t = Tensor(x_t, dtype=config.np_dtype)
    if x_t.ndim == 2:
        x_t = ops.reshape(x_t, (1, 1) + x_t.shape)
    if x_t.shape[-2:] != x_m.shape[-2:]:
        raise DimensionError(f"feature map {x_m.shape[-2:]} and target frame {x_t.shape[-2:]} differ in extent")

    y = x_m
    for i in range(config.num_restormers):
        y = restormer_block(y, params, f"caqe.block{i}", config.mdta_heads, config.ln_eps)
    residual = ops.conv2d(y, params["caqe.rec.weight"], params["caqe.rec.bias"], padding=1)
    return ops.add(residual, x_t)


def tvqe_forward(v: ClipInput, params: ModelParams, config: ModelConfig) -> Tensor:
    """
    完整前向：caqe_forward(sstf_forward(V), X_t)。图内不做截断，截断只在导出时进行。

    Args:
        v: 2R+1 帧输入
        params: 模型参数
        config: 模型配置

    Returns:
        Tensor: 增强后的目标帧，[n, 1, H, W]
    """
    x = as_network_input(v, config)
    center = ops.narrow(x, 1, config.radius, 1)
    return caqe_forward(sstf_forward(x, params, config), center, params, config)
