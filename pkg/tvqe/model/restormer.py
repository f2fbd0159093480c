"""
CAQE 使用的 Restormer 块：MDTA（通道维度上的转置注意力）与 GDFN（门控深度卷积前馈网络）。

特征张量使用 NCHW 布局。
"""
from typing import Optional

import numpy as np

from tvqe.autograd import ops
from tvqe.autograd.tensor import Tensor
from tvqe.entity.errors import ConfigError
from tvqe.model.params import ModelParams


def channel_layer_norm(x: Tensor, params: ModelParams, prefix: str, eps: float = 1e-5) -> Tensor:
    """对 [n, c, h, w] 的每个像素在通道上做 LayerNorm"""
    y = ops.permute(x, (0, 2, 3, 1))
    y = ops.layer_norm(y, params[f"{prefix}.weight"], params[f"{prefix}.bias"], eps)
    return ops.permute(y, (0, 3, 1, 2))


class MDTAOutputs:
    """MDTA 的中间结果，便于检查注意力图"""

    def __init__(self, q: Tensor, k: Tensor, v: Tensor, attention: Tensor, m: Tensor, out: Tensor):
        self.q = q                    # [n, heads, c/heads, h·w]
        self.k = k
        self.v = v
        self.attention = attention    # [n, heads, c/heads, c/heads]
        self.m = m                    # 投影前的 [n, c, h, w]
        self.out = out                # 加上残差后的输出


def mdta_internals(
    x: Tensor,
    params: ModelParams,
    prefix: str,
    heads: int = 1,
    residual: Optional[Tensor] = None,
) -> MDTAOutputs:
    """
    MDTA 前向，返回全部中间结果

    Q、K、V 由逐点卷积再接深度卷积得到；每个头的注意力图为
    softmax(Q̂K̂ᵀ / √(hw))，在 key 通道轴上归一化，M = attention · V̂。

    Args:
        x: [n, c, h, w]
        params: 模型参数
        prefix: 参数路径前缀（例如 "caqe.block0.attn"）
        heads: 头数
        residual: 残差分支，默认是 x 本身

    Raises:
        ConfigError: 通道数不能被头数整除
    """
    n, c, h, w = x.shape
    if c % heads != 0:
        raise ConfigError(f"{c} channels cannot be split into {heads} MDTA heads")
    ch = c // heads

    qkv = ops.conv2d(x, params[f"{prefix}.qkv.weight"], params[f"{prefix}.qkv.bias"])
    qkv = ops.conv2d(qkv, params[f"{prefix}.qkv_dw.weight"], params[f"{prefix}.qkv_dw.bias"],
                     padding=1, groups=3 * c)
    q, k, v = (ops.reshape(t, (n, heads, ch, h * w)) for t in ops.split(qkv, 3, axis=1))

    scores = ops.scale(ops.matmul(q, ops.transpose_last(k)), 1.0 / np.sqrt(h * w))
    attention = ops.softmax(scores, axis=-1)
    m = ops.reshape(ops.matmul(attention, v), (n, c, h, w))
    out = ops.conv2d(m, params[f"{prefix}.proj.weight"], params[f"{prefix}.proj.bias"])
    out = ops.add(x if residual is None else residual, out)
    return MDTAOutputs(q, k, v, attention, m, out)


def mdta_forward(
    x: Tensor,
    params: ModelParams,
    prefix: str,
    heads: int = 1,
    residual: Optional[Tensor] = None,
) -> Tensor:
    """MDTA 前向，输出形状与 x 相同"""
    return mdta_internals(x, params, prefix, heads, residual).out


def gdfn_forward(x: Tensor, params: ModelParams, prefix: str, residual: Optional[Tensor] = None) -> Tensor:
    """
    GDFN：PW 扩展到 2·hidden，DW 3×3，均分为两支，PW(GELU(x1) ⊙ x2)，再加残差

    Args:
        x: [n, c, h, w]
        params: 模型参数
        prefix: 参数路径前缀（例如 "caqe.block0.ffn"）
        residual: 残差分支，默认是 x 本身

    Returns:
        Tensor: 与 x 形状相同
    """
    y = ops.conv2d(x, params[f"{prefix}.project_in.weight"], params[f"{prefix}.project_in.bias"])
    y = ops.conv2d(y, params[f"{prefix}.dw.weight"], params[f"{prefix}.dw.bias"], padding=1, groups=y.shape[1])
    x1, x2 = ops.split(y, 2, axis=1)
    y = ops.mul(ops.gelu(x1), x2)
    y = ops.conv2d(y, params[f"{prefix}.project_out.weight"], params[f"{prefix}.project_out.bias"])
    return ops.add(x if residual is None else residual, y)


def restormer_block(x: Tensor, params: ModelParams, prefix: str, heads: int = 1, eps: float = 1e-5) -> Tensor:
    """
    预归一化的 Restormer 块：x + MDTA(LN(x))，再 + GDFN(LN(·))

    Args:
        x: [n, c, h, w]
        params: 模型参数
        prefix: 块的参数路径前缀（例如 "caqe.block0"）
        heads: MDTA 头数
        eps: LayerNorm 的 ε
    """
    y = mdta_forward(channel_layer_norm(x, params, f"{prefix}.norm1", eps), params, f"{prefix}.attn",
                     heads, residual=x)
    return gdfn_forward(channel_layer_norm(y, params, f"{prefix}.norm2", eps), params, f"{prefix}.ffn",
                        residual=y)
