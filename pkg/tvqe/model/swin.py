"""
Swin 变换器的基本组件：窗口划分/还原、循环移位与注意力掩码、窗口多头自注意力、Swin-TB，
以及 patch partition / merging / expanding 构成的分辨率阶梯。

特征张量使用 token 布局 [n, h·w, c]，(h, w) 由调用方传入。
"""
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from tvqe.autograd import ops
from tvqe.autograd.tensor import Tensor
from tvqe.entity.errors import ConfigError, DimensionError, UsageError
from tvqe.entity.model import WindowGrid
from tvqe.model.params import ModelParams

# 被屏蔽的 token 对在 softmax 前加上 -MASK_LARGE
MASK_LARGE = 1e9


def window_partition(x: Tensor, window_size: int) -> Tensor:
    """
    [n, h, w, c] -> [n·nh·nw, ws, ws, c]，窗口按行优先排列

    Raises:
        UsageError: window_size <= 0
        DimensionError: h 或 w 不是 window_size 的倍数
    """
    if window_size <= 0:
        raise UsageError(f"window size must be positive, got {window_size}")
    n, h, w, c = x.shape
    if h % window_size or w % window_size:
        raise DimensionError(f"feature map {h}x{w} is not a multiple of window {window_size}")
    ws = window_size
    y = ops.reshape(x, (n, h // ws, ws, w // ws, ws, c))
    y = ops.permute(y, (0, 1, 3, 2, 4, 5))
    return ops.reshape(y, (-1, ws, ws, c))


def window_reverse(windows: Tensor, window_size: int, height: int, width: int) -> Tensor:
    """window_partition 的逆：[n·nh·nw, ws, ws, c] -> [n, h, w, c]"""
    if window_size <= 0:
        raise UsageError(f"window size must be positive, got {window_size}")
    ws = window_size
    c = windows.shape[-1]
    nh, nw = height // ws, width // ws
    y = ops.reshape(windows, (-1, nh, nw, ws, ws, c))
    y = ops.permute(y, (0, 1, 3, 2, 4, 5))
    return ops.reshape(y, (-1, height, width, c))


def cyclic_shift(x: Tensor, shift: int) -> Tensor:
    """在 [n, h, w, c] 的空间轴上环形平移 (-shift, -shift)"""
    if shift == 0:
        return x
    if abs(shift) >= min(x.shape[1], x.shape[2]):
        raise UsageError(f"shift {shift} must be smaller than the map extent {x.shape[1]}x{x.shape[2]}")
    return ops.roll(x, (-shift, -shift), (1, 2))


@lru_cache(maxsize=64)
def attention_mask(height: int, width: int, window_size: int, shift: int) -> np.ndarray:
    """
    移位窗口的加性注意力掩码

    移位前属于不同区域的 token 对取 -MASK_LARGE，其余为 0。结果只与参数有关，会被缓存，不可写。

    Args:
        height: 特征图高
        width: 特征图宽
        window_size: 窗口边长
        shift: 移位量

    Returns:
        np.ndarray: [nW, ws², ws²]
    """
    ws = window_size
    nw = (height // ws) * (width // ws)
    if shift == 0:
        mask = np.zeros((nw, ws * ws, ws * ws))
    else:
        regions = np.zeros((height, width), dtype=np.int64)
        bounds = (slice(0, -ws), slice(-ws, -shift), slice(-shift, None))
        label = 0
        for hs in bounds:
            for vs in bounds:
                regions[hs, vs] = label
                label += 1
        windows = regions.reshape(height // ws, ws, width // ws, ws).transpose(0, 2, 1, 3).reshape(nw, ws * ws)
        differs = windows[:, :, None] != windows[:, None, :]
        mask = np.where(differs, -MASK_LARGE, 0.0)
    mask.flags.writeable = False
    return mask


@lru_cache(maxsize=16)
def relative_position_index(window_size: int) -> np.ndarray:
    """窗口内 token 对 (i, j) 在相对位置偏置表中的行号，[ws², ws²]"""
    ws = window_size
    coords = np.stack(np.meshgrid(np.arange(ws), np.arange(ws), indexing="ij")).reshape(2, -1)
    rel = coords[:, :, None] - coords[:, None, :] + (ws - 1)
    index = rel[0] * (2 * ws - 1) + rel[1]
    index.flags.writeable = False
    return index


def wmsa(
    x: Tensor,
    params: ModelParams,
    prefix: str,
    heads: int,
    window_size: int,
    mask: Optional[np.ndarray] = None,
) -> Tensor:
    """
    窗口多头自注意力：softmax(QKᵀ/√d + B + mask)·V，再做输出投影。窗口之间没有信息交换。

    Args:
        x: [窗口数, ws², c]
        params: 模型参数
        prefix: 参数路径前缀（例如 "sstf.enc.stage1.block0.attn"）
        heads: 注意力头数
        window_size: 窗口边长
        mask: 可选的 [nW, ws², ws²] 加性掩码；窗口数必须是 nW 的整数倍

    Returns:
        Tensor: 与 x 形状相同

    Raises:
        ConfigError: 通道数不能被头数整除
    """
    b, n, c = x.shape
    if c % heads != 0:
        raise ConfigError(f"{c} channels cannot be split into {heads} heads")
    if n != window_size * window_size:
        raise DimensionError(f"window holds {n} tokens, expected {window_size}x{window_size}")
    d = c // heads

    qkv = ops.linear(x, params[f"{prefix}.qkv.weight"], params[f"{prefix}.qkv.bias"])
    qkv = ops.permute(ops.reshape(qkv, (b, n, 3, heads, d)), (2, 0, 3, 1, 4))
    q, k, v = (ops.reshape(t, (b, heads, n, d)) for t in ops.split(qkv, 3, axis=0))

    attn = ops.matmul(ops.scale(q, 1.0 / np.sqrt(d)), ops.transpose_last(k))
    table = params[f"{prefix}.rel_pos_bias"]
    bias = ops.gather_rows(table, relative_position_index(window_size))     # [n, n, heads]
    attn = ops.add(attn, ops.permute(bias, (2, 0, 1)))

    if mask is not None:
        nw = mask.shape[0]
        if b % nw != 0:
            raise DimensionError(f"{b} windows is not a multiple of the mask's {nw} windows")
        attn = ops.reshape(attn, (b // nw, nw, heads, n, n))
        attn = ops.add(attn, Tensor(mask[:, None], dtype=attn.dtype))
        attn = ops.reshape(attn, (b, heads, n, n))

    attn = ops.softmax(attn, axis=-1)
    out = ops.permute(ops.matmul(attn, v), (0, 2, 1, 3))
    out = ops.reshape(out, (b, n, c))
    return ops.linear(out, params[f"{prefix}.proj.weight"], params[f"{prefix}.proj.bias"])


def block_shift(index: int, height: int, width: int, window_size: int) -> int:
    """第 index 个块的移位量：偶数块不移位，奇数块移 ws/2；特征图不大于窗口时不移位"""
    shift = 0 if index % 2 == 0 else window_size // 2
    return WindowGrid(height, width, window_size, shift).shift


def swin_block(
    x: Tensor,
    params: ModelParams,
    prefix: str,
    height: int,
    width: int,
    heads: int,
    window_size: int,
    shift: int,
    eps: float = 1e-5,
) -> Tensor:
    """
    Swin-TB：LN -> (移位)窗口注意力 -> 残差 -> LN -> MLP -> 残差

    Args:
        x: [n, h·w, c]
        params: 模型参数
        prefix: 块的参数路径前缀
        height: 特征图高
        width: 特征图宽
        heads: 注意力头数
        window_size: 窗口边长
        shift: 0 或 window_size // 2
        eps: LayerNorm 的 ε

    Returns:
        Tensor: 与 x 形状相同
    """
    n, tokens, c = x.shape
    if tokens != height * width:
        raise DimensionError(f"{tokens} tokens do not form a {height}x{width} map")
    grid = WindowGrid(height, width, window_size, shift)
    ws = window_size

    y = ops.layer_norm(x, params[f"{prefix}.norm1.weight"], params[f"{prefix}.norm1.bias"], eps)
    y = cyclic_shift(ops.reshape(y, (n, height, width, c)), grid.shift)
    windows = ops.reshape(window_partition(y, ws), (-1, ws * ws, c))
    mask = attention_mask(height, width, ws, grid.shift) if grid.shift else None
    windows = wmsa(windows, params, f"{prefix}.attn", heads, ws, mask)
    y = window_reverse(ops.reshape(windows, (-1, ws, ws, c)), ws, height, width)
    y = cyclic_shift(y, -grid.shift)
    x = ops.add(x, ops.reshape(y, (n, tokens, c)))

    y = ops.layer_norm(x, params[f"{prefix}.norm2.weight"], params[f"{prefix}.norm2.bias"], eps)
    y = ops.gelu(ops.linear(y, params[f"{prefix}.mlp.fc1.weight"], params[f"{prefix}.mlp.fc1.bias"]))
    y = ops.linear(y, params[f"{prefix}.mlp.fc2.weight"], params[f"{prefix}.mlp.fc2.bias"])
    return ops.add(x, y)


def swin_stage(
    x: Tensor,
    params: ModelParams,
    prefix: str,
    depth: int,
    height: int,
    width: int,
    heads: int,
    window_size: int,
    eps: float = 1e-5,
) -> Tensor:
    """depth 个 Swin-TB 串联，移位量交替"""
    for i in range(depth):
        shift = block_shift(i, height, width, window_size)
        x = swin_block(x, params, f"{prefix}.block{i}", height, width, heads, window_size, shift, eps)
    return x


def patch_partition(x: Tensor, params: ModelParams, prefix: str, patch: int) -> Tuple[Tensor, int, int]:
    """
    把 [n, c_in, H, W] 切成 p×p 不重叠块并线性投影为 token

    Returns:
        Tuple[Tensor, int, int]: ([n, (H/p)·(W/p), d], H/p, W/p)
    """
    n, _, height, width = x.shape
    if height % patch or width % patch:
        raise DimensionError(f"frame {height}x{width} is not a multiple of patch {patch}")
    y = ops.conv2d(x, params[f"{prefix}.weight"], params[f"{prefix}.bias"], stride=patch)
    d = y.shape[1]
    h, w = height // patch, width // patch
    y = ops.permute(y, (0, 2, 3, 1))
    return ops.reshape(y, (n, h * w, d)), h, w


def patch_merging(
    x: Tensor,
    params: ModelParams,
    prefix: str,
    height: int,
    width: int,
    eps: float = 1e-5,
) -> Tensor:
    """
    拼接 2×2 邻域（4c）-> LN -> 线性 4c→2c

    拼接顺序为 (0,0), (1,0), (0,1), (1,1)（行偏移, 列偏移）。

    Returns:
        Tensor: [n, (h/2)·(w/2), 2c]
    """
    n, tokens, c = x.shape
    if height % 2 or width % 2:
        raise DimensionError(f"patch merging needs even extents, got {height}x{width}")
    y = ops.reshape(x, (n, height // 2, 2, width // 2, 2, c))
    y = ops.permute(y, (0, 1, 3, 4, 2, 5))
    y = ops.reshape(y, (n, tokens // 4, 4 * c))
    y = ops.layer_norm(y, params[f"{prefix}.norm.weight"], params[f"{prefix}.norm.bias"], eps)
    return ops.linear(y, params[f"{prefix}.reduction.weight"])


def patch_expanding(
    x: Tensor,
    params: ModelParams,
    prefix: str,
    height: int,
    width: int,
    eps: float = 1e-5,
) -> Tensor:
    """
    线性 c→2c，把 2c 重排为 2×2 空间邻域的 c/2 通道，再做 LN(c/2)

    Returns:
        Tensor: [n, 2h·2w, c/2]
    """
    n, tokens, c = x.shape
    if c % 2:
        raise DimensionError(f"patch expanding needs an even channel count, got {c}")
    y = ops.linear(x, params[f"{prefix}.linear.weight"])
    y = ops.reshape(y, (n, height, width, 2, 2, c // 2))
    y = ops.permute(y, (0, 1, 3, 2, 4, 5))
    y = ops.reshape(y, (n, 4 * tokens, c // 2))
    return ops.layer_norm(y, params[f"{prefix}.norm.weight"], params[f"{prefix}.norm.bias"], eps)
