"""
模型参数存储。

参数集合完全由 ModelConfig 决定，路径形如 "sstf.enc.stage2.block0.attn.qkv.weight"。
全连接权重形状为 [in, out]，卷积权重形状为 [c_out, c_in/groups, kh, kw]。
"""
import logging
from typing import Dict, Iterator, List, Mapping, Tuple

import numpy as np

from tvqe.autograd.tensor import Tensor
from tvqe.entity.errors import ConfigMismatchError, UsageError
from tvqe.entity.model import ModelConfig

logger = logging.getLogger(__name__)

# 参数种类，决定初始化方式
WEIGHT = "weight"
BIAS = "bias"
NORM_WEIGHT = "norm_weight"
NORM_BIAS = "norm_bias"
REL_POS = "rel_pos"

ParamSpec = Tuple[str, Tuple[int, ...], str]


class ModelParams:
    """
    有序的 参数路径 -> Tensor 映射。
    迭代顺序是规范顺序（由 parameter_specs 决定），保证优化器和检查点的确定性。
    """

    def __init__(self, tensors: Mapping[str, Tensor]):
        self._tensors: Dict[str, Tensor] = dict(tensors)

    def __getitem__(self, path: str) -> Tensor:
        try:
            return self._tensors[path]
        except KeyError:
            raise UsageError(f"unknown parameter path '{path}'") from None

    def __contains__(self, path: str) -> bool:
        return path in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def keys(self) -> List[str]:
        return list(self._tensors)

    def items(self) -> List[Tuple[str, Tensor]]:
        return list(self._tensors.items())

    def values(self) -> List[Tensor]:
        return list(self._tensors.values())

    def num_elements(self) -> int:
        """参数标量总数"""
        return sum(t.size for t in self._tensors.values())

    def requires_grad_(self, flag: bool = True) -> "ModelParams":
        for t in self._tensors.values():
            t.requires_grad = flag
        return self

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.zero_grad()

    def copy(self) -> "ModelParams":
        """深拷贝数据，不复制梯度"""
        return ModelParams({
            path: Tensor(t.data.copy(), requires_grad=t.requires_grad, dtype=t.dtype)
            for path, t in self._tensors.items()
        })

    def set(self, path: str, data: np.ndarray) -> None:
        """
        替换某个参数的数据（形状和类型必须一致），用于测试中构造特定权重

        Args:
            path: 参数路径
            data: 新数据
        """
        old = self[path]
        data = np.asarray(data, dtype=old.dtype)
        if data.shape != old.shape:
            raise UsageError(f"parameter '{path}' has shape {old.shape}, got {data.shape}")
        self._tensors[path] = Tensor(data, requires_grad=old.requires_grad, dtype=old.dtype)

    def state(self) -> Dict[str, np.ndarray]:
        """返回 路径 -> 数据副本"""
        return {path: t.data.copy() for path, t in self._tensors.items()}


# ---------------------------------------------------------------------------
# 参数清单
# ---------------------------------------------------------------------------

def _linear(prefix: str, d_in: int, d_out: int, bias: bool = True) -> List[ParamSpec]:
    specs = [(f"{prefix}.weight", (d_in, d_out), WEIGHT)]
    if bias:
        specs.append((f"{prefix}.bias", (d_out,), BIAS))
    return specs


def _conv(prefix: str, c_in: int, c_out: int, k: int, groups: int = 1, bias: bool = True) -> List[ParamSpec]:
    specs = [(f"{prefix}.weight", (c_out, c_in // groups, k, k), WEIGHT)]
    if bias:
        specs.append((f"{prefix}.bias", (c_out,), BIAS))
    return specs


def _norm(prefix: str, dim: int) -> List[ParamSpec]:
    return [(f"{prefix}.weight", (dim,), NORM_WEIGHT), (f"{prefix}.bias", (dim,), NORM_BIAS)]


def _swin_block(prefix: str, dim: int, heads: int, config: ModelConfig) -> List[ParamSpec]:
    ws = config.window_size
    hidden = config.mlp_hidden(dim)
    return (
        _norm(f"{prefix}.norm1", dim)
        + _linear(f"{prefix}.attn.qkv", dim, 3 * dim)
        + [(f"{prefix}.attn.rel_pos_bias", ((2 * ws - 1) ** 2, heads), REL_POS)]
        + _linear(f"{prefix}.attn.proj", dim, dim)
        + _norm(f"{prefix}.norm2", dim)
        + _linear(f"{prefix}.mlp.fc1", dim, hidden)
        + _linear(f"{prefix}.mlp.fc2", hidden, dim)
    )


def _restormer_block(prefix: str, config: ModelConfig) -> List[ParamSpec]:
    c = config.embed_dim
    hidden = config.gdfn_hidden()
    return (
        _norm(f"{prefix}.norm1", c)
        + _conv(f"{prefix}.attn.qkv", c, 3 * c, 1)
        + _conv(f"{prefix}.attn.qkv_dw", 3 * c, 3 * c, 3, groups=3 * c)
        + _conv(f"{prefix}.attn.proj", c, c, 1)
        + _norm(f"{prefix}.norm2", c)
        + _conv(f"{prefix}.ffn.project_in", c, 2 * hidden, 1)
        + _conv(f"{prefix}.ffn.dw", 2 * hidden, 2 * hidden, 3, groups=2 * hidden)
        + _conv(f"{prefix}.ffn.project_out", hidden, c, 1)
    )


def parameter_specs(config: ModelConfig) -> List[ParamSpec]:
    """
    按规范顺序列出全部参数

    Args:
        config: 模型配置

    Returns:
        List[ParamSpec]: (路径, 形状, 种类)
    """
    d1, d2, d3 = config.stage_dims
    dims = (d1, d2, d3)
    p = config.patch
    specs: List[ParamSpec] = []

    # 编码器
    specs += _conv("sstf.enc.stage1.partition", config.num_frames, d1, p)
    for k in range(3):
        stage = f"sstf.enc.stage{k + 1}"
        if k > 0:
            specs += _norm(f"{stage}.merge.norm", 4 * dims[k - 1])
            specs += _linear(f"{stage}.merge.reduction", 4 * dims[k - 1], dims[k], bias=False)
        for i in range(config.depths[k]):
            specs += _swin_block(f"{stage}.block{i}", dims[k], config.heads[k], config)

    # 解码器：与编码器镜像
    for k in range(3):
        level = 2 - k
        stage = f"sstf.dec.stage{k + 1}"
        if k > 0:
            d_in = dims[level + 1]
            specs += _linear(f"{stage}.expand.linear", d_in, 2 * d_in, bias=False)
            specs += _norm(f"{stage}.expand.norm", d_in // 2)
        for i in range(config.depths[level]):
            specs += _swin_block(f"{stage}.block{i}", dims[level], config.heads[level], config)

    specs += _conv("sstf.head", d1, d1 * p * p, 1)

    for i in range(config.num_restormers):
        specs += _restormer_block(f"caqe.block{i}", config)
    specs += _conv("caqe.rec", d1, 1, 3)
    return specs


def count_parameters(config: ModelConfig) -> int:
    """
    参数个数的解析公式，独立于 parameter_specs 的逐项枚举

    Args:
        config: 模型配置

    Returns:
        int: 参数标量总数
    """
    ws = config.window_size
    p = config.patch
    c = config.embed_dim
    dims = config.stage_dims

    def swin(d: int, heads: int) -> int:
        hid = config.mlp_hidden(d)
        return 4 * d + 3 * d * d + 3 * d + (2 * ws - 1) ** 2 * heads + d * d + d + 2 * d * hid + hid + d

    enc = config.num_frames * p * p * c + c
    dec = 0
    for k in range(3):
        enc += config.depths[k] * swin(dims[k], config.heads[k])
        dec += config.depths[k] * swin(dims[k], config.heads[k])
        if k > 0:
            enc += 8 * dims[k - 1] + 4 * dims[k - 1] * dims[k]
            dec += dims[k] * 2 * dims[k] + dims[k]
    head = c * c * p * p + c * p * p

    h = config.gdfn_hidden()
    restormer = 4 * c + (3 * c * c + 3 * c) + (3 * c * 9 + 3 * c) + (c * c + c) + (2 * h * c + 2 * h) \
        + (2 * h * 9 + 2 * h) + (h * c + c)
    rec = 9 * c + 1
    return enc + dec + head + config.num_restormers * restormer + rec


# ---------------------------------------------------------------------------
# 初始化
# ---------------------------------------------------------------------------

def _truncated_normal(rng: np.random.Generator, shape: Tuple[int, ...], std: float) -> np.ndarray:
    """截断到 ±2σ 的正态分布，越界的样本重新抽取"""
    values = rng.standard_normal(size=shape)
    bad = np.abs(values) > 2.0
    while bad.any():
        values[bad] = rng.standard_normal(size=int(bad.sum()))
        bad = np.abs(values) > 2.0
    return values * std


def param_init(config: ModelConfig, seed: int = 0, std: float = 0.02) -> ModelParams:
    """
    按配置初始化全部参数

    投影权重用标准差 std 的截断正态分布，偏置为 0，LayerNorm γ=1、β=0，相对位置偏置为 0。
    结果完全由 seed 决定。

    Args:
        config: 模型配置
        seed: 随机种子
        std: 权重标准差

    Returns:
        ModelParams: 初始化后的参数
    """
    rng = np.random.default_rng(seed)
    dtype = config.np_dtype
    tensors: Dict[str, Tensor] = {}
    for path, shape, kind in parameter_specs(config):
        if kind == WEIGHT:
            data = _truncated_normal(rng, shape, std)
        elif kind == NORM_WEIGHT:
            data = np.ones(shape)
        else:
            data = np.zeros(shape)
        tensors[path] = Tensor(data, requires_grad=True, dtype=dtype)
    params = ModelParams(tensors)
    logger.debug(f"初始化参数完成: {len(params)} 个张量, {params.num_elements()} 个标量, seed={seed}")
    return params


def check_compatible(config: ModelConfig, params: Mapping[str, Tensor]) -> None:
    """
    检查参数集合是否与配置完全一致（无多余、无缺失、形状相同）

    Args:
        config: 期望的模型配置
        params: 参数映射

    Raises:
        ConfigMismatchError: 路径或形状不一致时抛出，消息中包含第一个出问题的路径
    """
    expected = {path: shape for path, shape, _ in parameter_specs(config)}
    for path in params:
        if path not in expected:
            raise ConfigMismatchError(f"unknown parameter path '{path}'")
    for path, shape in expected.items():
        if path not in params:
            raise ConfigMismatchError(f"missing parameter '{path}'")
        if tuple(params[path].shape) != shape:
            raise ConfigMismatchError(
                f"parameter '{path}' has shape {tuple(params[path].shape)}, expected {shape}"
            )
