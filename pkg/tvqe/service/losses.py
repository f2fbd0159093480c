"""
训练损失：Charbonnier、L2 以及两者的加权组合。均按元素取平均。
"""
from typing import Dict, Tuple

import numpy as np

from tvqe.autograd import ops
from tvqe.autograd.tensor import Tensor
from tvqe.entity.errors import DimensionError
from tvqe.entity.training import LossConfig


def _as_tensor(x, like: Tensor) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x), dtype=like.dtype)


def _check_extent(pred: Tensor, target: Tensor) -> None:
    if pred.shape != target.shape:
        raise DimensionError(f"prediction {pred.shape} and target {target.shape} differ in extent")


def charbonnier_loss(pred: Tensor, target, epsilon: float = 1e-6) -> Tensor:
    """mean(sqrt((pred - target)² + ε))，在 pred == target 处同样可微"""
    target = _as_tensor(target, pred)
    _check_extent(pred, target)
    return ops.mean(ops.sqrt(ops.add_scalar(ops.square(ops.sub(pred, target)), epsilon)))


def mse_loss(pred: Tensor, target) -> Tensor:
    """mean((pred - target)²)"""
    target = _as_tensor(target, pred)
    _check_extent(pred, target)
    return ops.mean(ops.square(ops.sub(pred, target)))


def combined_loss(pred: Tensor, target, cfg: LossConfig) -> Tuple[Tensor, Dict[str, float]]:
    """
    α·L_charb + β·L_mse

    Args:
        pred: 预测
        target: 目标
        cfg: 损失权重

    Returns:
        Tuple[Tensor, Dict[str, float]]: (总损失, 各分量数值 charbonnier / mse / total)
    """
    target = _as_tensor(target, pred)
    charb = charbonnier_loss(pred, target, cfg.epsilon)
    mse = mse_loss(pred, target)
    total = ops.add(ops.scale(charb, cfg.alpha), ops.scale(mse, cfg.beta))
    return total, {"charbonnier": charb.item(), "mse": mse.item(), "total": total.item()}
