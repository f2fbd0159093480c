"""
Adam 优化器（β₁=0.9, β₂=0.999, ε=1e-8）与全局范数梯度裁剪。

参数更新和梯度清零都是原地操作。
"""
from typing import Optional

import numpy as np

from tvqe.entity.errors import UsageError
from tvqe.entity.optim import OptimState
from tvqe.model.params import ModelParams


def clip_grad_norm(params: ModelParams, max_norm: float) -> float:
    """
    按全局 L2 范数裁剪梯度

    Args:
        params: 模型参数
        max_norm: 允许的最大范数

    Returns:
        float: 裁剪前的全局范数
    """
    total = 0.0
    for _, t in params.items():
        if t.grad is not None:
            total += float(np.sum(t.grad.astype(np.float64) ** 2))
    norm = float(np.sqrt(total))
    if norm > max_norm > 0:
        factor = max_norm / (norm + 1e-12)
        for _, t in params.items():
            if t.grad is not None:
                t.grad *= factor
    return norm


def adam_step(params: ModelParams, state: OptimState, lr: Optional[float] = None) -> None:
    """
    带偏差修正的 Adam 更新，之后清零梯度

    Args:
        params: 模型参数（原地更新）
        state: 优化器状态（原地更新）
        lr: 覆盖 state.lr 的学习率

    Raises:
        UsageError: 某个参数没有梯度时抛出，消息中包含参数路径
    """
    for path, t in params.items():
        if t.grad is None:
            raise UsageError(f"parameter '{path}' has no gradient")
        if path not in state.m:
            raise UsageError(f"parameter '{path}' is not tracked by the optimizer state")

    lr = state.lr if lr is None else lr
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for path, t in params.items():
        g = t.grad
        m, v = state.m[path], state.v[path]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        update = lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        t.data -= update.astype(t.dtype, copy=False)
    params.zero_grad()
