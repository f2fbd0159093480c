from typing import Dict, Iterable, Tuple

import numpy as np


class OptimState:
    """
    Adam 的状态：每个参数的一阶/二阶矩、步数与超参数。
    矩张量与参数形状完全一致，键为参数路径。
    """

    def __init__(
        self,
        params,
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        """
        Args:
            params: 提供 items() -> (路径, Tensor) 的参数集合
            lr: 学习率
            beta1: 一阶矩衰减
            beta2: 二阶矩衰减
            eps: 分母中的平滑项
        """
        items: Iterable[Tuple[str, object]] = params.items()
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        for path, t in items:
            self.m[path] = np.zeros_like(t.data)
            self.v[path] = np.zeros_like(t.data)

    @classmethod
    def restore(
        cls,
        m: Dict[str, np.ndarray],
        v: Dict[str, np.ndarray],
        step: int,
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> "OptimState":
        """从检查点中的数组恢复状态"""
        state = cls.__new__(cls)
        state.lr, state.beta1, state.beta2, state.eps = lr, beta1, beta2, eps
        state.step = step
        state.m = dict(m)
        state.v = dict(v)
        return state
