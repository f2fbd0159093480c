"""
端到端梯度检查：算子词表逐个检查 + 完整网络与 Charbonnier 损失的复合检查。
"""
import logging
from typing import List, Optional

import numpy as np

from tvqe.autograd.gradcheck import GradCheckReport, check_parameters, run_op_suite
from tvqe.autograd.tensor import Tensor
from tvqe.entity.errors import GradCheckError
from tvqe.entity.model import ModelConfig
from tvqe.model.network import tvqe_forward
from tvqe.model.params import ModelParams, param_init
from tvqe.service.losses import charbonnier_loss

logger = logging.getLogger(__name__)

# 目标帧偏移到远离预测的位置，使 Charbonnier 处在光滑区域
TARGET_OFFSET = 1.5


def check_model(
    config: Optional[ModelConfig] = None,
    extent: int = 16,
    seed: int = 0,
    step: float = 1e-5,
    tol: float = 1e-4,
    guard: float = 1e-6,
    coords_per_tensor: int = 3,
    params: Optional[ModelParams] = None,
) -> List[GradCheckReport]:
    """
    对 tvqe_forward + Charbonnier 的每个参数张量做有限差分检查

    Args:
        config: 模型配置，默认使用 toy 配置
        extent: 输入帧边长
        seed: 输入、参数和采样坐标的种子
        step: 差分步长
        tol: 允许的最大相对误差
        guard: 相对误差分母的下限
        coords_per_tensor: 每个张量的随机坐标数
        params: 给出时检查这组参数，否则按种子初始化

    Returns:
        List[GradCheckReport]: 每个参数张量一份报告，名称为 "model:<参数路径>"
    """
    config = config or ModelConfig.toy()
    if params is None:
        params = param_init(config, seed)
    rng = np.random.default_rng(seed)
    frames = rng.uniform(0.0, 1.0, size=(1, config.num_frames, extent, extent))
    target = frames[:, config.radius:config.radius + 1] + TARGET_OFFSET
    x = Tensor(frames, dtype=config.np_dtype)
    y = Tensor(target, dtype=config.np_dtype)

    def objective() -> Tensor:
        return charbonnier_loss(tvqe_forward(x, params, config), y)

    reports = check_parameters(
        objective, dict(params.items()), step=step, tol=tol, guard=guard,
        coords_per_tensor=coords_per_tensor, seed=seed,
    )
    for r in reports:
        r.name = f"model:{r.name}"
    return reports


def run_gradcheck(
    config: Optional[ModelConfig] = None,
    extent: int = 16,
    seed: int = 0,
    tol: float = 1e-4,
    include_model: bool = True,
) -> List[GradCheckReport]:
    """
    运行全部梯度检查

    Args:
        config: 复合检查使用的模型配置
        extent: 复合检查的帧边长
        seed: 随机种子
        tol: 复合检查的容差（算子检查使用更严格的 1e-5）
        include_model: 是否包含完整网络的复合检查

    Returns:
        List[GradCheckReport]: 全部报告
    """
    reports = run_op_suite(seed=seed)
    if include_model:
        logger.info("开始完整网络的梯度检查")
        reports += check_model(config, extent=extent, seed=seed, tol=tol)
    failed = [r for r in reports if not r.passed]
    logger.info(f"梯度检查完成: {len(reports) - len(failed)}/{len(reports)} 项通过")
    return reports


def assert_passed(reports: List[GradCheckReport]) -> None:
    """
    有未通过的检查时抛出

    Raises:
        GradCheckError: 消息列出未通过的检查名及其最大相对误差
    """
    failed = [r for r in reports if not r.passed]
    if failed:
        detail = ", ".join(f"{r.name} ({r.max_rel_error:.3e})" for r in failed)
        raise GradCheckError(f"{len(failed)} gradient check(s) failed: {detail}")
