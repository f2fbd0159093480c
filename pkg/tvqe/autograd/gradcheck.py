"""
中心差分梯度检查。

相对误差定义为 |a - n| / max(|a|, |n|, guard)，a 为反向传播得到的梯度，n 为数值梯度。
"""
import logging
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from tvqe.autograd import ops
from tvqe.autograd.tensor import OPS, Tape, Tensor, backward
from tvqe.entity.errors import GradCheckError, OracleError, UsageError

logger = logging.getLogger(__name__)

ScalarFn = Callable[[Tensor], Tensor]


class GradCheckReport(BaseModel):
    """一次梯度检查的结果"""
    name: str
    max_rel_error: float
    mean_rel_error: float
    max_abs_error: float
    coords: int
    tolerance: float
    passed: bool


def _scalar(out: Tensor) -> float:
    if out.size != 1:
        raise UsageError(f"gradient check needs a scalar-valued function, got shape {out.shape}")
    return out.item()


def _relative_errors(analytic: np.ndarray, numeric: np.ndarray, guard: float) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), guard)
    return np.abs(analytic - numeric) / denom


def analytic_gradient(f: ScalarFn, x: Tensor) -> np.ndarray:
    """
    用反向传播计算 f 在 x 处的梯度

    Args:
        f: 标量函数
        x: 输入张量

    Returns:
        np.ndarray: 与 x 同形状的梯度，f 不依赖 x 时为全零
    """
    leaf = Tensor(x.data, requires_grad=True)
    with Tape() as tape:
        out = f(leaf)
    _scalar(out)
    backward(out, tape)
    return leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)


def numeric_gradient(
    f: ScalarFn,
    x: Tensor,
    step: float = 1e-5,
    coords: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """
    中心差分 (f(x+he) - f(x-he)) / 2h

    Args:
        f: 标量函数
        x: 输入张量
        step: 差分步长 h
        coords: 需要计算的扁平下标；为 None 时计算全部坐标

    Returns:
        np.ndarray: 扁平的数值梯度，未计算的位置为 0
    """
    base = x.data.reshape(-1)
    grad = np.zeros(base.size, dtype=np.float64)
    indices = range(base.size) if coords is None else coords
    for i in indices:
        plus = base.copy()
        plus[i] += step
        minus = base.copy()
        minus[i] -= step
        fp = _scalar(f(Tensor(plus.reshape(x.shape))))
        fm = _scalar(f(Tensor(minus.reshape(x.shape))))
        grad[i] = (fp - fm) / (2.0 * step)
    return grad


def _assert_deterministic(f: ScalarFn, x: Tensor, name: str) -> None:
    first = _scalar(f(Tensor(x.data)))
    second = _scalar(f(Tensor(x.data)))
    if first != second and not (np.isnan(first) and np.isnan(second)):
        raise OracleError(f"function '{name}' is not deterministic: {first!r} != {second!r}")


def finite_diff_check(
    f: ScalarFn,
    x: Tensor,
    step: float = 1e-5,
    tol: float = 1e-5,
    guard: float = 1e-8,
    name: str = "f",
    coords: Optional[Sequence[int]] = None,
) -> GradCheckReport:
    """
    比较反向传播梯度与中心差分梯度

    Args:
        f: 标量、确定性的函数
        x: 检查点
        step: 差分步长
        tol: 允许的最大相对误差
        guard: 相对误差分母的下限
        name: 报告中的名称
        coords: 只检查这些扁平下标；为 None 时检查全部

    Returns:
        GradCheckReport: 最大/平均相对误差

    Raises:
        OracleError: f 两次求值结果不一致时抛出
    """
    _assert_deterministic(f, x, name)
    analytic = analytic_gradient(f, x).reshape(-1).astype(np.float64)
    index = np.arange(x.size) if coords is None else np.asarray(sorted(set(coords)), dtype=np.int64)
    numeric = numeric_gradient(f, x, step, index)
    rel = _relative_errors(analytic[index], numeric[index], guard)
    max_rel = float(rel.max()) if rel.size else 0.0
    report = GradCheckReport(
        name=name,
        max_rel_error=max_rel,
        mean_rel_error=float(rel.mean()) if rel.size else 0.0,
        max_abs_error=float(np.abs(analytic[index] - numeric[index]).max()) if rel.size else 0.0,
        coords=int(index.size),
        tolerance=tol,
        passed=max_rel < tol,
    )
    logger.debug(f"梯度检查 {name}: 最大相对误差 {max_rel:.3e}（{index.size} 个坐标）")
    return report


def check_parameters(
    f: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    step: float = 1e-4,
    tol: float = 1e-4,
    guard: float = 1e-6,
    coords_per_tensor: int = 3,
    seed: int = 0,
) -> List[GradCheckReport]:
    """
    对一组参数逐张量做梯度检查。

    每个张量检查梯度绝对值最大的坐标和 coords_per_tensor 个随机坐标。
    扰动直接写入参数数据，检查结束后逐位恢复。

    Args:
        f: 无参数的标量函数，内部读取 params
        params: 参数路径 -> 张量
        step: 差分步长
        tol: 允许的最大相对误差
        guard: 相对误差分母的下限
        coords_per_tensor: 每个张量的随机坐标数
        seed: 随机坐标的种子

    Returns:
        List[GradCheckReport]: 每个参数张量一份报告，顺序与 params 相同
    """
    first = _scalar(f())
    if _scalar(f()) != first:
        raise OracleError("parameterised function is not deterministic")

    saved_flags = {path: t.requires_grad for path, t in params.items()}
    for t in params.values():
        t.requires_grad = True
        t.zero_grad()
    try:
        with Tape() as tape:
            out = f()
        backward(out, tape)
        grads = {
            path: (t.grad.reshape(-1).astype(np.float64) if t.grad is not None else np.zeros(t.size))
            for path, t in params.items()
        }
    finally:
        for path, t in params.items():
            t.requires_grad = saved_flags[path]
            t.zero_grad()

    rng = np.random.default_rng(seed)
    reports = []
    for path, t in params.items():
        analytic = grads[path]
        chosen = {int(np.argmax(np.abs(analytic)))}
        extra = min(coords_per_tensor, t.size)
        chosen.update(int(i) for i in rng.choice(t.size, size=extra, replace=False))
        index = np.asarray(sorted(chosen), dtype=np.int64)

        flat = t.data.reshape(-1)
        numeric = np.empty(index.size, dtype=np.float64)
        for k, i in enumerate(index):
            original = flat[i]
            flat[i] = original + step
            fp = _scalar(f())
            flat[i] = original - step
            fm = _scalar(f())
            flat[i] = original
            numeric[k] = (fp - fm) / (2.0 * step)

        rel = _relative_errors(analytic[index], numeric, guard)
        max_rel = float(rel.max())
        reports.append(GradCheckReport(
            name=path,
            max_rel_error=max_rel,
            mean_rel_error=float(rel.mean()),
            max_abs_error=float(np.abs(analytic[index] - numeric).max()),
            coords=int(index.size),
            tolerance=tol,
            passed=max_rel < tol,
        ))
    return reports


# ---------------------------------------------------------------------------
# 算子词表的检查用例
# ---------------------------------------------------------------------------

# 用例：标签 -> (输入构造, 算子调用)
# 输入构造接收 rng 返回张量列表；算子调用接收同样长度的张量列表返回输出张量
OpCase = Tuple[Callable[[np.random.Generator], List[np.ndarray]], Callable[[List[Tensor]], Tensor]]


def _u(rng: np.random.Generator, *shape: int, low: float = -2.0, high: float = 2.0) -> np.ndarray:
    return rng.uniform(low, high, size=shape)


OP_CASES: Dict[str, OpCase] = {
    "add": (lambda r: [_u(r, 3, 4), _u(r, 4)], lambda t: ops.add(t[0], t[1])),
    "sub": (lambda r: [_u(r, 2, 3), _u(r, 2, 1)], lambda t: ops.sub(t[0], t[1])),
    "mul": (lambda r: [_u(r, 3, 4), _u(r, 1, 4)], lambda t: ops.mul(t[0], t[1])),
    "neg": (lambda r: [_u(r, 3, 4)], lambda t: ops.neg(t[0])),
    "scale": (lambda r: [_u(r, 3, 4)], lambda t: ops.scale(t[0], 1.7)),
    "add_scalar": (lambda r: [_u(r, 3, 4)], lambda t: ops.add_scalar(t[0], -0.3)),
    "square": (lambda r: [_u(r, 3, 4)], lambda t: ops.square(t[0])),
    "sqrt": (lambda r: [_u(r, 3, 4, low=0.5, high=2.0)], lambda t: ops.sqrt(t[0])),
    "gelu": (lambda r: [_u(r, 3, 4)], lambda t: ops.gelu(t[0])),
    "sum": (lambda r: [_u(r, 2, 3, 4)], lambda t: ops.sum(t[0], axis=1)),
    "mean": (lambda r: [_u(r, 2, 3, 4)], lambda t: ops.mean(t[0], axis=(0, 2), keepdims=True)),
    "matmul": (lambda r: [_u(r, 2, 3, 4), _u(r, 4, 5)], lambda t: ops.matmul(t[0], t[1])),
    "softmax": (lambda r: [_u(r, 3, 5)], lambda t: ops.softmax(t[0], axis=-1)),
    "layer_norm": (
        lambda r: [_u(r, 4, 6), _u(r, 6), _u(r, 6)],
        lambda t: ops.layer_norm(t[0], t[1], t[2]),
    ),
    "conv2d": (
        lambda r: [_u(r, 1, 2, 5, 5), _u(r, 3, 2, 3, 3), _u(r, 3)],
        lambda t: ops.conv2d(t[0], t[1], t[2], padding=1),
    ),
    "conv2d[depthwise]": (
        lambda r: [_u(r, 1, 3, 4, 4), _u(r, 3, 1, 3, 3), _u(r, 3)],
        lambda t: ops.conv2d(t[0], t[1], t[2], padding=1, groups=3),
    ),
    "conv2d[pointwise]": (
        lambda r: [_u(r, 2, 3, 3, 2), _u(r, 4, 3, 1, 1)],
        lambda t: ops.conv2d(t[0], t[1]),
    ),
    "conv2d[strided]": (
        lambda r: [_u(r, 1, 2, 6, 6), _u(r, 3, 2, 2, 2)],
        lambda t: ops.conv2d(t[0], t[1], stride=2),
    ),
    "pixel_shuffle": (lambda r: [_u(r, 1, 4, 2, 3)], lambda t: ops.pixel_shuffle(t[0], 2)),
    "pixel_unshuffle": (lambda r: [_u(r, 1, 1, 4, 6)], lambda t: ops.pixel_unshuffle(t[0], 2)),
    "reshape": (lambda r: [_u(r, 2, 6)], lambda t: ops.reshape(t[0], (3, 4))),
    "permute": (lambda r: [_u(r, 2, 3, 4)], lambda t: ops.permute(t[0], (2, 0, 1))),
    "concat": (lambda r: [_u(r, 2, 3), _u(r, 2, 2)], lambda t: ops.concat([t[0], t[1]], axis=1)),
    "narrow": (lambda r: [_u(r, 3, 5)], lambda t: ops.narrow(t[0], 1, 1, 3)),
    "roll": (lambda r: [_u(r, 1, 4, 4, 2)], lambda t: ops.roll(t[0], (-1, 2), (1, 2))),
    "pad_reflect": (
        lambda r: [_u(r, 1, 1, 4, 5)],
        lambda t: ops.pad_reflect(t[0], ((0, 0), (0, 0), (1, 2), (2, 1))),
    ),
    "gather_rows": (
        lambda r: [_u(r, 5, 3)],
        lambda t: ops.gather_rows(t[0], np.array([[0, 2, 2], [4, 0, 1]])),
    ),
}


def _op_of(label: str) -> str:
    return label.split("[", 1)[0]


def run_op_suite(
    step: float = 1e-5,
    tol: float = 1e-5,
    guard: float = 1e-8,
    seed: int = 0,
) -> List[GradCheckReport]:
    """
    对算子词表中的每个算子、每个输入做梯度检查

    输出通过固定随机权重加权求和得到标量，输入为 [-2, 2] 内的 f64 随机数。

    Args:
        step: 差分步长
        tol: 允许的最大相对误差
        guard: 相对误差分母的下限
        seed: 随机种子

    Returns:
        List[GradCheckReport]: 名称形如 "conv2d[depthwise]:1"（标签:输入序号）

    Raises:
        GradCheckError: 有注册算子没有对应用例时抛出
    """
    missing = sorted(set(OPS) - {_op_of(label) for label in OP_CASES})
    if missing:
        raise GradCheckError(f"no gradient case for ops: {', '.join(missing)}")

    rng = np.random.default_rng(seed)
    reports = []
    for label, (make_inputs, call) in OP_CASES.items():
        arrays = make_inputs(rng)
        out_shape = call([Tensor(a, dtype=np.float64) for a in arrays]).shape
        weights = Tensor(rng.uniform(-1.0, 1.0, size=out_shape), dtype=np.float64)

        for k in range(len(arrays)):
            def f(x: Tensor, k: int = k) -> Tensor:
                inputs = [Tensor(a, dtype=np.float64) for a in arrays]
                inputs[k] = x
                return ops.sum(ops.mul(call(inputs), weights))

            report = finite_diff_check(
                f, Tensor(arrays[k], dtype=np.float64),
                step=step, tol=tol, guard=guard, name=f"{label}:{k}",
            )
            reports.append(report)
    failed = [r.name for r in reports if not r.passed]
    if failed:
        logger.warning(f"算子梯度检查失败: {', '.join(failed)}")
    else:
        logger.info(f"算子梯度检查全部通过，共 {len(reports)} 项")
    return reports
