"""
最小的稠密张量引擎：行优先、连续存储，固定的算子集合，反向模式自动微分。

前向运算只读输入；会原地修改数据的只有梯度累加和优化器更新。
"""
import logging
import threading
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional, Sequence, Set, Tuple, Type, Union

import numpy as np

from tvqe.entity.errors import NumericError, UsageError

logger = logging.getLogger(__name__)

SUPPORTED_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))

# 已注册的算子：名称 -> Function 子类
OPS: Dict[str, Type["Function"]] = {}

# 测试钩子：名称在此集合中的算子反向结果会被取反
_FAULTY_OPS: Set[str] = set()

_local = threading.local()


class Tensor:
    """
    N 维行优先数组，带可选的梯度缓冲区。

    data 在构造后视为不可变，grad 与 data 形状相同。
    """

    def __init__(
        self,
        data: Union[np.ndarray, float, int, Sequence],
        requires_grad: bool = False,
        dtype: Optional[Union[str, np.dtype]] = None,
    ):
        """
        初始化张量

        Args:
            data: 数据，会被复制为连续数组
            requires_grad: 是否需要梯度
            dtype: float32 或 float64；为 None 时保留浮点输入的类型，其余转为 float32
        """
        arr = np.asarray(data)
        if dtype is None:
            dtype = arr.dtype if arr.dtype in SUPPORTED_DTYPES else np.float32
        dtype = np.dtype(dtype)
        if dtype not in SUPPORTED_DTYPES:
            raise UsageError(f"unsupported dtype {dtype}; use float32 or float64")
        self.data: np.ndarray = np.ascontiguousarray(arr, dtype=dtype)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        """返回数据的副本"""
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        """原地累加梯度（多次使用同一张量时梯度相加）"""
        grad = np.asarray(grad, dtype=self.dtype)
        if grad.shape != self.shape:
            raise UsageError(f"gradient shape {grad.shape} does not match tensor shape {self.shape}")
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    # 运算符重载，具体实现在 ops 模块
    def __add__(self, other):
        from tvqe.autograd import ops
        return ops.add(self, other) if isinstance(other, Tensor) else ops.add_scalar(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from tvqe.autograd import ops
        return ops.sub(self, other) if isinstance(other, Tensor) else ops.add_scalar(self, -other)

    def __rsub__(self, other):
        from tvqe.autograd import ops
        return ops.add_scalar(ops.neg(self), other)

    def __mul__(self, other):
        from tvqe.autograd import ops
        return ops.mul(self, other) if isinstance(other, Tensor) else ops.scale(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from tvqe.autograd import ops
        if isinstance(other, Tensor):
            raise UsageError("tensor / tensor is not in the op vocabulary; divide by a scalar")
        return ops.scale(self, 1.0 / other)

    def __neg__(self):
        from tvqe.autograd import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from tvqe.autograd import ops
        return ops.matmul(self, other)

    def reshape(self, *shape) -> "Tensor":
        from tvqe.autograd import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def permute(self, *axes) -> "Tensor":
        from tvqe.autograd import ops
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.permute(self, axes)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        from tvqe.autograd import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        from tvqe.autograd import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)


class Function:
    """
    可微算子的基类。

    子类实现 forward（接收 numpy 数组）和 backward（接收输出梯度，返回与输入一一对应的梯度元组，
    不需要梯度的位置可以返回 None）。子类通过类属性 name 自动注册到 OPS。
    """
    name = "function"

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if cls.name in OPS:
            raise RuntimeError(f"duplicate op name {cls.name}")
        OPS[cls.name] = cls

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"forward not implemented for {self.name}")

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError(f"backward not implemented for {self.name}")

    @classmethod
    def apply(cls, *tensors: Tensor, **kwargs: Any) -> Tensor:
        """
        创建算子实例，执行前向，并在有活动 Tape 时记录节点

        Args:
            tensors: 输入张量
            kwargs: 算子的非张量参数

        Returns:
            Tensor: 输出张量

        Raises:
            NumericError: 输出包含 NaN/Inf 时抛出
        """
        fn = cls()
        out = fn.forward(*(t.data for t in tensors), **kwargs)
        if not np.isfinite(out).all():
            raise NumericError(cls.name, f"output shape {out.shape}")
        requires_grad = any(t.requires_grad for t in tensors)
        result = Tensor(out, requires_grad=requires_grad, dtype=out.dtype)
        tape = active_tape()
        if tape is not None and requires_grad:
            tape.record(Node(fn, tensors, result))
        return result

    @staticmethod
    def unbroadcast(grad: np.ndarray, to_shape: Tuple[int, ...]) -> np.ndarray:
        """
        把广播后的梯度求和还原到操作数的形状

        Args:
            grad: 广播形状下的梯度
            to_shape: 操作数原始形状

        Returns:
            np.ndarray: 形状为 to_shape 的梯度
        """
        if grad.shape == tuple(to_shape):
            return grad
        while grad.ndim > len(to_shape):
            grad = grad.sum(axis=0)
        for axis, extent in enumerate(to_shape):
            if extent == 1 and grad.shape[axis] != 1:
                grad = grad.sum(axis=axis, keepdims=True)
        return grad


class Node:
    """Tape 中的一条记录：(算子, 输入, 输出)，算子实例保存反向所需的激活值"""

    __slots__ = ("fn", "inputs", "output")

    def __init__(self, fn: Function, inputs: Sequence[Tensor], output: Tensor):
        self.fn = fn
        self.inputs = tuple(inputs)
        self.output = output

    @property
    def op(self) -> str:
        return self.fn.name


class Tape:
    """
    按创建顺序记录的计算图（天然拓扑有序）。

    用法::

        with Tape() as tape:
            loss = f(x)
        backward(loss, tape)
    """

    def __init__(self):
        self.nodes: List[Node] = []

    def record(self, node: Node) -> None:
        self.nodes.append(node)

    def __len__(self) -> int:
        return len(self.nodes)

    def __enter__(self) -> "Tape":
        stack = getattr(_local, "tapes", None)
        if stack is None:
            stack = _local.tapes = []
        stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _local.tapes.pop()

    def backward(self, loss: Tensor) -> None:
        backward(loss, self)


def active_tape() -> Optional[Tape]:
    """返回当前线程最内层的 Tape，没有时返回 None"""
    stack = getattr(_local, "tapes", None)
    return stack[-1] if stack else None


def backward(loss: Tensor, tape: Tape) -> None:
    """
    反向传播：为 tape 中每个 requires_grad 的叶子张量累加精确梯度

    Args:
        loss: 标量损失
        tape: 记录了前向过程的 Tape

    Raises:
        UsageError: loss 不是标量时抛出
    """
    if loss.size != 1:
        raise UsageError(f"backward() needs a scalar loss, got shape {loss.shape}")

    produced = {id(node.output) for node in tape.nodes}
    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: Dict[int, Tensor] = {}

    for node in reversed(tape.nodes):
        grad = grads.pop(id(node.output), None)
        if grad is None:
            continue
        input_grads = node.fn.backward(grad)
        if node.op in _FAULTY_OPS:
            input_grads = tuple(None if g is None else -g for g in input_grads)
        for inp, g in zip(node.inputs, input_grads):
            if g is None or not inp.requires_grad:
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + g
            else:
                grads[key] = g
            if key not in produced:
                leaves[key] = inp

    # 没有被任何节点使用的 loss 本身也可能是叶子
    if id(loss) not in produced and loss.requires_grad:
        leaves[id(loss)] = loss

    for key, leaf in leaves.items():
        if key in grads:
            leaf.accumulate_grad(grads[key])


@contextmanager
def inject_backward_fault(op_name: str) -> Iterator[None]:
    """
    测试钩子：在 with 块内把指定算子的反向梯度取反（梯度检查的变异哨兵）

    Args:
        op_name: 算子名称
    """
    if op_name not in OPS:
        raise UsageError(f"unknown op '{op_name}'")
    _FAULTY_OPS.add(op_name)
    try:
        yield
    finally:
        _FAULTY_OPS.discard(op_name)
