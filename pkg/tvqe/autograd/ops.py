"""
固定的算子集合。每个算子是一个 Function 子类，外加同名的函数式包装。

所有归约都按 numpy 的线性下标顺序进行，同一进程内相同输入得到逐位相同的输出。
"""
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from tvqe.autograd.tensor import Function, Tensor
from tvqe.entity.errors import DimensionError, UsageError

Axis = Optional[Union[int, Tuple[int, ...]]]

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _check_same_dtype(name: str, *arrays: np.ndarray) -> None:
    dtypes = {a.dtype for a in arrays}
    if len(dtypes) > 1:
        raise UsageError(f"{name}: mixed dtypes {sorted(str(d) for d in dtypes)}")


# ---------------------------------------------------------------------------
# 逐元素运算
# ---------------------------------------------------------------------------

class Add(Function):
    name = "add"

    def forward(self, a, b):
        _check_same_dtype(self.name, a, b)
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        return self.unbroadcast(grad, self.shapes[0]), self.unbroadcast(grad, self.shapes[1])


class Sub(Function):
    name = "sub"

    def forward(self, a, b):
        _check_same_dtype(self.name, a, b)
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        return self.unbroadcast(grad, self.shapes[0]), self.unbroadcast(-grad, self.shapes[1])


class Mul(Function):
    name = "mul"

    def forward(self, a, b):
        _check_same_dtype(self.name, a, b)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return (self.unbroadcast(grad * self.b, self.a.shape),
                self.unbroadcast(grad * self.a, self.b.shape))


class Neg(Function):
    name = "neg"

    def forward(self, x):
        return -x

    def backward(self, grad):
        return (-grad,)


class Scale(Function):
    name = "scale"

    def forward(self, x, c: float = 1.0):
        self.c = c
        return (x * c).astype(x.dtype, copy=False)

    def backward(self, grad):
        return ((grad * self.c).astype(grad.dtype, copy=False),)


class AddScalar(Function):
    name = "add_scalar"

    def forward(self, x, c: float = 0.0):
        return (x + c).astype(x.dtype, copy=False)

    def backward(self, grad):
        return (grad,)


class Square(Function):
    name = "square"

    def forward(self, x):
        self.x = x
        return x * x

    def backward(self, grad):
        return (2.0 * self.x * grad,)


class Sqrt(Function):
    name = "sqrt"

    def forward(self, x):
        if (x < 0).any():
            raise UsageError("sqrt of a negative value")
        self.y = np.sqrt(x)
        return self.y

    def backward(self, grad):
        return (grad / (2.0 * self.y),)


class Gelu(Function):
    """精确 GELU：x·Φ(x)，Φ 为标准正态分布函数"""
    name = "gelu"

    def forward(self, x):
        self.x = x
        self.cdf = 0.5 * (1.0 + erf(x / _SQRT2))
        return (x * self.cdf).astype(x.dtype, copy=False)

    def backward(self, grad):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * self.x * self.x)
        return ((grad * (self.cdf + self.x * pdf)).astype(grad.dtype, copy=False),)


# ---------------------------------------------------------------------------
# 归约
# ---------------------------------------------------------------------------

def _normalize_axes(axis: Axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


class Sum(Function):
    name = "sum"

    def forward(self, x, axis: Axis = None, keepdims: bool = False):
        self.shape = x.shape
        self.axes = _normalize_axes(axis, x.ndim)
        self.keepdims = keepdims
        return np.asarray(x.sum(axis=self.axes, keepdims=keepdims))

    def backward(self, grad):
        if not self.keepdims:
            for a in self.axes:
                grad = np.expand_dims(grad, a)
        return (np.broadcast_to(grad, self.shape).copy(),)


class Mean(Function):
    name = "mean"

    def forward(self, x, axis: Axis = None, keepdims: bool = False):
        self.shape = x.shape
        self.axes = _normalize_axes(axis, x.ndim)
        self.keepdims = keepdims
        self.count = int(np.prod([x.shape[a] for a in self.axes])) if self.axes else 1
        return np.asarray(x.mean(axis=self.axes, keepdims=keepdims))

    def backward(self, grad):
        if not self.keepdims:
            for a in self.axes:
                grad = np.expand_dims(grad, a)
        return ((np.broadcast_to(grad, self.shape) / self.count).astype(grad.dtype),)


# ---------------------------------------------------------------------------
# 线性代数与归一化
# ---------------------------------------------------------------------------

class MatMul(Function):
    name = "matmul"

    def forward(self, a, b):
        _check_same_dtype(self.name, a, b)
        if a.ndim < 2 or b.ndim < 2:
            raise DimensionError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
        if a.shape[-1] != b.shape[-2]:
            raise DimensionError(f"matmul inner extents differ: {a.shape} @ {b.shape}")
        try:
            np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
        except ValueError as e:
            raise DimensionError(f"matmul batch extents not broadcastable: {a.shape} @ {b.shape}") from e
        self.a, self.b = a, b
        return np.matmul(a, b)

    def backward(self, grad):
        ga = np.matmul(grad, np.swapaxes(self.b, -1, -2))
        gb = np.matmul(np.swapaxes(self.a, -1, -2), grad)
        return self.unbroadcast(ga, self.a.shape), self.unbroadcast(gb, self.b.shape)


class Softmax(Function):
    name = "softmax"

    def forward(self, x, axis: int = -1):
        if not -x.ndim <= axis < x.ndim:
            raise UsageError(f"softmax axis {axis} invalid for shape {x.shape}")
        self.axis = axis
        shifted = x - x.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        self.y = e / e.sum(axis=axis, keepdims=True)
        return self.y

    def backward(self, grad):
        y = self.y
        return (y * (grad - (grad * y).sum(axis=self.axis, keepdims=True)),)


class LayerNorm(Function):
    """在最后一个轴上做归一化，然后做逐通道仿射"""
    name = "layer_norm"

    def forward(self, x, gamma, beta, eps: float = 1e-5):
        _check_same_dtype(self.name, x, gamma, beta)
        c = x.shape[-1]
        if gamma.shape != (c,) or beta.shape != (c,):
            raise DimensionError(
                f"layer_norm affine extents {gamma.shape}/{beta.shape} do not match normalized axis {c}"
            )
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        self.inv_std = 1.0 / np.sqrt(var + eps)
        self.xhat = centered * self.inv_std
        self.gamma = gamma
        return (self.xhat * gamma + beta).astype(x.dtype, copy=False)

    def backward(self, grad):
        c = self.xhat.shape[-1]
        lead = tuple(range(grad.ndim - 1))
        g_gamma = (grad * self.xhat).sum(axis=lead)
        g_beta = grad.sum(axis=lead)
        dxhat = grad * self.gamma
        gx = (self.inv_std / c) * (
            c * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - self.xhat * (dxhat * self.xhat).sum(axis=-1, keepdims=True)
        )
        return gx.astype(grad.dtype, copy=False), g_gamma, g_beta


# ---------------------------------------------------------------------------
# 卷积与像素重排
# ---------------------------------------------------------------------------

class Conv2d(Function):
    """
    二维卷积，NCHW 布局，零填充。
    支持逐点（1×1, groups=1）、深度可分离（groups=c_in）和稠密 3×3 三种形式。
    """
    name = "conv2d"

    def forward(self, x, w, b=None, stride: int = 1, padding: int = 0, groups: int = 1):
        arrays = (x, w) if b is None else (x, w, b)
        _check_same_dtype(self.name, *arrays)
        if x.ndim != 4 or w.ndim != 4:
            raise DimensionError(f"conv2d expects 4-d input and weight, got {x.shape} and {w.shape}")
        n, cin, h, wd = x.shape
        cout, cin_g, kh, kw = w.shape
        if groups < 1 or cin % groups != 0 or cout % groups != 0 or cin // groups != cin_g:
            raise DimensionError(
                f"conv2d group/channel mismatch: input {x.shape}, weight {w.shape}, groups={groups}"
            )
        if b is not None and b.shape != (cout,):
            raise DimensionError(f"conv2d bias shape {b.shape} does not match {cout} output channels")
        if stride < 1 or padding < 0:
            raise UsageError(f"conv2d needs stride >= 1 and padding >= 0, got {stride}/{padding}")
        oh = (h + 2 * padding - kh) // stride + 1
        ow = (wd + 2 * padding - kw) // stride + 1
        if oh < 1 or ow < 1:
            raise DimensionError(f"conv2d kernel {kh}x{kw} larger than padded input {h}x{wd}")

        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
        self.xp, self.w = xp, w
        self.has_bias = b is not None
        self.cfg = (stride, padding, groups, oh, ow, x.shape)

        if groups == 1:
            cols = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :oh, :ow]
            out = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3]))       # n, oh, ow, cout
            out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
        elif cin_g == 1 and cout == cin:
            out = np.zeros((n, cout, oh, ow), dtype=x.dtype)
            for i in range(kh):
                for j in range(kw):
                    patch = xp[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride]
                    out += patch * w[:, 0, i, j][None, :, None, None]
        else:
            cout_g = cout // groups
            parts = []
            for g in range(groups):
                xg = xp[:, g * cin_g:(g + 1) * cin_g]
                wg = w[g * cout_g:(g + 1) * cout_g]
                cols = sliding_window_view(xg, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :oh, :ow]
                parts.append(np.tensordot(cols, wg, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2))
            out = np.ascontiguousarray(np.concatenate(parts, axis=1))
        if b is not None:
            out = out + b[None, :, None, None]
        return out

    def backward(self, grad):
        stride, padding, groups, oh, ow, in_shape = self.cfg
        xp, w = self.xp, self.w
        cout, cin_g, kh, kw = w.shape
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(w)

        if groups == 1:
            cols = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :oh, :ow]
            gw = np.tensordot(grad, cols, axes=([0, 2, 3], [0, 2, 3])).astype(w.dtype)  # cout, cin, kh, kw
            for i in range(kh):
                for j in range(kw):
                    contrib = np.tensordot(grad, w[:, :, i, j], axes=([1], [0]))  # n, oh, ow, cin
                    gxp[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += contrib.transpose(0, 3, 1, 2)
        elif cin_g == 1 and cout == xp.shape[1]:
            for i in range(kh):
                for j in range(kw):
                    window = (slice(None), slice(None),
                              slice(i, i + stride * oh, stride), slice(j, j + stride * ow, stride))
                    gw[:, 0, i, j] = (grad * xp[window]).sum(axis=(0, 2, 3))
                    gxp[window] += grad * w[:, 0, i, j][None, :, None, None]
        else:
            cout_g = cout // groups
            for g in range(groups):
                cs = slice(g * cin_g, (g + 1) * cin_g)
                os_ = slice(g * cout_g, (g + 1) * cout_g)
                xg = xp[:, cs]
                gg = grad[:, os_]
                cols = sliding_window_view(xg, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :oh, :ow]
                gw[os_] = np.tensordot(gg, cols, axes=([0, 2, 3], [0, 2, 3]))
                for i in range(kh):
                    for j in range(kw):
                        contrib = np.tensordot(gg, w[os_, :, i, j], axes=([1], [0]))
                        gxp[:, cs, i:i + stride * oh:stride, j:j + stride * ow:stride] += contrib.transpose(0, 3, 1, 2)

        h, wd = in_shape[2], in_shape[3]
        gx = gxp[:, :, padding:padding + h, padding:padding + wd] if padding else gxp
        gx = np.ascontiguousarray(gx)
        if self.has_bias:
            return gx, gw, grad.sum(axis=(0, 2, 3))
        return gx, gw


def _shuffle(x: np.ndarray, r: int) -> np.ndarray:
    n, c, h, w = x.shape
    if c % (r * r) != 0:
        raise DimensionError(f"pixel_shuffle: {c} channels not divisible by r^2={r * r}")
    y = x.reshape(n, c // (r * r), r, r, h, w).transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(y.reshape(n, c // (r * r), h * r, w * r))


def _unshuffle(x: np.ndarray, r: int) -> np.ndarray:
    n, c, h, w = x.shape
    if h % r != 0 or w % r != 0:
        raise DimensionError(f"pixel_unshuffle: extent {h}x{w} not divisible by r={r}")
    y = x.reshape(n, c, h // r, r, w // r, r).transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(y.reshape(n, c * r * r, h // r, w // r))


class PixelShuffle(Function):
    name = "pixel_shuffle"

    def forward(self, x, r: int = 2):
        if x.ndim != 4 or r < 1:
            raise DimensionError(f"pixel_shuffle expects NCHW input and r >= 1, got {x.shape}, r={r}")
        self.r = r
        return _shuffle(x, r)

    def backward(self, grad):
        return (_unshuffle(grad, self.r),)


class PixelUnshuffle(Function):
    name = "pixel_unshuffle"

    def forward(self, x, r: int = 2):
        if x.ndim != 4 or r < 1:
            raise DimensionError(f"pixel_unshuffle expects NCHW input and r >= 1, got {x.shape}, r={r}")
        self.r = r
        return _unshuffle(x, r)

    def backward(self, grad):
        return (_shuffle(grad, self.r),)


# ---------------------------------------------------------------------------
# 形状与索引
# ---------------------------------------------------------------------------

class Reshape(Function):
    name = "reshape"

    def forward(self, x, shape: Tuple[int, ...] = ()):
        self.in_shape = x.shape
        try:
            return x.reshape(shape).copy()
        except ValueError as e:
            raise DimensionError(f"cannot reshape {x.shape} to {shape}") from e

    def backward(self, grad):
        return (grad.reshape(self.in_shape),)


class Permute(Function):
    """轴置换，结果总是重新物化为连续数组"""
    name = "permute"

    def forward(self, x, axes: Tuple[int, ...] = ()):
        if sorted(a % x.ndim for a in axes) != list(range(x.ndim)):
            raise DimensionError(f"invalid permutation {axes} for rank {x.ndim}")
        self.axes = tuple(axes)
        return np.ascontiguousarray(x.transpose(self.axes))

    def backward(self, grad):
        return (np.ascontiguousarray(grad.transpose(np.argsort(self.axes))),)


class Concat(Function):
    name = "concat"

    def forward(self, *xs, axis: int = 0):
        _check_same_dtype(self.name, *xs)
        self.axis = axis
        self.sizes = [x.shape[axis] for x in xs]
        try:
            return np.concatenate(xs, axis=axis)
        except ValueError as e:
            raise DimensionError(f"cannot concat shapes {[x.shape for x in xs]} along {axis}") from e

    def backward(self, grad):
        bounds = np.cumsum(self.sizes)[:-1]
        return tuple(np.ascontiguousarray(g) for g in np.split(grad, bounds, axis=self.axis))


class Narrow(Function):
    """沿某个轴取连续切片 [start, start+length)"""
    name = "narrow"

    def forward(self, x, axis: int = 0, start: int = 0, length: int = 1):
        axis = axis % x.ndim
        if start < 0 or length < 1 or start + length > x.shape[axis]:
            raise DimensionError(f"narrow [{start}, {start + length}) out of range for axis {axis} of {x.shape}")
        self.in_shape = x.shape
        self.index = tuple(slice(start, start + length) if a == axis else slice(None) for a in range(x.ndim))
        return np.ascontiguousarray(x[self.index])

    def backward(self, grad):
        g = np.zeros(self.in_shape, dtype=grad.dtype)
        g[self.index] = grad
        return (g,)


class Roll(Function):
    """环形平移"""
    name = "roll"

    def forward(self, x, shifts: Tuple[int, ...] = (), axes: Tuple[int, ...] = ()):
        self.shifts, self.axes = tuple(shifts), tuple(axes)
        return np.roll(x, self.shifts, axis=self.axes)

    def backward(self, grad):
        return (np.roll(grad, tuple(-s for s in self.shifts), axis=self.axes),)


class PadReflect(Function):
    """反射填充（不重复边缘像素），pads 为每个轴的 (前, 后)"""
    name = "pad_reflect"

    def forward(self, x, pads: Tuple[Tuple[int, int], ...] = ()):
        if len(pads) != x.ndim:
            raise DimensionError(f"pad_reflect needs {x.ndim} (before, after) pairs, got {len(pads)}")
        self.pads = tuple((int(a), int(b)) for a, b in pads)
        self.in_shape = x.shape
        if all(a == 0 and b == 0 for a, b in self.pads):
            return x.copy()
        return np.pad(x, self.pads, mode="reflect")

    def backward(self, grad):
        g = grad
        for axis in reversed(range(len(self.in_shape))):
            before, after = self.pads[axis]
            if before == 0 and after == 0:
                continue
            n = self.in_shape[axis]
            idx = np.pad(np.arange(n), (before, after), mode="reflect")
            moved = np.moveaxis(g, axis, 0)
            acc = np.zeros((n,) + moved.shape[1:], dtype=g.dtype)
            np.add.at(acc, idx, moved)
            g = np.moveaxis(acc, 0, axis)
        return (np.ascontiguousarray(g),)


class GatherRows(Function):
    """按整数下标取表的行：out = table[index]，用于相对位置偏置查表"""
    name = "gather_rows"

    def forward(self, table, index: np.ndarray = None):
        index = np.asarray(index)
        if index.dtype.kind not in "iu":
            raise UsageError("gather_rows index must be integer")
        if index.size and (index.min() < 0 or index.max() >= table.shape[0]):
            raise DimensionError(f"gather_rows index out of range for table of {table.shape[0]} rows")
        self.index = index
        self.table_shape = table.shape
        return np.ascontiguousarray(table[index])

    def backward(self, grad):
        g = np.zeros(self.table_shape, dtype=grad.dtype)
        np.add.at(g, self.index.reshape(-1), grad.reshape((-1,) + self.table_shape[1:]))
        return (g,)


# ---------------------------------------------------------------------------
# 函数式接口
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    return Add.apply(a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return Sub.apply(a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return Mul.apply(a, b)


def neg(x: Tensor) -> Tensor:
    return Neg.apply(x)


def scale(x: Tensor, c: float) -> Tensor:
    return Scale.apply(x, c=float(c))


def add_scalar(x: Tensor, c: float) -> Tensor:
    return AddScalar.apply(x, c=float(c))


def square(x: Tensor) -> Tensor:
    return Square.apply(x)


def sqrt(x: Tensor) -> Tensor:
    return Sqrt.apply(x)


def gelu(x: Tensor) -> Tensor:
    return Gelu.apply(x)


def sum(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def mean(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    return Mean.apply(x, axis=axis, keepdims=keepdims)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return MatMul.apply(a, b)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    return Softmax.apply(x, axis=axis)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    return LayerNorm.apply(x, gamma, beta, eps=eps)


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    groups: int = 1,
) -> Tensor:
    tensors = (x, weight) if bias is None else (x, weight, bias)
    return Conv2d.apply(*tensors, stride=stride, padding=padding, groups=groups)


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    return PixelShuffle.apply(x, r=r)


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    return PixelUnshuffle.apply(x, r=r)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def permute(x: Tensor, axes: Sequence[int]) -> Tensor:
    return Permute.apply(x, axes=tuple(axes))


def transpose_last(x: Tensor) -> Tensor:
    """交换最后两个轴"""
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return permute(x, axes)


def concat(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    return Concat.apply(*xs, axis=axis)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    return Narrow.apply(x, axis=axis, start=start, length=length)


def split(x: Tensor, parts: int, axis: int = 0) -> Tuple[Tensor, ...]:
    """把某个轴均分成 parts 份"""
    extent = x.shape[axis]
    if extent % parts != 0:
        raise DimensionError(f"cannot split axis {axis} of extent {extent} into {parts} parts")
    size = extent // parts
    return tuple(narrow(x, axis, k * size, size) for k in range(parts))


def roll(x: Tensor, shifts: Sequence[int], axes: Sequence[int]) -> Tensor:
    return Roll.apply(x, shifts=tuple(shifts), axes=tuple(axes))


def pad_reflect(x: Tensor, pads: Sequence[Tuple[int, int]]) -> Tensor:
    return PadReflect.apply(x, pads=tuple(tuple(p) for p in pads))


def crop(x: Tensor, height: int, width: int) -> Tensor:
    """裁掉 NCHW 张量右下方的填充"""
    if x.shape[-2] == height and x.shape[-1] == width:
        return x
    return narrow(narrow(x, -2, 0, height), -1, 0, width)


def gather_rows(table: Tensor, index: np.ndarray) -> Tensor:
    return GatherRows.apply(table, index=index)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """全连接层：x @ weight (+ bias)，weight 形状为 [in, out]"""
    y = matmul(x, weight) if x.ndim >= 2 else reshape(matmul(reshape(x, (1, -1)), weight), (-1,))
    return y if bias is None else add(y, bias)
