# autodiff.py - Dense float64 tensors with tape-based reverse-mode differentiation

import contextlib
import logging
import math
from contextvars import ContextVar
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from services.errors import DimensionError, ConfigurationError

logger = logging.getLogger(__name__)

PAD_MODES = ("zero", "replicate")
_GELU_K = math.sqrt(2.0 / math.pi)

_ACTIVE_TAPE: ContextVar[Optional["Tape"]] = ContextVar("active_tape", default=None)
_GRAD_ENABLED: ContextVar[bool] = ContextVar("grad_enabled", default=True)

ArrayLike = Union["Tensor", np.ndarray, float, int]


class Node:
    """One recorded operation: inputs, output and the adjoint rule"""

    __slots__ = ("op", "inputs", "output", "backward")

    def __init__(self, op: str, inputs: Sequence["Tensor"], output: "Tensor",
                 backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]):
        self.op = op
        self.inputs = list(inputs)
        self.output = output
        self.backward = backward

    def __repr__(self) -> str:
        return f"Node({self.op}, out={self.output.shape})"


class Tape:
    """
    Ordered record of operations for one forward pass.

    Backward walks the nodes in exact reverse insertion order and
    accumulates gradients additively, so a tensor used twice receives
    both contributions. The tape is emptied after backward.
    """

    def __init__(self):
        self.nodes: List[Node] = []
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def record(self, node: Node) -> None:
        self.nodes.append(node)

    def backward(self, root: "Tensor", grad: Optional[np.ndarray] = None) -> List[Node]:
        """Propagate d(root) back through every recorded node; returns the visit order"""
        if grad is None:
            if root.size != 1:
                raise DimensionError(f"backward without an explicit grad needs a scalar, got shape {root.shape}")
            grad = np.ones_like(root.data)
        root._accumulate(np.asarray(grad, dtype=np.float64))

        visited = []
        for node in reversed(self.nodes):
            visited.append(node)
            out_grad = node.output.grad
            if out_grad is None:
                continue
            for tensor, g in zip(node.inputs, node.backward(out_grad)):
                if g is not None and tensor.requires_grad:
                    tensor._accumulate(g)
        self.nodes = []
        return visited

    @staticmethod
    def current() -> Optional["Tape"]:
        """Tape opened by the innermost `with Tape()` block, if any"""
        return _ACTIVE_TAPE.get()


@contextlib.contextmanager
def no_grad():
    """Run operations without recording them"""
    token = _GRAD_ENABLED.set(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.reset(token)


def grad_enabled() -> bool:
    return _GRAD_ENABLED.get()


class Tensor:
    """N-dimensional float64 array with optional gradient tracking"""

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=np.float64, order="C")
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._tape: Optional[Tape] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def _accumulate(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            g = np.broadcast_to(g, self.data.shape)
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: Optional[np.ndarray] = None) -> List[Node]:
        tape = self._tape or Tape.current()
        if tape is None:
            raise ConfigurationError("backward needs operations recorded inside a `with Tape()` block")
        return tape.backward(self, grad)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise DimensionError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # operator sugar
    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        if isinstance(other, (int, float)):
            return scalar_mul(self, float(other))
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return self.__mul__(other)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __neg__(self) -> "Tensor":
        return scalar_mul(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return sum_reduce(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return mean_reduce(self, axis, keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)


def as_tensor(value: ArrayLike) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _make(op: str, out_data: np.ndarray, inputs: Sequence[Tensor],
          backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]) -> Tensor:
    tape = _ACTIVE_TAPE.get()
    tracked = tape is not None and _GRAD_ENABLED.get() and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=tracked)
    if tracked:
        tape.record(Node(op, inputs, out, backward))
        out._tape = tape
    return out


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape"""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast")


# ---------------------------------------------------------------- elementwise

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    return _make("add", a.data + b.data, (a, b),
                 lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)))


def broadcast_add(x: ArrayLike, b: ArrayLike) -> Tensor:
    """x + b where b must broadcast onto x without growing it"""
    x, b = as_tensor(x), as_tensor(b)
    if _broadcast_shape("broadcast_add", x, b) != x.shape:
        raise DimensionError(f"broadcast_add: {b.shape} does not broadcast onto {x.shape}")
    return add(x, b)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    return _make("sub", a.data - b.data, (a, b),
                 lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)))


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    return _make("mul", a.data * b.data, (a, b),
                 lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)))


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", a, b)
    out = a.data / b.data
    return _make("div", out, (a, b),
                 lambda g: (unbroadcast(g / b.data, a.shape),
                            unbroadcast(-g * out / b.data, b.shape)))


def scalar_mul(x: ArrayLike, c: float) -> Tensor:
    x = as_tensor(x)
    c = float(c)
    return _make("scalar_mul", x.data * c, (x,), lambda g: (g * c,))


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -z))


def sigmoid(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    s = _stable_sigmoid(x.data)
    return _make("sigmoid", s, (x,), lambda g: (g * s * (1.0 - s),))


def gelu_like(x: ArrayLike) -> Tensor:
    """Tanh-approximated GELU; smooth everywhere so gradient checks stay clean"""
    x = as_tensor(x)
    z = x.data
    inner = _GELU_K * (z + 0.044715 * z ** 3)
    t = np.tanh(inner)
    out = 0.5 * z * (1.0 + t)

    def backward(g):
        d_inner = _GELU_K * (1.0 + 3.0 * 0.044715 * z ** 2)
        return (g * (0.5 * (1.0 + t) + 0.5 * z * (1.0 - t ** 2) * d_inner),)

    return _make("gelu_like", out, (x,), backward)


# ---------------------------------------------------------------- reductions / layout

def _normalize_axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


def sum_reduce(x: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape),)

    return _make("sum_reduce", out, (x,), backward)


def mean_reduce(x: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    out = x.data.mean(axis=axes, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, x.shape),)

    return _make("mean_reduce", out, (x,), backward)


def reshape(x: ArrayLike, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot view {x.shape} as {tuple(shape)}")
    return _make("reshape", out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: ArrayLike, axes: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    if sorted(a % x.ndim for a in axes) != list(range(x.ndim)):
        raise DimensionError(f"transpose: {axes} is not a permutation of {x.ndim} axes")
    inverse = tuple(np.argsort([a % x.ndim for a in axes]))
    out = np.ascontiguousarray(x.data.transpose(axes))
    return _make("transpose", out, (x,), lambda g: (g.transpose(inverse),))


def take(x: ArrayLike, indices: Sequence[int], axis: int) -> Tensor:
    """Gather along one axis; repeated indices scatter-add on the way back"""
    x = as_tensor(x)
    idx = np.asarray(indices, dtype=np.intp)
    axis = axis % x.ndim
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[axis]):
        raise DimensionError(f"take: index out of range for axis {axis} of shape {x.shape}")
    out = np.take(x.data, idx, axis=axis)

    def backward(g):
        gx = np.zeros((x.shape[axis],) + tuple(np.delete(x.shape, axis)), dtype=np.float64)
        np.add.at(gx, idx, np.moveaxis(g, axis, 0))
        return (np.moveaxis(gx, 0, axis),)

    return _make("take", out, (x,), backward)


def concat(tensors: Sequence[ArrayLike], axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise DimensionError(f"concat: incompatible shapes {[t.shape for t in tensors]} on axis {axis}")
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _make("concat", out, tensors, lambda g: tuple(np.split(g, bounds, axis=axis)))


def pad2d(x: ArrayLike, pads: Tuple[int, int, int, int], mode: str = "zero") -> Tensor:
    """Pad the last two axes by (top, bottom, left, right)"""
    x = as_tensor(x)
    if mode not in PAD_MODES:
        raise ConfigurationError(f"pad_mode must be one of {PAD_MODES}, got {mode!r}")
    top, bottom, left, right = pads
    if min(pads) < 0:
        raise DimensionError(f"pad2d: negative padding {pads}")
    if not any(pads):
        return x
    height, width = x.shape[-2:]
    if mode == "replicate":
        rows = np.clip(np.arange(-top, height + bottom), 0, height - 1)
        cols = np.clip(np.arange(-left, width + right), 0, width - 1)
        return take(take(x, rows, axis=-2), cols, axis=-1)

    widths = [(0, 0)] * (x.ndim - 2) + [(top, bottom), (left, right)]
    out = np.pad(x.data, widths, mode="constant")
    return _make("pad2d", out, (x,),
                 lambda g: (g[..., top:top + height, left:left + width],))


# ---------------------------------------------------------------- linear algebra

def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: inner extents disagree for shapes {a.shape} and {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise DimensionError(f"matmul: batch extents disagree for shapes {a.shape} and {b.shape}")

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

    return _make("matmul", out, (a, b), backward)


def softmax(x: ArrayLike, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    return _make("softmax", s, (x,),
                 lambda g: (s * (g - (g * s).sum(axis=axis, keepdims=True)),))


def layer_norm(x: ArrayLike, gain: ArrayLike, bias: ArrayLike, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale by gain and shift by bias"""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    features = x.shape[-1]
    if gain.shape != (features,) or bias.shape != (features,):
        raise DimensionError(f"layer_norm: gain {gain.shape}/bias {bias.shape} do not match features {features}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    out = xhat * gain.data + bias.data

    def backward(g):
        lead = tuple(range(x.ndim - 1))
        gxhat = g * gain.data
        gx = inv_std * (gxhat - gxhat.mean(axis=-1, keepdims=True)
                        - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
        return gx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _make("layer_norm", out, (x, gain, bias), backward)


# ---------------------------------------------------------------- convolutions

def _output_extent(size: int, kernel: int, stride: int) -> int:
    return (size - kernel) // stride + 1


def _tap(extent_out: int, offset: int, stride: int) -> slice:
    return slice(offset, offset + stride * (extent_out - 1) + 1, stride)


def _conv2d_valid(x: Tensor, w: Tensor, stride: int, groups: int) -> Tensor:
    batch, channels, height, width = x.shape
    out_ch, _, kh, kw = w.shape
    h_out = _output_extent(height, kh, stride)
    w_out = _output_extent(width, kw, stride)

    if groups == 1:
        windows = sliding_window_view(x.data, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
        out = np.tensordot(windows, w.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)

        def backward(g):
            gw = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
            cols = np.tensordot(g, w.data, axes=([1], [0]))  # B, Ho, Wo, C, kh, kw
            gx = np.zeros(x.shape, dtype=np.float64)
            for i in range(kh):
                for j in range(kw):
                    gx[:, :, _tap(h_out, i, stride), _tap(w_out, j, stride)] += \
                        cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            return gx, gw

        return _make("conv2d", np.ascontiguousarray(out), (x, w), backward)

    # depthwise: taps accumulate in row-major kernel order
    out = np.zeros((batch, channels, h_out, w_out), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            tap = x.data[:, :, _tap(h_out, i, stride), _tap(w_out, j, stride)]
            out = out + w.data[:, 0, i, j][None, :, None, None] * tap

    def backward_depthwise(g):
        gx = np.zeros(x.shape, dtype=np.float64)
        gw = np.zeros(w.shape, dtype=np.float64)
        for i in range(kh):
            for j in range(kw):
                rows, cols = _tap(h_out, i, stride), _tap(w_out, j, stride)
                gw[:, 0, i, j] = (g * x.data[:, :, rows, cols]).sum(axis=(0, 2, 3))
                gx[:, :, rows, cols] += g * w.data[:, 0, i, j][None, :, None, None]
        return gx, gw

    return _make("depthwise_conv2d", out, (x, w), backward_depthwise)


def conv2d(x: ArrayLike, w: ArrayLike, bias: Optional[ArrayLike] = None, stride: int = 1,
           padding: int = 0, pad_mode: str = "zero", groups: int = 1) -> Tensor:
    """
    2-D cross-correlation of x[B,C,H,W] with w[O,C/groups,kh,kw].

    groups is 1 (dense) or C (depthwise, O == C). Output extents are
    floor((H + 2p - kh) / stride) + 1.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 4:
        raise DimensionError(f"conv2d: expected 4-D input and kernel, got {x.shape} and {w.shape}")
    if pad_mode not in PAD_MODES:
        raise ConfigurationError(f"pad_mode must be one of {PAD_MODES}, got {pad_mode!r}")
    channels = x.shape[1]
    out_ch, in_per_group, kh, kw = w.shape
    if groups == 1:
        if in_per_group != channels:
            raise DimensionError(f"conv2d: kernel {w.shape} does not match input channels of {x.shape}")
    elif groups == channels:
        if in_per_group != 1 or out_ch != channels:
            raise DimensionError(f"conv2d: depthwise kernel must be ({channels},1,kh,kw), got {w.shape}")
    else:
        raise ConfigurationError(f"conv2d: groups must be 1 or {channels}, got {groups}")
    if stride < 1:
        raise ConfigurationError(f"conv2d: stride must be >= 1, got {stride}")
    if not ((kh % 2 == 1 and kw % 2 == 1) or (kh == stride and kw == stride)):
        raise DimensionError(f"conv2d: kernel {kh}x{kw} must be odd or match stride {stride}")
    if x.shape[2] + 2 * padding < kh or x.shape[3] + 2 * padding < kw:
        raise DimensionError(f"conv2d: kernel {w.shape} larger than padded input {x.shape} (pad {padding})")

    xp = pad2d(x, (padding,) * 4, pad_mode) if padding else x
    out = _conv2d_valid(xp, w, stride, groups)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (out_ch,):
            raise DimensionError(f"conv2d: bias {bias.shape} does not match {out_ch} output channels")
        out = add(out, reshape(bias, (1, out_ch, 1, 1)))
    return out


def deconv2d(x: ArrayLike, w: ArrayLike, bias: Optional[ArrayLike] = None, stride: int = 2) -> Tensor:
    """
    Transposed convolution, the adjoint of conv2d with the same stride.

    w is [C_in, C_out, k, k] with k >= stride; output extent is (H - 1) * stride + k.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 4:
        raise DimensionError(f"deconv2d: expected 4-D input and kernel, got {x.shape} and {w.shape}")
    batch, channels, height, width = x.shape
    in_ch, out_ch, kh, kw = w.shape
    if in_ch != channels:
        raise DimensionError(f"deconv2d: kernel {w.shape} does not match input channels of {x.shape}")
    if kh < stride or kw < stride:
        raise DimensionError(f"deconv2d: kernel {kh}x{kw} smaller than stride {stride}")
    h_out = (height - 1) * stride + kh
    w_out = (width - 1) * stride + kw

    cols = np.tensordot(x.data, w.data, axes=([1], [0]))  # B, H, W, O, kh, kw
    out = np.zeros((batch, out_ch, h_out, w_out), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            out[:, :, _tap(height, i, stride), _tap(width, j, stride)] += \
                cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)

    def backward(g):
        windows = sliding_window_view(g, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
        windows = windows[:, :, :height, :width]
        gx = np.tensordot(windows, w.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        gw = np.tensordot(x.data, windows, axes=([0, 2, 3], [0, 2, 3]))
        return np.ascontiguousarray(gx), gw

    out_t = _make("deconv2d", out, (x, w), backward)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (out_ch,):
            raise DimensionError(f"deconv2d: bias {bias.shape} does not match {out_ch} output channels")
        out_t = add(out_t, reshape(bias, (1, out_ch, 1, 1)))
    return out_t


def bilinear_matrix(size_in: int, size_out: int) -> np.ndarray:
    """Interpolation weights [size_out, size_in] with half-pixel centers"""
    weights = np.zeros((size_out, size_in), dtype=np.float64)
    scale = size_in / size_out
    for o in range(size_out):
        src = min(max((o + 0.5) * scale - 0.5, 0.0), size_in - 1)
        lo = int(math.floor(src))
        hi = min(lo + 1, size_in - 1)
        frac = src - lo
        weights[o, lo] += 1.0 - frac
        weights[o, hi] += frac
    return weights


def resize_bilinear(x: ArrayLike, out_h: int, out_w: int) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 4:
        raise DimensionError(f"resize_bilinear: expected B×C×H×W, got {x.shape}")
    a_h = bilinear_matrix(x.shape[2], out_h)
    a_w = bilinear_matrix(x.shape[3], out_w)
    out = np.einsum("bcow,pw->bcop", np.einsum("oh,bchw->bcow", a_h, x.data), a_w)

    def backward(g):
        return (np.einsum("bcow,oh->bchw", np.einsum("bcop,pw->bcow", g, a_w), a_h),)

    return _make("resize_bilinear", out, (x,), backward)


# ---------------------------------------------------------------- parameters

def init_uniform(shape: Sequence[int], fan_in: int, rng: np.random.Generator,
                 name: Optional[str] = None) -> Tensor:
    """Learnable weight drawn from uniform(-s, s), s = 1/sqrt(fan_in)"""
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=tuple(shape)), requires_grad=True, name=name)


def init_zeros(shape: Sequence[int], name: Optional[str] = None) -> Tensor:
    return Tensor(np.zeros(tuple(shape)), requires_grad=True, name=name)


def init_constant(shape: Sequence[int], value: float, name: Optional[str] = None) -> Tensor:
    return Tensor(np.full(tuple(shape), float(value)), requires_grad=True, name=name)
