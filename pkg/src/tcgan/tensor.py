"""Small dense-tensor engine with define-by-run reverse-mode differentiation.

Every op that touches a tensor with ``requires_grad`` records its output on the
thread's current :class:`Tape`. :func:`backward` walks that tape in reverse,
assigns fresh gradients to the leaves, and then closes the tape. A closed tape
cannot be differentiated again, so a second ``backward`` on the same loss fails.

All data is float64.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

BN_EPS = 1e-5
BN_MOMENTUM = 0.9
BCE_CLAMP = 1e-7

_SIG_HI = np.nextafter(1.0, 0.0)
_SIG_LO = np.finfo(np.float64).tiny


class ShapeError(ValueError):
    pass


class GeometryError(ValueError):
    pass


class ContractError(RuntimeError):
    pass


class Tape:
    """Ordered record of op outputs; parents always precede children."""

    def __init__(self):
        self.nodes: list[Tensor] = []
        self.closed = False

    def record(self, t: "Tensor") -> None:
        if self.closed:
            raise ContractError("cannot record on a closed tape")
        t.node_id = len(self.nodes)
        t.tape = self
        self.nodes.append(t)

    def __len__(self):
        return len(self.nodes)


_local = threading.local()


def current_tape() -> Tape:
    tape = getattr(_local, "tape", None)
    if tape is None or tape.closed:
        tape = _local.tape = Tape()
    return tape


def grad_enabled() -> bool:
    return getattr(_local, "enabled", True)


@contextmanager
def no_grad():
    prev = grad_enabled()
    _local.enabled = False
    try:
        yield
    finally:
        _local.enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "tape", "node_id", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn = None
        self.tape: Tape | None = None
        self.node_id: int | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return self.backward_fn is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out.tape = None
    out.node_id = None
    out.parents = ()
    out.backward_fn = None
    out.requires_grad = grad_enabled() and any(p.requires_grad for p in parents)
    if out.requires_grad:
        out.parents = parents
        out.backward_fn = backward_fn
        current_tape().record(out)
    return out


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every leaf reached from the tape of ``loss``.

    Leaf gradients are assigned, not accumulated: each call reflects one loss.
    Leaves that feed the tape but do not influence ``loss`` receive zeros.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = loss.tape
    if tape is None or tape.closed:
        raise ContractError("loss is not on an active tape (already differentiated or built under no_grad)")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}
    for node in reversed(tape.nodes[: loss.node_id + 1]):
        g = grads.pop(id(node), None)
        for p in node.parents:
            if p.requires_grad and p.is_leaf:
                leaves[id(p)] = p
        if g is None:
            continue
        for p, pg in zip(node.parents, node.backward_fn(g)):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    for key, leaf in leaves.items():
        g = grads.get(key)
        leaf.grad = np.zeros_like(leaf.data) if g is None else g.reshape(leaf.data.shape)

    for node in tape.nodes:
        node.parents = ()
        node.backward_fn = None
    tape.closed = True


# ---------------------------------------------------------------------------
# elementwise and structural helpers


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} differ")
    return _result(a.data + b.data, (a, b), lambda g: (g, g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")
    ad, bd = a.data, b.data
    return _result(ad * bd, (a, b), lambda g: (g * bd, g * ad))


def scale(a: Tensor, c: float) -> Tensor:
    return _result(a.data * c, (a,), lambda g: (g * c,))


def total(a: Tensor) -> Tensor:
    shape = a.shape
    return _result(np.array(a.data.sum()), (a,), lambda g: (np.full(shape, float(g)),))


def mean(a: Tensor) -> Tensor:
    shape, n = a.shape, a.data.size
    return _result(np.array(a.data.mean()), (a,), lambda g: (np.full(shape, float(g) / n),))


def reshape(a: Tensor, shape) -> Tensor:
    old = a.shape
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(tensors: list[Tensor], axis: int) -> Tensor:
    """Join along ``axis``; all other extents must agree."""
    ref = tensors[0].shape
    for t in tensors[1:]:
        if len(t.shape) != len(ref) or any(
            i != axis % len(ref) and t.shape[i] != ref[i] for i in range(len(ref))
        ):
            raise ShapeError(f"concat: shape {t.shape} incompatible with {ref} off axis {axis}")
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def bwd(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), bwd)


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0.0)
    return _result(out, (x,), lambda g: (g * (out > 0),))


def sigmoid(x: Tensor) -> Tensor:
    """Logistic function, clipped so the output never reaches 0 or 1 exactly."""
    d = x.data
    e = np.exp(-np.abs(d))
    s = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    s = np.clip(s, _SIG_LO, _SIG_HI)
    return _result(s, (x,), lambda g: (g * s * (1.0 - s),))


def bce_loss(pred: Tensor, target) -> Tensor:
    """Mean binary cross-entropy with predictions clamped to [1e-7, 1-1e-7].

    The clamp is a hard clip; the gradient is zero where it is active.
    """
    target = as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"bce_loss: pred shape {pred.shape} != target shape {target.shape}")
    y = target.data
    raw = pred.data
    p = np.clip(raw, BCE_CLAMP, 1.0 - BCE_CLAMP)
    active = (raw >= BCE_CLAMP) & (raw <= 1.0 - BCE_CLAMP)
    n = p.size
    loss = -np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p))

    def bwd(g):
        dp = (-(y / p) + (1.0 - y) / (1.0 - p)) / n
        return (float(g) * dp * active, None)

    return _result(np.array(loss), (pred, target), bwd)


# ---------------------------------------------------------------------------
# network layers


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    if x.data.ndim != 2 or weight.data.ndim != 2:
        raise ShapeError(f"dense: expected 2-d input and weight, got {x.shape} and {weight.shape}")
    if x.shape[1] != weight.shape[0]:
        raise ShapeError(
            f"dense: axis 1 of input ({x.shape[1]}) does not match axis 0 of weight ({weight.shape[0]})"
        )
    if bias.shape != (weight.shape[1],):
        raise ShapeError(f"dense: bias axis 0 must be {weight.shape[1]}, got {bias.shape}")
    xd, wd = x.data, weight.data

    def bwd(g):
        return g @ wd.T, xd.T @ g, g.sum(axis=0)

    return _result(xd @ wd + bias.data, (x, weight, bias), bwd)


def conv1d_out_len(length: int, k: int, stride: int, padding: int) -> int:
    return (length + 2 * padding - k) // stride + 1


def conv_transpose1d_out_len(length: int, k: int, stride: int, padding: int) -> int:
    return (length - 1) * stride - 2 * padding + k


def _check_geometry(stride, padding):
    if stride < 1:
        raise GeometryError(f"stride must be positive, got {stride}")
    if padding < 0:
        raise GeometryError(f"padding must be non-negative, got {padding}")


def _im2col(xp: np.ndarray, k: int, stride: int, lout: int) -> np.ndarray:
    """cols[(n, l), (c, j)] = xp[n, c, l*stride + j]"""
    n, c, _ = xp.shape
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=2)[:, :, : stride * (lout - 1) + 1 : stride, :]
    return np.ascontiguousarray(win.transpose(0, 2, 1, 3)).reshape(n * lout, c * k)


def _pad(x: np.ndarray, left: int, right: int) -> np.ndarray:
    """Zero-pad the last axis; negative amounts crop."""
    if left < 0:
        x, left = x[:, :, -left:], 0
    if right < 0:
        x, right = x[:, :, : x.shape[2] + right], 0
    return np.pad(x, ((0, 0), (0, 0), (left, right))) if left or right else x


def _corr(xp: np.ndarray, w: np.ndarray, stride: int, lout: int):
    """Valid cross-correlation of ``xp [N,Cin,Lp]`` with ``w [Cout,Cin,K]``."""
    n = xp.shape[0]
    cout, cin, k = w.shape
    cols = _im2col(xp, k, stride, lout)
    out = (cols @ w.reshape(cout, cin * k).T).reshape(n, lout, cout).transpose(0, 2, 1)
    return np.ascontiguousarray(out), cols


def _weight_grad(g: np.ndarray, cols: np.ndarray, shape) -> np.ndarray:
    n, cout, lout = g.shape
    return (g.transpose(0, 2, 1).reshape(n * lout, cout).T @ cols).reshape(shape)


def _transpose_data(x: np.ndarray, w: np.ndarray, stride: int, padding: int):
    """Transposed convolution of ``x [N,Cin,L]`` with ``w [Cin,Cout,K]``.

    Computed as a stride-1 correlation of the zero-dilated input with the
    flipped, channel-swapped kernel, so that every pass is a gather + matmul.
    """
    n, cin, length = x.shape
    k = w.shape[2]
    if stride > 1:
        xd = np.zeros((n, cin, (length - 1) * stride + 1))
        xd[:, :, ::stride] = x
    else:
        xd = x
    xp = _pad(xd, k - 1 - padding, k - 1 - padding)
    wt = np.ascontiguousarray(w.transpose(1, 0, 2)[:, :, ::-1])
    lout = conv_transpose1d_out_len(length, k, stride, padding)
    return _corr(xp, wt, 1, lout)


def conv1d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0, bias: Tensor | None = None) -> Tensor:
    """Cross-correlation of ``x [N,Cin,L]`` with ``kernel [Cout,Cin,K]``."""
    _check_geometry(stride, padding)
    if x.data.ndim != 3 or kernel.data.ndim != 3:
        raise ShapeError(f"conv1d: expected 3-d input and kernel, got {x.shape} and {kernel.shape}")
    n, cin, length = x.shape
    cout, kcin, k = kernel.shape
    if kcin != cin:
        raise ShapeError(f"conv1d: axis 1 of input ({cin}) does not match axis 1 of kernel ({kcin})")
    lout = conv1d_out_len(length, k, stride, padding)
    if k > length + 2 * padding or lout < 1:
        raise GeometryError("conv1d: kernel larger than padded input")

    wd = kernel.data
    out, cols = _corr(_pad(x.data, padding, padding), wd, stride, lout)
    if bias is not None:
        out += bias.data[None, :, None]

    def bwd(g):
        gw = _weight_grad(g, cols, (cout, cin, k))
        # gradient w.r.t. the padded input; positions past the last full
        # window receive none, then the padding is cropped off
        gp, _ = _transpose_data(g, wd, stride, 0)
        gp = _pad(gp, 0, length + 2 * padding - gp.shape[2])
        gx = np.ascontiguousarray(gp[:, :, padding : padding + length])
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return tuple(grads)

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return _result(out, parents, bwd)


def conv1d_transpose(
    x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0, bias: Tensor | None = None
) -> Tensor:
    """Adjoint of :func:`conv1d`: ``x [N,Cin,L]``, ``kernel [Cin,Cout,K]``."""
    _check_geometry(stride, padding)
    if x.data.ndim != 3 or kernel.data.ndim != 3:
        raise ShapeError(f"conv1d_transpose: expected 3-d input and kernel, got {x.shape} and {kernel.shape}")
    n, cin, length = x.shape
    kcin, cout, k = kernel.shape
    if kcin != cin:
        raise ShapeError(f"conv1d_transpose: axis 1 of input ({cin}) does not match axis 0 of kernel ({kcin})")
    lout = conv_transpose1d_out_len(length, k, stride, padding)
    if lout < 1:
        raise GeometryError(f"conv1d_transpose: output length {lout} < 1")

    wd = kernel.data
    out, cols = _transpose_data(x.data, wd, stride, padding)
    if bias is not None:
        out += bias.data[None, :, None]

    def bwd(g):
        gwt = _weight_grad(g, cols, (cout, cin, k))
        gw = gwt.transpose(1, 0, 2)[:, :, ::-1]
        gx, _ = _corr(_pad(g, padding, padding), wd, stride, length)
        grads = [gx, np.ascontiguousarray(gw)]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return tuple(grads)

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return _result(out, parents, bwd)


def maxpool1d(x: Tensor, window: int) -> Tensor:
    """Non-overlapping max pool; trailing ``L % window`` elements are dropped.

    Gradient goes to the first maximal element of each window.
    """
    if x.data.ndim != 3:
        raise ShapeError(f"maxpool1d: expected [N,C,L], got {x.shape}")
    n, c, length = x.shape
    if window < 1 or window > length:
        raise GeometryError(f"maxpool1d: window {window} invalid for length {length}")
    lout = length // window
    blocks = x.data[:, :, : lout * window].reshape(n, c, lout, window)
    idx = blocks.argmax(axis=3)
    out = np.take_along_axis(blocks, idx[..., None], axis=3)[..., 0]

    def bwd(g):
        gb = np.zeros((n, c, lout, window))
        np.put_along_axis(gb, idx[..., None], g[..., None], axis=3)
        gx = np.zeros((n, c, length))
        gx[:, :, : lout * window] = gb.reshape(n, c, lout * window)
        return (gx,)

    return _result(out, (x,), bwd)


@dataclass
class RunningStats:
    mean: np.ndarray
    var: np.ndarray
    momentum: float = BN_MOMENTUM

    @classmethod
    def fresh(cls, channels: int) -> "RunningStats":
        return cls(np.zeros(channels), np.ones(channels))


def batchnorm1d(x: Tensor, gamma: Tensor, beta: Tensor, stats: RunningStats, training: bool) -> Tensor:
    """Per-channel normalization over the batch and length axes of ``[N,C,L]``.

    In training mode the batch statistics are used and ``stats`` is updated in
    place as ``stats = momentum*stats + (1-momentum)*batch`` (biased variance).
    """
    if x.data.ndim != 3:
        raise ShapeError(f"batchnorm1d: expected [N,C,L], got {x.shape}")
    n, c, length = x.shape
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"batchnorm1d: gamma/beta must have shape ({c},) to match axis 1")
    gd = gamma.data[None, :, None]
    if training:
        m = n * length
        if m < 2:
            raise ShapeError("batchnorm1d: degenerate batch, need N*L >= 2 in training mode")
        mu = x.data.mean(axis=(0, 2))
        var = x.data.var(axis=(0, 2))
        stats.mean = stats.momentum * stats.mean + (1 - stats.momentum) * mu
        stats.var = stats.momentum * stats.var + (1 - stats.momentum) * var
        inv = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (x.data - mu[None, :, None]) * inv[None, :, None]

        def bwd(g):
            gxhat = g * gd
            gx = (inv[None, :, None] / m) * (
                m * gxhat
                - gxhat.sum(axis=(0, 2), keepdims=True)
                - xhat * (gxhat * xhat).sum(axis=(0, 2), keepdims=True)
            )
            return gx, (g * xhat).sum(axis=(0, 2)), g.sum(axis=(0, 2))

    else:
        inv = 1.0 / np.sqrt(stats.var + BN_EPS)
        xhat = (x.data - stats.mean[None, :, None]) * inv[None, :, None]

        def bwd(g):
            return g * gd * inv[None, :, None], (g * xhat).sum(axis=(0, 2)), g.sum(axis=(0, 2))

    return _result(gd * xhat + beta.data[None, :, None], (x, gamma, beta), bwd)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[Tensor], **hyper) -> "AdamState":
        return cls(
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
            **hyper,
        )


def adam_step(params: list[Tensor], grads: list[np.ndarray | None], state: AdamState) -> None:
    """Bias-corrected Adam update, in place on ``params`` and ``state``.

    A ``None`` gradient is treated as zero.
    """
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ShapeError("adam_step: params, grads and state lengths differ")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.shape or state.m[i].shape != p.shape:
            raise ShapeError(f"adam_step: parameter {i} has shape {p.shape}, gradient {g.shape}")
        m, v = state.m[i], state.v[i]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        denom = np.sqrt(v * (1.0 / c2))
        denom += state.eps
        p.data -= (state.lr / c1) * m / denom
