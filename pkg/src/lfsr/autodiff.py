"""Minimal dense tensors with reverse-mode differentiation.

Only the operations the three networks and their losses need are provided.
Shapes are explicit: apart from the bias add inside the convolutions there
is no implicit broadcasting; use :func:`expand` when a broadcast is wanted.

Every op records a closure mapping the output gradient to one gradient per
parent.  :meth:`Tensor.backward` walks the graph once in reverse topological
order; only leaves accumulate into ``.grad``, so calling backward twice on
the same loss adds the gradients up.
"""

import threading

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ContractError, ShapeError

_local = threading.local()


class BranchRecorder:
    """Records piecewise branch decisions (activation signs, clamp saturation,
    argmax selections) and replays them on later forward passes.

    Used by finite-difference checks so a perturbed evaluation stays on the
    same linear piece as the base point.
    """

    def __init__(self):
        self.decisions = []
        self.pos = None

    def replay(self):
        self.pos = 0

    def next(self, compute):
        if self.pos is None:
            d = compute()
            self.decisions.append(d)
            return d
        d = self.decisions[self.pos]
        self.pos += 1
        return d

    def __enter__(self):
        self._prev = getattr(_local, "recorder", None)
        _local.recorder = self
        return self

    def __exit__(self, *exc):
        _local.recorder = self._prev
        return False


def branch(compute):
    """Evaluate a branch decision, or replay it inside a :class:`BranchRecorder`."""
    rec = getattr(_local, "recorder", None)
    return compute() if rec is None else rec.next(compute)


class Tensor:
    def __init__(self, data, requires_grad=False, _parents=(), _backward=None, _op=""):
        data = np.asarray(data)
        if not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64)
        self.data = data
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = _parents
        self._backward = _backward
        self._op = _op

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self):
        return self._backward is None

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self._op or 'leaf'})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __getitem__(self, key):
        return getitem(self, key)

    def backward(self):
        if self.data.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise ContractError("loss does not depend on any tensor that requires grad")
        order = _topological_order(self)
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def _topological_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def tensor(data, requires_grad=False, dtype=None):
    return Tensor(np.array(data, dtype=dtype), requires_grad=requires_grad)


class no_grad:
    """Context manager: ops inside record no graph (inference)."""

    def __enter__(self):
        self._prev = getattr(_local, "no_grad", False)
        _local.no_grad = True
        return self

    def __exit__(self, *exc):
        _local.no_grad = self._prev
        return False


def grad_enabled():
    return not getattr(_local, "no_grad", False)


def _make(data, parents, backward, op):
    if grad_enabled() and any(p.requires_grad for p in parents):
        return Tensor(data, True, tuple(parents), backward, op)
    return Tensor(data)


def _same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# -- element-wise -----------------------------------------------------------

def add(a, b):
    _same_shape(a, b, "add")
    return _make(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a, b):
    _same_shape(a, b, "sub")
    return _make(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a, b):
    _same_shape(a, b, "mul")
    return _make(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data), "mul")


def offset(base, x):
    """``base + x`` for a constant array ``base``; the result takes ``base``'s dtype
    and the gradient is cast back to ``x``'s dtype."""
    base = np.asarray(base)
    if base.shape != x.shape:
        raise ShapeError(f"offset: shape mismatch {base.shape} vs {x.shape}")
    return _make(base + x.data.astype(base.dtype), (x,), lambda g: (g.astype(x.dtype),), "offset")


def scale(a, c):
    c = a.data.dtype.type(c)
    return _make(a.data * c, (a,), lambda g: (g * c,), "scale")


def leaky_relu(x, slope=0.2):
    slope = x.data.dtype.type(slope)
    pos = branch(lambda: x.data > 0)
    out = np.where(pos, x.data, x.data * slope)
    return _make(out, (x,), lambda g: (np.where(pos, g, g * slope),), "leaky_relu")


def relu(x):
    pos = branch(lambda: x.data > 0)
    return _make(np.where(pos, x.data, 0).astype(x.dtype), (x,),
                 lambda g: (np.where(pos, g, 0).astype(g.dtype),), "relu")


def absolute(x):
    # subgradient of |t| at 0 is taken as 0
    sign = branch(lambda: np.sign(x.data))
    return _make(x.data * sign, (x,), lambda g: (g * sign,), "abs")


def clamp(x, lo=0.0, hi=1.0):
    # gradient passes on the closed interval so saturated pixels can still move inward
    below, above = branch(lambda: (x.data < lo, x.data > hi))
    inside = ~(below | above)
    out = np.where(below, x.data.dtype.type(lo), np.where(above, x.data.dtype.type(hi), x.data))
    return _make(out, (x,), lambda g: (np.where(inside, g, 0).astype(g.dtype),), "clamp")


# -- reductions ---------------------------------------------------------------

def total(x):
    return _make(np.sum(x.data), (x,), lambda g: (np.full_like(x.data, g),), "sum")


def mean(x):
    n = x.data.size
    inv = x.data.dtype.type(1.0 / n)
    return _make(np.sum(x.data) / x.data.dtype.type(n), (x,),
                 lambda g: (np.full_like(x.data, g * inv),), "mean")


# -- layout -------------------------------------------------------------------

def reshape(x, shape):
    shape = tuple(shape)
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"cannot reshape {x.shape} to {shape}") from exc
    return _make(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x, axes):
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _make(np.ascontiguousarray(x.data.transpose(axes)), (x,),
                 lambda g: (np.ascontiguousarray(g.transpose(inverse)),), "transpose")


def getitem(x, key):
    out = np.array(x.data[key])

    def backward(g):
        gx = np.zeros_like(x.data)
        gx[key] += g
        return (gx,)

    return _make(out, (x,), backward, "getitem")


def concat(tensors, axis=0):
    tensors = list(tensors)
    sizes = [t.shape[axis] for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc}") from exc
    splits = np.cumsum(sizes)[:-1]
    return _make(out, tensors, lambda g: tuple(np.split(g, splits, axis=axis)), "concat")


def expand(x, shape):
    """Explicit broadcast of size-1 axes up to ``shape`` (same rank)."""
    shape = tuple(shape)
    if len(shape) != x.ndim or any(s != t and s != 1 for s, t in zip(x.shape, shape)):
        raise ShapeError(f"cannot expand {x.shape} to {shape}")
    axes = tuple(i for i, (s, t) in enumerate(zip(x.shape, shape)) if s != t)
    out = np.ascontiguousarray(np.broadcast_to(x.data, shape))
    return _make(out, (x,), lambda g: (g.sum(axis=axes, keepdims=True),), "expand")


def forward_diff(x, axis):
    """f[i+1] - f[i] along ``axis`` (valid region only)."""
    n = x.shape[axis]
    hi = [slice(None)] * x.ndim
    lo = [slice(None)] * x.ndim
    hi[axis] = slice(1, n)
    lo[axis] = slice(0, n - 1)
    return sub(getitem(x, tuple(hi)), getitem(x, tuple(lo)))


# -- convolution --------------------------------------------------------------

def _im2col(x, nd):
    """[N][C][*S] -> ([N*prod(S)], C*3^nd) columns of zero-padded 3^nd neighbourhoods."""
    pad = [(0, 0), (0, 0)] + [(1, 1)] * nd
    xp = np.pad(x, pad)
    win = sliding_window_view(xp, (3,) * nd, axis=tuple(range(2, 2 + nd)))
    # (N, C, *S, *K) -> (N, *S, C, *K)
    perm = (0,) + tuple(range(2, 2 + nd)) + (1,) + tuple(range(2 + nd, 2 + 2 * nd))
    win = win.transpose(perm)
    n_rows = x.shape[0] * int(np.prod(x.shape[2:]))
    return win.reshape(n_rows, -1)


def _conv_forward(x, k, nd):
    N, S = x.shape[0], x.shape[2:]
    F = k.shape[0]
    cols = _im2col(x, nd)
    out = cols @ k.reshape(F, -1).T
    out = out.reshape((N,) + S + (F,))
    return np.ascontiguousarray(np.moveaxis(out, -1, 1)), cols


def _convnd(x, kernel, bias, nd):
    if x.ndim != 2 + nd or kernel.ndim != 2 + nd or kernel.shape[2:] != (3,) * nd:
        raise ShapeError(f"conv{nd}d: bad shapes input {x.shape}, kernel {kernel.shape}")
    if kernel.shape[1] != x.shape[1]:
        raise ShapeError(f"conv{nd}d: input has {x.shape[1]} channels, kernel expects {kernel.shape[1]}")
    if bias.shape != (kernel.shape[0],):
        raise ShapeError(f"conv{nd}d: bias shape {bias.shape} != ({kernel.shape[0]},)")
    out, cols = _conv_forward(x.data, kernel.data, nd)
    out += bias.data.reshape((1, -1) + (1,) * nd)
    if not (grad_enabled() and kernel.requires_grad):
        cols = None  # only the kernel gradient needs the columns
    F = kernel.shape[0]
    flip = (slice(None), slice(None)) + (slice(None, None, -1),) * nd

    def backward(g):
        gm = np.moveaxis(g, 1, -1).reshape(-1, F)
        gk = (gm.T @ cols).reshape(kernel.shape) if kernel.requires_grad else None
        gb = gm.sum(axis=0) if bias.requires_grad else None
        gx = None
        if x.requires_grad:
            kt = np.ascontiguousarray(kernel.data[flip].swapaxes(0, 1))
            gx, _ = _conv_forward(g, kt, nd)
        return gx, gk, gb

    return _make(out, (x, kernel, bias), backward, f"conv{nd}d")


def conv2d(x, kernel, bias):
    """3x3 cross-correlation, stride 1, zero padding 1: [N][C][H][W] -> [N][F][H][W]."""
    return _convnd(x, kernel, bias, 2)


def conv3d(x, kernel, bias):
    """3x3x3 cross-correlation, stride 1, zero padding 1 on D, H, W."""
    return _convnd(x, kernel, bias, 3)


def pixel_shuffle(x, r):
    N, Cr, H, W = x.shape
    if Cr % (r * r):
        raise ShapeError(f"pixel_shuffle: {Cr} channels not divisible by r^2 = {r * r}")
    C = Cr // (r * r)
    out = x.data.reshape(N, C, r, r, H, W).transpose(0, 1, 4, 2, 5, 3).reshape(N, C, H * r, W * r)

    def backward(g):
        return (g.reshape(N, C, H, r, W, r).transpose(0, 1, 3, 5, 2, 4).reshape(N, Cr, H, W),)

    return _make(np.ascontiguousarray(out), (x,), backward, "pixel_shuffle")


def pixel_unshuffle(x, r):
    """Exact inverse of :func:`pixel_shuffle` (data only)."""
    x = np.asarray(x)
    N, C, Hr, Wr = x.shape
    H, W = Hr // r, Wr // r
    return x.reshape(N, C, H, r, W, r).transpose(0, 1, 3, 5, 2, 4).reshape(N, C * r * r, H, W)


# -- patches ------------------------------------------------------------------

def unfold_patches(x, k=3):
    """[C][H][W] -> [H*W][C*k*k]; row p is pixel p's zero-padded k x k neighbourhood."""
    if x.ndim != 3:
        raise ShapeError(f"unfold_patches expects [C][H][W], got {x.shape}")
    C, H, W = x.shape
    p = k // 2
    xp = np.pad(x.data, ((0, 0), (p, p), (p, p)))
    win = sliding_window_view(xp, (k, k), axis=(1, 2))  # C, H, W, k, k
    out = win.transpose(1, 2, 0, 3, 4).reshape(H * W, C * k * k)

    def backward(g):
        g = g.reshape(H, W, C, k, k)
        gp = np.zeros_like(xp)
        for ky in range(k):
            for kx in range(k):
                gp[:, ky:ky + H, kx:kx + W] += g[:, :, :, ky, kx].transpose(2, 0, 1)
        return (gp[:, p:p + H, p:p + W],)

    return _make(out, (x,), backward, "unfold")


def gather_rows(x, index):
    index = np.asarray(index, dtype=np.int64)

    def backward(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, index, g)
        return (gx,)

    return _make(x.data[index], (x,), backward, "gather_rows")


def _normalize_rows(a):
    norm = np.sqrt(np.sum(a * a, axis=1))
    safe = np.where(norm > 0, norm, 1)
    unit = np.where(norm[:, None] > 0, a / safe[:, None], 0)
    return unit, norm, safe


def gathered_cosine(q, k, index):
    """s[i] = <q_i/|q_i|, k_j/|k_j|> with j = index[i]; zero-norm rows give 0.

    The selection ``index`` is a constant: gradients flow through the two
    rows involved in each cosine, never through the choice of j.
    """
    index = np.asarray(index, dtype=np.int64)
    qh, qn, qs = _normalize_rows(q.data)
    kh, kn, ks = _normalize_rows(k.data)
    kg = kh[index]
    s = np.sum(qh * kg, axis=1)

    def backward(g):
        gq = gk = None
        if q.requires_grad:
            gq = np.where(qn[:, None] > 0, (kg - s[:, None] * qh) / qs[:, None], 0) * g[:, None]
        if k.requires_grad:
            ksel = kn[index]
            term = np.where(ksel[:, None] > 0, (qh - s[:, None] * kg) / ks[index][:, None], 0)
            gk = np.zeros_like(k.data)
            np.add.at(gk, index, term * g[:, None])
        return gq, gk

    return _make(s, (q, k), backward, "gathered_cosine")


def fold_average(patches, C, H, W, k=3):
    """Inverse of :func:`unfold_patches` with overlap averaging.

    Row i of ``patches`` holds a k x k patch placed centred on pixel i; each
    output pixel is the mean of the in-image patches covering it.  The mean
    is accumulated as a running average so identical contributions reproduce
    their common value exactly.
    """
    if patches.shape != (H * W, C * k * k):
        raise ShapeError(f"fold_average: patches {patches.shape} != ({H * W}, {C * k * k})")
    p = k // 2
    P = patches.data.reshape(H, W, C, k, k).transpose(2, 3, 4, 0, 1)  # C, k, k, H, W
    out = np.zeros((C, H, W), dtype=patches.dtype)
    count = np.zeros((H, W), dtype=patches.dtype)
    for ky in range(k):
        for kx in range(k):
            dy, dx = ky - p, kx - p
            # output (y, x) receives slot (ky, kx) of the patch centred at (y - dy, x - dx)
            ys, yd = _overlap(H, dy)
            xs, xd = _overlap(W, dx)
            contrib = P[:, ky, kx, ys, xs]
            count[yd, xd] += 1
            cur = out[:, yd, xd]
            out[:, yd, xd] = cur + (contrib - cur) / count[yd, xd]
    inv = (1.0 / count).astype(patches.dtype)

    def backward(g):
        gs = g * inv
        gP = np.zeros((C, k, k, H, W), dtype=g.dtype)
        for ky in range(k):
            for kx in range(k):
                ys, yd = _overlap(H, ky - p)
                xs, xd = _overlap(W, kx - p)
                gP[:, ky, kx, ys, xs] = gs[:, yd, xd]
        return (gP.transpose(3, 4, 0, 1, 2).reshape(H * W, C * k * k),)

    return _make(out, (patches,), backward, "fold_average")


def _overlap(n, d):
    """Source and destination slices for a shift by ``d`` along an axis of length n."""
    if d >= 0:
        return slice(0, n - d), slice(d, n)
    return slice(-d, n), slice(0, n + d)
