"""Small reverse-mode autodiff over dense 2-D float64 arrays.

The model here is tiny and fixed-shape, so this engine stays deliberately
minimal: matrices only, a handful of operations, and one broadcasting rule
(a 1-row tensor combines elementwise with an n-row tensor; its gradient is
summed over rows).  Everything runs in float64 with numpy's deterministic
reduction order.

Gradients accumulate additively into ``.grad`` buffers: each call to
``backward()`` first computes the adjoints of the whole graph and then adds
them in, so running backward twice doubles every gradient exactly.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


class Tensor2:
    """A rows x cols float64 array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ValueError(f"Tensor2 is strictly 2-D, got shape {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor2, ...] = ()
        self._vjp = None

    # -- basic introspection -------------------------------------------------

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def __repr__(self):
        return f"Tensor2({self.data!r}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    # -- graph construction --------------------------------------------------

    @staticmethod
    def _result(data, parents, vjp) -> "Tensor2":
        out = Tensor2(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._vjp = vjp
        return out

    def backward(self) -> None:
        """Accumulate d(self)/d(node) into every graph node's ``.grad``.

        Only defined for 1x1 outputs (losses).
        """
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar (1x1) tensor")
        topo: list[Tensor2] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor2, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        adjoint: dict[int, np.ndarray] = {id(self): np.ones((1, 1))}
        for node in reversed(topo):
            g = adjoint.get(id(node))
            if g is None:
                continue
            if node._vjp is not None:
                for parent, contrib in zip(node._parents, node._vjp(g)):
                    if contrib is None or not parent.requires_grad:
                        continue
                    key = id(parent)
                    if key in adjoint:
                        adjoint[key] = adjoint[key] + contrib
                    else:
                        adjoint[key] = contrib
        for node in topo:
            g = adjoint.get(id(node))
            if g is None:
                continue
            if node.grad is None:
                node.grad = np.zeros_like(node.data)
            node.grad += g

    # -- operators -----------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Tensor2):
            return _add(self, other, sign=1.0)
        return _shift(self, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor2):
            return _add(self, other, sign=-1.0)
        return _shift(self, -float(other))

    def __rsub__(self, other):
        return _shift(-self, float(other))

    def __neg__(self):
        return self * -1.0

    def __mul__(self, scalar):
        s = float(scalar)
        return Tensor2._result(
            self.data * s, (self,), lambda g, s=s: (g * s,)
        )

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


def tensor(data, requires_grad: bool = False) -> Tensor2:
    return Tensor2(data, requires_grad=requires_grad)


def _broadcast_ok(a: Tensor2, b: Tensor2) -> bool:
    return a.cols == b.cols and (a.rows == b.rows or a.rows == 1 or b.rows == 1)


def _reduce_rows(g: np.ndarray, rows: int) -> np.ndarray:
    """Collapse a broadcast gradient back to a 1-row parent."""
    if rows == 1 and g.shape[0] != 1:
        return g.sum(axis=0, keepdims=True)
    return g


def _add(a: Tensor2, b: Tensor2, sign: float) -> Tensor2:
    if not _broadcast_ok(a, b):
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")

    def vjp(g):
        return _reduce_rows(g, a.rows), _reduce_rows(g * sign, b.rows)

    return Tensor2._result(a.data + sign * b.data, (a, b), vjp)


def _shift(a: Tensor2, c: float) -> Tensor2:
    return Tensor2._result(a.data + c, (a,), lambda g: (g,))


def matmul(a: Tensor2, b: Tensor2) -> Tensor2:
    if a.cols != b.rows:
        raise ValueError(f"shape mismatch for matmul: {a.shape} @ {b.shape}")

    def vjp(g):
        return g @ b.data.T, a.data.T @ g

    return Tensor2._result(a.data @ b.data, (a, b), vjp)


def affine(x: Tensor2, w: Tensor2, b: Tensor2) -> Tensor2:
    """y = x @ w + b with b broadcast across rows."""
    if b.rows != 1 or b.cols != w.cols:
        raise ValueError(f"bias must be 1x{w.cols}, got {b.shape}")
    return matmul(x, w) + b


def relu(x: Tensor2) -> Tensor2:
    mask = x.data > 0  # subgradient at exactly 0 is taken as 0
    return Tensor2._result(x.data * mask, (x,), lambda g: (g * mask,))


def absolute(x: Tensor2) -> Tensor2:
    s = np.sign(x.data)
    return Tensor2._result(np.abs(x.data), (x,), lambda g: (g * s,))


def minimum(a: Tensor2, b: Tensor2) -> Tensor2:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    take_a = a.data <= b.data  # ties route to the first argument

    def vjp(g):
        return g * take_a, g * ~take_a

    return Tensor2._result(np.minimum(a.data, b.data), (a, b), vjp)


def maximum(a: Tensor2, b: Tensor2) -> Tensor2:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    take_a = a.data >= b.data

    def vjp(g):
        return g * take_a, g * ~take_a

    return Tensor2._result(np.maximum(a.data, b.data), (a, b), vjp)


def softplus(x: Tensor2) -> Tensor2:
    """log(1 + exp(x)), the stable form of -log(sigmoid(-x))."""
    return Tensor2._result(
        np.logaddexp(0.0, x.data), (x,), lambda g: (g * expit(x.data),)
    )


def sum_all(x: Tensor2) -> Tensor2:
    return Tensor2._result(
        x.data.sum().reshape(1, 1), (x,), lambda g: (np.full_like(x.data, g[0, 0]),)
    )


def mean_all(x: Tensor2) -> Tensor2:
    return sum_all(x) * (1.0 / x.data.size)


def row_sum(x: Tensor2) -> Tensor2:
    """Sum across columns, giving an n x 1 column."""
    return Tensor2._result(
        x.data.sum(axis=1, keepdims=True),
        (x,),
        lambda g: (np.broadcast_to(g, x.shape).copy(),),
    )


def gather_rows(x: Tensor2, indices) -> Tensor2:
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise ValueError("indices must be a flat sequence")

    def vjp(g):
        out = np.zeros_like(x.data)
        np.add.at(out, idx, g)  # repeated indices accumulate
        return (out,)

    return Tensor2._result(x.data[idx], (x,), vjp)


def slice_cols(x: Tensor2, start: int, stop: int) -> Tensor2:
    if not 0 <= start < stop <= x.cols:
        raise ValueError(f"bad column slice [{start}:{stop}] for {x.shape}")

    def vjp(g):
        out = np.zeros_like(x.data)
        out[:, start:stop] = g
        return (out,)

    return Tensor2._result(x.data[:, start:stop].copy(), (x,), vjp)


def zero_grads(params) -> None:
    for p in params:
        p.zero_grad()


# -- optimizer ---------------------------------------------------------------


class AdamState:
    """First/second moment buffers plus the step counter for Adam."""

    def __init__(self, params, lr: float = 0.01, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]


def adam_step(params, grads, state: AdamState) -> None:
    """One bias-corrected Adam update, in place on ``p.data``.

    ``grads`` may be None to read each parameter's ``.grad`` buffer
    (missing buffers count as zero gradients).
    """
    params = list(params)
    if grads is None:
        grads = [
            p.grad if p.grad is not None else np.zeros_like(p.data) for p in params
        ]
    else:
        grads = list(grads)
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads, and optimizer state are not aligned")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter {p.data.shape}")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1**state.t)
        v_hat = v / (1 - b2**state.t)
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


# -- gradient verification ---------------------------------------------------


def finite_diff_check(f, params, h: float = 1e-5) -> float:
    """Max relative error between backward() and central differences.

    ``f`` is a zero-argument callable that rebuilds the forward graph from
    the current contents of ``params`` and returns a 1x1 tensor.  The
    relative error denominator is clamped at 1, so tiny gradients are
    compared absolutely.
    """
    params = list(params)
    zero_grads(params)
    out = f()
    out.backward()
    analytic = [
        p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
        for p in params
    ]
    worst = 0.0
    for p, grads in zip(params, analytic):
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + h
            up = f().item()
            flat[i] = saved - h
            down = f().item()
            flat[i] = saved
            numeric = (up - down) / (2 * h)
            a = grads.reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1.0)
            worst = max(worst, err)
    return worst
