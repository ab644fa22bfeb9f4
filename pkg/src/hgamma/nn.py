"""Tape-based reverse-mode autodiff over numpy arrays, a ReLU MLP and Adam.

Only the primitives needed by the model are provided. Every primitive
records its vector-Jacobian product on the tape when it is created; nodes
are appended in creation order, so reversing the tape is a valid reverse
topological order and each node is visited exactly once.

>>> tape = Tape()
>>> x = tape.leaf(np.array([1.0, 2.0]))
>>> y = (x * x).sum()
>>> tape.backward(y)
>>> x.grad
array([2., 4.])
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

GRAD_EPS = 1e-9


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


class Var:
    __slots__ = ("value", "tape", "parents", "vjp", "grad", "requires_grad", "index")

    __array_priority__ = 100

    def __init__(self, value, tape=None, parents=(), vjp=None, requires_grad=False):
        self.value = np.asarray(value, dtype=float)
        self.tape = tape
        self.parents = parents
        self.vjp = vjp
        self.grad = None
        self.requires_grad = requires_grad
        self.index = None

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Var({self.value!r})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None):
        return vsum(self, axis)

    def mean(self, axis=None):
        return vmean(self, axis)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)


def lift(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


class Tape:
    """Records primitive operations of one forward pass."""

    def __init__(self):
        self.nodes: list[Var] = []

    def leaf(self, value) -> Var:
        v = Var(np.array(value, dtype=float), tape=self, requires_grad=True)
        self._push(v)
        return v

    def _push(self, v: Var):
        v.index = len(self.nodes)
        v.tape = self
        self.nodes.append(v)

    def record(self, value, parents, vjp) -> Var:
        parents = tuple(lift(p) for p in parents)
        needs = any(p.requires_grad for p in parents)
        out = Var(value, requires_grad=needs)
        if needs:
            out.parents = parents
            out.vjp = vjp
            self._push(out)
        return out

    def backward(self, out: Var, output_grad=None):
        """Propagate adjoints from ``out``; leaves receive ``.grad``."""
        if not self.nodes or out.tape is not self or out.index is None:
            raise RuntimeError("backward called before a forward pass was recorded on this tape")
        grads: list = [None] * len(self.nodes)
        g0 = np.ones_like(out.value) if output_grad is None else np.asarray(output_grad, dtype=float)
        if g0.shape != out.value.shape:
            raise ValueError(f"output_grad shape {g0.shape} != output shape {out.value.shape}")
        grads[out.index] = g0
        for node in reversed(self.nodes[: out.index + 1]):
            g = grads[node.index]
            if g is None or node.vjp is None:
                continue
            for parent, pg in zip(node.parents, node.vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                pg = _unbroadcast(pg, parent.value.shape)
                j = parent.index
                grads[j] = pg if grads[j] is None else grads[j] + pg
        for node in self.nodes:
            if node.vjp is None:
                g = grads[node.index]
                node.grad = np.zeros_like(node.value) if g is None else g


def _tape_of(*xs):
    for x in xs:
        if isinstance(x, Var) and x.tape is not None:
            return x.tape
    return None


def _op(value, parents, vjp):
    tape = _tape_of(*parents)
    if tape is None:
        return Var(value)
    return tape.record(value, parents, vjp)


# --- elementwise -----------------------------------------------------------


def add(a, b):
    a, b = lift(a), lift(b)
    return _op(a.value + b.value, (a, b), lambda g: (g, g))


def neg(a):
    a = lift(a)
    return _op(-a.value, (a,), lambda g: (-g,))


def mul(a, b):
    a, b = lift(a), lift(b)
    av, bv = a.value, b.value
    return _op(av * bv, (a, b), lambda g: (g * bv, g * av))


def div(a, b):
    a, b = lift(a), lift(b)
    av, bv = a.value, b.value
    return _op(av / bv, (a, b), lambda g: (g / bv, -g * av / bv**2))


def square(a):
    a = lift(a)
    av = a.value
    return _op(av * av, (a,), lambda g: (2.0 * g * av,))


def sqrt(a, eps: float = GRAD_EPS):
    """Square root whose adjoint clamps the result at ``eps`` (forward unchanged)."""
    a = lift(a)
    out = np.sqrt(a.value)
    return _op(out, (a,), lambda g: (0.5 * g / np.maximum(out, eps),))


def exp(a):
    a = lift(a)
    out = np.exp(a.value)
    return _op(out, (a,), lambda g: (g * out,))


def sin(a):
    a = lift(a)
    av = a.value
    return _op(np.sin(av), (a,), lambda g: (g * np.cos(av),))


def cos(a):
    a = lift(a)
    av = a.value
    return _op(np.cos(av), (a,), lambda g: (-g * np.sin(av),))


def cosh(a):
    a = lift(a)
    av = a.value
    return _op(np.cosh(av), (a,), lambda g: (g * np.sinh(av),))


def sinh(a):
    a = lift(a)
    av = a.value
    return _op(np.sinh(av), (a,), lambda g: (g * np.cosh(av),))


def artanh(a):
    a = lift(a)
    av = a.value
    return _op(np.arctanh(av), (a,), lambda g: (g / (1.0 - av**2),))


def atan2(y, x, eps: float = GRAD_EPS):
    """Two-argument arctangent; the adjoint clamps ``x^2 + y^2`` at ``eps^2``."""
    y, x = lift(y), lift(x)
    yv, xv = y.value, x.value

    def vjp(g):
        r2 = np.maximum(xv**2 + yv**2, eps**2)
        return g * xv / r2, -g * yv / r2

    return _op(np.arctan2(yv, xv), (y, x), vjp)


def relu(a):
    a = lift(a)
    mask = a.value > 0
    return _op(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def where(cond, a, b):
    cond = np.asarray(cond, dtype=bool)
    a, b = lift(a), lift(b)
    return _op(
        np.where(cond, a.value, b.value),
        (a, b),
        lambda g: (np.where(cond, g, 0.0), np.where(cond, 0.0, g)),
    )


# --- shape / reduction -----------------------------------------------------


def matmul(a, b):
    a, b = lift(a), lift(b)
    av, bv = a.value, b.value

    def vjp(g):
        if av.ndim == 1 and bv.ndim == 1:
            return g * bv, g * av
        if bv.ndim == 1:
            return np.outer(g, bv), av.T @ g
        if av.ndim == 1:
            return bv @ g, np.outer(av, g)
        return g @ bv.T, av.T @ g

    return _op(av @ bv, (a, b), vjp)


def transpose(a):
    a = lift(a)
    return _op(a.value.T, (a,), lambda g: (g.T,))


def reshape(a, shape):
    a = lift(a)
    orig = a.value.shape
    return _op(a.value.reshape(shape), (a,), lambda g: (g.reshape(orig),))


def getitem(a, idx):
    a = lift(a)
    orig = a.value.shape

    def vjp(g):
        out = np.zeros(orig)
        np.add.at(out, idx, g)
        return (out,)

    return _op(a.value[idx], (a,), vjp)


def vsum(a, axis=None):
    a = lift(a)
    shape = a.value.shape

    def vjp(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _op(a.value.sum(axis=axis), (a,), vjp)


def vmean(a, axis=None):
    a = lift(a)
    count = a.value.size if axis is None else a.value.shape[axis]
    return vsum(a, axis) * (1.0 / count)


def concat(xs, axis=0):
    xs = [lift(x) for x in xs]
    sizes = [x.value.shape[axis] for x in xs]
    splits = np.cumsum(sizes)[:-1]
    return _op(
        np.concatenate([x.value for x in xs], axis=axis),
        xs,
        lambda g: tuple(np.split(g, splits, axis=axis)),
    )


def stack(xs, axis=0):
    xs = [lift(x) for x in xs]

    def vjp(g):
        return tuple(np.moveaxis(g, axis, 0))

    return _op(np.stack([x.value for x in xs], axis=axis), xs, vjp)


# --- matrix-group primitives -----------------------------------------------


def skew(theta, n: int):
    """Skew-symmetric ``n x n`` matrix from its strict upper triangle."""
    theta = lift(theta)
    iu = np.triu_indices(n, k=1)
    S = np.zeros((n, n))
    S[iu] = theta.value
    S = S - S.T
    return _op(S, (theta,), lambda g: (g[iu] - g.T[iu],))


def expm(a):
    """Matrix exponential with the Frechet-derivative adjoint."""
    a = lift(a)
    av = a.value
    out = scipy.linalg.expm(av)

    def vjp(g):
        # <G, L(A, E)> = <L(A^T, G), E>
        return (scipy.linalg.expm_frechet(av.T, g, compute_expm=False),)

    return _op(out, (a,), vjp)


# --- MLP -------------------------------------------------------------------


@dataclass
class MlpParams:
    """Weights ``weights[k]`` have shape ``(layer_dims[k+1], layer_dims[k])``."""

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("layer_dims, weights and biases do not chain")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_dims[k + 1], self.layer_dims[k])
            if W.shape != want or b.shape != (want[0],):
                raise ValueError(f"layer {k}: expected W{want}, b({want[0]},), got {W.shape}, {b.shape}")

    @classmethod
    def init(cls, layer_dims, rng: np.random.Generator) -> "MlpParams":
        """Kaiming-uniform weights, fan-in-scaled uniform biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            bound = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-1.0, 1.0, size=fan_out) / np.sqrt(fan_in))
        return cls(list(layer_dims), weights, biases)

    @classmethod
    def zeros(cls, layer_dims) -> "MlpParams":
        return cls(
            list(layer_dims),
            [np.zeros((o, i)) for i, o in zip(layer_dims[:-1], layer_dims[1:])],
            [np.zeros(o) for o in layer_dims[1:]],
        )

    def arrays(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    @classmethod
    def from_arrays(cls, layer_dims, arrays) -> "MlpParams":
        return cls(list(layer_dims), list(arrays[0::2]), list(arrays[1::2]))


def mlp_forward(layers, x):
    """Affine + ReLU on hidden layers, linear output.

    ``layers`` is a flat sequence ``[W0, b0, W1, b1, ...]`` of arrays or
    :class:`Var`; ``x`` is a single input vector or a batch of rows.
    """
    h = x
    n_layers = len(layers) // 2
    in_dim = np.shape(layers[0].value if isinstance(layers[0], Var) else layers[0])[1]
    x_dim = (x.value if isinstance(x, Var) else np.asarray(x)).shape[-1]
    if x_dim != in_dim:
        raise ValueError(f"input dimension {x_dim} != first layer width {in_dim}")
    for k in range(n_layers):
        W, b = layers[2 * k], layers[2 * k + 1]
        h = matmul(h, transpose(W)) + b
        if k < n_layers - 1:
            h = relu(h)
    return h


def mlp_apply(params: MlpParams, X) -> np.ndarray:
    """Plain numpy forward pass (no tape)."""
    h = np.asarray(X, dtype=float)
    for k, (W, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ W.T + b
        if k < len(params.weights) - 1:
            h = np.maximum(h, 0.0)
    return h


# --- Adam ------------------------------------------------------------------


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(state: AdamState, params, grads, frozen=()):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``.

    Indices listed in ``frozen`` are carried through unchanged.
    """
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    m = state.m or [np.zeros_like(p) for p in params]
    v = state.v or [np.zeros_like(p) for p in params]
    step = state.step + 1
    c1 = 1.0 - state.beta1**step
    c2 = 1.0 - state.beta2**step
    new_params, new_m, new_v = [], [], []
    for k, (p, g, mk, vk) in enumerate(zip(params, grads, m, v)):
        if g.shape != p.shape:
            raise ValueError(f"gradient {k} has shape {g.shape}, parameter has {p.shape}")
        mk = state.beta1 * mk + (1.0 - state.beta1) * g
        vk = state.beta2 * vk + (1.0 - state.beta2) * g * g
        if k in frozen:
            new_params.append(p)
        else:
            new_params.append(p - state.lr * (mk / c1) / (np.sqrt(vk / c2) + state.eps))
        new_m.append(mk)
        new_v.append(vk)
    return new_params, AdamState(state.lr, state.beta1, state.beta2, state.eps, step, new_m, new_v)
