"""Canonical orbit representatives for one-parameter subgroups.

``v = A x`` is split into 2D blocks. One pivot block fixes the subgroup
parameter ``t0`` that "unwinds" the action; every other block is moved by
``g(-t0)`` so the result depends only on the orbit of ``x``.

Batched variants (``canonicalize``) work on arrays of shape ``(B, n)``;
the single-point functions return :class:`InvRepOutput`.

The elliptic representative is a true orbit invariant when every rate is
an integer multiple of the pivot rate. For other ratios the principal
branch of ``t0`` is used and invariance can break across the branch cut.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .groups import DEFAULT_T_RANGE, SubgroupSpec, act
from .linalg import HYPERBOLIC_GUARD, Family, as_vec

EPS = 1e-9

OK = "ok"
DEGENERATE = "degenerate"
LIGHTCONE = "lightcone"


@dataclass(frozen=True)
class InvRepOutput:
    """Canonical representative of an orbit.

    ``pivot_block`` is 1-based; 0 means no pivot was usable and ``rep`` is
    the untouched ``A x`` (see ``status``).
    """

    rep: np.ndarray
    t0: float
    pivot_block: int
    status: str = OK


@dataclass(frozen=True)
class So3Features:
    radial: float
    axial: float

    def as_array(self) -> np.ndarray:
        return np.array([self.radial, self.axial])


def so3_features(x, A) -> So3Features:
    """``((a1.x)^2 + (a2.x)^2, a3.x)`` for the rows ``a_i`` of ``A``."""
    v = np.asarray(A, dtype=float) @ as_vec(x)
    return So3Features(float(v[0] ** 2 + v[1] ** 2), float(v[2]))


def so3_features_batch(X, A) -> np.ndarray:
    V = np.atleast_2d(X) @ np.asarray(A).T
    return np.stack([V[:, 0] ** 2 + V[:, 1] ** 2, V[:, 2]], axis=1)


def _split(V, m):
    return V[:, 0 : 2 * m : 2], V[:, 1 : 2 * m : 2]


def _merge(V, w1, w2, m):
    out = V.copy()
    out[:, 0 : 2 * m : 2] = w1
    out[:, 1 : 2 * m : 2] = w2
    return out


def _elliptic(V, rates, eps):
    B, n = V.shape
    m = n // 2
    v1, v2 = _split(V, m)
    r = np.hypot(v1, v2)
    eligible = (r > eps) & (rates[None, :] != 0)
    found = eligible.any(axis=1)
    piv = np.argmax(eligible, axis=1)
    rows = np.arange(B)
    theta = np.arctan2(v2[rows, piv], v1[rows, piv])
    t0 = np.where(found, theta / np.where(found, rates[piv], 1.0), 0.0)
    ang = -t0[:, None] * rates[None, :]
    c, s = np.cos(ang), np.sin(ang)
    w1, w2 = c * v1 - s * v2, s * v1 + c * v2
    w1[rows[found], piv[found]] = r[rows[found], piv[found]]
    w2[rows[found], piv[found]] = 0.0
    status = np.where(found, OK, DEGENERATE)
    return _merge(V, w1, w2, m), t0, np.where(found, piv + 1, 0), status


def _hyperbolic(V, rates, eps):
    m = V.shape[1] // 2
    v1, v2 = _split(V, m)
    a, b = v1[:, 0], v2[:, 0]
    degenerate = (np.abs(a) <= eps) & (np.abs(b) <= eps) | (rates[0] == 0)
    lightcone = ~degenerate & (np.abs(a) <= np.abs(b))
    ok = ~degenerate & ~lightcone
    u = np.where(ok, b / np.where(ok, a, 1.0), 0.0)
    t0 = np.arctanh(u) / (rates[0] if rates[0] != 0 else 1.0)
    ang = -t0[:, None] * rates[None, :]
    if np.any(np.abs(ang) > HYPERBOLIC_GUARD):
        raise OverflowError("hyperbolic canonicalization exceeds overflow guard")
    c, s = np.cosh(ang), np.sinh(ang)
    w1, w2 = c * v1 + s * v2, s * v1 + c * v2
    w1[ok, 0] = np.sign(a[ok]) * np.sqrt(np.abs(a[ok] ** 2 - b[ok] ** 2))
    w2[ok, 0] = 0.0
    rep = np.where(ok[:, None], _merge(V, w1, w2, m), V)
    status = np.where(degenerate, DEGENERATE, np.where(lightcone, LIGHTCONE, OK))
    return rep, np.where(ok, t0, 0.0), np.where(ok, 1, 0), status


def _parabolic(V, rates, eps):
    m = V.shape[1] // 2
    v1, v2 = _split(V, m)
    a, b = v1[:, 0], v2[:, 0]
    ok = (np.abs(b) > eps) & (rates[0] != 0)
    t0 = np.where(ok, a / np.where(ok, b * rates[0], 1.0), 0.0)
    ang = -t0[:, None] * rates[None, :]
    w1 = v1 + ang * v2
    w1[ok, 0] = 0.0
    rep = np.where(ok[:, None], _merge(V, w1, v2, m), V)
    return rep, t0, np.where(ok, 1, 0), np.where(ok, OK, DEGENERATE)


_CANON = {Family.ELLIPTIC: _elliptic, Family.HYPERBOLIC: _hyperbolic, Family.PARABOLIC: _parabolic}


def canonicalize(X, spec: SubgroupSpec, eps: float = EPS):
    """Batched canonical representatives.

    Returns ``(rep, t0, pivot_block, status)`` with one row / entry per input.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != spec.n:
        raise ValueError(f"inputs have dimension {X.shape[1]}, subgroup acts on {spec.n}")
    if spec.n < 2:
        raise ValueError("need n >= 2")
    V = X @ spec.A.T
    return _CANON[spec.family](V, spec.rates, eps)


def _single(x, spec, family, eps):
    if spec.family is not family:
        raise ValueError(f"expected a {family.value} subgroup, got {spec.family.value}")
    rep, t0, piv, status = canonicalize(as_vec(x)[None, :], spec, eps)
    return InvRepOutput(rep[0], float(t0[0]), int(piv[0]), str(status[0]))


def inv_rep(x, spec: SubgroupSpec, eps: float = EPS) -> InvRepOutput:
    """Elliptic representative: pivot block -> ``(|v_p|, 0)``, others counter-rotated.

    The pivot is the first block with nonzero norm and nonzero rate. With
    odd ``n`` the trailing coordinate (fixed by the action) is copied.
    """
    return _single(x, spec, Family.ELLIPTIC, eps)


def inv_rep_h(x, spec: SubgroupSpec, eps: float = EPS) -> InvRepOutput:
    """Hyperbolic representative; needs the first block timelike (``|v11| > |v12|``)."""
    return _single(x, spec, Family.HYPERBOLIC, eps)


def inv_rep_p(x, spec: SubgroupSpec, eps: float = EPS) -> InvRepOutput:
    """Parabolic representative; needs ``v12 != 0``. Pivot block becomes ``(0, v12)``."""
    return _single(x, spec, Family.PARABOLIC, eps)


def inv_rep_any(x, spec: SubgroupSpec, eps: float = EPS) -> InvRepOutput:
    return _single(x, spec, spec.family, eps)


def orbit_distance(x, y, spec: SubgroupSpec, grid: int = 2000, t_range=None) -> tuple[float, float]:
    """Brute-force ``min_t |g_t x - y|`` over a grid, refined around the best cells.

    Returns ``(distance, t_best)``. For elliptic subgroups the default range
    is one period ``[0, 2 pi / min rate]``, which assumes integer rate ratios.
    """
    if grid < 100:
        raise ValueError("grid must be at least 100")
    x, y = as_vec(x), as_vec(y)
    if t_range is None:
        if spec.family is Family.ELLIPTIC:
            nz = np.abs(spec.rates[spec.rates != 0])
            t_range = (0.0, 2 * np.pi / nz.min()) if nz.size else (0.0, 0.0)
        else:
            t_range = (2 * DEFAULT_T_RANGE[spec.family][0], 2 * DEFAULT_T_RANGE[spec.family][1])
    lo, hi = t_range
    ts = np.linspace(lo, hi, grid)
    d = np.linalg.norm(act(spec, ts, np.repeat(x[None, :], grid, axis=0)) - y, axis=1)
    best_d, best_t = float(d.min()), float(ts[np.argmin(d)])
    if hi <= lo:
        return best_d, best_t
    h = ts[1] - ts[0]

    def f(t):
        return float(np.linalg.norm(act(spec, t, x[None, :])[0] - y))

    for k in np.argsort(d)[:5]:
        res = minimize_scalar(f, bounds=(ts[k] - h, ts[k] + h), method="bounded",
                              options={"xatol": 1e-13})
        if res.fun < best_d:
            best_d, best_t = float(res.fun), float(res.x)
    return best_d, best_t


def orbit_equal_oracle(x, y, spec: SubgroupSpec, grid: int = 2000, t_range=None, tol: float = 1e-6) -> bool:
    """True iff ``y`` lies (numerically) on the orbit of ``x``."""
    return orbit_distance(x, y, spec, grid, t_range)[0] < tol
