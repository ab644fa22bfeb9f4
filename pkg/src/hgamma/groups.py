"""One-parameter subgroups ``{A^-1 expm(t L0) A}`` and their elements."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import HYPERBOLIC_GUARD, Family, as_mat, canonical_action

SO_TOL = 1e-8
COND_WARN = 1e8

DEFAULT_T_RANGE = {
    Family.ELLIPTIC: (0.0, 2 * np.pi),
    Family.HYPERBOLIC: (-3.0, 3.0),
    Family.PARABOLIC: (-3.0, 3.0),
}


@dataclass(frozen=True)
class SubgroupSpec:
    """Orientation ``A``, per-plane rates and family of a one-parameter subgroup.

    Elliptic specs need ``A`` in SO(n); hyperbolic and parabolic specs only
    need ``A`` invertible.
    """

    A: np.ndarray
    rates: np.ndarray
    family: Family = Family.ELLIPTIC

    def __post_init__(self):
        A = as_mat(self.A).copy()
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        rates = np.asarray(self.rates, dtype=float).reshape(-1).copy()
        family = Family(self.family)
        if rates.size != n // 2:
            raise ValueError(f"need {n // 2} rates for n={n}, got {rates.size}")
        if not np.all(np.isfinite(rates)):
            raise ValueError("rates must be finite")
        if family is Family.ELLIPTIC:
            if np.max(np.abs(A.T @ A - np.eye(n))) > SO_TOL or abs(np.linalg.det(A) - 1) > SO_TOL:
                raise ValueError("elliptic subgroup needs A in SO(n)")
        else:
            if n % 2:
                raise NotImplementedError(f"{family.value} subgroups need even n")
            cond = np.linalg.cond(A)
            if not np.isfinite(cond):
                raise ValueError("A must be invertible")
            if cond > COND_WARN:
                warnings.warn(f"orientation matrix is ill-conditioned (cond={cond:.3g})")
        A.setflags(write=False)
        rates.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "family", family)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def A_inv(self) -> np.ndarray:
        if self.family is Family.ELLIPTIC:
            return self.A.T
        return np.linalg.inv(self.A)

    def canonical(self) -> "SubgroupSpec":
        """Same rates and family with ``A = I``."""
        return SubgroupSpec(np.eye(self.n), self.rates, self.family)


@dataclass(frozen=True)
class GroupElement:
    matrix: np.ndarray
    t: float

    def __matmul__(self, x):
        return self.matrix @ np.asarray(x, dtype=float)


def element_at(spec: SubgroupSpec, t: float) -> GroupElement:
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    D = canonical_action(spec.rates, spec.n, t, spec.family)
    return GroupElement(spec.A_inv @ D @ spec.A, float(t))


def project_so_n(M) -> np.ndarray:
    """Nearest rotation to ``M`` in Frobenius norm (polar factor, det fixed to +1)."""
    M = as_mat(M)
    if M.shape[0] != M.shape[1]:
        raise ValueError("project_so_n needs a square matrix")
    U, s, Vt = np.linalg.svd(M)
    if s[-1] <= 1e-12 * max(s[0], 1e-300):
        raise ValueError("cannot project a singular matrix onto SO(n)")
    if np.linalg.det(U @ Vt) < 0:
        U[:, -1] = -U[:, -1]
    return U @ Vt


def sample_element(spec: SubgroupSpec, rng: np.random.Generator, t_range=None) -> GroupElement:
    lo, hi = DEFAULT_T_RANGE[spec.family] if t_range is None else t_range
    return element_at(spec, rng.uniform(lo, hi) if hi > lo else float(lo))


def act(spec: SubgroupSpec, t, X) -> np.ndarray:
    """Apply ``g_t`` to a batch of points; ``t`` may be a scalar or one value per row."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    t = np.broadcast_to(np.asarray(t, dtype=float), (X.shape[0],))
    m = spec.n // 2
    V = X @ spec.A.T
    a = t[:, None] * spec.rates[None, :]
    v1, v2 = V[:, 0 : 2 * m : 2], V[:, 1 : 2 * m : 2]
    if spec.family is Family.ELLIPTIC:
        c, s = np.cos(a), np.sin(a)
        w1, w2 = c * v1 - s * v2, s * v1 + c * v2
    elif spec.family is Family.HYPERBOLIC:
        if np.any(np.abs(a) > HYPERBOLIC_GUARD):
            raise OverflowError("hyperbolic argument exceeds guard")
        c, s = np.cosh(a), np.sinh(a)
        w1, w2 = c * v1 + s * v2, s * v1 + c * v2
    else:
        w1, w2 = v1 + a * v2, v2
    W = V.copy()
    W[:, 0 : 2 * m : 2], W[:, 1 : 2 * m : 2] = w1, w2
    return W @ spec.A_inv.T
