"""Dense linear-algebra helpers for one-parameter subgroups.

Vectors and matrices are plain float64 numpy arrays. The 2x2 canonical
actions (rotation, boost, shear) and the block-diagonal generators built
from them follow one sign convention throughout the package::

    expm(t * [[0, -lam], [lam, 0]]) == rot2(t * lam)
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

HYPERBOLIC_GUARD = 300.0
SKEW_TOL = 1e-10


class Family(str, enum.Enum):
    ELLIPTIC = "elliptic"
    HYPERBOLIC = "hyperbolic"
    PARABOLIC = "parabolic"


def as_vec(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def as_mat(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def rot2(t: float) -> np.ndarray:
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s], [s, c]])


def hyp2(t: float) -> np.ndarray:
    if not abs(t) <= HYPERBOLIC_GUARD:
        raise OverflowError(f"hyperbolic argument {t} exceeds guard {HYPERBOLIC_GUARD}")
    c, s = np.cosh(t), np.sinh(t)
    return np.array([[c, s], [s, c]])


def shear2(t: float) -> np.ndarray:
    return np.array([[1.0, t], [0.0, 1.0]])


def block_diag(blocks) -> np.ndarray:
    """Assemble square blocks along the diagonal; off-block entries are exactly 0."""
    blocks = [as_mat(b) for b in blocks]
    if not blocks:
        raise ValueError("block_diag needs at least one block")
    for b in blocks:
        if b.shape[0] != b.shape[1]:
            raise ValueError(f"block of shape {b.shape} is not square")
    return scipy.linalg.block_diag(*blocks)


def is_skew(B, tol: float = SKEW_TOL) -> bool:
    B = np.asarray(B)
    return B.ndim == 2 and B.shape[0] == B.shape[1] and np.max(np.abs(B + B.T), initial=0.0) < tol


def exp_skew(B) -> np.ndarray:
    """Matrix exponential of a skew-symmetric matrix (an element of SO(n)).

    Uses scaling-and-squaring with Pade approximation.
    """
    B = as_mat(B)
    if not is_skew(B):
        raise ValueError("exp_skew requires a skew-symmetric matrix")
    return scipy.linalg.expm(B)


@dataclass(frozen=True)
class SkewParams:
    """Strict upper triangle (row-major) of an n x n skew-symmetric matrix."""

    n: int
    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if self.n < 1:
            raise ValueError("n must be positive")
        if theta.size != self.n * (self.n - 1) // 2:
            raise ValueError(
                f"expected {self.n * (self.n - 1) // 2} parameters for n={self.n}, got {theta.size}"
            )
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def zeros(cls, n: int) -> "SkewParams":
        return cls(n, np.zeros(n * (n - 1) // 2))


def skew_from_params(p: SkewParams) -> np.ndarray:
    iu = np.triu_indices(p.n, k=1)
    S = np.zeros((p.n, p.n))
    S[iu] = p.theta
    return S - S.T


def params_from_skew(S) -> SkewParams:
    S = as_mat(S)
    return SkewParams(S.shape[0], S[np.triu_indices(S.shape[0], k=1)])


def canonical_block(rate: float, family: Family) -> np.ndarray:
    family = Family(family)
    if family is Family.ELLIPTIC:
        return np.array([[0.0, -rate], [rate, 0.0]])
    if family is Family.HYPERBOLIC:
        return np.array([[0.0, rate], [rate, 0.0]])
    return np.array([[0.0, rate], [0.0, 0.0]])


def make_canonical_generator(rates, n: int, family: Family = Family.ELLIPTIC) -> np.ndarray:
    """Block-diagonal generator L0 with one 2x2 block per rate.

    Odd ``n`` appends a 1x1 zero block (elliptic only).
    """
    family = Family(family)
    rates = np.asarray(rates, dtype=float).reshape(-1)
    if rates.size != n // 2:
        raise ValueError(f"need {n // 2} rates for n={n}, got {rates.size}")
    if n % 2 and family is not Family.ELLIPTIC:
        raise NotImplementedError(f"{family.value} generators are only defined for even n")
    blocks = [canonical_block(r, family) for r in rates]
    if n % 2:
        blocks.append(np.zeros((1, 1)))
    return block_diag(blocks)


def canonical_action(rates, n: int, t: float, family: Family = Family.ELLIPTIC) -> np.ndarray:
    """Closed form of expm(t * L0): rot2 / hyp2 / shear2 blocks (plus a trailing 1)."""
    family = Family(family)
    rates = np.asarray(rates, dtype=float).reshape(-1)
    if rates.size != n // 2:
        raise ValueError(f"need {n // 2} rates for n={n}, got {rates.size}")
    if n % 2 and family is not Family.ELLIPTIC:
        raise NotImplementedError(f"{family.value} generators are only defined for even n")
    act = {Family.ELLIPTIC: rot2, Family.HYPERBOLIC: hyp2, Family.PARABOLIC: shear2}[family]
    blocks = [act(t * r) for r in rates]
    if n % 2:
        blocks.append(np.ones((1, 1)))
    return block_diag(blocks)


def random_so(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed element of SO(n)."""
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_skew(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    S = rng.standard_normal((n, n)) * scale
    return np.triu(S, 1) - np.triu(S, 1).T


def orthogonality_error(R) -> float:
    R = np.asarray(R)
    return float(np.max(np.abs(R.T @ R - np.eye(R.shape[0]))))
