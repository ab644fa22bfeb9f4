"""Evaluation of a trained (or untrained) model against a reference subgroup."""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .groups import DEFAULT_T_RANGE, SubgroupSpec, act
from .linalg import as_mat, make_canonical_generator, rot2

DEFAULT_THETA_GRID = np.linspace(0.0, 2 * np.pi, 32, endpoint=False)
EXHAUSTIVE_MATCH_MAX = 4


class DegenerateGenerator(ValueError):
    """The generator is the zero matrix, so it has no direction."""


def invariance_error(f, spec: SubgroupSpec, rng: np.random.Generator, num_pairs: int = 1000,
                     t_range=None, output_action=None, inputs=None) -> tuple[float, float]:
    """Monte Carlo estimate of ``E[(f(x) - f(h x))^2]`` with ``x`` uniform on the unit cube.

    ``h`` is drawn from ``spec`` with ``t`` uniform on ``t_range``. Passing
    ``inputs`` replaces the cube sample (``num_pairs`` is then ignored). When
    ``output_action(t, Y)`` is given the comparison is against the
    transformed output instead, which measures equivariance. Returns the
    mean and its standard error.
    """
    if inputs is not None:
        X = np.atleast_2d(np.asarray(inputs, dtype=float))
        num_pairs = X.shape[0]
    if num_pairs < 1:
        raise ValueError("num_pairs must be >= 1")
    lo, hi = DEFAULT_T_RANGE[spec.family] if t_range is None else t_range
    if inputs is None:
        X = rng.uniform(0.0, 1.0, size=(num_pairs, spec.n))
    t = rng.uniform(lo, hi, size=num_pairs)
    fx = np.asarray(f(X), dtype=float).reshape(num_pairs, -1)
    fgx = np.asarray(f(act(spec, t, X)), dtype=float).reshape(num_pairs, -1)
    if output_action is not None:
        fx = output_action(t, fx)
    per_pair = np.mean((fx - fgx) ** 2, axis=1)
    stderr = float(np.std(per_pair, ddof=1) / np.sqrt(num_pairs)) if num_pairs > 1 else 0.0
    return float(np.mean(per_pair)), stderr


def rotate_output(rate: float = 1.0):
    """Output action for a 2D equivariant head: ``Y -> rot2(t * rate) Y`` row by row."""

    def action(t, Y):
        c, s = np.cos(t * rate), np.sin(t * rate)
        return np.stack([c * Y[:, 0] - s * Y[:, 1], s * Y[:, 0] + c * Y[:, 1]], axis=1)

    return action


def generator_of(spec) -> np.ndarray:
    """Unit-Frobenius-norm generator ``A^-1 L0 A`` of a subgroup spec or model."""
    if hasattr(spec, "subgroup"):
        spec = spec.subgroup()
    L0 = make_canonical_generator(spec.rates, spec.n, spec.family)
    B = spec.A_inv @ L0 @ spec.A
    norm = np.linalg.norm(B)
    if norm == 0:
        raise DegenerateGenerator("all rates are zero")
    return B / norm


def cosine_distance(B1, B2) -> float:
    """``1 - |<B1, B2>| / (|B1| |B2|)``; ``B`` and ``-B`` count as the same direction."""
    B1, B2 = as_mat(B1), as_mat(B2)
    if B1.shape != B2.shape:
        raise ValueError(f"shape mismatch {B1.shape} vs {B2.shape}")
    n1, n2 = np.linalg.norm(B1), np.linalg.norm(B2)
    if n1 == 0 or n2 == 0:
        raise DegenerateGenerator("cosine distance of a zero generator")
    c = abs(float(np.sum(B1 * B2))) / (n1 * n2)
    return max(0.0, 1.0 - min(c, 1.0))


def _rotations(theta, n):
    blocks = [rot2(theta)] * (n // 2) + ([np.ones((1, 1))] if n % 2 else [])
    out = np.zeros((n, n))
    k = 0
    for b in blocks:
        d = b.shape[0]
        out[k : k + d, k : k + d] = b
        k += d
    return out


def block_condition_check(A0, A, theta_grid=DEFAULT_THETA_GRID):
    """Do ``A0`` and ``A`` orient the same subgroup (all rates equal)?

    With ``P = A A0^T`` and ``D(theta)`` the block rotation, the conjugate
    ``M(theta) = P^T D(theta) P`` must be block diagonal with each 2x2
    block equal to ``R(+theta)`` or ``R(-theta)``. Returns
    ``(diag_residual, offdiag_residual, signs)``, the residuals being
    maxima over the grid in Frobenius norm. An odd trailing coordinate is
    a fixed 1x1 block compared against 1.
    """
    A0, A = as_mat(A0), as_mat(A)
    if A0.shape != A.shape or A.shape[0] != A.shape[1]:
        raise ValueError("A0 and A must be square and of equal size")
    n = A.shape[0]
    if n < 2:
        raise ValueError("need n >= 2")
    m = n // 2
    P = A @ A0.T
    Ms = [P.T @ _rotations(th, n) @ P for th in theta_grid]
    sl = [slice(2 * i, 2 * i + 2) for i in range(m)] + ([slice(n - 1, n)] if n % 2 else [])

    off = 0.0
    for i, j in itertools.permutations(range(len(sl)), 2):
        off = max(off, max(np.linalg.norm(M[sl[i], sl[j]]) for M in Ms))

    diag, signs = 0.0, []
    for i in range(m):
        best = None
        for s in (1, -1):
            r = max(np.linalg.norm(M[sl[i], sl[i]] - rot2(s * th)) for M, th in zip(Ms, theta_grid))
            if best is None or r < best[0]:
                best = (r, s)
        diag = max(diag, best[0])
        signs.append(best[1])
    if n % 2:
        diag = max(diag, max(abs(M[-1, -1] - 1.0) for M in Ms))
    return float(diag), float(off), tuple(signs)


def match_rates(learned, reference) -> np.ndarray:
    """Permutation ``p`` minimizing ``sum |learned[p[i]] - reference[i]|``."""
    learned = np.asarray(learned, dtype=float).reshape(-1)
    reference = np.asarray(reference, dtype=float).reshape(-1)
    if learned.size != reference.size:
        raise ValueError("rate lists differ in length")
    cost = np.abs(reference[:, None] - learned[None, :])
    if learned.size <= EXHAUSTIVE_MATCH_MAX:
        idx = np.arange(learned.size)
        best = min(itertools.permutations(idx), key=lambda p: cost[idx, list(p)].sum())
        return np.array(best, dtype=int)
    _, cols = linear_sum_assignment(cost)
    return cols


def lambda_report(model_or_rates, reference) -> np.ndarray:
    """Per-rate absolute errors after the best block matching, in reference order."""
    learned = getattr(model_or_rates, "rates", model_or_rates)
    learned = np.asarray(learned, dtype=float).reshape(-1)
    reference = np.asarray(reference, dtype=float).reshape(-1)
    p = match_rates(learned, reference)
    return np.abs(learned[p] - reference)


CSV_COLUMNS = ("task", "seed", "val_mse", "invariance_error", "cosine_distance", "lambda",
               "diag_residual", "offdiag_residual", "epochs", "wall_seconds")


@dataclass
class RunReport:
    task: str
    seed: int
    val_mse: float
    invariance_error: float
    cosine_distance: float
    learned_lambda: list = field(default_factory=list)
    block_diag_residual: float = float("nan")
    block_offdiag_residual: float = float("nan")
    epochs_run: int = 0
    wall_seconds: float = 0.0

    def __post_init__(self):
        for name in ("val_mse", "invariance_error", "cosine_distance",
                     "block_diag_residual", "block_offdiag_residual", "wall_seconds"):
            setattr(self, name, float(getattr(self, name)))
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        self.seed, self.epochs_run = int(self.seed), int(self.epochs_run)
        self.learned_lambda = [float(v) for v in self.learned_lambda]

    def csv_values(self) -> list:
        return [self.task, self.seed, repr(self.val_mse), repr(self.invariance_error),
                repr(self.cosine_distance), ";".join(repr(v) for v in self.learned_lambda),
                repr(self.block_diag_residual), repr(self.block_offdiag_residual),
                self.epochs_run, repr(self.wall_seconds)]

    def to_csv_row(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow(self.csv_values())
        return buf.getvalue()

    @classmethod
    def from_csv_row(cls, row) -> "RunReport":
        if isinstance(row, str):
            row = next(csv.reader([row.strip()]))
        r = dict(zip(CSV_COLUMNS, row))
        lam = [float(v) for v in r["lambda"].split(";") if v]
        return cls(r["task"], int(r["seed"]), float(r["val_mse"]), float(r["invariance_error"]),
                   float(r["cosine_distance"]), lam, float(r["diag_residual"]),
                   float(r["offdiag_residual"]), int(r["epochs"]), float(r["wall_seconds"]))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls(**json.loads(text))


def summarize(reports, fields=("val_mse", "invariance_error", "cosine_distance")) -> dict:
    """Mean and sample standard deviation of numeric fields, plus per-rate lambda statistics."""
    out = {}
    for name in fields:
        vals = np.array([getattr(r, name) for r in reports], dtype=float)
        out[name] = (float(vals.mean()), float(vals.std(ddof=1)) if len(vals) > 1 else 0.0)
    lams = np.array([r.learned_lambda for r in reports], dtype=float)
    if lams.size:
        out["lambda"] = (lams.mean(axis=0).tolist(),
                         (lams.std(axis=0, ddof=1) if len(lams) > 1 else np.zeros(lams.shape[1])).tolist())
    return out
