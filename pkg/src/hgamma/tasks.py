"""Synthetic datasets whose targets are invariant (or equivariant) under a
known one-parameter subgroup.

Inputs are drawn uniformly from ``[0, 1]^n``; ``v = A0 x`` is split into 2D
blocks ``v_i``. Task constants are drawn from a seeded generator:
scalars ``a_i, b_i, w_i`` in ``[0.5, 2]``, matrix-polynomial coefficients
in ``[-1, 1]``, masses in ``[0.1, 1]``, spring constant ``k = 1``.

Double pendulum encoding (n = 8, four blocks):

* ``v_1``, ``v_2``: planar positions of the two bobs; the angles are
  ``q_i = atan2(v_i2, v_i1)``.
* ``v_3 = (p1, s1)``, ``v_4 = (p2, s2)``: generalized momenta ``p_i`` and
  auxiliary momentum coordinates ``s_i`` the derivatives do not use.
* targets ``(q1', q2', p1', p2') = (p1, p2, k d, -k d)`` with
  ``d = wrap(q1 - q2)``.

Rotating both position blocks by the same angle leaves every target
unchanged, so the reference rates are ``[1, 1, 0, 0]``. The encoding is
defined in physical coordinates, so ``A0`` is the identity (as for the
inertia task). Samples are kept
only when ``|d| <= pi/2`` and both position blocks have norm at least 0.1,
which keeps the targets away from the wrap-around discontinuity.

Moment of inertia: ``N`` points, each contributing ``(x, y, z, m)`` to the
input. The full target is the flattened 3x3 inertia tensor; the
``surrogate`` output ``(I_xz, I_yz)`` rotates as a plain 2D vector under
rotations about the z axis, which is what the 2D equivariant head models.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .groups import SubgroupSpec, act
from .linalg import random_so, rot2

DEFAULT_SAMPLES = 5120


class TaskName(str, enum.Enum):
    P3 = "p3"
    Q4 = "q4"
    R8 = "r8"
    U = "u"
    ANISOTROPIC_QUANTUM = "aniso"
    DOUBLE_PENDULUM = "pendulum"
    MOMENT_OF_INERTIA = "inertia"


@dataclass
class TaskSpec:
    name: TaskName
    n: int
    A0: np.ndarray
    lambda0: np.ndarray
    extra: dict = field(default_factory=dict)
    num_samples: int = DEFAULT_SAMPLES
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.name = TaskName(self.name)
        self.A0 = np.asarray(self.A0, dtype=float)
        self.lambda0 = np.asarray(self.lambda0, dtype=float)
        if self.lambda0[0] != 1:
            raise ValueError("lambda0[0] must be 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    def subgroup(self) -> SubgroupSpec:
        return SubgroupSpec(self.A0, self.lambda0)

    @property
    def equivariant(self) -> bool:
        return self.name is TaskName.MOMENT_OF_INERTIA

    def to_json(self) -> dict:
        extra = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.extra.items()}
        return {
            "name": self.name.value,
            "n": self.n,
            "A0": self.A0.tolist(),
            "lambda0": self.lambda0.tolist(),
            "extra": extra,
            "num_samples": self.num_samples,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, d: dict) -> "TaskSpec":
        extra = {k: (np.asarray(v) if isinstance(v, list) else v) for k, v in d["extra"].items()}
        return cls(d["name"], d["n"], np.asarray(d["A0"]), np.asarray(d["lambda0"]), extra,
                   d["num_samples"], d["noise_sigma"], d["seed"])


@dataclass
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    spec: TaskSpec

    def __post_init__(self):
        if len(self.X) != len(self.Y):
            raise ValueError("inputs and targets differ in length")

    def __len__(self):
        return len(self.X)


def w_subspace(coeffs) -> np.ndarray:
    """``alpha [1,0,0,1] + beta [0,1,-1,0]``: weights that read a 2x2 matrix invariantly under conjugation."""
    alpha, beta = coeffs
    return alpha * np.array([1.0, 0.0, 0.0, 1.0]) + beta * np.array([0.0, 1.0, -1.0, 0.0])


def make_task(name, seed: int = 0, n: int | None = None, num_samples: int = DEFAULT_SAMPLES,
              noise_sigma: float = 0.0, points: int = 1, output: str = "surrogate") -> TaskSpec:
    """Reference orientation, rates and constants for a named task."""
    name = TaskName(name)
    rng = np.random.default_rng([seed, 0x7A5C])
    fixed_n = {TaskName.P3: 3, TaskName.Q4: 4, TaskName.R8: 8, TaskName.U: 4,
               TaskName.DOUBLE_PENDULUM: 8, TaskName.MOMENT_OF_INERTIA: 4 * points}
    if name in fixed_n:
        if n is not None and n != fixed_n[name]:
            raise ValueError(f"task {name.value} needs n={fixed_n[name]}")
        n = fixed_n[name]
    elif n is None:
        n = 4
    if n % 2 and name is TaskName.ANISOTROPIC_QUANTUM:
        raise ValueError("the anisotropic task needs even n")
    m = n // 2
    A0 = random_so(n, rng)
    lam = np.ones(m)
    extra: dict = {}
    if name in (TaskName.Q4, TaskName.R8):
        extra["scalars"] = rng.uniform(0.5, 2.0, size=m)
        extra["poly"] = rng.uniform(-1.0, 1.0, size=(m, 2))
        extra["w"] = w_subspace((1.0, rng.uniform(-1.0, 1.0)))
    elif name is TaskName.ANISOTROPIC_QUANTUM:
        extra["weights"] = rng.uniform(0.5, 2.0, size=m)
    elif name is TaskName.DOUBLE_PENDULUM:
        extra["k"] = 1.0
        A0 = np.eye(n)
        lam = np.array([1.0, 1.0, 0.0, 0.0])
    elif name is TaskName.MOMENT_OF_INERTIA:
        if output not in ("surrogate", "matrix"):
            raise ValueError("output must be 'surrogate' or 'matrix'")
        extra["points"] = points
        extra["output"] = output
        A0 = np.eye(n)
        lam = np.tile([1.0, 0.0], points)
    return TaskSpec(name, n, A0, lam, extra, num_samples, noise_sigma, seed)


# --- target functions --------------------------------------------------------


def _blocks(spec, X):
    V = np.atleast_2d(X) @ spec.A0.T
    m = spec.n // 2
    return V[:, 0 : 2 * m : 2], V[:, 1 : 2 * m : 2], V


def p3_target(spec, X):
    V = np.atleast_2d(X) @ spec.A0.T
    return (np.sin(V[:, 0] ** 2 + V[:, 1] ** 2) + np.cos(V[:, 2]) ** 2)[:, None]


def qr_target(spec, X):
    v1, v2, _ = _blocks(spec, X)
    vi = np.stack([v1, v2], axis=-1)  # (B, m, 2)
    M = vi[..., :, None] * vi[..., None, :]
    c = spec.extra["poly"]
    P = c[None, :, 0, None, None] * M + c[None, :, 1, None, None] * (M @ M)
    S = np.einsum("i,bijk->bjk", spec.extra["scalars"], P)
    vec = S.transpose(0, 2, 1).reshape(len(S), 4)  # column-major vec
    return (vec @ spec.extra["w"])[:, None]


def u_target(spec, X):
    v1, v2, _ = _blocks(spec, X)
    return np.hypot(v1, v2)


def aniso_target(spec, X):
    v1, v2, _ = _blocks(spec, X)
    return ((v1**2 + v2**2) @ spec.extra["weights"])[:, None]


def pendulum_state(spec, X):
    """``(q1, q2, p1, p2)`` under the documented encoding."""
    v1, v2, _ = _blocks(spec, X)
    q = np.arctan2(v2[:, :2], v1[:, :2])
    return q[:, 0], q[:, 1], v1[:, 2], v1[:, 3]


def pendulum_target(spec, X):
    q1, q2, p1, p2 = pendulum_state(spec, X)
    d = np.angle(np.exp(1j * (q1 - q2)))
    k = spec.extra["k"]
    return np.stack([p1, p2, k * d, -k * d], axis=1)


def inertia_tensor(X, points: int) -> np.ndarray:
    """``sum_i m_i (|x_i|^2 I - x_i x_i^T)`` for rows laid out as ``(x, y, z, m)`` per point."""
    P = np.atleast_2d(X).reshape(-1, points, 4)
    pos, mass = P[..., :3], P[..., 3]
    r2 = np.sum(pos**2, axis=-1)
    outer = pos[..., :, None] * pos[..., None, :]
    return np.einsum("bp,bpjk->bjk", mass, r2[..., None, None] * np.eye(3) - outer)


def inertia_target(spec, X):
    I = inertia_tensor(X, spec.extra["points"])
    if spec.extra.get("output", "surrogate") == "surrogate":
        return np.stack([I[:, 0, 2], I[:, 1, 2]], axis=1)
    return I.reshape(len(I), 9)


TARGETS = {
    TaskName.P3: p3_target,
    TaskName.Q4: qr_target,
    TaskName.R8: qr_target,
    TaskName.U: u_target,
    TaskName.ANISOTROPIC_QUANTUM: aniso_target,
    TaskName.DOUBLE_PENDULUM: pendulum_target,
    TaskName.MOMENT_OF_INERTIA: inertia_target,
}


def target(spec: TaskSpec, X) -> np.ndarray:
    return TARGETS[spec.name](spec, X)


# --- generators ----------------------------------------------------------------


def _uniform_inputs(spec, rng):
    return rng.uniform(0.0, 1.0, size=(spec.num_samples, spec.n))


def _generate(spec: TaskSpec, X) -> Dataset:
    ds = Dataset(X, target(spec, X), spec)
    if spec.noise_sigma > 0:
        ds = add_label_noise(ds, spec.noise_sigma, spec.seed)
    return ds


def _check_n(spec, allowed):
    if spec.n not in allowed:
        raise ValueError(f"task {spec.name.value} needs n in {sorted(allowed)}, got {spec.n}")


def gen_p3(spec: TaskSpec) -> Dataset:
    _check_n(spec, {3})
    return _generate(spec, _uniform_inputs(spec, np.random.default_rng([spec.seed, 1])))


def gen_qr(spec: TaskSpec) -> Dataset:
    _check_n(spec, {4, 8})
    return _generate(spec, _uniform_inputs(spec, np.random.default_rng([spec.seed, 2])))


def gen_u(spec: TaskSpec) -> Dataset:
    _check_n(spec, {4})
    return _generate(spec, _uniform_inputs(spec, np.random.default_rng([spec.seed, 3])))


def gen_aniso(spec: TaskSpec) -> Dataset:
    if spec.n % 2:
        raise ValueError("the anisotropic task needs even n")
    return _generate(spec, _uniform_inputs(spec, np.random.default_rng([spec.seed, 4])))


def gen_double_pendulum(spec: TaskSpec) -> Dataset:
    _check_n(spec, {8})
    rng = np.random.default_rng([spec.seed, 5])
    kept = []
    total = 0
    while total < spec.num_samples:
        X = rng.uniform(0.0, 1.0, size=(2 * spec.num_samples, spec.n))
        v1, v2, _ = _blocks(spec, X)
        q1, q2, _, _ = pendulum_state(spec, X)
        d = np.angle(np.exp(1j * (q1 - q2)))
        r = np.hypot(v1[:, :2], v2[:, :2])
        X = X[(np.abs(d) <= np.pi / 2) & (r.min(axis=1) >= 0.1)]
        kept.append(X)
        total += len(X)
    return _generate(spec, np.concatenate(kept)[: spec.num_samples])


def gen_inertia(spec: TaskSpec) -> Dataset:
    rng = np.random.default_rng([spec.seed, 6])
    X = _uniform_inputs(spec, rng).reshape(spec.num_samples, -1, 4)
    X[..., 3] = rng.uniform(0.1, 1.0, size=X.shape[:2])
    return _generate(spec, X.reshape(spec.num_samples, spec.n))


GENERATORS = {
    TaskName.P3: gen_p3,
    TaskName.Q4: gen_qr,
    TaskName.R8: gen_qr,
    TaskName.U: gen_u,
    TaskName.ANISOTROPIC_QUANTUM: gen_aniso,
    TaskName.DOUBLE_PENDULUM: gen_double_pendulum,
    TaskName.MOMENT_OF_INERTIA: gen_inertia,
}


def generate(spec: TaskSpec) -> Dataset:
    return GENERATORS[spec.name](spec)


def add_label_noise(ds: Dataset, sigma: float, seed: int) -> Dataset:
    """Add seeded i.i.d. ``N(0, sigma^2)`` noise to every target coordinate."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return ds
    rng = np.random.default_rng([seed, 0x0015E])
    return replace(ds, Y=ds.Y + rng.normal(0.0, sigma, size=ds.Y.shape))


def symmetry_violation(spec: TaskSpec, rng: np.random.Generator, num: int = 100) -> float:
    """Max deviation of the target from invariance (equivariance for inertia) under the reference subgroup."""
    X = rng.uniform(0.0, 1.0, size=(num, spec.n))
    if spec.name is TaskName.DOUBLE_PENDULUM:
        X = gen_double_pendulum(replace(spec, num_samples=num, noise_sigma=0.0)).X
    t = rng.uniform(0.0, 2 * np.pi, size=num)
    gX = act(spec.subgroup(), t, X)
    f, fg = target(spec, X), target(spec, gX)
    if spec.equivariant and spec.extra.get("output", "surrogate") == "surrogate":
        f = np.einsum("bij,bj->bi", np.stack([rot2(s) for s in t]), f)
    elif spec.equivariant:
        R = np.stack([np.block([[rot2(s), np.zeros((2, 1))], [np.zeros((1, 2)), np.ones((1, 1))]]) for s in t])
        f = (R @ f.reshape(-1, 3, 3) @ R.transpose(0, 2, 1)).reshape(num, 9)
    return float(np.max(np.abs(fg - f)))


def export_dataset(ds: Dataset, path) -> tuple[Path, Path]:
    """Write ``<path>.csv`` (header ``x0..,y0..``) and ``<path>.json`` (the task spec)."""
    path = Path(path)
    csv_path, json_path = path.with_suffix(".csv"), path.with_suffix(".json")
    header = [f"x{i}" for i in range(ds.X.shape[1])] + [f"y{j}" for j in range(ds.Y.shape[1])]
    np.savetxt(csv_path, np.hstack([ds.X, ds.Y]), delimiter=",", header=",".join(header),
               comments="", fmt="%.17g")
    json_path.write_text(json.dumps(ds.spec.to_json(), indent=2))
    return csv_path, json_path


def load_dataset(path) -> Dataset:
    path = Path(path)
    spec = TaskSpec.from_json(json.loads(path.with_suffix(".json").read_text()))
    data = np.loadtxt(path.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
    return Dataset(data[:, : spec.n], data[:, spec.n :], spec)
