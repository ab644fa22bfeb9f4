"""Property suites that check the whole stack without training.

Each suite returns a :class:`SuiteResult`; failures carry the offending
case so it can be printed. ``families`` restricts a suite to the listed
subgroup families.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import model as M
from .groups import SubgroupSpec, element_at
from .invrep import canonicalize, orbit_distance
from .linalg import Family, exp_skew, make_canonical_generator, orthogonality_error, random_so, random_skew
from .metrics import generator_of, invariance_error
from .tasks import TaskName, make_task, symmetry_violation

ALL_FAMILIES = frozenset(Family)
ORBIT_TOL = 1e-6


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.cases > 0 and not self.failures

    def fail(self, size: float, **case):
        self.failures.append((float(size), case))

    def smallest_failure(self):
        """The failing case with the smallest size score, or ``None``."""
        return min(self.failures, key=lambda f: f[0])[1] if self.failures else None

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.cases} cases, {len(self.failures)} failures"


def _families(families):
    chosen = ALL_FAMILIES if families is None else {Family(f) for f in families}
    return tuple(f for f in Family if f in chosen)


def random_invertible(n: int, rng: np.random.Generator, spread: float = 0.3) -> np.ndarray:
    """Well-conditioned ``Q1 diag(exp(s)) Q2``, ``|s| <= spread``."""
    return random_so(n, rng) @ np.diag(np.exp(rng.uniform(-spread, spread, n))) @ random_so(n, rng)


def random_spec(family: Family, n: int, rng: np.random.Generator, integer_rates: bool = True) -> SubgroupSpec:
    """Random subgroup. Elliptic rates are integers (so orbits close) unless asked otherwise."""
    family = Family(family)
    m = n // 2
    if family is Family.ELLIPTIC:
        rest = rng.integers(1, 4, size=m - 1) if integer_rates else rng.uniform(0.3, 2.0, size=m - 1)
        return SubgroupSpec(random_so(n, rng), np.concatenate([[1.0], rest]), family)
    return SubgroupSpec(random_invertible(n, rng), np.concatenate([[1.0], rng.uniform(0.5, 2.0, m - 1)]), family)


def sample_regular(spec: SubgroupSpec, rng: np.random.Generator, margin: float = 0.2) -> np.ndarray:
    """A point where the canonical form is regular: timelike pivot (hyperbolic), ``v12`` away from 0 (parabolic)."""
    n = spec.n
    while True:
        v = rng.uniform(-1.0, 1.0, n)
        if spec.family is Family.ELLIPTIC and np.hypot(v[0], v[1]) > margin:
            break
        if spec.family is Family.HYPERBOLIC and abs(v[0]) - abs(v[1]) > margin:
            break
        if spec.family is Family.PARABOLIC and abs(v[1]) > margin:
            break
    return spec.A_inv @ v


_T_SPAN = {Family.ELLIPTIC: (0.0, 2 * np.pi), Family.HYPERBOLIC: (-1.5, 1.5), Family.PARABOLIC: (-2.0, 2.0)}


def orbit_suite(rng: np.random.Generator, pairs: int = 200, families=None, configs=None) -> SuiteResult:
    """invRep equality against the brute-force orbit oracle, plus orbit reconstruction.

    Half of the pairs share an orbit by construction, half are pushed off
    it by a random perturbation. For every ``x`` the representative must
    also map back: ``g_{t0} A^-1 rep == x``.
    """
    fams = _families(families)
    configs = configs or [(Family.ELLIPTIC, 3), (Family.ELLIPTIC, 4), (Family.ELLIPTIC, 6),
                          (Family.HYPERBOLIC, 4), (Family.PARABOLIC, 4)]
    res = SuiteResult("orbit")
    for family, n in configs:
        if family not in fams:
            continue
        for k in range(pairs):
            spec = random_spec(family, n, rng)
            x = sample_regular(spec, rng)
            t = rng.uniform(*_T_SPAN[family])
            y = element_at(spec, t) @ x
            if k % 2:
                while True:
                    y_off = y + rng.normal(scale=0.05, size=n)
                    if _regular(spec, y_off):
                        break
                y = y_off
            rep, t0, _, status = canonicalize(np.stack([x, y]), spec)
            same_rep = bool(np.linalg.norm(rep[0] - rep[1]) < ORBIT_TOL)
            dist = orbit_distance(x, y, spec)[0]
            same_orbit = dist < ORBIT_TOL
            back = element_at(spec, t0[0]) @ (spec.A_inv @ rep[0])
            res.cases += 1
            scale = float(np.linalg.norm(x) + abs(t))
            if same_rep != same_orbit:
                res.fail(scale, kind="disagreement", family=family.value, n=n, A=spec.A.tolist(),
                         rates=spec.rates.tolist(), x=x.tolist(), y=y.tolist(),
                         rep_equal=same_rep, oracle_distance=dist)
            elif np.linalg.norm(back - x) > 1e-8 or status[0] != "ok":
                res.fail(scale, kind="reconstruction", family=family.value, n=n, x=x.tolist(),
                         t0=float(t0[0]), error=float(np.linalg.norm(back - x)), status=str(status[0]))
    return res


def _regular(spec, y):
    v = spec.A @ y
    if spec.family is Family.HYPERBOLIC:
        return abs(v[0]) - abs(v[1]) > 0.05
    if spec.family is Family.PARABOLIC:
        return abs(v[1]) > 0.05
    return np.hypot(v[0], v[1]) > 0.05


def homomorphism_suite(rng: np.random.Generator, instances: int = 100, families=None) -> SuiteResult:
    """``exp_skew`` orthogonality, ``g_s g_t == g_{s+t}`` and ``expm(t L) == g_t``."""
    fams = _families(families)
    res = SuiteResult("homomorphism")
    for _ in range(instances):
        if Family.ELLIPTIC in fams:
            n = int(rng.integers(2, 9))
            R = exp_skew(random_skew(n, rng))
            err = orthogonality_error(R)
            res.cases += 1
            if err >= 1e-10 or np.linalg.det(R) < 0:
                res.fail(n, kind="exp_skew", n=n, error=err)
        for family in fams:
            n = int(rng.choice([2, 4, 6])) if family is not Family.ELLIPTIC else int(rng.integers(2, 8))
            spec = random_spec(family, n, rng, integer_rates=False)
            s, t = rng.uniform(-1.0, 1.0, 2)
            lhs = element_at(spec, s).matrix @ element_at(spec, t).matrix
            rhs = element_at(spec, s + t).matrix
            hom = float(np.max(np.abs(lhs - rhs)))
            L = spec.A_inv @ make_canonical_generator(spec.rates, n, family) @ spec.A
            gen = float(np.max(np.abs(scipy.linalg.expm(t * L) - element_at(spec, t).matrix)))
            res.cases += 2
            if hom >= 1e-9:
                res.fail(n + abs(s) + abs(t), kind="homomorphism", family=family.value, n=n, s=s, t=t, error=hom)
            if gen >= 1e-10:
                res.fail(n + abs(t), kind="generator_exp", family=family.value, n=n, t=t, error=gen)
    return res


_GRAD_MODES = {
    Family.ELLIPTIC: [("so3", 3, False), ("son", 4, False), ("son", 5, False), ("son", 4, True), ("son", 6, False)],
    Family.HYPERBOLIC: [("sln-hyperbolic", 4, False)],
    Family.PARABOLIC: [("sln-parabolic", 4, False)],
}


def _away_from_kinks(model, X, margin=1e-4) -> bool:
    """True when no sample sits near a non-smooth point of the pipeline."""
    A = model.A
    V = X @ A.T
    if model.mode is M.Mode.SO3_CANONICAL:
        feats = np.stack([V[:, 0] ** 2 + V[:, 1] ** 2, V[:, 2]], axis=1)
    else:
        if model.mode.family is Family.ELLIPTIC:
            r = np.hypot(V[:, 0], V[:, 1])
            ang = np.arctan2(V[:, 1], V[:, 0])
            if np.any(r < 0.05) or np.any(np.pi - np.abs(ang) < 1e-2):
                return False
        elif model.mode.family is Family.HYPERBOLIC:
            if np.any(np.abs(V[:, 0]) - np.abs(V[:, 1]) < 0.1):
                return False
        elif np.any(np.abs(V[:, 1]) < 0.1):
            return False
        feats = M.features(model, X)
    h = feats
    for W, b in zip(model.mlp.weights[:-1], model.mlp.biases[:-1]):
        z = h @ W.T + b
        if np.any(np.abs(z) < margin):
            return False
        h = np.maximum(z, 0.0)
    return True


def finite_difference_check(model, X, Y, h: float = 1e-6, floor: float = 1e-6) -> float:
    """Worst per-coordinate relative error between analytic and central-difference gradients."""
    _, grads = M.loss_batch(model, X, Y)
    params = model.params()
    worst = 0.0
    for k, p in enumerate(params):
        for i in range(p.size):
            shifted = [q.copy() for q in params]
            shifted[k].flat[i] += h
            up = M.mse(model.with_params(shifted), X, Y)
            shifted[k].flat[i] -= 2 * h
            down = M.mse(model.with_params(shifted), X, Y)
            fd = (up - down) / (2 * h)
            an = grads[k].flat[i]
            worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), floor))
    return worst


def random_model_batch(rng: np.random.Generator, mode: str, n: int, equivariant: bool, batch: int = 6):
    """Random model (nonzero ``A``, random rates) and a regular batch for it."""
    out = 2 if equivariant else 1
    model = M.create_model(n, mode, out_dim=out, hidden=8, seed=int(rng.integers(1 << 30)),
                           skew_scale=0.7, equivariant=equivariant)
    model = model.with_params([model.theta, rng.normal(scale=0.3, size=model.log_rates.shape),
                               *model.mlp.arrays()])
    spec = model.subgroup()
    X = np.stack([sample_regular(spec, rng, margin=0.3) for _ in range(batch)])
    Y = rng.uniform(-1.0, 1.0, size=(batch, out))
    return model, X, Y


def gradient_suite(rng: np.random.Generator, configs: int = 20, families=None, tol: float = 1e-4) -> SuiteResult:
    """Full-pipeline gradients against central finite differences on random regular configurations."""
    fams = _families(families)
    modes = [m for f in fams for m in _GRAD_MODES[f]]
    res = SuiteResult("gradient")
    if not modes:
        return res
    done = 0
    while done < configs:
        mode, n, eq = modes[done % len(modes)]
        model, X, Y = random_model_batch(rng, mode, n, eq)
        if not _away_from_kinks(model, X):
            continue
        err = finite_difference_check(model, X, Y)
        res.cases += 1
        done += 1
        if not err < tol:
            res.fail(n, kind="gradient", mode=mode, n=n, equivariant=eq, rel_error=err)
    return res


def generator_suite(rng: np.random.Generator, instances: int = 50, families=None) -> SuiteResult:
    """Generator conjugation and skewness, task symmetry, and architectural invariance of untrained models."""
    fams = _families(families)
    res = SuiteResult("generator")
    for _ in range(instances):
        for family in fams:
            n = int(rng.choice([2, 4, 6])) if family is not Family.ELLIPTIC else int(rng.integers(2, 8))
            spec = random_spec(family, n, rng)
            B = generator_of(spec)
            B0 = generator_of(spec.canonical())
            conj = spec.A_inv @ B0 @ spec.A
            conj /= np.linalg.norm(conj)
            res.cases += 1
            if np.max(np.abs(B - conj)) > 1e-12:
                res.fail(n, kind="conjugation", family=family.value, n=n)
            if family is Family.ELLIPTIC:
                res.cases += 1
                if np.max(np.abs(B + B.T)) >= 1e-12:
                    res.fail(n, kind="skew", n=n)
    if Family.ELLIPTIC in fams:
        for name in TaskName:
            spec = make_task(name, seed=int(rng.integers(1000)), num_samples=64)
            v = symmetry_violation(spec, rng, num=100)
            res.cases += 1
            if v > 1e-9:
                res.fail(spec.n, kind="task_symmetry", task=name.value, violation=v)
    for family in fams:
        for mode, n, _ in _GRAD_MODES[family]:
            model = M.create_model(n, mode, seed=int(rng.integers(1 << 30)), skew_scale=1.0)
            spec = model.subgroup()
            X = None
            if family is not Family.ELLIPTIC:
                X = np.stack([sample_regular(spec, rng) for _ in range(200)])
            err, _ = invariance_error(M.predictor(model), spec, rng, num_pairs=200, inputs=X,
                                      t_range=None if family is Family.ELLIPTIC else (-1.0, 1.0))
            res.cases += 1
            if err >= 1e-7:
                res.fail(n, kind="model_invariance", mode=mode, n=n, error=err)
    return res


SUITES = {
    "orbit": orbit_suite,
    "homomorphism": homomorphism_suite,
    "gradient": gradient_suite,
    "generator": generator_suite,
}


def run_all(seed: int = 0, families=None, quick: bool = False) -> list[SuiteResult]:
    rng = np.random.default_rng(seed)
    if quick:
        return [orbit_suite(rng, 20, families), homomorphism_suite(rng, 10, families),
                gradient_suite(rng, 4, families), generator_suite(rng, 5, families)]
    return [suite(rng, families=families) for suite in SUITES.values()]
