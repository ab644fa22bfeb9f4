import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hgamma.groups import SubgroupSpec, act, element_at, project_so_n, sample_element
from hgamma.linalg import Family, block_diag, random_so, rot2
from hgamma.suites import random_spec


def test_spec_validation():
    with pytest.raises(ValueError):
        SubgroupSpec(np.diag([1.0, 1.0, -1.0, 1.0]), [1, 1])  # det -1
    with pytest.raises(ValueError):
        SubgroupSpec(np.eye(4), [1])
    with pytest.raises(NotImplementedError):
        SubgroupSpec(np.eye(3), [1], Family.HYPERBOLIC)
    with pytest.raises(ValueError):
        SubgroupSpec(np.zeros((4, 4)), [1, 1], Family.PARABOLIC)
    with pytest.warns(UserWarning):
        SubgroupSpec(np.diag([1e5, 1e-5, 1.0, 1.0]), [1, 1], Family.HYPERBOLIC)


def test_spec_is_immutable():
    spec = SubgroupSpec(np.eye(2), [1])
    with pytest.raises(ValueError):
        spec.A[0, 0] = 2.0


def test_element_at_examples():
    spec = SubgroupSpec(np.eye(4), [1, 2])
    assert np.allclose(element_at(spec, 0).matrix, np.eye(4))
    assert np.allclose(element_at(spec, 0.7).matrix, block_diag([rot2(0.7), rot2(1.4)]))
    with pytest.raises(ValueError):
        element_at(spec, float("inf"))


@pytest.mark.parametrize("family", list(Family))
def test_homomorphism_and_conjugation(family):
    rng = np.random.default_rng(0)
    for _ in range(20):
        spec = random_spec(family, 4, rng, integer_rates=False)
        s, t = rng.uniform(-1, 1, 2)
        assert np.max(np.abs(element_at(spec, s).matrix @ element_at(spec, t).matrix
                             - element_at(spec, s + t).matrix)) < 1e-9
        canon = element_at(spec.canonical(), t).matrix
        assert np.max(np.abs(element_at(spec, t).matrix - spec.A_inv @ canon @ spec.A)) < 1e-10


def test_act_matches_element_at():
    rng = np.random.default_rng(1)
    for family in Family:
        spec = random_spec(family, 6, rng, integer_rates=False)
        X = rng.normal(size=(5, 6))
        t = rng.uniform(-1, 1, 5)
        want = np.stack([element_at(spec, ti) @ x for ti, x in zip(t, X)])
        assert np.max(np.abs(act(spec, t, X) - want)) < 1e-10


def test_project_so_n():
    rng = np.random.default_rng(2)
    Q = random_so(4, rng)
    assert np.max(np.abs(project_so_n(Q) - Q)) < 1e-10
    assert np.allclose(project_so_n(2 * np.eye(3)), np.eye(3))
    P = Q + 1e-6 * rng.normal(size=(4, 4))
    assert np.max(np.abs(project_so_n(P) - Q)) < 1e-5
    R = project_so_n(rng.normal(size=(5, 5)))
    assert abs(np.linalg.det(R) - 1) < 1e-12
    with pytest.raises(ValueError):
        project_so_n(np.zeros((3, 3)))


def test_sample_element():
    rng = np.random.default_rng(3)
    spec = SubgroupSpec(random_so(4, rng), [1.0, 2.3])
    assert np.allclose(sample_element(spec, rng, (0.0, 0.0)).matrix, np.eye(4))
    x = rng.normal(size=4)
    diffs = [np.linalg.norm(sample_element(spec, rng) @ x) - np.linalg.norm(x) for _ in range(1000)]
    assert abs(np.mean(diffs)) < 1e-10
    ts = [sample_element(spec, rng).t for _ in range(200)]
    assert 0 <= min(ts) and max(ts) < 2 * np.pi


def test_hyperbolic_preserves_pseudo_norm():
    rng = np.random.default_rng(4)
    spec = random_spec(Family.HYPERBOLIC, 4, rng)
    X = rng.normal(size=(10, 4))
    V0, V1 = X @ spec.A.T, act(spec, 0.8, X) @ spec.A.T
    q = lambda V: V[:, 0] ** 2 - V[:, 1] ** 2
    assert np.allclose(q(V0), q(V1))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5), st.floats(-5, 5))
def test_elliptic_homomorphism_property(seed, s, t):
    rng = np.random.default_rng(seed)
    spec = random_spec(Family.ELLIPTIC, int(rng.integers(2, 8)), rng, integer_rates=False)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        g = element_at(spec, s).matrix @ element_at(spec, t).matrix
    assert np.max(np.abs(g - element_at(spec, s + t).matrix)) < 1e-9
