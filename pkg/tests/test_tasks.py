import numpy as np
import pytest

from hgamma.linalg import random_so, rot2
from hgamma.tasks import (
    TaskName,
    TaskSpec,
    add_label_noise,
    export_dataset,
    generate,
    inertia_tensor,
    load_dataset,
    make_task,
    symmetry_violation,
    target,
    w_subspace,
)

ALL = [t.value for t in TaskName]


def identity_spec(name, **extra):
    spec = make_task(name)
    spec.A0 = np.eye(spec.n)
    spec.extra.update(extra)
    return spec


def test_p3_examples():
    spec = identity_spec("p3")
    assert np.isclose(target(spec, np.zeros(3))[0, 0], 1.0)
    assert np.isclose(target(spec, [1.0, 0.0, 0.0])[0, 0], np.sin(1) + 1)


def test_w_subspace():
    assert np.array_equal(w_subspace((1, 0)), [1, 0, 0, 1])
    assert np.array_equal(w_subspace((0, 0)), np.zeros(4))
    rng = np.random.default_rng(0)
    for _ in range(50):
        w = w_subspace(rng.normal(size=2))
        S = rng.normal(size=(2, 2))
        S = S + S.T
        R = rot2(rng.uniform(0, 2 * np.pi))
        vec = lambda M: M.T.reshape(4)
        assert abs(w @ vec(R @ S @ R.T) - w @ vec(S)) < 1e-10


def test_qr_examples():
    x = np.array([0.3, 0.7, 0.2, 0.9])
    spec = identity_spec("q4", scalars=np.array([1.0, 0.0]), poly=np.array([[1.0, 0.0], [0.0, 0.0]]),
                         w=np.array([1.0, 0.0, 0.0, 1.0]))
    assert np.isclose(target(spec, x)[0, 0], 0.3**2 + 0.7**2)
    spec.extra["scalars"] = np.zeros(2)
    assert np.all(target(spec, np.random.default_rng(1).uniform(size=(5, 4))) == 0)


def test_u_examples():
    spec = identity_spec("u")
    assert np.allclose(target(spec, [3.0, 4.0, 0.0, 0.0]), [[5.0, 0.0]])
    assert np.all(target(spec, np.zeros(4)) == 0)


def test_aniso_examples():
    spec = identity_spec("aniso", weights=np.ones(2))
    x = np.random.default_rng(2).uniform(size=4)
    assert np.isclose(target(spec, x)[0, 0], x @ x)
    spec.extra["weights"] = np.array([2.0, 0.0])
    assert np.isclose(target(spec, [1.0, 0.0, 5.0, 5.0])[0, 0], 2.0)


def test_pendulum_examples():
    spec = make_task("pendulum")
    assert np.array_equal(spec.A0, np.eye(8)) and spec.lambda0.tolist() == [1, 1, 0, 0]
    x = [np.cos(0.5), np.sin(0.5), np.cos(0.3), np.sin(0.3), 0.3, 0.0, 0.4, 0.0]
    assert np.allclose(target(spec, x), [[0.3, 0.4, 0.2, -0.2]])
    x = [0.6, 0.6, 0.2, 0.2, 0.1, 0.5, 0.7, 0.5]
    assert np.allclose(target(spec, x)[0, 2:], 0.0)


def test_inertia_examples():
    assert np.allclose(inertia_tensor([1.0, 0.0, 0.0, 1.0], 1)[0], np.diag([0.0, 1.0, 1.0]))
    X = np.random.default_rng(3).uniform(size=(1, 12))
    X[0, 3::4] = 0
    assert np.all(inertia_tensor(X, 3) == 0)
    rng = np.random.default_rng(4)
    for _ in range(20):
        P = rng.uniform(size=(3, 4))
        R = random_so(3, rng)
        Q = P.copy()
        Q[:, :3] = P[:, :3] @ R.T
        I, IR = inertia_tensor(P.reshape(1, -1), 3)[0], inertia_tensor(Q.reshape(1, -1), 3)[0]
        assert np.max(np.abs(IR - R @ I @ R.T)) < 1e-10


@pytest.mark.parametrize("name", ALL)
def test_reference_symmetry_holds(name):
    spec = make_task(name, seed=5, num_samples=100)
    assert symmetry_violation(spec, np.random.default_rng(0)) < 1e-9


def test_inertia_matrix_output_is_conjugation_covariant():
    spec = make_task("inertia", points=2, output="matrix")
    assert symmetry_violation(spec, np.random.default_rng(1)) < 1e-9


@pytest.mark.parametrize("name", ALL)
def test_generated_datasets(name):
    spec = make_task(name, seed=2, num_samples=300)
    a, b = generate(spec), generate(spec)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)
    assert len(a) == 300 and a.X.min() >= 0 and a.X.max() <= 1
    assert abs(np.linalg.det(spec.A0) - 1) < 1e-8 and spec.lambda0[0] == 1
    other = generate(make_task(name, seed=3, num_samples=300))
    assert not np.array_equal(a.X, other.X) or not np.array_equal(a.Y, other.Y)


def test_task_dimension_checks():
    with pytest.raises(ValueError):
        make_task("p3", n=4)
    with pytest.raises(ValueError):
        make_task("aniso", n=5)
    with pytest.raises(ValueError):
        make_task("inertia", output="scalar")
    assert make_task("aniso", n=6).n == 6
    assert make_task("r8").n == 8


def test_label_noise():
    ds = generate(make_task("p3", num_samples=10000))
    assert add_label_noise(ds, 0.0, 0) is ds
    noisy = add_label_noise(ds, 0.1, 0)
    assert abs(np.std(noisy.Y - ds.Y) - 0.1) < 0.005
    assert np.array_equal(noisy.Y, add_label_noise(ds, 0.1, 0).Y)
    with pytest.raises(ValueError):
        add_label_noise(ds, -1.0, 0)
    with pytest.raises(ValueError):
        make_task("p3", noise_sigma=-0.1)


def test_spec_checks():
    with pytest.raises(ValueError):
        TaskSpec("p3", 3, np.eye(3), [2.0])


def test_export_round_trip(tmp_path):
    ds = generate(make_task("q4", seed=7, num_samples=50, noise_sigma=0.01))
    csv_path, json_path = export_dataset(ds, tmp_path / "q4")
    assert csv_path.read_text().splitlines()[0] == "x0,x1,x2,x3,y0"
    back = load_dataset(tmp_path / "q4")
    assert np.array_equal(back.X, ds.X) and np.array_equal(back.Y, ds.Y)
    assert np.array_equal(back.spec.A0, ds.spec.A0)
    assert np.array_equal(back.spec.extra["poly"], ds.spec.extra["poly"])
    assert back.spec.noise_sigma == 0.01
