"""The invariant network: learned orientation and rates, canonical features, MLP.

``A = expm(skew(theta))`` keeps the orientation in SO(n) at every step;
rates are ``[1, exp(log_rates)...]`` so the first rate is pinned to 1 and
the others stay positive. Predictions are ``phi(canonical features of x)``,
which makes the network exactly invariant under its own current subgroup
(up to the rate-ratio caveat documented in :mod:`hgamma.invrep`).
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .groups import SubgroupSpec
from .invrep import EPS
from .linalg import HYPERBOLIC_GUARD, Family, SkewParams, skew_from_params

log = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    SO3_CANONICAL = "so3"
    SON_INVREP = "son"
    SLN_ELLIPTIC = "sln-elliptic"
    SLN_HYPERBOLIC = "sln-hyperbolic"
    SLN_PARABOLIC = "sln-parabolic"

    @property
    def family(self) -> Family:
        return {
            Mode.SLN_HYPERBOLIC: Family.HYPERBOLIC,
            Mode.SLN_PARABOLIC: Family.PARABOLIC,
        }.get(self, Family.ELLIPTIC)


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, param_norms: list[float]):
        self.epoch = epoch
        self.param_norms = param_norms
        super().__init__(f"non-finite loss at epoch {epoch}; parameter norms {param_norms}")


@dataclass
class HGammaModel:
    n: int
    mode: Mode
    theta: np.ndarray
    log_rates: np.ndarray
    mlp: nn.MlpParams
    equivariant: bool = False
    eps: float = EPS

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.theta = np.asarray(self.theta, dtype=float)
        self.log_rates = np.asarray(self.log_rates, dtype=float)
        if self.mode is Mode.SO3_CANONICAL and self.n != 3:
            raise ValueError("so3 mode needs n == 3")
        if self.mode.family is not Family.ELLIPTIC and self.n % 2:
            raise ValueError(f"{self.mode.value} mode needs even n")
        if self.theta.shape != (self.n * (self.n - 1) // 2,):
            raise ValueError("theta does not match n")
        if self.log_rates.shape != (max(self.n // 2 - 1, 0),):
            raise ValueError("log_rates must have n//2 - 1 entries")
        if self.mlp.layer_dims[0] != self.feature_dim:
            raise ValueError(f"MLP input width must be {self.feature_dim}")
        if self.equivariant:
            if self.mode.family is not Family.ELLIPTIC or self.mode is Mode.SO3_CANONICAL:
                raise NotImplementedError("the equivariant head needs an elliptic invRep mode")
            if self.mlp.layer_dims[-1] != 2:
                raise NotImplementedError("the equivariant head rotates a 2-dimensional output")

    @property
    def feature_dim(self) -> int:
        return 2 if self.mode is Mode.SO3_CANONICAL else self.n

    @property
    def A(self) -> np.ndarray:
        return nn.expm(skew_from_params(SkewParams(self.n, self.theta))).value

    @property
    def rates(self) -> np.ndarray:
        return np.concatenate([[1.0], np.exp(self.log_rates)])

    def subgroup(self) -> SubgroupSpec:
        return SubgroupSpec(self.A, self.rates, self.mode.family)

    def params(self) -> list[np.ndarray]:
        return [self.theta, self.log_rates, *self.mlp.arrays()]

    def with_params(self, arrays) -> "HGammaModel":
        return replace(
            self,
            theta=np.asarray(arrays[0]),
            log_rates=np.asarray(arrays[1]),
            mlp=nn.MlpParams.from_arrays(self.mlp.layer_dims, arrays[2:]),
        )


def create_model(
    n: int,
    mode: Mode = Mode.SON_INVREP,
    out_dim: int = 1,
    hidden: int = 64,
    depth: int = 4,
    seed: int = 0,
    skew_scale: float = 1e-2,
    equivariant: bool = False,
) -> HGammaModel:
    """Fresh model: ``A`` near identity, all rates 1, ``depth`` affine layers."""
    mode = Mode(mode)
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-skew_scale, skew_scale, size=n * (n - 1) // 2)
    feat = 2 if mode is Mode.SO3_CANONICAL else n
    dims = [feat] + [hidden] * (depth - 1) + [out_dim]
    return HGammaModel(
        n, mode, theta, np.zeros(max(n // 2 - 1, 0)), nn.MlpParams.init(dims, rng), equivariant
    )


# --- differentiable canonical features ---------------------------------------


def _interleave(w1, w2, V, m, n):
    B = V.shape[0]
    rep = nn.stack([w1, w2], axis=2).reshape(B, 2 * m)
    if n % 2:
        rep = nn.concat([rep, V[:, 2 * m :]], axis=1)
    return rep


def _elliptic_features(V, rates, eps):
    B, n = V.shape
    m = n // 2
    v1, v2 = V[:, 0 : 2 * m : 2], V[:, 1 : 2 * m : 2]
    r = nn.sqrt(nn.square(v1) + nn.square(v2))
    eligible = (r.value > eps) & (rates.value[None, :] != 0)
    found = eligible.any(axis=1)
    onehot = np.zeros((B, m))
    onehot[np.arange(B), np.argmax(eligible, axis=1)] = 1.0
    theta_p = (nn.atan2(v2, v1) * onehot).sum(axis=1) * found
    rate_p = (rates * onehot).sum(axis=1)
    t0 = theta_p / rate_p
    ang = -(nn.reshape(t0, (B, 1)) * rates)
    c, s = nn.cos(ang), nn.sin(ang)
    apply = (onehot > 0) & found[:, None]
    w1 = nn.where(apply, r, c * v1 - s * v2)
    w2 = nn.where(apply, 0.0, s * v1 + c * v2)
    return _interleave(w1, w2, V, m, n), t0


def _hyperbolic_features(V, rates, eps):
    B, n = V.shape
    m = n // 2
    v1, v2 = V[:, 0 : 2 * m : 2], V[:, 1 : 2 * m : 2]
    a, b = v1.value[:, 0], v2.value[:, 0]
    ok = (np.abs(a) > np.abs(b)) & ~((np.abs(a) <= eps) & (np.abs(b) <= eps))
    safe_a = nn.where(ok, v1[:, 0], 1.0)
    u = nn.where(ok, v2[:, 0], 0.0) / safe_a
    t0 = nn.artanh(u) / rates[0]
    ang_v = -t0.value[:, None] * rates.value[None, :]
    ok &= np.all(np.abs(ang_v) <= HYPERBOLIC_GUARD, axis=1)
    t0 = nn.where(ok, t0, 0.0)
    ang = -(nn.reshape(t0, (B, 1)) * rates)
    ch, sh = nn.cosh(ang), nn.sinh(ang)
    pivot = np.zeros((B, m), dtype=bool)
    pivot[:, 0] = ok
    norm = nn.sqrt(nn.where(ok, nn.square(v1[:, 0]) - nn.square(v2[:, 0]), 1.0)) * np.sign(a)
    w1 = nn.where(pivot, nn.reshape(norm, (B, 1)), ch * v1 + sh * v2)
    w2 = nn.where(pivot, 0.0, sh * v1 + ch * v2)
    return _interleave(w1, w2, V, m, n), t0


def _parabolic_features(V, rates, eps):
    B, n = V.shape
    m = n // 2
    v1, v2 = V[:, 0 : 2 * m : 2], V[:, 1 : 2 * m : 2]
    ok = np.abs(v2.value[:, 0]) > eps
    t0 = nn.where(ok, v1[:, 0], 0.0) / (nn.where(ok, v2[:, 0], 1.0) * rates[0])
    ang = -(nn.reshape(t0, (B, 1)) * rates)
    pivot = np.zeros((B, m), dtype=bool)
    pivot[:, 0] = ok
    w1 = nn.where(pivot, 0.0, v1 + ang * v2)
    return _interleave(w1, v2, V, m, n), t0


_FEATURES = {
    Family.ELLIPTIC: _elliptic_features,
    Family.HYPERBOLIC: _hyperbolic_features,
    Family.PARABOLIC: _parabolic_features,
}


def forward(model: HGammaModel, X, tape: nn.Tape | None = None):
    """Run the network on a batch.

    With a tape, parameters become leaves and ``(out, leaves)`` is returned
    with ``out`` on the tape; without one, values are computed directly.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n:
        raise ValueError(f"input dimension {X.shape[1]} != model dimension {model.n}")
    arrays = model.params()
    leaves = [tape.leaf(p) for p in arrays] if tape is not None else [nn.Var(p) for p in arrays]
    theta, log_rates, layers = leaves[0], leaves[1], leaves[2:]
    A = nn.expm(nn.skew(theta, model.n))
    V = nn.matmul(X, nn.transpose(A))
    if model.mode is Mode.SO3_CANONICAL:
        feats = nn.stack([nn.square(V[:, 0]) + nn.square(V[:, 1]), V[:, 2]], axis=1)
        out = nn.mlp_forward(layers, feats)
        return out, leaves
    rates = nn.concat([np.ones(1), nn.exp(log_rates)])
    feats, t0 = _FEATURES[model.mode.family](V, rates, model.eps)
    out = nn.mlp_forward(layers, feats)
    if model.equivariant:
        ang = t0 * rates[0]
        c, s = nn.cos(ang), nn.sin(ang)
        out = nn.stack([c * out[:, 0] - s * out[:, 1], s * out[:, 0] + c * out[:, 1]], axis=1)
    return out, leaves


def features(model: HGammaModel, X) -> np.ndarray:
    """Canonical features fed to the MLP (no tape)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    A = model.A
    V = nn.Var(X @ A.T)
    if model.mode is Mode.SO3_CANONICAL:
        return np.stack([V.value[:, 0] ** 2 + V.value[:, 1] ** 2, V.value[:, 2]], axis=1)
    feats, _ = _FEATURES[model.mode.family](V, nn.Var(model.rates), model.eps)
    return feats.value


def predict(model: HGammaModel, X) -> np.ndarray:
    """Invariant prediction ``phi(features(x))``; a single vector in gives a single vector out."""
    single = np.ndim(X) == 1
    m = model if not model.equivariant else replace(model, equivariant=False)
    out = forward(m, X)[0].value
    return out[0] if single else out


def predict_equivariant(model: HGammaModel, X) -> np.ndarray:
    """``rot2(t0 * lambda_1) @ phi(invRep(x))`` with ``t0`` from the input's pivot."""
    if model.mlp.layer_dims[-1] != 2:
        raise NotImplementedError("the equivariant head rotates a 2-dimensional output")
    m = model if model.equivariant else replace(model, equivariant=True)
    single = np.ndim(X) == 1
    out = forward(m, X)[0].value
    return out[0] if single else out


def predictor(model: HGammaModel):
    """Batch callable for metrics."""
    if model.equivariant:
        return lambda X: predict_equivariant(model, X)
    return lambda X: predict(model, X)


def loss_batch(model: HGammaModel, X, Y):
    """Mean squared error and its gradient for every parameter array."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).reshape(X.shape[0], -1)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    tape = nn.Tape()
    out, leaves = forward(model, X, tape)
    loss = nn.square(out - Y).mean()
    if not np.isfinite(loss.value):
        return float(loss.value), [np.full_like(leaf.value, np.nan) for leaf in leaves]
    tape.backward(loss)
    return float(loss.value), [leaf.grad for leaf in leaves]


def mse(model: HGammaModel, X, Y) -> float:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).reshape(X.shape[0], -1)
    return float(np.mean((forward(model, X)[0].value - Y) ** 2))


@dataclass
class TrainConfig:
    epochs: int = 100
    lr: float = 1e-3
    batch_size: int = 16
    seed: int = 0
    val_fraction: float = 0.2
    loss: str = "mse"
    frozen: tuple = ()  # any of "theta", "log_rates", "mlp"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr >= 0:
            raise ValueError("lr must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss != "mse":
            raise ValueError("only the mse loss is supported")
        unknown = set(self.frozen) - {"theta", "log_rates", "mlp"}
        if unknown:
            raise ValueError(f"cannot freeze {sorted(unknown)}")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    train_idx: np.ndarray | None = None
    val_idx: np.ndarray | None = None
    wall_seconds: float = 0.0


def split_indices(num: int, seed: int, val_fraction: float = 0.2):
    """Deterministic shuffled train/validation split."""
    perm = np.random.default_rng([seed, 0x5EED]).permutation(num)
    n_val = int(round(val_fraction * num)) if num > 1 else 0
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def train(model: HGammaModel, X, Y, config: TrainConfig = TrainConfig(), callback=None):
    """Mini-batch Adam on the mean squared error.

    Returns ``(trained_model, history)``. Raises :class:`TrainingDiverged`
    if the loss becomes non-finite.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).reshape(X.shape[0], -1)
    if X.shape[0] == 0:
        raise ValueError("empty dataset")
    start = time.perf_counter()
    hist = TrainHistory()
    tr, va = split_indices(X.shape[0], config.seed, config.val_fraction)
    hist.train_idx, hist.val_idx = tr, va
    rng = np.random.default_rng([config.seed, 0xBA7C])
    state = nn.AdamState(lr=config.lr)
    params = [p.copy() for p in model.params()]
    frozen = {0} if "theta" in config.frozen else set()
    if "log_rates" in config.frozen:
        frozen.add(1)
    if "mlp" in config.frozen:
        frozen.update(range(2, len(params)))
    for epoch in range(config.epochs):
        order = rng.permutation(tr)
        total, count = 0.0, 0
        for k in range(0, len(order), config.batch_size):
            idx = order[k : k + config.batch_size]
            loss, grads = loss_batch(model, X[idx], Y[idx])
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingDiverged(epoch, [float(np.linalg.norm(p)) for p in params])
            params, state = nn.adam_step(state, params, grads, frozen)
            model = model.with_params(params)
            total += loss * len(idx)
            count += len(idx)
        hist.train_loss.append(total / count)
        hist.val_loss.append(mse(model, X[va], Y[va]) if len(va) else float("nan"))
        if callback is not None:
            callback(epoch, model, hist)
        log.debug("epoch %d train %.3e val %.3e", epoch, hist.train_loss[-1], hist.val_loss[-1])
    hist.wall_seconds = time.perf_counter() - start
    return model, hist


# --- snapshot text format ------------------------------------------------------


def _fmt(a) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(a))


def dumps(model: HGammaModel) -> str:
    """Self-describing ``key = value`` snapshot; floats use round-trip repr."""
    lines = [
        "format = hgamma-model/1",
        f"n = {model.n}",
        f"mode = {model.mode.value}",
        f"equivariant = {int(model.equivariant)}",
        f"eps = {model.eps!r}",
        f"layer_dims = {' '.join(map(str, model.mlp.layer_dims))}",
        f"theta = {_fmt(model.theta)}",
        f"log_rates = {_fmt(model.log_rates)}",
    ]
    for k, (W, b) in enumerate(zip(model.mlp.weights, model.mlp.biases)):
        lines.append(f"W{k} = {_fmt(W)}")
        lines.append(f"b{k} = {_fmt(b)}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> HGammaModel:
    kv = {}
    for line in text.splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, _, value = line.partition("=")
        kv[key.strip()] = value.strip()
    if kv.get("format") != "hgamma-model/1":
        raise ValueError("not an hgamma model snapshot")

    def arr(key):
        return np.array([float(v) for v in kv[key].split()])

    dims = [int(v) for v in kv["layer_dims"].split()]
    weights = [arr(f"W{k}").reshape(dims[k + 1], dims[k]) for k in range(len(dims) - 1)]
    biases = [arr(f"b{k}") for k in range(len(dims) - 1)]
    return HGammaModel(
        int(kv["n"]),
        Mode(kv["mode"]),
        arr("theta"),
        arr("log_rates"),
        nn.MlpParams(dims, weights, biases),
        bool(int(kv["equivariant"])),
        float(kv["eps"]),
    )


def save_model(model: HGammaModel, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(model))


def load_model(path) -> HGammaModel:
    with open(path) as fh:
        return loads(fh.read())
