"""``hgamma run | verify | export-dataset``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import model as M
from . import suites
from .linalg import Family
from .metrics import (
    CSV_COLUMNS,
    RunReport,
    block_condition_check,
    cosine_distance,
    generator_of,
    invariance_error,
    rotate_output,
    summarize,
)
from .tasks import TaskName, export_dataset, generate, make_task

log = logging.getLogger("hgamma")

EXIT_VERIFY_FAILED = 1
EXIT_BAD_CONFIG = 2
EXIT_DIVERGED = 3

DEFAULT_MODE = {TaskName.P3: M.Mode.SO3_CANONICAL}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    task: TaskName = TaskName.Q4
    n: int | None = None
    mode: M.Mode | None = None
    epochs: int = 100
    lr: float = 1e-3
    batch_size: int = 16
    hidden_width: int = 64
    seeds: list = field(default_factory=lambda: [0])
    noise_sigma: float = 0.0
    num_samples: int = 5120
    t_range: tuple | None = None
    output_dir: Path = Path("runs")
    points: int = 1

    def __post_init__(self):
        try:
            self.task = TaskName(self.task)
            self.mode = M.Mode(self.mode) if self.mode is not None else DEFAULT_MODE.get(self.task, M.Mode.SON_INVREP)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        self.output_dir = Path(self.output_dir)
        if self.epochs < 1 or self.batch_size < 1 or self.hidden_width < 1 or self.num_samples < 2:
            raise ConfigError("epochs, batch, hidden must be >= 1 and samples >= 2")
        if not self.lr >= 0 or not self.noise_sigma >= 0:
            raise ConfigError("lr and noise must be non-negative")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.t_range is not None and len(self.t_range) != 2:
            raise ConfigError("t_range needs two values")
        if self.mode is M.Mode.SO3_CANONICAL and self.task is not TaskName.P3:
            raise ConfigError("so3 mode only fits the p3 task")
        if self.mode.family is not Family.ELLIPTIC and self.task is TaskName.P3:
            raise ConfigError("p3 has odd n; SL(n) modes need even n")
        if self.task is TaskName.MOMENT_OF_INERTIA and self.mode is not M.Mode.SON_INVREP:
            raise ConfigError("the inertia task needs the son mode (equivariant head)")
        try:
            spec = make_task(self.task, 0, self.n, num_samples=8, points=self.points)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        self.n = spec.n


# flag / config-file key -> RunConfig field
_KEYS = {
    "task": "task", "n": "n", "mode": "mode", "epochs": "epochs", "lr": "lr", "batch": "batch_size",
    "hidden": "hidden_width", "seeds": "seeds", "noise": "noise_sigma", "samples": "num_samples",
    "t_range": "t_range", "out": "output_dir", "points": "points",
}
_CONVERT = {
    "n": int, "epochs": int, "batch_size": int, "hidden_width": int, "num_samples": int, "points": int,
    "lr": float, "noise_sigma": float,
    "seeds": lambda s: [int(v) for v in str(s).replace(" ", "").split(",") if v],
    "t_range": lambda s: tuple(float(v) for v in str(s).split(",")),
}


def _convert(name, value):
    try:
        return _CONVERT.get(name, lambda v: v)(value)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {value!r}") from None


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in _KEYS:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value' with a known key, got {raw!r}")
        name = _KEYS[key]
        out[name] = _convert(name, value.strip())
    return out


def build_config(args) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for key, name in _KEYS.items():
        v = getattr(args, key, None)
        if v is not None:
            values[name] = _convert(name, v)
    return RunConfig(**values)


def _threads() -> int:
    raw = os.environ.get("HGAMMA_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"HGAMMA_THREADS must be an integer, got {raw!r}") from None


def run_seed(config: RunConfig, seed: int):
    """Generate, train and evaluate one seed. Returns ``(report, model)``."""
    spec = make_task(config.task, seed, config.n, config.num_samples, config.noise_sigma, config.points)
    ds = generate(spec)
    model = M.create_model(spec.n, config.mode, out_dim=ds.Y.shape[1], hidden=config.hidden_width,
                           seed=seed, equivariant=spec.equivariant)
    tc = M.TrainConfig(epochs=config.epochs, lr=config.lr, batch_size=config.batch_size, seed=seed)
    model, hist = M.train(model, ds.X, ds.Y, tc)

    ref = spec.subgroup()
    rng = np.random.default_rng([seed, 0xE7A1])
    action = rotate_output(1.0) if spec.equivariant else None
    inv, _ = invariance_error(M.predictor(model), ref, rng, 1000, config.t_range, action)
    learned = model.subgroup()
    cos = cosine_distance(generator_of(learned), generator_of(ref))
    diag = off = float("nan")
    if np.all(spec.lambda0 == 1) and config.mode.family is Family.ELLIPTIC:
        diag, off, _ = block_condition_check(spec.A0, learned.A)
    report = RunReport(config.task.value, seed, hist.val_loss[-1], inv, cos, model.rates.tolist(),
                       diag, off, len(hist.val_loss), hist.wall_seconds)
    return report, model


def write_reports(config: RunConfig, reports, models) -> None:
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    summary = out / "summary.csv"
    new = not summary.exists()
    with summary.open("a") as fh:
        if new:
            fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in reports:
            fh.write(r.to_csv_row())
    for r, m in zip(reports, models):
        (out / f"{r.task}_{r.seed}.json").write_text(r.to_json())
        M.save_model(m, out / f"{r.task}_{r.seed}.model")


def format_summary(reports) -> str:
    s = summarize(reports)
    lines = [f"{reports[0].task}: {len(reports)} seed(s)"]
    for name in ("val_mse", "invariance_error", "cosine_distance"):
        mean, std = s[name]
        lines.append(f"  {name:17s} {mean:.3e} +- {std:.1e}")
    mean, std = s["lambda"]
    lines.append("  lambda            " + ", ".join(f"{a:.4f}+-{b:.4f}" for a, b in zip(mean, std)))
    return "\n".join(lines)


def run(config: RunConfig) -> list[RunReport]:
    """Train every seed, write ``<task>_<seed>.json`` plus ``summary.csv``, return the reports."""
    workers = min(_threads(), len(config.seeds))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda s: run_seed(config, s), config.seeds))
    reports = [r for r, _ in results]
    write_reports(config, reports, [m for _, m in results])
    return reports


def _diverged(config: RunConfig, err: M.TrainingDiverged) -> Path:
    config.output_dir.mkdir(parents=True, exist_ok=True)
    path = config.output_dir / f"{config.task.value}_diverged.json"
    path.write_text(json.dumps({"task": config.task.value, "epoch": err.epoch,
                                "param_norms": err.param_norms, "message": str(err)}, indent=2))
    return path


def cmd_run(args) -> int:
    config = build_config(args)
    try:
        reports = run(config)
    except M.TrainingDiverged as err:
        path = _diverged(config, err)
        print(f"training diverged: {err}; diagnostics in {path}", file=sys.stderr)
        return EXIT_DIVERGED
    print(format_summary(reports))
    return 0


def cmd_verify(args) -> int:
    families = [args.family] if args.family else None
    results = suites.run_all(seed=args.seed, families=families, quick=args.quick)
    ok = True
    for res in results:
        if res.cases == 0:
            continue
        print(res.summary())
        if not res.passed:
            ok = False
            print("  smallest failing case: " + json.dumps(res.smallest_failure(), default=str))
    return 0 if ok else EXIT_VERIFY_FAILED


def cmd_export(args) -> int:
    config = build_config(args)
    paths = []
    for seed in config.seeds:
        spec = make_task(config.task, seed, config.n, config.num_samples, config.noise_sigma, config.points)
        paths += export_dataset(generate(spec), config.output_dir / f"{config.task.value}_{seed}")
    for p in paths:
        print(p)
    return 0


def _add_run_flags(p):
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--task", choices=[t.value for t in TaskName])
    p.add_argument("--n", type=int)
    p.add_argument("--mode", choices=[m.value for m in M.Mode])
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--seeds", help="comma-separated, e.g. 0,1,2")
    p.add_argument("--noise", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--t-range", dest="t_range", help="lo,hi for invariance sampling")
    p.add_argument("--points", type=int, help="point masses for the inertia task")
    p.add_argument("--out", help="output directory")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hgamma", description="Discover one-parameter subgroups from data.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="train and evaluate")
    _add_run_flags(p_run)
    p_run.set_defaults(func=cmd_run)
    p_ver = sub.add_parser("verify", help="run the property suites")
    p_ver.add_argument("--family", choices=[f.value for f in Family])
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--quick", action="store_true", help="fewer cases per suite")
    p_ver.set_defaults(func=cmd_verify)
    p_exp = sub.add_parser("export-dataset", help="write generated data as CSV + JSON")
    _add_run_flags(p_exp)
    p_exp.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
