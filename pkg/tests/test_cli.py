import csv
import json

import numpy as np
import pytest

from hgamma import cli, linalg
from hgamma import model as M
from hgamma.metrics import CSV_COLUMNS, RunReport, summarize

FAST = ["--epochs", "2", "--samples", "200", "--hidden", "8"]


def run_cli(capsys, *argv):
    rc = cli.main(list(argv))
    out = capsys.readouterr()
    return rc, out.out, out.err


def read_summary(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    return [RunReport.from_csv_row(r) for r in rows[1:]]


def test_run_three_seeds(tmp_path, capsys):
    rc, out, _ = run_cli(capsys, "run", "--task", "p3", "--seeds", "0,1,2", "--out", str(tmp_path), *FAST)
    assert rc == 0 and "p3: 3 seed(s)" in out and "+-" in out
    reports = read_summary(tmp_path / "summary.csv")
    assert [r.seed for r in reports] == [0, 1, 2]
    for r in reports:
        assert RunReport.from_json((tmp_path / f"p3_{r.seed}.json").read_text()) == r
        assert (tmp_path / f"p3_{r.seed}.model").exists()
        assert r.epochs_run == 2 and len(r.learned_lambda) == 1
    s = summarize(reports)
    vals = np.array([r.val_mse for r in reports])
    assert s["val_mse"] == (vals.mean(), vals.std(ddof=1))
    assert f"{vals.mean():.3e}" in out


def test_summary_appends(tmp_path, capsys):
    for _ in range(2):
        run_cli(capsys, "run", "--task", "u", "--out", str(tmp_path), *FAST)
    assert len(read_summary(tmp_path / "summary.csv")) == 2


def test_reruns_are_bit_identical(tmp_path):
    cfg = cli.RunConfig(task="q4", epochs=2, num_samples=200, hidden_width=8, seeds=[4])
    a, ma = cli.run_seed(cfg, 4)
    b, mb = cli.run_seed(cfg, 4)
    a.wall_seconds = b.wall_seconds = 0.0
    assert a == b
    assert all(np.array_equal(x, y) for x, y in zip(ma.params(), mb.params()))


def test_threads_match_serial(tmp_path, monkeypatch):
    cfg = cli.RunConfig(task="u", epochs=1, num_samples=100, hidden_width=8, seeds=[0, 1],
                        output_dir=tmp_path / "a")
    serial = cli.run(cfg)
    monkeypatch.setenv("HGAMMA_THREADS", "2")
    cfg.output_dir = tmp_path / "b"
    threaded = cli.run(cfg)
    for r in serial + threaded:
        r.wall_seconds = 0.0
    assert serial == threaded
    monkeypatch.setenv("HGAMMA_THREADS", "many")
    with pytest.raises(cli.ConfigError):
        cli.run(cfg)


@pytest.mark.parametrize("argv", [
    ["--task", "p3", "--batch", "0"],
    ["--task", "q4", "--mode", "so3"],
    ["--task", "p3", "--mode", "sln-hyperbolic"],
    ["--task", "p3", "--n", "4"],
    ["--task", "inertia", "--mode", "sln-parabolic"],
    ["--task", "u", "--noise", "-1"],
    ["--task", "u", "--seeds", ""],
    ["--task", "u", "--seeds", "a,b"],
])
def test_bad_config_exit_2(tmp_path, capsys, argv):
    rc, _, err = run_cli(capsys, "run", "--out", str(tmp_path), *argv)
    assert rc == cli.EXIT_BAD_CONFIG and "invalid configuration" in err


def test_config_file_and_flag_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# demo\ntask = q4\nepochs = 7\nbatch = 32  # inline comment\nseeds = 1, 2\n")
    args = cli.make_parser().parse_args(["run", "--config", str(path), "--epochs", "3"])
    cfg = cli.build_config(args)
    assert (cfg.task.value, cfg.epochs, cfg.batch_size, cfg.seeds) == ("q4", 3, 32, [1, 2])
    assert cfg.mode is M.Mode.SON_INVREP and cfg.n == 4
    path.write_text("colour = blue\n")
    with pytest.raises(cli.ConfigError):
        cli.read_config_file(path)
    with pytest.raises(cli.ConfigError):
        cli.read_config_file(tmp_path / "missing.cfg")


def test_p3_defaults_to_so3():
    assert cli.RunConfig(task="p3").mode is M.Mode.SO3_CANONICAL
    assert cli.RunConfig(task="p3", mode="son").mode is M.Mode.SON_INVREP


def test_divergence_exit_3(tmp_path, capsys, monkeypatch):
    def boom(*a, **k):
        raise M.TrainingDiverged(5, [1.0, float("nan")])

    monkeypatch.setattr(M, "train", boom)
    rc, _, err = run_cli(capsys, "run", "--task", "u", "--out", str(tmp_path), *FAST)
    assert rc == cli.EXIT_DIVERGED and "diverged" in err
    diag = json.loads((tmp_path / "u_diverged.json").read_text())
    assert diag["epoch"] == 5 and len(diag["param_norms"]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_real_nan_divergence(tmp_path, capsys):
    rc, _, _ = run_cli(capsys, "run", "--task", "u", "--lr", "1e300", "--out", str(tmp_path), *FAST)
    assert rc == cli.EXIT_DIVERGED and (tmp_path / "u_diverged.json").exists()


def test_verify_quick_passes(capsys):
    rc, out, _ = run_cli(capsys, "verify", "--quick")
    assert rc == 0 and out.count("PASS") == 4


def test_verify_family_filter(capsys):
    rc, out, _ = run_cli(capsys, "verify", "--quick", "--family", "hyperbolic")
    assert rc == 0 and "orbit" in out


def test_verify_catches_rot2_sign_bug(capsys, monkeypatch):
    monkeypatch.setattr(linalg, "rot2", lambda t: np.array([[np.cos(t), np.sin(t)], [-np.sin(t), np.cos(t)]]))
    rc, out, _ = run_cli(capsys, "verify", "--quick", "--family", "elliptic")
    assert rc == cli.EXIT_VERIFY_FAILED
    assert "FAIL orbit" in out and "smallest failing case" in out


def test_export_dataset(tmp_path, capsys):
    rc, out, _ = run_cli(capsys, "export-dataset", "--task", "aniso", "--n", "6", "--samples", "30",
                         "--seeds", "0,1", "--out", str(tmp_path))
    assert rc == 0 and len(out.split()) == 4
    header = (tmp_path / "aniso_1.csv").read_text().splitlines()[0]
    assert header == "x0,x1,x2,x3,x4,x5,y0"
    assert json.loads((tmp_path / "aniso_1.json").read_text())["seed"] == 1
