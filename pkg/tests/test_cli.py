import os

import pytest

from locadapt import cli
from locadapt.cli import (EXIT_CONFIG, EXIT_INVARIANT, EXIT_IO, EXIT_OK, ConfigError,
                          InvariantError, main, parse_config)
from locadapt.core import LossKind
from locadapt.net import Mode

SMOKE = ["--mode", "lipschitz", "--depth", "3", "--lipschitz", "1,2,4", "--horizon", "100",
         "--seed", "7", "--loss", "square", "--target", "mostly-flat"]


def test_valid_config():
    cfg = parse_config(["--mode", "lipschitz", "--depth", "3", "--lipschitz", "1,2,4",
                        "--horizon", "1000", "--seed", "7", "--loss", "square",
                        "--target", "mostly-flat", "--out", "run1"])
    assert cfg.mode is Mode.LIPSCHITZ and cfg.depth == 3
    assert cfg.lipschitz == (1.0, 2.0, 4.0) and cfg.loss is LossKind.SQUARE
    assert cfg.horizon == 1000 and cfg.seed == 7 and cfg.out == "run1"


@pytest.mark.parametrize("argv", [
    ["--mode", "loss", "--loss", "square"],
    ["--depth", "3", "--lipschitz", "1,2"],
    ["--mode", "dimension", "--dims", "1,2", "--dim", "2"],
    ["--mode", "dimension"],
    ["--horizon", "0"],
    ["--noise", "-0.1"],
    ["--stream", "manifold:2", "--dim", "2"],
    ["--mode", "sideways"],
    ["--jobs", "0"],
])
def test_rejected_configs(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert not list(tmp_path.iterdir())


def test_diagnostic_is_one_line(capsys):
    assert main(["--depth", "3", "--lipschitz", "1,2"]) == EXIT_CONFIG
    err = capsys.readouterr().err.strip()
    assert err and "\n" not in err


def test_config_file_and_flag_override(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nmode = lipschitz\ndepth = 2\nlipschitz = 1,4\n"
                    "horizon = 50\ncover_constant = 2\nseed = 3\n")
    cfg = parse_config(["--config", str(path), "--seed", "9"])
    assert cfg.depth == 2 and cfg.lipschitz == (1.0, 4.0) and cfg.horizon == 50
    assert cfg.seed == 9


def test_unknown_key_and_unreadable_file(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("depht = 3\n")
    with pytest.raises(ConfigError):
        parse_config(["--config", str(bad)])
    assert main(["--config", str(bad)]) == EXIT_CONFIG
    assert main(["--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    bad.write_text("depth = three\n")
    assert main(["--config", str(bad)]) == EXIT_CONFIG


def test_smoke_run_and_rerun(tmp_path):
    out = str(tmp_path / "run")
    assert main(SMOKE + ["--out", out]) == EXIT_OK
    for suffix in ("rounds.csv", "summary.txt", "tree.txt", "pruning.txt", "regret.dat",
                   "depth.dat"):
        assert os.path.exists(f"{out}.{suffix}")
    with open(f"{out}.rounds.csv", "rb") as fh:
        first = fh.read()
    assert first.count(b"\n") == 101
    assert main(SMOKE + ["--out", out]) == EXIT_OK
    with open(f"{out}.rounds.csv", "rb") as fh:
        assert fh.read() == first
    assert not [p for p in os.listdir(tmp_path) if p.endswith(".tmp")]


def test_summary_reruns_as_config(tmp_path):
    out = str(tmp_path / "a")
    assert main(SMOKE + ["--noise", "0.2", "--out", out]) == EXIT_OK
    again = str(tmp_path / "b")
    assert main(["--config", f"{out}.summary.txt", "--out", again]) == EXIT_OK
    with open(f"{out}.rounds.csv") as a, open(f"{again}.rounds.csv") as b:
        assert a.read() == b.read()
    results = open(f"{out}.summary.txt").read().split("[results]")[1]
    assert "rng = numpy.random.PCG64" in results and "bound_total" in results


def test_baseline_outputs(tmp_path):
    out = str(tmp_path / "cmp")
    assert main(SMOKE + ["--baseline", "--out", out]) == EXIT_OK
    lines = open(f"{out}.compare.csv").read().splitlines()
    assert lines[0] == "t,cum_regret_la,cum_regret_hm" and len(lines) == 101
    assert open(f"{out}.hm.rounds.csv").read().count("\n") == 101


@pytest.mark.parametrize("argv", [
    ["--mode", "dimension", "--dims", "3,2,1", "--dim", "3", "--horizon", "200", "--cover-constant", "0.5"],
    ["--mode", "loss", "--depth", "3", "--horizon", "200", "--tau", "linear"],
    ["--mode", "lipschitz", "--depth", "2", "--lipschitz", "1,4", "--dim", "3",
     "--stream", "manifold:1", "--horizon", "200"],
])
def test_other_modes_run(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path / "m")]) == EXIT_OK


def test_io_failure(tmp_path):
    out = str(tmp_path / "missing-dir" / "run")
    assert main(SMOKE + ["--out", out]) == EXIT_IO


def test_invariant_breach(tmp_path, monkeypatch, capsys):
    def boom(cfg, log):
        raise InvariantError("covering audit failed at round 1, level 1")
    monkeypatch.setattr(cli, "_check_invariants", boom)
    assert main(SMOKE + ["--out", str(tmp_path / "r")]) == EXIT_INVARIANT
    assert "covering audit" in capsys.readouterr().err
    assert not list(tmp_path.iterdir())


def test_jobs_fan_out(tmp_path):
    out = str(tmp_path / "j")
    assert main(SMOKE + ["--seed", "1", "--jobs", "2", "--out", out]) == EXIT_OK
    a, b = open(f"{out}-s1.rounds.csv").read(), open(f"{out}-s2.rounds.csv").read()
    assert a != b
    assert main(SMOKE + ["--seed", "2", "--out", str(tmp_path / "single")]) == EXIT_OK
    assert open(str(tmp_path / "single.rounds.csv")).read() == b
