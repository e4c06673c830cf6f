"""Command line driver: config parsing, subcommands, CSV outputs, errors."""

import csv
import json

import numpy as np
import pytest

from flowcast.cli import ConfigError, load_experiment, main, snap_dt
from flowcast.greedy import SelectionRule

TINY_CFG = """
[problem]
name = burgers
cells = 12
half_width = 5.0

[offline]
train_params = (3.4, 0.2)
train_dts = 0.05
horizon = 0.5
rule = p
tolerance = 1e-12
max_centers = 8
epsilon = 0.3

[cv]
epsilon_min = 0.01
epsilon_max = 1.0
grid_size = 4
folds = 2
seed = 0
max_centers = 8

[newton]
tolerance = 1e-14
max_iterations = 100

[online]
test_params = (3.4, 0.2); (3.2, 0.4)
test_dts = 0.05
horizon = 0.25
repetitions = 1
"""


@pytest.fixture()
def tiny_cfg(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY_CFG)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_snap_dt():
    assert snap_dt(2.0, 0.01) == 0.01
    snapped = snap_dt(2.0, 0.0299)
    assert snapped == 2.0 / 67
    assert abs(2.0 / snapped - round(2.0 / snapped)) < 1e-9
    assert snap_dt(2.0, 5.0) == 2.0  # at most one step


def test_load_experiment_round_trip(tiny_cfg):
    exp = load_experiment(tiny_cfg)
    off = exp.offline
    assert off.problem == "burgers"
    assert off.problem_options == {"cells": 12, "half_width": 5.0}
    assert off.cases == (((3.4, 0.2), 0.05),)
    assert off.horizon == 0.5
    assert off.rule is SelectionRule.P_GREEDY
    assert off.max_centers == 8
    assert off.epsilon == 0.3
    assert off.cv.grid_size == 4
    assert off.newton.max_iterations == 100
    assert exp.test_params == ((3.4, 0.2), (3.2, 0.4))
    assert exp.test_dts == (0.05,)
    assert exp.test_horizon == 0.25
    assert exp.repetitions == 1
    assert exp.test_cases() == [((3.4, 0.2), 0.05), ((3.2, 0.4), 0.05)]


def test_shipped_presets_load():
    exp1 = load_experiment("experiment1")
    assert exp1.offline.cases == (((3.4, 0.2), 0.01),)
    assert len(exp1.test_params) == 9
    assert exp1.offline.max_centers == 150

    exp2 = load_experiment("experiment2")
    assert len(exp2.offline.cases) == 4
    assert exp2.offline.max_centers == 450

    exp3 = load_experiment("experiment3")
    assert len(exp3.offline.cases) == 3
    cases = exp3.test_cases()
    assert len(cases) == 10
    for _, dt in cases:
        ratio = exp3.test_horizon / dt
        assert abs(ratio - round(ratio)) < 1e-9  # snapped to divide the horizon


def test_load_experiment_errors(tmp_path):
    with pytest.raises(ConfigError, match="neither a file nor a preset"):
        load_experiment("no-such-preset")

    def variant(name, mangle):
        path = tmp_path / f"{name}.cfg"
        path.write_text(mangle(TINY_CFG))
        return str(path)

    bad = variant("unknown-key", lambda s: s.replace("repetitions = 1", "shoes = 2"))
    with pytest.raises(ConfigError, match="unknown keys"):
        load_experiment(bad)

    bad = variant("missing", lambda s: s.replace("train_params = (3.4, 0.2)", ""))
    with pytest.raises(ConfigError, match="missing key 'train_params'"):
        load_experiment(bad)

    bad = variant("params", lambda s: s.replace("(3.4, 0.2)\ntrain_dts", "(3.4, 'a')\ntrain_dts"))
    with pytest.raises(ConfigError, match="not a number"):
        load_experiment(bad)

    bad = variant(
        "both-dts",
        lambda s: s.replace("test_dts = 0.05", "test_dts = 0.05\ntest_dt_logspace = (0.01, 0.1, 3)"),
    )
    with pytest.raises(ConfigError, match="not both"):
        load_experiment(bad)

    bad = variant("reps", lambda s: s.replace("repetitions = 1", "repetitions = 0"))
    with pytest.raises(ConfigError, match="repetitions"):
        load_experiment(bad)

    bad = variant("horizon", lambda s: s.replace("train_dts = 0.05", "train_dts = 0.3"))
    with pytest.raises(ConfigError, match="invalid \\[offline\\]"):
        load_experiment(bad)


def test_cli_offline_online_bench_cv(tiny_cfg, tmp_path, capsys):
    model_path = tmp_path / "model.json"
    assert main(["offline", "--config", tiny_cfg, "--out", str(model_path)]) == 0
    out = capsys.readouterr().out
    assert "selected centers" in out
    assert "fixed" in out  # epsilon came from the config, not CV
    assert model_path.is_file()
    assert not (tmp_path / "model-cv.csv").exists()
    payload = json.loads(model_path.read_text())
    assert payload["format_version"] == 1
    assert payload["provenance"]["rule"] == "p"

    step_csv = tmp_path / "steps.csv"
    code = main([
        "online", "--model", str(model_path), "--mu", "(3.4, 0.2)",
        "--dt", "0.05", "-T", "0.25", "--out", str(step_csv),
    ])
    assert code == 0
    rows = read_csv(step_csv)
    assert rows[0] == ["step", "time", "iterations", "initializer_residual",
                       "final_residual"]
    assert len(rows) == 1 + 5  # header + one row per step

    bench_csv = tmp_path / "bench.csv"
    assert main([
        "bench", "--config", tiny_cfg, "--model", str(model_path),
        "--out", str(bench_csv),
    ]) == 0
    out = capsys.readouterr().out
    assert "Mean" in out and "Min" in out and "Max" in out
    rows = read_csv(bench_csv)
    assert rows[0] == ["mu", "dt", "iter_old", "iter_vkoga", "time_old_s",
                       "time_vkoga_s", "gain_iter_pct", "gain_time_pct"]
    assert len(rows) == 3  # header + two cases

    cv_csv = tmp_path / "cv.csv"
    assert main(["cv", "--config", tiny_cfg, "--out", str(cv_csv)]) == 0
    rows = read_csv(cv_csv)
    assert rows[0] == ["epsilon", "score"]
    assert len(rows) == 1 + 4  # header + grid_size


def test_cli_offline_with_cv_writes_curve(tiny_cfg, tmp_path, capsys):
    model_path = tmp_path / "model.json"
    cfg_text = TINY_CFG.replace("epsilon = 0.3\n", "")
    cfg = tmp_path / "cv-route.cfg"
    cfg.write_text(cfg_text)
    assert main(["offline", "--config", str(cfg), "--out", str(model_path)]) == 0
    out = capsys.readouterr().out
    assert "(cv)" in out
    assert (tmp_path / "model-cv.csv").is_file()
    payload = json.loads(model_path.read_text())
    assert payload["provenance"]["epsilon_source"] == "cv"
    assert payload["provenance"]["cv"]["grid_size"] == 4


def test_cli_overrides(tiny_cfg, tmp_path):
    model_path = tmp_path / "model.json"
    assert main([
        "offline", "--config", tiny_cfg, "--out", str(model_path),
        "--epsilon", "0.4", "--rule", "f",
    ]) == 0
    payload = json.loads(model_path.read_text())
    assert payload["epsilon"] == 0.4
    assert payload["provenance"]["rule"] == "f"


def test_cli_determinism(tiny_cfg, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["offline", "--config", tiny_cfg, "--out", str(a)]) == 0
    assert main(["offline", "--config", tiny_cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()

    model_path = a
    csv_a, csv_b = tmp_path / "ba.csv", tmp_path / "bb.csv"
    for out in (csv_a, csv_b):
        assert main([
            "bench", "--config", tiny_cfg, "--model", str(model_path),
            "--out", str(out),
        ]) == 0
    timing_columns = {"time_old_s", "time_vkoga_s", "gain_time_pct"}
    rows_a, rows_b = read_csv(csv_a), read_csv(csv_b)
    keep = [i for i, name in enumerate(rows_a[0]) if name not in timing_columns]
    trimmed_a = [[row[i] for i in keep] for row in rows_a]
    trimmed_b = [[row[i] for i in keep] for row in rows_b]
    assert trimmed_a == trimmed_b


def test_cli_error_paths(tmp_path, capsys):
    assert main(["offline", "--config", "missing.cfg", "--out", "x.json"]) == 1
    assert "error:" in capsys.readouterr().err

    assert main(["online", "--model", str(tmp_path / "nope.json"), "--mu", "(1, 2)",
                 "--dt", "0.1", "-T", "1.0"]) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_online_bad_mu(tiny_cfg, tmp_path, capsys):
    model_path = tmp_path / "model.json"
    assert main(["offline", "--config", tiny_cfg, "--out", str(model_path)]) == 0
    capsys.readouterr()
    assert main(["online", "--model", str(model_path), "--mu", "(3.4,",
                 "--dt", "0.05", "-T", "0.25"]) == 1
    assert "cannot parse --mu" in capsys.readouterr().err
