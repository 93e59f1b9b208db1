import json
import os
import time
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from lrst.cli import main
from lrst.pipelines.lrst_pipeline import LongitudinalRankSumTest
from lrst.pipelines.simulation_pipeline import SimulationPipeline
from lrst.tools.rank_sum.infer import lrst, lrst_last_visit
from lrst.utils.config import parse_simulation_config
from lrst.utils.dataset import DirectionMap, parse_long_csv, write_long_csv
from oracles import random_dataset

SMOKE_CONFIG = """\
[experiment]
kind = type1
name = smoke
seed = 3
n_reps = 1000
alpha = 0.05, 0.1

[design]
n_values = 30, 60
"""


@pytest.fixture
def trial_csv(tmp_path, rng):
    data = random_dataset(rng, n_x=20, n_y=30, n_visits=3, n_outcomes=2)
    return write_long_csv(data, str(tmp_path / "trial.csv"))


def test_test_command_writes_json(trial_csv, tmp_path):
    out = str(tmp_path / "report.json")
    assert main(["-q", "test", "--input", trial_csv, "--out", out]) == 0
    with open(out) as f:
        record = json.load(f)
    expected = lrst(parse_long_csv(trial_csv))
    assert record["z"] == pytest.approx(expected.z)
    assert record["p_value"] == pytest.approx(expected.p_value)
    np.testing.assert_allclose(record["weights"], [1 / 3, 1 / 3, 1 / 3])
    assert record["reject"] == (expected.p_value <= 0.05)
    assert record["input"] == trial_csv


def test_test_command_last_visit(trial_csv, tmp_path):
    out = str(tmp_path / "report.json")
    assert main(["-q", "test", "--input", trial_csv, "--weights", "last-visit", "--two-sided", "--out", out]) == 0
    with open(out) as f:
        record = json.load(f)
    assert record["weights"] == [0.0, 0.0, 1.0]
    assert record["z"] == pytest.approx(lrst_last_visit(parse_long_csv(trial_csv)).z)
    assert "p_value_two_sided" in record


def test_test_command_text_report(trial_csv, tmp_path):
    out = str(tmp_path / "report.txt")
    assert main(["-q", "test", "--input", trial_csv, "--format", "text", "--out", out]) == 0
    with open(out) as f:
        text = f.read()
    assert "Longitudinal rank-sum test" in text
    assert "outcome1" in text


def test_test_command_prints_json(trial_csv, capsys):
    assert main(["-q", "test", "--input", trial_csv, "--direction", "outcome0=-1"]) == 0
    record = json.loads(capsys.readouterr().out)
    expected = lrst(parse_long_csv(trial_csv, direction=DirectionMap.parse("outcome0=-1")))
    assert record["z"] == pytest.approx(expected.z)


def test_incomplete_csv_exit_code(trial_csv):
    with open(trial_csv) as f:
        lines = f.readlines()
    with open(trial_csv, "w") as f:
        f.writelines(lines[:-1])
    assert main(["-q", "test", "--input", trial_csv]) == 4
    assert main(["-q", "test", "--input", trial_csv, "--drop-incomplete"]) == 0


@pytest.mark.parametrize("token", ["NA", ""])
def test_blank_value_exit_code(trial_csv, token):
    with open(trial_csv) as f:
        lines = f.readlines()
    lines[-1] = lines[-1].rstrip("\n").rsplit(",", 1)[0] + f",{token}\n"
    with open(trial_csv, "w") as f:
        f.writelines(lines)
    assert main(["-q", "test", "--input", trial_csv]) == 4
    assert main(["-q", "test", "--input", trial_csv, "--drop-incomplete"]) == 0


def test_ragged_csv_exit_code(trial_csv):
    with open(trial_csv, "a") as f:
        f.write("s99,control,1,outcome0,0.5,extra,fields\n")
    assert main(["-q", "test", "--input", trial_csv]) == 3


def test_empty_csv_exit_code(write_csv):
    assert main(["-q", "test", "--input", write_csv("", "empty.csv")]) == 3


@pytest.mark.parametrize(
    "args, code",
    [
        (["--input", "missing.csv"], 1),
        (["--weights", "1,2"], 11),
        (["--weights", "1,-1,1"], 11),
        (["--direction", "outcome9=-1"], 3),
        (["--alpha", "1.5"], 15),
    ],
)
def test_test_command_errors(trial_csv, args, code):
    argv = ["-q", "test", "--input", trial_csv, *args]
    assert main(argv) == code


def test_pipeline_accepts_path_or_dataset(trial_csv):
    pipeline = LongitudinalRankSumTest(weights=[1, 2, 3])
    from_path = pipeline(trial_csv)
    from_data = pipeline(pipeline.load(trial_csv))
    assert from_path.z == from_data.z
    null = pipeline.permutation(trial_csv, n_perm=100, seed=1)
    assert 0 < null.p_value(from_path.z) <= 1


def test_simulate_smoke_run(write_csv, tmp_path):
    config = write_csv(SMOKE_CONFIG, "smoke.cfg")
    out = str(tmp_path / "results")
    assert main(["-q", "simulate", "--config", config, "--out", out, "--reps", "10", "--threads", "2"]) == 0
    for suffix in ("_rates.csv", "_table.csv", "_resolved.cfg", ".json"):
        assert os.path.exists(os.path.join(out, f"smoke{suffix}"))

    rates = pd.read_csv(os.path.join(out, "smoke_rates.csv"))
    assert len(rates) == 2 * 2 * 2
    assert (rates["n_valid"] + rates["n_degenerate"] == 10).all()
    with open(os.path.join(out, "smoke.json")) as f:
        record = json.load(f)
    assert record["config"]["experiment"]["n_reps"] == "10"
    assert record["seed"] == 3

    # the resolved config alone reproduces every number
    rerun = str(tmp_path / "rerun")
    assert main(["-q", "simulate", "--config", os.path.join(out, "smoke_resolved.cfg"), "--out", rerun]) == 0
    with open(os.path.join(out, "smoke_rates.csv")) as a, open(os.path.join(rerun, "smoke_rates.csv")) as b:
        assert a.read() == b.read()


def test_simulation_pipeline_power_outputs(tmp_path):
    config = replace(parse_simulation_config("power_by_effect.cfg"), multipliers=(0.0, 1.0), rho_values=(0.5,))
    pipeline = SimulationPipeline(config, n_reps=5, seed=1)
    frame = pipeline(str(tmp_path))
    assert set(frame["multiplier"]) == {0.0, 1.0}
    plot = pd.read_csv(os.path.join(tmp_path, "power_by_effect_plot.csv"))
    assert list(plot.columns) == ["x", "rho_outcome", "variant", "power", "x_axis"]
    assert set(plot["x_axis"]) == {"multiplier"}


def test_bad_config_exit_code(write_csv):
    config = write_csv("[experiment]\nkind = nothing\n", "bad.cfg")
    assert main(["-q", "simulate", "--config", config]) == 15


def test_simulate_without_out_prints_resolved_config(write_csv, capsys):
    config = write_csv(SMOKE_CONFIG, "smoke.cfg")
    assert main(["-q", "simulate", "--config", config, "--reps", "5"]) == 0
    out = capsys.readouterr().out
    assert "seed 3" in out
    assert "[model]" in out
    assert "residual_sd = 0.8" in out
    assert "n_reps = 5" in out


def test_bundled_smoke_run_is_fast(tmp_path):
    start = time.perf_counter()
    assert main(["-q", "simulate", "--config", "type1_error.cfg", "--out", str(tmp_path), "--reps", "10"]) == 0
    assert time.perf_counter() - start < 5.0
    assert os.path.exists(os.path.join(tmp_path, "type1_error_rates.csv"))


def test_simulation_pipeline_several_alphas(tmp_path):
    config = replace(
        parse_simulation_config("power_by_effect.cfg"), multipliers=(0.0, 1.0), rho_values=(0.5,), alphas=(0.05, 0.1)
    )
    frame = SimulationPipeline(config, n_reps=5, seed=1)(str(tmp_path))
    assert set(frame["alpha"]) == {0.05, 0.1}
    plot = pd.read_csv(os.path.join(tmp_path, "power_by_effect_plot.csv"))
    assert list(plot.columns) == ["x", "rho_outcome", "variant", "power", "alpha", "x_axis"]
    assert len(plot) == 2 * 2 * 2
