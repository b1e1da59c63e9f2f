import csv
import io

import numpy as np
import pytest

from ivelab.expcli.cli import main
from ivelab.expcli.experiments import run_fig5, run_shift
from ivelab.expcli.config import parse_config

SMALL = """
seeds = 0,1
epochs = 15
ensemble_size = 3
fig5_n = 3
didactic_steps = 30
probe_points = 21
trials = 4
l_max = 150
"""


def write_config(tmp_path, text=SMALL, name="run.conf"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_csv(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


@pytest.mark.parametrize("command", ["fig3", "fig5", "shift", "didactic", "plan-study"])
def test_commands_are_byte_deterministic(tmp_path, command):
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([command, "--config", str(cfg), "--out", str(a)]) == 0
    assert main([command, "--config", str(cfg), "--out", str(b)]) == 0
    first = snapshot(a)
    assert "manifest.txt" in first
    assert all(name.endswith((".csv", ".pgm", ".txt")) for name in first)
    assert first == snapshot(b)


def test_config_errors_exit_one(tmp_path, capsys):
    assert main(["fig3", "--config", str(tmp_path / "missing.conf")]) == 1
    bad = write_config(tmp_path, "epochs = lots\n", "bad.conf")
    assert main(["fig3", "--config", str(bad)]) == 1
    assert "config error" in capsys.readouterr().err


def test_runtime_failure_exits_two(tmp_path):
    cfg = write_config(tmp_path, SMALL + f"dataset = {tmp_path / 'nope.csv'}\n")
    assert main(["didactic", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_unknown_command_is_usage_error(tmp_path):
    with pytest.raises(SystemExit):
        main(["fig4", "--config", str(write_config(tmp_path))])


def test_seed_offset(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "o"
    assert main(["plan-study", "--config", str(cfg), "--seed-offset", "5", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.glob("*.csv")) == ["plan_study_seed5.csv", "plan_study_seed6.csv"]
    assert "config.seeds = 5,6" in (out / "manifest.txt").read_text()


def test_fig3_outputs_and_schema(tmp_path):
    cfg = write_config(tmp_path, SMALL + "seeds = 0\n")
    out = tmp_path / "o"
    assert main(["fig3", "--config", str(cfg), "--out", str(out)]) == 0
    for panel in ("sigma_ive_1", "sigma_ive_2", "sigma_ive_20", "sigma_eve_3", "sigma_emve_3"):
        rows = read_csv(out / f"fig3_seed0_{panel}.csv")
        assert list(rows[0]) == ["state", "mu", "sigma"] and len(rows) == 25
        assert (out / f"fig3_seed0_{panel}.pgm").read_text().startswith("P2\n5 5\n255\n")
    members = read_csv(out / "fig3_seed0_sigma_ive_20_members.csv")
    assert list(members[0]) == ["state", "k", "value"] and len(members) == 25 * 21
    manifest = (out / "manifest.txt").read_text()
    assert "seeds_used = 0" in manifest and "kernel_backend = " in manifest


def test_fig3_true_pair_heatmaps_are_zero(tmp_path):
    cfg = write_config(tmp_path, SMALL + "true_pair = true\nexclude = false\n")
    out = tmp_path / "o"
    assert main(["fig3", "--config", str(cfg), "--out", str(out)]) == 0
    panels = [p for p in out.glob("fig3_seed0_sigma_*.pgm")]
    assert len(panels) == 5
    for path in panels:
        pixels = path.read_text().split()[4:]
        assert set(pixels) == {"0"}, path.name
    for path in out.glob("fig3_seed0_sigma_*[0-9].csv"):
        assert max(float(r["sigma"]) for r in read_csv(path)) <= 1e-10, path.name


def test_fig5_outputs(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "o"
    assert main(["fig5", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "fig5_occupancy.csv")
    assert list(rows[0]) == ["curve", "l", "mean", "stderr"]
    curves = {r["curve"] for r in rows}
    assert {"uniform", "ive_seeking", "ive_averse", "eve_seeking", "eve_averse"} <= curves
    for name in curves:
        ls = [int(r["l"]) for r in rows if r["curve"] == name]
        assert ls == list(range(1, 151))
    # the uniform baseline is seed-independent
    assert all(float(r["stderr"]) == 0.0 for r in rows if r["curve"] == "uniform")
    raw = read_csv(out / "fig5_occupancy_runs.csv")
    assert list(raw[0]) == ["curve", "seed_index", "l", "probability"]
    assert "greedy baseline omitted" in (out / "manifest.txt").read_text()


def test_shift_outputs_and_degenerate_shift(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "o"
    assert main(["shift", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "shift_occupancy.csv")
    assert list(rows[0]) == ["curve", "wind_prob", "l", "mean", "stderr"]
    assert {r["wind_prob"] for r in rows} == {"0.1", "0.5"}
    manifest = (out / "manifest.txt").read_text()
    assert "wind_train = 0.1" in manifest and "wind_eval = 0.5" in manifest

    same = parse_config(SMALL + "wind_eval = 0.1\n", experiment="shift")
    shift = run_shift(same)
    fig5 = run_fig5(parse_config(SMALL, experiment="fig5"))
    assert set(shift.curves) == {"uniform@0.1", "ive_averse@0.1", "eve_averse@0.1", "emve_averse@0.1"}
    for name in ("ive_averse", "eve_averse", "uniform"):
        assert np.array_equal(shift.curves[f"{name}@0.1"], fig5.curves[name])


def test_didactic_outputs(tmp_path):
    cfg = write_config(tmp_path, SMALL + "seeds = 0\n")
    out = tmp_path / "o"
    assert main(["didactic", "--config", str(cfg), "--out", str(out)]) == 0
    before = read_csv(out / "didactic_seed0_before_summary.csv")
    assert list(before[0]) == ["s", "mu", "sigma"] and len(before) == 21
    assert max(float(r["sigma"]) for r in before) > 0
    members = read_csv(out / "didactic_seed0_after_members.csv")
    assert list(members[0]) == ["s", "k", "value"] and len(members) == 21 * 11
    data = read_csv(out / "didactic_seed0_dataset.csv")
    assert list(data[0]) == ["s", "target"] and len(data) == 10
    assert "seed0.dataset_source = default" in (out / "manifest.txt").read_text()


def test_didactic_custom_dataset(tmp_path):
    data = tmp_path / "data.csv"
    data.write_text("s,target\n-1.0,0.5\n0.0,0.0\n1.0,-0.5\n")
    cfg = write_config(tmp_path, SMALL + f"seeds = 0\ndataset = {data}\n")
    out = tmp_path / "o"
    assert main(["didactic", "--config", str(cfg), "--out", str(out)]) == 0
    assert len(read_csv(out / "didactic_seed0_dataset.csv")) == 3


def test_plan_study_outputs(tmp_path):
    cfg = write_config(tmp_path, SMALL + "perturbation_scale = 0.0\n")
    out = tmp_path / "o"
    assert main(["plan-study", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "plan_study_seed0.csv")
    assert list(rows[0]) == ["trial", "estimator", "mean_abs_err", "median_abs_err"]
    assert all(float(r["mean_abs_err"]) <= 1e-9 for r in rows)
    manifest = (out / "manifest.txt").read_text()
    assert "seed0.convexity_all_trials = true" in manifest
    assert "seed0.mu_ive_median_le_k1" in manifest
