import csv
from pathlib import Path
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from lamfam.bench import cli
from lamfam.bench.config import ConfigError, ExperimentConfig, load_configs, parse_nu
from lamfam.bench.fig1 import curves
from lamfam.bench.runner import RunRecord, quartiles, read_records, run_config, run_replicate
from lamfam.bench.table import build_table, collect, final_medians, render
from lamfam.bench.validate import validate


def write(path, obj):
    path.write_text(json.dumps(obj))
    return path


def test_parse_nu():
    assert parse_nu("inf") == math.inf
    assert parse_nu(3) == 3.0
    with pytest.raises(ConfigError):
        parse_nu(-1)


@pytest.mark.parametrize("raw", [
    {"scenario": "nope"},
    {"scenario": "vi_exact", "d": 0},
    {"scenario": "vi_exact", "kappa": 0.5},
    {"scenario": "vi_exact", "seed": -1},
    {"scenario": "em_mixture", "d": 1},
    {"scenario": "vi_exact", "typo": 1},
])
def test_invalid_configs(tmp_path, raw):
    with pytest.raises(ConfigError):
        load_configs(write(tmp_path / "c.json", raw))


def test_grid_expansion(tmp_path):
    cfgs = load_configs(write(tmp_path / "g.json", {
        "scenario": "vi_exact", "grid": {"setting": [{"d": 5, "kappa": 1000}, {"d": 20, "kappa": 10}],
                                         "nu_family": [1, "inf"]}}))
    assert [(c.d, c.kappa, c.nu_family) for c in cfgs] == [(5, 1000, 1), (5, 1000, math.inf),
                                                            (20, 10, 1), (20, 10, math.inf)]


def test_incompatible_config_check_states_inequality():
    cfg = ExperimentConfig("vi_exact", d=5, nu_target=1, nu_family=10)
    with pytest.raises(ConfigError, match="<= 2"):
        cfg.check()
    ExperimentConfig("mle_online", d=5, nu_target=1, nu_family=10).check()


def test_record_round_trip():
    r = RunRecord(1, 2, 0.1 + 0.2, 0.57, 0)
    assert RunRecord.from_row(dict(zip(("replicate", "iteration", "metric", "acceptance", "wall_ns"), r.row()))) == r


def test_quartiles_are_order_statistics():
    assert quartiles([4.0, 1.0, 3.0, 2.0]) == (1.0, 2.0, 3.0)
    assert quartiles([1.0, math.nan, 2.0, 3.0]) == (1.0, 2.0, 3.0)
    assert all(math.isnan(v) for v in quartiles([math.nan]))


@pytest.mark.parametrize("scenario, extra", [("vi_exact", {}), ("vi_mala", {}), ("vi_scaled_mala", {}),
                                             ("mle_online", {}), ("em_mixture", {"d": 2, "nu_target": 10})])
def test_each_scenario_runs(scenario, extra, tmp_path):
    cfg = ExperimentConfig(scenario, **{"d": 2, "n_iters": 5, "n_replicates": 2, **extra})
    s = run_config(cfg, tmp_path)
    recs = read_records(tmp_path / "records.csv")
    assert len(recs) == 2 * 6
    assert s["status"] == "ok" and len(s["median"]) == 6
    assert all(r.wall_ns == 0 for r in recs)


def test_timing_records_wall_clock():
    res = run_replicate(ExperimentConfig("vi_exact", d=2, n_iters=3), 0, timing=True)
    assert all(r.wall_ns > 0 for r in res.records)


def test_aborted_replicate_is_summarized(tmp_path):
    cfg = ExperimentConfig("vi_scaled_mala", d=2, n_iters=3, n_replicates=2, n_per_iter=1)
    s = run_config(cfg, tmp_path)
    assert [a["reason"] for a in s["aborted"]] == ["non_pd_scale", "non_pd_scale"]


def test_cli_run_is_byte_identical(tmp_path):
    cfg = write(tmp_path / "c.json", {"scenario": "vi_scaled_mala", "d": 3, "n_iters": 10, "n_replicates": 3})
    for name in ("a", "b"):
        assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a/records.csv").read_bytes() == (tmp_path / "b/records.csv").read_bytes()
    assert (tmp_path / "a/summary.json").read_bytes() == (tmp_path / "b/summary.json").read_bytes()


def test_cli_workers_match_serial(tmp_path):
    cfg = write(tmp_path / "c.json", {"scenario": "vi_exact", "d": 2, "n_iters": 5, "n_replicates": 3})
    cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "s")])
    cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "p"), "--workers", "2"])
    assert (tmp_path / "s/records.csv").read_bytes() == (tmp_path / "p/records.csv").read_bytes()


def test_cli_seed_override_changes_output(tmp_path):
    cfg = write(tmp_path / "c.json", {"scenario": "vi_exact", "d": 2, "n_iters": 5, "n_replicates": 2})
    cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")])
    cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "9", "--iters", "4"])
    assert len(read_records(tmp_path / "b/records.csv")) == 2 * 5
    assert (tmp_path / "a/records.csv").read_bytes() != (tmp_path / "b/records.csv").read_bytes()


def test_cli_rejects_single_incompatible_config(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", {"scenario": "vi_exact", "d": 5, "nu_target": 1, "nu_family": 10})
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "<= 2" in capsys.readouterr().err


def test_cli_bad_config_file(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2


def test_cli_grid_and_table(tmp_path, capsys):
    cfg = write(tmp_path / "g.json", {"scenario": "vi_exact", "d": 5, "kappa": 1000, "nu_target": 1,
                                      "n_iters": 3, "n_replicates": 2,
                                      "grid": {"nu_family": [1, 3, 10, "inf"]}})
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    err = capsys.readouterr().err
    assert "2 configuration(s) rejected" in err
    rejected = json.loads((tmp_path / "o/vi_exact_d5_k1000_nupi1.0_nu10.0/summary.json").read_text())
    assert rejected["status"] == "rejected"
    assert cli.main(["table", str(tmp_path / "o/**/summary.json")]) == 0
    out = capsys.readouterr().out
    assert out.count("×") == 2
    cells = collect(str(tmp_path / "o/**/summary.json"))
    assert len(final_medians(cells)) == 2
    assert "×" in render(build_table(cells))


def test_cli_table_without_matches(tmp_path):
    assert cli.main(["table", str(tmp_path / "none/*.json")]) == 2


def test_validate_passes_and_detects_perturbation(capsys):
    assert cli.main(["validate"]) == 0
    assert "FAIL" not in capsys.readouterr().out
    assert cli.main(["validate", "--perturb-phi", "1e-3"]) == 1
    out = capsys.readouterr().out
    assert "FAIL  Fenchel-Young" in out


def test_validate_residuals_are_small():
    for r in validate():
        assert r.passed, r.line()


def test_fig1_cli_writes_curves(tmp_path, capsys):
    assert cli.main(["fig1", "--out", str(tmp_path)]) == 0
    for lam in ("-1", "0", "1"):
        with open(tmp_path / f"fig1_lam{lam}.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x", "alpha_0.5", "alpha_1", "alpha_2"]
        assert len(rows) == 802
    zero = np.loadtxt(tmp_path / "fig1_lam0.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(zero[:, 2], np.sqrt(2 / np.pi) * np.exp(-2 * zero[:, 0] ** 2), atol=1e-12)
    assert "not normalizable" in capsys.readouterr().out


def test_fig1_compact_support_is_zero_outside():
    for c in curves():
        if c.lam == 1.0 and c.ok:
            assert c.density(0.8) == 0.0


def test_fig1_config_through_run(tmp_path):
    cfg = write(tmp_path / "f.json", {"scenario": "fig1"})
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    s = json.loads((tmp_path / "o/summary.json").read_text())
    assert len(s["curves"]) == 9


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "lamfam", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "validate" in out.stdout


def test_vi_exact_median_trends_down(tmp_path):
    cfg = str(Path(__file__).resolve().parents[1] / "configs" / "vi_exact_d20.json")
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path)]) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    med = np.array(s["median"])
    assert len(med) == 101 and s["n_replicates"] == 10
    assert np.all(np.array(s["q25"]) <= med) and np.all(med <= np.array(s["q75"]))
    checkpoints = med[[0, 1, 2, 5, 10, 20, 50, 100]]
    assert np.all(np.diff(checkpoints) < 0)
