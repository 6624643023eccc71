import csv

import pytest
import yaml

from wsndetect import cli
from wsndetect import config as cfgmod
from wsndetect.errors import ConfigError

QUICK = {
    "deployment": {"preset": "hexagon7", "model": "boolean", "grid_resolution": 0.02},
    "rows": [{"rule": "MAX", "c": 1.5, "target": 20}, {"rule": "HALL", "c": 1.0, "target": 20},
             {"rule": "CENTRALIZED", "c": 2.0, "target": 20}],
    "montecarlo": {"runs": 150, "pfi_placements": ["reference"]},
    "seed": 5,
}


def write(tmp_path, data, name="c.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def run(argv):
    return cli.main([str(a) for a in argv])


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_partition_command(tmp_path, capsys):
    cfg = write(tmp_path, QUICK)
    assert run(["partition", "--config", cfg, "--out", tmp_path / "o"]) == 0
    out = capsys.readouterr().out
    assert "N=12" in out
    assert "N_1 = {1,3,4,6}" in out and "N_12 = {3,4,6}" in out
    assert "m_arl=0" in out and "m_pfi=1" in out and "m_bar_pfi=3" in out
    assert len(read_csv(tmp_path / "o" / "partition.csv")) == 12


def test_single_sensor_partition(tmp_path, capsys):
    data = {"deployment": {"sensors": [[0.5, 0.5]], "roi": [[0, 0], [1, 0], [1, 1], [0, 1]],
                           "grid_resolution": 0.05},
            "thresholds": {"MAX": 1.0}}
    assert run(["partition", "--config", write(tmp_path, data), "--out", tmp_path]) == 0
    assert "N=1" in capsys.readouterr().out


def test_coverage_hole_exits_nonzero(tmp_path, capsys):
    data = {"deployment": {"sensors": [[0.0, 0.0]], "roi": [[0, 0], [1, 0], [1, 1], [0, 1]],
                           "r_d": 0.5, "grid_resolution": 0.05},
            "thresholds": {"MAX": 1.0}}
    assert run(["partition", "--config", write(tmp_path, data), "--out", tmp_path]) == 1
    err = capsys.readouterr().err
    assert "coverage violation" in err and "point (" in err


def test_run_writes_tables_and_replays(tmp_path):
    cfg = write(tmp_path, QUICK)
    assert run(["run", "--config", cfg, "--out", tmp_path / "a", "--workers", 1]) == 0
    rows = read_csv(tmp_path / "a" / "table.csv")
    assert [r["rule"] for r in rows] == ["MAX", "HALL", "CENTRALIZED"]
    for r in rows:
        assert float(r["ci_low"]) <= float(r["arl2fa"]) <= float(r["ci_high"])
    curve = read_csv(tmp_path / "a" / "curve.csv")
    assert list(curve[0]) == ["rule", "log10_arl2fa", "sadd"]
    resolved = tmp_path / "a" / "resolved_config.yaml"
    assert run(["run", "--config", resolved, "--out", tmp_path / "b"]) == 0
    for name in ("table.csv", "curve.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_flag_changes_output(tmp_path):
    cfg = write(tmp_path, QUICK)
    run(["curve", "--config", cfg, "--out", tmp_path / "a"])
    run(["curve", "--config", cfg, "--out", tmp_path / "b", "--seed", 99])
    assert (tmp_path / "a" / "curve.csv").read_bytes() != (tmp_path / "b" / "curve.csv").read_bytes()


def test_bounds_lie_below_observed_arl(tmp_path):
    data = dict(QUICK, rows=[{"rule": "MAX", "c": 2.71, "target": 100},
                             {"rule": "HALL", "c": 1.67, "target": 100}],
                montecarlo={"runs": 400, "pfi_placements": ["reference"]})
    cfg = write(tmp_path, data)
    assert run(["bounds", "--config", cfg, "--out", tmp_path]) == 0
    assert run(["run", "--config", cfg, "--out", tmp_path]) == 0
    bounds = {r["rule"]: float(r["arl2fa_bound"]) for r in read_csv(tmp_path / "bounds.csv")}
    observed = {r["rule"]: float(r["arl2fa"]) for r in read_csv(tmp_path / "table.csv")}
    for rule, b in bounds.items():
        assert b <= observed[rule]


def test_trace_dump(tmp_path):
    data = dict(QUICK, trace={"runs": 7, "region": 2})
    assert run(["trace", "--config", write(tmp_path, data), "--out", tmp_path]) == 0
    rows = read_csv(tmp_path / "trace.csv")
    assert len(rows) == 21
    assert set(rows[0]) == {"trial_id", "rule", "c", "tau", "censored_flag", "isolated_region",
                            "false_isolation_flag"}
    assert all(r["false_isolation_flag"] in ("0", "1") for r in rows if r["censored_flag"] == "0")


def test_targets_mode(tmp_path, capsys):
    data = {"deployment": {"preset": "hexagon7", "model": "boolean", "grid_resolution": 0.02},
            "rules": ["MAX", "HALL"], "targets": {"gamma": [100], "alpha": 0.05}}
    assert run(["bounds", "--config", write(tmp_path, data), "--out", tmp_path]) == 0
    rows = read_csv(tmp_path / "bounds.csv")
    assert [r["rule"] for r in rows] == ["MAX", "HALL"]


def test_targets_mode_vacuous_exponent_is_config_error(tmp_path, capsys):
    data = {"deployment": {"preset": "hexagon7", "model": "boolean", "grid_resolution": 0.02},
            "rules": ["ALL"], "targets": {"gamma": [100], "alpha": 0.05}}
    assert run(["bounds", "--config", write(tmp_path, data), "--out", tmp_path]) == 1
    assert "calibrate" in capsys.readouterr().err


@pytest.mark.parametrize("patch,needle", [
    ({"rows": []}, "empty"),
    ({"bogus": 1}, "'bogus'"),
    ({"montecarlo": {"runz": 3}}, "montecarlo.'runz'"),
    ({"montecarlo": {"runs": 10}}, "at least 100"),
    ({"montecarlo": {"rng": "MT19937"}}, "rng"),
    ({"deployment": {"preset": "hexagon7", "model": "nope"}}, "model"),
    ({"deployment": {"preset": "hexagon7", "model": "powerlaw"}}, "r_i or omega0_lower"),
    ({"rows": [{"rule": "MIN", "c": 1.0}]}, "unknown procedure"),
    ({"rows": [{"rule": "MAX", "c": -1.0}]}, "positive"),
])
def test_config_validation(tmp_path, capsys, patch, needle):
    data = dict(QUICK, **patch)
    assert run(["run", "--config", write(tmp_path, data), "--out", tmp_path]) == 1
    assert needle in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert run(["partition", "--config", tmp_path / "none.yaml"]) == 1


def test_presets_load():
    for name in cfgmod.PRESETS:
        cfg = cfgmod.from_mapping({"preset": name})
        assert cfg.rows
    cfg = cfgmod.from_mapping({"preset": "pathloss-table"})
    assert cfg.placement == "influence_boundary"
    part = cfgmod.build(cfg.deployment)
    assert part.ranges.r_i == pytest.approx(1.5)


def test_resolved_config_round_trip(tmp_path):
    cfg = cfgmod.from_mapping({"preset": "boolean-table", "seed": 3})
    cfgmod.dump(cfg, tmp_path / "r.yaml")
    again = cfgmod.load(tmp_path / "r.yaml")
    assert again.resolved() == cfg.resolved()


def test_conflicting_threshold_sources():
    with pytest.raises(ConfigError):
        cfgmod.from_mapping(dict(QUICK, thresholds={"MAX": [1.0]}))


def test_estimation_failure_exit_code(tmp_path, capsys):
    data = dict(QUICK, rows=[{"rule": "ALL", "c": 30.0, "target": 1e9}],
                montecarlo={"runs": 100, "horizon": 3})
    assert run(["curve", "--config", write(tmp_path, data), "--out", tmp_path]) == 2
    assert "estimation failed" in capsys.readouterr().err
