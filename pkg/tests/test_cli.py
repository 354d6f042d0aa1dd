import csv
import json

import pytest

from cqg import cli
from cqg.errors import ConfigError

SMALL = {
    "fluxes": {"theta_a_deg": [0, 40], "theta_b_deg": [90, 130]},
    "bell-scan": {},
    "chsh": {"samples": 20000},
    "nosignal": {"points": 2, "theta_a_deg": [30]},
    "curvature": {"points": 4, "a": [1.0]},
    "gauge-check": {"trials": 2},
    "residuals": {"points": 3},
    "mc": {"samples": 20000, "theta_a_deg": [0], "theta_b_deg": [60]},
}


def write_config(tmp_path, name, data):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(data))
    return path


def run_cli(tmp_path, command, out="out", extra=(), **overrides):
    data = dict(SMALL[command], **overrides)
    cfg = write_config(tmp_path, command, data)
    return cli.main([command, "--config", str(cfg), "--out", str(tmp_path / out), *extra])


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("command", cli.COMMANDS)
def test_every_command_passes_and_writes_outputs(tmp_path, command):
    assert run_cli(tmp_path, command) == 0
    out = tmp_path / "out"
    doc = json.loads((out / f"{command}.json").read_text())
    assert doc["schema_version"] == cli.SCHEMA_VERSION
    assert doc["passed"] is True and doc["checks"]
    assert doc["inputs"]["command"] == command
    raw = (out / f"{command}.csv").read_bytes()
    assert b"\r\n" not in raw and raw.endswith(b"\n")
    assert len(read_rows(out / f"{command}.csv")) >= 1


@pytest.mark.parametrize("command", cli.COMMANDS)
def test_rerun_is_byte_identical(tmp_path, command):
    run_cli(tmp_path, command, out="a")
    run_cli(tmp_path, command, out="b")
    for suffix in ("csv", "json"):
        a = (tmp_path / "a" / f"{command}.{suffix}").read_bytes()
        b = (tmp_path / "b" / f"{command}.{suffix}").read_bytes()
        if suffix == "json":
            # the output path is echoed in the inputs, everything else must match
            a, b = json.loads(a), json.loads(b)
            a["inputs"].pop("out"), b["inputs"].pop("out")
        assert a == b


def test_fluxes_quarter_turn_row(tmp_path):
    assert run_cli(tmp_path, "fluxes", theta_a_deg=[0], theta_b_deg=[90]) == 0
    (row,) = read_rows(tmp_path / "out" / "fluxes.csv")
    assert abs(float(row["phi_uu"]) - 0.25) <= 1e-12


def test_floats_have_seventeen_digits(tmp_path):
    run_cli(tmp_path, "fluxes", theta_a_deg=[0], theta_b_deg=[50])
    (row,) = read_rows(tmp_path / "out" / "fluxes.csv")
    assert float(row["phi_uu"]) == float(repr(float(row["phi_uu"])))
    assert len(row["phi_uu"].replace("0.", "").lstrip("0").replace("e-", "")) >= 15


def test_bell_scan_rows_violated(tmp_path):
    assert run_cli(tmp_path, "bell-scan", delta_deg=[5 * k for k in range(1, 9)]) == 0
    rows = read_rows(tmp_path / "out" / "bell-scan.csv")
    assert len(rows) == 8
    assert all(r["violated"] == "true" for r in rows)
    assert all(float(r["F"]) > 2 for r in rows)


def test_mc_seed_42_twice_identical_csv(tmp_path):
    run_cli(tmp_path, "mc", out="a", extra=["--seed", "42"])
    run_cli(tmp_path, "mc", out="b", extra=["--seed", "42"])
    assert (tmp_path / "a" / "mc.csv").read_bytes() == (tmp_path / "b" / "mc.csv").read_bytes()


def test_mc_independent_of_worker_count(tmp_path, monkeypatch):
    monkeypatch.setenv("CQG_THREADS", "4")
    run_cli(tmp_path, "mc", out="one", streams=1)
    run_cli(tmp_path, "mc", out="four", streams=4)
    assert (tmp_path / "one" / "mc.csv").read_bytes() == (tmp_path / "four" / "mc.csv").read_bytes()


def test_flags_override_config(tmp_path):
    run_cli(tmp_path, "mc", extra=["--seed", "7", "--samples", "5000", "--format", "json"], seed=1)
    doc = json.loads((tmp_path / "out" / "mc.json").read_text())
    assert doc["inputs"]["seed"] == 7 and doc["inputs"]["samples"] == 5000
    assert "rows" in doc and not (tmp_path / "out" / "mc.csv").exists()


def test_unknown_key_exits_2(tmp_path, capsys):
    assert run_cli(tmp_path, "fluxes", colour="blue") == 2
    assert "colour" in capsys.readouterr().err


def test_config_command_mismatch_exits_2(tmp_path):
    cfg = write_config(tmp_path, "x", {"command": "chsh"})
    assert cli.main(["fluxes", "--config", str(cfg), "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize(
    "bad",
    [
        {"a": [0.0]},
        {"nodes": {"alpha": 8, "beta": 8}},
        {"chsh_deg": [0, 90]},
        {"samples": 0},
        {"seed": -1},
        {"format": "xml"},
        {"theta_a_deg": []},
    ],
)
def test_invalid_values_rejected(bad):
    with pytest.raises(ConfigError):
        cli.RunConfig.from_mapping(dict({"command": "fluxes"}, **bad))


def test_unreadable_config_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["fluxes", "--config", str(bad)]) == 2


def test_failed_check_exits_1(tmp_path):
    # two nodes per angle cannot integrate the quadratic integrands: numerical failure
    assert run_cli(tmp_path, "fluxes", nodes={"alpha": 2, "beta": 2, "gamma": 2}) == 1


def test_curvature_reports_constant_factors(tmp_path):
    assert run_cli(tmp_path, "curvature") == 0
    notes = json.loads((tmp_path / "out" / "curvature.json").read_text())["notes"]
    assert notes["singlet_fitted_factor"] == pytest.approx(-1.0, abs=1e-4)
    assert notes["product_fitted_factor"] == pytest.approx(22 / 25, abs=1e-4)
