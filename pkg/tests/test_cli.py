from __future__ import annotations

import json

import numpy as np
import pytest

from nlvc.cli import main
from nlvc.config import DEFAULT_H, DEFAULT_SEED, DEFAULT_TOL, ConfigError, parse_config
from nlvc.fields import Field, FieldFormatError, read_field, write_csv, write_field
from nlvc.lattice import Torus

KERNEL2 = {"family": "CompactIntegrable", "d": 2, "delta": 0.25}
KERNEL1 = {"family": "CompactIntegrable", "d": 1, "delta": 0.25}


def _write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


# ---------------------------------------------------------------------------
# configuration


def test_minimal_config_defaults():
    cfg = parse_config({"command": "poincare", "kernel": KERNEL2})
    assert cfg.h == DEFAULT_H == 1 / 16
    assert cfg.tol == DEFAULT_TOL == 1e-10
    assert cfg.seed == DEFAULT_SEED == 0xA11CE
    assert cfg.box_lo == [0.0, 0.0] and cfg.box_hi == [1.0, 1.0]
    assert cfg.direction == [1.0, 0.0]
    assert cfg.params["dense_check"] is None


def test_fractional_alpha_above_one_rejected():
    with pytest.raises(ConfigError, match="alpha"):
        parse_config({"command": "symbol", "kernel": {"family": "FractionalTail", "d": 1, "alpha": 1.5}})


def test_negative_tolerance_rejected():
    with pytest.raises(ConfigError, match="tolerance"):
        parse_config({"command": "verify", "kernel": KERNEL2, "tol": -1e-8})


@pytest.mark.parametrize("data, match", [
    ({"command": "verify", "kernel": KERNEL2, "colour": 1}, "unknown configuration keys"),
    ({"command": "verify"}, "missing required key"),
    ({"command": "frobnicate", "kernel": KERNEL2}, "command must be"),
    ({"command": "verify", "kernel": KERNEL2, "params": {"bogus": 1}}, "unknown params"),
    ({"command": "verify", "kernel": {**KERNEL2, "beta": 2}}, "unknown kernel keys"),
    ({"command": "verify", "kernel": KERNEL2, "direction": [0, 0]}, "nonzero"),
    ({"command": "verify", "kernel": KERNEL2, "domain": {"box": {"lo": [1, 1], "hi": [0, 0]}}}, "positive extent"),
    ({"command": "verify", "kernel": KERNEL2, "domain": {"torus": {"n": [16], "h": 0.1}}}, "dimension"),
    ({"command": "verify", "kernel": KERNEL2, "seed": -3}, "seed"),
    ({"command": "verify", "kernel": {"family": "CompactSingular", "d": 2, "delta": 1.0, "s": 1.5}}, "assumptions"),
])
def test_invalid_configs(data, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(data)


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="malformed"):
        parse_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "absent.json")


def test_overrides_win(tmp_path):
    cfg = parse_config(_write(tmp_path, {"kernel": KERNEL2, "seed": 5, "tol": 1e-6}), "verify", {"seed": 9})
    assert cfg.seed == 9 and cfg.tol == 1e-6


def test_command_mismatch(tmp_path):
    with pytest.raises(ConfigError, match="not"):
        parse_config(_write(tmp_path, {"command": "symbol", "kernel": KERNEL2}), "verify")


# ---------------------------------------------------------------------------
# field files


def test_field_round_trip_bitwise(tmp_path, rng):
    torus = Torus.cube(2, 32, 1 / 16)
    f = Field(torus, rng.standard_normal(torus.shape))
    write_field(tmp_path / "u.f64", f)
    g = read_field(tmp_path / "u.f64")
    assert g.values.tobytes() == f.values.tobytes()
    assert g.torus == torus and g.rank == "scalar"


def test_vector_field_round_trip(tmp_path, rng):
    torus = Torus((6, 8, 10), 0.5)
    f = Field(torus, rng.standard_normal((3, *torus.shape)), "vector")
    write_field(tmp_path / "v.f64", f)
    assert np.array_equal(read_field(tmp_path / "v.f64").values, f.values)
    meta = json.loads((tmp_path / "v.f64.json").read_text())
    assert meta == {"torus": {"n": [6, 8, 10], "h": 0.5}, "rank": "vector", "components": [3]}


def test_payload_layout_is_lattice_fastest(tmp_path):
    torus = Torus((4, 5), 1.0)
    values = np.arange(40.0).reshape(2, 4, 5)
    write_field(tmp_path / "v.f64", Field(torus, values, "vector"))
    raw = np.frombuffer((tmp_path / "v.f64").read_bytes(), dtype="<f8")
    assert np.array_equal(raw, np.arange(40.0))


def test_truncated_payload(tmp_path, rng):
    torus = Torus.cube(2, 8, 0.1)
    write_field(tmp_path / "u.f64", Field(torus, rng.standard_normal(torus.shape)))
    data = (tmp_path / "u.f64").read_bytes()
    (tmp_path / "u.f64").write_bytes(data[:-8])
    with pytest.raises(FieldFormatError, match="bytes"):
        read_field(tmp_path / "u.f64")


def test_sidecar_rank_disagrees_with_payload(tmp_path, rng):
    torus = Torus.cube(2, 8, 0.1)
    write_field(tmp_path / "u.f64", Field(torus, rng.standard_normal(torus.shape)))
    side = tmp_path / "u.f64.json"
    meta = json.loads(side.read_text())
    meta.update(rank="vector", components=[2])
    side.write_text(json.dumps(meta))
    with pytest.raises(FieldFormatError):
        read_field(tmp_path / "u.f64")
    meta.update(rank="vector", components=[])
    side.write_text(json.dumps(meta))
    with pytest.raises(FieldFormatError, match="disagrees"):
        read_field(tmp_path / "u.f64")


def test_field_shape_validation():
    torus = Torus.cube(2, 8, 0.1)
    with pytest.raises(FieldFormatError):
        Field(torus, np.zeros((2, 8, 8)), "scalar")


def test_csv_export(tmp_path):
    torus = Torus((4, 4), 0.5)
    write_csv(tmp_path / "u.csv", Field(torus, np.arange(16.0).reshape(4, 4)))
    rows = np.loadtxt(tmp_path / "u.csv", delimiter=",", skiprows=1)
    assert rows.shape == (16, 3)
    assert np.array_equal(rows[:, 2], np.arange(16.0))


# ---------------------------------------------------------------------------
# command line


def test_verify_writes_manifest_and_reruns_bitwise(tmp_path, capsys):
    cfg = _write(tmp_path, {"kernel": KERNEL1, "domain": {"h": 1 / 32}, "params": {"n": 64}})
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seed"] == 0xA11CE and manifest["code_version"]
    assert manifest["config"]["kernel"]["delta"] == 0.25
    assert main(["verify", "--config", str(tmp_path / "a" / "manifest.json"), "--out", str(tmp_path / "b")]) == 0
    first = json.loads((tmp_path / "a" / "verify.json").read_text())["results"]
    second = json.loads((tmp_path / "b" / "verify.json").read_text())["results"]
    assert [r["value"] for r in first] == [r["value"] for r in second]
    assert "checks passed" in capsys.readouterr().out


def test_verify_failures_exit_one(tmp_path):
    cfg = _write(tmp_path, {"kernel": KERNEL1, "domain": {"h": 1 / 32}, "params": {"n": 64, "corrupt": True}})
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_configuration_error_exit_two(tmp_path, capsys):
    cfg = _write(tmp_path, {"kernel": {"family": "FractionalTail", "d": 1, "alpha": 1.5}})
    assert main(["symbol", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "alpha" in capsys.readouterr().err
    cfg = _write(tmp_path, {"kernel": KERNEL1})
    assert main(["poincare", "--config", str(cfg), "--tol", "-1", "--out", str(tmp_path)]) == 2


def test_velocity_violation_exit_two(tmp_path):
    cfg = _write(tmp_path, {"kernel": KERNEL2, "params": {"oscillation": 1.0}})
    assert main(["solve-cd", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_non_convergence_exit_three(tmp_path):
    cfg = _write(tmp_path, {"kernel": KERNEL1})
    assert main(["solve-cd", "--config", str(cfg), "--tol", "1e-40", "--out", str(tmp_path)]) == 3


def test_symbol_csv(tmp_path):
    cfg = _write(tmp_path, {"kernel": KERNEL2, "params": {"radii": [0.5, 2.0], "angles": 4}})
    assert main(["symbol", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    header = (tmp_path / "symbol.csv").read_text().splitlines()[0]
    assert header == "xi1,xi2,re1,re2,im1,im2,abs,bound,Lambda_w"
    rows = np.loadtxt(tmp_path / "symbol.csv", delimiter=",", skiprows=1)
    assert rows.shape == (8, 9)
    assert np.all(rows[:, 6] <= rows[:, 7])


def test_poincare_report(tmp_path):
    cfg = _write(tmp_path, {"kernel": KERNEL2})
    assert main(["poincare", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "poincare.json").read_text())
    assert {"Pi_h", "sigma_min", "iterations", "history"} <= set(report)
    assert report["dense_relative_gap"] <= 1e-8


def test_solvers_write_fields(tmp_path):
    cfg = _write(tmp_path, {"kernel": KERNEL2, "params": {"load": "manufactured", "velocity": [0.2, 0.1]}})
    assert main(["solve-cd", "--config", str(cfg), "--out", str(tmp_path / "cd")]) == 0
    report = json.loads((tmp_path / "cd" / "report.json").read_text())
    assert report["manufactured_error"] <= 1e-9
    assert read_field(tmp_path / "cd" / "u.f64").rank == "scalar"
    cfg = _write(tmp_path, {"kernel": KERNEL2, "params": {"load": "manufactured"}})
    assert main(["solve-elasticity", "--config", str(cfg), "--out", str(tmp_path / "el")]) == 0
    assert read_field(tmp_path / "el" / "u.f64").rank == "vector"


def test_helmholtz_outputs(tmp_path):
    cfg = _write(tmp_path, {"kernel": KERNEL2})
    assert main(["helmholtz", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    for name in ("p.f64", "q.f64", "f.f64", "helmholtz.json"):
        assert (tmp_path / name).exists()
    assert json.loads((tmp_path / "helmholtz.json").read_text())["residual"] <= 1e-9


def test_localize_table(tmp_path):
    cfg = _write(tmp_path, {"kernel": {"family": "CompactIntegrable", "d": 1, "delta": 1.0},
                            "params": {"n": 512}})
    assert main(["localize", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "localize.json").read_text())["orders"]["grad"] >= 0.9


def test_threads_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("NLVC_THREADS", "2")
    cfg = _write(tmp_path, {"kernel": KERNEL1})
    assert main(["poincare", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    monkeypatch.setenv("NLVC_THREADS", "many")
    assert main(["poincare", "--config", str(cfg), "--out", str(tmp_path)]) == 2
