"""Scenario registry, config files, run reports, CLI, determinism."""

import json
import subprocess
import sys

import numpy as np
import pytest

from poisson_ortho.cli import main
from poisson_ortho.errors import ConfigError
from poisson_ortho.scenarios import (
    BUILTIN_SCENARIOS, canonical_json, load_scenario, run, thread_count,
)

INV_PI = 1.0 / np.pi


def write_config(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def chart_config(**overrides):
    doc = {
        "name": "custom-shear",
        "dim": 4,
        "poisson": {"kind": "canonical", "rank": 2},
        "casimirs": ["x1", "x2"],
        "metric": {"kind": "matrix", "entries": [
            ["1", "0", "atan(x2)/pi", "0"],
            ["0", "1", "0", "0"],
            ["atan(x2) / pi", "0", "1", "0"],
            ["0", "0", "0", "1"],
        ]},
        "grid": {"center": [0.0, 0.0, 0.0, 0.0], "half_width": 0.5,
                 "points_per_axis": 2},
    }
    doc.update(overrides)
    return doc


# ---------------------------------------------------------------------------
# registry

def test_builtin_scenarios_load():
    for name in BUILTIN_SCENARIOS:
        config = load_scenario(name)
        assert config.name == name
        assert config.structure.dim == config.metric.dim


def test_builtin_grid_defaults():
    euclid = load_scenario("euclid4")
    assert euclid.grid.center == (0.0,) * 4
    assert euclid.grid.half_width == (1.0,) * 4
    assert euclid.grid.points_per_axis == (3,) * 4
    se3 = load_scenario("se3")
    assert se3.grid.center == (1.0, 0.0, 0.0, 0.0, 1.0, 0.0)
    assert se3.algebra is not None


def test_unknown_scenario_rejected():
    with pytest.raises(ConfigError, match="not a builtin scenario"):
        load_scenario("nonexistent-thing")


# ---------------------------------------------------------------------------
# config files

def test_config_file_roundtrip(tmp_path):
    path = write_config(tmp_path, chart_config())
    config = load_scenario(path)
    assert config.name == "custom-shear"
    assert config.dim == 4
    report = run(config)
    assert report.exit_code == 1  # the shear makes it non-integrable


def test_config_metric_whitespace_normalized(tmp_path):
    # "atan(x2)/pi" vs "atan(x2) / pi" already differ as raw text in the
    # default fixture; loading succeeded, so normalization worked
    path = write_config(tmp_path, chart_config())
    load_scenario(path)


def test_config_asymmetric_metric_rejected(tmp_path):
    doc = chart_config()
    doc["metric"]["entries"][0][1] = "x1"
    doc["metric"]["entries"][1][0] = "x2"
    path = write_config(tmp_path, doc)
    with pytest.raises(ConfigError, match="must be symmetric"):
        load_scenario(path)


def test_config_term_order_matters_for_symmetry(tmp_path):
    doc = chart_config()
    doc["metric"]["entries"][0][1] = "x1 + 1"
    doc["metric"]["entries"][1][0] = "1 + x1"
    path = write_config(tmp_path, doc)
    with pytest.raises(ConfigError, match="symmetric"):
        load_scenario(path)


def test_config_missing_fields(tmp_path):
    doc = chart_config()
    del doc["grid"]
    with pytest.raises(ConfigError, match="missing required field 'grid'"):
        load_scenario(write_config(tmp_path, doc))
    doc = chart_config()
    del doc["casimirs"]
    with pytest.raises(ConfigError, match="casimirs"):
        load_scenario(write_config(tmp_path, doc))


def test_config_field_validation(tmp_path):
    doc = chart_config()
    doc["grid"]["center"] = [0.0, 0.0]
    with pytest.raises(ConfigError, match="grid.center"):
        load_scenario(write_config(tmp_path, doc))

    doc = chart_config(scheme={"kind": "upwind"})
    with pytest.raises(ConfigError, match="scheme.kind"):
        load_scenario(write_config(tmp_path, doc))

    doc = chart_config(tol_zero=-1.0)
    with pytest.raises(ConfigError, match="tol_zero"):
        load_scenario(write_config(tmp_path, doc))


def test_config_algebra_kind(tmp_path):
    doc = {
        "name": "se3-from-file",
        "dim": 6,
        "poisson": {"kind": "algebra", "name": "se3"},
        "metric": {"kind": "algebra-default"},
        "grid": {"center": [1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
                 "half_width": 0.25, "points_per_axis": 2},
    }
    config = load_scenario(write_config(tmp_path, doc))
    assert config.algebra.name == "se3"
    assert run(config).exit_code == 0


def test_config_algebra_rejects_casimir_override(tmp_path):
    doc = {
        "name": "bad",
        "dim": 3,
        "poisson": {"kind": "algebra", "name": "so3"},
        "casimirs": ["x1"],
        "metric": {"kind": "algebra-default"},
        "grid": {"center": [0.0, 0.0, 1.0], "half_width": 0.25,
                 "points_per_axis": 2},
    }
    with pytest.raises(ConfigError, match="define their own invariants"):
        load_scenario(write_config(tmp_path, doc))


def test_config_matrix_poisson_needs_rank(tmp_path):
    doc = chart_config()
    doc["poisson"] = {"kind": "matrix", "entries": [
        ["0", "0", "1", "0"],
        ["0", "0", "0", "1"],
        ["-1", "0", "0", "0"],
        ["0", "-1", "0", "0"],
    ]}
    with pytest.raises(ConfigError, match="expected_rank"):
        load_scenario(write_config(tmp_path, doc))
    doc["expected_rank"] = 2
    doc["casimirs"] = ["x1", "x2"]  # wrong invariants for this bivector
    config = load_scenario(write_config(tmp_path, doc))
    assert config.structure.expected_rank == 2


def test_config_malformed_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="config file"):
        load_scenario(str(path))


# ---------------------------------------------------------------------------
# runs

def test_run_euclid_integrable():
    report = run(load_scenario("euclid4"))
    assert report.exit_code == 0
    assert report.validation.ok
    assert report.verdict.integrable and report.verdict.consistent
    assert report.extras is None


def test_run_model4d_nonintegrable_with_witness():
    report = run(load_scenario("model4d-atan"))
    assert report.exit_code == 1
    c3 = report.verdict.report("bivector-derivative")
    assert c3.max_residual == pytest.approx(INV_PI, abs=1e-9)
    assert c3.witness.coords[1] == 0.0


def test_run_se3_extras_gram_oracle():
    report = run(load_scenario("se3"))
    assert report.exit_code == 0
    extras = report.extras
    assert extras["killing_determinant"] == 0.0
    assert extras["casimir_bracket_abelian"]
    assert extras["integral_surface"]["holds"]
    assert extras["integral_surface"]["max_residual"] <= 1e-9
    for entry in extras["gram"]:
        x = np.array(entry["point"][:3])
        p = np.array(entry["point"][3:])
        want = [[2.0 * float(x @ p), float(p @ p)], [float(p @ p), 0.0]]
        assert np.allclose(entry["matrix"], want, atol=1e-12)


def test_run_invalid_structure_exits_two(tmp_path):
    doc = {
        "name": "broken-jacobi",
        "dim": 3,
        "poisson": {"kind": "matrix", "entries": [
            ["0", "1", "0"], ["-1", "0", "x2"], ["0", "-x2", "0"],
        ]},
        "casimirs": ["x3"],
        "expected_rank": 2,
        "metric": {"kind": "identity"},
        "grid": {"center": [0.0, 0.5, 0.0], "half_width": 0.25,
                 "points_per_axis": 2},
    }
    report = run(load_scenario(write_config(tmp_path, doc)))
    assert not report.validation.ok
    assert report.verdict is None
    assert report.exit_code == 2
    assert '"verdict":null' in report.json_text()


def test_report_surfaces():
    report = run(load_scenario("so3"))
    text = report.text()
    assert "wall time" in text
    assert "INTEGRABLE" in text
    payload = report.json_text()
    assert "wall" not in payload and "elapsed" not in payload  # timing text-only
    doc = json.loads(payload)
    assert doc["schema_version"] == 1
    assert doc["exit_code"] == 0
    assert doc["scenario"]["name"] == "so3"
    assert doc["verdict"]["integrable"] is True


# ---------------------------------------------------------------------------
# canonical serialization

def test_canonical_json_formatting():
    assert canonical_json({"b": 1, "a": [1.5, True, None]}) == \
        '{"a":[1.5,true,null],"b":1}'
    assert canonical_json(0.1) == "0.10000000000000001"
    assert canonical_json(1.0) == "1"
    assert canonical_json(np.float64(0.5)) == "0.5"
    assert canonical_json(np.array([1.0, 2.0])) == "[1,2]"
    with pytest.raises(TypeError, match="non-string"):
        canonical_json({1: "x"})
    with pytest.raises(TypeError, match="deterministically"):
        canonical_json(object())


def test_run_deterministic_in_process():
    a = run(load_scenario("sl2r")).json_text()
    b = run(load_scenario("sl2r")).json_text()
    assert a == b


def test_thread_count_env(monkeypatch):
    monkeypatch.delenv("POISSON_ORTHO_THREADS", raising=False)
    assert thread_count() >= 1
    monkeypatch.setenv("POISSON_ORTHO_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("POISSON_ORTHO_THREADS", "0")
    assert thread_count() >= 1
    monkeypatch.setenv("POISSON_ORTHO_THREADS", "many")
    with pytest.raises(ConfigError):
        thread_count()


def test_warm_threads_do_not_change_output(monkeypatch):
    monkeypatch.setenv("POISSON_ORTHO_THREADS", "1")
    serial = run(load_scenario("model4d-atan")).json_text()
    monkeypatch.setenv("POISSON_ORTHO_THREADS", "4")
    parallel = run(load_scenario("model4d-atan")).json_text()
    assert serial == parallel


# ---------------------------------------------------------------------------
# CLI

def test_cli_check_json_out(tmp_path):
    out = tmp_path / "report.json"
    code = main(["check", "euclid4", "--format", "json", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["exit_code"] == 0


def test_cli_text_to_stdout(capsys):
    code = main(["check", "so3"])
    assert code == 0
    captured = capsys.readouterr()
    assert "scenario: so3" in captured.out
    assert "verdict: INTEGRABLE" in captured.out


def test_cli_grid_override_speeds_up():
    # 2 points per axis skips x2 = 0 but the verdict is still non-integrable
    code = main(["check", "model4d-atan", "--grid-points", "2"])
    assert code == 1


def test_cli_usage_errors(capsys):
    assert main(["check", "no-such-scenario"]) == 3
    assert main(["check", "euclid4", "--grid-center", "1,2"]) == 3
    assert main(["check", "euclid4", "--grid-center", "a,b,c,d"]) == 3
    assert main(["check", "euclid4", "--tol", "-1"]) == 3
    assert main(["check", "euclid4", "--no-such-flag"]) == 3
    assert main([]) == 3
    capsys.readouterr()  # swallow argparse noise


def test_cli_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    capsys.readouterr()


def test_cli_degenerate_grid_exits_two(capsys):
    code = main(["check", "sl2r", "--grid-center", "0,1,0",
                 "--grid-half-width", "0", "--grid-points", "1"])
    assert code == 2
    assert "invalid run" in capsys.readouterr().err


def test_cli_scheme_override():
    code = main(["check", "euclid4", "--scheme", "central-4",
                 "--grid-points", "2"])
    assert code == 0


def test_cli_subprocess_byte_identical(tmp_path):
    outs = []
    for tag in ("a", "b"):
        path = tmp_path / f"{tag}.json"
        proc = subprocess.run(
            [sys.executable, "-m", "poisson_ortho.cli", "check", "so3",
             "--format", "json", "--out", str(path)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
