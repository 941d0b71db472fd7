import json

import numpy as np
import pytest

from csdyn.cli import EXIT_ERROR, EXIT_OK, emit_basin_grid, main, run_config
from csdyn.config import parse_config_text
from csdyn.errors import ConfigError, CsdynError
from csdyn.models import NONEXACT_RATIO, instantiate_model


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_parse_config_values():
    table = parse_config_text(
        "# comment\n"
        "run.operation = simulate\n"
        "model.name = circle-linear\n"
        "model.alpha = 1.0\n"
        "simulate.x0 = (0.25, 1)\n"
        "run.timestamp = false\n"
    )
    assert table["simulate.x0"] == (0.25, 1)
    assert table["run.timestamp"] is False


def test_parse_config_rejects_unknown_key():
    with pytest.raises(ConfigError) as err:
        parse_config_text("run.operation = simulate\nbogus.key = 1\n")
    assert err.value.line == 2


def test_parse_config_rejects_duplicates():
    with pytest.raises(ConfigError):
        parse_config_text("run.operation = verify\nrun.operation = verify\n")


def test_simulate_writes_initial_condition(tmp_path):
    cfg = write(
        tmp_path, "sim.cfg",
        "run.operation = simulate\n"
        "model.name = circle-linear\n"
        "model.alpha = 1.0\n"
        "simulate.t = 5.0\n"
        "simulate.x0 = (0.25, 1.0)\n"
        "simulate.samples = 11\n"
        "run.timestamp = false\n",
    )
    code = run_config(cfg, out=str(tmp_path))
    assert code == EXIT_OK
    lines = (tmp_path / "simulate_circle-linear.csv").read_text().splitlines()
    assert lines[0] == "t,x0,x1"
    first = lines[1].split(",")
    assert float(first[0]) == 0.0
    assert float(first[1]) == 0.25
    assert float(first[2]) == 1.0


def test_diagnose_nonexact_conformality(tmp_path):
    cfg = write(
        tmp_path, "diag.cfg",
        "run.operation = diagnose\n"
        "model.name = nonexact-linear\n"
        "diagnose.check = conformality\n",
    )
    code = run_config(cfg, out=str(tmp_path), timestamp=False)
    assert code == EXIT_OK
    payload = json.loads((tmp_path / "diagnose_nonexact-linear_conformality.json").read_text())
    check = payload["checks"][0]
    assert check["verdict"] == "PASS"
    assert check["residual"] < 1e-12
    assert abs(check["details"]["ratio"] - NONEXACT_RATIO) < 1e-12
    assert payload["schema"] == 1


def test_unknown_model_exits_one(tmp_path, capsys):
    cfg = write(
        tmp_path, "bad.cfg",
        "run.operation = simulate\nmodel.name = no-such-model\n",
    )
    assert run_config(cfg, out=str(tmp_path)) == EXIT_ERROR


def test_unknown_key_exits_one(tmp_path, capsys):
    cfg = write(tmp_path, "bad2.cfg", "run.operation = simulate\nnope = 1\n")
    assert run_config(cfg, out=str(tmp_path)) == EXIT_ERROR
    assert "line 2" in capsys.readouterr().err


def test_unknown_operation_exits_one(tmp_path):
    cfg = write(tmp_path, "bad3.cfg", "run.operation = dance\n")
    assert run_config(cfg, out=str(tmp_path)) == EXIT_ERROR


def test_verify_scope_geometry(tmp_path):
    cfg = write(
        tmp_path, "verify.cfg",
        "run.operation = verify\nverify.scope = geometry\n",
    )
    code = run_config(cfg, out=str(tmp_path), timestamp=False)
    assert code == EXIT_OK
    payload = json.loads((tmp_path / "verify_geometry.json").read_text())
    assert payload["n_checks"] >= 4
    assert payload["n_passed"] == payload["n_checks"]


def test_verify_negative_control_scope(tmp_path):
    cfg = write(
        tmp_path, "verify2.cfg",
        "run.operation = verify\nverify.scope = diagnostics-negative-controls\n",
    )
    code = run_config(cfg, out=str(tmp_path), timestamp=False)
    assert code == EXIT_OK
    payload = json.loads(
        (tmp_path / "verify_diagnostics-negative-controls.json").read_text()
    )
    verdicts = {c["verdict"] for c in payload["checks"]}
    assert "PASS-NEGATIVE-CONTROL" in verdicts


def test_verify_unknown_scope_exits_one(tmp_path):
    cfg = write(
        tmp_path, "verify3.cfg",
        "run.operation = verify\nverify.scope = everything-everywhere\n",
    )
    assert run_config(cfg, out=str(tmp_path)) == EXIT_ERROR


def test_rerun_byte_identical_without_timestamp(tmp_path):
    cfg = write(
        tmp_path, "sim2.cfg",
        "run.operation = simulate\n"
        "model.name = t2-pair-theta2\n"
        "simulate.t = 2.0\n"
        "simulate.x0 = (0.1, 0.2)\n"
        "simulate.samples = 33\n",
    )
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["--config", cfg, "--out", str(out_a), "--no-timestamp"]) == EXIT_OK
    assert main(["--config", cfg, "--out", str(out_b), "--no-timestamp"]) == EXIT_OK
    csv_a = (out_a / "simulate_t2-pair-theta2.csv").read_bytes()
    csv_b = (out_b / "simulate_t2-pair-theta2.csv").read_bytes()
    assert csv_a == csv_b


def test_csv_floats_round_trip(tmp_path):
    cfg = write(
        tmp_path, "sim3.cfg",
        "run.operation = simulate\n"
        "model.name = circle-linear\n"
        "simulate.t = 1.0\n"
        "simulate.x0 = (0.123456789012345, 0.987654321098765)\n"
        "simulate.samples = 3\n",
    )
    assert run_config(cfg, out=str(tmp_path), timestamp=False) == EXIT_OK
    lines = (tmp_path / "simulate_circle-linear.csv").read_text().splitlines()
    first = lines[1].split(",")
    assert float(first[1]) == 0.123456789012345


def test_classify_operation_and_jobs_determinism(tmp_path):
    cfg = write(
        tmp_path, "cls.cfg",
        "run.operation = classify\n"
        "model.name = t2-pair-theta2\n"
        "classify.n = 12\n"
        "classify.T = 6.0\n",
    )
    out1, out2 = tmp_path / "j1", tmp_path / "j2"
    assert main(["--config", cfg, "--out", str(out1), "--no-timestamp",
                 "--seed", "5", "--jobs", "1"]) == EXIT_OK
    assert main(["--config", cfg, "--out", str(out2), "--no-timestamp",
                 "--seed", "5", "--jobs", "2"]) == EXIT_OK
    a = (out1 / "classify_t2-pair-theta2.json").read_bytes()
    b = (out2 / "classify_t2-pair-theta2.json").read_bytes()
    assert a == b


def test_attractor_operation(tmp_path):
    cfg = write(
        tmp_path, "attr.cfg",
        "run.operation = attractor\n"
        "model.name = damped-mechanical\n"
        "model.alpha = 0.5\n"
        "model.v_cos = 1.0\n"
        "attractor.t_relax = 30.0\n"
        "attractor.grid = 17\n",
    )
    assert run_config(cfg, out=str(tmp_path), timestamp=False) == EXIT_OK
    cloud = (tmp_path / "attractor_damped-mechanical.csv").read_text().splitlines()
    assert cloud[0] == "x0,x1"
    assert len(cloud) >= 2


def test_escape_operation(tmp_path):
    cfg = write(
        tmp_path, "esc.cfg",
        "run.operation = escape\n"
        "model.name = shear-contraction\n"
        "model.a = 0.5\n"
        "escape.box = (0.0, 1.0, -1.0, 1.0)\n"
        "escape.n_steps = 5\n"
        "escape.samples = 200\n",
    )
    assert run_config(cfg, out=str(tmp_path), timestamp=False) == EXIT_OK
    payload = json.loads((tmp_path / "escape_shear-contraction.json").read_text())
    assert payload["checks"][0]["details"]["escaped"] == 200


def test_list_models(tmp_path, capsys):
    cfg = write(tmp_path, "list.cfg", "run.operation = list-models\n")
    assert run_config(cfg, out=str(tmp_path)) == EXIT_OK
    out = capsys.readouterr().out
    assert "circle-linear" in out and "nonexact-linear" in out


def test_basin_grid_mostly_sink(tmp_path):
    m = instantiate_model("damped-mechanical", alpha=0.5, d=1, v_cos=1.0)
    targets = [np.array([0.0, 0.0]), np.array([0.5, 0.0])]
    labels, q_axis, p_axis = emit_basin_grid(m, 200, 3.0, targets, t_max=60.0)
    sink_share = float(np.mean(labels == 2))
    assert sink_share >= 0.95
    assert labels.shape == (200, 200)


def test_basin_grid_requires_targets():
    m = instantiate_model("damped-mechanical", alpha=0.5, d=1, v_cos=1.0)
    with pytest.raises(CsdynError):
        emit_basin_grid(m, 10, 3.0, [])


def test_basin_grid_rejects_empty_grid():
    m = instantiate_model("damped-mechanical", alpha=0.5, d=1, v_cos=1.0)
    with pytest.raises(CsdynError):
        emit_basin_grid(m, 0, 3.0, [np.zeros(2)])


def test_basin_operation_writes_grid(tmp_path):
    cfg = write(
        tmp_path, "basin.cfg",
        "run.operation = basin\n"
        "model.name = damped-mechanical\n"
        "model.alpha = 0.5\n"
        "basin.grid = 20\n"
        "basin.p_range = 3.0\n"
        "basin.t_max = 40.0\n",
    )
    assert run_config(cfg, out=str(tmp_path), timestamp=False) == EXIT_OK
    text = (tmp_path / "basin_damped-mechanical.csv").read_text().splitlines()
    assert text[0].startswith("# axis q")
    assert len([l for l in text if not l.startswith("#")]) == 20


def test_missing_config_file_exits_one(tmp_path):
    assert run_config(str(tmp_path / "absent.cfg")) == EXIT_ERROR


def test_non_trapping_attractor_exits_two(tmp_path):
    # the circle flow has no compact global attractor: relaxing a box sees
    # escapes and the operation reports FAIL through exit code 2
    from csdyn.cli import EXIT_FAIL

    cfg = write(
        tmp_path, "fail.cfg",
        "run.operation = attractor\n"
        "model.name = circle-linear\n"
        "model.alpha = 1.0\n"
        "attractor.box = (0.0, 1.0, -2.0, 2.0)\n"
        "attractor.t_relax = 30.0\n"
        "attractor.grid = 11\n",
    )
    assert run_config(cfg, out=str(tmp_path), timestamp=False) == EXIT_FAIL
    payload = json.loads((tmp_path / "attractor_circle-linear.json").read_text())
    assert payload["checks"][0]["details"]["status"] == "not-trapping"


def test_transport_diagnosis_on_map_is_config_error(tmp_path):
    cfg = write(
        tmp_path, "fail2.cfg",
        "run.operation = diagnose\n"
        "model.name = radial-contraction\n"
        "model.a = 0.5\n"
        "diagnose.check = transport\n",
    )
    assert run_config(cfg, out=str(tmp_path), timestamp=False) == EXIT_ERROR
