import csv
import json
import os
import time

import numpy as np
import pytest

from cavity_xy.cli import (EXIT_CONFIG, EXIT_IO, EXIT_OK, ConfigError, load_config, main,
                           validate)

MINIMAL = {"model": "COLLECTIVE", "N": 950000, "chiN_hz": -2.26e6, "omega_over_chiN": 0.3,
           "protocol": "QUENCH", "t_final_us": 6}


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def _run(tmp_path, doc, cmd, name="out", extra=()):
    cfg = _write(tmp_path / f"{name}.json", doc)
    out = tmp_path / name
    code = main([cmd, "--config", cfg, "--out", str(out), *extra])
    return code, out


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_minimal_config(tmp_path, capsys):
    code, out = _run(tmp_path, MINIMAL, "simulate")
    assert code == EXIT_OK
    assert sorted(os.listdir(out)) == ["run.config.json", "run.csv"]
    assert _rows(out / "run.csv")[0] == ["t_s", "x_norm", "y_norm", "z_norm", "energy"]
    assert "seed not given" in capsys.readouterr().err


def test_defaults_filled():
    cfg = validate({"model": "ENSEMBLE_ADIABATIC"})
    s = cfg.settings
    assert s["seed"] == 0 and s["n_shots"] == 12 and s["N_sim"] == 1000
    assert s["fluctuation_rms"] == pytest.approx(0.05)
    assert cfg.params.gamma_el_hz == pytest.approx(40e3)


@pytest.mark.parametrize("doc, key", [({"model": "COLLECTIVE", "kappa_hz": -1}, "kappa"),
                                      ({"model": "COLLECTIVE", "foo": 1}, "foo"),
                                      ({"model": "COLLECTIVE", "N_sim": "ten"}, "N_sim"),
                                      ({"model": "NOPE"}, "model")])
def test_schema_rejection(tmp_path, capsys, doc, key):
    code, out = _run(tmp_path, doc, "simulate")
    assert code == EXIT_CONFIG
    assert key in capsys.readouterr().err
    assert not out.exists()


def test_preflight_fast(tmp_path):
    bad = _write(tmp_path / "bad.json", {"model": "COLLECTIVE", "kappa_hz": -1,
                                         "omega_over_chiN_grid": {"start": 0, "stop": 1, "step": 1e-4}})
    t0 = time.perf_counter()
    assert main(["sweep-drive", "--config", bad, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert time.perf_counter() - t0 < 0.1


def test_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = _write(tmp_path / "c.json", MINIMAL)
    t0 = time.perf_counter()
    assert main(["simulate", "--config", cfg, "--out", str(blocker / "sub")]) == EXIT_IO
    assert time.perf_counter() - t0 < 0.1


def test_config_round_trip(tmp_path):
    doc = {"model": "ENSEMBLE_ADIABATIC", "N_sim": 20, "n_shots": 2, "seed": 9,
           "omega_over_chiN_grid": [0.2, 0.4]}
    code, out = _run(tmp_path, doc, "sweep-drive")
    assert code == EXIT_OK
    a = load_config(str(out / "run.config.json"))
    b = validate(doc)
    assert json.dumps(a.settings, sort_keys=True, default=str) == \
        json.dumps(b.settings, sort_keys=True, default=str)
    code, out2 = _run(tmp_path, json.loads((out / "run.config.json").read_text()), "sweep-drive",
                      name="again")
    assert code == EXIT_OK
    assert (out / "run.csv").read_bytes() == (out2 / "run.csv").read_bytes()


def test_threads_byte_identical(tmp_path):
    doc = {"model": "ENSEMBLE_ADIABATIC", "N_sim": 30, "n_shots": 4, "seed": 5,
           "omega_over_chiN_grid": {"start": 0.2, "stop": 0.4, "step": 0.1}}
    c1, o1 = _run(tmp_path, doc, "sweep-drive", "t1", ["--threads", "1"])
    c8, o8 = _run(tmp_path, doc, "sweep-drive", "t8", ["--threads", "8"])
    assert c1 == c8 == EXIT_OK
    assert (o1 / "run.csv").read_bytes() == (o8 / "run.csv").read_bytes()


def test_sweep_drive_collective(tmp_path):
    doc = {"model": "COLLECTIVE", "seed": 3,
           "omega_over_chiN_grid": {"start": 0.0, "stop": 1.0, "step": 0.01}}
    code, out = _run(tmp_path, doc, "sweep-drive", extra=["--format", "both"])
    assert code == EXIT_OK
    rows = _rows(out / "run.csv")
    assert rows[0] == ["control_1", "control_2", "jz_bar", "phase_label", "gradient"]
    x = np.array([float(r[0]) for r in rows[1:]])
    grad = np.array([float(r[4]) for r in rows[1:]])
    assert np.isnan(grad[0]) and np.isnan(grad[-1])
    assert x[np.nanargmax(np.abs(grad))] == pytest.approx(0.5)
    doc = json.loads((out / "run.json").read_text(encoding="utf-8"))
    assert list(doc) == sorted(doc)


def test_phase_diagram_outputs(tmp_path):
    doc = {"model": "COLLECTIVE", "omega_over_chiN_grid": {"start": 0.1, "stop": 1.0, "step": 0.1},
           "delta_over_chiN_grid": {"start": -0.5, "stop": 0.5, "step": 0.1}}
    code, out = _run(tmp_path, doc, "phase-diagram")
    assert code == EXIT_OK
    assert {"run.csv", "ridge.json", "run.config.json"} <= set(os.listdir(out))
    assert set(json.loads((out / "ridge.json").read_text())) == {"jump_line", "ridge", "jump_threshold"}
    assert len(_rows(out / "run.csv")) == 1 + 10 * 11


def test_echo_header(tmp_path):
    doc = {"model": "MOTION", "N_sim": 4, "omega_over_chiN": 0.94, "n_max": 3,
           "t_echo_us_grid": [0.0, 0.2]}
    code, out = _run(tmp_path, doc, "echo")
    assert code == EXIT_OK
    rows = _rows(out / "run.csv")
    assert rows[0] == ["t_echo_us", "jz_norm_revival"]
    assert float(rows[1][1]) == pytest.approx(-1.0, abs=1e-12)


def test_oracle_check_lists_checks(tmp_path, capsys):
    code = main(["oracle-check", "--out", str(tmp_path / "oc")])
    text = capsys.readouterr().out
    assert code == EXIT_OK, text
    rows = _rows(tmp_path / "oc" / "run.csv")
    assert rows[0] == ["check", "passed", "value", "bound"]
    names = [r[0] for r in rows[1:]]
    for stem in ("uniform_ensemble_vs_collective", "dicke_convergence", "lindblad_6_sites",
                 "cavity_elimination_exact", "frozen_motion_vs_ensemble", "full_cavity_vs_adiabatic"):
        assert any(n.startswith(stem) for n in names), stem
    assert text.count("PASS") == len(names)


def test_config_error_type():
    with pytest.raises(ConfigError, match="kappa_hz"):
        validate({"model": "COLLECTIVE", "kappa_hz": -1.0})
