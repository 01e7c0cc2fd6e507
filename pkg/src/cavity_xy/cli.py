"""Command-line front end: validated JSON configs, protocol dispatch and result files.

    python -m cavity_xy sweep-drive --config run.json --out results/
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import Estimator, critical_drive, critical_detuning, fit_period, FitError, central_gradient
from .collective import CollectiveFields, integrate_quench
from .core import ModelParams, TrapParams, DomainError, TWO_PI, interaction_period
from .ensemble import run_shots, quench_protocol
from .motion import run_echo
from .protocols import (EnsembleOptions, drive_sweep, detuning_sweep, phase_diagram, basin_map,
                        prep_state, natural_azimuth, apply_phase_jump, MODELS)
from .trajectory import IntegrationError, Trajectory

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_INTEGRATION, EXIT_IO = 0, 1, 2, 3, 4

PROTOCOLS = ("QUENCH", "DETUNING_SWEEP", "DRIVE_SWEEP", "PHASE_DIAGRAM", "BASIN", "ECHO",
             "PREP_QUENCH")

SUBCOMMANDS = {
    "simulate": ("QUENCH", "PREP_QUENCH"),
    "sweep-drive": ("DRIVE_SWEEP",),
    "sweep-detuning": ("DETUNING_SWEEP",),
    "phase-diagram": ("PHASE_DIAGRAM",),
    "basin": ("BASIN",),
    "echo": ("ECHO",),
    "fit-period": ("QUENCH",),
    "oracle-check": (),
}

_num = (int, float)
_grid = (list, dict)

# key -> (accepted types, default); None default means "not set"
SCHEMA = {
    "model": (str, "COLLECTIVE"),
    "protocol": (str, None),
    "N": (_num, 950e3),
    "g_hz": (_num, 10.9e3),
    "kappa_hz": (_num, 153e3),
    "gamma_hz": (_num, 7.5e3),
    "gamma_el_hz": (_num, 40e3),
    "Delta_hz": (_num, 50e6),
    "delta_hz": (_num, 0.0),
    "omega_p_hz": (_num, None),
    "phi": (_num, 0.0),
    "lambda_L": (_num, 813e-9),
    "lambda_c": (_num, 689e-9),
    "temperature": (_num, 14e-6),
    "waist": (_num, 71e-6),
    "sigma_th": (_num, 0.0),
    "trap_hz": (_num, 200e3),
    "n_max": (int, 10),
    "chiN_hz": (_num, None),
    "omega_over_chiN": (_num, None),
    "delta_over_chiN": (_num, None),
    "t_final_us": (_num, 6.0),
    "dt_out_us": (_num, 0.01),
    "estimator": (str, None),
    "window_us": (list, None),
    "t_snapshot_us": (_num, None),
    "omega_over_chiN_grid": (_grid, None),
    "delta_over_chiN_grid": (_grid, None),
    "t_echo_us_grid": (_grid, None),
    "n_r": (int, 50),
    "n_phi": (int, 50),
    "n_periods": (_num, 20),
    "prep_ratio": (_num, 3.0),
    "z0": (_num, None),
    "dphi": (_num, 0.0),
    "seed": (int, 0),
    "n_shots": (int, 12),
    "fluctuation_rms": (_num, 0.05),
    "N_sim": (int, 1000),
    "incommensurate": (bool, True),
    "decoherence": (bool, True),
    "interactions": (bool, False),
    "frozen": (bool, False),
    "self_term": (str, "exact"),
    "ordering_correction": (bool, False),
    "threshold": (_num, 0.1),
    "jump_threshold": (_num, 0.3),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: str
    protocol: str | None
    params: ModelParams
    settings: dict                    # every schema key, defaults filled
    notes: list = field(default_factory=list)

    def __getitem__(self, key):
        return self.settings[key]

    def to_json(self):
        return json.dumps(self.settings, indent=2, sort_keys=True) + "\n"


def _check_type(key, val, types):
    accepted = types if isinstance(types, tuple) else (types,)
    if isinstance(val, bool) and bool not in accepted:
        raise ConfigError(f"config key {key!r}: expected a number, got a boolean")
    if not isinstance(val, accepted):
        name = "/".join(t.__name__ for t in accepted)
        raise ConfigError(f"config key {key!r}: expected {name}, got {type(val).__name__}")


def expand_grid(key, spec):
    """A grid is a list of values or {start, stop, step} (stop inclusive)."""
    if isinstance(spec, list):
        vals = np.asarray(spec, float)
    else:
        extra = set(spec) - {"start", "stop", "step"}
        if extra or not {"start", "stop", "step"} <= set(spec):
            raise ConfigError(f"config key {key!r}: grid needs exactly start, stop, step")
        a, b, h = (float(spec[k]) for k in ("start", "stop", "step"))
        if h <= 0 or b < a:
            raise ConfigError(f"config key {key!r}: need step > 0 and stop >= start")
        n = int(math.floor((b - a) / h + 1e-9))
        # round to the step's decimal resolution so grids print cleanly
        digits = max(0, 12 - int(math.floor(math.log10(h))))
        vals = np.round(a + h * np.arange(n + 1), min(digits, 15))
    if vals.ndim != 1 or len(vals) == 0 or not np.all(np.isfinite(vals)):
        raise ConfigError(f"config key {key!r}: grid must be a non-empty list of finite numbers")
    return vals


def validate(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key in raw:
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
    settings = {}
    notes = []
    for key, (types, default) in SCHEMA.items():
        if key in raw and raw[key] is not None:
            _check_type(key, raw[key], types)
            settings[key] = raw[key]
        else:
            settings[key] = default
    if "seed" not in raw:
        notes.append("seed not given; using deterministic default 0")
    model = settings["model"].upper()
    if model not in MODELS:
        raise ConfigError(f"config key 'model': must be one of {', '.join(MODELS)}")
    settings["model"] = model
    if settings["protocol"] is not None:
        proto = settings["protocol"].upper()
        if proto not in PROTOCOLS:
            raise ConfigError(f"config key 'protocol': must be one of {', '.join(PROTOCOLS)}")
        settings["protocol"] = proto
    if not 0 <= settings["seed"] < 2**64:
        raise ConfigError("config key 'seed': must be an unsigned 64-bit integer")
    for key in ("n_shots", "N_sim", "n_r", "n_phi"):
        if settings[key] < 1:
            raise ConfigError(f"config key {key!r}: must be >= 1")
    for key in ("t_final_us", "dt_out_us", "n_periods", "prep_ratio", "trap_hz"):
        if settings[key] <= 0:
            raise ConfigError(f"config key {key!r}: must be positive")
    if settings["fluctuation_rms"] < 0:
        raise ConfigError("config key 'fluctuation_rms': must be >= 0")
    if settings["self_term"] not in ("exact", "mean_field"):
        raise ConfigError("config key 'self_term': must be 'exact' or 'mean_field'")
    if settings["estimator"] is not None:
        settings["estimator"] = settings["estimator"].upper()
        if settings["estimator"] not in ("SNAPSHOT", "WINDOW"):
            raise ConfigError("config key 'estimator': must be SNAPSHOT or WINDOW")
    if settings["window_us"] is not None:
        w = settings["window_us"]
        if len(w) != 2 or not all(isinstance(x, _num) for x in w) or w[1] <= w[0]:
            raise ConfigError("config key 'window_us': must be [t0, t1] with t1 > t0")
    if settings["z0"] is not None and not -1 <= settings["z0"] <= 0:
        raise ConfigError("config key 'z0': must lie in [-1, 0]")
    if settings["chiN_hz"] is not None and settings["chiN_hz"] == 0:
        raise ConfigError("config key 'chiN_hz': must be non-zero")
    for key in ("omega_over_chiN_grid", "delta_over_chiN_grid", "t_echo_us_grid"):
        if settings[key] is not None:
            expand_grid(key, settings[key])
    try:
        trap = TrapParams.for_frequency(settings["trap_hz"], settings["lambda_L"],
                                        n_max=settings["n_max"])
        params = ModelParams(
            g_hz=settings["g_hz"], kappa_hz=settings["kappa_hz"], gamma_hz=settings["gamma_hz"],
            gamma_el_hz=settings["gamma_el_hz"], Delta_hz=settings["Delta_hz"],
            delta_hz=settings["delta_hz"], omega_p_hz=settings["omega_p_hz"] or 0.0,
            phi=settings["phi"], N=settings["N"], lambda_L=settings["lambda_L"],
            lambda_c=settings["lambda_c"], trap=trap, temperature=settings["temperature"],
            waist=settings["waist"], sigma_th=settings["sigma_th"])
    except DomainError as e:
        raise ConfigError(f"invalid physical parameters: {e}") from None
    if settings["omega_over_chiN"] is not None:
        params = params.with_drive_ratio(settings["omega_over_chiN"])
    if model != "COLLECTIVE" and not params.dispersive_ok:
        notes.append(f"dispersive hierarchy not satisfied: |Delta|/2pi = {abs(params.Delta_hz):.4g} Hz, "
                     f"g sqrt(N)/2pi = {params.g_hz * math.sqrt(params.N):.4g} Hz")
    return RunConfig(model, settings["protocol"], params, settings, notes)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from None
    return validate(raw)


def describe(cfg: RunConfig) -> str:
    p = cfg.params
    chiN = _fields(cfg).chiN
    return (f"model={cfg.model} N={p.N:.6g} chiN={chiN:.6g} rad/s "
            f"g={p.g:.6g} kappa={p.kappa:.6g} gamma={p.gamma:.6g} gamma_el={p.gamma_el:.6g} "
            f"Delta={p.Delta:.6g} delta={p.delta:.6g} rad/s")


# protocol execution

@dataclass
class ResultBundle:
    config: dict
    protocol: str
    payload: object
    version: str = __version__
    wall_time: float = 0.0
    warnings: list = field(default_factory=list)
    status: str = "ok"
    summary: dict = field(default_factory=dict)


def _fields(cfg: RunConfig) -> CollectiveFields:
    s = cfg.settings
    if s["chiN_hz"] is not None:
        chiN = TWO_PI * s["chiN_hz"]
        om = (s["omega_over_chiN"] or 0.0) * chiN
        delta = (s["delta_over_chiN"] * abs(chiN) if s["delta_over_chiN"] is not None
                 else cfg.params.delta)
        return CollectiveFields(chiN, om, 0.0, delta)
    f = CollectiveFields.from_params(cfg.params, ordering_correction=s["ordering_correction"])
    if s["delta_over_chiN"] is not None:
        f = CollectiveFields(f.chiN, f.omega, f.omega_prime, s["delta_over_chiN"] * abs(f.chiN))
    return f


def _params_for_ensemble(cfg):
    p = cfg.params
    s = cfg.settings
    if s["delta_over_chiN"] is not None:
        p = p.with_(delta_hz=s["delta_over_chiN"] * abs(p.chiN) / TWO_PI)
    return p


def _estimator(cfg, default_collective):
    s = cfg.settings
    kind = s["estimator"]
    if kind is None:
        return default_collective if cfg.model == "COLLECTIVE" else Estimator.window(0.0, 6e-6)
    if kind == "SNAPSHOT":
        t = s["t_snapshot_us"] if s["t_snapshot_us"] is not None else s["t_final_us"]
        return Estimator.snapshot(t * 1e-6)
    w = s["window_us"] or [0.0, s["t_final_us"]]
    return Estimator.window(w[0] * 1e-6, w[1] * 1e-6)


def _options(cfg, workers=1):
    s = cfg.settings
    return EnsembleOptions(N_sim=s["N_sim"], n_shots=s["n_shots"],
                           fluctuation_rms=s["fluctuation_rms"], seed=s["seed"],
                           incommensurate=s["incommensurate"], decoherence=s["decoherence"],
                           self_term=s["self_term"], workers=workers)


def _grid(cfg, key, default):
    spec = cfg.settings[key]
    return expand_grid(key, spec) if spec is not None else np.asarray(default, float)


def run_quench(cfg: RunConfig) -> Trajectory:
    s = cfg.settings
    T, dt = s["t_final_us"] * 1e-6, s["dt_out_us"] * 1e-6
    prep = cfg.protocol == "PREP_QUENCH"
    if cfg.model == "COLLECTIVE":
        f = _fields(cfg)
        v0 = np.array([0.0, 0.0, -1.0])
        if prep:
            z0 = s["z0"] if s["z0"] is not None else -1.0
            v = prep_state(f, z0, prep_ratio=s["prep_ratio"])
            v0 = apply_phase_jump(v, math.atan2(v[1], v[0]), natural_azimuth(f.omega) - s["dphi"])
        tr = integrate_quench(f, v0, T, dt, N=cfg.params.N)
        tr.meta["N"] = cfg.params.N
        return tr
    if cfg.model == "MOTION":
        raise ConfigError("the MOTION model supports the ECHO protocol only")
    if prep:
        raise ConfigError("PREP_QUENCH is available for the COLLECTIVE model; use BASIN for ensembles")
    mode = "adiabatic" if cfg.model == "ENSEMBLE_ADIABATIC" else "full_cavity"
    protocol = quench_protocol(T, dt, N_sim=s["N_sim"], seed=s["seed"], mode=mode,
                               decoherence=s["decoherence"], incommensurate=s["incommensurate"])
    tr = run_shots(_params_for_ensemble(cfg), protocol, s["n_shots"], s["fluctuation_rms"], s["seed"])
    tr.meta["N_sim"] = s["N_sim"]
    return tr


def run_command(subcommand: str, cfg: RunConfig, threads: int = 1) -> ResultBundle:
    allowed = SUBCOMMANDS[subcommand]
    if cfg.protocol is not None and allowed and cfg.protocol not in allowed:
        raise ConfigError(f"protocol {cfg.protocol} does not match subcommand {subcommand}")
    protocol = cfg.protocol if cfg.protocol in allowed else (allowed[0] if allowed else "ORACLE")
    cfg = copy.copy(cfg)
    cfg.protocol = protocol
    s = cfg.settings
    t0 = time.perf_counter()
    summary = {}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if subcommand == "simulate" or subcommand == "fit-period":
            payload = run_quench(cfg)
            if subcommand == "fit-period":
                try:
                    fit = fit_period(payload)
                except FitError as e:
                    raise IntegrationError(f"period fit failed: {e}") from None
                summary = {"period_s": fit.period, "amplitude": fit.amplitude, "offset": fit.offset,
                           "slope": fit.slope, "phase": fit.phase, "residual": fit.residual}
        elif subcommand == "sweep-drive":
            grid = _grid(cfg, "omega_over_chiN_grid", np.round(np.arange(0, 1.0001, 0.01), 2))
            f = _fields(cfg)
            est = _estimator(cfg, Estimator.window(0.0, s["n_periods"] * interaction_period(f.chiN)))
            if cfg.model == "COLLECTIVE":
                payload = _collective_drive_sweep(cfg, grid, est)
            else:
                payload = drive_sweep(_params_for_ensemble(cfg), grid, model=cfg.model,
                                      estimator=est, options=_options(cfg, threads))
            summary = {}
            if len(grid) >= 3:
                cp = critical_drive(payload)
                summary = {"critical_drive": cp.value, "uncertainty": cp.uncertainty}
        elif subcommand == "sweep-detuning":
            grid = _grid(cfg, "delta_over_chiN_grid", np.round(np.arange(-1, 1.0001, 0.02), 2))
            f = _fields(cfg)
            est = _estimator(cfg, Estimator.window(0.0, s["n_periods"] * interaction_period(f.chiN)))
            payload = detuning_sweep(cfg.params, grid, s["omega_over_chiN"] or 0.0, model=cfg.model,
                                     estimator=est, options=_options(cfg, threads))
            summary = {}
            if len(grid) >= 3:
                dc = critical_detuning(payload)
                summary = {"critical_negative": dc.negative.value, "critical_positive": dc.positive.value}
        elif subcommand == "phase-diagram":
            d = _grid(cfg, "delta_over_chiN_grid", np.round(np.arange(-1, 1.0001, 0.05), 2))
            o = _grid(cfg, "omega_over_chiN_grid", np.round(np.arange(0.05, 1.5001, 0.05), 2))
            f = _fields(cfg)
            est = _estimator(cfg, Estimator.window(0.0, s["n_periods"] * interaction_period(f.chiN)))
            payload = phase_diagram(cfg.params, d, o, model=cfg.model, estimator=est,
                                    options=_options(cfg, threads), jump_threshold=s["jump_threshold"])
        elif subcommand == "basin":
            ratio = s["omega_over_chiN"] if s["omega_over_chiN"] is not None else 0.2
            if cfg.model == "COLLECTIVE":
                payload = basin_map(ratio, n_r=s["n_r"], n_phi=s["n_phi"], chiN=_fields(cfg).chiN,
                                    n_periods=s["n_periods"], prep_ratio=s["prep_ratio"])
            else:
                payload = basin_map(ratio, n_r=s["n_r"], n_phi=s["n_phi"], model=cfg.model,
                                    params=cfg.params, options=_options(cfg, threads),
                                    prep_ratio=s["prep_ratio"], t_final=s["t_final_us"] * 1e-6,
                                    threshold=s["threshold"])
            summary = {"ferro_fraction": payload.ferro_fraction()}
        elif subcommand == "echo":
            if cfg.model != "MOTION":
                raise ConfigError("echo runs on the MOTION model")
            grid = _grid(cfg, "t_echo_us_grid", np.round(np.arange(0, 3.0001, 0.25), 2))
            payload = run_echo(cfg.params, grid * 1e-6, N_sim=s["N_sim"], seed=s["seed"],
                               frozen=s["frozen"], interactions=s["interactions"],
                               decoherence=s["decoherence"], incommensurate=s["incommensurate"])
        elif subcommand == "oracle-check":
            from .checks import run_oracle_checks
            payload = run_oracle_checks()
            summary = {"all_passed": all(r["passed"] for r in payload)}
        else:  # pragma: no cover - argparse restricts choices
            raise ConfigError(f"unknown subcommand {subcommand}")
    notes = list(cfg.notes) + [str(w.message) for w in caught]
    return ResultBundle(cfg.settings, protocol, payload, wall_time=time.perf_counter() - t0,
                        warnings=notes, summary=summary)


def _collective_drive_sweep(cfg, grid, est):
    f = _fields(cfg)
    from .protocols import _collective_jz
    from .analysis import classify_array
    from .trajectory import SweepResult
    jz, _, _ = _collective_jz(f.chiN, grid * f.chiN, f.delta, est)
    jz = np.clip(jz, -1.0, 1.0)
    return SweepResult(grid, jz, spread=np.zeros_like(jz), labels=classify_array(jz, cfg["threshold"]),
                       meta={"model": "COLLECTIVE", "chiN": f.chiN})


# output

def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    return str(obj)


def payload_tables(bundle: ResultBundle):
    """Files keyed by name: CSV text and extra JSON documents."""
    p = bundle.payload
    files = {}
    data = {}
    if isinstance(p, Trajectory):
        energy = p.columns.get("energy", np.full(len(p.t), np.nan))
        if bundle.config["model"] == "COLLECTIVE":
            header = ["t_s", "x_norm", "y_norm", "z_norm", "energy"]
            rows = zip(p.t, p.x, p.y, p.z, energy)
        else:
            n_phys = float(np.mean(p.meta.get("n_phys_shots", [bundle.config["N"]])))
            nan = np.full(len(p.t), np.nan)
            header = ["t_s", "x_norm", "y_norm", "z_norm", "energy", "beta_re", "beta_im",
                      "n_sim", "n_phys_shot"]
            rows = zip(p.t, p.x, p.y, p.z, energy, p.columns.get("beta_re", nan),
                       p.columns.get("beta_im", nan), [p.meta.get("N_sim")] * len(p.t),
                       [n_phys] * len(p.t))
        files["run.csv"] = _csv_text(header, rows)
        data = {"trajectory": {"t_s": p.t, "x_norm": p.x, "y_norm": p.y, "z_norm": p.z,
                               **{k: v for k, v in p.columns.items()}},
                "meta": {k: v for k, v in p.meta.items() if k != "final_state"}}
    elif hasattr(p, "jump_line"):
        sw = p.sweep
        grad = sw.meta["gradient"]
        rows = [(sw.control_1[j], sw.control_2[i], sw.jz_bar[i, j], sw.labels[i, j], grad[i, j])
                for i in range(len(sw.control_2)) for j in range(len(sw.control_1))]
        files["run.csv"] = _csv_text(["control_1", "control_2", "jz_bar", "phase_label", "gradient"], rows)
        files["ridge.json"] = json.dumps(_jsonable(p.polylines()), indent=2, sort_keys=True) + "\n"
        data = {"polylines": p.polylines()}
    elif hasattr(p, "simulated"):
        rows = [(p.radius[i], p.dphi[j], p.jz_bar[i, j], p.simulated[i, j], float("nan"))
                for i in range(len(p.radius)) for j in range(len(p.dphi))]
        files["run.csv"] = _csv_text(["control_1", "control_2", "jz_bar", "phase_label", "gradient"], rows)
        data = {"radius": p.radius, "dphi": p.dphi, "simulated": p.simulated,
                "exact": p.exact, "ferro_fraction": p.ferro_fraction(), "meta": p.meta}
    elif hasattr(p, "jz_revival"):
        files["run.csv"] = _csv_text(["t_echo_us", "jz_norm_revival"],
                                     zip(np.asarray(p.t_echo) * 1e6, p.jz_revival))
        data = {"t_echo_us": np.asarray(p.t_echo) * 1e6, "jz_norm_revival": p.jz_revival,
                "meta": p.meta}
    elif hasattr(p, "control_1"):
        grad = central_gradient(p.control_1, p.jz_bar)
        rows = zip(p.control_1, [None] * len(p.control_1), p.jz_bar, p.labels, grad)
        files["run.csv"] = _csv_text(["control_1", "control_2", "jz_bar", "phase_label", "gradient"],
                                     ([a, "", c, d, e] for a, _, c, d, e in rows))
        data = {"control_1": p.control_1, "jz_bar": p.jz_bar, "spread": p.spread, "meta": p.meta}
    elif isinstance(p, list):
        files["run.csv"] = _csv_text(["check", "passed", "value", "bound"],
                                     ((r["name"], r["passed"], r["value"], r["bound"]) for r in p))
        data = {"checks": p}
    return files, data


def preflight(out_dir):
    """Fail before any compute if ``out_dir`` cannot be written."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        probe = os.path.join(out_dir, ".write_probe")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as e:
        raise OSError(f"output directory {out_dir!r} is not writable: {e}") from e


def write_results(bundle: ResultBundle, out_dir, fmt="csv"):
    """Write run.csv and/or run.json plus the run.config.json sidecar; returns written paths."""
    files, data = payload_tables(bundle)
    written = []

    def put(name, text):
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)

    put("run.config.json", json.dumps(bundle.config, indent=2, sort_keys=True) + "\n")
    for name, text in files.items():
        if name.endswith(".csv") and fmt == "json":
            continue
        put(name, text)
    if fmt in ("json", "both"):
        doc = {"config": bundle.config, "protocol": bundle.protocol, "version": bundle.version,
               "wall_time_s": bundle.wall_time, "warnings": bundle.warnings, "status": bundle.status,
               "summary": bundle.summary, "result": data}
        put("run.json", json.dumps(_jsonable(doc), indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    return written


def build_parser():
    ap = argparse.ArgumentParser(prog="cavity-xy", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--out", default="results", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--format", choices=("csv", "json", "both"), default="csv")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.config is None:
            if args.command != "oracle-check":
                raise ConfigError("--config is required")
            cfg = validate({})
        else:
            cfg = load_config(args.config)
        if args.seed is not None:
            raw = dict(cfg.settings)
            raw["seed"] = args.seed
            cfg = validate(raw)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    try:
        preflight(args.out)
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    print(describe(cfg), file=sys.stderr)
    for note in cfg.notes:
        print(f"note: {note}", file=sys.stderr)
    try:
        bundle = run_command(args.command, cfg, args.threads)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as e:
        print(f"integration failure: {e}", file=sys.stderr)
        partial = ResultBundle(cfg.settings, cfg.protocol or args.command, None, status="integration_failed",
                               warnings=[str(e)], summary={"last_t": _jsonable(e.last_t)})
        try:
            write_results(partial, args.out, "json")
        except OSError:
            pass
        return EXIT_INTEGRATION
    try:
        write_results(bundle, args.out, args.format)
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    for k, v in bundle.summary.items():
        print(f"{k}: {v}")
    if args.command == "oracle-check":
        for r in bundle.payload:
            print(f"{'PASS' if r['passed'] else 'FAIL'} {r['name']}: {r['value']:.3g} (bound {r['bound']:.3g})")
        if not bundle.summary["all_passed"]:
            return EXIT_CHECK_FAILED
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
