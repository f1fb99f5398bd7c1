"""Command-line front end: config parsing, dispatch and plot-ready output files."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import hashlib
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, analytic, experiments
from .errors import ConfigError, MagnonBlockadeError
from .hilbert import EffectiveParams, FullModelParams, full_params_for
from .lindblad import ThermalConfig
from .svg import render_heatmap

log = logging.getLogger(__name__)

SUBCOMMANDS = (
    "steady-state", "sweep1d", "sweep2d", "optimal-delta", "optimal-curve",
    "thermal-sweep", "validate-adiabatic", "convergence",
)
WORKERS_ENV = "MAGNON_SIM_WORKERS"

EFFECTIVE_KEYS = tuple(f.name for f in dataclasses.fields(EffectiveParams))
FULL_KEYS = tuple(f.name for f in dataclasses.fields(FullModelParams) if f.name != "omega_drive")

DEFAULT_PARAMS: dict[str, Any] = {
    **{f.name: f.default for f in dataclasses.fields(EffectiveParams)},
    **{k: None for k in FULL_KEYS},
    "delta_c": 200.0,
    "kappa_hz": 1.8e6,
    "omega1_hz": 8.2e9,
    "omega2_hz": 8.6e9,
    "temperature": 0.0,
}
DEFAULT_COMPUTE: dict[str, Any] = {
    "workers": 1,
    "truncation": 4,
    "channel": "both",
    "search_min": -1.0,
    "search_max": 1.0,
    "ratios": [round(0.05 + 0.01 * k, 10) for k in range(46)],
    "detunings": [0.0, 0.05, 0.1, 0.15, 0.2],
    "t_min_mk": 0.0,
    "t_max_mk": 40.0,
    "t_step_mk": 0.25,
    "truncations": [3, 4, 6],
    "tolerance": 1e-6,
    "magnon_dim_full": 3,
    "cavity_dim": 2,
    "cavity_decay": 0.0,
    "regime_factor": 10.0,
}
DEFAULT_OUTPUT: dict[str, Any] = {"path": None, "svg": None}
DEFAULT_AXES = {
    "sweep2d": [{"name": "delta1", "min": -1.0, "max": 1.0, "count": 161},
                {"name": "g2_ratio", "min": 0.0, "max": 0.5, "count": 161}],
    "sweep1d": [{"name": "delta1", "min": -1.0, "max": 1.0, "count": 201}],
}
SECTIONS = {"params": DEFAULT_PARAMS, "compute": DEFAULT_COMPUTE, "output": DEFAULT_OUTPUT}
LIST_KEYS = {"ratios": float, "detunings": float, "truncations": int}
INT_KEYS = {"workers", "truncation", "magnon_dim_full", "cavity_dim"}
STRING_KEYS = {"channel", "path", "svg"}


@dataclass
class RunConfig:
    subcommand: str
    params: dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_PARAMS))
    axes: list[dict[str, Any]] = field(default_factory=list)
    compute: dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_COMPUTE))
    output: dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_OUTPUT))

    def effective_params(self) -> EffectiveParams:
        return EffectiveParams(**{k: float(self.params[k]) for k in EFFECTIVE_KEYS})

    def thermal_config(self, temperature: float | None = None) -> ThermalConfig:
        return ThermalConfig(
            omega1=2 * math.pi * self.params["omega1_hz"],
            omega2=2 * math.pi * self.params["omega2_hz"],
            temperature=self.params["temperature"] if temperature is None else temperature,
            kappa_absolute=2 * math.pi * self.params["kappa_hz"],
        )

    def axis_specs(self) -> list[experiments.AxisSpec]:
        axes = self.axes or DEFAULT_AXES.get(self.subcommand, [])
        return [experiments.AxisSpec.linspace(a["name"], a["min"], a["max"], a["count"]) for a in axes]

    def to_dict(self) -> dict:
        return {"subcommand": self.subcommand, "params": dict(self.params), "axes": [dict(a) for a in self.axes],
                "compute": dict(self.compute), "output": dict(self.output)}


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    for n, line in enumerate(text.splitlines(), start=1):
        if f'"{key}"' in line:
            return n
    return None


def _coerce(key: str, value: Any, where: str):
    """Type-check one config value; raises ConfigError naming the key."""
    if key in STRING_KEYS:
        if value is not None and not isinstance(value, str):
            raise ConfigError(f"{where}: {key} must be a string")
        return value
    if key in LIST_KEYS:
        if isinstance(value, str):
            value = [v for v in value.split(",") if v.strip()]
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{where}: {key} must be a non-empty list of numbers")
        try:
            return [LIST_KEYS[key](float(v)) if LIST_KEYS[key] is int else float(v) for v in value]
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: {key} must contain only numbers") from None
    if value is None and key in FULL_KEYS:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(f"{where}: {key} must be numeric, got {value!r}")
    try:
        number = float(value)
    except ValueError:
        raise ConfigError(f"{where}: {key} must be numeric, got {value!r}") from None
    if not math.isfinite(number):
        raise ConfigError(f"{where}: {key} must be finite")
    if key in INT_KEYS:
        if number != int(number):
            raise ConfigError(f"{where}: {key} must be an integer")
        return int(number)
    return number


def _parse_axes(value: Any, where: str) -> list[dict]:
    """Accepts a JSON list of axis objects or the flag form ``name:min:max:count,...``."""
    if isinstance(value, str):
        items = []
        for part in value.split(","):
            bits = part.split(":")
            if len(bits) != 4:
                raise ConfigError(f"{where}: axes entry {part!r} must be name:min:max:count")
            items.append({"name": bits[0], "min": bits[1], "max": bits[2], "count": bits[3]})
        value = items
    if not isinstance(value, list):
        raise ConfigError(f"{where}: axes must be a list")
    axes = []
    for a in value:
        if not isinstance(a, dict) or set(a) != {"name", "min", "max", "count"}:
            raise ConfigError(f"{where}: each axis needs exactly name, min, max, count")
        if a["name"] not in experiments.AXIS_NAMES:
            raise ConfigError(f"{where}: unknown axis name {a['name']!r}")
        lo, hi = _coerce("min", a["min"], where), _coerce("max", a["max"], where)
        try:
            count = float(a["count"])
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: axis count must be an integer") from None
        if count != int(count) or count < 2:
            raise ConfigError(f"{where}: axis {a['name']} count must be an integer >= 2")
        if lo == hi:
            raise ConfigError(f"{where}: axis {a['name']} needs min != max")
        axes.append({"name": a["name"], "min": lo, "max": hi, "count": int(count)})
    return axes


def _validate(cfg: RunConfig) -> RunConfig:
    if cfg.subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {cfg.subcommand!r}; expected one of {', '.join(SUBCOMMANDS)}")
    if cfg.compute["workers"] < 1:
        raise ConfigError("compute.workers must be >= 1")
    if cfg.compute["truncation"] < 3:
        raise ConfigError("compute.truncation must be >= 3")
    if cfg.compute["channel"] not in ("analytic", "numeric", "both"):
        raise ConfigError("compute.channel must be analytic, numeric or both")
    if cfg.compute["t_step_mk"] <= 0 or cfg.compute["t_min_mk"] < 0 or cfg.compute["t_max_mk"] <= cfg.compute["t_min_mk"]:
        raise ConfigError("temperature grid needs 0 <= t_min_mk < t_max_mk and t_step_mk > 0")
    want = {"sweep1d": 1, "sweep2d": 2}.get(cfg.subcommand)
    if want is not None and cfg.axes and len(cfg.axes) != want:
        raise ConfigError(f"{cfg.subcommand} needs exactly {want} axes, got {len(cfg.axes)}")
    try:
        cfg.effective_params()
        cfg.thermal_config()
    except MagnonBlockadeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def config_from_dict(data: dict, source_text: str | None = None, base: RunConfig | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    cfg = base or RunConfig(subcommand=str(data.get("subcommand", "")))
    if "subcommand" in data and base is not None:
        cfg.subcommand = str(data["subcommand"])
    for section, body in data.items():
        where = f"line {_line_of(source_text, section)}" if _line_of(source_text, section) else "config"
        if section == "subcommand":
            continue
        if section == "axes":
            cfg.axes = _parse_axes(body, where)
            continue
        if section not in SECTIONS:
            raise ConfigError(f"{where}: unknown section {section!r}")
        if not isinstance(body, dict):
            raise ConfigError(f"{where}: section {section!r} must be an object")
        target = getattr(cfg, section)
        for key, value in body.items():
            kwhere = f"line {_line_of(source_text, key)}" if _line_of(source_text, key) else f"{section}.{key}"
            if key not in SECTIONS[section]:
                raise ConfigError(f"{kwhere}: unknown key {section}.{key}")
            target[key] = _coerce(key, value, kwhere)
    return cfg


def _apply_set(cfg: RunConfig, item: str) -> None:
    if "=" not in item:
        raise ConfigError(f"--set {item!r}: expected key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    if key == "axes":
        cfg.axes = _parse_axes(value if not isinstance(value, (int, float)) else raw, f"--set {key}")
        return
    section, _, name = key.rpartition(".")
    sections = [section] if section else [s for s in SECTIONS if name in SECTIONS[s]]
    if not sections or sections[0] not in SECTIONS or name not in SECTIONS[sections[0]]:
        raise ConfigError(f"--set: unknown key {key!r}")
    getattr(cfg, sections[0])[name] = _coerce(name, value, f"--set {key}")


def parse_config(subcommand: str, config_path: str | None = None, sets: list[str] | None = None,
                 out: str | None = None, workers: int | None = None) -> RunConfig:
    """Merge defaults, an optional JSON file and ``key=value`` overrides (flags win)."""
    cfg = RunConfig(subcommand=subcommand)
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {config_path}")
        text = path.read_text(encoding="utf-8")
        try:
            data = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}: invalid JSON ({exc.msg})") from None
        data.pop("subcommand", None)
        config_from_dict(data, text, cfg)
    env = os.environ.get(WORKERS_ENV)
    if env is not None and workers is None:
        cfg.compute["workers"] = _coerce("workers", env, WORKERS_ENV)
    for item in sets or []:
        _apply_set(cfg, item)
    if out is not None:
        cfg.output["path"] = out
    if workers is not None:
        cfg.compute["workers"] = _coerce("workers", workers, "--workers")
    return _validate(cfg)


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)


def load_config_text(text: str) -> RunConfig:
    data = json.loads(text)
    cfg = RunConfig(subcommand=str(data.get("subcommand", "")))
    return _validate(config_from_dict(data, text, cfg))


# output


def fmt_number(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return "" if x is None else str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if dataclasses.is_dataclass(x):
        return _jsonable(dataclasses.asdict(x))
    return x


@dataclass
class OutputBundle:
    metadata: dict
    timestamp: str
    table: list[list[Any]] | None = None
    header: list[str] | None = None
    document: dict | None = None
    svg: str | None = None

    def csv_text(self) -> str:
        if self.table is None:
            raise ValueError("bundle has no table")
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key}: {json.dumps(_jsonable(self.metadata[key]), sort_keys=True)}\n")
        buf.write(f"# timestamp: {self.timestamp}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.table:
            w.writerow([fmt_number(v) for v in row])
        return buf.getvalue()

    def json_text(self) -> str:
        doc = {"metadata": self.metadata, "result": self.document or {}, "timestamp": self.timestamp}
        return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def _table_hash(header, table) -> str:
    h = hashlib.sha256()
    for row in [header] + (table or []):
        h.update((",".join(fmt_number(v) for v in row) + "\n").encode())
    return h.hexdigest()


def _bundle(cfg: RunConfig, document: dict, header=None, table=None, svg=None) -> OutputBundle:
    meta = {"version": __version__, "config": cfg.to_dict()}
    if table is not None:
        meta["grid_hash"] = _table_hash(header, table)
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return OutputBundle(meta, stamp, table, header, document, svg)


def _minimum_doc(grid: experiments.SweepGrid) -> dict:
    doc = {}
    for ch, m in grid.minimum.items():
        doc[ch] = None if m is None else {
            "coords": dict(zip([a.name for a in grid.axes], m.coords)),
            "value": m.value, "grid_index": list(m.index), "refined": m.refined,
        }
    return doc


def _grid_bundle(cfg: RunConfig, grid: experiments.SweepGrid) -> OutputBundle:
    names = ["axis1", "axis2"][: len(grid.axes)]
    header = names + ["g2_numeric", "g2_analytic", "flag"]
    table = [[r[a.name] for a in grid.axes] + [r["g2_numeric"], r["g2_analytic"], r["flag"]] for r in grid.rows()]
    doc = {"axes": [a.name for a in grid.axes], "minimum": _minimum_doc(grid),
           "flagged_cells": {ch: int(f.sum()) for ch, f in grid.flags.items()}}
    if grid.diagnostics:
        doc["physicality"] = {
            "max_hermiticity_error": float(np.max(grid.diagnostics["hermiticity"])),
            "max_trace_error": float(np.max(grid.diagnostics["trace"])),
            "min_eigenvalue": float(np.min(grid.diagnostics["min_eigenvalue"])),
        }
    svg = None
    if len(grid.axes) == 2:
        channel = "numeric" if "numeric" in grid.values else "analytic"
        svg = render_heatmap(grid, channel)
    return _bundle(cfg, doc, header, table, svg)


def run(cfg: RunConfig) -> OutputBundle:
    """Dispatch one subcommand and build its output bundle."""
    c = cfg.compute
    p = cfg.effective_params()
    n = c["truncation"]
    sub = cfg.subcommand
    if sub == "steady-state":
        from .lindblad import expectation, solve_effective, g2_zero
        from .hilbert import model_operators
        rho = solve_effective(p, n)
        ops = model_operators(rho.space)
        g_num = g2_zero(rho, 1)
        try:
            g_an = analytic.g2_analytic(p)
        except MagnonBlockadeError as exc:
            g_an = None
            log.warning("analytic channel unavailable: %s", exc)
        check = experiments.convergence_check(p, (n, n + 2), c["tolerance"])
        doc = {
            "g2_numeric": g_num, "g2_analytic": g_an,
            "occupation_m1": expectation(rho, ops["m1"].dag() @ ops["m1"]).real,
            "occupation_m2": expectation(rho, ops["m2"].dag() @ ops["m2"]).real,
            "occupation_qubit": expectation(rho, ops["sigma"].dag() @ ops["sigma"]).real,
            "antibunched": g_num < 1,
            "physicality": {"hermiticity_error": rho.hermiticity_error(), "trace_error": rho.trace_error(),
                            "min_eigenvalue": rho.min_eigenvalue()},
            "truncation_check": {"truncation": n, "next": n + 2,
                                 "relative_change": check.rows[0].change_to_next,
                                 "converged": check.converged(n)},
        }
        return _bundle(cfg, doc)
    if sub in ("sweep1d", "sweep2d"):
        axes = cfg.axis_specs()
        if sub == "sweep2d":
            grid = experiments.sweep_2d(p, axes[0], axes[1], c["channel"], n, c["workers"])
        else:
            grid = experiments.sweep_1d(p, axes[0], c["channel"], n, c["workers"])
        return _grid_bundle(cfg, grid)
    if sub == "optimal-delta":
        opt = analytic.optimal_delta1(p, (c["search_min"], c["search_max"]))
        return _bundle(cfg, {"delta1_opt": opt.delta1, "residual": opt.residual, "at_boundary": opt.at_boundary})
    if sub == "optimal-curve":
        rows = experiments.optimal_curve(c["ratios"], c["detunings"], p, (c["search_min"], c["search_max"]))
        header = ["detuning", "g2_ratio", "delta1_opt", "residual", "at_boundary"]
        table = [[r.detuning, r.g2_ratio, r.delta1_opt, r.residual, r.at_boundary] for r in rows]
        doc = {"rows": len(rows), "boundary_hits": sum(r.at_boundary for r in rows)}
        return _bundle(cfg, doc, header, table)
    if sub == "thermal-sweep":
        count = int(round((c["t_max_mk"] - c["t_min_mk"]) / c["t_step_mk"])) + 1
        temps = c["t_min_mk"] * 1e-3 + np.arange(count) * c["t_step_mk"] * 1e-3
        sets = {
            "resonant": p.replace(delta1=0.0, delta2=0.0, delta_q=0.0, g2=0.161 * p.g1),
            "detuned": p.replace(delta1=-0.276, delta2=0.1, delta_q=0.1, g2=0.137 * p.g1),
        }
        sweep = experiments.thermal_sweep(cfg.thermal_config(), sets, temps, n)
        header = ["temperature_mk", "n_th1", "n_th2", "g2_resonant", "g2_detuned"]
        table = [[t * 1e3, a, b, x, y] for t, a, b, x, y in zip(sweep.temperatures, sweep.n_th1, sweep.n_th2,
                                                                   sweep.curves["resonant"], sweep.curves["detuned"])]
        doc = {"crossing_mk": {k: (None if v is None else v * 1e3) for k, v in sweep.crossings.items()},
               "parameter_sets": {k: dataclasses.asdict(v) for k, v in sets.items()}}
        return _bundle(cfg, doc, header, table)
    if sub == "validate-adiabatic":
        given = {k: cfg.params[k] for k in FULL_KEYS if cfg.params[k] is not None}
        if given:
            missing = [k for k in ("delta_c1", "delta_c2") if k not in given]
            if missing:
                raise ConfigError(f"explicit full-model parameters need {', '.join(missing)}")
            full = FullModelParams(omega_drive=p.omega_drive, **given)
        else:
            full = full_params_for(p, cfg.params["delta_c"])
        rep = experiments.adiabatic_validation(
            full, p.kappa, p.gamma, p.n_th1, p.n_th2, magnon_dim=c["magnon_dim_full"],
            cavity_dim=c["cavity_dim"], cavity_decay=c["cavity_decay"], regime_factor=c["regime_factor"])
        return _bundle(cfg, dataclasses.asdict(rep))
    if sub == "convergence":
        table_ = experiments.convergence_check(p, c["truncations"], c["tolerance"])
        header = ["truncation", "g2", "change_to_next"]
        table = [[r.truncation, r.g2, r.change_to_next] for r in table_.rows]
        return _bundle(cfg, {"converged_at": table_.converged_at, "tolerance": table_.tolerance}, header, table)
    raise ConfigError(f"unknown subcommand {sub!r}")


def write_outputs(cfg: RunConfig, bundle: OutputBundle, stdout=None) -> None:
    """Main payload to ``output.path`` (stdout if unset); JSON summary to stdout when a file was written."""
    stdout = stdout or sys.stdout
    payload = bundle.csv_text() if bundle.table is not None else bundle.json_text()
    path = cfg.output.get("path")
    if path:
        Path(path).write_text(payload, encoding="utf-8")
        stdout.write(bundle.json_text())
    else:
        stdout.write(payload)
    if cfg.output.get("svg") and bundle.svg is not None:
        Path(cfg.output["svg"]).write_text(bundle.svg, encoding="utf-8")


def _error_json(kind: str, message: str, subcommand: str | None) -> str:
    return json.dumps({"error": {"kind": kind, "message": message, "subcommand": subcommand}}, sort_keys=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="magnon-sim", description="Magnon blockade simulator")
    ap.add_argument("subcommand", help=", ".join(SUBCOMMANDS))
    ap.add_argument("--config", help="JSON config with params/axes/compute/output sections")
    ap.add_argument("--set", dest="sets", action="append", default=[], metavar="KEY=VALUE",
                    help="override one config value (repeatable)")
    ap.add_argument("--out", help="output file for the main payload")
    ap.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


class _JsonErrorParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    parser.__class__ = _JsonErrorParser
    sub = None
    try:
        args = parser.parse_args(argv)
        sub = args.subcommand
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
        cfg = parse_config(args.subcommand, args.config, args.sets, args.out, args.workers)
        bundle = run(cfg)
        write_outputs(cfg, bundle)
    except ConfigError as exc:
        print(_error_json("config", str(exc), sub))
        return 2
    except MagnonBlockadeError as exc:
        print(_error_json(getattr(exc, "kind", "error"), str(exc), sub))
        return 1
    except (ValueError, ArithmeticError, OSError) as exc:
        print(_error_json(type(exc).__name__, str(exc), sub))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
