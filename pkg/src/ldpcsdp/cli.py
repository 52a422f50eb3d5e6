"""Command-line entry point: ``ldpcsdp {optimize,verify,threshold,baseline,sweep}``.

Settings come from an optional JSON config file (strict: unknown keys are
rejected) and flag overrides.  Exit codes: 0 ok, 1 config error, 2 solver
failure, 3 verification failure.

Check distributions accept ``"x^n"``, meaning all edges on check degree n + 1.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

from . import __version__
from .baseline_lp import DiscretizationGrid, SCHEMES, discretized_optimize, grid_sweep, write_sweep_csv
from .desim import bp_threshold, verify_design
from .ensemble import ChannelParam, DegreeDistribution, DesignResult, InvalidInput
from .sosrep import NoDesign, optimize_design

COMMANDS = ("optimize", "verify", "threshold", "baseline", "sweep")
FORMATS = ("json", "csv")
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3

_TOP_KEYS = {"command", "rho", "epsilon", "dv_max", "lambda", "solver", "grid", "output", "workers"}
_SOLVER_KEYS = {"tol_feas", "tol_gap", "max_iter"}
_GRID_KEYS = {"N", "scheme"}
_OUTPUT_KEYS = {"path", "format"}


class ConfigError(Exception):
    """Invalid or unknown configuration; the message names the field."""


@dataclass
class RunConfig:
    command: str
    rho: Any = None
    epsilon: Any = None
    dv_max: int = 7
    lam: Any = None
    solver: dict = field(default_factory=dict)
    grid_n: Any = None
    scheme: str = "uniform"
    out_path: str | None = None
    out_format: str = "json"
    workers: int = 1


# ---------------------------------------------------------------------------
# config parsing


def _check_keys(obj: Any, allowed: set[str], where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown config key {where + '.' if where != 'config' else ''}{key}")
    return obj


def _number(value, name: str, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{name}: expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{name}: must be finite")
    return int(value) if integer else float(value)


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    _check_keys(data, _TOP_KEYS, "config")
    for key, allowed in (("solver", _SOLVER_KEYS), ("grid", _GRID_KEYS), ("output", _OUTPUT_KEYS)):
        if key in data:
            _check_keys(data[key], allowed, key)
    return data


def _parse_flag_value(text: str):
    """Flag values may be JSON (maps, lists, numbers) or bare strings like x^5."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_config(command: str, args: argparse.Namespace) -> RunConfig:
    data = load_config(args.config)
    if "command" in data and data["command"] != command:
        raise ConfigError(f"command: config says {data['command']!r} but {command!r} was invoked")
    solver = dict(data.get("solver", {}))
    grid = dict(data.get("grid", {}))
    output = dict(data.get("output", {}))
    cfg = RunConfig(command=command)
    cfg.rho = data.get("rho")
    cfg.epsilon = data.get("epsilon")
    cfg.dv_max = data.get("dv_max", 7)
    cfg.lam = data.get("lambda")
    cfg.workers = data.get("workers", 1)
    if args.rho is not None:
        cfg.rho = _parse_flag_value(args.rho)
    if args.eps is not None:
        cfg.epsilon = _parse_flag_value(args.eps)
    if args.dv_max is not None:
        cfg.dv_max = args.dv_max
    if getattr(args, "lam", None) is not None:
        cfg.lam = _parse_flag_value(args.lam)
    if getattr(args, "N", None) is not None:
        grid["N"] = _parse_flag_value(args.N)
    if getattr(args, "scheme", None) is not None:
        grid["scheme"] = args.scheme
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if args.out is not None:
        output["path"] = args.out
    if args.format is not None:
        output["format"] = args.format

    cfg.dv_max = _number(cfg.dv_max, "dv_max", integer=True)
    if cfg.dv_max < 2:
        raise ConfigError(f"dv_max: must be >= 2, got {cfg.dv_max}")
    cfg.workers = _number(cfg.workers, "workers", integer=True)
    if cfg.workers < 1:
        raise ConfigError("workers: must be >= 1")
    for key in _SOLVER_KEYS & solver.keys():
        solver[key] = _number(solver[key], f"solver.{key}", integer=key == "max_iter")
    cfg.solver = solver
    cfg.grid_n = grid.get("N")
    cfg.scheme = grid.get("scheme", "uniform")
    if cfg.scheme not in SCHEMES:
        raise ConfigError(f"grid.scheme: must be one of {SCHEMES}, got {cfg.scheme!r}")
    cfg.out_path = output.get("path")
    if cfg.out_path is not None and not isinstance(cfg.out_path, str):
        raise ConfigError("output.path: expected a string")
    cfg.out_format = output.get("format", "json")
    if cfg.out_format not in FORMATS:
        raise ConfigError(f"output.format: must be one of {FORMATS}, got {cfg.out_format!r}")
    if cfg.out_format == "csv" and command in ("verify", "threshold"):
        raise ConfigError(f"output.format: {command} writes json only")
    return cfg


def _rho(value, name: str = "rho") -> DegreeDistribution:
    if value is None:
        raise ConfigError(f"{name}: required")
    try:
        return DegreeDistribution.parse(value, kind="check")
    except InvalidInput as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def _lam(value) -> DegreeDistribution:
    if value is None:
        raise ConfigError("lambda: required")
    try:
        return DegreeDistribution.parse(value, kind="variable")
    except InvalidInput as exc:
        raise ConfigError(f"lambda: {exc}") from exc


def _eps(value, name: str = "epsilon") -> ChannelParam:
    value = _number(value, name) if value is not None else None
    if value is None:
        raise ConfigError(f"{name}: required")
    try:
        return ChannelParam(value)
    except InvalidInput as exc:
        raise ConfigError(f"{name}: {exc}") from exc


# ---------------------------------------------------------------------------
# result serialization


def _display(design: DesignResult) -> dict:
    return {
        "lambda": {k: round(v, 4) for k, v in design.lam.to_json().items()},
        "epsilon": round(design.epsilon.epsilon, 4),
        "threshold": round(design.threshold, 4) if math.isfinite(design.threshold) else None,
        "rate": round(design.rate, 4),
        "capacity": round(design.capacity, 4),
        "delta": round(design.delta, 4),
    }


def _finite(v: float):
    return v if math.isfinite(v) else None


def design_json(design: DesignResult, verification=None) -> dict:
    out = {
        "lambda": design.lam.to_json(),
        "rho": design.rho.to_json(),
        "epsilon": design.epsilon.epsilon,
        "rate": design.rate,
        "capacity": design.capacity,
        "delta": design.delta,
        "threshold": _finite(design.threshold),
        "objective": _finite(design.objective),
        "exactness": design.exactness,
        "solver_status": design.solver_status,
        "display": _display(design),
    }
    if design.certificate is not None:
        out["certificate"] = design.certificate.to_json()
        out["certificate_ok"] = design.certificate_ok
    for key in ("grid_size", "scheme", "max_violation"):
        if key in design.extras:
            out[key] = design.extras[key]
    if verification is not None:
        out["verification"] = verification.to_json()
    return out


def _dump_json(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _design_csv(rows: Sequence[tuple[DesignResult | None, str, str, float]], dv_max: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    degrees = range(2, dv_max + 1)
    w.writerow([f"lambda_{d}" for d in degrees] + ["eps", "eps_th", "rate", "capacity", "delta", "rho", "status"])
    for design, rho_text, status, eps in rows:
        if design is None:
            w.writerow([""] * len(degrees) + [repr(eps), "", "", "", "", rho_text, status])
            continue
        w.writerow([repr(design.lam[d]) for d in degrees]
                   + [repr(eps), repr(design.threshold), repr(design.rate), repr(design.capacity),
                      repr(design.delta), rho_text, status])
    return buf.getvalue()


def _emit(text: str, cfg: RunConfig, stdout) -> None:
    if cfg.out_path:
        with open(cfg.out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_optimize(cfg: RunConfig, stdout, stderr) -> int:
    rho, ch = _rho(cfg.rho), _eps(cfg.epsilon)
    try:
        design = optimize_design(rho, ch, cfg.dv_max, **cfg.solver)
    except NoDesign as exc:
        stderr.write(f"solver failure: {exc} (status {exc.status})\n")
        return EXIT_SOLVER
    report = verify_design(design, threshold=design.threshold)
    ok = report.passed and design.certificate_ok
    if cfg.out_format == "csv":
        _emit(_design_csv([(design, json.dumps(rho.to_json()), "verified" if ok else "unverified", ch.epsilon)],
                          cfg.dv_max), cfg, stdout)
    else:
        _emit(_dump_json({"command": "optimize", "dv_max": cfg.dv_max, **design_json(design, report)}), cfg, stdout)
    if not ok:
        stderr.write("verification failed: " + json.dumps(report.checks, sort_keys=True) + "\n")
        return EXIT_VERIFY
    return EXIT_OK


def cmd_verify(cfg: RunConfig, stdout, stderr) -> int:
    lam, rho, ch = _lam(cfg.lam), _rho(cfg.rho), _eps(cfg.epsilon)
    design = DesignResult.from_pair(lam, rho, ch, exactness="user-supplied")
    report = verify_design(design)
    design.threshold = report.threshold
    _emit(_dump_json({"command": "verify", **design_json(design, report)}), cfg, stdout)
    if not report.passed:
        stderr.write("verification failed: " + json.dumps(report.checks, sort_keys=True) + "\n")
        return EXIT_VERIFY
    return EXIT_OK


def cmd_threshold(cfg: RunConfig, stdout, stderr) -> int:
    lam, rho = _lam(cfg.lam), _rho(cfg.rho)
    th = bp_threshold(lam, rho)
    _emit(_dump_json({"command": "threshold", "lambda": lam.to_json(), "rho": rho.to_json(),
                      "threshold": th, "display": {"threshold": round(th, 4)}}), cfg, stdout)
    return EXIT_OK


def _grid_sizes(value) -> list[int]:
    if value is None:
        raise ConfigError("grid.N: required")
    values = value if isinstance(value, list) else [value]
    if not values:
        raise ConfigError("grid.N: empty list")
    out = [_number(v, "grid.N", integer=True) for v in values]
    if any(n < 1 for n in out):
        raise ConfigError("grid.N: sizes must be >= 1")
    return out


def cmd_baseline(cfg: RunConfig, stdout, stderr) -> int:
    rho, ch = _rho(cfg.rho), _eps(cfg.epsilon)
    sizes = _grid_sizes(cfg.grid_n)
    if len(sizes) > 1 or cfg.out_format == "csv":
        try:
            rows = grid_sweep(rho, ch, cfg.dv_max, sizes, scheme=cfg.scheme, workers=cfg.workers)
        except NoDesign as exc:
            stderr.write(f"solver failure: {exc}\n")
            return EXIT_SOLVER
        if cfg.out_format == "csv":
            buf = io.StringIO()
            write_sweep_csv(rows, buf)
            _emit(buf.getvalue(), cfg, stdout)
        else:
            _emit(_dump_json({"command": "baseline", "rows": [
                {"N": r.n, "objective": r.objective, "rate": r.rate, "max_violation": r.max_violation,
                 "lambda": r.lam.to_json()} for r in rows]}), cfg, stdout)
        return EXIT_OK
    try:
        design = discretized_optimize(rho, ch, cfg.dv_max, DiscretizationGrid.build(ch, sizes[0], cfg.scheme),
                                      **cfg.solver)
    except NoDesign as exc:
        stderr.write(f"solver failure: {exc}\n")
        return EXIT_SOLVER
    _emit(_dump_json({"command": "baseline", "dv_max": cfg.dv_max, **design_json(design)}), cfg, stdout)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, stdout, stderr) -> int:
    if cfg.grid_n is not None:
        return cmd_baseline(cfg, stdout, stderr)
    rhos = cfg.rho if isinstance(cfg.rho, list) else ([cfg.rho] if cfg.rho is not None else [])
    if not rhos:
        raise ConfigError("rho: sweep needs a non-empty list")
    eps_values = cfg.epsilon if isinstance(cfg.epsilon, list) else [cfg.epsilon] * len(rhos)
    if len(eps_values) != len(rhos):
        raise ConfigError(f"epsilon: {len(eps_values)} values for {len(rhos)} rho entries")
    jobs = [(_rho(r, f"rho[{i}]"), _eps(e, f"epsilon[{i}]"), r) for i, (r, e) in enumerate(zip(rhos, eps_values))]

    def run(job):
        rho, ch, text = job
        text = text if isinstance(text, str) else json.dumps(rho.to_json(), sort_keys=True)
        try:
            design = optimize_design(rho, ch, cfg.dv_max, **cfg.solver)
        except NoDesign as exc:
            return None, text, f"solver:{exc.status}", ch.epsilon
        report = verify_design(design, threshold=design.threshold)
        status = "verified" if report.passed and design.certificate_ok else "unverified"
        return design, text, status, ch.epsilon

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(run, jobs))
    else:
        rows = [run(j) for j in jobs]
    if cfg.out_format == "csv":
        _emit(_design_csv(rows, cfg.dv_max), cfg, stdout)
    else:
        _emit(_dump_json({"command": "sweep", "dv_max": cfg.dv_max, "rows": [
            {"rho_spec": text, "status": status, "epsilon": eps,
             **(design_json(d) if d is not None else {})} for d, text, status, eps in rows]}), cfg, stdout)
    return EXIT_OK if any(d is not None for d, *_ in rows) else EXIT_SOLVER


_DISPATCH = {"optimize": cmd_optimize, "verify": cmd_verify, "threshold": cmd_threshold,
             "baseline": cmd_baseline, "sweep": cmd_sweep}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ldpcsdp", description="Exact LDPC degree-distribution design for the BEC.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--rho", help='check distribution: "x^n", or a JSON map (sweep: JSON list)')
        p.add_argument("--eps", help="erasure probability (sweep: JSON list)")
        p.add_argument("--dv-max", dest="dv_max", type=int, help="largest variable degree")
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--format", choices=FORMATS)
        if name in ("verify", "threshold"):
            p.add_argument("--lambda", dest="lam", help="variable distribution as a JSON map")
        if name in ("baseline", "sweep"):
            p.add_argument("--N", help="grid size or JSON list of sizes")
            p.add_argument("--scheme", choices=SCHEMES)
        if name in ("sweep", "baseline"):
            p.add_argument("--workers", type=int)
    return parser


def main(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = make_parser().parse_args(argv)
        cfg = build_config(args.command, args)
        return _DISPATCH[cfg.command](cfg, stdout, stderr)
    except ConfigError as exc:
        stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
