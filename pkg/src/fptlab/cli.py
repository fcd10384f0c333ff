"""Command-line front end.

``execute`` is pure: it resolves a config, runs one command and returns the
exit code plus the rendered report files. ``main`` parses flags and writes
those files under ``--out`` (nothing is written without it).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, acceptance, iteration, ledger, moduli, zoo
from .errors import FptLabError, InputError
from .reports import dumps, envelope, thread_count
from .space import SpaceDescriptor, parse_exponent

COMMANDS = ("check-condition", "iterate", "ar-bound", "moduli", "ledger", "suite")
DEFAULT_STEP = {1: 0.005, 2: 0.05, 3: 0.25}
ORBIT_IDENTITY_TOL = 1e-10

DEFAULTS = {
    "check-condition": {"map": "interval_threshold", "map_params": {}, "condition": "C", "lambda": 0.5, "step": None},
    "iterate": {"map": "interval_threshold", "map_params": {}, "gamma": 0.5, "x0": None, "steps": 100, "delta": None},
    "ar-bound": {"delta": 0.5, "gamma": 0.5},
    "moduli": {"p": 2.0, "dim": 2, "eps": 0.1, "a": 1.0, "t_grid": None},
    "ledger": {"name": "all", "samples": 10_000, "params": None, "exact": False},
    "suite": {"gamma": list(acceptance.GAMMAS)},
}
COMMON = {"seed": 0, "record_timing": False}


@dataclass
class RunResult:
    exit_code: int
    files: dict[str, str] = field(default_factory=dict)
    summary: str = ""


# ----------------------------------------------------------------- config


def resolve_config(raw: dict) -> dict:
    """Fill defaults for the chosen command and reject unknown keys."""
    command = raw.get("command")
    if command not in COMMANDS:
        raise InputError(f"command must be one of {list(COMMANDS)}, got {command!r}")
    allowed = {**COMMON, **DEFAULTS[command]}
    unknown = sorted(set(raw) - set(allowed) - {"command"})
    if unknown:
        raise InputError(f"unknown config keys for {command}: {unknown}")
    cfg = {"command": command, **allowed, **{k: v for k, v in raw.items() if v is not None}}
    seed = cfg["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise InputError(f"seed must be a nonnegative integer, got {seed!r}")
    if "p" in cfg:
        p = parse_exponent(cfg["p"])
        cfg["p"] = "inf" if math.isinf(p) else p
    return cfg


def _number(cfg, key, kind=float):
    value = cfg[key]
    try:
        out = kind(value)
    except (TypeError, ValueError):
        raise InputError(f"{key} must be a number, got {value!r}") from None
    if isinstance(out, float) and not math.isfinite(out):
        raise InputError(f"{key} must be finite")
    return out


def _mapping(cfg) -> zoo.MappingSpec:
    ref = cfg["map"]
    if isinstance(ref, dict):
        return zoo.MappingSpec.from_dict(ref)
    return zoo.zoo_map(str(ref), **dict(cfg.get("map_params") or {}))


def _report(command, cfg, result, started) -> str:
    duration = time.perf_counter() - started if cfg["record_timing"] else None
    return dumps(envelope(command, cfg, result, duration))


# --------------------------------------------------------------- commands


def _check_condition(cfg, started) -> RunResult:
    m = _mapping(cfg)
    step = cfg["step"]
    if step is None:
        step = DEFAULT_STEP.get(m.space.dimension, 0.25)
        cfg["step"] = step
    step = float(step)
    if not step > 0:
        raise InputError("step must be positive")
    grid = m.body.grid(step)
    kind = cfg["condition"]
    if kind in ("C", "C_lambda"):
        report = zoo.check_condition_C_lambda(m, _number(cfg, "lambda"), grid)
    elif kind == "nonexpansive":
        report = zoo.check_nonexpansive(m, grid)
    else:
        raise InputError(f"condition must be C, C_lambda or nonexpansive, got {kind!r}")
    result = report.to_dict()
    result["grid_points"] = int(grid.shape[0])
    code = 1 if report.violations else 0
    summary = f"{m.name}: {report.condition} {report.verdict} ({len(report.violations)} violating pairs)"
    return RunResult(code, {"check-condition.json": _report("check-condition", cfg, result, started)}, summary)


def _iterate(cfg, started) -> RunResult:
    m = _mapping(cfg)
    gamma = _number(cfg, "gamma")
    steps = _number(cfg, "steps", int)
    if steps < 1:
        raise InputError("steps must be at least 1")
    if cfg["x0"] is None:
        x0 = m.body.sample_array(1, ledger.rng_stream(cfg["seed"], "iterate/x0"))[0]
    else:
        x0 = m.space.as_array(cfg["x0"])
    trace = iteration.orbit(m, gamma, x0, steps)
    result = {
        "map": m.name,
        "x0": [float(v) for v in trace.iterates[0]],
        "final": [float(v) for v in trace.iterates[-1]],
        "first_residual": float(trace.residuals[0]),
        "last_residual": float(trace.residuals[-1]),
        "stationary_from": trace.stationary_from,
        "orbit_identity_deviation": iteration.verify_identity3(trace, m),
    }
    ok = result["orbit_identity_deviation"] <= ORBIT_IDENTITY_TOL
    lam = min(0.5, gamma)
    attest = zoo.check_condition_C_lambda(m, lam, m.body.grid(DEFAULT_STEP.get(m.space.dimension, 0.25)))
    if attest.violations:
        result["monotonicity"] = {"status": "not_attested", "lambda": lam}
    else:
        mono = iteration.verify_residual_monotonicity(trace, attest)
        result["monotonicity"] = {"status": "checked", "lambda": lam, **mono.to_dict()}
        ok &= mono.monotone
    if cfg["delta"] is not None:
        cases, _ = iteration.bound_soundness(m, gamma, [_number(cfg, "delta")], x0[None, :])
        result["soundness"] = cases[0].to_dict()
        ok &= cases[0].passed
    files = {
        "iterate.json": _report("iterate", cfg, result, started),
        "orbit.csv": trace.to_csv(),
    }
    summary = f"{m.name}: {steps} steps, last residual {result['last_residual']:.3e}"
    return RunResult(0 if ok else 1, files, summary)


def _ar_bound(cfg, started) -> RunResult:
    b = iteration.ar_bound(_number(cfg, "delta"), _number(cfg, "gamma"))
    result = b.to_dict()
    summary = f"M={b.M} L={b.L} n0={b.n0}"
    return RunResult(0, {"ar-bound.json": _report("ar-bound", cfg, result, started)}, summary)


def _moduli(cfg, started) -> RunResult:
    p = parse_exponent(cfg["p"])
    dim = _number(cfg, "dim", int)
    eps = _number(cfg, "eps")
    a = _number(cfg, "a")
    t_grid = cfg["t_grid"] if cfg["t_grid"] is not None else [round(0.05 * k, 10) for k in range(1, 21)]
    space = SpaceDescriptor(dim, p)
    result = {
        "james": moduli.james_constant(space, seed=cfg["seed"]).to_dict(),
        "d": moduli.modulus_d(p, eps).to_dict(),
        "b1": moduli.modulus_b1(p, 1.0, eps).to_dict(),
        "b": moduli.modulus_b(p, 1.0, eps).to_dict(),
        "R": moduli.R_modulus(p, a).to_dict(),
        "M": moduli.M_coefficient(p).to_dict(),
        "nunc": moduli.nunc_witness(p, eps, t_grid).to_dict(),
    }
    rw, mw = moduli.RW_MW(p)
    result["MW"] = mw.to_dict()
    files = {}
    ok = True
    if result["R"]["value"] is not None:
        grid = np.asarray(moduli.DEFAULT_A_GRID)
        r_values = [moduli.R_modulus(p, v).value for v in grid]
        check = moduli.coefficient_equivalence(grid, r_values)
        r_opt = moduli.R_modulus(p, a, method="optimizer").value
        b1_opt = moduli.modulus_b1(p, 1.0, eps, method="optimizer").value
        result["cross_checks"] = {
            "r_via_b1_deviation": moduli.r_via_b1_deviation(p, a),
            "R_optimizer": r_opt,
            "R_optimizer_gap": abs(r_opt - result["R"]["value"]),
            "b1_optimizer": b1_opt,
            "b1_optimizer_gap": abs(b1_opt - result["b1"]["value"]),
            "coefficient_equivalence": check.to_dict(),
        }
        ok = check.equivalent
        lines = ["a,R,RW,M_ratio,MW_ratio"]
        for av, r, w in zip(grid, r_values, rw):
            lines.append(f"{av!r},{r!r},{w!r},{(1 + av) / r!r},{(1 + av) / w!r}")
        files["moduli_grid.csv"] = "\n".join(lines) + "\n"
    files["moduli.json"] = _report("moduli", cfg, result, started)
    summary = f"p={cfg['p']}: J={result['james']['value']} M={result['M']['value']} MW={result['MW']['value']}"
    return RunResult(0 if ok else 1, files, summary)


def _ledger(cfg, started) -> RunResult:
    name = cfg["name"]
    names = sorted(ledger.LEDGER) if name == "all" else [ledger.get_entailment(name).name]
    samples = _number(cfg, "samples", int)
    if samples < 1:
        raise InputError("samples must be at least 1")
    reports = []
    if cfg["params"] is not None:
        if name == "all":
            raise InputError("params need a single ledger name")
        params = dict(cfg["params"])
        if name == "thm21":
            reports.append(ledger.thm21_constants_check(exact=bool(cfg["exact"]), **params))
        else:
            reports.append(ledger.check_point(ledger.get_entailment(name), **params))
    else:
        for n in names:
            reports.append(ledger.sweep(ledger.LEDGER[n], samples, cfg["seed"]))
    verdicts = [r.verdict for r in reports]
    if "violated" in verdicts:
        code = 1
    elif "premise_never_satisfied" in verdicts or any(r.degenerate for r in reports):
        code = 2
    else:
        code = 0
    result = {"reports": [r.to_dict() for r in reports]}
    summary = ", ".join(f"{r.name}: {r.verdict}" for r in reports)
    return RunResult(code, {"ledger.json": _report("ledger", cfg, result, started)}, summary)


def _suite(cfg, started) -> RunResult:
    gammas = cfg["gamma"]
    gammas = tuple(gammas) if isinstance(gammas, (list, tuple)) else (gammas,)
    results = acceptance.run_all(cfg["seed"], gammas, thread_count())
    rows = [r.to_dict(include_timing=cfg["record_timing"]) for r in results]
    table = "\n".join(r.line() for r in results)
    code = 0 if all(r.ok for r in results) else 1
    return RunResult(code, {"suite.json": _report("suite", cfg, {"criteria": rows}, started)}, table)


HANDLERS = {
    "check-condition": _check_condition,
    "iterate": _iterate,
    "ar-bound": _ar_bound,
    "moduli": _moduli,
    "ledger": _ledger,
    "suite": _suite,
}


def execute(raw: dict) -> RunResult:
    """Run one command from a config mapping; never touches the filesystem."""
    started = time.perf_counter()
    try:
        cfg = resolve_config(dict(raw))
        return HANDLERS[cfg["command"]](cfg, started)
    except (FptLabError, ValueError, TypeError) as exc:
        return RunResult(2, {}, f"error: {exc}")


# ------------------------------------------------------------------ argv


def _json_arg(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        raise argparse.ArgumentTypeError(f"not valid JSON: {text!r}") from None


def _gamma_arg(text: str):
    parts = [float(t) for t in text.split(",")]
    return parts if len(parts) > 1 else parts[0]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fpt-lab", description="Fixed-point lab checks and experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="JSON file with config values")
        sp.add_argument("--out", type=Path, help="directory for report files")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--json", action="store_true", help="print the JSON report instead of a summary")
        sp.add_argument("--record-timing", action="store_true", default=None,
                        help="embed wall-clock duration (reports are then no longer byte-stable)")
        if name in ("check-condition", "iterate"):
            sp.add_argument("--map")
            sp.add_argument("--map-params", type=_json_arg, dest="map_params")
        if name == "check-condition":
            sp.add_argument("--condition", choices=["C", "C_lambda", "nonexpansive"])
            sp.add_argument("--lambda", type=float, dest="lambda")
            sp.add_argument("--step", type=float)
        if name in ("iterate", "ar-bound"):
            sp.add_argument("--gamma", type=float)
            sp.add_argument("--delta", type=float)
        if name == "iterate":
            sp.add_argument("--x0", type=_json_arg)
            sp.add_argument("--steps", type=int)
        if name == "moduli":
            sp.add_argument("--p")
            sp.add_argument("--dim", type=int)
            sp.add_argument("--eps", type=float)
            sp.add_argument("--a", type=float)
        if name == "ledger":
            sp.add_argument("--name")
            sp.add_argument("--samples", type=int)
            sp.add_argument("--params", type=_json_arg)
            sp.add_argument("--exact", action="store_true", default=None)
        if name == "suite":
            sp.add_argument("--gamma", type=_gamma_arg, help="one value or a comma-separated list")
    return parser


def config_from_args(args: argparse.Namespace) -> dict:
    raw = {}
    if args.config is not None:
        try:
            raw = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise InputError("config file must hold a JSON object")
    skip = {"config", "out", "json"}
    for key, value in vars(args).items():
        if key not in skip and value is not None:
            raw[key.replace("-", "_")] = value
    raw["command"] = args.command
    return raw


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        raw = config_from_args(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = execute(raw)
    if result.exit_code == 2 and not result.files:
        print(result.summary, file=sys.stderr)
        return 2
    if args.json:
        for name in sorted(result.files):
            if name.endswith(".json"):
                sys.stdout.write(result.files[name])
    else:
        print(result.summary)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        for name, text in sorted(result.files.items()):
            (args.out / name).write_text(text)
    return result.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
