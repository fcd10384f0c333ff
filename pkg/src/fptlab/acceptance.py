"""The acceptance battery: one function per exit criterion.

Each criterion returns a :class:`CriterionResult` with its own wall-clock
time; tolerances are fixed here and nowhere else.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import iteration, ledger, moduli, zoo
from .errors import InputError
from .space import SpaceDescriptor
from .reports import thread_count

GAMMAS = (0.5, 0.75, 0.9)
DELTAS = (0.5, 0.25, 0.1)
LAMBDAS = (0.1, 0.25, 0.5, 0.75, 0.9)
STARTS = 100
ATTEST_STEP = 0.01
ATTEST_LAMBDA = 0.5


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    seconds: float
    limit_seconds: float | None = None
    detail: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        within = self.limit_seconds is None or self.seconds < self.limit_seconds
        return self.passed and within

    def line(self) -> str:
        limit = f" (limit {self.limit_seconds:g}s)" if self.limit_seconds is not None else ""
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.number}. {self.title}: {self.seconds:.3f}s{limit}"

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "criterion": self.number,
            "title": self.title,
            "passed": self.ok,
            "limit_seconds": self.limit_seconds,
            "detail": self.detail,
        }
        if include_timing:
            out["timing"] = {"seconds": self.seconds, **self.timing}
        return out


def _timed(number, title, limit, fn) -> CriterionResult:
    t0 = time.perf_counter()
    passed, detail, *timing = fn()
    elapsed = time.perf_counter() - t0
    return CriterionResult(number, title, bool(passed), elapsed, limit, detail, timing[0] if timing else {})


def candidate_maps() -> list[zoo.MappingSpec]:
    """One-dimensional zoo maps plus two members of the threshold family;
    attestation decides which of them enter the soundness battery."""
    return [
        zoo.contraction_half(),
        zoo.identity(),
        zoo.reflection(),
        zoo.constant(),
        zoo.interval_threshold(),
        zoo.interval_threshold(special=0.5),
        zoo.interval_threshold(special=2.0),
    ]


def _validate_gammas(gammas):
    out = tuple(float(g) for g in gammas)
    for g in out:
        if not 0.0 < g < 1.0:
            raise InputError(f"gamma must lie in (0, 1), got {g}")
    return out


# ------------------------------------------------------------ criterion 1


def criterion_ar_bound() -> CriterionResult:
    def run():
        a = iteration.ar_bound(0.5, 0.5)
        b = iteration.ar_bound(0.25, 0.5)
        best = math.inf
        for _ in range(5):
            t0 = time.perf_counter()
            iteration.ar_bound(0.25, 0.5)
            best = min(best, time.perf_counter() - t0)
        ok = (a.M, a.L, a.n0) == (5, 64, 321) and (b.M, b.L, b.n0) == (9, 1024, 9217) and best < 1e-3
        return ok, {"first": a.to_dict(), "second": b.to_dict()}, {"best_call_seconds": best}

    return _timed(1, "ar_bound exactness", None, run)


# ------------------------------------------------------- criteria 2 and 3


@dataclass
class OrbitBattery:
    attested: list[str]
    skipped: list[str]
    cases: list[iteration.SoundnessCase]
    monotone_failures: list[dict]
    orbit_identity_worst: float
    orbit_count: int
    seconds: float


@lru_cache(maxsize=8)
def orbit_battery(seed: int = 0, gammas: tuple = GAMMAS, deltas: tuple = DELTAS) -> OrbitBattery:
    t0 = time.perf_counter()
    gammas = _validate_gammas(gammas)
    attested, skipped, cases, failures = [], [], [], []
    worst3, count = 0.0, 0
    for m in candidate_maps():
        report = zoo.check_condition_C_lambda(m, ATTEST_LAMBDA, m.body.grid(ATTEST_STEP))
        if report.verdict != "no_violation_found":
            skipped.append(m.name)
            continue
        attested.append(m.name)
        rng = ledger.rng_stream(seed, f"starts/{m.name}")
        starts = m.body.sample_array(STARTS, rng)
        for g in gammas:
            found, traces = iteration.bound_soundness(m, g, deltas, starts)
            cases.extend(found)
            for k, tr in enumerate(traces):
                mono = iteration.verify_residual_monotonicity(tr, report)
                if not mono.monotone:
                    failures.append({"map": m.name, "gamma": g, "start": k, **mono.to_dict()})
                worst3 = max(worst3, iteration.verify_identity3(tr, m))
                count += 1
    return OrbitBattery(attested, skipped, cases, failures, worst3, count, time.perf_counter() - t0)


def criterion_soundness(seed: int = 0, gammas: Sequence[float] = GAMMAS) -> CriterionResult:
    gammas = _validate_gammas(gammas)
    battery = orbit_battery(seed, gammas, DELTAS)
    failed = [c.to_dict() for c in battery.cases if not c.passed]
    methods = sorted({c.method for c in battery.cases})
    detail = {
        "attested_maps": battery.attested,
        "not_attested": battery.skipped,
        "cases": len(battery.cases),
        "failures": failed,
        "residual_methods": methods,
        "worst_ratio": max(c.worst_residual / c.threshold for c in battery.cases),
    }
    ok = bool(battery.attested) and not failed
    return CriterionResult(2, "asymptotic-regularity soundness", ok, battery.seconds, 60.0, detail)


def criterion_orbit_identities(seed: int = 0, gammas: Sequence[float] = GAMMAS) -> CriterionResult:
    gammas = _validate_gammas(gammas)
    t0 = time.perf_counter()
    battery = orbit_battery(seed, gammas, DELTAS)
    detail = {
        "orbits": battery.orbit_count,
        "monotonicity_failures": battery.monotone_failures,
        "orbit_identity_worst": battery.orbit_identity_worst,
    }
    ok = battery.orbit_count > 0 and not battery.monotone_failures and battery.orbit_identity_worst <= 1e-10
    return CriterionResult(3, "orbit identities", ok, time.perf_counter() - t0, None, detail)


# ------------------------------------------------------------ criterion 4


def _pair_rows(report: zoo.ConditionReport) -> np.ndarray:
    rows = np.array([np.concatenate([v.x, v.y]) for v in report.violations], dtype=float)
    return rows[np.lexsort(rows.T[::-1])]


def _bijective(base: zoo.ConditionReport, scaled: zoo.ConditionReport, r: float) -> bool:
    if len(base.violations) != len(scaled.violations):
        return False
    if not base.violations:
        return True
    a = _pair_rows(base)
    b = _pair_rows(scaled) * r
    return bool(np.allclose(a, b, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())))


def criterion_condition_checkers() -> CriterionResult:
    def run():
        m = zoo.interval_threshold()
        grid = m.body.grid(0.005)
        c_report = zoo.check_condition_C_lambda(m, 0.5, grid)
        ne_report = zoo.check_nonexpansive(m, grid)
        witness = ne_report.violations[0].to_dict() if ne_report.violations else None
        reports = {lam: zoo.check_condition_C_lambda(m, lam, grid) for lam in LAMBDAS}
        subsets = all(
            reports[hi].violation_pairs() <= reports[lo].violation_pairs()
            for lo, hi in zip(LAMBDAS, LAMBDAS[1:])
        )
        scale_ok = True
        scale_detail = []
        for r in (0.5, 3.0):
            s = zoo.rescale_map(m, r)
            for lam in LAMBDAS:
                sr = zoo.check_condition_C_lambda(s, lam, grid / r)
                same = sr.verdict == reports[lam].verdict and _bijective(reports[lam], sr, r)
                scale_ok &= same
                scale_detail.append({"r": r, "lambda": lam, "verdict": sr.verdict, "match": same})
        ok = (
            c_report.verdict == "no_violation_found"
            and ne_report.verdict == "violated"
            and subsets
            and scale_ok
        )
        return ok, {
            "condition_C": c_report.verdict,
            "nonexpansive": ne_report.verdict,
            "nonexpansive_witness": witness,
            "violation_counts": {str(k): len(v.violations) for k, v in reports.items()},
            "lambda_monotone_subsets": subsets,
            "scale_invariance": scale_detail,
        }

    return _timed(4, "condition checkers", None, run)


# ------------------------------------------------------------ criterion 5


MODEL_EXPONENTS = (1.5, 2.0, 3.0, 4.0, math.inf)


def criterion_geometry() -> CriterionResult:
    def run():
        j2 = moduli.james_constant(SpaceDescriptor(2, 2.0), 360).value
        j1 = moduli.james_constant(SpaceDescriptor(2, 1.0), 360).value
        jinf = moduli.james_constant(SpaceDescriptor(2, math.inf), 360).value
        r1 = moduli.R_modulus(2.0, 1.0).value
        r1_opt = moduli.R_modulus(2.0, 1.0, method="optimizer").value
        m_hat = moduli.M_coefficient(2.0).value
        mw_hat = moduli.RW_MW(2.0)[1].value
        via_b1 = max(
            moduli.r_via_b1_deviation(p, a) for p in MODEL_EXPONENTS for a in (0.0, 0.5, 1.0, 2.0, 4.0)
        )
        grid = np.asarray(moduli.DEFAULT_A_GRID)
        equivalence = {}
        for p in MODEL_EXPONENTS:
            rv = [moduli.R_modulus(p, a).value for a in grid]
            equivalence[str(p)] = moduli.coefficient_equivalence(grid, rv).to_dict()
        checks = {
            "J_l2": abs(j2 - 1.414214) <= 1e-3,
            "J_l1": j1 == 2.0,
            "J_linf": jinf == 2.0,
            "R_1_p2": abs(r1 - 1.224745) <= 1e-6,
            "R_optimizer": abs(r1_opt - r1) <= 1e-6,
            "M_p2": abs(m_hat - 1.732051) <= 1e-3,
            "MW_p2": abs(mw_hat - 1.414214) <= 1e-3,
            "r_via_b1": via_b1 <= 1e-6,
            "coefficient_equivalence": all(v["equivalent"] for v in equivalence.values()),
        }
        values = {"J_l2": j2, "J_l1": j1, "J_linf": jinf, "R_1_p2": r1, "R_optimizer": r1_opt,
                  "M_p2": m_hat, "MW_p2": mw_hat, "r_via_b1_max_deviation": via_b1}
        return all(checks.values()), {"checks": checks, "values": values, "coefficient_equivalence": equivalence}

    return _timed(5, "geometry closed form vs optimizer", 30.0, run)


# ------------------------------------------------------------ criterion 6


def criterion_ledger(seed: int = 0, samples: int = 10_000) -> CriterionResult:
    def run():
        sweeps = {}
        ok = True
        for name, ent in ledger.LEDGER.items():
            rep = ledger.sweep(ent, samples, seed)
            good = rep.verdict == "holds_on_samples" and rep.premise_hits >= samples and not rep.degenerate
            ok &= good
            sweeps[name] = {"draws": rep.samples, "premise_hits": rep.premise_hits,
                            "violations": len(rep.violations), "verdict": rep.verdict}
        identities = {}
        for eps in (0.01, 0.05, 0.1):
            clauses = {c.name: c for c in ledger._crease_clauses(eps, 1.0)}
            b1 = abs(clauses["b1_chain"].lhs - (2 - 8 * eps))
            d = abs(clauses["d_chain"].lhs - (1 + 8 * eps))
            identities[str(eps)] = {"b1_chain_error": b1, "d_chain_error": d}
            ok &= b1 <= 1e-12 and d <= 1e-12
        return ok, {"sweeps": sweeps, "chain_identities": identities}

    return _timed(6, "ledger sweeps", 10.0, run)


# ------------------------------------------------------------ criterion 7


DETERMINISM_CONFIGS = (
    {"command": "ar-bound", "delta": 0.5, "gamma": 0.5},
    {"command": "check-condition", "map": "interval_threshold", "lambda": 0.5, "step": 0.005},
    {"command": "iterate", "map": "interval_threshold", "gamma": 0.5, "steps": 50},
    {"command": "moduli", "p": 2.0},
    {"command": "ledger", "name": "all", "samples": 2000},
)


def criterion_determinism(seed: int = 0) -> CriterionResult:
    from .cli import execute

    def run():
        rows = []
        ok = True
        for cfg in DETERMINISM_CONFIGS:
            cfg = dict(cfg, seed=seed)
            first = execute(cfg)
            second = execute(cfg)
            same = first.files == second.files and first.exit_code == second.exit_code
            ok &= same
            rows.append({"command": cfg["command"], "identical": same, "files": sorted(first.files)})
        return ok, {"runs": rows}

    return _timed(7, "determinism", None, run)


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: criterion_ar_bound,
    2: criterion_soundness,
    3: criterion_orbit_identities,
    4: criterion_condition_checkers,
    5: criterion_geometry,
    6: criterion_ledger,
    7: criterion_determinism,
}


def run_all(seed: int = 0, gammas: Sequence[float] = GAMMAS, threads: int | None = None) -> list[CriterionResult]:
    """Run every criterion; results come back in criterion order."""
    gammas = _validate_gammas(gammas)
    jobs = {
        1: lambda: criterion_ar_bound(),
        2: lambda: criterion_soundness(seed, gammas),
        3: lambda: criterion_orbit_identities(seed, gammas),
        4: lambda: criterion_condition_checkers(),
        5: lambda: criterion_geometry(),
        6: lambda: criterion_ledger(seed),
        7: lambda: criterion_determinism(seed),
    }
    workers = threads or thread_count()
    if workers <= 1:
        return [jobs[k]() for k in sorted(jobs)]
    # criterion 3 reuses criterion 2's cached orbits, so build them first
    orbit_battery(seed, gammas, DELTAS)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {k: pool.submit(fn) for k, fn in jobs.items()}
        return [futures[k].result() for k in sorted(futures)]
