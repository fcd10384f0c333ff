"""Averaged (Krasnoselskii) iteration ``T_gamma = (1 - gamma) I + gamma T``:
orbits with residual tracking, checks of the unconditional orbit identities,
and the explicit uniform asymptotic-regularity bound.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InputError, PreconditionError
from .space import TAU, Vector, as_points, lp_norm
from .zoo import Averaged, ConditionReport, MappingSpec

MONOTONE_SLACK = 1e-12
DEFAULT_STEP_CAP = 20_000


def _gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise InputError(f"gamma must lie in (0, 1), got {gamma}")
    return gamma


def averaged_map(mapping: MappingSpec, gamma: float) -> MappingSpec:
    """``x -> (1 - gamma) x + gamma T x`` on the same body."""
    gamma = _gamma(gamma)
    return MappingSpec(f"{mapping.name}_avg{gamma:g}", mapping.body, Averaged(mapping, gamma), mapping.check)


# ------------------------------------------------------------------ bound


@dataclass(frozen=True)
class ARBound:
    delta: float
    gamma: float
    M: int
    L: int
    n0: int

    def to_dict(self) -> dict:
        return {"delta": self.delta, "gamma": self.gamma, "M": self.M, "L": self.L, "n0": self.n0}

    @property
    def width(self) -> Fraction:
        """Interval width ``gamma (1 - gamma)^M`` of the pigeonhole cover."""
        g = as_fraction(self.gamma)
        return g * (1 - g) ** self.M


def as_fraction(x: float) -> Fraction:
    """Exact rational read off the shortest decimal repr, so 0.1 means 1/10."""
    return Fraction(repr(float(x)))


def ar_bound(delta: float, gamma: float) -> ARBound:
    """Constructive ``n0(delta, gamma)`` with ``M = floor(2/delta) + 1``,
    ``L = ceil(1 / (gamma (1 - gamma)^M))`` and ``n0 = M L + 1``.

    ``delta`` is relative to the diameter. For ``delta > 1`` every residual is
    already below ``delta * diam`` and all constants are 0.
    """
    gamma = _gamma(gamma)
    delta = float(delta)
    if not (delta > 0 and math.isfinite(delta)):
        raise InputError(f"delta must be positive, got {delta}")
    if delta > 1:
        return ARBound(delta, gamma, 0, 0, 0)
    d = as_fraction(delta)
    g = as_fraction(gamma)
    m = math.floor(2 / d) + 1
    big_l = math.ceil(1 / (g * (1 - g) ** m))
    return ARBound(delta, gamma, m, big_l, m * big_l + 1)


# ------------------------------------------------------------------ orbits


@dataclass(frozen=True, eq=False)
class OrbitTrace:
    """``x_i = T_gamma^i x0`` for ``i = 0..steps``.

    ``residuals[i] = ||x_{i+1} - x_i||`` and ``t_residuals[i] = ||T x_i - x_i||``.
    ``stationary_from`` is the first ``i`` with ``x_{i+1} == x_i`` bitwise; the
    floating-point orbit is constant from there on.
    """

    gamma: float
    x0: Vector
    iterates: np.ndarray
    residuals: np.ndarray
    t_residuals: np.ndarray
    map_name: str
    stationary_from: int | None = None

    def __post_init__(self):
        for arr in (self.iterates, self.residuals, self.t_residuals):
            arr.setflags(write=False)

    @property
    def steps(self) -> int:
        return self.iterates.shape[0] - 1

    def vectors(self) -> list[Vector]:
        return [Vector(row, self.x0.space) for row in self.iterates]

    def residual_at(self, n: int) -> tuple[float, str]:
        """``||x_{n+1} - x_n||`` and how it was obtained.

        ``computed``: inside the trace. ``stationary``: the orbit reached a
        bitwise fixed point earlier, so the value is exactly 0.
        ``periodic``: the trace ends in a bitwise 2-cycle, so every later
        residual equals the last one exactly.
        ``monotone_bound``: past the trace; the last computed residual, an
        upper bound whenever residuals are nonincreasing.
        """
        if n < 0:
            raise InputError("step index must be nonnegative")
        if n < self.residuals.shape[0]:
            return float(self.residuals[n]), "computed"
        if self.stationary_from is not None and n >= self.stationary_from:
            return 0.0, "stationary"
        xs = self.iterates
        if xs.shape[0] >= 3 and np.array_equal(xs[-1], xs[-3]):
            return float(self.residuals[-1]), "periodic"
        return float(self.residuals[-1]), "monotone_bound"

    def to_csv(self) -> str:
        buf = io.StringIO()
        write_orbit_csv(self, buf)
        return buf.getvalue()


def orbits(
    mapping: MappingSpec,
    gamma: float,
    starts,
    steps: int,
    stop_when_stationary: bool = False,
) -> list[OrbitTrace]:
    """Orbits of ``T_gamma`` from several starts, advanced together.

    With ``stop_when_stationary`` the loop ends once every orbit has hit a
    bitwise fixed point, so traces may be shorter than ``steps``.
    """
    gamma = _gamma(gamma)
    if int(steps) != steps or steps < 1:
        raise InputError("steps must be a positive integer")
    steps = int(steps)
    space = mapping.space
    x = as_points(starts, space).copy()
    if not np.all(mapping.body.contains(x)):
        raise InputError("orbit start lies outside the map's body")
    k, d = x.shape
    iterates = np.empty((steps + 1, k, d))
    t_res = np.empty((steps + 1, k))
    iterates[0] = x
    stationary = np.full(k, -1)
    last = steps
    for i in range(steps + 1):
        tx = mapping.evaluate(x)
        t_res[i] = lp_norm(tx - x, space.p)
        if i == steps:
            break
        nxt = (1.0 - gamma) * x + gamma * tx
        same = np.all(nxt == x, axis=1)
        stationary[(stationary < 0) & same] = i
        iterates[i + 1] = nxt
        x = nxt
        if stop_when_stationary and np.all(stationary >= 0):
            last = i + 1
            tx = mapping.evaluate(x)
            t_res[last] = lp_norm(tx - x, space.p)
            break
    iterates = iterates[: last + 1]
    t_res = t_res[: last + 1]
    residuals = lp_norm(np.diff(iterates, axis=0), space.p)
    traces = []
    for j in range(k):
        traces.append(
            OrbitTrace(
                gamma,
                Vector(iterates[0, j], space),
                np.ascontiguousarray(iterates[:, j, :]),
                np.ascontiguousarray(residuals[:, j]),
                np.ascontiguousarray(t_res[:, j]),
                mapping.name,
                int(stationary[j]) if stationary[j] >= 0 else None,
            )
        )
    return traces


def orbit(mapping: MappingSpec, gamma: float, x0, steps: int) -> OrbitTrace:
    """The first ``steps`` iterates of ``T_gamma`` from ``x0``."""
    start = mapping.space.as_array(x0)[None, :]
    return orbits(mapping, gamma, start, steps)[0]


@dataclass(frozen=True)
class MonotonicityReport:
    monotone: bool
    first_failure: int | None
    max_increase: float
    checked: int

    def to_dict(self) -> dict:
        return {
            "monotone": self.monotone,
            "first_failure": self.first_failure,
            "max_increase": self.max_increase,
            "checked": self.checked,
        }


def verify_residual_monotonicity(trace: OrbitTrace, cond_report: ConditionReport) -> MonotonicityReport:
    """Check ``residuals[i+1] <= residuals[i] + 1e-12`` along the trace.

    Requires a clean (C_lambda) or nonexpansiveness report for the same map,
    with ``lambda <= gamma`` and a grid whose bounding box covers the orbit.
    """
    if cond_report.condition not in {"C", "C_lambda", "nonexpansive"}:
        raise PreconditionError(f"a {cond_report.condition} report does not attest (C_lambda)")
    if cond_report.verdict != "no_violation_found":
        raise PreconditionError("the attached condition report found violations")
    lam = 0.0 if cond_report.condition == "nonexpansive" else cond_report.lam
    if lam > trace.gamma:
        raise PreconditionError(f"attested lambda={lam} exceeds gamma={trace.gamma}")
    if cond_report.map_name != trace.map_name:
        raise PreconditionError(
            f"report is for {cond_report.map_name!r}, trace is for {trace.map_name!r}"
        )
    if cond_report.grid_bounds is not None:
        lo, hi = (np.asarray(b, dtype=float) for b in cond_report.grid_bounds)
        pad = (cond_report.grid_resolution or 0.0) + TAU
        if np.any(trace.iterates < lo - pad) or np.any(trace.iterates > hi + pad):
            raise PreconditionError("orbit leaves the region covered by the attested grid")
    res = trace.residuals
    if res.shape[0] < 2:
        return MonotonicityReport(True, None, 0.0, int(res.shape[0]))
    rise = res[1:] - res[:-1]
    bad = np.nonzero(rise > MONOTONE_SLACK)[0]
    first = int(bad[0]) + 1 if bad.size else None
    return MonotonicityReport(first is None, first, float(max(rise.max(), 0.0)), int(res.shape[0]))


def verify_identity3(trace: OrbitTrace, mapping: MappingSpec) -> float:
    """Max over ``i`` of
    ``| ||(x_{i+1} - x_i)/gamma - (1 - gamma)/gamma (x_i - x_{i-1})|| - ||T x_i - T x_{i-1}|| |``.
    """
    if mapping.name != trace.map_name:
        raise InputError(f"trace was produced by {trace.map_name!r}, not {mapping.name!r}")
    g = trace.gamma
    xs = trace.iterates
    p = mapping.space.p
    tx = mapping.evaluate(xs)
    # the trace must actually be an orbit of this map
    rebuilt = (1.0 - g) * xs[:-1] + g * tx[:-1]
    scale = max(1.0, float(np.abs(xs).max()))
    if np.any(np.abs(rebuilt - xs[1:]) > 1e-9 * scale):
        raise InputError("trace is not an orbit of the given map")
    if xs.shape[0] < 3:
        return 0.0
    forward = xs[2:] - xs[1:-1]
    backward = xs[1:-1] - xs[:-2]
    lhs = lp_norm(forward / g - (1.0 - g) / g * backward, p)
    rhs = lp_norm(tx[1:-1] - tx[:-2], p)
    return float(np.abs(lhs - rhs).max())


def afps_extract(trace: OrbitTrace, tol: float) -> list[Vector]:
    """Iterates with ``||T x_i - x_i|| <= tol``."""
    keep = np.nonzero(trace.t_residuals <= tol)[0]
    return [Vector(trace.iterates[i], trace.x0.space) for i in keep]


def write_orbit_csv(trace: OrbitTrace, stream) -> None:
    """Columns: step, x0..x{d-1}, residual, t_residual (residual blank on the last row)."""
    d = trace.iterates.shape[1]
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["step", *[f"x{k}" for k in range(d)], "residual", "t_residual"])
    for i, row in enumerate(trace.iterates):
        res = repr(float(trace.residuals[i])) if i < trace.residuals.shape[0] else ""
        writer.writerow([i, *[repr(float(c)) for c in row], res, repr(float(trace.t_residuals[i]))])


# -------------------------------------------------------- bound soundness


@dataclass(frozen=True)
class SoundnessCase:
    map_name: str
    gamma: float
    delta: float
    n0: int
    threshold: float
    worst_residual: float
    method: str

    @property
    def passed(self) -> bool:
        return self.worst_residual < self.threshold

    def to_dict(self) -> dict:
        return {
            "map": self.map_name,
            "gamma": self.gamma,
            "delta": self.delta,
            "n0": self.n0,
            "threshold": self.threshold,
            "worst_residual": self.worst_residual,
            "method": self.method,
            "passed": self.passed,
        }


def bound_soundness(
    mapping: MappingSpec,
    gamma: float,
    deltas: Sequence[float],
    starts,
    step_cap: int = DEFAULT_STEP_CAP,
) -> tuple[list[SoundnessCase], list[OrbitTrace]]:
    """Compare the residual at ``n0(delta, gamma)`` with ``delta * diam``.

    Orbits run to ``min(max n0, step_cap)`` and stop early once every orbit is
    stationary. A residual beyond the computed range is reported with its
    method (see :meth:`OrbitTrace.residual_at`).
    """
    bounds = [ar_bound(d, gamma) for d in deltas]
    horizon = max(1, min(step_cap, max(b.n0 for b in bounds) + 1))
    traces = orbits(mapping, gamma, starts, horizon, stop_when_stationary=True)
    diam = mapping.body.diameter()
    cases = []
    # the reported method is the least direct one used by any start
    rank = {"computed": 0, "stationary": 1, "periodic": 2, "monotone_bound": 3}
    for b in bounds:
        worst, method = -math.inf, "computed"
        for tr in traces:
            value, how = tr.residual_at(b.n0)
            worst = max(worst, value)
            if rank[how] > rank[method]:
                method = how
        cases.append(SoundnessCase(mapping.name, gamma, b.delta, b.n0, b.delta * diam, worst, method))
    return cases, traces
