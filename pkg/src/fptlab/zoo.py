"""Concrete self-maps of convex bodies and grid checkers for
nonexpansiveness, condition (C_lambda) and condition (L) witnesses.

A grid check is one-sided evidence: ``no_violation_found`` holds at the
recorded grid resolution and says nothing between grid points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InputError, MappingError
from .space import (
    TAU,
    ConvexBody,
    SpaceDescriptor,
    Vector,
    as_points,
    lp_norm,
    window_max_distance,
)

# ---------------------------------------------------------------- rules


class Rule:
    kind = "rule"

    def apply(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def scaled(self, r: float) -> "Rule":
        """The rule of ``y -> T(r y) / r``."""
        return Rescaled(self, r)


@dataclass(eq=False)
class Affine(Rule):
    matrix: np.ndarray
    offset: np.ndarray
    kind = "affine"

    def __post_init__(self):
        self.matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        self.offset = np.atleast_1d(np.asarray(self.offset, dtype=float))

    def apply(self, pts):
        return pts @ self.matrix.T + self.offset

    def params(self):
        return {"matrix": self.matrix.tolist(), "offset": self.offset.tolist()}

    def scaled(self, r):
        return Affine(self.matrix, self.offset / r)


@dataclass(eq=False)
class IntervalThreshold(Rule):
    """Constant ``value`` everywhere except at ``point``, where it is ``special``."""

    value: np.ndarray
    point: np.ndarray
    special: np.ndarray
    point_tol: float = TAU
    kind = "interval_threshold"

    def __post_init__(self):
        self.value = np.atleast_1d(np.asarray(self.value, dtype=float))
        self.point = np.atleast_1d(np.asarray(self.point, dtype=float))
        self.special = np.atleast_1d(np.asarray(self.special, dtype=float))

    def apply(self, pts):
        hit = np.all(np.abs(pts - self.point) <= self.point_tol * max(1.0, np.abs(self.point).max()), axis=1)
        return np.where(hit[:, None], self.special, self.value)

    def params(self):
        return {
            "value": self.value.tolist(),
            "point": self.point.tolist(),
            "special": self.special.tolist(),
        }

    def scaled(self, r):
        return IntervalThreshold(self.value / r, self.point / r, self.special / r, self.point_tol)


@dataclass(eq=False)
class CoordinateShift(Rule):
    """``(x_1, ..., x_d) -> (x_d, x_1, ..., x_{d-1})`` (cyclic) or
    ``(0, x_1, ..., x_{d-1})`` (truncating)."""

    cyclic: bool = True
    kind = "coordinate_shift"

    def apply(self, pts):
        out = np.roll(pts, 1, axis=1)
        if not self.cyclic:
            out[:, 0] = 0.0
        return out

    def params(self):
        return {"cyclic": self.cyclic}

    def scaled(self, r):
        return self


@dataclass(eq=False)
class FiniteTable(Rule):
    """Tabulated map evaluated at the nearest tabulated input (lowest index on ties)."""

    inputs: np.ndarray
    outputs: np.ndarray
    p: float = 2.0
    kind = "finite_table"

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.outputs = np.asarray(self.outputs, dtype=float)
        if self.inputs.ndim == 1:
            self.inputs = self.inputs.reshape(-1, 1)
            self.outputs = self.outputs.reshape(-1, 1)
        if self.inputs.shape != self.outputs.shape or self.inputs.shape[0] == 0:
            raise InputError("table inputs and outputs must be nonempty and of equal shape")

    def apply(self, pts):
        dist = lp_norm(pts[:, None, :] - self.inputs[None, :, :], self.p)
        return self.outputs[np.argmin(dist, axis=1)]

    def params(self):
        return {"inputs": self.inputs.tolist(), "outputs": self.outputs.tolist()}

    def scaled(self, r):
        return FiniteTable(self.inputs / r, self.outputs / r, self.p)


@dataclass(eq=False)
class Closure(Rule):
    """User callable; ``vectorized`` callables receive the ``(n, d)`` array."""

    fn: Callable
    vectorized: bool = False
    kind = "closure"

    def apply(self, pts):
        if self.vectorized:
            return np.asarray(self.fn(pts), dtype=float).reshape(pts.shape)
        return np.stack([np.asarray(self.fn(row), dtype=float).reshape(-1) for row in pts])

    def params(self):
        return {"callable": getattr(self.fn, "__name__", repr(self.fn))}


@dataclass(eq=False)
class Averaged(Rule):
    """``(1 - gamma) x + gamma T x``."""

    base: "MappingSpec"
    gamma: float
    kind = "averaged"

    def apply(self, pts):
        return (1.0 - self.gamma) * pts + self.gamma * self.base.evaluate(pts)

    def params(self):
        return {"gamma": self.gamma, "base": self.base.to_dict()}


@dataclass(eq=False)
class Rescaled(Rule):
    """``y -> T(r y) / r`` for a base rule with no closed-form rescaling."""

    base: Rule
    r: float
    kind = "rescaled"

    def apply(self, pts):
        return self.base.apply(pts * self.r) / self.r

    def params(self):
        return {"r": self.r, "base": {"rule": self.base.kind, **self.base.params()}}

    def scaled(self, r):
        return Rescaled(self.base, self.r * r)


# --------------------------------------------------------------- mapping


class MappingSpec:
    """A named self-map of a convex body.

    Every evaluation verifies that images stay in the body (within a
    relative slack of ``TAU``) and raises :class:`MappingError` otherwise.
    """

    def __init__(self, name: str, body: ConvexBody, rule: Rule, check: bool = True):
        self.name = name
        self.body = body
        self.rule = rule
        self.check = check

    @property
    def space(self) -> SpaceDescriptor:
        return self.body.space

    def __repr__(self):
        return f"MappingSpec({self.name!r}, rule={self.rule.kind})"

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        """Images of the rows of an ``(n, dim)`` array."""
        out = self.rule.apply(pts)
        if self.check:
            inside = self.body.contains(out)
            if not np.all(inside):
                bad = int(np.argmin(inside))
                raise MappingError(
                    f"{self.name} maps {pts[bad].tolist()} to {out[bad].tolist()}, outside its body"
                )
        return out

    def __call__(self, x):
        if isinstance(x, Vector):
            return Vector(self.evaluate(self.space.as_array(x)[None, :])[0], self.space)
        arr = np.asarray(x, dtype=float)
        if arr.ndim <= 1:
            return self.evaluate(self.space.as_array(arr)[None, :])[0]
        return self.evaluate(as_points(arr, self.space))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "rule": self.rule.kind,
            "params": self.rule.params(),
            "body": self.body.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MappingSpec":
        if "zoo" in data:
            return zoo_map(data["zoo"], **data.get("params", {}))
        body = ConvexBody.from_dict(data["body"])
        kind = data["rule"]
        params = data.get("params", {})
        if kind == "affine":
            rule = Affine(params["matrix"], params["offset"])
        elif kind == "interval_threshold":
            rule = IntervalThreshold(params["value"], params["point"], params["special"])
        elif kind == "coordinate_shift":
            rule = CoordinateShift(bool(params.get("cyclic", True)))
        elif kind == "finite_table":
            rule = FiniteTable(params["inputs"], params["outputs"], body.space.p)
        else:
            raise InputError(f"rule kind {kind!r} cannot be built from JSON")
        return cls(data.get("name", kind), body, rule)


def rescale_map(mapping: MappingSpec, r: float) -> MappingSpec:
    """``S y = T(r y) / r`` on ``(1/r) * body``."""
    r = float(r)
    if not (r > 0 and math.isfinite(r)):
        raise InputError("rescaling factor must be a positive finite number")
    if r == 1.0:
        return mapping
    return MappingSpec(
        f"{mapping.name}_scaled{r:g}",
        mapping.body.scaled(1.0 / r),
        mapping.rule.scaled(r),
        mapping.check,
    )


# ------------------------------------------------------------------- zoo


def _interval_box(lo, hi, dim=1):
    return ConvexBody.box([lo] * dim, [hi] * dim)


def contraction_half() -> MappingSpec:
    return MappingSpec("contraction_half", _interval_box(-1, 1), Affine([[0.5]], [0.0]))


def identity(dim: int = 1) -> MappingSpec:
    return MappingSpec("identity", _interval_box(-1, 1, dim), Affine(np.eye(dim), np.zeros(dim)))


def reflection() -> MappingSpec:
    return MappingSpec("reflection", _interval_box(-1, 1), Affine([[-1.0]], [0.0]))


def constant(c: float = 0.25) -> MappingSpec:
    return MappingSpec("constant", _interval_box(-1, 1), Affine([[0.0]], [c]))


def interval_threshold(special: float = 1.0, upper: float = 3.0) -> MappingSpec:
    """``T x = 0`` on ``[0, upper)`` and ``T(upper) = special``.

    The default (``upper = 3``, ``special = 1``) satisfies condition (C)
    without being nonexpansive; varying ``special`` gives a discontinuous
    one-parameter family.
    """
    if not 0 <= special <= upper:
        raise InputError("special value must lie in [0, upper]")
    name = "interval_threshold" if (special, upper) == (1.0, 3.0) else f"interval_threshold_r{special:g}"
    return MappingSpec(
        name, _interval_box(0.0, upper), IntervalThreshold([0.0], [upper], [special])
    )


def cyclic_shift(dim: int = 3) -> MappingSpec:
    return MappingSpec("cyclic_shift", _interval_box(-1, 1, dim), CoordinateShift(True))


def truncating_shift(dim: int = 3) -> MappingSpec:
    return MappingSpec("truncating_shift", _interval_box(-1, 1, dim), CoordinateShift(False))


def rotation(angle: float = math.pi / 3) -> MappingSpec:
    c, s = math.cos(angle), math.sin(angle)
    return MappingSpec(
        "rotation", ConvexBody.ball([0.0, 0.0], 1.0, 2.0), Affine([[c, -s], [s, c]], [0.0, 0.0])
    )


ZOO: dict[str, Callable[..., MappingSpec]] = {
    "contraction_half": contraction_half,
    "identity": identity,
    "reflection": reflection,
    "constant": constant,
    "interval_threshold": interval_threshold,
    "cyclic_shift": cyclic_shift,
    "truncating_shift": truncating_shift,
    "rotation": rotation,
}


def zoo_map(name: str, **params) -> MappingSpec:
    try:
        factory = ZOO[name]
    except KeyError:
        raise InputError(f"unknown zoo map {name!r}; choose from {sorted(ZOO)}") from None
    return factory(**params)


# -------------------------------------------------------------- checking


@dataclass(frozen=True)
class Violation:
    x: tuple
    y: tuple
    lhs: float
    rhs: float

    def to_dict(self):
        return {"x": list(self.x), "y": list(self.y), "lhs": self.lhs, "rhs": self.rhs}


@dataclass
class ConditionReport:
    condition: str
    lam: float | None
    grid_resolution: float | None
    pairs_checked: int
    violations: list[Violation] = field(default_factory=list)
    map_name: str = ""
    grid_bounds: tuple | None = None

    @property
    def verdict(self) -> str:
        return "violated" if self.violations else "no_violation_found"

    def violation_pairs(self) -> set[tuple[tuple, tuple]]:
        return {(v.x, v.y) for v in self.violations}

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "lambda": self.lam,
            "map": self.map_name,
            "resolution": self.grid_resolution,
            "pairs_checked": self.pairs_checked,
            "violations": [v.to_dict() for v in self.violations],
            "verdict": self.verdict,
        }


def _grid_array(mapping: MappingSpec, grid) -> np.ndarray:
    pts = as_points(grid, mapping.space)
    if pts.shape[0] == 0:
        raise InputError("grid must contain at least one point")
    outside = ~mapping.body.contains(pts)
    if np.any(outside):
        raise InputError(f"grid point {pts[np.argmax(outside)].tolist()} is outside {mapping.name}'s body")
    return pts


def _row_chunks(n: int, budget: int = 2_000_000):
    size = max(1, budget // max(n, 1))
    for start in range(0, n, size):
        yield start, min(n, start + size)


def _pair_check(mapping, grid, lam):
    pts = _grid_array(mapping, grid)
    images = mapping.evaluate(pts)
    p = mapping.space.p
    n = pts.shape[0]
    moved = lp_norm(pts - images, p)
    hits_i, hits_j, lhs_all, rhs_all = [], [], [], []
    nearest = np.full(n, np.inf)
    for a, b in _row_chunks(n):
        dx = lp_norm(pts[a:b, None, :] - pts[None, :, :], p)
        dt = lp_norm(images[a:b, None, :] - images[None, :, :], p)
        off = np.ones_like(dx, dtype=bool)
        off[np.arange(b - a), np.arange(a, b)] = False
        nearest[a:b] = np.where(off, dx, np.inf).min(axis=1)
        bad = off & (dt > dx + TAU)
        if lam is not None:
            bad &= lam * moved[a:b, None] <= dx + TAU
        i, j = np.nonzero(bad)
        hits_i.append(i + a)
        hits_j.append(j)
        lhs_all.append(dt[i, j])
        rhs_all.append(dx[i, j])
    i = np.concatenate(hits_i)
    j = np.concatenate(hits_j)
    lhs = np.concatenate(lhs_all)
    rhs = np.concatenate(rhs_all)
    keys = np.hstack([pts[i], pts[j]])
    order = np.lexsort(keys.T[::-1]) if keys.size else np.arange(0)
    violations = [
        Violation(tuple(pts[i[k]].tolist()), tuple(pts[j[k]].tolist()), float(lhs[k]), float(rhs[k]))
        for k in order
    ]
    resolution = float(nearest.max()) if n > 1 else None
    bounds = (pts.min(axis=0).tolist(), pts.max(axis=0).tolist())
    return violations, resolution, n * (n - 1), bounds


def check_nonexpansive(mapping: MappingSpec, grid, resolution: float | None = None) -> ConditionReport:
    """Record every ordered grid pair with ``||Tx - Ty|| > ||x - y|| + tau``."""
    violations, res, pairs, bounds = _pair_check(mapping, grid, None)
    return ConditionReport(
        "nonexpansive", None, resolution if resolution is not None else res, pairs,
        violations, mapping.name, bounds,
    )


def check_condition_C_lambda(
    mapping: MappingSpec, lam: float, grid, resolution: float | None = None
) -> ConditionReport:
    """Check ``lam ||x - Tx|| <= ||x - y||  =>  ||Tx - Ty|| <= ||x - y||`` on all
    ordered grid pairs, with slack ``tau`` added to both sides' right-hand terms.

    ``lam = 1/2`` is condition (C).
    """
    lam = float(lam)
    if not 0.0 < lam < 1.0:
        raise InputError(f"lambda must lie in (0, 1), got {lam}")
    violations, res, pairs, bounds = _pair_check(mapping, grid, lam)
    return ConditionReport(
        "C" if lam == 0.5 else "C_lambda", lam, resolution if resolution is not None else res,
        pairs, violations, mapping.name, bounds,
    )


def check_condition_L_witness(
    mapping: MappingSpec, afps_tail, probes, tail_window: int = 16
) -> ConditionReport:
    """Clause (ii) of condition (L) against a single witness afps.

    For each probe ``x``: ``max_n ||x_n - Tx|| <= max_n ||x_n - x|| + tau``
    over the last ``tail_window`` terms. Clause (i) and the quantifier over
    all afps are not checked.
    """
    if int(tail_window) != tail_window or tail_window < 1:
        raise InputError("tail_window must be a positive integer")
    tail = as_points(afps_tail, mapping.space)
    if tail.shape[0] < tail_window:
        raise InputError(f"afps tail has {tail.shape[0]} terms, window needs {tail_window}")
    tail = tail[-int(tail_window):]
    pts = _grid_array(mapping, probes)
    images = mapping.evaluate(pts)
    p = mapping.space.p
    lhs = window_max_distance(tail, images, p)
    rhs = window_max_distance(tail, pts, p)
    bad = np.nonzero(lhs > rhs + TAU)[0]
    violations = [
        Violation(tuple(pts[k].tolist()), tuple(images[k].tolist()), float(lhs[k]), float(rhs[k]))
        for k in bad
    ]
    violations.sort(key=lambda v: v.x + v.y)
    return ConditionReport(
        "L_witness", None, None, pts.shape[0], violations, mapping.name,
        (pts.min(axis=0).tolist(), pts.max(axis=0).tolist()),
    )


def replay_violation(mapping: MappingSpec, violation: Violation) -> tuple[float, float]:
    """Re-evaluate ``(||Tx - Ty||, ||x - y||)`` for a stored pair violation."""
    x = np.asarray(violation.x, dtype=float)
    y = np.asarray(violation.y, dtype=float)
    tx, ty = mapping.evaluate(np.stack([x, y]))
    p = mapping.space.p
    return float(lp_norm(tx - ty, p)), float(lp_norm(x - y, p))
