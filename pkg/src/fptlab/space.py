"""Finite-dimensional normed spaces: l_p and sup norms, convex bodies,
norming functionals and the finite-window asymptotic radius.

A space is described by its dimension and an exponent ``p``; ``p = inf``
selects the sup norm. Points are :class:`Vector` values, but every
operation also accepts plain array-likes of the right length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import InputError

TAU = 1e-12
DEFAULT_TAIL_WINDOW = 16


def lp_norm(arr, p: float, axis: int = -1) -> np.ndarray:
    """Row-wise l_p norm of ``arr`` (sup norm when ``p`` is infinite)."""
    a = np.abs(np.asarray(arr, dtype=float))
    if a.shape[axis] == 0:
        return np.zeros(np.delete(a.shape, axis))
    if a.shape[axis] == 1:
        return np.squeeze(a, axis=axis)
    if math.isinf(p):
        return a.max(axis=axis)
    if p == 1:
        return a.sum(axis=axis)
    # scale by the max entry so powers neither overflow nor underflow
    peak = a.max(axis=axis, keepdims=True)
    safe = np.where(peak > 0, peak, 1.0)
    u = a / safe
    total = np.sqrt((u * u).sum(axis=axis)) if p == 2 else (u**p).sum(axis=axis) ** (1.0 / p)
    out = np.squeeze(safe, axis=axis) * total
    return np.where(np.squeeze(peak, axis=axis) > 0, out, 0.0)


def conjugate_exponent(p: float) -> float:
    if math.isinf(p):
        return 1.0
    if p == 1:
        return math.inf
    return p / (p - 1.0)


def parse_exponent(value) -> float:
    """Accept 2, "2", "inf", "sup" and the like; return a float exponent."""
    if isinstance(value, str):
        text = value.strip().lower()
        if text in {"inf", "infinity", "sup", "max", "sup_norm"}:
            return math.inf
        value = float(text)
    p = float(value)
    if math.isnan(p) or p < 1:
        raise InputError(f"norm exponent must be >= 1, got {value!r}")
    return p


@dataclass(frozen=True)
class SpaceDescriptor:
    dimension: int
    p: float = 2.0

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise InputError(f"dimension must be a positive integer, got {self.dimension!r}")
        object.__setattr__(self, "dimension", int(self.dimension))
        object.__setattr__(self, "p", parse_exponent(self.p))

    @property
    def norm_kind(self) -> str:
        return "sup_norm" if math.isinf(self.p) else "p_norm"

    @property
    def dual_exponent(self) -> float:
        return conjugate_exponent(self.p)

    def norms(self, arr) -> np.ndarray:
        return lp_norm(arr, self.p)

    def as_array(self, v) -> np.ndarray:
        """Coordinates of ``v`` as a float array, validating the dimension."""
        if isinstance(v, Vector):
            if v.space.dimension != self.dimension or v.space.p != self.p:
                raise InputError(f"vector lives in {v.space}, expected {self}")
            return v.coords
        arr = np.asarray(v, dtype=float).reshape(-1)
        if arr.shape[0] != self.dimension:
            raise InputError(f"expected {self.dimension} coordinates, got {arr.shape[0]}")
        return arr

    def vector(self, coords) -> "Vector":
        return Vector(coords, self)

    def to_dict(self) -> dict:
        return {
            "kind": self.norm_kind,
            "p": None if math.isinf(self.p) else self.p,
            "dimension": self.dimension,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpaceDescriptor":
        kind = data.get("kind", "p_norm")
        if kind == "sup_norm":
            p = math.inf
        elif kind == "p_norm":
            p = data.get("p", 2.0)
            if p is None:
                raise InputError("p_norm space needs an exponent p")
        else:
            raise InputError(f"unknown norm kind {kind!r}")
        return cls(int(data["dimension"]), p)


@dataclass(frozen=True, eq=False)
class Vector:
    coords: np.ndarray
    space: SpaceDescriptor

    def __post_init__(self):
        arr = np.array(self.coords, dtype=float).reshape(-1)
        if arr.shape[0] != self.space.dimension:
            raise InputError(
                f"expected {self.space.dimension} coordinates, got {arr.shape[0]}"
            )
        if not np.all(np.isfinite(arr)):
            raise InputError("vector coordinates must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    def __eq__(self, other):
        if not isinstance(other, Vector):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash((self.space, self.coords.tobytes()))

    def __repr__(self):
        return f"Vector({self.coords.tolist()}, p={self.space.p})"

    def __len__(self):
        return self.space.dimension

    def _other(self, other):
        return self.space.as_array(other)

    def __add__(self, other):
        return Vector(self.coords + self._other(other), self.space)

    def __sub__(self, other):
        return Vector(self.coords - self._other(other), self.space)

    def __mul__(self, scalar: float):
        return Vector(self.coords * float(scalar), self.space)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float):
        return Vector(self.coords / float(scalar), self.space)

    def __neg__(self):
        return Vector(-self.coords, self.space)

    def norm(self) -> float:
        return float(lp_norm(self.coords, self.space.p))

    def tolist(self) -> list[float]:
        return self.coords.tolist()


def norm(space: SpaceDescriptor, v) -> float:
    """``(sum |v_i|^p)^(1/p)``, or ``max |v_i|`` for the sup norm."""
    return float(lp_norm(space.as_array(v), space.p))


@dataclass(frozen=True, eq=False)
class Functional:
    """A dual vector acting by the coordinate pairing."""

    coeffs: np.ndarray
    space: SpaceDescriptor

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=float).reshape(-1)
        if arr.shape[0] != self.space.dimension:
            raise InputError("functional length does not match the space dimension")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    def __call__(self, v) -> float:
        return float(np.dot(self.coeffs, self.space.as_array(v)))

    def dual_norm(self) -> float:
        return float(lp_norm(self.coeffs, self.space.dual_exponent))


def norming_functional(space: SpaceDescriptor, v) -> Functional:
    """Return ``f`` with ``f(v) = ||v||`` and dual norm 1.

    Smooth exponents use the duality map ``sign(v_i) (|v_i|/||v||)^(p-1)``.
    For ``p = 1`` zero coordinates get coefficient 0; for the sup norm all
    mass goes to the lowest index attaining ``max |v_i|``.
    """
    arr = space.as_array(v)
    size = float(lp_norm(arr, space.p))
    if size == 0.0:
        raise InputError("the zero vector has no norming functional")
    if math.isinf(space.p):
        coeffs = np.zeros_like(arr)
        i = int(np.argmax(np.abs(arr)))
        coeffs[i] = np.sign(arr[i])
    elif space.p == 1:
        coeffs = np.sign(arr)
    else:
        coeffs = np.sign(arr) * (np.abs(arr) / size) ** (space.p - 1.0)
    return Functional(coeffs, space)


class ConvexBody:
    """A bounded convex set: coordinate box, norm ball, or hull of points."""

    KINDS = ("box", "ball", "hull")

    def __init__(self, kind: str, space: SpaceDescriptor, **params):
        if kind not in self.KINDS:
            raise InputError(f"unknown body kind {kind!r}")
        self.kind = kind
        self.space = space
        d = space.dimension
        if kind == "box":
            lower = np.array(params["lower"], dtype=float).reshape(-1)
            upper = np.array(params["upper"], dtype=float).reshape(-1)
            if lower.shape != (d,) or upper.shape != (d,):
                raise InputError("box bounds must match the space dimension")
            if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
                raise InputError("box bounds must be finite")
            if np.any(lower > upper):
                raise InputError("box lower bound exceeds upper bound")
            self.lower, self.upper = lower, upper
        elif kind == "ball":
            self.center = space.as_array(params["center"]).copy()
            self.radius = float(params["radius"])
            if not (self.radius >= 0 and math.isfinite(self.radius)):
                raise InputError("ball radius must be finite and nonnegative")
        else:
            points = np.array(params["points"], dtype=float)
            if points.ndim == 1:
                points = points.reshape(-1, d)
            if points.shape[0] == 0 or points.shape[1] != d:
                raise InputError("hull needs at least one point of the space dimension")
            if not np.all(np.isfinite(points)):
                raise InputError("hull points must be finite")
            self.points = points

    @classmethod
    def box(cls, lower, upper, p: float = 2.0) -> "ConvexBody":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        return cls("box", SpaceDescriptor(lower.shape[0], p), lower=lower, upper=upper)

    @classmethod
    def interval(cls, lo: float, hi: float) -> "ConvexBody":
        return cls.box([lo], [hi])

    @classmethod
    def ball(cls, center, radius: float, p: float = 2.0) -> "ConvexBody":
        center = np.atleast_1d(np.asarray(center, dtype=float))
        return cls("ball", SpaceDescriptor(center.shape[0], p), center=center, radius=radius)

    @classmethod
    def hull(cls, points, p: float = 2.0) -> "ConvexBody":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return cls("hull", SpaceDescriptor(points.shape[1], p), points=points)

    def __repr__(self):
        return f"ConvexBody({self.to_dict()})"

    def __eq__(self, other):
        return isinstance(other, ConvexBody) and self.to_dict() == other.to_dict()

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "box":
            return self.lower.copy(), self.upper.copy()
        if self.kind == "ball":
            # |x_i| <= ||x||_p for every p >= 1
            return self.center - self.radius, self.center + self.radius
        return self.points.min(axis=0), self.points.max(axis=0)

    def contains(self, x, tol: float = TAU):
        """Membership of one point (returns bool) or of each row (bool array)."""
        arr = np.asarray(x.coords if isinstance(x, Vector) else x, dtype=float)
        single = arr.ndim == 1
        pts = arr.reshape(-1, self.space.dimension)
        if self.kind == "box":
            scale = tol * np.maximum(1.0, np.maximum(np.abs(self.lower), np.abs(self.upper)))
            ok = np.all((pts >= self.lower - scale) & (pts <= self.upper + scale), axis=1)
        elif self.kind == "ball":
            dist = lp_norm(pts - self.center, self.space.p)
            ok = dist <= self.radius + tol * max(1.0, self.radius)
        else:
            ok = np.array([self._hull_contains(row, tol) for row in pts], dtype=bool)
        return bool(ok[0]) if single else ok

    def _hull_contains(self, x: np.ndarray, tol: float) -> bool:
        pts = self.points
        if pts.shape[0] == 1:
            return bool(np.all(np.abs(pts[0] - x) <= tol * max(1.0, np.abs(x).max())))
        lo, hi = self.bounding_box()
        if np.any(x < lo - tol) or np.any(x > hi + tol):
            return False
        # feasibility LP: weights >= 0, sum 1, combination within tol of x
        n, d = pts.shape
        slack = tol * max(1.0, float(np.abs(pts).max()))
        a_ub = np.vstack([pts.T, -pts.T])
        b_ub = np.concatenate([x + slack, -x + slack])
        res = linprog(
            np.zeros(n),
            A_ub=a_ub,
            b_ub=b_ub,
            A_eq=np.ones((1, n)),
            b_eq=[1.0],
            bounds=[(0, None)] * n,
            method="highs",
        )
        return bool(res.status == 0)

    def sample_array(self, count: int, rng: np.random.Generator) -> np.ndarray:
        d = self.space.dimension
        if self.kind == "box":
            return self.lower + (self.upper - self.lower) * rng.random((count, d))
        if self.kind == "ball":
            p = self.space.p
            if math.isinf(p):
                unit = rng.uniform(-1.0, 1.0, (count, d))
            else:
                # uniform on the l_p ball: generalized-gaussian direction plus
                # an exponential radial correction
                mag = rng.gamma(1.0 / p, 1.0, (count, d)) ** (1.0 / p)
                g = mag * rng.choice([-1.0, 1.0], (count, d))
                z = rng.exponential(1.0, (count, 1))
                unit = g / ((np.abs(g) ** p).sum(axis=1, keepdims=True) + z) ** (1.0 / p)
            return self.center + self.radius * unit
        weights = rng.dirichlet(np.ones(self.points.shape[0]), count)
        return weights @ self.points

    def grid(self, step: float) -> np.ndarray:
        """Regular grid of members with spacing ``step`` (bounding-box lattice
        filtered by membership for balls and hulls)."""
        if not step > 0:
            raise InputError("grid step must be positive")
        lo, hi = self.bounding_box()
        axes = []
        for a, b in zip(lo, hi):
            n = int(round((b - a) / step))
            axes.append(np.linspace(a, b, n + 1) if n > 0 else np.array([a]))
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
        if self.kind == "box":
            return pts
        return pts[self.contains(pts)]

    def scaled(self, factor: float) -> "ConvexBody":
        """The body ``factor * self``."""
        factor = float(factor)
        if not factor > 0:
            raise InputError("scale factor must be positive")
        if self.kind == "box":
            return ConvexBody("box", self.space, lower=self.lower * factor, upper=self.upper * factor)
        if self.kind == "ball":
            return ConvexBody(
                "ball", self.space, center=self.center * factor, radius=self.radius * factor
            )
        return ConvexBody("hull", self.space, points=self.points * factor)

    def diameter(self) -> float:
        if self.kind == "box":
            return float(lp_norm(self.upper - self.lower, self.space.p))
        if self.kind == "ball":
            return 2.0 * self.radius
        return _pairwise_max(self.points, self.space.p)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "space": self.space.to_dict()}
        if self.kind == "box":
            out["bounds"] = {"lower": self.lower.tolist(), "upper": self.upper.tolist()}
        elif self.kind == "ball":
            out["center"] = self.center.tolist()
            out["radius"] = self.radius
        else:
            out["points"] = self.points.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ConvexBody":
        space = SpaceDescriptor.from_dict(data["space"])
        kind = data.get("kind")
        if kind == "box":
            bounds = data["bounds"]
            return cls("box", space, lower=bounds["lower"], upper=bounds["upper"])
        if kind == "ball":
            return cls("ball", space, center=data["center"], radius=data["radius"])
        if kind == "hull":
            return cls("hull", space, points=data["points"])
        raise InputError(f"unknown body kind {kind!r}")


def sample_body(body: ConvexBody, count: int, seed: int) -> list[Vector]:
    """``count`` members of ``body``, reproducible for a given seed."""
    if int(count) != count or count < 1:
        raise InputError("count must be a positive integer")
    rng = np.random.default_rng(seed)
    pts = body.sample_array(int(count), rng)
    if not np.all(body.contains(pts)):
        raise AssertionError("sampler produced a non-member")  # pragma: no cover
    return [Vector(row, body.space) for row in pts]


def _pairwise_max(pts: np.ndarray, p: float) -> float:
    best = 0.0
    for i in range(pts.shape[0] - 1):
        best = max(best, float(lp_norm(pts[i + 1 :] - pts[i], p).max()))
    return best


def _stack(points: Sequence, what: str) -> tuple[np.ndarray, SpaceDescriptor]:
    if len(points) == 0:
        raise InputError(f"{what} must be nonempty")
    first = points[0]
    if not isinstance(first, Vector):
        raise InputError(f"{what} must be Vector instances")
    space = first.space
    return np.stack([space.as_array(v) for v in points]), space


def diameter(points: Sequence[Vector]) -> float:
    """Largest pairwise distance; 0 for a single point."""
    arr, space = _stack(points, "points")
    return _pairwise_max(arr, space.p)


def asymptotic_radius(
    tail: Sequence[Vector],
    candidates: Sequence[Vector],
    tail_window: int = DEFAULT_TAIL_WINDOW,
) -> tuple[float, Vector]:
    """Finite surrogate of ``inf_x limsup_n ||x_n - x||``.

    The limsup is replaced by the max over the last ``tail_window`` terms;
    the infimum runs over ``candidates`` with lowest-index tie-break.
    """
    if tail_window < 1 or int(tail_window) != tail_window:
        raise InputError("tail_window must be a positive integer")
    if len(tail) < tail_window:
        raise InputError(f"tail has {len(tail)} terms, window needs {tail_window}")
    seq, space = _stack(list(tail)[-int(tail_window):], "tail")
    cand, cspace = _stack(candidates, "candidates")
    if cspace != space:
        raise InputError("tail and candidates live in different spaces")
    spread = window_max_distance(seq, cand, space.p)
    i = int(np.argmin(spread))
    return float(spread[i]), candidates[i]


def window_max_distance(seq: np.ndarray, cand: np.ndarray, p: float) -> np.ndarray:
    """For each candidate row, ``max_n ||seq_n - cand||``."""
    return lp_norm(seq[None, :, :] - cand[:, None, :], p).max(axis=1)


def as_points(points: Iterable, space: SpaceDescriptor) -> np.ndarray:
    """Stack Vectors / array-likes into an ``(n, dim)`` array."""
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=float)
        if arr.ndim == 1 and space.dimension == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[1] != space.dimension:
            raise InputError(f"expected an (n, {space.dimension}) array of points")
        return arr
    rows = [space.as_array(v) for v in points]
    if not rows:
        return np.zeros((0, space.dimension))
    return np.stack(rows)
