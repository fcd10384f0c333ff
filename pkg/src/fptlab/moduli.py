"""Banach-geometry moduli of l_p and c_0 under a disjoint block-sequence
model of weakly null sequences, plus the James constant.

Finite-dimensional spaces carry no weakly null sequences on the sphere, so
every sequential modulus is evaluated on the model: an anchor ``x`` and
blocks ``y_n`` of common norm ``c`` with supports disjoint from each other
and from ``x``. In l_p this gives ``lim ||a x + b y_n|| = (|a|^p ||x||^p +
|b|^p c^p)^(1/p)``; in c_0 the max of the two terms.

Values are exact for the model, not for the space. ``space_direction``
records how a model value relates to the true modulus: sup-type moduli
over a restricted family are lower bounds, the inf-type ``d`` an upper
bound, and ratios built from them are model-scale only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import InputError
from .space import SpaceDescriptor, lp_norm, parse_exponent

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
C_STEP = 1e-3
IMPROVE_TOL = 1e-12
DEFAULT_A_GRID = tuple(np.round(np.linspace(0.0, 4.0, 401), 10))


def _p(norm_kind) -> float:
    return parse_exponent(norm_kind)


def _is_schur(p: float) -> bool:
    return p == 1.0


def max_block_norm(p: float) -> float:
    """Largest block norm ``c`` with ``c <= 1`` and separation ``D <= 1``."""
    return 1.0 if math.isinf(p) else 2.0 ** (-1.0 / p)


def _combine(u, v, p):
    u = np.abs(u)
    v = np.abs(v)
    if math.isinf(p):
        return np.maximum(u, v)
    return (u**p + v**p) ** (1.0 / p)


@dataclass(frozen=True)
class BlockSequenceModel:
    """Anchor of norm ``anchor_norm`` plus disjoint blocks of norm ``block_norm``."""

    p: float
    block_norm: float
    anchor_norm: float = 1.0

    def __post_init__(self):
        p = _p(self.p)
        if _is_schur(p):
            raise InputError("l_1 has the Schur property: no weakly null sequences on the sphere")
        object.__setattr__(self, "p", p)
        if self.block_norm < 0 or self.anchor_norm < 0:
            raise InputError("norms must be nonnegative")

    @property
    def separation(self) -> float:
        """``D[(y_n)] = lim ||y_n - y_m||`` for disjoint blocks."""
        if math.isinf(self.p):
            return self.block_norm
        return 2.0 ** (1.0 / self.p) * self.block_norm

    @property
    def in_unit_ball(self) -> bool:
        return self.block_norm <= 1.0

    @property
    def admissible(self) -> bool:
        """Membership of the block sequence in the class with ``D <= 1``."""
        return self.in_unit_ball and self.separation <= 1.0 + 1e-15

    def limit_norm(self, coeff_anchor: float, coeff_block: float) -> float:
        return float(_combine(coeff_anchor * self.anchor_norm, coeff_block * self.block_norm, self.p))

    def realize(self, n_blocks: int = 4, block_size: int = 2):
        """Concrete finite vectors: anchor on coordinate 0, block ``k`` spread
        evenly over its own ``block_size`` coordinates."""
        dim = 1 + n_blocks * block_size
        anchor = np.zeros(dim)
        anchor[0] = self.anchor_norm
        space = SpaceDescriptor(dim, self.p)
        unit = np.ones(block_size) / float(lp_norm(np.ones(block_size), self.p))
        blocks = []
        for k in range(n_blocks):
            y = np.zeros(dim)
            y[1 + k * block_size : 1 + (k + 1) * block_size] = self.block_norm * unit
            blocks.append(y)
        return space, anchor, blocks


def limit_norm(model: BlockSequenceModel, coeff_anchor: float, coeff_block: float) -> float:
    return model.limit_norm(coeff_anchor, coeff_block)


@dataclass(frozen=True)
class ModulusEstimate:
    modulus: str
    args: dict
    value: float | None
    bound_direction: str
    witness: dict = field(default_factory=dict)
    space_direction: str = "model_scale_only"

    def to_dict(self) -> dict:
        return {
            "modulus": self.modulus,
            "args": self.args,
            "value": self.value,
            "bound_direction": self.bound_direction,
            "space_direction": self.space_direction,
            "witness": self.witness,
        }


def _schur(modulus: str, args: dict) -> ModulusEstimate:
    return ModulusEstimate(modulus, args, None, "schur_property", {}, "schur_property")


def _p_label(p: float):
    return "inf" if math.isinf(p) else p


# ------------------------------------------------------------- optimizer


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-13):
    """Maximize a unimodal ``f`` on ``[lo, hi]``; endpoints are candidates too."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    best = max([(f(lo), lo), (f(hi), hi), (fc, c), (fd, d)], key=lambda t: t[0])
    return best[1], best[0]


def grid_maximize(f: Callable, lo: float, hi: float, step: float = C_STEP):
    """Grid sweep (lowest-index argmax) then golden-section refinement on the
    neighbouring cells. ``f`` must accept numpy arrays."""
    if hi <= lo:
        return lo, float(f(np.array([lo]))[0])
    n = max(2, int(math.ceil((hi - lo) / step)) + 1)
    xs = np.linspace(lo, hi, n)
    vals = np.asarray(f(xs), dtype=float)
    k = int(np.argmax(vals))
    a, b = xs[max(k - 1, 0)], xs[min(k + 1, n - 1)]
    x_ref, v_ref = golden_section_max(lambda t: float(f(np.array([t]))[0]), a, b)
    if v_ref > vals[k]:
        return x_ref, v_ref
    return float(xs[k]), float(vals[k])


def _model_gain(p, x_norm, eps):
    """``c -> lim ||x + eps y_n|| - ||x||`` over block norms ``c``."""
    return lambda c: _combine(x_norm, eps * np.asarray(c), p) - x_norm


# ---------------------------------------------------------------- moduli


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not (eps >= 0 and math.isfinite(eps)):
        raise InputError(f"eps must be a nonnegative finite number, got {eps}")
    return eps


def modulus_d(norm_kind, eps: float, x_norm: float = 1.0) -> ModulusEstimate:
    """``d(eps, x) = inf limsup ||x + eps y_n|| - ||x||`` over sphere sequences;
    on the model the only sphere blocks have ``c = 1``."""
    p = _p(norm_kind)
    eps = _check_eps(eps)
    args = {"p": _p_label(p), "eps": eps, "x_norm": x_norm}
    if _is_schur(p):
        return _schur("d", args)
    value = float(_combine(x_norm, eps, p)) - x_norm
    return ModulusEstimate("d", args, value, "exact_for_model", {"block_norm": 1.0}, "upper_bound_of_inf")


def modulus_b1(norm_kind, x_norm: float, eps: float, method: str = "closed_form") -> ModulusEstimate:
    """``b_1(eps, x)``: sup of ``liminf ||x + eps y_n|| - ||x||`` over
    sequences in the unit ball with separation at most 1."""
    p = _p(norm_kind)
    eps = _check_eps(eps)
    args = {"p": _p_label(p), "eps": eps, "x_norm": x_norm}
    if _is_schur(p):
        return _schur("b1", args)
    c_max = max_block_norm(p)
    if method == "optimizer":
        c, value = grid_maximize(_model_gain(p, x_norm, eps), 0.0, c_max)
    elif method == "closed_form":
        c = c_max
        value = float(_combine(x_norm, eps * c_max, p)) - x_norm
    else:
        raise InputError(f"unknown method {method!r}")
    return ModulusEstimate("b1", args, value, "exact_for_model", {"block_norm": c}, "lower_bound_of_sup")


def modulus_b(norm_kind, x_norm: float, eps: float, method: str = "closed_form") -> ModulusEstimate:
    """``b(eps, x)``: as ``b_1`` but over sphere sequences (``c = 1``, no
    separation constraint)."""
    p = _p(norm_kind)
    eps = _check_eps(eps)
    args = {"p": _p_label(p), "eps": eps, "x_norm": x_norm}
    if _is_schur(p):
        return _schur("b", args)
    if method == "optimizer":
        # c is pinned to 1; the sweep is over the degenerate interval [1, 1]
        c, value = grid_maximize(_model_gain(p, x_norm, eps), 1.0, 1.0)
    elif method == "closed_form":
        c, value = 1.0, float(_combine(x_norm, eps, p)) - x_norm
    else:
        raise InputError(f"unknown method {method!r}")
    return ModulusEstimate("b", args, value, "exact_for_model", {"block_norm": c}, "lower_bound_of_sup")


def R_modulus(norm_kind, a: float, method: str = "closed_form") -> ModulusEstimate:
    """``R(a, X) = sup liminf ||y_n + x||`` over ``||x|| <= a`` and admissible
    block sequences in the unit ball."""
    p = _p(norm_kind)
    a = float(a)
    if not (a >= 0 and math.isfinite(a)):
        raise InputError(f"a must be a nonnegative finite number, got {a}")
    args = {"p": _p_label(p), "a": a}
    if _is_schur(p):
        return _schur("R", args)
    c_max = max_block_norm(p)
    if method == "optimizer":

        def best_over_c(s):
            return np.array([grid_maximize(lambda c: _combine(si, c, p), 0.0, c_max)[1] for si in np.atleast_1d(s)])

        s, value = grid_maximize(best_over_c, 0.0, a, step=max(a / 200.0, C_STEP))
        c = grid_maximize(lambda cc: _combine(s, cc, p), 0.0, c_max)[0]
    elif method == "closed_form":
        s, c = a, c_max
        value = float(_combine(a, c_max, p))
    else:
        raise InputError(f"unknown method {method!r}")
    return ModulusEstimate("R", args, value, "exact_for_model", {"x_norm": s, "block_norm": c}, "lower_bound_of_sup")


def _grid(a_grid) -> np.ndarray:
    grid = np.asarray(list(a_grid), dtype=float)
    if grid.size == 0:
        raise InputError("a_grid must be nonempty")
    if np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise InputError("a_grid values must be nonnegative and finite")
    return grid


def M_coefficient(norm_kind, a_grid: Sequence[float] = DEFAULT_A_GRID) -> ModulusEstimate:
    """Grid max of ``(1 + a) / R(a)`` (lowest-index argmax)."""
    p = _p(norm_kind)
    grid = _grid(a_grid)
    args = {"p": _p_label(p), "a_min": float(grid.min()), "a_max": float(grid.max()), "a_count": int(grid.size)}
    if _is_schur(p):
        return _schur("M", args)
    ratios = (1.0 + grid) / np.array([R_modulus(p, a).value for a in grid])
    k = int(np.argmax(ratios))
    return ModulusEstimate("M", args, float(ratios[k]), "lower_bound_of_sup", {"a": float(grid[k])})


def RW_MW(norm_kind, a_grid: Sequence[float] = DEFAULT_A_GRID) -> tuple[list[float], ModulusEstimate]:
    """``RW(a)`` on the grid and the grid max of ``(1 + a) / RW(a)``.

    Disjoint blocks make ``||y_n + x||`` and ``||y_n - x||`` equal in the
    limit, and without a separation constraint the best block norm is 1.
    """
    p = _p(norm_kind)
    grid = _grid(a_grid)
    args = {"p": _p_label(p), "a_min": float(grid.min()), "a_max": float(grid.max()), "a_count": int(grid.size)}
    if _is_schur(p):
        return [], _schur("MW", args)
    rw = _combine(grid, 1.0, p)
    ratios = (1.0 + grid) / rw
    k = int(np.argmax(ratios))
    est = ModulusEstimate("MW", args, float(ratios[k]), "lower_bound_of_sup", {"a": float(grid[k]), "RW": float(rw[k])})
    return [float(v) for v in rw], est


def r_via_b1_deviation(norm_kind, a: float, samples: int = 2001) -> float:
    """``|R(a) - max_{s in [0, a]} (b_1(1, s) + s)|`` with ``s`` sampled evenly."""
    p = _p(norm_kind)
    direct = R_modulus(p, a).value
    ss = np.linspace(0.0, float(a), samples)
    via_b1 = max(modulus_b1(p, s, 1.0).value + s for s in ss)
    return abs(direct - via_b1)


@dataclass(frozen=True)
class CoefficientEquivalence:
    exists_a: bool
    forall_a: bool
    m_above_one: bool

    @property
    def equivalent(self) -> bool:
        return self.exists_a == self.forall_a == self.m_above_one

    def to_dict(self) -> dict:
        return {
            "exists_a": self.exists_a,
            "forall_a": self.forall_a,
            "m_above_one": self.m_above_one,
            "equivalent": self.equivalent,
        }


def coefficient_equivalence(a_grid, r_values, slack: float = 1e-9) -> CoefficientEquivalence:
    """Estimator-level form of: M > 1 iff R(a) < 1 + a for some a > 0 iff for all a > 0.

    Works on any tabulated ``R``; the strict existential uses ``slack``.
    """
    grid = _grid(a_grid)
    r = np.asarray(r_values, dtype=float)
    if r.shape != grid.shape:
        raise InputError("r_values must match a_grid")
    pos = grid > 0
    if not np.any(pos):
        raise InputError("a_grid needs at least one positive value")
    exists = bool(np.any(r[pos] < 1.0 + grid[pos] - slack))
    forall = bool(np.all(r[pos] < 1.0 + grid[pos]))
    m_hat = float(np.max((1.0 + grid) / r))
    return CoefficientEquivalence(exists, forall, m_hat > 1.0)


# --------------------------------------------------------- James constant


def _min_sum_diff(x: np.ndarray, y: np.ndarray, p: float) -> np.ndarray:
    return np.minimum(lp_norm(x + y, p), lp_norm(x - y, p))


def _canonical_witnesses(dim: int, p: float) -> np.ndarray:
    eye = np.eye(dim)
    cands = [eye[i] for i in range(dim)]
    for i, j in itertools.combinations(range(dim), 2):
        for s in (1.0, -1.0):
            v = eye[i] + s * eye[j]
            cands.append(v / float(lp_norm(v, p)))
    return np.array(cands)


def james_constant(space: SpaceDescriptor, resolution: int = 360, seed: int = 0) -> ModulusEstimate:
    """Lower bound for ``J(X) = sup min(||x + y||, ||x - y||)`` over sphere pairs.

    Candidates: coordinate and diagonal witnesses, an angular grid of
    ``resolution`` points on the sphere of the first coordinate plane,
    random pairs in higher dimension, then Nelder-Mead refinement of the
    best few.
    """
    if int(resolution) != resolution or resolution < 8:
        raise InputError("resolution must be an integer >= 8")
    p, dim = space.p, space.dimension
    args = {"p": _p_label(p), "dimension": dim, "resolution": int(resolution)}

    cands = _canonical_witnesses(dim, p)
    i, j = np.triu_indices(cands.shape[0])
    vals = _min_sum_diff(cands[i], cands[j], p)
    k = int(np.argmax(vals))
    best = (float(vals[k]), cands[i[k]], cands[j[k]], "canonical")
    if dim == 1:
        return ModulusEstimate("J", args, best[0], "lower_bound_of_sup",
                               {"x": best[1].tolist(), "y": best[2].tolist(), "source": best[3]},
                               "lower_bound_of_sup")

    theta = np.linspace(0.0, 2.0 * math.pi, int(resolution), endpoint=False)
    circle = np.zeros((theta.size, dim))
    circle[:, 0], circle[:, 1] = np.cos(theta), np.sin(theta)
    circle /= lp_norm(circle, p)[:, None]
    gi, gj = np.meshgrid(np.arange(theta.size), np.arange(theta.size), indexing="ij")
    gi, gj = gi.reshape(-1), gj.reshape(-1)
    gvals = _min_sum_diff(circle[gi], circle[gj], p)
    starts = []
    for idx in np.argsort(-gvals, kind="stable")[:5]:
        starts.append((circle[gi[idx]], circle[gj[idx]]))
        if gvals[idx] > best[0] + IMPROVE_TOL:
            best = (float(gvals[idx]), circle[gi[idx]], circle[gj[idx]], "grid")

    if dim > 2:
        rng = np.random.default_rng(seed)
        raw = rng.standard_normal((2, 20 * int(resolution), dim))
        xs = raw[0] / lp_norm(raw[0], p)[:, None]
        ys = raw[1] / lp_norm(raw[1], p)[:, None]
        rvals = _min_sum_diff(xs, ys, p)
        for idx in np.argsort(-rvals, kind="stable")[:5]:
            starts.append((xs[idx], ys[idx]))
            if rvals[idx] > best[0] + IMPROVE_TOL:
                best = (float(rvals[idx]), xs[idx], ys[idx], "random")

    def objective(z):
        x, y = z[:dim], z[dim:]
        nx, ny = float(lp_norm(x, p)), float(lp_norm(y, p))
        if nx == 0 or ny == 0:
            return 0.0
        return -float(_min_sum_diff(x / nx, y / ny, p))

    for x0, y0 in starts:
        res = minimize(objective, np.concatenate([x0, y0]), method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        # refinement must beat the incumbent by more than rounding noise
        if -res.fun > best[0] + IMPROVE_TOL:
            x, y = res.x[:dim], res.x[dim:]
            best = (-float(res.fun), x / lp_norm(x, p), y / lp_norm(y, p), "refined")

    return ModulusEstimate("J", args, best[0], "lower_bound_of_sup",
                           {"x": np.asarray(best[1]).tolist(), "y": np.asarray(best[2]).tolist(), "source": best[3]},
                           "lower_bound_of_sup")


# ------------------------------------------------------------------ NUNC


@dataclass(frozen=True)
class NuncReport:
    eps: float
    satisfied: bool
    t: float | None
    branch: str | None
    evidence: str
    rows: tuple = ()

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "satisfied": self.satisfied,
            "t": self.t,
            "branch": self.branch,
            "evidence": self.evidence,
            "rows": [dict(r) for r in self.rows],
        }


def nunc_witness(norm_kind, eps: float, t_grid: Sequence[float], x_norm: float = 1.0) -> NuncReport:
    """Search ``t_grid`` for ``d(eps, x) >= t`` or ``b(t, x) <= eps t``.

    The first ``t`` (in grid order) satisfying either branch is reported;
    the d-branch is tried first. Both branches would need the opposite
    bound direction from what the model supplies, so evidence is model-scale.
    """
    p = _p(norm_kind)
    eps = float(eps)
    if not eps > 0:
        raise InputError("eps must be positive")
    if _is_schur(p):
        return NuncReport(eps, True, None, "schur_property", "schur_property")
    d_val = modulus_d(p, eps, x_norm).value
    rows = []
    hit = None
    for t in t_grid:
        t = float(t)
        if not t > 0:
            continue
        b_val = modulus_b(p, x_norm, t).value
        d_ok = d_val >= t
        b_ok = b_val <= eps * t
        rows.append((("t", t), ("d", d_val), ("b", b_val), ("d_branch", d_ok), ("b_branch", b_ok)))
        if hit is None and (d_ok or b_ok):
            hit = (t, "d" if d_ok else "b")
    if hit is None:
        return NuncReport(eps, False, None, None, "model_scale_only", tuple(rows))
    return NuncReport(eps, True, hit[0], hit[1], "model_scale_only", tuple(rows))
