"""Sampled checks of the arithmetic entailments behind the fixed-point proofs.

Each entailment is a premise on a handful of numeric parameters plus a list
of conclusion clauses. Analytic steps (weak lower semicontinuity, choice of
norming functionals, an externally sourced normalization step) enter only as
premises; what is checked is the constant-chasing around them.

Strict inequalities get an absolute slack of ``SLACK`` in floating point and
none in exact-rational mode.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable

import numpy as np

from .errors import InputError
from .iteration import ar_bound, as_fraction

SLACK = 1e-12
DEGENERATE_RATE = 1e-4


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator per named sub-task, derived from one seed."""
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(key,)))


@dataclass(frozen=True)
class Clause:
    name: str
    lhs: object
    rhs: object
    relation: str  # one of "<", "<=", ">", ">=", "=="

    def holds(self, slack: float = SLACK) -> bool:
        a, b = self.lhs, self.rhs
        if isinstance(a, Rational) and isinstance(b, Rational):
            slack = 0
        if self.relation == "<":
            return a < b + slack
        if self.relation == "<=":
            return a <= b + slack
        if self.relation == ">":
            return a > b - slack
        if self.relation == ">=":
            return a >= b - slack
        if self.relation == "==":
            return abs(a - b) <= slack * max(1, abs(a), abs(b))
        raise ValueError(self.relation)


@dataclass(frozen=True)
class LedgerViolation:
    params: dict
    clause: str
    relation: str
    lhs: float
    rhs: float

    def to_dict(self) -> dict:
        return {"params": self.params, "clause": self.clause, "relation": self.relation,
                "lhs": self.lhs, "rhs": self.rhs}


@dataclass
class EntailmentReport:
    name: str
    region: dict
    samples: int
    premise_hits: int
    violations: list[LedgerViolation] = field(default_factory=list)
    degenerate: bool = False
    details: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        if self.violations:
            return "violated"
        if self.premise_hits == 0:
            return "premise_never_satisfied"
        return "holds_on_samples"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "region": self.region,
            "samples": self.samples,
            "premise_hits": self.premise_hits,
            "degenerate": self.degenerate,
            "violations": [v.to_dict() for v in self.violations],
            "verdict": self.verdict,
            "details": self.details,
        }


@dataclass(frozen=True)
class Entailment:
    name: str
    premise: Callable[..., bool]
    clauses: Callable[..., list[Clause]]
    sampler: Callable[[np.random.Generator, int], list[dict]]
    region: dict
    details: Callable[..., dict] | None = None


def _as_float(v) -> float:
    try:
        return float(v)
    except OverflowError:
        return math.inf if v > 0 else -math.inf


def evaluate(ent: Entailment, params: dict) -> tuple[bool, list[LedgerViolation]]:
    """Premise flag and the failed clauses (empty when the premise fails)."""
    if not ent.premise(**params):
        return False, []
    bad = [
        LedgerViolation(dict(params), c.name, c.relation, _as_float(c.lhs), _as_float(c.rhs))
        for c in ent.clauses(**params)
        if not c.holds()
    ]
    return True, bad


def check_point(ent: Entailment, **params) -> EntailmentReport:
    hit, bad = evaluate(ent, params)
    details = ent.details(**params) if (hit and ent.details) else {}
    return EntailmentReport(ent.name, {"point": dict(params)}, 1, int(hit), bad, False, details)


def sweep(ent: Entailment, samples: int = 10_000, seed: int = 0, max_draws: int | None = None) -> EntailmentReport:
    """Draw from the entailment's region until ``samples`` draws satisfy the
    premise (or ``max_draws`` is reached) and check every hit."""
    if int(samples) != samples or samples < 1:
        raise InputError("samples must be a positive integer")
    max_draws = int(max_draws or 100 * samples)
    rng = rng_stream(seed, ent.name)
    draws = hits = 0
    violations: list[LedgerViolation] = []
    while hits < samples and draws < max_draws:
        batch = min(max(samples - hits, 64), max_draws - draws)
        for params in ent.sampler(rng, batch):
            draws += 1
            hit, bad = evaluate(ent, params)
            if hit:
                hits += 1
                violations.extend(bad)
                if hits == samples:
                    break
    degenerate = hits < DEGENERATE_RATE * draws
    region = dict(ent.region, seed=int(seed), target_hits=int(samples))
    return EntailmentReport(ent.name, region, draws, hits, violations, degenerate)


def replay(ent: Entailment, violation: LedgerViolation) -> LedgerViolation | None:
    """Re-evaluate a stored violation; returns it again if it still fails."""
    hit, bad = evaluate(ent, violation.params)
    for v in bad:
        if v.clause == violation.clause:
            return v
    return None


# ------------------------------------------------- asymptotic regularity


def _ar_premise(delta, gamma, exact=False):
    return 0 < delta < 1 and 0 < gamma < 1


def _ar_clauses(delta, gamma, exact=False):
    bound = ar_bound(delta, gamma)
    m, big_l, n0 = bound.M, bound.L, bound.n0
    if exact:
        d, g = as_fraction(delta), as_fraction(gamma)
        width = bound.width
        cover = big_l * width
        one_minus_delta = 1 - d
        m_delta = m * d
    else:
        d, g = float(delta), float(gamma)
        # width underflows for large M; compare in log space
        log_cover = math.log(big_l) + math.log(g) + m * math.log1p(-g)
        cover = math.exp(log_cover) if log_cover < 700 else math.inf
        one_minus_delta = 1.0 - d
        m_delta = m * d
    # normalized error recurrence e_i / (gamma (1-gamma)^(M-i))
    rho, worst = 0.0, 0.0
    q = 1.0 - float(g)
    power = 1.0
    for _ in range(m):
        rho += float(g) * power
        power *= q
        worst = max(worst, rho)
    telescoped = float(g) * sum(q**j for j in range(1, m))
    return [
        Clause("cover", cover, one_minus_delta, ">="),
        Clause("pigeonhole", big_l + 1, big_l, ">"),
        Clause("indices_in_orbit", m * big_l, n0, "<"),
        Clause("M_delta", m_delta, 2, ">"),
        Clause("error_recurrence", worst, 1.0, "<="),
        Clause("telescoping", telescoped, 1.0, "<="),
        Clause("contradiction", m_delta - 1, 1, ">"),
    ]


def _ar_details(delta, gamma, exact=False):
    b = ar_bound(delta, gamma)
    g = float(gamma)
    return {"M": b.M, "L": b.L, "n0": b.n0,
            "telescoped_sum": g * sum((1 - g) ** j for j in range(1, b.M))}


def _ar_sampler(rng, n):
    pts = rng.uniform(0.01, 0.99, (n, 2))
    return [{"delta": float(a), "gamma": float(b)} for a, b in pts]


AR_CONSTANTS = Entailment(
    "thm21", _ar_premise, _ar_clauses, _ar_sampler,
    {"delta": [0.01, 0.99], "gamma": [0.01, 0.99]}, _ar_details,
)


def thm21_constants_check(delta: float, gamma: float, exact: bool = False) -> EntailmentReport:
    """Cover, pigeonhole, ``M delta > 2`` and telescoping constants of the
    uniform asymptotic-regularity argument at one ``(delta, gamma)``."""
    if not (0 < delta < 1 and 0 < gamma < 1):
        raise InputError("delta and gamma must lie in (0, 1)")
    return check_point(AR_CONSTANTS, delta=delta, gamma=gamma, exact=exact)


# ------------------------------------------------- orbit-window estimates


def _window_premise(t, eps, N, gamma, lam):
    return (
        N >= 1
        and 0 < eps < 1.0 / (10 * N)
        and 2.0 / 3.0 + 2 * N * eps < t < 1 - 2 * eps
        and 0 < lam <= gamma < 1
    )


def _window_clauses(t, eps, N, gamma, lam):
    gap = 2 * (1 - t) + eps
    out = [
        Clause("afps_below_gap", eps, 1 - t - eps, "<"),
        Clause("fact2_k1", gap, t - eps, "<"),
        Clause("k1_lower_identity", 1 - eps - (1 - t + eps) - eps, t - 3 * eps, "=="),
    ]
    # every k-indexed family is tightest at k = N
    out.append(Clause(f"chain_k{N}", gap, t - (N + 2) * eps, "<"))
    out.append(Clause(f"con1_positive_k{N}", t - (N + 3) * eps, 0.0, ">"))
    out.append(Clause("con2_window_k1", 1 - t - eps, 1 - t + 2 * eps, "<"))
    out.append(Clause(f"induction_threshold_k{N}", t, 2.0 / 3.0 + (N + 3) * eps / 3.0, ">"))
    return out


def _window_sampler(rng, n):
    out = []
    for _ in range(n):
        big_n = int(rng.integers(1, 21))
        eps = float(rng.random()) / (10 * big_n)
        t = float(rng.uniform(2.0 / 3.0, 1.0))
        gamma = float(rng.random())
        lam = float(rng.random()) * gamma
        out.append({"t": t, "eps": eps, "N": big_n, "gamma": gamma, "lam": lam})
    return out


ORBIT_WINDOW = Entailment(
    "lemma33", _window_premise, _window_clauses, _window_sampler,
    {"N": [1, 20], "eps": "(0, 1/(10N))", "t": [2.0 / 3.0, 1.0], "gamma": [0, 1], "lam": "(0, gamma]"},
)


def lemma33_region_check(t: float, eps: float, N: int, gamma: float, lam: float) -> EntailmentReport:
    """Arithmetic coherence of the inductive window estimates for one
    parameter point; a failed premise gives ``premise_never_satisfied``."""
    return check_point(ORBIT_WINDOW, t=t, eps=eps, N=int(N), gamma=gamma, lam=lam)


# ------------------------------------------------------- eta selection


def _eta_window(eps, t, N):
    return min(1.0 / (3 * (N + 2)), eps / N, (t - 2.0 / 3.0) / N, (1 - t) / 2.0)


def _eta_premise(eps, t, N):
    return eps > 0 and 2.0 / 3.0 < t < 1 and N >= 1


def _eta_clauses(eps, t, N):
    upper = _eta_window(eps, t, N)
    eta = upper / 2.0
    return [
        Clause("window_nonempty", upper, 0.0, ">"),
        Clause("eta_small", eta, 1.0 / (3 * (N + 2)), "<"),
        Clause("eta_eps", eta, eps / N, "<"),
        Clause("t_lower", 2.0 / 3.0 + N * eta, t, "<"),
        Clause("t_upper", t, 1 - 2 * eta, "<"),
        Clause("distance_bound", 1 - t + N * eta, 1 - t + eps, "<"),
    ]


def _eta_details(eps, t, N):
    upper = _eta_window(eps, t, N)
    eta = upper / 2.0
    handoff = eta < 1.0 / (10 * N) and 2.0 / 3.0 + 2 * N * eta < t < 1 - 2 * eta
    return {"window": [0.0, upper], "eta": eta, "window_premises_at_eta": handoff}


def _eta_sampler(rng, n):
    out = []
    for _ in range(n):
        out.append({
            "eps": float(rng.uniform(1e-6, 1.0)),
            "t": float(rng.uniform(2.0 / 3.0, 1.0)),
            "N": int(rng.integers(1, 101)),
        })
    return out


ETA_SELECTION = Entailment(
    "lemma_zn", _eta_premise, _eta_clauses, _eta_sampler,
    {"eps": [1e-6, 1.0], "t": [2.0 / 3.0, 1.0], "N": [1, 100]}, _eta_details,
)


def lemma_zn_param_check(eps: float, t: float, N: int) -> EntailmentReport:
    """Feasibility window ``(0, min{1/(3(N+2)), eps/N, (t-2/3)/N, (1-t)/2})``
    for the auxiliary constant eta, checked at its midpoint."""
    return check_point(ETA_SELECTION, eps=eps, t=t, N=int(N))


# -------------------------------------------------- creasiness chains


def _crease_premise(eps, r):
    return 0 < eps < 0.125 and r > 0


def _crease_clauses(eps, r):
    b1_chain = (4.0 / r) * (r * (1 - eps) - (2.0 / 3.0) * (3.0 / 4.0) * r) - 4 * eps
    d_chain = (4.0 / r) * r * (0.25 + eps) + 4 * eps
    z_low, z_high = r * (0.25 - eps), r * (0.25 + eps)
    b1_lower = b1_chain - 1.0
    d_upper = d_chain - 1.0
    hyp = 8 * eps
    return [
        Clause("b1_chain", b1_chain, 2 - 8 * eps, "=="),
        Clause("d_chain", d_chain, 1 + 8 * eps, "=="),
        Clause("sandwich", z_low, z_high, "<="),
        Clause("normalization_low", abs(4 * z_low / r - 1), 4 * eps, "<="),
        Clause("normalization_high", abs(4 * z_high / r - 1), 4 * eps, "<="),
        Clause("separation", (4.0 / (3.0 * r)) * (0.75 * r), 1.0, "<="),
        Clause("y_lower", (4.0 / r) * (r - 0.75 * r), 1.0, ">="),
        Clause("hypothesis_b1_fails", b1_lower, 1 - hyp, ">="),
        Clause("hypothesis_d_fails", d_upper, hyp, "<="),
        Clause("gap_in_range", hyp, 1.0, "<"),
    ]


def _crease_details(eps, r):
    b1_chain = (4.0 / r) * (r * (1 - eps) - 0.5 * r) - 4 * eps
    return {"gap_factor": (2.0 - b1_chain) / eps}


def _crease_sampler(rng, n):
    return [{"eps": float(rng.uniform(0.0, 0.125)), "r": float(rng.uniform(1e-3, 10.0))} for _ in range(n)]


CREASE_CHAINS = Entailment(
    "przs", _crease_premise, _crease_clauses, _crease_sampler,
    {"eps": [0.0, 0.125], "r": [1e-3, 10.0]}, _crease_details,
)


def przs_chain_check(eps: float, r: float) -> EntailmentReport:
    """The ``2 - 8 eps`` and ``1 + 8 eps`` chains, the norm sandwich and the
    resulting factor-8 loss in the creasiness hypothesis."""
    return check_point(CREASE_CHAINS, eps=eps, r=r)


# ------------------------------------------------- R(a) = 1 + a propagation


def _propagation_premise(a, b, eta, f_x, lim_f):
    if not (a > 0 and b > 0 and 0 < eta < 1):
        return False
    m = min(1.0, a)
    return lim_f > 1 - eta * m and f_x > a - eta * m


def _propagation_clauses(a, b, eta, f_x, lim_f):
    return [
        Clause("lim_f_bound", lim_f, 1 - eta, ">"),
        Clause("f_x_bound", f_x, a * (1 - eta), ">"),
        Clause("conclusion", lim_f + (b / a) * f_x, (1 + b) * (1 - eta), ">"),
    ]


def _propagation_sampler(rng, n):
    out = []
    for _ in range(n):
        a = float(rng.uniform(1e-6, 4.0))
        b = float(rng.uniform(1e-6, 4.0))
        eta = float(rng.uniform(1e-9, 1.0))
        m = min(1.0, a)
        out.append({
            "a": a, "b": b, "eta": eta,
            "f_x": a - float(rng.random()) * eta * m,
            "lim_f": 1 - float(rng.random()) * eta * m,
        })
    return out


R_PROPAGATION = Entailment(
    "lemma41", _propagation_premise, _propagation_clauses, _propagation_sampler,
    {"a": [0, 4], "b": [0, 4], "eta": [0, 1], "f_x": "(a - eta min(1,a), a]", "lim_f": "(1 - eta min(1,a), 1]"},
)


def lemma41_chain_check(a: float, b: float, eta: float, f_x: float, lim_f: float) -> EntailmentReport:
    """``lim_f + (b/a) f_x > (1 + b)(1 - eta)`` under the two functional premises."""
    return check_point(R_PROPAGATION, a=a, b=b, eta=eta, f_x=f_x, lim_f=lim_f)


LEDGER: dict[str, Entailment] = {e.name: e for e in (AR_CONSTANTS, ORBIT_WINDOW, ETA_SELECTION, CREASE_CHAINS, R_PROPAGATION)}


def get_entailment(name: str) -> Entailment:
    try:
        return LEDGER[name]
    except KeyError:
        raise InputError(f"unknown ledger entry {name!r}; choose from {sorted(LEDGER)}") from None
