import math
from fractions import Fraction

import numpy as np
import pytest

from fptlab import ledger
from fptlab.errors import InputError
from fptlab.ledger import Clause, Entailment


# ---------------------------------------------------------------- clauses


def test_clause_slack_float_vs_exact():
    assert Clause("c", 1.0 + 5e-13, 1.0, "<=").holds()
    assert not Clause("c", 1.0 + 1e-11, 1.0, "<=").holds()
    # rationals get no slack
    assert not Clause("c", Fraction(1, 1) + Fraction(1, 10**15), Fraction(1), "<=").holds()
    assert Clause("c", Fraction(1, 3), Fraction(2, 6), "==").holds()
    with pytest.raises(ValueError):
        Clause("c", 1, 2, "!=").holds()


def test_rng_streams_independent_and_reproducible():
    a = ledger.rng_stream(0, "alpha").random(4)
    b = ledger.rng_stream(0, "alpha").random(4)
    c = ledger.rng_stream(0, "beta").random(4)
    d = ledger.rng_stream(1, "alpha").random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)


# ------------------------------------------------- asymptotic regularity


def test_ar_example_half_half():
    rep = ledger.thm21_constants_check(0.5, 0.5)
    assert rep.verdict == "holds_on_samples"
    assert rep.details["M"] == 5 and rep.details["L"] == 64
    assert rep.details["telescoped_sum"] == pytest.approx(0.46875, abs=1e-15)


def test_ar_exact_mode():
    for delta, gamma in [(0.5, 0.5), (0.9, 0.1), (0.1, 0.5), (0.33, 0.77)]:
        rep = ledger.thm21_constants_check(delta, gamma, exact=True)
        assert rep.verdict == "holds_on_samples"
    assert ledger.thm21_constants_check(0.9, 0.1).details["M"] == 3


def test_ar_exact_cover_is_rational():
    clauses = ledger._ar_clauses(0.5, 0.5, exact=True)
    cover = next(c for c in clauses if c.name == "cover")
    assert isinstance(cover.lhs, Fraction) and cover.lhs == 1
    assert cover.rhs == Fraction(1, 2)


def test_ar_rejects_out_of_range():
    with pytest.raises(InputError):
        ledger.thm21_constants_check(1.0, 0.5)


# --------------------------------------------------------- orbit window


def test_orbit_window_examples():
    rep = ledger.lemma33_region_check(0.9, 0.001, 5, 0.5, 0.5)
    assert rep.verdict == "holds_on_samples"
    clauses = {c.name: c for c in ledger._window_clauses(0.9, 0.001, 5, 0.5, 0.5)}
    assert clauses["fact2_k1"].lhs == pytest.approx(0.201)
    assert clauses["chain_k5"].rhs == pytest.approx(0.9 - 7 * 0.001)
    assert ledger.lemma33_region_check(0.6, 0.001, 5, 0.5, 0.5).verdict == "premise_never_satisfied"


# -------------------------------------------------------- eta selection


def test_eta_selection_examples():
    rep = ledger.lemma_zn_param_check(0.1, 0.75, 10)
    assert rep.verdict == "holds_on_samples"
    assert rep.details["window"][1] == pytest.approx(1 / 120, abs=1e-15)

    near = ledger.lemma_zn_param_check(0.5, 0.67, 100)
    assert near.verdict == "holds_on_samples"
    assert near.details["window"][1] == pytest.approx((0.67 - 2 / 3) / 100, rel=1e-9)

    assert ledger.lemma_zn_param_check(0.1, 2 / 3, 10).verdict == "premise_never_satisfied"


# -------------------------------------------------------- crease chains


@pytest.mark.parametrize("eps", [0.01, 0.05, 0.1])
def test_crease_identities(eps):
    for r in (1.0, 5.0, 0.37):
        clauses = {c.name: c for c in ledger._crease_clauses(eps, r)}
        assert abs(clauses["b1_chain"].lhs - (2 - 8 * eps)) <= 1e-12
        assert abs(clauses["d_chain"].lhs - (1 + 8 * eps)) <= 1e-12
    assert ledger.przs_chain_check(eps, 5.0).verdict == "holds_on_samples"


def test_crease_example_values_and_limit():
    clauses = {c.name: c for c in ledger._crease_clauses(0.01, 1.0)}
    assert clauses["b1_chain"].lhs == pytest.approx(1.92, abs=1e-12)
    assert clauses["d_chain"].lhs == pytest.approx(1.08, abs=1e-12)
    tiny = {c.name: c for c in ledger._crease_clauses(1e-12, 2.0)}
    assert tiny["b1_chain"].lhs == pytest.approx(2.0, abs=1e-10)
    assert tiny["d_chain"].lhs == pytest.approx(1.0, abs=1e-10)


# ------------------------------------------------------- R propagation


def test_R_propagation_examples():
    rep = ledger.lemma41_chain_check(2.0, 1.0, 0.1, 1.95, 0.95)
    assert rep.verdict == "holds_on_samples"
    clauses = {c.name: c for c in ledger._propagation_clauses(2.0, 1.0, 0.1, 1.95, 0.95)}
    assert clauses["conclusion"].lhs == pytest.approx(1.925)
    assert clauses["conclusion"].rhs == pytest.approx(1.8)
    # boundary values miss the strict premise when a < 1
    a, b, eta = 0.5, 1.0, 0.2
    edge = ledger.lemma41_chain_check(a, b, eta, a * (1 - eta), 1 - eta)
    assert edge.verdict == "premise_never_satisfied"


# ----------------------------------------------------------------- sweeps


@pytest.mark.parametrize("name", sorted(ledger.LEDGER))
def test_sweeps_hold(name):
    rep = ledger.sweep(ledger.LEDGER[name], 10_000, seed=0)
    assert rep.verdict == "holds_on_samples"
    assert rep.premise_hits == 10_000
    assert not rep.degenerate
    assert rep.premise_hits <= rep.samples


@pytest.mark.parametrize("name", sorted(ledger.LEDGER))
def test_sweeps_reproducible(name):
    a = ledger.sweep(ledger.LEDGER[name], 500, seed=3).to_dict()
    b = ledger.sweep(ledger.LEDGER[name], 500, seed=3).to_dict()
    assert a == b


def test_seed_changes_draws_not_verdicts():
    ent = ledger.LEDGER["lemma41"]
    a, b = ledger.sweep(ent, 2000, seed=7), ledger.sweep(ent, 2000, seed=9)
    assert a.verdict == b.verdict == "holds_on_samples"


def _broken():
    # conclusion x < 0.5 is false on half the region
    return Entailment(
        "broken",
        lambda x: 0 <= x <= 1,
        lambda x: [Clause("x_small", x, 0.5, "<")],
        lambda rng, n: [{"x": float(v)} for v in rng.random(n)],
        {"x": [0, 1]},
    )


def test_violations_are_reported_and_replay():
    ent = _broken()
    rep = ledger.sweep(ent, 200, seed=0)
    assert rep.verdict == "violated"
    assert rep.violations
    for v in rep.violations:
        again = ledger.replay(ent, v)
        assert again is not None and again.lhs == v.lhs and again.rhs == v.rhs


def test_degenerate_region_flagged():
    ent = Entailment(
        "needle",
        lambda x: abs(x - 0.5) < 1e-9,
        lambda x: [Clause("ok", 0, 1, "<")],
        lambda rng, n: [{"x": float(v)} for v in rng.random(n)],
        {"x": [0, 1]},
    )
    rep = ledger.sweep(ent, 10, seed=0, max_draws=50_000)
    assert rep.premise_hits == 0
    assert rep.verdict == "premise_never_satisfied"
    assert rep.degenerate


def test_report_json_fields():
    d = ledger.sweep(ledger.LEDGER["przs"], 100).to_dict()
    assert {"name", "region", "samples", "premise_hits", "violations", "verdict"} <= set(d)


def test_unknown_entry():
    with pytest.raises(InputError):
        ledger.get_entailment("nope")


def test_sweeps_fast():
    import time

    t0 = time.perf_counter()
    for ent in ledger.LEDGER.values():
        ledger.sweep(ent, 10_000, seed=0)
    assert time.perf_counter() - t0 < 10.0


def test_eta_handoff_detail_is_informational():
    rep = ledger.lemma_zn_param_check(0.1, 0.75, 10)
    assert isinstance(rep.details["window_premises_at_eta"], bool)
    assert not math.isnan(rep.details["eta"])
