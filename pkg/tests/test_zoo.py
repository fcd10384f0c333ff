import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fptlab import zoo
from fptlab.errors import InputError, MappingError
from fptlab.space import TAU, ConvexBody

LAMBDAS = [0.1, 0.25, 0.5, 0.75, 0.9]


def _brute_pairs(fn, xs, lam=None, tau=TAU):
    """Pure-python double loop over ordered pairs of a 1-D grid."""
    found = set()
    for x in xs:
        tx = fn(x)
        for y in xs:
            if x == y:
                continue
            dx = abs(x - y)
            if lam is not None and not lam * abs(x - tx) <= dx + tau:
                continue
            if abs(tx - fn(y)) > dx + tau:
                found.add(((x,), (y,)))
    return found


def _threshold_fn(x):
    return 1.0 if abs(x - 3.0) <= TAU * 3.0 else 0.0


# ------------------------------------------------------------- examples


def test_contraction_and_identity_are_nonexpansive():
    for m in (zoo.contraction_half(), zoo.identity(), zoo.identity(2), zoo.rotation(), zoo.cyclic_shift()):
        step = 0.01 if m.space.dimension == 1 else 0.2
        rep = zoo.check_nonexpansive(m, m.body.grid(step))
        assert rep.verdict == "no_violation_found", m.name
        assert rep.pairs_checked > 0


def test_threshold_fails_nonexpansive_with_witness():
    m = zoo.interval_threshold()
    grid = m.body.grid(0.01)
    rep = zoo.check_nonexpansive(m, grid)
    assert rep.verdict == "violated"
    pairs = {(round(v.x[0], 9), round(v.y[0], 9)) for v in rep.violations}
    assert (3.0, 2.99) in pairs
    v = next(v for v in rep.violations if v.x[0] == 3.0 and abs(v.y[0] - 2.99) < 1e-9)
    assert v.lhs == 1.0 and v.rhs == pytest.approx(0.01, abs=1e-12)


def test_threshold_satisfies_condition_C():
    m = zoo.interval_threshold()
    rep = zoo.check_condition_C_lambda(m, 0.5, m.body.grid(0.005))
    assert rep.condition == "C"
    assert rep.verdict == "no_violation_found"
    assert rep.grid_resolution == pytest.approx(0.005, abs=1e-12)
    assert rep.pairs_checked == 601 * 600


def test_lambda_out_of_range():
    m = zoo.interval_threshold()
    for lam in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(InputError):
            zoo.check_condition_C_lambda(m, lam, m.body.grid(0.5))


def test_map_leaving_body_is_hard_error():
    bad = zoo.MappingSpec("escape", ConvexBody.interval(0, 1), zoo.Affine([[1.0]], [0.5]))
    with pytest.raises(MappingError):
        zoo.check_nonexpansive(bad, bad.body.grid(0.1))


def test_grid_outside_body_rejected():
    m = zoo.contraction_half()
    with pytest.raises(InputError):
        zoo.check_nonexpansive(m, [[0.0], [2.0]])


# ----------------------------------------------------- brute-force oracle


@pytest.mark.parametrize("lam", [None] + LAMBDAS)
def test_checker_matches_brute_force(lam):
    m = zoo.interval_threshold()
    grid = m.body.grid(0.05)
    xs = [float(v) for v in grid[:, 0]]
    expected = _brute_pairs(_threshold_fn, xs, lam)
    if lam is None:
        rep = zoo.check_nonexpansive(m, grid)
    else:
        rep = zoo.check_condition_C_lambda(m, lam, grid)
    assert rep.violation_pairs() == expected
    assert rep.verdict == ("violated" if expected else "no_violation_found")


def test_parametric_family_brute_force():
    # special value 2: x = 3 moves by 1, so lambda * 1 <= |3 - y| admits y = 2.5
    m = zoo.interval_threshold(special=2.0)
    grid = m.body.grid(0.05)
    xs = [float(v) for v in grid[:, 0]]
    fn = lambda x: 2.0 if abs(x - 3.0) <= 3 * TAU else 0.0
    for lam in (0.25, 0.5):
        rep = zoo.check_condition_C_lambda(m, lam, grid)
        assert rep.violation_pairs() == _brute_pairs(fn, xs, lam)
        assert rep.verdict == "violated"


# ------------------------------------------------------------ invariants


def test_lambda_monotone_subsets():
    for special in (1.0, 2.0, 0.5):
        m = zoo.interval_threshold(special=special)
        grid = m.body.grid(0.01)
        sets = [zoo.check_condition_C_lambda(m, lam, grid).violation_pairs() for lam in LAMBDAS]
        for lo, hi in zip(sets, sets[1:]):
            assert hi <= lo


def test_nonexpansive_implies_every_C_lambda():
    for m in (zoo.contraction_half(), zoo.reflection(), zoo.constant()):
        grid = m.body.grid(0.02)
        assert zoo.check_nonexpansive(m, grid).verdict == "no_violation_found"
        for lam in LAMBDAS:
            assert zoo.check_condition_C_lambda(m, lam, grid).verdict == "no_violation_found"


@pytest.mark.parametrize("r", [0.5, 3.0])
@pytest.mark.parametrize("lam", LAMBDAS)
def test_scale_invariance(r, lam):
    m = zoo.interval_threshold(special=2.0)
    grid = m.body.grid(0.02)
    base = zoo.check_condition_C_lambda(m, lam, grid)
    s = zoo.rescale_map(m, r)
    scaled = zoo.check_condition_C_lambda(s, lam, grid / r)
    assert base.verdict == scaled.verdict
    assert len(base.violations) == len(scaled.violations)
    a = sorted((v.x[0], v.y[0]) for v in base.violations)
    b = sorted((v.x[0] * r, v.y[0] * r) for v in scaled.violations)
    assert np.allclose(a, b, atol=1e-12) if a else b == []


def test_violations_replay():
    m = zoo.interval_threshold()
    rep = zoo.check_nonexpansive(m, m.body.grid(0.01))
    for v in rep.violations:
        lhs, rhs = zoo.replay_violation(m, v)
        assert abs(lhs - v.lhs) <= 1e-12 and abs(rhs - v.rhs) <= 1e-12
        assert lhs > rhs + TAU


def test_ordered_pairs_both_directions():
    m = zoo.interval_threshold(special=2.0)
    rep = zoo.check_condition_C_lambda(m, 0.25, m.body.grid(0.05))
    pairs = rep.violation_pairs()
    # only x = 3 moves, so the premise can fail for (3, y) but never for (y, 3)
    assert any(p[0] == (3.0,) for p in pairs)
    assert any(p[1] == (3.0,) for p in pairs)
    assert pairs != {(q, p) for p, q in pairs}


def test_violations_sorted():
    m = zoo.interval_threshold()
    rep = zoo.check_nonexpansive(m, m.body.grid(0.05))
    keys = [v.x + v.y for v in rep.violations]
    assert keys == sorted(keys)


# ------------------------------------------------------------ rescaling


def test_rescale_examples():
    half = zoo.rescale_map(zoo.contraction_half(), 2.0)
    assert half.body.bounding_box()[1].tolist() == [0.5]
    assert half(np.array([0.4]))[0] == pytest.approx(0.2)

    m = zoo.interval_threshold()
    s = zoo.rescale_map(m, 3.0)
    lo, hi = s.body.bounding_box()
    assert lo.tolist() == [0.0] and hi.tolist() == [1.0]
    assert s(np.array([1.0]))[0] == pytest.approx(1 / 3)
    assert s(np.array([0.7]))[0] == 0.0

    assert zoo.rescale_map(m, 1.0) is m
    with pytest.raises(InputError):
        zoo.rescale_map(m, -1.0)


# ------------------------------------------------------------ L witness


def test_L_witness_examples():
    m = zoo.contraction_half()
    afps = [[2.0**-n] for n in range(1, 40)]
    rep = zoo.check_condition_L_witness(m, afps, m.body.grid(0.1))
    assert rep.verdict == "no_violation_found"

    ident = zoo.identity()
    rep = zoo.check_condition_L_witness(ident, [[0.3]] * 20, ident.body.grid(0.1))
    assert rep.verdict == "no_violation_found"

    const = zoo.constant()
    rep = zoo.check_condition_L_witness(const, [[0.25]] * 20, [[0.25]])
    assert rep.verdict == "no_violation_found"

    with pytest.raises(InputError):
        zoo.check_condition_L_witness(m, afps[:3], [[0.0]], tail_window=5)


def test_L_witness_detects_violation():
    # reflection with an afps far from 0 is not a witness for clause (ii)
    m = zoo.reflection()
    rep = zoo.check_condition_L_witness(m, [[0.9]] * 20, [[0.8]])
    assert rep.verdict == "violated"


# ---------------------------------------------------------------- JSON


def test_mapping_json_round_trip():
    for m in (zoo.contraction_half(), zoo.interval_threshold(special=2.0), zoo.truncating_shift(), zoo.rotation()):
        back = zoo.MappingSpec.from_dict(m.to_dict())
        pts = m.body.grid(0.5)
        assert np.allclose(back.evaluate(pts), m.evaluate(pts))
    ref = zoo.MappingSpec.from_dict({"zoo": "interval_threshold", "params": {"special": 0.5}})
    assert ref.name == "interval_threshold_r0.5"


def test_finite_table_nearest_input():
    body = ConvexBody.interval(0, 1)
    m = zoo.MappingSpec("table", body, zoo.FiniteTable([0.0, 0.5, 1.0], [1.0, 0.5, 0.0]))
    assert m.evaluate(np.array([[0.2], [0.3], [0.9]])).ravel().tolist() == [1.0, 0.5, 0.0]
    data = m.to_dict()
    assert zoo.MappingSpec.from_dict(data).evaluate(np.array([[0.26]]))[0, 0] == 0.5


def test_unknown_zoo_name():
    with pytest.raises(InputError):
        zoo.zoo_map("nope")


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 3.0), st.sampled_from([0.25, 0.5, 0.75]))
def test_threshold_family_verdicts_match_brute_force(special, lam):
    m = zoo.interval_threshold(special=special)
    grid = m.body.grid(0.1)
    xs = [float(v) for v in grid[:, 0]]
    fn = lambda x: special if abs(x - 3.0) <= 3 * TAU else 0.0
    rep = zoo.check_condition_C_lambda(m, lam, grid)
    assert rep.violation_pairs() == _brute_pairs(fn, xs, lam)


def test_closure_rule():
    body = ConvexBody.interval(-1, 1)
    m = zoo.MappingSpec("sine_half", body, zoo.Closure(lambda x: 0.5 * np.sin(x)))
    rep = zoo.check_nonexpansive(m, body.grid(0.05))
    assert rep.verdict == "no_violation_found"
    assert math.isclose(m(np.array([1.0]))[0], 0.5 * math.sin(1.0))
