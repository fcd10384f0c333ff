import csv
import io
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fptlab import iteration, zoo
from fptlab.errors import InputError, PreconditionError
from fptlab.space import ConvexBody


def _oracle_bound(delta: str, gamma: str):
    """Search-based oracle on exact decimals: smallest M with M*delta > 2,
    then the smallest L with L*gamma*(1-gamma)^M >= 1 via integer ceiling."""
    d, g = Fraction(delta), Fraction(gamma)
    m = 1
    while not m * d > 2:
        m += 1
    q = g * (1 - g) ** m
    big_l = -(-q.denominator // q.numerator)
    assert (big_l - 1) * q < 1 <= big_l * q
    return m, big_l, m * big_l + 1


# ---------------------------------------------------------------- ar_bound


@pytest.mark.parametrize(
    "delta, gamma, expected",
    [
        (0.5, 0.5, (5, 64, 321)),
        (0.25, 0.5, (9, 1024, 9217)),
        (0.1, 0.5, (21, 4194304, 88080385)),
        (0.9, 0.1, (3, 14, 43)),
    ],
)
def test_ar_bound_frozen(delta, gamma, expected):
    b = iteration.ar_bound(delta, gamma)
    assert (b.M, b.L, b.n0) == expected
    assert b.to_dict() == {"delta": delta, "gamma": gamma, "M": expected[0], "L": expected[1], "n0": expected[2]}


def test_ar_bound_delta_above_one():
    b = iteration.ar_bound(1.5, 0.5)
    assert b.n0 == 0


@pytest.mark.parametrize("delta, gamma", [(0.0, 0.5), (-0.1, 0.5), (0.5, 0.0), (0.5, 1.0)])
def test_ar_bound_rejects(delta, gamma):
    with pytest.raises(InputError):
        iteration.ar_bound(delta, gamma)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 99), st.integers(1, 99))
def test_ar_bound_matches_search_oracle(dp, gp):
    delta, gamma = dp / 100, gp / 100
    b = iteration.ar_bound(delta, gamma)
    assert (b.M, b.L, b.n0) == _oracle_bound(f"0.{dp:02d}", f"0.{gp:02d}")


def test_ar_bound_fast():
    import time

    best = math.inf
    for _ in range(5):
        t0 = time.perf_counter()
        iteration.ar_bound(0.25, 0.5)
        best = min(best, time.perf_counter() - t0)
    assert best < 1e-3


# ------------------------------------------------------------ averaged map


def test_averaged_map_examples():
    ident = iteration.averaged_map(zoo.identity(), 0.3)
    pts = np.array([[-0.7], [0.2]])
    assert np.allclose(ident.evaluate(pts), pts, rtol=0, atol=1e-15)

    mid = iteration.averaged_map(zoo.reflection(), 0.5)
    assert np.all(mid.evaluate(np.array([[-1.0], [0.3], [1.0]])) == 0.0)

    thr = iteration.averaged_map(zoo.interval_threshold(), 0.5)
    assert thr.evaluate(np.array([[2.0]]))[0, 0] == 1.0

    with pytest.raises(InputError):
        iteration.averaged_map(zoo.identity(), 1.0)


def test_averaged_residual_identity_random():
    rng = np.random.default_rng(4)
    for m in (zoo.interval_threshold(), zoo.rotation(), zoo.cyclic_shift(), zoo.reflection()):
        pts = m.body.sample_array(200, rng)
        for g in (0.1, 0.5, 0.9):
            tg = iteration.averaged_map(m, g)
            lhs = m.space.norms(tg.evaluate(pts) - pts)
            rhs = g * m.space.norms(m.evaluate(pts) - pts)
            assert np.all(np.abs(lhs - rhs) <= 1e-12)


# ------------------------------------------------------------------ orbits


def test_orbit_examples():
    tr = iteration.orbit(zoo.contraction_half(), 0.5, [1.0], 3)
    assert tr.iterates[:, 0].tolist() == [1.0, 0.75, 0.5625, 0.421875]
    assert tr.residuals.tolist() == [0.25, 0.1875, 0.140625]

    fixed = iteration.orbit(zoo.constant(), 0.5, [0.25], 5)
    assert np.all(fixed.iterates == 0.25) and np.all(fixed.residuals == 0)

    thr = iteration.orbit(zoo.interval_threshold(), 0.5, [3.0], 2)
    assert thr.iterates[:, 0].tolist() == [3.0, 2.0, 1.0]


def test_orbit_residuals_are_gamma_times_t_residuals():
    for g in (0.2, 0.5, 0.9):
        tr = iteration.orbit(zoo.rotation(), g, [0.6, -0.3], 50)
        assert np.all(np.abs(tr.residuals - g * tr.t_residuals[:-1]) <= 1e-12)
        assert tr.iterates.shape[0] == tr.t_residuals.shape[0] == tr.residuals.shape[0] + 1


def test_orbit_deterministic_bitwise():
    a = iteration.orbit(zoo.rotation(0.7), 0.35, [0.1, 0.9], 200)
    b = iteration.orbit(zoo.rotation(0.7), 0.35, [0.1, 0.9], 200)
    assert a.iterates.tobytes() == b.iterates.tobytes()
    assert a.to_csv() == b.to_csv()


def test_orbit_rejects_start_outside_body():
    with pytest.raises(InputError):
        iteration.orbit(zoo.contraction_half(), 0.5, [2.0], 3)


def test_batched_orbits_match_single():
    m = zoo.interval_threshold()
    starts = np.array([[0.3], [3.0], [2.2]])
    batch = iteration.orbits(m, 0.75, starts, 40)
    for row, tr in zip(starts, batch):
        single = iteration.orbit(m, 0.75, row, 40)
        assert np.array_equal(single.iterates, tr.iterates)


def test_residual_at_methods():
    tr = iteration.orbits(zoo.contraction_half(), 0.5, np.array([[1.0]]), 5000, stop_when_stationary=True)[0]
    assert tr.stationary_from is not None
    assert tr.residual_at(2) == (0.140625, "computed")
    assert tr.residual_at(10**12) == (0.0, "stationary")

    # -x/2 ends in a subnormal two-cycle rather than at 0
    ref = iteration.orbits(zoo.reflection(), 0.75, np.array([[0.9]]), 3000, stop_when_stationary=True)[0]
    value, how = ref.residual_at(10**9)
    assert how == "periodic" and value == float(ref.residuals[-1]) > 0

    short = iteration.orbit(zoo.contraction_half(), 0.5, [1.0], 3)
    assert short.residual_at(50) == (0.140625, "monotone_bound")


# ---------------------------------------------------------- monotonicity


def _attest(m, lam=0.5, step=0.005):
    return zoo.check_condition_C_lambda(m, lam, m.body.grid(step))


def test_monotonicity_examples():
    rep = iteration.verify_residual_monotonicity(
        iteration.orbit(zoo.contraction_half(), 0.5, [1.0], 30), _attest(zoo.contraction_half())
    )
    assert rep.monotone and rep.first_failure is None

    const = iteration.orbit(zoo.constant(), 0.5, [0.25], 10)
    assert iteration.verify_residual_monotonicity(const, _attest(zoo.constant())).monotone

    m = zoo.interval_threshold()
    tr = iteration.orbit(m, 0.5, [3.0], 30)
    assert tr.residuals[:3].tolist() == [1.0, 1.0, 0.5]
    assert iteration.verify_residual_monotonicity(tr, _attest(m)).monotone


def test_monotonicity_refuses_without_attestation():
    m = zoo.interval_threshold()
    tr = iteration.orbit(m, 0.5, [3.0], 10)
    with pytest.raises(PreconditionError):
        iteration.verify_residual_monotonicity(tr, zoo.check_nonexpansive(m, m.body.grid(0.01)))
    with pytest.raises(PreconditionError):
        # lambda above gamma
        iteration.verify_residual_monotonicity(iteration.orbit(m, 0.3, [3.0], 10), _attest(m, 0.5))
    with pytest.raises(PreconditionError):
        iteration.verify_residual_monotonicity(tr, _attest(zoo.contraction_half()))
    partial = zoo.check_condition_C_lambda(m, 0.5, [[0.0], [0.5], [1.0]])
    with pytest.raises(PreconditionError):
        iteration.verify_residual_monotonicity(tr, partial)
    l_rep = zoo.check_condition_L_witness(m, [[0.0]] * 20, [[0.0]])
    with pytest.raises(PreconditionError):
        iteration.verify_residual_monotonicity(tr, l_rep)


def test_monotonicity_detects_increase():
    # a hand-built nonexpansive report paired with a non-(C) map's orbit
    body = ConvexBody.interval(0, 1)
    jumpy = zoo.MappingSpec(
        "jumpy", body, zoo.FiniteTable([0.45, 0.55], [1.0, 0.3])
    )
    # 0.6 -> 0.45 -> 0.725: residuals 0.15 then 0.275
    tr = iteration.orbit(jumpy, 0.5, [0.6], 6)
    fake = zoo.ConditionReport("nonexpansive", None, 0.01, 1, [], "jumpy", ([0.0], [1.0]))
    rep = iteration.verify_residual_monotonicity(tr, fake)
    assert not rep.monotone and rep.first_failure == 1
    assert rep.max_increase >= 0.125 - 1e-15


# ---------------------------------------------------------------- identity


def test_orbit_identity_examples():
    aff = iteration.orbit(zoo.rotation(), 0.4, [0.5, 0.5], 60)
    assert iteration.verify_identity3(aff, zoo.rotation()) <= 1e-12

    m = zoo.interval_threshold()
    thr = iteration.orbit(m, 0.5, [3.0], 10)
    assert iteration.verify_identity3(thr, m) <= 1e-12

    c = zoo.contraction_half()
    assert iteration.verify_identity3(iteration.orbit(c, 0.9, [1.0], 100), c) <= 1e-10


def test_orbit_identity_mismatch():
    tr = iteration.orbit(zoo.contraction_half(), 0.5, [1.0], 5)
    with pytest.raises(InputError):
        iteration.verify_identity3(tr, zoo.reflection())
    impostor = zoo.MappingSpec("contraction_half", zoo.reflection().body, zoo.Affine([[-1.0]], [0.0]))
    with pytest.raises(InputError):
        iteration.verify_identity3(tr, impostor)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(0, 1000), st.sampled_from(["interval_threshold", "rotation", "cyclic_shift", "truncating_shift"]))
def test_orbit_identity_any_zoo_orbit(gamma, seed, name):
    m = zoo.zoo_map(name)
    x0 = m.body.sample_array(1, np.random.default_rng(seed))[0]
    tr = iteration.orbit(m, gamma, x0, 60)
    assert iteration.verify_identity3(tr, m) <= 1e-10


# ---------------------------------------------------------------- afps


def test_afps_extract():
    c = zoo.contraction_half()
    tr = iteration.orbit(c, 0.5, [1.0], 20)
    got = iteration.afps_extract(tr, 0.1)
    expected = [x for x in tr.iterates[:, 0] if abs(x) / 2 <= 0.1]
    assert [v.coords[0] for v in got] == expected
    assert len(iteration.afps_extract(tr, c.body.diameter())) == tr.iterates.shape[0]
    fixed = iteration.orbit(zoo.constant(), 0.5, [0.25], 4)
    assert len(iteration.afps_extract(fixed, 0.0)) == 5


# ----------------------------------------------------------------- CSV


def test_orbit_csv_layout():
    tr = iteration.orbit(zoo.rotation(), 0.5, [0.5, 0.0], 3)
    rows = list(csv.reader(io.StringIO(tr.to_csv())))
    assert rows[0] == ["step", "x0", "x1", "residual", "t_residual"]
    assert len(rows) == 5
    assert rows[-1][3] == ""
    assert float(rows[1][3]) == tr.residuals[0]
    assert float(rows[2][1]) == tr.iterates[1, 0]


# ------------------------------------------------------------- soundness


def test_bound_soundness_threshold_map():
    m = zoo.interval_threshold()
    starts = m.body.sample_array(20, np.random.default_rng(0))
    cases, traces = iteration.bound_soundness(m, 0.5, [0.5, 0.25, 0.1], starts)
    assert [c.n0 for c in cases] == [321, 9217, 88080385]
    assert all(c.passed for c in cases)
    assert len(traces) == 20
    assert cases[0].method == "computed"
    assert cases[2].method == "stationary"
