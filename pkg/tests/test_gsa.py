import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fewpixel.core import BudgetExhausted, BudgetedModel
from fewpixel.gsa import (GsaParams, VisitingDistribution, acceptance_probability, anneal,
                          temperature, visiting_step)

# 50-digit mpmath evaluation of the closed-form schedule at q_v=2.62, T1=5230, t=100
T100_ORACLE = 6.1447401516849955


def sphere(x):
    return float(np.dot(x, x))


def test_temperature_at_one_is_T1():
    assert temperature(1, GsaParams(T1=5230.0)) == pytest.approx(5230.0, rel=1e-15)


def test_temperature_hand_value():
    assert temperature(2, GsaParams(q_v=3.0, T1=80.0)) == pytest.approx(30.0, rel=1e-12)


def test_visiting_law_rejects_q_v_3():
    with pytest.raises(ValueError):
        VisitingDistribution(3.0)


def test_temperature_matches_high_precision_oracle():
    assert temperature(100, GsaParams()) == pytest.approx(T100_ORACLE, rel=1e-9)


def test_temperature_rejects_t_below_one():
    with pytest.raises(ValueError):
        temperature(0)


@settings(max_examples=200, deadline=None)
@given(st.floats(1.01, 2.99), st.integers(1, 10**6))
def test_temperature_decreasing(q_v, t):
    p = GsaParams(q_v=q_v)
    assert temperature(1, p) == pytest.approx(p.T1, rel=1e-12)
    assert temperature(t + 1, p) < temperature(t, p)


def test_params_validation():
    for kw in ({"q_v": 1.0}, {"q_v": 3.01}, {"T1": 0.0}, {"restart_ratio": 1.0}):
        with pytest.raises(ValueError):
            GsaParams(**kw)


@pytest.mark.parametrize("mode", ["simple", "generalized"])
def test_improvement_always_accepted(mode):
    assert acceptance_probability(-0.5, 3.0, GsaParams(), mode) == 1.0
    assert acceptance_probability(0.0, 3.0, GsaParams(), mode) == 1.0


def test_simple_acceptance_at_delta_equal_T():
    assert acceptance_probability(2.5, 2.5, mode="simple") == pytest.approx(math.exp(-1), abs=1e-9)


def test_generalized_acceptance_nonpositive_base():
    # q_a = -5: base is 1 - 6 dE / T
    assert acceptance_probability(1.0, 6.0, GsaParams(q_a=-5.0)) == 0.0
    assert acceptance_probability(2.0, 6.0, GsaParams(q_a=-5.0)) == 0.0
    p = acceptance_probability(0.5, 6.0, GsaParams(q_a=-5.0))
    assert p == pytest.approx(0.5 ** (1 / 6))


def test_acceptance_rejects_nonfinite():
    with pytest.raises(ValueError):
        acceptance_probability(float("nan"), 1.0)
    with pytest.raises(ValueError):
        acceptance_probability(1.0, 0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(1e-6, 1e4), st.floats(-10, 0.99),
       st.sampled_from(["simple", "generalized"]))
def test_acceptance_in_unit_interval(de, T, q_a, mode):
    p = acceptance_probability(de, T, GsaParams(q_a=q_a), mode)
    assert 0.0 <= p <= 1.0


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 10), st.floats(1e-3, 10), st.floats(0.1, 100))
def test_simple_acceptance_monotone(a, b, T):
    lo, hi = sorted((a, b))
    assert acceptance_probability(hi, T, mode="simple") <= acceptance_probability(lo, T, mode="simple")


class ZeroRng:
    def standard_normal(self, size):
        return np.zeros(size)


def test_zero_gaussians_give_zero_step():
    cur = np.array([1.0, 2.0, 3.0])
    out = visiting_step(cur, 100.0, GsaParams(), ZeroRng(), (np.zeros(3), np.full(3, 10.0)))
    assert np.array_equal(out, cur)


def test_visiting_step_deterministic():
    b = (np.zeros(5), np.full(5, 32.0))
    a1 = visiting_step(np.full(5, 3.0), 50.0, GsaParams(), np.random.default_rng(9), b)
    a2 = visiting_step(np.full(5, 3.0), 50.0, GsaParams(), np.random.default_rng(9), b)
    assert np.array_equal(a1, a2)


def test_heavier_steps_at_higher_temperature():
    dist = VisitingDistribution(2.62)
    rng = np.random.default_rng(0)
    med = {}
    for T in (5230.0, 5.23):
        g = rng.standard_normal((2, 10_000))
        med[T] = np.median(np.abs(dist.step(T, g[0], g[1])))
    assert med[5230.0] > med[5.23]


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-4, 1e4), st.integers(0, 2**32 - 1), st.floats(1.05, 2.95))
def test_candidates_stay_in_bounds(T, seed, q_v):
    rng = np.random.default_rng(seed)
    lo, hi = np.array([0.0, 0.0, -5.0]), np.array([32.0, 256.0, 5.0])
    cur = rng.uniform(lo, hi)
    out = visiting_step(cur, T, GsaParams(q_v=q_v), rng, (lo, hi))
    assert np.all(out >= lo) and np.all(out < hi)


def test_immediate_success_uses_one_call():
    res = anneal(lambda x: (0.0, True), [(0, 1)] * 3, np.full(3, 0.5), rng=0)
    assert res.success and res.calls == 1


def test_budget_exhaustion_returns_failure():
    model = BudgetedModel(lambda x: sphere(x), budget=10)
    res = anneal(lambda x: (model.score(x), False), [(-5, 5)] * 5, rng=1)
    assert not res.success
    assert res.calls == 10 == model.calls_used


def test_max_calls_cap():
    res = anneal(sphere, [(-5, 5)] * 5, rng=1, max_calls=37)
    assert res.calls == 37 and not res.success


def test_anneal_deterministic():
    r1 = anneal(sphere, [(-5, 5)] * 5, rng=4, max_calls=500)
    r2 = anneal(sphere, [(-5, 5)] * 5, rng=4, max_calls=500)
    assert np.array_equal(r1.x, r2.x) and r1.trace == r2.trace


def test_anneal_rejects_init_outside_bounds():
    with pytest.raises(ValueError):
        anneal(sphere, [(-5, 5)] * 2, np.array([0.0, 5.0]))


def test_restart_reseats_at_best():
    # a tiny restart window forces many restarts; best must never get worse
    res = anneal(sphere, [(-5, 5)] * 3, rng=2, max_calls=3000,
                 params=GsaParams(restart_ratio=0.5))
    values = [v for _, v in res.trace]
    assert values == sorted(values, reverse=True)
    assert res.fun == values[-1]


def test_simple_mode_and_visiting_temperature_run():
    for p in (GsaParams(mode="simple"), GsaParams(accept_temperature="visiting")):
        res = anneal(sphere, [(-5, 5)] * 5, params=p, rng=0, max_calls=3000)
        assert res.fun < 1.0
