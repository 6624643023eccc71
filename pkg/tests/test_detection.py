import numpy as np
import pytest
from hypothesis import given, strategies as st

from wsndetect.detection import (LlrMap, CusumState, LocalRule, cusum_path, cusum_step, llr,
                                 local_decision)
from wsndetect.errors import DomainError

from oracles import partial_sum_oracle

increments = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=60)


def test_llr_values():
    assert llr(1.0, 1.0, 1.0, 1.0) == pytest.approx(0.5)
    assert llr(0.0, 1.0, 1.0, 1.0) == pytest.approx(-0.5)
    assert llr(0.5, 1.0, 1.0, 1.0) == 0.0
    assert llr(0.0, 2.0, 1.0, 0.25) == pytest.approx(-0.125)


def test_llr_matches_density_ratio():
    from scipy.stats import norm
    x = np.linspace(-3, 4, 15)
    mu, sigma = 0.7, 1.3
    expect = norm.logpdf(x, mu, sigma) - norm.logpdf(x, 0, sigma)
    np.testing.assert_allclose(llr(x, 1.0, sigma, mu), expect, rtol=1e-12, atol=1e-12)


def test_llr_rejects_bad_sigma():
    with pytest.raises(DomainError):
        LlrMap.gaussian(1.0, 0.0, 1.0)


def test_cusum_step_examples():
    s = cusum_step(CusumState(threshold=1.0), 1.2)
    assert s.c_stat == pytest.approx(1.2) and s.crossed_once and s.in_excursion
    s = cusum_step(s, -0.5)
    assert s.c_stat == pytest.approx(0.7)
    assert local_decision(s, "MAX") == 1
    assert local_decision(s, "HALL") == 1
    assert local_decision(s, "ALL") == 0
    s = cusum_step(s, -3.0)
    assert s.c_stat == 0.0
    assert (local_decision(s, "MAX"), local_decision(s, "HALL"), local_decision(s, "ALL")) == (1, 0, 0)


def test_crossing_is_inclusive():
    s = cusum_step(CusumState(threshold=2.0), 2.0)
    assert local_decision(s, LocalRule.ALL) == 1


def test_state_validation():
    with pytest.raises(DomainError):
        CusumState(c_stat=-1.0)
    with pytest.raises(DomainError):
        CusumState(in_excursion=True, crossed_once=False)
    with pytest.raises(DomainError):
        CusumState(threshold=0.0)


def test_cusum_equals_partial_sum_oracle_on_random_sequences():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        z = list(rng.normal(-0.2, 1.0, size=int(rng.integers(1, 40))))
        got = [s.c_stat for s in cusum_path(z, 3.0)]
        np.testing.assert_allclose(got, partial_sum_oracle(z), rtol=0, atol=1e-12)


@given(increments, st.floats(0.1, 5))
def test_decision_hierarchy(z, c):
    for s in cusum_path(z, c):
        d_max, d_hall, d_all = (local_decision(s, r) for r in ("MAX", "HALL", "ALL"))
        assert s.c_stat >= 0
        assert d_all <= d_hall <= d_max


@given(increments, st.floats(0.1, 5))
def test_max_latches_and_hall_clears_only_at_zero(z, c):
    path = cusum_path(z, c)
    for prev, cur in zip(path, path[1:]):
        if prev.crossed_once:
            assert cur.crossed_once
        if prev.in_excursion and not cur.in_excursion:
            assert cur.c_stat == 0.0


@given(increments, st.floats(0.1, 5))
def test_max_decision_is_running_max_of_oracle(z, c):
    oracle = partial_sum_oracle(z)
    for k, s in enumerate(cusum_path(z, c)):
        assert s.crossed_once == (max(oracle[:k + 1]) >= c)
