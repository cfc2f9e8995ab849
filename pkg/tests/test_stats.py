from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orderk.core import OrderParams
from orderk.exactdist import Pmf, pmf_table_y
from orderk.simulate import COMPOUND, simulate_y, stream_generator
from orderk.stats import (
    DegenerateTestError,
    _pool_edges,
    chi2_sf,
    chi_square_one_sample,
    chi_square_two_sample,
    counts_from_values,
    proportion_ci,
)

# Regularized upper incomplete gamma Q(df/2, x/2), 40 digits.
CHI2_REFERENCE = [((30.0, 20), 0.069853660699409767692), ((150.5, 97), 0.00040936907727300671741)]


def test_chi2_sf_frozen():
    for (x, df), ref in CHI2_REFERENCE:
        assert chi2_sf(x, df) == pytest.approx(ref, rel=1e-10)


@settings(max_examples=80, deadline=None)
@given(st.floats(0.01, 200.0), st.integers(1, 100))
def test_chi2_sf_matches_mpmath(x, df):
    mp.mp.dps = 30
    ref = float(mp.gammainc(mp.mpf(df) / 2, mp.mpf(x) / 2, mp.inf, regularized=True))
    assert abs(chi2_sf(x, df) - ref) <= 1e-10


def test_proportional_counts_give_zero_statistic():
    pmf = Pmf(np.array([0.25, 0.25, 0.5]), 0.0)
    res = chi_square_one_sample({0: 250, 1: 250, 2: 500}, pmf)
    assert res.statistic == pytest.approx(0.0, abs=1e-12)
    assert res.p_value == 1.0
    assert res.degrees_of_freedom == 2


def test_shifted_sample_is_rejected():
    p = OrderParams(2, 1.0)
    term = simulate_y(p, 100_000, stream_generator(0, 0), COMPOUND, times=False).terminal
    res = chi_square_one_sample(counts_from_values(term + 1), pmf_table_y(p))
    assert res.p_value < 1e-6


def test_one_sample_needs_data_and_bins():
    with pytest.raises(ValueError):
        chi_square_one_sample({0: 10}, Pmf(np.array([0.5, 0.5]), 0.0))
    with pytest.raises(DegenerateTestError):
        chi_square_one_sample({0: 200}, Pmf(np.array([1.0]), 0.0))


def test_two_sample_examples():
    a = {0: 300, 1: 500, 2: 200}
    assert chi_square_two_sample(a, dict(a)).statistic == pytest.approx(0.0, abs=1e-12)
    r = stream_generator(1, 0)
    y2 = simulate_y(OrderParams(2, 1.0), 100_000, r, times=False).terminal
    y3 = simulate_y(OrderParams(3, 1.0), 100_000, r, times=False).terminal
    assert chi_square_two_sample(counts_from_values(y2), counts_from_values(y3)).p_value < 1e-6


def test_proportion_ci_examples():
    est, half = proportion_ci(444, 1000)
    assert est == 0.444
    assert half == pytest.approx(1.959963984540054 * math.sqrt(0.444 * 0.556 / 1000))
    assert half == pytest.approx(0.0308, abs=5e-5)
    assert proportion_ci(0, 50) == (0.0, 0.0)
    assert proportion_ci(50, 50) == (1.0, 0.0)
    with pytest.raises(ValueError):
        proportion_ci(1, 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 20.0), min_size=1, max_size=60), st.floats(1.0, 10.0))
def test_pooling_keeps_every_count(expected, min_expected):
    expected = np.array(expected)
    edges = _pool_edges(expected, min_expected)
    assert edges[0] == 0 and all(a < b for a, b in zip(edges, edges[1:]))
    pooled = np.add.reduceat(expected, edges)
    assert math.fsum(pooled) == pytest.approx(math.fsum(expected))
    if len(edges) > 1:
        assert np.all(pooled >= min_expected)


@pytest.mark.slow
def test_calibration_over_200_seeds():
    p = OrderParams(2, 1.0)
    table = pmf_table_y(p)
    rejections = 0
    for seed in range(200):
        term = simulate_y(p, 100_000, stream_generator(seed, 0), COMPOUND, times=False).terminal
        rejections += chi_square_one_sample(counts_from_values(term), table).p_value < 0.01
    assert 0 <= rejections <= 4
