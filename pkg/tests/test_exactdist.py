from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orderk.core import OrderParams, ParameterError, WeightTable
from orderk.exactdist import (
    JumpLaw,
    jump_law_u,
    jump_law_w,
    jump_law_y,
    jump_law_z,
    order_i_mean,
    order_i_variance,
    pgf_u,
    pgf_weighted,
    pgf_y,
    pmf_iterated_u,
    pmf_order_i,
    pmf_table_u,
    pmf_table_weighted,
    pmf_table_y,
    pmf_weighted,
    weighted_tail_bound,
)
from orderk.subordinators import BernsteinFn

# Frozen from a 40-digit Panjer recursion f(n) = (i lam t / n) sum_h (g_h / i) f(n - g_h).
PANJER_I2 = [0.13533528323661269189, 0.13533528323661269189, 0.20300292485491903784,
             0.15789116377604813178, 0.14097425337147155187, 0.091351316184713568155,
             0.062216637154609441861]
PANJER_I3 = [0.049787068367863942979, 0.049787068367863942979, 0.074680602551795914469,
             0.10787198146370520979, 0.10164859791772221692, 0.10828687370010407197,
             0.10586666898777735586]
# 40-digit sums over r of Poisson(r; 1) * P[Y_{lam r}(1) = m], lam = beta = t = 1.
U_PMF_I1 = [0.53146360538661567282, 0.19551453415258811695, 0.13372015585876855388,
            0.072958646950641664598, 0.036145381738520267346]
U_PMF_I2 = [0.42119274782353533959, 0.057002239823905339113, 0.089360566871702784991,
            0.078248239942167836733, 0.07784511078728930613]
# Taylor coefficients of 1 - f(i lam - lam sum_j u^j) / f(i lam), 40 digits.
W_STABLE_HALF_I2 = [0.25, 0.28125, 0.0703125, 0.05712890625, 0.0340576171875]
W_GAMMA_I2 = [0.38799734565405663234, 0.42793824888315069743, 0.08536389121512260971,
              0.057233655881482974764, 0.01997167105999469469]
U_LAW_I2 = [0.15651764274966565182, 0.23477646412449847773, 0.18260391654127658365,
            0.16303921119756838478, 0.10564940885602431628]


def panjer(i, lt, n_max, g=None):
    """Independent double-precision Panjer recursion for the compound form."""
    g = g or list(range(1, i + 1))
    rate = i * lt
    f = [math.exp(-rate)]
    for n in range(1, n_max + 1):
        f.append(rate / n * math.fsum(h / i * f[n - h] for h in g if h <= n))
    return np.array(f)


def test_pmf_examples():
    assert pmf_order_i(OrderParams(3, 0.7, 1.3), 0) == pytest.approx(math.exp(-3 * 0.7 * 1.3), rel=1e-15)
    assert pmf_order_i(OrderParams(1, 1.0), 2) == pytest.approx(math.exp(-1) / 2, rel=1e-15)
    assert pmf_order_i(OrderParams(2, 1.0), 2) == pytest.approx(1.5 * math.exp(-2), rel=1e-15)


def test_pmf_frozen_panjer_values():
    for n, ref in enumerate(PANJER_I2):
        assert pmf_order_i(OrderParams(2, 1.0), n) == pytest.approx(ref, rel=1e-14)
    for n, ref in enumerate(PANJER_I3):
        assert pmf_order_i(OrderParams(3, 1.0), n) == pytest.approx(ref, rel=1e-14)


def test_weighted_examples():
    p = OrderParams(2, 1.0)
    g = WeightTable((2, 4))
    assert pmf_weighted(p, g, 2) == pytest.approx(math.exp(-2), rel=1e-15)
    assert pmf_weighted(p, g, 1) == 0.0
    table = pmf_table_weighted(p, g, 30)
    assert np.all(table.probs[1::2] == 0.0)


@pytest.mark.parametrize("i", [1, 2, 3, 4, 5])
def test_weighted_reduces_to_order_i(i):
    p = OrderParams(i, 0.8, 1.1)
    for n in range(21):
        assert pmf_weighted(p, WeightTable.identity(i), n) == pmf_order_i(p, n)


@pytest.mark.parametrize("i,lt", [(1, 0.5), (2, 1.0), (3, 3.0), (5, 3.0)])
def test_table_matches_enumeration_and_panjer(i, lt):
    p = OrderParams(i, 1.0, lt)
    table = pmf_table_y(p)
    ref = panjer(i, lt, table.n_max)
    np.testing.assert_allclose(table.probs, ref, rtol=1e-11, atol=1e-300)
    for n in range(0, min(table.n_max, 25)):
        assert table[n] == pytest.approx(pmf_order_i(p, n), rel=1e-12, abs=1e-300)


def test_table_weighted_ties_match_panjer():
    p, g = OrderParams(3, 0.9, 1.2), WeightTable((2, 2, 5))
    table = pmf_table_weighted(p, g, 40)
    np.testing.assert_allclose(table.probs, panjer(3, 0.9 * 1.2, 40, [2, 2, 5]), rtol=1e-11)


def test_pgf_examples():
    p = OrderParams(2, 1.0)
    assert pgf_y(p, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert pgf_y(p, 0.0) == pytest.approx(math.exp(-2), rel=1e-15)
    assert pgf_y(p, 0.5) == pytest.approx(math.exp(-1.25), rel=1e-15)
    table = pmf_table_y(p, tail_tol=1e-12)
    assert math.fsum(table.probs * 0.5 ** np.arange(table.n_max + 1)) == pytest.approx(
        math.exp(-1.25), abs=1e-12)
    with pytest.raises(ParameterError):
        pgf_y(p, 1.5)


@pytest.mark.parametrize("i", [1, 2, 3, 5])
@pytest.mark.parametrize("lt", [0.5, 1.0, 3.0])
def test_normalization_pgf_and_moments(i, lt):
    p = OrderParams(i, lt, 1.0)
    table = pmf_table_y(p)
    assert table.tail_bound < 1e-9
    assert 1 - 1e-9 <= table.total_mass() <= 1 + 1e-15
    assert 1 - 1e-9 <= table.total_mass() + table.tail_bound <= 1 + 1e-9
    for u in np.arange(1, 10) / 10:
        series = math.fsum(table.probs * u ** np.arange(table.n_max + 1))
        assert abs(series - pgf_y(p, u)) < 1e-8
    assert table.mean() == pytest.approx(lt * i * (i + 1) / 2, rel=1e-6)
    assert table.variance() == pytest.approx(lt * i * (i + 1) * (2 * i + 1) / 6, rel=1e-6)
    assert order_i_mean(p) == pytest.approx(lt * i * (i + 1) / 2)
    assert order_i_variance(p) == pytest.approx(lt * i * (i + 1) * (2 * i + 1) / 6)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.floats(0.05, 3.0), st.integers(0, 40))
def test_chernoff_tail_is_a_bound(i, lt, n):
    p = OrderParams(i, lt)
    g = WeightTable.identity(i)
    f = panjer(i, lt, n + 400)
    exact_tail = math.fsum(f[n + 1:])
    assert weighted_tail_bound(p, g, n) >= exact_tail * (1 - 1e-9) - 1e-300


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 5), min_size=1, max_size=3).map(sorted),
       st.floats(0.1, 2.0), st.floats(0.0, 1.0))
def test_weighted_pgf_matches_table(weights, lt, u):
    g = WeightTable(tuple(weights))
    p = OrderParams(len(weights), lt)
    table = pmf_table_weighted(p, g)
    assert np.all(table.probs >= 0)
    series = math.fsum(table.probs * u ** np.arange(table.n_max + 1))
    assert abs(series - pgf_weighted(p, g, u)) < 1e-8


def test_iterated_u_zero_term():
    for i, lam, beta, t in [(1, 1.0, 1.0, 1.0), (2, 0.7, 2.0, 1.5)]:
        p = OrderParams(i, lam, t)
        got = pmf_iterated_u(p, beta, 0)
        assert got.value == pytest.approx(math.exp(-beta * t * (1 - math.exp(-i * lam))), rel=1e-12)
        assert 0 <= got.truncation_bound < 1e-12


def test_iterated_u_frozen_values():
    for i, refs in ((1, U_PMF_I1), (2, U_PMF_I2)):
        p = OrderParams(i, 1.0)
        for m, ref in enumerate(refs):
            assert pmf_iterated_u(p, 1.0, m).value == pytest.approx(ref, rel=1e-11)


def test_iterated_u_table():
    p = OrderParams(2, 1.0)
    table = pmf_table_u(p, 1.0)
    assert 1 - 1e-9 <= table.total_mass() <= 1 + 1e-15
    np.testing.assert_allclose(table.probs[:5], U_PMF_I2, rtol=1e-11)
    series = math.fsum(table.probs * 0.3 ** np.arange(table.n_max + 1))
    assert series == pytest.approx(pgf_u(p, 1.0, 0.3), abs=1e-9)


def test_jump_law_y_and_z():
    assert jump_law_y(1).as_dict() == {1: 1.0}
    assert jump_law_y(4).as_dict() == {1: 0.25, 2: 0.25, 3: 0.25, 4: 0.25}
    assert math.fsum(jump_law_y(7).probs) == pytest.approx(1.0, abs=1e-15)
    assert jump_law_z((1, 2, 3)).as_dict() == jump_law_y(3).as_dict()
    law = jump_law_z((2, 2, 5)).as_dict()
    assert law == {2: pytest.approx(2 / 3), 5: pytest.approx(1 / 3)}
    assert jump_law_z((7,)).as_dict() == {7: 1.0}


def test_jump_law_validation():
    with pytest.raises(ParameterError):
        JumpLaw((0, 1), (0.5, 0.5))
    with pytest.raises(ParameterError):
        JumpLaw((1, 2), (0.7, 0.7))


def test_jump_law_w_examples():
    for alpha in (0.3, 0.5, 0.8):
        assert jump_law_w(BernsteinFn.stable(alpha), OrderParams(1, 1.0), 5).prob(1) == alpha
    law = jump_law_w(BernsteinFn.linear(2.5), OrderParams(3, 0.4), 8)
    assert [law.prob(h) for h in range(1, 9)] == pytest.approx([1 / 3] * 3 + [0.0] * 5, abs=1e-15)


def test_jump_law_w_frozen_taylor_coefficients():
    law = jump_law_w(BernsteinFn.stable(0.5), OrderParams(2, 1.0), 5)
    assert [law.prob(h) for h in range(1, 6)] == pytest.approx(W_STABLE_HALF_I2, rel=1e-13)
    law = jump_law_w(BernsteinFn.gamma(1.5, 2.0), OrderParams(2, 0.7), 5)
    assert [law.prob(h) for h in range(1, 6)] == pytest.approx(W_GAMMA_I2, rel=1e-12)


def test_jump_law_w_matches_mpmath_for_poisson_clock():
    mp.mp.dps = 30
    beta, i, lam = 1.3, 3, 0.6
    f = lambda x: beta * (1 - mp.e ** (-x))  # noqa: E731
    coeffs = mp.taylor(lambda u: 1 - f(i * lam - lam * sum(u**j for j in range(1, i + 1))) / f(i * lam), 0, 8)
    law = jump_law_w(BernsteinFn.poisson(beta), OrderParams(i, lam), 8)
    assert [law.prob(h) for h in range(1, 9)] == pytest.approx([float(c) for c in coeffs[1:]], rel=1e-12)


def test_jump_law_w_records_residual_mass():
    law = jump_law_w(BernsteinFn.stable(0.5), OrderParams(2, 1.0), 20)
    assert law.truncation_eps == pytest.approx(1 - math.fsum(law.probs), abs=1e-15)
    assert law.truncation_eps > 0


@pytest.mark.xfail(strict=True, reason="q(h) decays like h**-1.5, so 200 sizes leave about 0.049 of mass")
def test_jump_law_w_stable_mass_at_200_sizes():
    law = jump_law_w(BernsteinFn.stable(0.5), OrderParams(2, 1.0), 200)
    assert 1 - 1e-6 <= math.fsum(law.probs) <= 1


def test_jump_law_u_examples():
    p = OrderParams(1, 1.0)
    law = jump_law_u(p)
    assert law.prob(1) == pytest.approx(math.exp(-1) / (1 - math.exp(-1)), rel=1e-14)
    assert law.prob(1) == pytest.approx(0.581977, abs=5e-7)
    assert math.fsum(law.probs) + law.truncation_eps == pytest.approx(1.0, abs=1e-12)
    assert law.truncation_eps < 1e-12
    law2 = jump_law_u(OrderParams(2, 1.0))
    assert [law2.prob(h) for h in range(1, 6)] == pytest.approx(U_LAW_I2, rel=1e-13)
    lam, i = 0.37, 4
    assert jump_law_u(OrderParams(i, lam)).prob(1) == pytest.approx(
        lam * math.exp(-i * lam) / -math.expm1(-i * lam), rel=1e-13)
