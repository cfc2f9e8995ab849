"""Exact laws of the order-i process ``Y``, its weighted form ``Z``, the
Poisson-subordinated process ``U`` and the single-jump laws of all four
processes (``Y``, ``Z``, ``W``, ``U``).

Every pmf is the composition sum

    P[Z(t) = n] = sum_{x : sum_j g(j) x_j = n} exp(-i lam t) (lam t)^{|x|} / prod_j x_j!

evaluated term by term in log space.  Tables carry a Chernoff tail bound, so
``probs.sum() + tail_bound >= 1`` is certified rather than assumed.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammainc

from .core import (
    CompositionTerms,
    OrderParams,
    ParameterError,
    WeightTable,
    composition_terms,
    iter_compositions,
    validate_params,
)
from .subordinators import BernsteinFn, bernstein_value, log_abs_deriv

DEFAULT_TAIL_TOL = 1e-9
DEFAULT_SERIES_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probabilities on ``0..n_max`` plus a bound on the mass beyond."""

    probs: np.ndarray
    tail_bound: float

    @property
    def n_max(self) -> int:
        return len(self.probs) - 1

    def __getitem__(self, n: int) -> float:
        return float(self.probs[n]) if 0 <= n <= self.n_max else 0.0

    def total_mass(self) -> float:
        return math.fsum(self.probs)

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)

    def moment(self, order: int) -> float:
        n = np.arange(self.n_max + 1, dtype=np.float64)
        return math.fsum(n**order * self.probs)

    def mean(self) -> float:
        return self.moment(1)

    def variance(self) -> float:
        mu = self.mean()
        return self.moment(2) - mu * mu


@dataclass(frozen=True)
class JumpLaw:
    """Law of one nonzero jump of a pure-jump process.

    ``probs`` is never renormalised; ``truncation_eps`` is the mass of jump
    sizes that were not tabulated (``1 - sum(probs)``, floored at 0).
    """

    sizes: tuple[int, ...]
    probs: tuple[float, ...]
    truncation_eps: float = 0.0

    def __post_init__(self) -> None:
        if len(self.sizes) != len(self.probs):
            raise ParameterError("sizes and probs must have equal length")
        if any(s < 1 for s in self.sizes):
            raise ParameterError(f"jump sizes must be >= 1, got {self.sizes}")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ParameterError("jump sizes must be strictly increasing")
        if any(q < 0 for q in self.probs) or math.fsum(self.probs) > 1 + 1e-12:
            raise ParameterError("jump probabilities must be nonnegative with total <= 1")

    @classmethod
    def from_mapping(cls, table: Mapping[int, float]) -> JumpLaw:
        sizes = tuple(sorted(table))
        probs = tuple(float(table[s]) for s in sizes)
        return cls(sizes, probs, max(0.0, 1.0 - math.fsum(probs)))

    def prob(self, h: int) -> float:
        try:
            return self.probs[self.sizes.index(h)]
        except ValueError:
            return 0.0

    def dense(self, h_max: int) -> np.ndarray:
        """``q(0..h_max)`` as an array (``q(0) = 0``)."""
        out = np.zeros(h_max + 1)
        for s, q in zip(self.sizes, self.probs):
            if s <= h_max:
                out[s] = q
        return out

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.sizes, self.probs))

    @property
    def max_size(self) -> int:
        return self.sizes[-1] if self.sizes else 0


class SeriesValue(NamedTuple):
    value: float
    truncation_bound: float


def _log_sum_terms(
    terms: CompositionTerms, log_rate: float, log_offset: float, n_max: int
) -> np.ndarray:
    """``sum_x exp(log_offset + |x| log_rate - log prod x_j!)`` binned by weighted sum."""
    if log_rate == -math.inf:
        logt = np.where(terms.totals == 0, log_offset, -np.inf)
    else:
        logt = log_offset + terms.totals * log_rate + terms.log_weights
    return np.bincount(terms.sums, weights=np.exp(logt), minlength=n_max + 1)[: n_max + 1]


def pmf_weighted(p: OrderParams, g: WeightTable | Sequence[int], n: int) -> float:
    """``P[Z(t) = n]`` for jump weights ``g``, by direct enumeration."""
    validate_params(p)
    g = g if isinstance(g, WeightTable) else WeightTable(tuple(g))
    if len(g) != p.i:
        raise ParameterError(f"weight table has {len(g)} entries, order is {p.i}")
    if n < 0:
        return 0.0
    lt = p.lam * p.t
    if lt == 0:
        return 1.0 if n == 0 else 0.0
    log_lt = math.log(lt)
    base = -p.i * lt
    return math.fsum(
        math.exp(base + c.total * log_lt - sum(math.lgamma(x + 1) for x in c.counts))
        for c in iter_compositions(n, g)
    )


def pmf_order_i(p: OrderParams, n: int) -> float:
    """``P[Y(t) = n]`` for the Poisson process of order ``i``."""
    validate_params(p)
    return pmf_weighted(p, WeightTable.identity(p.i), n)


def pgf_weighted(p: OrderParams, g: WeightTable | Sequence[int], u: float) -> float:
    validate_params(p)
    weights = g.weights if isinstance(g, WeightTable) else tuple(g)
    if not 0.0 <= u <= 1.0:
        raise ParameterError(f"pgf argument must lie in [0, 1], got {u}")
    lt = p.lam * p.t
    return math.exp(-p.i * lt + lt * math.fsum(u**w for w in weights))


def pgf_y(p: OrderParams, u: float) -> float:
    """``E[u^Y(t)] = exp(-i lam t + lam t (u + ... + u^i))``."""
    return pgf_weighted(p, WeightTable.identity(p.i), u)


def pgf_u(p: OrderParams, beta: float, u: float) -> float:
    """``E[u^U(t)]`` for ``U(t) = Y(N_beta(t))`` with ``Y`` at unit rate-time."""
    validate_params(p)
    if not 0.0 <= u <= 1.0:
        raise ParameterError(f"pgf argument must lie in [0, 1], got {u}")
    inner = math.exp(-p.i * p.lam + p.lam * math.fsum(u**j for j in range(1, p.i + 1)))
    return math.exp(-beta * p.t * (1.0 - inner))


def order_i_mean(p: OrderParams) -> float:
    """First derivative of the pgf at ``u = 1``: ``lam t i(i+1)/2``."""
    return p.lam * p.t * p.i * (p.i + 1) / 2


def order_i_variance(p: OrderParams) -> float:
    """``lam t i(i+1)(2i+1)/6`` (sum of ``j^2`` over the components)."""
    return p.lam * p.t * p.i * (p.i + 1) * (2 * p.i + 1) / 6


def chernoff_tail(log_mgf: Callable[[float], float], n: int, theta_max: float) -> float:
    """Bound ``P[X > n] <= inf_theta exp(log_mgf(theta) - theta (n + 1))``."""

    def objective(theta: float) -> float:
        with np.errstate(over="ignore"):
            val = log_mgf(theta) - theta * (n + 1)
        return val if math.isfinite(val) else 1e300

    res = minimize_scalar(objective, bounds=(1e-12, theta_max), method="bounded",
                          options={"xatol": 1e-10})
    return min(1.0, math.exp(min(0.0, float(res.fun))))


def _auto_n_max(tail: Callable[[int], float], tol: float, start: int) -> int:
    """Smallest ``n >= start`` with ``tail(n) < tol`` (``tail`` nonincreasing)."""
    lo, hi = start, max(start, 1)
    while tail(hi) >= tol:
        lo, hi = hi, 2 * hi
    while lo < hi:
        mid = (lo + hi) // 2
        if tail(mid) < tol:
            hi = mid
        else:
            lo = mid + 1
    return hi


def weighted_tail_bound(p: OrderParams, g: WeightTable, n: int) -> float:
    """Chernoff bound on ``P[Z(t) > n]``."""
    lt = p.lam * p.t
    if lt == 0:
        return 0.0
    w = np.asarray(g.weights, dtype=np.float64)
    theta_max = 2.0 + math.log1p((n + 1) / lt) / w[0]
    return chernoff_tail(lambda th: lt * float(np.sum(np.expm1(th * w))), n, theta_max)


def pmf_table_weighted(
    p: OrderParams,
    g: WeightTable | Sequence[int],
    n_max: int | None = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> Pmf:
    """``P[Z(t) = n]`` for ``n = 0..n_max``.

    Without ``n_max`` the table extends until the tail bound drops below
    ``tail_tol``.
    """
    validate_params(p)
    g = g if isinstance(g, WeightTable) else WeightTable(tuple(g))
    if len(g) != p.i:
        raise ParameterError(f"weight table has {len(g)} entries, order is {p.i}")
    if n_max is None:
        mean = p.lam * p.t * sum(g.weights)
        n_max = _auto_n_max(lambda n: weighted_tail_bound(p, g, n), tail_tol, int(mean))
    lt = p.lam * p.t
    terms = composition_terms(n_max, g)
    log_lt = math.log(lt) if lt > 0 else -math.inf
    probs = _log_sum_terms(terms, log_lt, -p.i * lt, n_max)
    return Pmf(probs, weighted_tail_bound(p, g, n_max))


def pmf_table_y(p: OrderParams, n_max: int | None = None,
                tail_tol: float = DEFAULT_TAIL_TOL) -> Pmf:
    return pmf_table_weighted(p, WeightTable.identity(p.i), n_max, tail_tol)


def _poisson_series_end(mu: float, eps: float) -> int:
    """Smallest ``r`` with ``P[Poisson(mu) > r] < eps``."""
    r = int(mu)
    while gammainc(r + 1, mu) >= eps:
        r += 1
    return r


def pmf_iterated_u(
    p: OrderParams, beta: float, m: int, series_eps: float = DEFAULT_SERIES_EPS
) -> SeriesValue:
    """``P[U(t) = m]`` for ``U(t) = sum_j j N_j(N_beta(t))``.

    The outer sum runs over the value ``r`` of the clock ``N_beta(t)``,
    starting at ``r = 0`` (only ``m = 0`` picks that term up), and stops once
    the Poisson(``beta t``) mass beyond ``r`` is below ``series_eps``.  That
    remaining mass bounds the truncation error.
    """
    validate_params(p)
    if beta <= 0 or series_eps <= 0:
        raise ParameterError("beta and series_eps must be positive")
    if m < 0:
        return SeriesValue(0.0, 0.0)
    mu = beta * p.t
    r_end = _poisson_series_end(mu, series_eps)
    comps = list(iter_compositions(m, WeightTable.identity(p.i)))
    totals = np.array([c.total for c in comps], dtype=np.float64)
    logden = np.array([sum(math.lgamma(x + 1) for x in c.counts) for c in comps])
    acc = []
    for r in range(r_end + 1):
        log_pr = -mu + (r * math.log(mu) if mu > 0 else 0.0) - math.lgamma(r + 1)
        if r == 0:
            inner = 1.0 if m == 0 else 0.0
        else:
            lr = p.lam * r
            inner = math.fsum(np.exp(-p.i * lr + totals * math.log(lr) - logden))
        acc.append(math.exp(log_pr) * inner)
    return SeriesValue(math.fsum(acc), float(gammainc(r_end + 1, mu)))


def iterated_u_tail_bound(p: OrderParams, beta: float, n: int) -> float:
    """Chernoff bound on ``P[U(t) > n]`` from the moment generating function."""
    mu = beta * p.t
    if mu == 0:
        return 0.0
    j = np.arange(1, p.i + 1, dtype=np.float64)

    def log_mgf(th: float) -> float:
        return mu * math.expm1(p.lam * float(np.sum(np.expm1(th * j))))

    theta_max = math.log1p(math.log1p((n + 1) / mu) / (p.lam * p.i)) + 1.0
    return chernoff_tail(log_mgf, n, theta_max)


def pmf_table_u(
    p: OrderParams,
    beta: float,
    n_max: int | None = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
    series_eps: float = 1e-13,
) -> Pmf:
    """Table of :func:`pmf_iterated_u`; ``tail_bound`` adds the series truncation."""
    validate_params(p)
    if n_max is None:
        n_max = _auto_n_max(lambda n: iterated_u_tail_bound(p, beta, n), tail_tol, 0)
    mu = beta * p.t
    r_end = _poisson_series_end(mu, series_eps)
    terms = composition_terms(n_max, WeightTable.identity(p.i))
    probs = np.zeros(n_max + 1)
    probs[0] = math.exp(-mu)
    for r in range(1, r_end + 1):
        log_pr = -mu + r * math.log(mu) - math.lgamma(r + 1)
        lr = p.lam * r
        probs += _log_sum_terms(terms, math.log(lr), log_pr - p.i * lr, n_max)
    bound = iterated_u_tail_bound(p, beta, n_max) + float(gammainc(r_end + 1, mu))
    return Pmf(probs, min(1.0, bound))


def jump_law_y(i: int) -> JumpLaw:
    """Uniform law on ``{1..i}``; jumps occur at total rate ``i lam``."""
    if i < 1:
        raise ParameterError(f"order i must be >= 1, got {i}")
    return JumpLaw(tuple(range(1, i + 1)), (1.0 / i,) * i, 0.0)


def jump_law_z(g: WeightTable | Sequence[int]) -> JumpLaw:
    """Mass ``1/i`` on each ``g(j)``; tied weights are aggregated."""
    g = g if isinstance(g, WeightTable) else WeightTable(tuple(g))
    table: dict[int, int] = {}
    for w in g.weights:
        table[w] = table.get(w, 0) + 1
    sizes = tuple(sorted(table))
    return JumpLaw(sizes, tuple(table[s] / len(g) for s in sizes), 0.0)


def jump_law_w(f: BernsteinFn, p: OrderParams, h_max: int) -> JumpLaw:
    """Jump law of ``W(t) = Y(H^f(t))`` on ``{1..h_max}``.

    Jumps of ``W`` of size ``h >= 1`` occur at rate

        -sum_{x : sum_j j x_j = h} (-lam)^{|x|} / prod_j x_j! * f^{(|x|)}(i lam)

    and their total rate is ``f(i lam)``.  Each summand is nonnegative because
    ``f^{(m)}`` has sign ``(-1)^(m+1)``.
    """
    validate_params(p)
    if h_max < 1:
        raise ParameterError(f"h_max must be >= 1, got {h_max}")
    x = p.i * p.lam
    log_total = math.log(bernstein_value(f, x))
    terms = composition_terms(h_max, WeightTable.identity(p.i))
    derivs = [log_abs_deriv(f, x, m) for m in range(h_max + 1)]
    signs = np.array([s for s, _ in derivs])
    logabs = np.array([v for _, v in derivs])
    m = terms.totals
    # -(-1)^m * sign(f^(m)) must be +1 (or the derivative vanishes)
    term_sign = -((-1.0) ** m) * signs[m]
    keep = (m >= 1) & (signs[m] != 0)
    if np.any(term_sign[keep] < 0):
        raise ArithmeticError(f"{f} violates the Bernstein sign pattern")
    logt = np.where(
        keep, m * math.log(p.lam) + terms.log_weights + logabs[m] - log_total, -np.inf
    )
    q = np.bincount(terms.sums, weights=np.exp(logt), minlength=h_max + 1)[1 : h_max + 1]
    probs = tuple(float(v) for v in q)
    return JumpLaw(tuple(range(1, h_max + 1)), probs, max(0.0, 1.0 - math.fsum(probs)))


def jump_law_u(p: OrderParams, eps: float = DEFAULT_SERIES_EPS,
               h_max: int | None = None) -> JumpLaw:
    """Law of a nonzero increment of ``U``.

    Each tick of the clock ``N_beta`` moves ``U`` by a copy of ``Y(1)``; ticks
    that move it by zero are invisible, hence the conditioning on ``Y(1) >= 1``.
    The table stops at ``h_max`` or where the tail bound falls below ``eps``.
    """
    validate_params(p)
    unit = OrderParams(p.i, p.lam, 1.0)
    table = pmf_table_y(unit, h_max, eps)
    norm = -math.expm1(-p.i * p.lam)
    q = table.probs[1:] / norm
    probs = tuple(float(v) for v in q)
    return JumpLaw(tuple(range(1, table.n_max + 1)), probs, max(0.0, 1.0 - math.fsum(probs)))
