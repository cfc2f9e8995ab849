"""Hitting probabilities ``P[T_k < inf]`` for ``Y``, ``Z``, ``W`` and ``U``.

All four processes are nondecreasing pure-jump processes, so ``T_k`` is finite
exactly when the embedded jump chain visits ``k``.  With ``q`` the law of one
jump, the visit probabilities obey the renewal recursion

    v(0) = 1,    v(n) = sum_{d=1}^{n} q(d) v(n - d),

and ``v(k)`` is the reference ("oracle") value.  Three other routes are
computed and compared against it:

* closed-form expressions (kept literally for ``Y`` and ``Z``, even
  where they disagree with the recursion);
* the occupation-time form ``sum_h q(h) v(k - h)``, with ``v`` from a
  multinomial sum over compositions instead of the recursion;
* Monte Carlo runs of the jump chain.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import OrderParams, ParameterError, WeightTable, composition_terms, validate_params
from .exactdist import (
    JumpLaw,
    jump_law_u,
    jump_law_w,
    jump_law_y,
    jump_law_z,
    pmf_order_i,
    pmf_table_weighted,
    pmf_weighted,
)
from .simulate import SimConfig, run_streams, simulate_skeleton
from .stats import proportion_ci
from .subordinators import BernsteinFn, bernstein_nth_deriv, reciprocal_derivatives

PROCESSES = ("Y", "Z", "W", "U")
ORACLE_MC_HALFWIDTHS = 3.0
PAPER_ORACLE_ATOL = 1e-6
MIN_MC_PATHS = 1000


@dataclass(frozen=True)
class HitQuery:
    process: str
    params: OrderParams
    k: int
    weights: WeightTable | None = None
    bernstein: BernsteinFn | None = None
    beta: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "process", self.process.upper())
        if self.process not in PROCESSES:
            raise ParameterError(f"process must be one of {PROCESSES}, got {self.process!r}")
        validate_params(self.params)
        if self.k < 1:
            raise ParameterError(f"level k must be >= 1, got {self.k}")
        if self.process == "Z":
            if self.weights is None:
                raise ParameterError("process Z needs a weight table")
            if len(self.weights) != self.params.i:
                raise ParameterError("weight table length must equal the order i")
        if self.process == "W" and self.bernstein is None:
            raise ParameterError("process W needs a Bernstein function")
        if self.process == "U" and (self.beta is None or self.beta <= 0):
            raise ParameterError("process U needs a positive beta")


@dataclass(frozen=True)
class HittingReport:
    query: HitQuery
    paper_value: float | None
    paper_formula: str | None
    oracle_value: float
    mc_estimate: float
    mc_halfwidth_95: float
    n_paths: int
    oracle_mc_agree: bool
    paper_oracle_agree: bool | None
    truncated_mass: float = 0.0
    tolerances: dict[str, float] = field(
        default_factory=lambda: {
            "oracle_mc_halfwidths": ORACLE_MC_HALFWIDTHS,
            "paper_oracle_atol": PAPER_ORACLE_ATOL,
        }
    )

    def to_dict(self) -> dict:
        q = self.query
        out = asdict(self)
        out["query"] = {
            "process": q.process,
            "i": q.params.i,
            "lambda": q.params.lam,
            "t": q.params.t,
            "k": q.k,
            "g": list(q.weights.weights) if q.weights else None,
            "f": str(q.bernstein) if q.bernstein else None,
            "beta": q.beta,
        }
        out["flags"] = {
            "paper_oracle": self.paper_oracle_agree,
            "oracle_mc": self.oracle_mc_agree,
        }
        return out


# -- closed forms -------------------------------------------------------------


def paper_hit_prob_y(i: int, k: int) -> float:
    """``k/i`` for ``1 <= k <= i-1`` and ``1`` for ``k >= i``, taken literally."""
    if i < 1 or k < 1:
        raise ParameterError("i and k must be >= 1")
    return k / i if k <= i - 1 else 1.0


def paper_hit_prob_z(g: WeightTable, k: int) -> float:
    """``#{h : g(h) <= k} / i`` below ``g(i)`` and ``1`` from ``g(i)`` on, taken literally."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    if k >= g.max_weight:
        return 1.0
    return sum(1 for w in g.weights if 1 <= w <= k) / len(g)


def paper_hit_density_z(g: WeightTable, p: OrderParams, k: int, s: float) -> float:
    """Density of ``T_k`` for ``Z`` at time ``s``:
    ``lam * sum_{h : g(h) <= k} P[Z(s) = k - g(h)]``.
    """
    validate_params(p)
    if s <= 0:
        raise ParameterError(f"s must be positive, got {s}")
    at_s = OrderParams(p.i, p.lam, s)
    return p.lam * math.fsum(pmf_weighted(at_s, g, k - w) for w in g.weights if w <= k)


def _derivative_sum(p: OrderParams, n: int, derivs: list[float]) -> float:
    """``sum_{x : sum_j j x_j = n} (-lam)^{|x|} / prod x_j! * derivs[|x|]``.

    ``derivs[m]`` is the ``m``-th derivative in the argument ``i lam``; the
    chain-rule factor ``i^m`` of a derivative in ``lam`` cancels the ``i^-m``
    of the literal expression.
    """
    terms = composition_terms(n, WeightTable.identity(p.i))
    sel = terms.sums == n
    m = terms.totals[sel]
    vals = [
        (-p.lam) ** int(mm) * math.exp(lw) * derivs[int(mm)]
        for mm, lw in zip(m, terms.log_weights[sel])
    ]
    return math.fsum(vals)


def paper_hit_prob_w(
    f: BernsteinFn, p: OrderParams, k: int, as_printed: bool = False
) -> float:
    """Closed form for ``W``: ``sum_h G(k - h) R(h)`` over ``h = 1..k``.

    ``G(n) = int_0^inf P[W(s) = n] ds`` is a composition sum over derivatives
    of ``1/f(i lam)``.  ``R(h)`` is the rate of jumps of size ``h``, a
    composition sum over derivatives of ``f(i lam)`` carrying an overall
    minus sign.  ``as_printed=True`` drops that sign and the ``i^-m`` factor
    of ``R``, reproducing the literal expression.
    """
    validate_params(p)
    if k < 1:
        raise ParameterError("k must be >= 1")
    x = p.i * p.lam
    recip = reciprocal_derivatives(f, x, k)
    fder = [bernstein_nth_deriv(f, x, m) for m in range(k + 1)]
    if as_printed:
        fder = [d * p.i**m for m, d in enumerate(fder)]
    occupation = [_derivative_sum(p, n, recip) for n in range(k)]
    rate = [_derivative_sum(p, h, fder) for h in range(k + 1)]
    sign = 1.0 if as_printed else -1.0
    return math.fsum(sign * occupation[k - h] * rate[h] for h in range(1, k + 1))


def paper_hit_prob_u(p: OrderParams, k: int) -> float:
    """``T_1`` and ``T_2`` probabilities for ``U``.

    ``P[T_1 < inf] = lam e^{-i lam} / (1 - e^{-i lam})`` and
    ``P[T_2 < inf] = P[Y(1) = 2] / (1 - e^{-i lam}) + P[T_1 < inf]^2``.
    For ``i >= 2`` the second equals ``(1 + lam/2) P[T_1] + P[T_1]^2``
    (:func:`paper_t2_closed_form`); for ``i = 1`` it does not, since
    ``P[Y(1) = 2] = lam^2 e^{-lam} / 2`` there.
    """
    validate_params(p)
    x = math.exp(-p.i * p.lam)
    t1 = p.lam * x / -math.expm1(-p.i * p.lam)
    if k == 1:
        return t1
    if k == 2:
        y2 = pmf_order_i(OrderParams(p.i, p.lam, 1.0), 2)
        return y2 / -math.expm1(-p.i * p.lam) + t1 * t1
    raise ParameterError(f"closed forms exist for k in {{1, 2}} only, got k={k}")


def paper_t2_closed_form(p: OrderParams) -> float:
    """``(1 + lam/2) P[T_1] + P[T_1]^2``, the simplified ``T_2`` expression."""
    t1 = paper_hit_prob_u(p, 1)
    return (1 + p.lam / 2) * t1 + t1 * t1


def paper_hit_prob_u_series(p: OrderParams, k: int, eps: float = 1e-15) -> float:
    """General-``k`` series for ``U``:

        sum_{h=1}^{k} P[Y(1) = h] sum_{x : sum j x_j = k-h} lam^{|x|}/prod x_j!
                                   * sum_{r >= 0} e^{-i lam r} r^{|x|}
    """
    validate_params(p)
    if k < 1:
        raise ParameterError("k must be >= 1")
    c = p.i * p.lam
    unit = OrderParams(p.i, p.lam, 1.0)
    step = pmf_table_weighted(unit, WeightTable.identity(p.i), k).probs
    terms = composition_terms(k - 1, WeightTable.identity(p.i))
    moments: dict[int, float] = {}

    def power_sum(m: int) -> float:
        # sum_{r>=0} r^m e^{-c r}, with 0^0 = 1
        if m not in moments:
            acc, r = [1.0 if m == 0 else 0.0], 1
            while True:
                term = math.exp(m * math.log(r) - c * r)
                acc.append(term)
                if r > m / c and term < eps * math.fsum(acc):
                    break
                r += 1
            moments[m] = math.fsum(acc)
        return moments[m]

    out = []
    for s, m, lw in zip(terms.sums, terms.totals, terms.log_weights):
        h = k - int(s)
        out.append(step[h] * math.exp(int(m) * math.log(p.lam) + lw) * power_sum(int(m)))
    return math.fsum(out)


def iterated_hit_prob_general(lambda_alpha: float, k: int, series_eps: float = 1e-15) -> float:
    """``e^{-a} a^k/k! sum_{j>=0} e^{-a j} [(j+1)^k - j^k]`` for ``N_a(N_beta(t))``."""
    if lambda_alpha <= 0 or k < 1:
        raise ParameterError("lambda_alpha must be positive and k >= 1")
    a = lambda_alpha
    terms, j = [], 0
    while True:
        term = math.exp(-a * j) * ((j + 1) ** k - j**k)
        terms.append(term)
        if j > (k - 1) / a and term < series_eps * math.fsum(terms):
            break
        j += 1
    return math.exp(-a + k * math.log(a) - math.lgamma(k + 1)) * math.fsum(terms)


# -- renewal oracle and integral form ---------------------------------------


def visit_probabilities(q: JumpLaw, n_max: int) -> np.ndarray:
    """``v(0..n_max)`` by the renewal recursion (untabulated mass escapes)."""
    dense = q.dense(n_max)
    v = np.zeros(n_max + 1)
    v[0] = 1.0
    for n in range(1, n_max + 1):
        v[n] = math.fsum(dense[1 : n + 1] * v[n - 1 :: -1][:n])
    return v


def oracle_hit_prob(q: JumpLaw, k: int) -> float:
    if k < 1:
        raise ParameterError("k must be >= 1")
    return float(visit_probabilities(q, k)[k])


def occupation_visit_probabilities(q: JumpLaw, n_max: int) -> np.ndarray:
    """``v(0..n_max)`` as multinomial sums over jump-count vectors.

    ``v(n) = sum_{x : sum_s s x_s = n} |x|! prod_s q(s)^{x_s} / x_s!``, the
    probability that some ordering of the jumps lands on ``n``.  Equivalently,
    total jump rate times the expected time spent at ``n``.
    """
    support = [(s, p) for s, p in zip(q.sizes, q.probs) if s <= n_max and p > 0]
    if not support:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out
    sizes = WeightTable(tuple(s for s, _ in support))
    terms = composition_terms(n_max, sizes, [math.log(p) for _, p in support])
    logt = terms.log_weights + np.array([math.lgamma(m + 1) for m in terms.totals])
    return np.bincount(terms.sums, weights=np.exp(logt), minlength=n_max + 1)


def integral_form_hit_prob(q: JumpLaw, k: int) -> float:
    """``sum_{h=1}^{k} q(h) v(k - h)`` with ``v`` from the occupation sum."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    v = occupation_visit_probabilities(q, k - 1)
    return math.fsum(q.prob(h) * v[k - h] for h in range(1, k + 1))


# -- queries ---------------------------------------------------------------


def query_jump_law(query: HitQuery) -> JumpLaw:
    """Jump law of the queried process, tabulated far enough to decide ``T_k``.

    Jumps larger than ``k`` can only overshoot, so for ``W`` and ``U`` the
    sizes ``1..k`` suffice; the rest is kept as escape mass.
    """
    p = query.params
    if query.process == "Y":
        return jump_law_y(p.i)
    if query.process == "Z":
        return jump_law_z(query.weights)
    if query.process == "W":
        return jump_law_w(query.bernstein, p, query.k)
    return jump_law_u(p, h_max=query.k)


def paper_value(query: HitQuery) -> tuple[float | None, str | None]:
    """Closed-form value for the query and the name of the formula used."""
    p, k = query.params, query.k
    if query.process == "Y":
        return paper_hit_prob_y(p.i, k), "k/i closed form"
    if query.process == "Z":
        return paper_hit_prob_z(query.weights, k), "weight-count closed form"
    if query.process == "W":
        return paper_hit_prob_w(query.bernstein, p, k), "subordinated closed form"
    if k <= 2:
        return paper_hit_prob_u(p, k), f"T{k} closed form"
    if p.i == 1:
        return iterated_hit_prob_general(p.lam, k), "iterated Poisson series"
    return paper_hit_prob_u_series(p, k), "iterated order-i series"


def mc_hit_prob(query: HitQuery, cfg: SimConfig) -> tuple[float, float]:
    """Fraction of jump-chain runs that visit ``k``, with its 95% halfwidth."""
    if cfg.n_paths < MIN_MC_PATHS:
        raise ParameterError(f"need at least {MIN_MC_PATHS} paths, got {cfg.n_paths}")
    q = query_jump_law(query)
    hits = run_streams(lambda n, rng: simulate_skeleton(q, query.k, n, rng)[0], cfg)
    return proportion_ci(int(hits.sum()), cfg.n_paths)


def hit_report(query: HitQuery, cfg: SimConfig) -> HittingReport:
    q = query_jump_law(query)
    oracle = oracle_hit_prob(q, query.k)
    paper, formula = paper_value(query)
    est, half = mc_hit_prob(query, cfg)
    return HittingReport(
        query=query,
        paper_value=paper,
        paper_formula=formula,
        oracle_value=oracle,
        mc_estimate=est,
        mc_halfwidth_95=half,
        n_paths=cfg.n_paths,
        oracle_mc_agree=abs(oracle - est) <= ORACLE_MC_HALFWIDTHS * half,
        paper_oracle_agree=None if paper is None else abs(paper - oracle) <= PAPER_ORACLE_ATOL,
        truncated_mass=q.truncation_eps,
    )
