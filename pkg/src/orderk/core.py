"""Parameter types and weighted integer compositions.

Every exact formula in the package is a sum over the vectors
``x = (x_1, ..., x_i) >= 0`` with ``sum_j w_j * x_j = n``.  This module owns
those vectors: the parameter containers that describe a process, and the
enumeration routines over compositions.
"""

from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


class ParameterError(ValueError):
    """A parameter lies outside its mathematical domain."""


@dataclass(frozen=True)
class OrderParams:
    """Order ``i``, per-component rate ``lam`` and time ``t``."""

    i: int
    lam: float
    t: float = 1.0

    @property
    def total_rate(self) -> float:
        """Event rate ``i * lam`` of the compound representation."""
        return self.i * self.lam


@dataclass(frozen=True)
class WeightTable:
    """Jump sizes ``g(1), ..., g(i)``; nondecreasing positive integers."""

    weights: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(int(w) for w in self.weights))
        if not self.weights:
            raise ParameterError("weight table must be non-empty")
        if any(w < 1 for w in self.weights):
            raise ParameterError(f"weights must be >= 1, got {self.weights}")
        if any(a > b for a, b in zip(self.weights, self.weights[1:])):
            raise ParameterError(f"weights must be nondecreasing, got {self.weights}")

    @classmethod
    def identity(cls, i: int) -> WeightTable:
        """The table ``g(j) = j`` of the plain order-``i`` process."""
        return cls(tuple(range(1, i + 1)))

    @classmethod
    def parse(cls, text: str) -> WeightTable:
        """Parse a comma separated list such as ``"2,4"``."""
        try:
            return cls(tuple(int(tok) for tok in text.split(",") if tok.strip()))
        except ValueError as exc:
            raise ParameterError(f"cannot parse weight table {text!r}") from exc

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def max_weight(self) -> int:
        return self.weights[-1]


@dataclass(frozen=True)
class Composition:
    counts: tuple[int, ...]
    weighted_sum: int

    @property
    def total(self) -> int:
        """Number of events ``x_1 + ... + x_i``."""
        return sum(self.counts)


def validate_params(p: OrderParams) -> OrderParams:
    """Return ``p`` unchanged if ``i >= 1``, ``lam > 0`` and ``t >= 0``."""
    if isinstance(p.i, bool) or int(p.i) != p.i or p.i < 1:
        raise ParameterError(f"order i must be a positive integer, got {p.i!r}")
    if not math.isfinite(p.lam) or p.lam <= 0:
        raise ParameterError(f"rate lambda must be positive and finite, got {p.lam!r}")
    if not math.isfinite(p.t) or p.t < 0:
        raise ParameterError(f"time t must be nonnegative and finite, got {p.t!r}")
    return p


def _as_weights(w: WeightTable | Sequence[int]) -> tuple[int, ...]:
    return w.weights if isinstance(w, WeightTable) else WeightTable(tuple(w)).weights


def iter_compositions(n: int, w: WeightTable | Sequence[int]) -> Iterator[Composition]:
    """Yield every ``x >= 0`` with ``sum_j w_j x_j = n`` in lexicographic order.

    Coordinates are filled left to right; the remaining budget bounds each
    coordinate, so the full box ``N^i`` is never materialised.
    """
    if n < 0:
        raise ParameterError(f"target n must be nonnegative, got {n}")
    weights = _as_weights(w)
    last = len(weights) - 1
    counts = [0] * len(weights)

    def fill(pos: int, budget: int) -> Iterator[Composition]:
        wj = weights[pos]
        if pos == last:
            if budget % wj == 0:
                counts[pos] = budget // wj
                yield Composition(tuple(counts), n)
            return
        for x in range(budget // wj + 1):
            counts[pos] = x
            yield from fill(pos + 1, budget - wj * x)
        counts[pos] = 0

    yield from fill(0, n)


def enumerate_compositions(n: int, w: WeightTable | Sequence[int]) -> list[Composition]:
    return list(iter_compositions(n, w))


def count_compositions(n: int, w: WeightTable | Sequence[int]) -> int:
    """Number of compositions of ``n``, by the coin-change recursion."""
    if n < 0:
        raise ParameterError(f"target n must be nonnegative, got {n}")
    ways = [1] + [0] * n
    for wj in _as_weights(w):
        for s in range(wj, n + 1):
            ways[s] += ways[s - wj]
    return ways[n]


@dataclass(frozen=True, eq=False)
class CompositionTerms:
    """Compositions with weighted sum ``<= n_max``, grouped by ``(sum, total)``.

    Row ``r`` stands for every composition with ``sum_j w_j x_j = sums[r]``
    and ``sum_j x_j = totals[r]``; ``log_weights[r]`` is the log of
    ``sum 1/prod_j x_j!`` over that group.  Every exact sum in the package is
    a function of these three numbers only.
    """

    n_max: int
    sums: np.ndarray
    totals: np.ndarray
    log_weights: np.ndarray


def _merge_groups(
    sums: np.ndarray, totals: np.ndarray, logw: np.ndarray, n_max: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    key = sums * (n_max + 1) + totals
    order = np.argsort(key, kind="stable")
    key, logw = key[order], logw[order]
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    peak = np.maximum.reduceat(logw, starts)
    shifted = np.exp(logw - np.repeat(peak, np.diff(np.r_[starts, key.size])))
    merged = peak + np.log(np.add.reduceat(shifted, starts))
    ukey = key[starts]
    return ukey // (n_max + 1), ukey % (n_max + 1), merged


def composition_terms(
    n_max: int,
    w: WeightTable | Sequence[int],
    log_factors: Sequence[float] | None = None,
) -> CompositionTerms:
    """All compositions up to ``n_max``, expanded one coordinate at a time.

    Same budget pruning as :func:`iter_compositions`; after each coordinate,
    partial compositions sharing ``(sum, total)`` are merged, which keeps the
    table at ``O(n_max**2)`` rows instead of growing like ``n_max**i``.

    With ``log_factors`` each composition is additionally weighted by
    ``prod_j exp(log_factors[j] * x_j)``.
    """
    if n_max < 0:
        raise ParameterError(f"n_max must be nonnegative, got {n_max}")
    sums = np.zeros(1, dtype=np.int64)
    totals = np.zeros(1, dtype=np.int64)
    logw = np.zeros(1)
    weights = _as_weights(w)
    factors = [0.0] * len(weights) if log_factors is None else list(log_factors)
    if len(factors) != len(weights):
        raise ParameterError("log_factors must match the weight table in length")
    for wj, lf in zip(weights, factors):
        reps = (n_max - sums) // wj + 1
        starts = np.cumsum(reps) - reps
        x = np.arange(int(reps.sum()), dtype=np.int64) - np.repeat(starts, reps)
        sums = np.repeat(sums, reps) + wj * x
        totals = np.repeat(totals, reps) + x
        logw = np.repeat(logw, reps) - gammaln(x + 1.0) + (lf * x if lf else 0.0)
        sums, totals, logw = _merge_groups(sums, totals, logw, n_max)
    return CompositionTerms(n_max, sums, totals, logw)
