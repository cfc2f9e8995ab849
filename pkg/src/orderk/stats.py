"""Goodness-of-fit and interval utilities for the verification suites."""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, ndtri

from .exactdist import Pmf

DEFAULT_MIN_EXPECTED = 5.0


class DegenerateTestError(ValueError):
    """Pooling left fewer than two bins; no test is possible."""


@dataclass(frozen=True)
class GofResult:
    statistic: float
    degrees_of_freedom: int
    p_value: float
    pooled_bins: int

    def rejects(self, significance: float) -> bool:
        return self.p_value < significance


def chi2_sf(statistic: float, df: int) -> float:
    """Upper tail ``Q(df/2, statistic/2)`` of the chi-square law."""
    if statistic <= 0:
        return 1.0
    return float(gammaincc(df / 2.0, statistic / 2.0))


def counts_from_values(values: np.ndarray) -> dict[int, int]:
    vals, cnt = np.unique(np.asarray(values, dtype=np.int64), return_counts=True)
    return {int(v): int(c) for v, c in zip(vals, cnt)}


def _pool_edges(expected: np.ndarray, min_expected: float) -> list[int]:
    """Start indices of groups of adjacent bins each holding ``>= min_expected``.

    Groups are closed greedily left to right; a short final group is merged
    into its predecessor.
    """
    edges, acc = [0], 0.0
    for idx, e in enumerate(expected):
        acc += e
        if acc >= min_expected and idx + 1 < len(expected):
            edges.append(idx + 1)
            acc = 0.0
    if len(edges) > 1 and expected[edges[-1]:].sum() < min_expected:
        edges.pop()
    return edges


def chi_square_one_sample(
    counts: Mapping[int, int],
    expected: Pmf,
    min_expected: float = DEFAULT_MIN_EXPECTED,
) -> GofResult:
    """Test observed integer counts against a tabulated pmf.

    Bin ``n_max`` of the table absorbs the mass beyond it (and any observed
    values beyond it), so the expected probabilities sum to one exactly.
    """
    total = sum(counts.values())
    if total < 100:
        raise ValueError(f"need at least 100 observations, got {total}")
    n_max = expected.n_max
    probs = np.clip(np.asarray(expected.probs, dtype=np.float64), 0.0, None)
    probs[-1] += max(0.0, 1.0 - probs.sum())
    observed = np.zeros(n_max + 1)
    for value, c in counts.items():
        if value < 0:
            raise ValueError(f"negative value {value} outside the support")
        observed[min(value, n_max)] += c
    exp_counts = probs * total
    edges = _pool_edges(exp_counts, min_expected)
    if len(edges) < 2:
        raise DegenerateTestError("pooling left fewer than two bins")
    obs = np.add.reduceat(observed, edges)
    exp = np.add.reduceat(exp_counts, edges)
    stat = float(np.sum((obs - exp) ** 2 / exp))
    df = len(edges) - 1
    return GofResult(stat, df, chi2_sf(stat, df), len(edges))


def chi_square_two_sample(
    counts_a: Mapping[int, int],
    counts_b: Mapping[int, int],
    min_expected: float = DEFAULT_MIN_EXPECTED,
) -> GofResult:
    """Contingency test that two samples of integers share one law.

    Adjacent values are pooled until the smaller expected cell of every
    column reaches ``min_expected``.
    """
    na, nb = sum(counts_a.values()), sum(counts_b.values())
    if na == 0 or nb == 0:
        raise ValueError("both samples must be non-empty")
    support = sorted(set(counts_a) | set(counts_b))
    a = np.array([counts_a.get(v, 0) for v in support], dtype=np.float64)
    b = np.array([counts_b.get(v, 0) for v in support], dtype=np.float64)
    col = a + b
    min_row = min(na, nb) / (na + nb)
    edges = _pool_edges(col * min_row, min_expected)
    if len(edges) < 2:
        raise DegenerateTestError("pooling left fewer than two bins")
    a, b = np.add.reduceat(a, edges), np.add.reduceat(b, edges)
    col = a + b
    ea, eb = col * na / (na + nb), col * nb / (na + nb)
    stat = float(np.sum((a - ea) ** 2 / ea) + np.sum((b - eb) ** 2 / eb))
    df = len(edges) - 1
    return GofResult(stat, df, chi2_sf(stat, df), len(edges))


def proportion_ci(hits: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Normal-approximation interval ``(estimate, halfwidth)``.

    The interval ``estimate +- halfwidth`` is meant to be read clipped to
    ``[0, 1]``; at ``hits = 0`` or ``hits = n`` the halfwidth is 0.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 <= hits <= n:
        raise ValueError(f"hits must lie in [0, n], got {hits}")
    p = hits / n
    z = float(ndtri(0.5 + level / 2))
    return p, z * math.sqrt(p * (1.0 - p) / n)
