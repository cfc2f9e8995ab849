"""Sample paths of ``Y``, ``Z``, ``W`` and ``U``.

Each process has two samplers built from different mechanisms:

* ``superposition`` follows the definition, one independent Poisson stream
  per component ``j`` (exponential gaps when event times are requested,
  Poisson counts otherwise);
* ``compound`` draws a single event count at rate ``i * lam`` first and then
  splits it into i.i.d. uniform marks.

The equality in distribution of the two is what the verification suite tests,
so neither is written in terms of the other.

Random streams
--------------
Monte Carlo runs are split into ``n_streams`` independent streams.  Stream
``s`` of master seed ``seed`` is ``PCG64(SeedSequence(seed, spawn_key=(s,)))``
and receives ``n_paths // n_streams`` paths, plus one if
``s < n_paths % n_streams``.  Results are concatenated in stream order, so a
run is reproducible from ``(seed, n_streams)`` whatever the worker count.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, TypeVar

import numpy as np

from .core import OrderParams, ParameterError, WeightTable, validate_params
from .exactdist import JumpLaw
from .subordinators import BernsteinFn, draw_subordinator

T = TypeVar("T")

SUPERPOSITION = "superposition"
COMPOUND = "compound"
MODES = (SUPERPOSITION, COMPOUND)

# Poisson means above this are clipped; the resulting values are astronomically
# far beyond any level examined and still fit in int64 after weighting.
MAX_POISSON_MEAN = 1e15
MAX_MATERIALISED_EVENTS = 50_000_000


@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    seed: int = 0
    n_streams: int = 1
    max_workers: int | None = None

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ParameterError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.n_streams < 1:
            raise ParameterError(f"n_streams must be >= 1, got {self.n_streams}")


@dataclass(frozen=True, eq=False)
class PathSample:
    event_times: np.ndarray
    increments: np.ndarray
    terminal_value: int

    def running_values(self) -> np.ndarray:
        return np.cumsum(self.increments)


@dataclass(frozen=True, eq=False)
class PathBatch:
    """Many paths in flat storage; path ``k`` owns ``offsets[k]:offsets[k+1]``.

    Batches drawn without event times keep only ``terminal``.
    """

    terminal: np.ndarray
    offsets: np.ndarray | None = None
    event_times: np.ndarray | None = None
    increments: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.terminal)

    @property
    def has_times(self) -> bool:
        return self.offsets is not None

    def path(self, k: int) -> PathSample:
        if not self.has_times:
            raise ValueError("batch was drawn without event times")
        lo, hi = self.offsets[k], self.offsets[k + 1]
        return PathSample(
            self.event_times[lo:hi], self.increments[lo:hi], int(self.terminal[k])
        )


def concat_batches(batches: list[PathBatch]) -> PathBatch:
    """Join per-stream batches in order; event data is kept only if all have it."""
    terminal = np.concatenate([b.terminal for b in batches])
    if not all(b.has_times for b in batches):
        return PathBatch(terminal)
    shifts = np.cumsum([0] + [b.offsets[-1] for b in batches[:-1]])
    offsets = np.concatenate(
        [[0]] + [b.offsets[1:] + sh for b, sh in zip(batches, shifts)]
    )
    return PathBatch(
        terminal,
        offsets.astype(np.int64),
        np.concatenate([b.event_times for b in batches]),
        np.concatenate([b.increments for b in batches]),
    )


class SkeletonOutcome(NamedTuple):
    hit: bool
    overshoot_value: int
    n_jumps: int


def stream_generator(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def stream_sizes(n_paths: int, n_streams: int) -> list[int]:
    base, extra = divmod(n_paths, n_streams)
    return [base + (s < extra) for s in range(n_streams)]


def map_streams(draw: Callable[[int, np.random.Generator], T], cfg: SimConfig) -> list[T]:
    """Evaluate ``draw(n, rng)`` on every stream; results in stream order."""
    sizes = stream_sizes(cfg.n_paths, cfg.n_streams)
    jobs = [(n, stream_generator(cfg.seed, s)) for s, n in enumerate(sizes)]
    if cfg.n_streams == 1 or cfg.max_workers == 1:
        return [draw(n, rng) for n, rng in jobs]
    with ThreadPoolExecutor(max_workers=cfg.max_workers) as pool:
        return list(pool.map(lambda job: draw(*job), jobs))


def run_streams(
    draw: Callable[[int, np.random.Generator], np.ndarray], cfg: SimConfig
) -> np.ndarray:
    """Like :func:`map_streams` for array results, concatenated."""
    return np.concatenate(map_streams(draw, cfg))


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")


def _poisson(rng: np.random.Generator, mean: np.ndarray | float, size=None) -> np.ndarray:
    return rng.poisson(np.minimum(mean, MAX_POISSON_MEAN), size).astype(np.int64)


def _split_uniform(rng: np.random.Generator, counts: np.ndarray, i: int) -> np.ndarray:
    """Multinomial split of each count into ``i`` equally likely mark classes."""
    return rng.multinomial(counts, np.full(i, 1.0 / i)).reshape(len(counts), i)


def _assemble(
    n_paths: int, path_ids: np.ndarray, times: np.ndarray, incr: np.ndarray
) -> PathBatch:
    order = np.lexsort((times, path_ids))
    path_ids, times, incr = path_ids[order], times[order], incr[order]
    counts = np.bincount(path_ids, minlength=n_paths)
    offsets = np.concatenate(([0], np.cumsum(counts)))
    terminal = np.bincount(path_ids, weights=incr, minlength=n_paths).astype(np.int64)
    return PathBatch(terminal, offsets, times, incr.astype(np.int64))


def _exponential_arrivals(
    rng: np.random.Generator, rate: float, horizon: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Arrival times in ``[0, horizon[k]]`` of a rate-``rate`` stream, per row ``k``.

    Gaps are drawn in blocks; rows whose block ends before the horizon draw
    another block, continuing from their last arrival.
    """
    n = len(horizon)
    mean = rate * float(horizon.max(initial=0.0))
    block = int(mean + 6.0 * math.sqrt(mean) + 8)
    rows_out, times_out = [], []
    rows = np.arange(n)
    clock = np.zeros(n)
    while rows.size:
        gaps = rng.standard_exponential((rows.size, block)) / rate
        arrivals = clock[:, None] + np.cumsum(gaps, axis=1)
        inside = arrivals <= horizon[rows][:, None]
        r, c = np.nonzero(inside)
        rows_out.append(rows[r])
        times_out.append(arrivals[r, c])
        unfinished = inside[:, -1]
        clock = arrivals[unfinished, -1]
        rows = rows[unfinished]
    return np.concatenate(rows_out), np.concatenate(times_out)


def simulate_z(
    p: OrderParams,
    g: WeightTable,
    n_paths: int,
    rng: np.random.Generator,
    mode: str = COMPOUND,
    times: bool = True,
) -> PathBatch:
    """Paths of ``Z(t) = sum_j g(j) N_j(t)`` on ``[0, t]``."""
    validate_params(p)
    _check_mode(mode)
    if len(g) != p.i:
        raise ParameterError(f"weight table has {len(g)} entries, order is {p.i}")
    w = np.asarray(g.weights, dtype=np.int64)
    if mode == SUPERPOSITION:
        if not times:
            counts = _poisson(rng, p.lam * p.t, (n_paths, p.i))
            return PathBatch(counts @ w)
        horizon = np.full(n_paths, p.t)
        ids, ts, inc = [], [], []
        for j in range(p.i):
            rows, arr = _exponential_arrivals(rng, p.lam, horizon)
            ids.append(rows)
            ts.append(arr)
            inc.append(np.full(rows.size, w[j]))
        return _assemble(n_paths, np.concatenate(ids), np.concatenate(ts), np.concatenate(inc))
    counts = _poisson(rng, p.total_rate * p.t, n_paths)
    if not times:
        return PathBatch(_split_uniform(rng, counts, p.i) @ w)
    ids = np.repeat(np.arange(n_paths), counts)
    ts = rng.uniform(0.0, p.t, ids.size)
    marks = w[rng.integers(0, p.i, ids.size)]
    return _assemble(n_paths, ids, ts, marks)


def simulate_y(
    p: OrderParams, n_paths: int, rng: np.random.Generator,
    mode: str = COMPOUND, times: bool = True,
) -> PathBatch:
    return simulate_z(p, WeightTable.identity(p.i), n_paths, rng, mode, times)


def _time_changed_counts(
    p: OrderParams, clock: np.ndarray, rng: np.random.Generator, mode: str
) -> np.ndarray:
    """Per-component event counts of ``N_j(clock)``, shape ``(n, i)``."""
    if mode == SUPERPOSITION:
        return _poisson(rng, p.lam * clock[:, None], (len(clock), p.i))
    return _split_uniform(rng, _poisson(rng, p.total_rate * clock), p.i)


def _ordering_only_paths(
    p: OrderParams, counts: np.ndarray, rng: np.random.Generator
) -> PathBatch:
    """Materialise events whose only meaning is their order (W paths)."""
    n_paths = len(counts)
    total = int(counts.sum())
    if total > MAX_MATERIALISED_EVENTS:
        raise ValueError(f"{total} events is too many to materialise; use times=False")
    ids = np.repeat(np.repeat(np.arange(n_paths), p.i), counts.ravel())
    marks = np.repeat(np.tile(np.arange(1, p.i + 1), n_paths), counts.ravel())
    ts = rng.uniform(0.0, p.t, total)
    return _assemble(n_paths, ids, ts, marks)


def simulate_w(
    p: OrderParams,
    f: BernsteinFn,
    n_paths: int,
    rng: np.random.Generator,
    mode: str = COMPOUND,
    times: bool = False,
) -> PathBatch:
    """Terminal values of ``W(t) = Y(H^f(t))``.

    Only ``H^f(t)`` is drawn, not its path, so event times inside ``[0, t]``
    carry no physical meaning.  With ``times=True`` the events are laid out in
    random order on ``[0, t]`` so that paths can still be inspected.
    """
    validate_params(p)
    _check_mode(mode)
    clock = draw_subordinator(f, p.t, rng, n_paths)
    counts = _time_changed_counts(p, clock, rng, mode)
    if times:
        return _ordering_only_paths(p, counts, rng)
    return PathBatch(counts @ np.arange(1, p.i + 1, dtype=np.int64))


def simulate_u(
    p: OrderParams,
    beta: float,
    n_paths: int,
    rng: np.random.Generator,
    mode: str = COMPOUND,
    times: bool = True,
) -> PathBatch:
    """Paths of ``U(t) = sum_j j N_j(N_beta(t))``.

    ``U`` moves only at ticks of the rate-``beta`` clock; at a tick it moves
    by an independent copy of ``Y(1)``.  Ticks that move it by zero leave no
    event in the path.
    """
    validate_params(p)
    _check_mode(mode)
    if beta <= 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    ticks = _poisson(rng, beta * p.t, n_paths)
    j = np.arange(1, p.i + 1, dtype=np.int64)
    if not times:
        return PathBatch(_time_changed_counts(p, ticks.astype(np.float64), rng, mode) @ j)
    ids = np.repeat(np.arange(n_paths), ticks)
    ts = rng.uniform(0.0, p.t, ids.size)
    moves = _time_changed_counts(p, np.ones(ids.size), rng, mode) @ j
    nonzero = moves > 0
    return _assemble(n_paths, ids[nonzero], ts[nonzero], moves[nonzero])


def sample_y_superposition(p: OrderParams, rng: np.random.Generator) -> PathSample:
    return simulate_y(p, 1, rng, SUPERPOSITION).path(0)


def sample_y_compound(p: OrderParams, rng: np.random.Generator) -> PathSample:
    return simulate_y(p, 1, rng, COMPOUND).path(0)


def sample_z(
    p: OrderParams, g: WeightTable, rng: np.random.Generator, mode: str = COMPOUND
) -> PathSample:
    return simulate_z(p, g, 1, rng, mode).path(0)


def sample_w(
    p: OrderParams, f: BernsteinFn, rng: np.random.Generator, mode: str = COMPOUND
) -> PathSample:
    return simulate_w(p, f, 1, rng, mode, times=True).path(0)


def sample_u(
    p: OrderParams, beta: float, rng: np.random.Generator, mode: str = COMPOUND
) -> PathSample:
    return simulate_u(p, beta, 1, rng, mode).path(0)


def simulate_skeleton(
    q: JumpLaw, k: int, n_runs: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run the embedded jump chain from 0 until it reaches ``k`` or more.

    Returns ``(hit, final_value, n_jumps)`` arrays.  A draw landing in the
    untabulated mass of ``q`` is an escape past ``k``: it counts as a miss
    and its final value is recorded as ``-1``.
    """
    if k < 1:
        raise ParameterError(f"level k must be >= 1, got {k}")
    sizes = np.asarray(q.sizes, dtype=np.int64)
    cdf = np.cumsum(q.probs)
    if q.truncation_eps == 0.0:
        cdf[-1] = np.inf
    level = np.zeros(n_runs, dtype=np.int64)
    jumps = np.zeros(n_runs, dtype=np.int64)
    active = np.arange(n_runs)
    while active.size:
        idx = np.searchsorted(cdf, rng.random(active.size), side="right")
        escaped = idx == sizes.size
        level[active[escaped]] = -1
        moved = active[~escaped]
        level[moved] += sizes[idx[~escaped]]
        jumps[active] += 1
        active = moved[level[moved] < k]
    return level == k, level, jumps


def sample_skeleton(q: JumpLaw, k: int, rng: np.random.Generator) -> SkeletonOutcome:
    hit, value, n = simulate_skeleton(q, k, 1, rng)
    return SkeletonOutcome(bool(hit[0]), int(value[0]), int(n[0]))
