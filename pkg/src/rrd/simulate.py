"""Sampling of renewal reward paths and their discretized increments.

A path is a list of jump times and sizes on (0, T].  The first gap is drawn
from the stationary delay so the increments are stationary; later gaps come
from the interarrival law.  All draws go through inverse CDFs of a seeded
generator, so a path is a pure function of (model, mixture, T, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import JumpMixture, RenewalModel


@dataclass(frozen=True)
class SamplePath:
    """One realized path: jumps of size ``jump_sizes[i]`` at ``jump_times[i]``."""

    jump_times: np.ndarray
    jump_sizes: np.ndarray
    horizon: float
    seed: int

    def __post_init__(self):
        if len(self.jump_times) != len(self.jump_sizes):
            raise ValueError("jump_times and jump_sizes must have equal length")

    @property
    def jump_count(self) -> int:
        return len(self.jump_times)


@dataclass(frozen=True)
class IncrementSeries:
    """Increments of the cumulative jump sum over consecutive step-``delta``
    cells, ``values[i] = X((i+1)*delta) - X(i*delta)``.
    """

    delta: float
    values: np.ndarray

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def nonzero_count(self) -> int:
        return int(np.count_nonzero(self.values))


def replicate_seed(base_seed: int, replicate: int) -> int:
    """Derive the seed of one Monte Carlo replicate.

    Counter-based: each replicate's seed is a hash of (base_seed, index), so
    replicates are reproducible independently of execution order.
    """
    ss = np.random.SeedSequence((int(base_seed), int(replicate)))
    return int(ss.generate_state(1, np.uint64)[0])


def sample_path(
    model: RenewalModel,
    mixture: JumpMixture,
    horizon: float,
    seed: int,
    *,
    stationary_start: bool = True,
) -> SamplePath:
    """Sample one path over (0, horizon].

    ``stationary_start=False`` draws the first gap from the plain
    interarrival law instead of the stationary delay; that variant exists
    for distributional diagnostics only.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rng = np.random.default_rng(seed)

    mu = model.mean_interarrival()
    # Draw gaps in blocks until the running sum passes the horizon; the block
    # size overshoots the expected count so a top-up is rare.
    block = max(64, int(horizon / mu * 1.2) + 64)
    first = (
        model.stationary_delay_ppf(rng.random())
        if stationary_start
        else model.interarrival_ppf(rng.random())
    )
    times = np.cumsum(np.concatenate(([first], model.interarrival_ppf(rng.random(block - 1)))))
    while times[-1] <= horizon:
        more = model.interarrival_ppf(rng.random(block))
        times = np.concatenate((times, times[-1] + np.cumsum(more)))
    times = times[times <= horizon]
    sizes = mixture.sample(rng, len(times))
    return SamplePath(times, sizes, float(horizon), int(seed))


def discretize(path: SamplePath, delta: float) -> IncrementSeries:
    """Aggregate jump sizes into step-``delta`` cells.

    A jump at time t lands in cell ceil(t/delta); jumps beyond the last full
    cell are discarded.  Several jumps in one cell sum, which is exactly the
    compounding the estimators must undo.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if delta > path.horizon:
        raise ValueError("delta must not exceed the horizon")
    n = int(np.floor(path.horizon / delta))
    cells = np.ceil(path.jump_times / delta).astype(np.int64) - 1
    keep = (cells >= 0) & (cells < n)
    values = np.bincount(cells[keep], weights=path.jump_sizes[keep], minlength=n)
    return IncrementSeries(float(delta), values)


def nonzero_increments(series: IncrementSeries):
    """Indices (1-based) and values of the nonzero increments, plus their
    count.  An exact floating-point zero counts as "no jump": increments are
    sums of continuous draws, so collisions have probability zero.
    """
    idx = np.nonzero(series.values)[0]
    return idx + 1, series.values[idx], len(idx)


def block_sums(values: np.ndarray, m: int) -> np.ndarray:
    """Strided m-fold sums of the nonzero increments.

    With n_m = floor(len(values)/m), entry i (0-based) is the sum of the
    values at positions i, n_m+i, ..., (m-1)*n_m+i.  Each input value is used
    at most once and exactly m*n_m of them are used.  Returns an empty array
    when len(values) < m.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    values = np.asarray(values, dtype=float)
    n_m = len(values) // m
    if n_m == 0:
        return np.empty(0)
    return values[: m * n_m].reshape(m, n_m).sum(axis=0)
