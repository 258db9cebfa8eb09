"""
Sampling from f(π) ∝ θ^{c(π)} and simulating the positional strategies.

Sampling is exact and two-step: draw the position of N from its truncated
geometric marginal (every position carries (N−1)! permutations), then shuffle
1..N−1 uniformly into the remaining slots.

Streams are PCG64 generators spawned from one `SeedSequence(seed)`, one per
worker; a run is reproducible for a fixed (seed, workers).
"""

from __future__ import annotations

import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Final

import numpy as np
from scipy import stats

from .config import DEFAULT_SIMULATION, SimulationSettings
from .errors import InvalidInputError
from .model import GameConfig, Permutation, prefix_flattening_entries

RNG_NAME: Final[str] = "PCG64"
_MAX_SEED: Final[int] = 2**64


@dataclass(frozen=True, slots=True)
class SampleConfig:
    game: GameConfig
    num_samples: int
    seed: int
    workers: int = 1

    def __post_init__(self) -> None:
        if self.num_samples < 1:
            raise InvalidInputError(f"num_samples must be >= 1, got {self.num_samples}")
        if not (0 <= self.seed < _MAX_SEED):
            raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.workers < 1:
            raise InvalidInputError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True, slots=True)
class Estimate:
    """Sample mean of a win indicator with a normal-approximation interval."""

    mean: float
    std_error: float
    ci_low: float
    ci_high: float
    n: int

    def __post_init__(self) -> None:
        if not (self.ci_low <= self.mean <= self.ci_high):
            raise ValueError(f"interval [{self.ci_low}, {self.ci_high}] does not contain {self.mean}")

    @classmethod
    def from_counts(cls, wins: int, n: int, *, ci_level: float = DEFAULT_SIMULATION.ci_level) -> Estimate:
        mean = wins / n
        std_error = math.sqrt(mean * (1.0 - mean) / n)
        z = float(stats.norm.ppf(0.5 + ci_level / 2.0))
        return cls(
            mean=mean,
            std_error=std_error,
            ci_low=max(0.0, mean - z * std_error),
            ci_high=min(1.0, mean + z * std_error),
            n=n,
        )

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high


@dataclass(frozen=True, slots=True)
class PositionHistogram:
    """Counts of π⁻¹(N) over positions 1..N against the truncated geometric law."""

    counts: tuple[int, ...]
    expected: tuple[float, ...]
    chi2: float
    p_value: float

    @property
    def total(self) -> int:
        return sum(self.counts)

    def proportions(self) -> tuple[float, ...]:
        total = self.total
        return tuple(c / total for c in self.counts)


def position_distribution(game: GameConfig) -> np.ndarray:
    """Pr[π⁻¹(N) = p] = θ^{p−1}/Σ_{k<N} θ^k for p = 1..N, computed in log space."""
    n = game.n
    if game.is_classical:
        return np.full(n, 1.0 / n)
    log_w = np.arange(n, dtype=np.float64) * math.log(float(game.theta))
    w = np.exp(log_w - log_w.max())
    return w / w.sum()


def _position_cdf(game: GameConfig) -> np.ndarray:
    cdf = np.cumsum(position_distribution(game))
    cdf[-1] = 1.0
    return cdf


def _draw_positions(game: GameConfig, rng: np.random.Generator, size: int) -> np.ndarray:
    """1-indexed positions of N, one per sample."""
    if game.is_classical:
        return rng.integers(1, game.n + 1, size=size)
    u = rng.random(size)
    return np.searchsorted(_position_cdf(game), u, side="right") + 1


def sample_permutation(game: GameConfig, rng: np.random.Generator) -> Permutation:
    """One exact draw from f."""
    n = game.n
    p = int(_draw_positions(game, rng, 1)[0])
    rest = rng.permutation(np.arange(1, n)).tolist()
    rest.insert(p - 1, n)
    return Permutation(tuple(rest))


def sample_batch(game: GameConfig, rng: np.random.Generator, size: int) -> np.ndarray:
    """`size` exact draws from f as rows of an int64 matrix."""
    if size < 1:
        raise InvalidInputError(f"batch size must be >= 1, got {size}")
    n = game.n
    if n == 1:
        return np.ones((size, 1), dtype=np.int64)

    pos0 = _draw_positions(game, rng, size)[:, None] - 1
    others = rng.permuted(np.tile(np.arange(1, n, dtype=np.int64), (size, 1)), axis=1)

    col = np.arange(n)[None, :]
    src = np.clip(np.where(col < pos0, col, col - 1), 0, n - 2)
    gathered = np.take_along_axis(others, src, axis=1)
    return np.where(col == pos0, np.int64(n), gathered)


def play_strategy(pi: Permutation, r: int) -> tuple[bool, int | None]:
    """
    Play the r-positional strategy seeing only prefix flattenings.

    Accepts the first i > r whose flattened prefix ends in i; the last candidate
    is hired if nobody was accepted before. Returns (won, accepted position), with
    no position when r = N rejects everyone.
    """
    n = pi.n
    if r < 0 or r > n:
        raise InvalidInputError(f"r must be in [0, {n}], got {r}")
    views = prefix_flattening_entries(pi.entries)
    for i in range(r + 1, n + 1):
        if views[i - 1][-1] == i or i == n:
            return pi.entries[i - 1] == n, i
    return False, None


def play_batch(matrix: np.ndarray, r: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Vectorized `play_strategy` over the rows of `matrix`.

    Returns (won, accepted position); position 0 stands for "nobody hired".
    """
    size, n = matrix.shape
    if r < 0 or r > n:
        raise InvalidInputError(f"r must be in [0, {n}], got {r}")
    if r == n:
        return np.zeros(size, dtype=bool), np.zeros(size, dtype=np.int64)

    # Entry i is a relative maximum iff it equals the running maximum.
    is_max = matrix == np.maximum.accumulate(matrix, axis=1)
    eligible = is_max[:, r:].copy()
    eligible[:, -1] = True
    first = r + np.argmax(eligible, axis=1)
    won = matrix[np.arange(size), first] == n
    return won, first + 1


def _worker_counts(num_samples: int, workers: int) -> list[int]:
    base, extra = divmod(num_samples, workers)
    return [base + (1 if i < extra else 0) for i in range(workers)]


def _streams(config: SampleConfig) -> list[np.random.Generator]:
    children = np.random.SeedSequence(config.seed).spawn(config.workers)
    return [np.random.Generator(np.random.PCG64(child)) for child in children]


def _run_workers[T](config: SampleConfig, task: Callable[[np.random.Generator, int], T]) -> list[T]:
    """Run `task(rng, count)` once per worker stream; results keep worker order."""
    jobs = list(zip(_streams(config), _worker_counts(config.num_samples, config.workers), strict=True))
    if config.workers == 1:
        return [task(*jobs[0])]
    with ThreadPoolExecutor(max_workers=config.workers, thread_name_prefix="bestchoice-mc") as pool:
        return list(pool.map(lambda job: task(*job), jobs))


def estimate_win_probability(
    config: SampleConfig,
    r: int,
    settings: SimulationSettings = DEFAULT_SIMULATION,
) -> Estimate:
    """Fraction of sampled permutations won by the r-positional strategy."""
    game = config.game
    if r < 0 or r > game.n:
        raise InvalidInputError(f"r must be in [0, {game.n}], got {r}")
    rows = settings.rows_per_batch(game.n)

    def task(rng: np.random.Generator, count: int) -> int:
        wins = 0
        remaining = count
        while remaining > 0:
            size = min(rows, remaining)
            won, _ = play_batch(sample_batch(game, rng, size), r)
            wins += int(won.sum())
            remaining -= size
        return wins

    wins = sum(_run_workers(config, task))
    return Estimate.from_counts(wins, config.num_samples, ci_level=settings.ci_level)


def empirical_position_histogram(
    config: SampleConfig,
    settings: SimulationSettings = DEFAULT_SIMULATION,
) -> PositionHistogram:
    """Histogram of π⁻¹(N) over sampled permutations, with its chi-square test."""
    game = config.game
    n = game.n
    rows = settings.rows_per_batch(n)

    def task(rng: np.random.Generator, count: int) -> np.ndarray:
        counts = np.zeros(n, dtype=np.int64)
        remaining = count
        while remaining > 0:
            size = min(rows, remaining)
            positions = np.argmax(sample_batch(game, rng, size) == n, axis=1)
            counts += np.bincount(positions, minlength=n)
            remaining -= size
        return counts

    counts = np.sum(_run_workers(config, task), axis=0)
    probs = position_distribution(game)

    if n == 1:
        chi2, p_value = 0.0, 1.0
    else:
        mask = probs > 0
        observed = counts[mask]
        expected = probs[mask] / probs[mask].sum() * observed.sum()
        result = stats.chisquare(observed, f_exp=expected)
        chi2, p_value = float(result.statistic), float(result.pvalue)

    return PositionHistogram(
        counts=tuple(int(c) for c in counts),
        expected=tuple(float(p) for p in probs),
        chi2=chi2,
        p_value=p_value,
    )
