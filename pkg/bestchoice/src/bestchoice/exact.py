"""
Exact finite-N quantities for the weighted game of best choice.

W_N(r) is the total weight of r-winnable permutations of N and
P_r(N, θ) = W_N(r) / normalizer. The closed forms are checked against two
oracles that assume nothing about them: literal enumeration of S_N, and
backward induction over the full tree of prefix flattenings.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cache
from itertools import permutations
from typing import Final, Literal

import numpy as np

from .config import DEFAULT_SOLVER, SolverSettings
from .errors import EnumerationCapError, InvalidInputError, RangeError
from .model import (
    GameConfig,
    Permutation,
    Real,
    geometric_sum,
    normalizer,
    prefix_flattening_entries,
    winnable_interval,
)

type Method = Literal["closed_form", "recurrence", "brute_force"]

# Relative slack when the float DP decides whether one action is strictly better.
_DP_FLOAT_TIE: Final[float] = 1e-12
_MAX_FLOAT_FACTORIAL: Final[int] = 170


@dataclass(frozen=True, slots=True)
class WinnableWeight:
    n: int
    r: int
    value: Real


@dataclass(frozen=True, slots=True)
class StrategyOutcome:
    """A rejection threshold r and its win probability."""

    r: int
    win_probability: Real

    def __post_init__(self) -> None:
        if not (0 <= self.win_probability <= 1):
            raise ValueError(f"win probability out of [0, 1]: {self.win_probability!r}")


@dataclass(frozen=True, slots=True)
class SolverRecord:
    """One serialized result row."""

    n: int
    theta: Real
    r: int
    w: Real | None
    p: Real
    method: Method


@dataclass(frozen=True, slots=True)
class PolicyResult:
    """
    Outcome of backward induction over all strategies.

    `accept` maps each prefix flattening (as a tuple) to whether stopping there is
    optimal. `positional_threshold` is an r whose positional strategy attains
    `value`, or None when no positional strategy does.
    """

    n: int
    theta: Real
    value: Real
    accept: dict[tuple[int, ...], bool] = field(repr=False)
    positional_threshold: int | None

    @property
    def is_positional(self) -> bool:
        return self.positional_threshold is not None


def _coerce_theta(theta: Real) -> Real:
    return Fraction(theta) if isinstance(theta, int) else theta


def _check_factorial_range(n: int, theta: Real) -> None:
    if not isinstance(theta, Fraction) and n - 1 > _MAX_FLOAT_FACTORIAL:
        raise RangeError(f"({n}-1)! overflows binary64; use an exact theta")


def _check_float(value: Real, what: str) -> Real:
    if isinstance(value, float) and math.isinf(value):
        raise RangeError(f"{what} overflows binary64; use an exact theta")
    return value


def w_recurrence(n: int, r: int, theta: Real) -> WinnableWeight:
    """
    W_N(r) from W_N(r) = (N−1)·W_{N−1}(r) + r·(N−2)!·θ^{N−1}, built bottom-up.

    W₁(0) = 1 and W_m(r) = 0 for m ≤ r (everybody is rejected); the recurrence runs
    from m = max(2, r+1) upward.
    """
    if n < 1 or r < 0:
        raise InvalidInputError(f"need n >= 1 and r >= 0, got n={n}, r={r}")
    theta = _coerce_theta(theta)
    if r >= n:
        return WinnableWeight(n=n, r=r, value=theta * 0)
    _check_factorial_range(n, theta)

    w: Real = theta * 0 + (1 if r == 0 else 0)
    power = theta ** max(1, r)  # θ^{m−1} at m = max(2, r+1)
    fact = math.factorial(max(0, r - 1))  # (m−2)!
    for m in range(max(2, r + 1), n + 1):
        w = (m - 1) * w + r * fact * power
        power *= theta
        fact *= m - 1
    return WinnableWeight(n=n, r=r, value=_check_float(w, "W_N(r)"))


def w_closed_form(n: int, r: int, theta: Real) -> WinnableWeight:
    """W_N(r) = (N−1)! for r = 0, and (N−1)!·r·Σ_{i=r}^{N−1} θ^i/i for 1 ≤ r ≤ N−1."""
    if n < 1 or r < 0:
        raise InvalidInputError(f"need n >= 1 and r >= 0, got n={n}, r={r}")
    theta = _coerce_theta(theta)
    if r >= n:
        return WinnableWeight(n=n, r=r, value=theta * 0)
    _check_factorial_range(n, theta)
    fact = math.factorial(n - 1)
    if r == 0:
        value: Real = Fraction(fact) if isinstance(theta, Fraction) else float(fact)
    else:
        value = fact * r * _harmonic_tail(theta, r, n)
    return WinnableWeight(n=n, r=r, value=_check_float(value, "W_N(r)"))


def _harmonic_tail(theta: Real, r: int, n: int) -> Real:
    """Σ_{i=r}^{n−1} θ^i/i."""
    if isinstance(theta, Fraction):
        return sum((theta**i / i for i in range(r, n)), Fraction(0))
    return math.fsum(theta**i / i for i in range(r, n))


def _check_r(config: GameConfig, r: int) -> None:
    if r < 0 or r >= config.n:
        raise InvalidInputError(f"r must be in [0, {config.n - 1}] for N={config.n}, got {r}")


def win_probability(config: GameConfig, r: int) -> StrategyOutcome:
    """
    P_r(N, θ) for the strategy that rejects r initial candidates.

    θ ≠ 1: r(1−θ)·Σ_{i=r}^{N−1} θ^i/i / (1−θ^N), and (1−θ)/(1−θ^N) at r = 0.
    θ = 1: (r/N)·Σ_{i=r}^{N−1} 1/i, and 1/N at r = 0.
    """
    _check_r(config, r)
    if config.exact:
        return StrategyOutcome(r=r, win_probability=_exact_probability(config, r))
    return StrategyOutcome(r=r, win_probability=float(_float_curve(config, r_only=r)[0]))


def win_probabilities(config: GameConfig) -> list[Real]:
    """[P_0(N, θ), …, P_{N−1}(N, θ)] in one pass over suffix sums."""
    if config.exact:
        return _exact_curve(config)
    return [float(p) for p in _float_curve(config)]


def _exact_probability(config: GameConfig, r: int) -> Fraction:
    n, theta = config.n, Fraction(config.theta)
    if theta == 1:
        if r == 0:
            return Fraction(1, n)
        return Fraction(r, n) * sum((Fraction(1, i) for i in range(r, n)), Fraction(0))
    denom = 1 - theta**n
    if r == 0:
        return (1 - theta) / denom
    return r * (1 - theta) * _harmonic_tail(theta, r, n) / denom


def _exact_curve(config: GameConfig) -> list[Real]:
    n, theta = config.n, Fraction(config.theta)
    out: list[Real] = [Fraction(0)] * n
    # θ = 1 collapses (1−θ)/(1−θ^N) to 1/N.
    scale = Fraction(1, n) if theta == 1 else (1 - theta) / (1 - theta**n)
    tail = Fraction(0)
    for r in range(n - 1, 0, -1):
        tail += theta**r / r
        out[r] = r * scale * tail
    out[0] = scale
    return out


def _float_curve(config: GameConfig, *, r_only: int | None = None) -> np.ndarray:
    """
    Factorial-free float evaluation of P_r(N, θ).

    For θ > 1 every power is taken relative to θ^N, so nothing overflows for large N.
    With `r_only`, returns a length-1 array holding just that threshold.
    """
    n = config.n
    theta = float(config.theta)
    lo = 1 if r_only is None else max(1, r_only)
    i = np.arange(lo, n, dtype=np.float64)

    if theta == 1.0:
        terms = 1.0 / i
        scale = 1.0 / n
        p0 = 1.0 / n
    else:
        log_t = math.log(theta)
        shift = n if theta > 1.0 else 0
        terms = np.exp((i - shift) * log_t) / i
        denom = math.expm1(-n * log_t) if theta > 1.0 else -math.expm1(n * log_t)
        scale = (1.0 - theta) / denom
        p0 = scale * math.exp(-shift * log_t)

    if r_only is not None:
        if r_only == 0:
            return np.array([min(1.0, p0)])
        return np.array([min(1.0, max(0.0, r_only * scale * float(np.sum(terms))))])

    suffix = np.cumsum(terms[::-1])[::-1]
    out = np.empty(n, dtype=np.float64)
    out[0] = p0
    out[1:] = np.arange(1, n) * scale * suffix
    return np.clip(out, 0.0, 1.0)


def optimal_r_finite(config: GameConfig) -> StrategyOutcome:
    """argmax_r P_r(N, θ) over r ∈ [0, N−1]; ties go to the smallest r."""
    curve = win_probabilities(config)
    best_r = 0
    for r, p in enumerate(curve):
        if p > curve[best_r]:
            best_r = r
    return StrategyOutcome(r=best_r, win_probability=curve[best_r])


def brute_force_win_weight(
    n: int,
    r: int,
    theta: Real,
    *,
    settings: SolverSettings = DEFAULT_SOLVER,
) -> WinnableWeight:
    """
    W_N(r) by enumerating all n! permutations.

    The enumeration is partitioned by the position p of N (blocks of (n−1)!
    permutations sharing the weight θ^{p−1}); block sums are reduced in block
    order. The blocks must add up to the normalizer.
    """
    if n < 1 or r < 0:
        raise InvalidInputError(f"need n >= 1 and r >= 0, got n={n}, r={r}")
    if n > settings.brute_force_cap:
        raise EnumerationCapError(
            f"brute force is capped at n={settings.brute_force_cap} (cost n!), got n={n}"
        )
    theta = _coerce_theta(theta)
    counts, block_sizes = _winnable_counts(n)

    total: Real = theta * 0
    mass: Real = theta * 0
    for p in range(1, n + 1):
        w = theta ** (p - 1)
        if r < n:
            total += counts[p - 1][r] * w
        mass += block_sizes[p - 1] * w

    expected = normalizer(GameConfig(n=n, theta=theta))
    if isinstance(theta, Fraction):
        if mass != expected:
            raise AssertionError(f"enumerated mass {mass} != normalizer {expected}")
    elif not math.isclose(mass, expected, rel_tol=1e-12):
        raise AssertionError(f"enumerated mass {mass!r} != normalizer {expected!r}")

    return WinnableWeight(n=n, r=r, value=total)


@cache
def _winnable_counts(n: int) -> tuple[tuple[tuple[int, ...], ...], tuple[int, ...]]:
    """
    counts[p−1][r]: number of r-winnable π with N at position p; plus block sizes.

    θ-independent, so one enumeration serves every θ and r.
    """
    counts = [[0] * n for _ in range(n)]
    sizes = [0] * n
    for p in range(1, n + 1):
        for rest in permutations(range(1, n)):
            pi = Permutation((*rest[: p - 1], n, *rest[p - 1 :]))
            lo, hi = winnable_interval(pi)
            row = counts[hi - 1]
            for r in range(lo, hi):
                row[r] += 1
            sizes[p - 1] += 1
    return tuple(tuple(row) for row in counts), tuple(sizes)


@dataclass(frozen=True, slots=True)
class _PrefixNode:
    prefix: tuple[int, ...]
    # Leaves π below this node whose current candidate is N (stopping here wins).
    stop_count: int
    children: tuple[tuple[int, ...], ...]


@cache
def _prefix_tree(n: int) -> tuple[tuple[_PrefixNode, ...], ...]:
    """Levels 1..n of the prefix-flattening tree of S_n, built by enumerating every π."""
    stops: list[dict[tuple[int, ...], int]] = [{} for _ in range(n + 1)]
    children: list[dict[tuple[int, ...], set[tuple[int, ...]]]] = [{} for _ in range(n + 1)]

    for entries in permutations(range(1, n + 1)):
        prefixes = prefix_flattening_entries(entries)
        for i, q in enumerate(prefixes, start=1):
            stops[i].setdefault(q, 0)
            kids = children[i].setdefault(q, set())
            if i < n:
                kids.add(prefixes[i])
        p = entries.index(n) + 1
        stops[p][prefixes[p - 1]] += 1

    levels: list[tuple[_PrefixNode, ...]] = [()]
    for i in range(1, n + 1):
        levels.append(
            tuple(
                _PrefixNode(prefix=q, stop_count=stops[i][q], children=tuple(sorted(children[i][q])))
                for q in sorted(stops[i])
            )
        )
    return tuple(levels)


def dp_optimal_policy(
    config: GameConfig,
    *,
    settings: SolverSettings = DEFAULT_SOLVER,
) -> PolicyResult:
    """
    Backward induction over every prefix flattening q, without assuming positional play.

    Masses are kept unnormalized: at q (length i) stopping wins Σ θ^{i−1} over
    the permutations under q whose i-th entry is N, and continuing wins the sum
    of the children's optimal values. Both share the conditioning denominator.
    """
    n = config.n
    if n > settings.dp_cap:
        raise EnumerationCapError(f"dp is capped at n={settings.dp_cap} (state space ~n!), got n={n}")
    theta = config.theta
    exact = config.exact
    levels = _prefix_tree(n)

    value: dict[tuple[int, ...], Real] = {}
    accept: dict[tuple[int, ...], bool] = {}
    # Per level: (some relative max strictly prefers stopping, some strictly prefers continuing).
    stop_strict = [False] * (n + 1)
    cont_strict = [False] * (n + 1)

    for i in range(n, 0, -1):
        power = theta ** (i - 1)
        for node in levels[i]:
            s = node.stop_count * power
            if i == n:
                # Last candidate: forced to hire.
                value[node.prefix] = s
                accept[node.prefix] = True
                continue
            cont = sum((value[c] for c in node.children), theta * 0)
            value[node.prefix] = max(s, cont)
            accept[node.prefix] = node.stop_count > 0 and s >= cont
            if node.prefix[-1] == i:
                slack = 0 if exact else _DP_FLOAT_TIE * max(abs(s), abs(cont))
                stop_strict[i] |= s > cont + slack
                cont_strict[i] |= cont > s + slack

    root = levels[1][0].prefix
    optimum = value[root] / normalizer(config)
    return PolicyResult(
        n=n,
        theta=theta,
        value=optimum,
        accept=accept,
        positional_threshold=_positional_threshold(stop_strict, cont_strict, n),
    )


def _positional_threshold(stop_strict: Sequence[bool], cont_strict: Sequence[bool], n: int) -> int | None:
    # The latest level where continuing is strictly better must precede every level
    # where stopping is strictly better.
    r = max((i for i in range(1, n) if cont_strict[i]), default=0)
    if any(stop_strict[i] for i in range(1, r + 1)):
        return None
    return r


def rasmussen_pliska_factor(config: GameConfig) -> Real:
    """(θ + θ² + ⋯ + θ^N)/N."""
    theta = config.theta
    return theta * geometric_sum(theta, config.n) / config.n


def rasmussen_pliska_payoff(config: GameConfig, r: int) -> Real:
    """
    P_r(N, θ)·(θ + θ² + ⋯ + θ^N)/N.

    The expected payoff θ^{π⁻¹(N)}·[strategy r hires N] of the same strategy
    played on the uniform distribution.
    """
    return win_probability(config, r).win_probability * rasmussen_pliska_factor(config)


def dp_matches_positional(policy: PolicyResult, best: StrategyOutcome) -> bool:
    """True when the unrestricted optimum equals the best positional value."""
    if isinstance(policy.value, Fraction) and isinstance(best.win_probability, Fraction):
        return policy.value == best.win_probability
    return math.isclose(float(policy.value), float(best.win_probability), rel_tol=1e-12, abs_tol=1e-15)


def solver_record(
    config: GameConfig,
    r: int,
    method: Method,
    *,
    settings: SolverSettings = DEFAULT_SOLVER,
) -> SolverRecord:
    """Compute W_N(r) and P_r(N, θ) with the requested method."""
    _check_r(config, r)
    w: Real | None
    if method == "brute_force":
        w = brute_force_win_weight(config.n, r, config.theta, settings=settings).value
        p = w / normalizer(config)
    else:
        w = _weight_or_none(w_recurrence if method == "recurrence" else w_closed_form, config, r)
        p = win_probability(config, r).win_probability
    return SolverRecord(n=config.n, theta=config.theta, r=r, w=w, p=p, method=method)


def _weight_or_none(
    solve: Callable[[int, int, Real], WinnableWeight], config: GameConfig, r: int
) -> Real | None:
    # W_N(r) carries (N−1)!; on the float path it is dropped once it leaves binary64.
    try:
        return solve(config.n, r, config.theta).value
    except RangeError:
        return None
