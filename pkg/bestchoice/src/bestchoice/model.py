"""
Permutations, relative ranks and the weighted distribution on S_N.

A permutation is kept in one-line notation (positions are 1-indexed); the
weighting statistic is c(π) = π⁻¹(N) − 1, the number of interviews wasted
before the best candidate shows up. The distribution is f(π) ∝ θ^{c(π)}.

Two arithmetic paths share this module: `Fraction` θ (exact, used by the
oracles) and `float` θ (binary64, used everywhere else).
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from typing import Final

from .errors import DomainError, InvalidInputError, RangeError

type Real = float | Fraction

# θ given as a rational number: always a `Fraction` in lowest terms with a positive denominator.
type RationalWeight = Fraction

_MAX_FLOAT_FACTORIAL: Final[int] = 170


@dataclass(frozen=True, slots=True)
class Permutation:
    """A permutation of {1..n} in one-line notation."""

    entries: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(int(v) for v in self.entries))
        n = len(self.entries)
        if n < 1:
            raise InvalidInputError("a permutation needs at least one entry")
        if sorted(self.entries) != list(range(1, n + 1)):
            raise InvalidInputError(f"not a permutation of 1..{n}: {self.entries!r}")

    @property
    def n(self) -> int:
        return len(self.entries)

    def position_of(self, value: int) -> int:
        """1-indexed position of `value`."""
        return self.entries.index(value) + 1

    def __str__(self) -> str:
        return format_permutation(self)

    @classmethod
    def parse(cls, text: str) -> Permutation:
        return parse_permutation(text)


@dataclass(frozen=True, slots=True)
class GameConfig:
    """
    Pool size N and weight parameter θ.

    Integer θ is promoted to `Fraction` so it takes the exact path; θ = 1 is the
    classical (uniform) case and consumers branch on `is_classical`.
    """

    n: int
    theta: Real

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidInputError(f"n must be >= 1, got {self.n}")
        if isinstance(self.theta, int):
            object.__setattr__(self, "theta", Fraction(self.theta))
        if not (self.theta > 0) or (isinstance(self.theta, float) and math.isinf(self.theta)):
            raise DomainError(f"theta must be a positive finite number, got {self.theta!r}")

    @property
    def exact(self) -> bool:
        return isinstance(self.theta, Fraction)

    @property
    def is_classical(self) -> bool:
        return self.theta == 1


def flatten(seq: Sequence[int]) -> Permutation:
    """
    The permutation of {1..len(seq)} with the same relative order as `seq`.

    >>> flatten((2, 5, 1, 6)).entries
    (2, 3, 1, 4)
    """
    if len(seq) < 1:
        raise InvalidInputError("cannot flatten an empty sequence")
    if len(set(seq)) != len(seq):
        raise InvalidInputError(f"flatten needs distinct elements, got {tuple(seq)!r}")
    return Permutation(_flatten_entries(seq))


def _flatten_entries(seq: Sequence[int]) -> tuple[int, ...]:
    ranks = {v: i for i, v in enumerate(sorted(seq), start=1)}
    return tuple(ranks[v] for v in seq)


def prefix_flattenings(pi: Permutation) -> tuple[Permutation, ...]:
    """(π|₁, …, π|_N): what the player sees after each interview."""
    return tuple(Permutation(q) for q in prefix_flattening_entries(pi.entries))


def prefix_flattening_entries(entries: Sequence[int]) -> tuple[tuple[int, ...], ...]:
    """Unvalidated tuple form of `prefix_flattenings`, for the enumeration oracles."""
    return tuple(_flatten_entries(entries[:i]) for i in range(1, len(entries) + 1))


def left_to_right_maxima(pi: Permutation) -> tuple[int, ...]:
    """Positions (1-indexed) of entries larger than everything before them."""
    out: list[int] = []
    best = 0
    for pos, v in enumerate(pi.entries, start=1):
        if v > best:
            out.append(pos)
            best = v
    return tuple(out)


def cost_statistic(pi: Permutation) -> int:
    """c(π) = π⁻¹(N) − 1, the 0-indexed position of the largest entry."""
    return pi.position_of(pi.n) - 1


def winnable_interval(pi: Permutation) -> tuple[int, int]:
    """
    Half-open interval [lo, hi) of thresholds r for which π is r-winnable.

    hi is the position of N and lo the previous left-to-right maximum (0 when N
    comes first, so that only r = 0 wins).
    """
    maxima = left_to_right_maxima(pi)
    hi = maxima[-1]
    lo = maxima[-2] if len(maxima) >= 2 else 0
    return lo, hi


def is_r_winnable(pi: Permutation, r: int) -> bool:
    """True iff rejecting the first r candidates, then taking the next left-to-right maximum, hires N."""
    if r < 0 or r > pi.n:
        raise InvalidInputError(f"r must be in [0, {pi.n}], got {r}")
    lo, hi = winnable_interval(pi)
    return lo <= r < hi


def weight(pi: Permutation, theta: Real) -> Real:
    """Unnormalized weight θ^{c(π)}."""
    if not (theta > 0):
        raise DomainError(f"theta must be > 0, got {theta!r}")
    return theta ** cost_statistic(pi)


def geometric_sum(theta: Real, n: int) -> Real:
    """1 + θ + ⋯ + θ^{n−1}."""
    if theta == 1:
        return Fraction(n) if isinstance(theta, Fraction) else float(n)
    if isinstance(theta, Fraction):
        return sum((theta**k for k in range(n)), Fraction(0))
    return math.fsum(theta**k for k in range(n))


def normalizer(config: GameConfig) -> Real:
    """
    Σ_{π ∈ S_N} θ^{c(π)} = (N−1)!·(1 + θ + ⋯ + θ^{N−1}).

    Raises `RangeError` on the float path once (N−1)! leaves binary64.
    """
    fact = math.factorial(config.n - 1)
    if config.exact:
        return fact * geometric_sum(config.theta, config.n)
    if config.n - 1 > _MAX_FLOAT_FACTORIAL:
        raise RangeError(f"({config.n}-1)! overflows binary64; use an exact theta")
    value = float(fact) * geometric_sum(config.theta, config.n)
    if math.isinf(value):
        raise RangeError(f"normalizer for N={config.n}, theta={config.theta} overflows binary64")
    return value


def format_permutation(pi: Permutation) -> str:
    """Comma-separated one-line notation, e.g. `2,5,1,6,3,7,4`."""
    return ",".join(str(v) for v in pi.entries)


def parse_permutation(text: str) -> Permutation:
    """
    Parse `2,5,1,6,3,7,4`, or the digit shorthand `2516374` for N ≤ 9.
    """
    s = text.strip()
    if not s:
        raise InvalidInputError("empty permutation literal")
    try:
        if "," in s:
            entries = tuple(int(tok) for tok in s.split(","))
        elif s.isdigit() and len(s) <= 9:
            entries = tuple(int(ch) for ch in s)
        else:
            entries = (int(s),)
    except ValueError as e:
        raise InvalidInputError(f"invalid permutation literal {text!r}") from e
    return Permutation(entries)


def all_permutations(n: int) -> Iterable[Permutation]:
    """Every permutation of {1..n} (n! of them)."""
    for entries in permutations(range(1, n + 1)):
        yield Permutation(entries)
