"""
N → ∞ behaviour of the positional strategies.

For θ < 1 the win probability of rejecting r candidates tends to
P_r(θ) = r(1−θ)·Σ_{i≥r} θ^i/i (P₀ = 1−θ). Consecutive curves P_{r−1}, P_r meet
exactly where P_r peaks, so the critical points found from dP_r/dθ = 0 are
also the boundaries of the regimes in which each r is optimal.

For θ > 1 the trend regime is handled through the finite-N formula.
"""

from __future__ import annotations

import math
import threading
from bisect import bisect_left
from dataclasses import dataclass
from fractions import Fraction
from typing import Final

import numpy as np
from scipy.optimize import brentq

from .config import DEFAULT_SOLVER, SolverSettings
from .errors import DomainError, InvalidInputError, NumericalError
from .exact import StrategyOutcome, win_probability
from .model import GameConfig, Real
from .specfun import exp_integral_e1, find_alpha_beta, objective_f

# Upper end of every critical-point bracket.
THETA_CEILING: Final[float] = 1.0 - 1e-9

# Critical points must satisfy the intersection identity to this tolerance.
_INTERSECTION_TOL: Final[float] = 1e-10

_HEAD_NUMPY_MIN: Final[int] = 64
_RTOL_FLOOR: Final[float] = 4.0 * 2.220446049250313e-16


def _check_unit_interval(theta: float) -> float:
    if not (0.0 < theta < 1.0):
        raise DomainError(f"asymptotic curves need 0 < theta < 1, got {theta!r}")
    return float(theta)


def _head_sum(r: int, theta: float) -> float:
    """Σ_{i=1}^{r−1} θ^i/i."""
    if r <= 1:
        return 0.0
    if r < _HEAD_NUMPY_MIN:
        return math.fsum(theta**i / i for i in range(1, r))
    i = np.arange(1, r, dtype=np.float64)
    return float(np.sum(np.power(theta, i) / i))


def tail_sum(r: int, theta: float, settings: SolverSettings = DEFAULT_SOLVER) -> float:
    """
    Σ_{i=r}^∞ θ^i/i for r ≥ 1.

    Uses −ln(1−θ) − Σ_{i<r} θ^i/i unless the tail is tiny next to −ln(1−θ), where that
    difference cancels; then the tail is summed directly until the geometric bound
    on the remainder drops below `tail_rel_tol` of the running sum.
    """
    theta = _check_unit_interval(theta)
    if r < 1:
        raise InvalidInputError(f"tail sum needs r >= 1, got {r}")

    log_total = -math.log1p(-theta)
    estimate = theta**r / (r * (1.0 - theta))
    if estimate >= settings.tail_switch_ratio * log_total:
        return log_total - _head_sum(r, theta)

    total = 0.0
    power = theta**r
    i = r
    while power > 0.0:
        term = power / i
        total += term
        power *= theta
        i += 1
        # Remainder ≤ next term / (1−θ).
        if power / (i * (1.0 - theta)) < settings.tail_rel_tol * total:
            break
    return total


def p_asym(r: int, theta: float, settings: SolverSettings = DEFAULT_SOLVER) -> float:
    """P_r(θ) = r(1−θ)·Σ_{i≥r} θ^i/i, with P₀(θ) = 1−θ."""
    theta = _check_unit_interval(theta)
    if r < 0:
        raise InvalidInputError(f"r must be >= 0, got {r}")
    if r == 0:
        return 1.0 - theta
    return r * (1.0 - theta) * tail_sum(r, theta, settings)


def p_asym_derivative(r: int, theta: float, settings: SolverSettings = DEFAULT_SOLVER) -> float:
    """dP_r/dθ = r(θ^{r−1} − Σ_{i≥r} θ^i/i)."""
    theta = _check_unit_interval(theta)
    if r < 1:
        raise InvalidInputError(f"derivative is defined here for r >= 1, got {r}")
    return r * (theta ** (r - 1) - tail_sum(r, theta, settings))


@dataclass(frozen=True, slots=True)
class AsymptoticCurve:
    """The limiting win-probability curve of the r-positional strategy."""

    r: int

    def __post_init__(self) -> None:
        if self.r < 0:
            raise InvalidInputError(f"r must be >= 0, got {self.r}")

    def value(self, theta: float, settings: SolverSettings = DEFAULT_SOLVER) -> float:
        return p_asym(self.r, theta, settings)

    def derivative(self, theta: float, settings: SolverSettings = DEFAULT_SOLVER) -> float:
        return p_asym_derivative(self.r, theta, settings)


@dataclass(frozen=True, slots=True)
class CriticalPoint:
    """Where P_{r−1} meets P_r, which is also the maximum of P_r."""

    r: int
    theta_star: float
    p_star: float


@dataclass(frozen=True, slots=True)
class RegimeRow:
    r: int
    theta_low: float
    theta_high: float
    p_at_low: float


@dataclass(frozen=True, slots=True)
class RegimeTable:
    """Rows (r, θ_low, θ_high) covering (0, θ_max] without gaps."""

    rows: tuple[RegimeRow, ...]

    def __post_init__(self) -> None:
        for prev, row in zip(self.rows, self.rows[1:], strict=False):
            if prev.theta_high != row.theta_low or row.r != prev.r + 1:
                raise NumericalError(f"regime table is not contiguous between r={prev.r} and r={row.r}")

    @property
    def theta_max(self) -> float:
        return self.rows[-1].theta_high


@dataclass(frozen=True, slots=True)
class ScaledThreshold:
    """c = (1−θ)·r, the threshold on the scale where the θ ↑ 1 limit lives."""

    c: float

    def __post_init__(self) -> None:
        if not (self.c > 0):
            raise DomainError(f"scaled threshold must be > 0, got {self.c!r}")

    @classmethod
    def from_r(cls, r: float, theta: float) -> ScaledThreshold:
        return cls(c=(1.0 - _check_unit_interval(theta)) * r)

    def to_r(self, theta: float) -> float:
        return self.c / (1.0 - _check_unit_interval(theta))


class CriticalPointTable:
    """
    Lazily extended, append-only list of critical points θ*_1 < θ*_2 < ….

    θ*_r is bracketed on [θ*_{r−1}, 1−1e-9], so the list grows in order. Extension
    happens under a lock; readers only see fully computed entries, and a
    recomputation would produce identical values.
    """

    def __init__(self, settings: SolverSettings = DEFAULT_SOLVER) -> None:
        self._settings = settings
        self._points: list[CriticalPoint] = []
        self._lock = threading.Lock()

    @property
    def settings(self) -> SolverSettings:
        return self._settings

    def __len__(self) -> int:
        return len(self._points)

    def get(self, r: int) -> CriticalPoint:
        if r < 1:
            raise InvalidInputError(f"critical points exist for r >= 1, got {r}")
        self.extend_to(r)
        return self._points[r - 1]

    def extend_to(self, r: int) -> None:
        if len(self._points) >= r:
            return
        with self._lock:
            while len(self._points) < r:
                prev = self._points[-1].theta_star if self._points else 0.0
                self._points.append(_solve_critical_point(len(self._points) + 1, prev, self._settings))

    def boundaries(self) -> list[float]:
        return [p.theta_star for p in self._points]

    def locate(self, theta: float) -> int:
        """
        Index r of the regime containing θ; on a shared boundary the smaller r wins.
        """
        theta = _check_unit_interval(theta)
        r = 1
        while self.get(r).theta_star < theta:
            r += 1
            if r > self._settings.regime_cap:
                raise DomainError(
                    f"theta={theta!r} lies beyond regime r={self._settings.regime_cap}; "
                    "use the asymptotic policy instead"
                )
        return bisect_left(self.boundaries(), theta)


def _solve_critical_point(r: int, lower: float, settings: SolverSettings) -> CriticalPoint:
    def g(theta: float) -> float:
        return theta ** (r - 1) - tail_sum(r, theta, settings)

    lo = max(lower, 1e-9)
    hi = THETA_CEILING
    g_lo, g_hi = g(lo), g(hi)
    if not (g_lo > 0.0 > g_hi):
        raise NumericalError(
            f"critical point r={r}: no sign change on [{lo!r}, {hi!r}] (g={g_lo!r}, {g_hi!r})"
        )

    theta_star, info = brentq(
        g,
        lo,
        hi,
        xtol=settings.root_tol,
        rtol=_RTOL_FLOOR,
        maxiter=500,
        full_output=True,
        disp=False,
    )
    if not info.converged:
        raise NumericalError(
            f"critical point r={r}: root finder stopped after {info.iterations} iterations "
            f"({info.flag}) on bracket [{lo!r}, {hi!r}]"
        )

    theta_star = float(theta_star)
    p_star = p_asym(r, theta_star, settings)
    p_prev = p_asym(r - 1, theta_star, settings)
    if abs(p_prev - p_star) > _INTERSECTION_TOL:
        raise NumericalError(
            f"critical point r={r}: P_(r-1)={p_prev!r} and P_r={p_star!r} differ at theta={theta_star!r}"
        )
    return CriticalPoint(r=r, theta_star=theta_star, p_star=p_star)


_TABLES: dict[SolverSettings, CriticalPointTable] = {}
_TABLES_LOCK = threading.Lock()


def critical_point_table(settings: SolverSettings = DEFAULT_SOLVER) -> CriticalPointTable:
    """Shared table for the given settings."""
    table = _TABLES.get(settings)
    if table is None:
        with _TABLES_LOCK:
            table = _TABLES.setdefault(settings, CriticalPointTable(settings))
    return table


def critical_point(r: int, settings: SolverSettings = DEFAULT_SOLVER) -> CriticalPoint:
    """θ* solving θ^{r−1} = Σ_{i≥r} θ^i/i, with P_r(θ*)."""
    return critical_point_table(settings).get(r)


def regime_table(r_max: int, settings: SolverSettings = DEFAULT_SOLVER) -> RegimeTable:
    """
    Rows r = 0..r_max: r is optimal on [θ*_r, θ*_{r+1}] (θ*_0 = 0).

    θ_max is θ*_{r_max+1}; `p_at_low` is P_r at the lower boundary (P_r(θ*_r) = P*).
    """
    if r_max < 1:
        raise InvalidInputError(f"r_max must be >= 1, got {r_max}")
    table = critical_point_table(settings)
    table.extend_to(r_max + 1)

    rows: list[RegimeRow] = []
    for r in range(r_max + 1):
        low = 0.0 if r == 0 else table.get(r).theta_star
        high = table.get(r + 1).theta_star
        p_low = 1.0 if r == 0 else table.get(r).p_star
        rows.append(RegimeRow(r=r, theta_low=low, theta_high=high, p_at_low=p_low))
    return RegimeTable(rows=tuple(rows))


def optimal_strategy_asym(theta: float, settings: SolverSettings = DEFAULT_SOLVER) -> StrategyOutcome:
    """(r, P_r(θ)) for the r that maximizes P_r at θ; the table grows on demand."""
    theta = _check_unit_interval(theta)
    r = critical_point_table(settings).locate(theta)
    return StrategyOutcome(r=r, win_probability=p_asym(r, theta, settings))


def tail_integral_bounds(r: int, theta: float) -> tuple[float, float]:
    """
    ∫_r^∞ θ^t/t dt < Σ_{i≥r} θ^i/i < ∫_{r−1}^∞ θ^t/t dt, via ∫_a^∞ θ^t/t dt = E₁(a·ln(1/θ)).

    The upper bound is infinite for r = 1.
    """
    theta = _check_unit_interval(theta)
    if r < 1:
        raise InvalidInputError(f"r must be >= 1, got {r}")
    log_inv = -math.log(theta)
    lower = exp_integral_e1(r * log_inv)
    upper = math.inf if r == 1 else exp_integral_e1((r - 1) * log_inv)
    return lower, upper


def integral_error_bound(r: int, theta: float) -> float:
    """4(1−θ)θ^r."""
    return 4.0 * (1.0 - theta) * theta**r


def p_integral_approx(r: int, theta: float, settings: SolverSettings = DEFAULT_SOLVER) -> float:
    """
    P̃_r(θ) = r(1−θ)·∫_r^∞ θ^t/t dt = r(1−θ)·E₁(r·ln(1/θ)).

    Raises `NumericalError` if it strays from P_r(θ) by 4(1−θ)θ^r or more.
    """
    theta = _check_unit_interval(theta)
    if r < 1:
        raise InvalidInputError(f"r must be >= 1, got {r}")
    approx = r * (1.0 - theta) * exp_integral_e1(-r * math.log(theta))

    diff = abs(p_asym(r, theta, settings) - approx)
    bound = integral_error_bound(r, theta)
    if diff > 0.0 and diff >= bound:
        raise NumericalError(
            f"integral approximation off by {diff!r} >= bound {bound!r} at r={r}, theta={theta!r}"
        )
    return approx


def p_scaled_approx(c: float, theta: float) -> float:
    """P̃_c(θ) = c·∫_c^∞ (θ^{1/(1−θ)})^u/u du = c·E₁(c·ln(1/θ)/(1−θ))."""
    theta = _check_unit_interval(theta)
    c = ScaledThreshold(c).c
    return c * exp_integral_e1(-c * math.log(theta) / (1.0 - theta))


def scaled_error_bound(c: float, theta: float) -> float:
    """4θ^{c/(1−θ)}(1−θ), the integral error bound on the scaled axis."""
    theta = _check_unit_interval(theta)
    return 4.0 * theta ** ScaledThreshold(c).to_r(theta) * (1.0 - theta)


def limiting_objective(c: float) -> float:
    """c·E₁(c), the θ ↑ 1 limit of P̃_c; the same function as `specfun.objective_f`."""
    if not (c > 0):
        raise DomainError(f"limiting objective needs c > 0, got {c!r}")
    return objective_f(c)


def theta_scaling_limit(theta: float) -> float:
    """θ^{1/(1−θ)}, which tends to 1/e as θ ↑ 1."""
    theta = _check_unit_interval(theta)
    return math.exp(math.log(theta) / (1.0 - theta))


@dataclass(frozen=True, slots=True)
class PriceGap:
    """Classical 1/e versus the limit β under vanishing interview costs."""

    classical: float
    limit: float

    @property
    def gap(self) -> float:
        return self.classical - self.limit


def discontinuity_gap(settings: SolverSettings = DEFAULT_SOLVER) -> PriceGap:
    return PriceGap(classical=math.exp(-1.0), limit=find_alpha_beta(settings).beta)


def derivative_polynomial(r: int) -> tuple[tuple[Fraction, ...], int]:
    """
    dP_r/dθ = Σ_k coeffs[k]·θ^k + log_coefficient·ln(1−θ).

    coeffs[k] = r/k for 1 ≤ k ≤ r−1, plus r on θ^{r−1}; the log coefficient is r.
    """
    if r < 1:
        raise InvalidInputError(f"r must be >= 1, got {r}")
    coeffs = [Fraction(0)] * r
    for k in range(1, r):
        coeffs[k] = Fraction(r, k)
    coeffs[r - 1] += r
    return tuple(coeffs), r


def format_derivative_polynomial(r: int) -> str:
    """Human form, highest power first, e.g. `4θ + 2ln(1−θ)`."""
    coeffs, log_coef = derivative_polynomial(r)
    parts: list[str] = []
    for k in range(len(coeffs) - 1, -1, -1):
        c = coeffs[k]
        if c == 0:
            continue
        num = "" if (c == 1 and k > 0) else str(c)
        power = "" if k == 0 else ("θ" if k == 1 else f"θ^{k}")
        parts.append(f"{num}{power}")
    parts.append(f"{'' if log_coef == 1 else log_coef}ln(1−θ)")
    return " + ".join(parts)


def trend_threshold(n: int, lam: Real) -> int:
    """⌊N/λ⌋, the number of candidates rejected in the trend regime."""
    if not (lam > 1):
        raise DomainError(f"lambda must be > 1, got {lam!r}")
    if n < lam:
        raise DomainError(f"need n >= lambda, got n={n}, lambda={lam!r}")
    return math.floor(Fraction(n) / Fraction(lam))


def trend_probability(n: int, lam: Real, theta: Real) -> Real:
    """
    P_{⌊N/λ⌋}(N, θ) for θ > 1; tends to 1/λ as N grows.
    """
    if not (theta > 1):
        raise DomainError(f"trend regime needs theta > 1, got {theta!r}")
    r = trend_threshold(n, lam)
    return win_probability(GameConfig(n=n, theta=theta), r).win_probability


def telescoping_identity_check(n: int, lam: Real, theta: Real) -> Real:
    """
    |LHS − RHS| of the almost telescoping sum, with m = N/λ:

        (1−θ)·Σ_{i=m}^{N−1} θ^i/i = θ^m/m − θ^N/(N−1) − Σ_{i=m+1}^{N−1} θ^i/(i(i−1)).

    Exact for `Fraction` θ (the residual is then 0).
    """
    if theta == 1 or not (theta > 0):
        raise DomainError(f"identity needs theta > 0 and theta != 1, got {theta!r}")
    ratio = Fraction(n) / Fraction(lam)
    if ratio.denominator != 1 or not (1 <= ratio < n):
        raise InvalidInputError(f"N/lambda must be an integer in [1, N-1], got {ratio}")
    m = int(ratio)

    if isinstance(theta, (Fraction, int)):
        t = Fraction(theta)
        lhs: Real = (1 - t) * sum((t**i / i for i in range(m, n)), Fraction(0))
        rhs: Real = (
            t**m / m
            - t**n / (n - 1)
            - sum((t**i / (i * (i - 1)) for i in range(m + 1, n)), Fraction(0))
        )
        return abs(lhs - rhs)

    t = float(theta)
    lhs = (1.0 - t) * math.fsum(t**i / i for i in range(m, n))
    rhs = math.fsum(
        [t**m / m, -(t**n) / (n - 1), *(-(t**i) / (i * (i - 1)) for i in range(m + 1, n))]
    )
    return abs(lhs - rhs)


def curve_grid(
    theta_min: float,
    theta_max: float,
    grid: int,
    r_max: int,
    settings: SolverSettings = DEFAULT_SOLVER,
) -> list[tuple[float, int, float]]:
    """(θ, r, P_r(θ)) over an even θ grid and r = 0..r_max: the data for the curve plot."""
    if not (0.0 < theta_min < theta_max < 1.0):
        raise DomainError(f"need 0 < theta_min < theta_max < 1, got {theta_min!r}, {theta_max!r}")
    if grid < 2:
        raise DomainError(f"grid must be >= 2, got {grid}")
    if r_max < 0:
        raise InvalidInputError(f"r_max must be >= 0, got {r_max}")

    curves = [AsymptoticCurve(r) for r in range(r_max + 1)]
    rows: list[tuple[float, int, float]] = []
    for k in range(grid):
        theta = theta_min + (theta_max - theta_min) * k / (grid - 1)
        for curve in curves:
            rows.append((theta, curve.r, curve.value(theta, settings)))
    return rows
