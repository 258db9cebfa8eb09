"""
Exponential integral E₁, the objective F(x) = x·E₁(x), and the limiting constants.

E₁ is evaluated from scratch: the convergent power series for x ≤ 1 and the
standard continued fraction (modified Lentz evaluation) for x > 1. The
quadrature cross-check lives in the tests, not here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cache
from typing import Final

from scipy.optimize import brentq

from .config import DEFAULT_SOLVER, SolverSettings
from .errors import DomainError, NumericalError

EULER_GAMMA: Final[float] = 0.57721566490153286061

# Branch point between the series and the continued fraction.
SERIES_CUTOFF: Final[float] = 1.0

ALPHA_BRACKET: Final[tuple[float, float]] = (0.1, 1.0)

_MAX_TERMS: Final[int] = 10_000
_LENTZ_TINY: Final[float] = 1e-300
_EPS: Final[float] = 2.220446049250313e-16
_RTOL_FLOOR: Final[float] = 4.0 * _EPS


@dataclass(frozen=True, slots=True)
class AlphaBeta:
    """Argmax α and maximum β of F(x) = x·E₁(x) on (0, ∞)."""

    alpha: float
    beta: float


@dataclass(frozen=True, slots=True)
class AsymptoticPolicy:
    """Limiting prescription: reject `r_real` candidates, succeed with probability `success`."""

    r_real: float
    success: float


def e1_series(x: float, *, rel_tol: float = DEFAULT_SOLVER.e1_rel_tol) -> float:
    """E₁(x) = −γ − ln x + Σ_{k≥1} (−1)^{k+1} x^k/(k·k!)."""
    if not (x > 0):
        raise DomainError(f"E1 needs x > 0, got {x!r}")
    total = 0.0
    power = 1.0  # x^k / k!
    for k in range(1, _MAX_TERMS):
        power *= x / k
        term = power / k
        total += term if k % 2 == 1 else -term
        if term <= rel_tol * abs(total):
            return -EULER_GAMMA - math.log(x) + total
    raise NumericalError(f"E1 series did not converge at x={x!r} after {_MAX_TERMS} terms")


def e1_continued_fraction(x: float, *, rel_tol: float = DEFAULT_SOLVER.e1_rel_tol) -> float:
    """
    E₁(x) = e^{−x}/(x + 1/(1 + 1/(x + 2/(1 + 2/(x + …))))).

    Evaluated in its even contraction 1/(x+1− 1²/(x+3− 2²/(x+5− …))) by the
    modified Lentz forward recurrence.
    """
    if not (x > 0):
        raise DomainError(f"E1 needs x > 0, got {x!r}")
    # One ulp around 1.0 is the finest stop a float ratio can reach.
    tol = max(rel_tol, _EPS)
    b = x + 1.0
    c = 1.0 / _LENTZ_TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
        an = -float(i * i)
        b += 2.0
        d = an * d + b
        if d == 0.0:
            d = _LENTZ_TINY
        d = 1.0 / d
        c = b + an / c
        if c == 0.0:
            c = _LENTZ_TINY
        delta = c * d
        h *= delta
        if abs(delta - 1.0) <= tol:
            return h * math.exp(-x)
    raise NumericalError(
        f"E1 continued fraction did not converge at x={x!r} after {_MAX_TERMS} terms"
    )


def exp_integral_e1(x: float) -> float:
    """
    E₁(x) = ∫_x^∞ e^{−t}/t dt for x > 0.

    Relative error ≤ 1e-13 on [1e-8, 700]; beyond 700 the value underflows toward 0.
    """
    if not (x > 0):
        raise DomainError(f"E1 needs x > 0, got {x!r}")
    if x <= SERIES_CUTOFF:
        return e1_series(x)
    return e1_continued_fraction(x)


def objective_f(x: float) -> float:
    """F(x) = x·E₁(x)."""
    return x * exp_integral_e1(x)


def objective_derivative(x: float) -> float:
    """F'(x) = E₁(x) − e^{−x}."""
    return exp_integral_e1(x) - math.exp(-x)


def find_alpha_beta(settings: SolverSettings = DEFAULT_SOLVER) -> AlphaBeta:
    """
    Solve E₁(x) = e^{−x} on [0.1, 1] and return (α, F(α)).

    Computed once per tolerance and cached; recomputation yields identical values.
    """
    return _alpha_beta(settings.alpha_tol)


@cache
def _alpha_beta(xtol: float) -> AlphaBeta:
    lo, hi = ALPHA_BRACKET
    g_lo = objective_derivative(lo)
    g_hi = objective_derivative(hi)
    if not (g_lo > 0.0 > g_hi):
        raise NumericalError(
            "alpha bracket lost its sign change (E1 is broken): "
            f"g({lo})={g_lo!r}, g({hi})={g_hi!r}"
        )

    alpha, info = brentq(
        objective_derivative,
        lo,
        hi,
        xtol=xtol,
        rtol=_RTOL_FLOOR,
        maxiter=500,
        full_output=True,
        disp=False,
    )
    if not info.converged:
        raise NumericalError(
            f"alpha root finder stopped after {info.iterations} iterations: {info.flag} "
            f"(bracket [{lo}, {hi}])"
        )

    alpha = float(alpha)
    residual = objective_derivative(alpha)
    if abs(residual) > 1e-14:
        raise NumericalError(f"E1(alpha) - exp(-alpha) = {residual!r} at alpha={alpha!r}")
    return AlphaBeta(alpha=alpha, beta=objective_f(alpha))


def asymptotic_policy(theta: float, settings: SolverSettings = DEFAULT_SOLVER) -> AsymptoticPolicy:
    """Reject α/(1−θ) candidates; success probability β (θ ↑ 1 limit)."""
    if not (0 < theta < 1):
        raise DomainError(f"asymptotic policy needs 0 < theta < 1, got {theta!r}")
    ab = find_alpha_beta(settings)
    return AsymptoticPolicy(r_real=ab.alpha / (1.0 - float(theta)), success=ab.beta)


def objective_grid(x_max: float, grid: int) -> list[tuple[float, float]]:
    """
    Points (x, F(x)) for x = x_max·k/grid, k = 1..grid.

    The data behind the x·E₁(x) plot; callers append the (α, β) row.
    """
    if not (x_max > 0):
        raise DomainError(f"x_max must be > 0, got {x_max!r}")
    if grid < 1:
        raise DomainError(f"grid must be >= 1, got {grid}")
    points: list[tuple[float, float]] = []
    for k in range(1, grid + 1):
        x = x_max * k / grid
        points.append((x, objective_f(x)))
    return points
