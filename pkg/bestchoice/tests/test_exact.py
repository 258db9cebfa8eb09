from __future__ import annotations

import math
from fractions import Fraction

import pytest

from bestchoice.config import SolverSettings
from bestchoice.errors import EnumerationCapError, InvalidInputError
from bestchoice.exact import (
    Method,
    StrategyOutcome,
    brute_force_win_weight,
    dp_matches_positional,
    dp_optimal_policy,
    optimal_r_finite,
    rasmussen_pliska_factor,
    rasmussen_pliska_payoff,
    solver_record,
    w_closed_form,
    w_recurrence,
    win_probabilities,
    win_probability,
)
from bestchoice.model import GameConfig, all_permutations, cost_statistic, is_r_winnable, normalizer

ORACLE_THETAS = [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1), Fraction(2)]
DP_THETAS = [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1), Fraction(3, 2)]


@pytest.mark.parametrize("theta", ORACLE_THETAS)
def test_recurrence_closed_form_and_enumeration_agree_exactly(theta: Fraction) -> None:
    for n in range(1, 9):
        for r in range(n):
            rec = w_recurrence(n, r, theta).value
            closed = w_closed_form(n, r, theta).value
            brute = brute_force_win_weight(n, r, theta).value
            assert isinstance(rec, Fraction)
            assert rec == closed == brute, (n, r, theta)


def test_winnable_weight_examples() -> None:
    assert w_recurrence(1, 0, Fraction(1, 3)).value == 1
    assert w_recurrence(1, 3, Fraction(1, 3)).value == 0
    assert w_recurrence(4, 1, 1).value == 11
    assert w_closed_form(4, 0, 0.5).value == 6
    assert w_closed_form(3, 1, Fraction(1, 2)).value == Fraction(5, 4)
    assert w_closed_form(4, 1, 1).value == 11
    assert brute_force_win_weight(4, 1, 1).value == 11
    assert brute_force_win_weight(3, 2, Fraction(1, 2)).value == Fraction(1, 2)
    assert brute_force_win_weight(1, 0, 7).value == 1


def test_winnable_weight_vanishes_once_everybody_is_rejected() -> None:
    assert w_recurrence(3, 3, Fraction(1, 2)).value == 0
    assert w_closed_form(3, 5, Fraction(1, 2)).value == 0
    assert brute_force_win_weight(3, 3, Fraction(1, 2)).value == 0


def test_float_recurrence_matches_closed_form() -> None:
    for n in (5, 20, 60):
        for r in (0, 1, n // 3, n - 1):
            a = w_recurrence(n, r, 0.8).value
            b = w_closed_form(n, r, 0.8).value
            assert a == pytest.approx(b, rel=1e-12)


def test_enumeration_caps() -> None:
    with pytest.raises(EnumerationCapError):
        brute_force_win_weight(11, 1, Fraction(1, 2))
    with pytest.raises(EnumerationCapError):
        dp_optimal_policy(GameConfig(n=9, theta=Fraction(1, 2)))
    with pytest.raises(EnumerationCapError):
        brute_force_win_weight(5, 1, 0.5, settings=SolverSettings(brute_force_cap=4))


@pytest.mark.parametrize(
    ("n", "theta", "r", "expected"),
    [
        (2, Fraction(1, 2), 0, Fraction(2, 3)),
        (2, Fraction(1, 2), 1, Fraction(1, 3)),
        (4, Fraction(1), 1, Fraction(11, 24)),
        (1, Fraction(5), 0, Fraction(1)),
    ],
)
def test_win_probability_examples(n: int, theta: Fraction, r: int, expected: Fraction) -> None:
    assert win_probability(GameConfig(n=n, theta=theta), r).win_probability == expected


@pytest.mark.parametrize("theta", ORACLE_THETAS)
def test_win_probability_is_enumerated_weight_over_normalizer(theta: Fraction) -> None:
    for n in range(1, 7):
        config = GameConfig(n=n, theta=theta)
        for r in range(n):
            w = brute_force_win_weight(n, r, theta).value
            assert win_probability(config, r).win_probability == w / normalizer(config)


def test_win_probability_rejects_r_out_of_range() -> None:
    with pytest.raises(InvalidInputError):
        win_probability(GameConfig(n=3, theta=0.5), 3)
    with pytest.raises(InvalidInputError):
        win_probability(GameConfig(n=3, theta=0.5), -1)


@pytest.mark.parametrize("theta", [0.3, 0.9, 1.0, 1.2, Fraction(3, 4), Fraction(2)])
def test_win_probabilities_match_pointwise_values(theta: float | Fraction) -> None:
    config = GameConfig(n=12, theta=theta)
    curve = win_probabilities(config)
    assert len(curve) == 12
    for r, p in enumerate(curve):
        single = win_probability(config, r).win_probability
        if config.exact:
            assert p == single
        else:
            assert p == pytest.approx(single, rel=1e-12, abs=1e-15)


def test_float_path_agrees_with_exact_path() -> None:
    for theta in (Fraction(1, 4), Fraction(3, 4), Fraction(3, 2), Fraction(2)):
        exact = GameConfig(n=30, theta=theta)
        approx = GameConfig(n=30, theta=float(theta))
        for r in range(30):
            assert win_probability(approx, r).win_probability == pytest.approx(
                float(win_probability(exact, r).win_probability), rel=1e-12, abs=1e-300
            )


@pytest.mark.parametrize("r", [1, 3, 7])
def test_theta_one_is_the_limit_of_the_general_formula(r: int) -> None:
    classical = win_probability(GameConfig(n=10, theta=1.0), r).win_probability
    for theta in (1.0 - 1e-6, 1.0 + 1e-6):
        p = win_probability(GameConfig(n=10, theta=theta), r).win_probability
        assert abs(p - classical) < 1e-4


def test_large_n_float_path_does_not_overflow() -> None:
    p = win_probability(GameConfig(n=10**4, theta=1.05), 2500).win_probability
    assert 0.0 < p <= 1.0
    assert math.isfinite(p)


def test_probability_vanishes_when_rejecting_all_but_last() -> None:
    assert win_probability(GameConfig(n=1000, theta=0.9), 999).win_probability < 1e-10


def test_optimal_r_finite_examples() -> None:
    best = optimal_r_finite(GameConfig(n=2, theta=Fraction(1, 2)))
    assert (best.r, best.win_probability) == (0, Fraction(2, 3))

    best = optimal_r_finite(GameConfig(n=1, theta=0.3))
    assert best.r == 0
    assert best.win_probability == pytest.approx(1.0)

    assert optimal_r_finite(GameConfig(n=100, theta=1.0)).r == 37


def test_optimal_r_finite_breaks_ties_towards_fewer_rejections() -> None:
    # N = 2, θ = 1: P_0 = P_1 = 1/2.
    assert optimal_r_finite(GameConfig(n=2, theta=1)).r == 0


@pytest.mark.parametrize("theta", DP_THETAS)
def test_dp_optimum_is_positional(theta: Fraction) -> None:
    for n in range(1, 9):
        config = GameConfig(n=n, theta=theta)
        policy = dp_optimal_policy(config)
        best = optimal_r_finite(config)
        assert policy.value == best.win_probability, (n, theta)
        assert policy.is_positional
        assert policy.positional_threshold is not None
        assert win_probability(config, policy.positional_threshold).win_probability == policy.value
        assert dp_matches_positional(policy, best)


@pytest.mark.parametrize("theta", [0.25, 0.5, 0.75, 1.0, 1.5])
def test_dp_float_path_matches_best_threshold(theta: float) -> None:
    config = GameConfig(n=7, theta=theta)
    policy = dp_optimal_policy(config)
    best = optimal_r_finite(config)
    assert abs(policy.value - best.win_probability) < 1e-12
    assert policy.is_positional


def test_dp_examples() -> None:
    assert dp_optimal_policy(GameConfig(n=2, theta=Fraction(1, 2))).value == Fraction(2, 3)
    assert dp_optimal_policy(GameConfig(n=1, theta=Fraction(9))).value == 1
    policy = dp_optimal_policy(GameConfig(n=6, theta=Fraction(3, 4)))
    assert policy.value == max(win_probabilities(GameConfig(n=6, theta=Fraction(3, 4))))
    # Stopping on the very first candidate, which is always a relative maximum, is a decision.
    assert (1,) in policy.accept


def _uniform_discounted_payoff(n: int, r: int, theta: Fraction) -> Fraction:
    """E over uniform S_N of θ^{π⁻¹(N)}·[strategy r hires N]."""
    total = Fraction(0)
    count = 0
    for pi in all_permutations(n):
        count += 1
        if is_r_winnable(pi, r):
            total += theta ** (cost_statistic(pi) + 1)
    return total / count


@pytest.mark.parametrize("theta", [Fraction(1, 2), Fraction(3, 4), Fraction(1), Fraction(2)])
def test_duality_with_uniform_discounted_game(theta: Fraction) -> None:
    for n in range(1, 8):
        config = GameConfig(n=n, theta=theta)
        for r in range(n):
            assert rasmussen_pliska_payoff(config, r) == _uniform_discounted_payoff(n, r, theta)


def test_duality_examples() -> None:
    assert rasmussen_pliska_payoff(GameConfig(n=2, theta=1), 1) == Fraction(1, 2)
    assert rasmussen_pliska_payoff(GameConfig(n=2, theta=Fraction(1, 2)), 0) == Fraction(1, 4)
    config = GameConfig(n=3, theta=Fraction(1, 2))
    assert rasmussen_pliska_factor(config) == Fraction(7, 24)
    assert rasmussen_pliska_payoff(config, 1) == win_probability(config, 1).win_probability * Fraction(7, 24)


def test_solver_record_methods() -> None:
    config = GameConfig(n=4, theta=1)
    closed = solver_record(config, 1, "closed_form")
    rec = solver_record(config, 1, "recurrence")
    brute = solver_record(config, 1, "brute_force")
    assert closed.w == rec.w == brute.w == 11
    assert closed.p == rec.p == brute.p == Fraction(11, 24)
    assert brute.method == "brute_force"


@pytest.mark.parametrize("method", ["closed_form", "recurrence"])
def test_solver_record_drops_weight_outside_binary64(method: Method) -> None:
    rec = solver_record(GameConfig(n=400, theta=0.99), 50, method)
    assert rec.w is None
    assert 0.0 < rec.p < 1.0
    assert rec.method == method


def test_strategy_outcome_rejects_non_probabilities() -> None:
    with pytest.raises(ValueError):
        StrategyOutcome(r=0, win_probability=1.5)
