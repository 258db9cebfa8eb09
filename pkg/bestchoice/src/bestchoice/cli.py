from __future__ import annotations

import sys
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path
from typing import Annotated, Final, TextIO

import typer

from .asymptotic import (
    critical_point_table,
    curve_grid,
    discontinuity_gap,
    optimal_strategy_asym,
    regime_table,
    trend_probability,
    trend_threshold,
)
from .config import (
    ConfigError,
    SimulationSettings,
    SolverSettings,
    parse_theta,
    settings_from_env,
    simulation_from_env,
)
from .errors import DomainError, InvalidInputError, NumericalError, RangeError
from .exact import (
    dp_matches_positional,
    dp_optimal_policy,
    optimal_r_finite,
    rasmussen_pliska_factor,
    rasmussen_pliska_payoff,
    solver_record,
    win_probability,
)
from .model import GameConfig
from .montecarlo import RNG_NAME, SampleConfig, estimate_win_probability
from .report import JSON_DIGITS, OutputFormat, Record, emit, format_float
from .specfun import asymptotic_policy, find_alpha_beta, objective_grid
from .ui import StatusUI

EXIT_DOMAIN: Final[int] = 3
EXIT_NUMERICAL: Final[int] = 4

app = typer.Typer(
    add_completion=False,
    no_args_is_help=True,
    pretty_exceptions_enable=False,
    help="Weighted game of best choice: exact, asymptotic and simulated win probabilities.",
)


class FormatChoice(StrEnum):
    csv = "csv"
    json = "json"
    table = "table"


class MethodChoice(StrEnum):
    closed = "closed"
    recurrence = "recurrence"


@dataclass(slots=True)
class _State:
    fmt: OutputFormat | None
    output: Path | None
    settings: SolverSettings
    simulation: SimulationSettings
    ui: StatusUI


def _state(ctx: typer.Context) -> _State:
    state = ctx.obj
    if not isinstance(state, _State):
        raise RuntimeError("CLI state missing; commands must run through the app callback")
    return state


@contextmanager
def _handle_errors() -> Iterator[None]:
    """Map library errors to one stderr line and the documented exit codes."""
    try:
        yield
    except ConfigError as e:
        typer.secho(f"CONFIG ERROR: {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(code=EXIT_DOMAIN) from e
    except (DomainError, InvalidInputError, RangeError) as e:
        typer.secho(f"ERROR: {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(code=EXIT_DOMAIN) from e
    except NumericalError as e:
        typer.secho(f"NUMERICAL ERROR: {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(code=EXIT_NUMERICAL) from e


@contextmanager
def _open_output(path: Path | None) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
        return
    with path.open("w", encoding="utf-8", newline="") as f:
        yield f


def _emit(
    ctx: typer.Context,
    records: Sequence[Record],
    columns: Sequence[str],
    *,
    default: OutputFormat,
    single: bool = False,
    title: str | None = None,
) -> None:
    state = _state(ctx)
    fmt = state.fmt or default
    with _open_output(state.output) as out:
        emit(records, columns, fmt, out, single=single, title=title)
    if state.output is not None:
        state.ui.log(f"wrote {state.output}", style="dim")


def _game(n: int, theta: str) -> GameConfig:
    return GameConfig(n=n, theta=parse_theta(theta))


# Shared option types
N_OPT = Annotated[int, typer.Option("--n", help="Number of candidates N.", min=1)]
THETA_OPT = Annotated[
    str,
    typer.Option("--theta", help="Weight parameter θ > 0: a decimal, or p/q for exact arithmetic."),
]
R_OPT = Annotated[int, typer.Option("--r", help="Number of candidates rejected up front.", min=0)]


@app.callback()
def _main(
    ctx: typer.Context,
    fmt: Annotated[
        FormatChoice | None,
        typer.Option("--format", help="Output format (defaults depend on the command)."),
    ] = None,
    output: Annotated[
        Path | None,
        typer.Option("--output", help="Write results here instead of stdout.", dir_okay=False),
    ] = None,
    tol: Annotated[
        float | None,
        typer.Option("--tol", help="Root-finding tolerance (overrides BESTCHOICE_ROOT_TOL)."),
    ] = None,
    quiet: Annotated[bool, typer.Option("--quiet", "-q", help="No progress lines on stderr.")] = False,
    color: Annotated[
        str,
        typer.Option("--color", help="Color mode for stderr (auto|always|never).", envvar="BESTCHOICE_COLOR"),
    ] = "auto",
) -> None:
    """
    Exact finite-N formulas, enumeration oracles, N → ∞ curves and Monte Carlo checks.
    """
    with _handle_errors():
        try:
            ui = StatusUI(quiet=quiet, color=color)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        ctx.obj = _State(
            fmt=None if fmt is None else fmt.value,
            output=output,
            settings=settings_from_env(tol=tol),
            simulation=simulation_from_env(),
            ui=ui,
        )


@app.command()
def exact(
    ctx: typer.Context,
    n: N_OPT,
    theta: THETA_OPT,
    r: R_OPT,
    method: Annotated[
        MethodChoice,
        typer.Option("--method", help="How W_N(r) is computed."),
    ] = MethodChoice.closed,
) -> None:
    """P_r(N, θ) and W_N(r) from the closed form or the recurrence."""
    with _handle_errors():
        config = _game(n, theta)
        rec = solver_record(
            config,
            r,
            "closed_form" if method is MethodChoice.closed else "recurrence",
            settings=_state(ctx).settings,
        )
        _emit(
            ctx,
            [{"n": rec.n, "theta": rec.theta, "r": rec.r, "w": rec.w, "p": rec.p, "method": rec.method}],
            ("n", "theta", "r", "w", "p", "method"),
            default="json",
            single=True,
        )


@app.command()
def optimal(ctx: typer.Context, n: N_OPT, theta: THETA_OPT) -> None:
    """The finite-N optimal threshold r and its win probability."""
    with _handle_errors():
        config = _game(n, theta)
        best = optimal_r_finite(config)
        _emit(
            ctx,
            [{"n": n, "theta": config.theta, "r": best.r, "p": best.win_probability}],
            ("n", "theta", "r", "p"),
            default="json",
            single=True,
        )


@app.command()
def brute(ctx: typer.Context, n: N_OPT, theta: THETA_OPT, r: R_OPT) -> None:
    """W_N(r) and P_r(N, θ) by enumerating every permutation (capped)."""
    state = _state(ctx)
    with _handle_errors():
        config = _game(n, theta)
        with state.ui.step(f"enumerating S_{n}"):
            rec = solver_record(config, r, "brute_force", settings=state.settings)
        _emit(
            ctx,
            [{"n": rec.n, "theta": rec.theta, "r": rec.r, "w": rec.w, "p": rec.p, "method": rec.method}],
            ("n", "theta", "r", "w", "p", "method"),
            default="json",
            single=True,
        )


@app.command()
def dp(ctx: typer.Context, n: N_OPT, theta: THETA_OPT) -> None:
    """Backward induction over all strategies, compared with the best positional one."""
    state = _state(ctx)
    with _handle_errors():
        config = _game(n, theta)
        with state.ui.step(f"backward induction over prefix flattenings of S_{n}"):
            policy = dp_optimal_policy(config, settings=state.settings)
        best = optimal_r_finite(config)
        _emit(
            ctx,
            [
                {
                    "n": n,
                    "theta": config.theta,
                    "value": policy.value,
                    "best_r": best.r,
                    "best_p": best.win_probability,
                    "positional": dp_matches_positional(policy, best) and policy.is_positional,
                    "positional_threshold": policy.positional_threshold,
                    "method": "dp",
                }
            ],
            ("n", "theta", "value", "best_r", "best_p", "positional", "positional_threshold", "method"),
            default="json",
            single=True,
        )


@app.command()
def curves(
    ctx: typer.Context,
    theta_min: Annotated[float, typer.Option("--theta-min", help="Left end of the θ grid.")] = 0.01,
    theta_max: Annotated[float, typer.Option("--theta-max", help="Right end of the θ grid.")] = 0.99,
    grid: Annotated[int, typer.Option("--grid", help="Number of θ points.", min=2)] = 99,
    r_max: Annotated[int, typer.Option("--r-max", help="Largest curve index.", min=0)] = 5,
) -> None:
    """P_r(θ) for r = 0..r_max over a θ grid (plot data)."""
    with _handle_errors():
        rows = curve_grid(theta_min, theta_max, grid, r_max, _state(ctx).settings)
        _emit(
            ctx,
            [{"theta": t, "r": r, "p": p} for t, r, p in rows],
            ("theta", "r", "p"),
            default="csv",
        )


@app.command()
def regime(
    ctx: typer.Context,
    r_max: Annotated[int, typer.Option("--r-max", help="Last regime row.", min=1)] = 5,
    critical: Annotated[
        bool,
        typer.Option("--critical", help="Emit the critical points (r, θ*, P*) instead."),
    ] = False,
) -> None:
    """Regimes of optimal r and the critical points bounding them."""
    state = _state(ctx)
    with _handle_errors():
        with state.ui.step(f"critical points r=1..{r_max + 1}"):
            table = regime_table(r_max, state.settings)
        if critical:
            points = critical_point_table(state.settings)
            _emit(
                ctx,
                [
                    {"r": p.r, "theta_star": p.theta_star, "p_star": p.p_star}
                    for p in (points.get(r) for r in range(1, r_max + 1))
                ],
                ("r", "theta_star", "p_star"),
                default="csv",
            )
            return
        _emit(
            ctx,
            [
                {"r": row.r, "theta_low": row.theta_low, "theta_high": row.theta_high, "p_at_low": row.p_at_low}
                for row in table.rows
            ],
            ("r", "theta_low", "theta_high", "p_at_low"),
            default="csv",
        )


@app.command("alpha-beta")
def alpha_beta(ctx: typer.Context) -> None:
    """α = argmax x·E₁(x) and β = max x·E₁(x)."""
    state = _state(ctx)
    with _handle_errors():
        ab = find_alpha_beta(state.settings)
        if state.fmt is None:
            with _open_output(state.output) as out:
                out.write(f"{format_float(ab.alpha, JSON_DIGITS)}, {format_float(ab.beta, JSON_DIGITS)}\n")
            return
        _emit(ctx, [{"alpha": ab.alpha, "beta": ab.beta}], ("alpha", "beta"), default="json", single=True)


@app.command()
def xe1x(
    ctx: typer.Context,
    x_max: Annotated[float, typer.Option("--x-max", help="Right end of the x grid.")] = 3.0,
    grid: Annotated[int, typer.Option("--grid", help="Number of x points.", min=1)] = 300,
) -> None:
    """x·E₁(x) on a grid, with (α, β) as the last row (plot data)."""
    state = _state(ctx)
    with _handle_errors():
        points = objective_grid(x_max, grid)
        ab = find_alpha_beta(state.settings)
        points.append((ab.alpha, ab.beta))
        _emit(ctx, [{"x": x, "f": f} for x, f in points], ("x", "f"), default="csv")


@app.command()
def policy(
    ctx: typer.Context,
    theta_text: Annotated[str, typer.Option("--theta", help="0 < θ < 1, as a decimal or p/q.")],
) -> None:
    """Limiting prescription α/(1−θ) next to the regime answer at θ."""
    state = _state(ctx)
    with _handle_errors():
        theta = float(parse_theta(theta_text))
        limit = asymptotic_policy(theta, state.settings)
        with state.ui.step(f"locating the regime of theta={theta}"):
            regime_best = optimal_strategy_asym(theta, state.settings)
        _emit(
            ctx,
            [
                {
                    "theta": theta,
                    "r_real": limit.r_real,
                    "success": limit.success,
                    "r": regime_best.r,
                    "p": regime_best.win_probability,
                }
            ],
            ("theta", "r_real", "success", "r", "p"),
            default="json",
            single=True,
        )


@app.command()
def simulate(
    ctx: typer.Context,
    n: N_OPT,
    theta: THETA_OPT,
    r: R_OPT,
    samples: Annotated[int, typer.Option("--samples", help="Number of sampled permutations.", min=1)] = 100_000,
    seed: Annotated[int, typer.Option("--seed", help="64-bit seed.", min=0)] = 0,
    workers: Annotated[int, typer.Option("--workers", help="Independent streams.", min=1)] = 1,
) -> None:
    """Monte Carlo estimate of P_r(N, θ) with a normal-approximation interval."""
    state = _state(ctx)
    with _handle_errors():
        config = SampleConfig(game=_game(n, theta), num_samples=samples, seed=seed, workers=workers)
        state.ui.set_status({"n": n, "theta": theta, "r": r, "samples": samples, "workers": workers})
        with state.ui.step("sampling"):
            est = estimate_win_probability(config, r, state.simulation)
        exact_p = win_probability(config.game, r).win_probability if r < n else 0.0
        _emit(
            ctx,
            [
                {
                    "n": n,
                    "theta": config.game.theta,
                    "r": r,
                    "samples": samples,
                    "seed": seed,
                    "workers": workers,
                    "rng": RNG_NAME,
                    "mean": est.mean,
                    "std_error": est.std_error,
                    "ci": [est.ci_low, est.ci_high],
                    "exact": exact_p,
                }
            ],
            ("n", "theta", "r", "samples", "seed", "workers", "rng", "mean", "std_error", "ci", "exact"),
            default="json",
            single=True,
        )


@app.command()
def trend(
    ctx: typer.Context,
    n: N_OPT,
    lam: Annotated[str, typer.Option("--lambda", help="λ > 1; N/λ candidates are rejected.")],
    theta: THETA_OPT,
) -> None:
    """θ > 1: win probability of rejecting N/λ candidates, against its limit 1/λ."""
    with _handle_errors():
        lam_v = parse_theta(lam)
        theta_v = parse_theta(theta)
        p = trend_probability(n, lam_v, theta_v)
        limit = 1 / lam_v
        _emit(
            ctx,
            [
                {
                    "n": n,
                    "lambda": lam_v,
                    "theta": theta_v,
                    "r": trend_threshold(n, lam_v),
                    "p": p,
                    "limit": limit,
                    "distance": abs(p - limit),
                }
            ],
            ("n", "lambda", "theta", "r", "p", "limit", "distance"),
            default="json",
            single=True,
        )


@app.command()
def duality(ctx: typer.Context, n: N_OPT, theta: THETA_OPT, r: R_OPT) -> None:
    """P_r(N, θ), the factor (θ+⋯+θ^N)/N and their product (uniform-model payoff)."""
    with _handle_errors():
        config = _game(n, theta)
        p = win_probability(config, r).win_probability
        _emit(
            ctx,
            [
                {
                    "n": n,
                    "theta": config.theta,
                    "r": r,
                    "p": p,
                    "factor": rasmussen_pliska_factor(config),
                    "payoff": rasmussen_pliska_payoff(config, r),
                }
            ],
            ("n", "theta", "r", "p", "factor", "payoff"),
            default="json",
            single=True,
        )


@app.command()
def gap(ctx: typer.Context) -> None:
    """1/e against β: what any interview cost does to the best success probability."""
    with _handle_errors():
        g = discontinuity_gap(_state(ctx).settings)
        _emit(
            ctx,
            [{"classical": g.classical, "beta": g.limit, "gap": g.gap}],
            ("classical", "beta", "gap"),
            default="json",
            single=True,
        )


def main() -> None:
    """
    Programmatic entrypoint used by `project.scripts`.
    """
    app(prog_name="bestchoice")


if __name__ == "__main__":
    main()
