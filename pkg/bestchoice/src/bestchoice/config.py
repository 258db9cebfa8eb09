from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Final

_FRACTION_RE: Final[re.Pattern[str]] = re.compile(r"^\s*([+-]?\d+)\s*/\s*(\d+)\s*$")
_INTEGER_RE: Final[re.Pattern[str]] = re.compile(r"^\s*[+-]?\d+\s*$")


class ConfigError(ValueError):
    """Raised when CLI/env configuration values are invalid."""


@dataclass(frozen=True, slots=True)
class SolverSettings:
    """
    Caps and tolerances shared by the solvers.

    Notes:
    - The enumeration caps guard factorial-cost oracles: exceeding them fails loudly.
    - `root_tol` is the |Δθ| target for critical points; `alpha_tol` the |Δx| target for α.
    """

    brute_force_cap: int = 10
    dp_cap: int = 8
    # Largest r the critical-point table grows to on demand.
    regime_cap: int = 5000

    root_tol: float = 1e-12
    alpha_tol: float = 1e-15

    # Switch to direct tail summation once the tail is this small relative to -ln(1-θ).
    tail_switch_ratio: float = 1e-8
    tail_rel_tol: float = 1e-16
    e1_rel_tol: float = 1e-16


@dataclass(frozen=True, slots=True)
class SimulationSettings:
    """
    Monte Carlo knobs.

    A batch holds at most `batch_size` permutations and at most `batch_elements`
    matrix entries, so rows shrink as N grows.
    """

    batch_size: int = 65536
    batch_elements: int = 1 << 22
    ci_level: float = 0.95

    def rows_per_batch(self, n: int) -> int:
        return max(1, min(self.batch_size, self.batch_elements // n))


DEFAULT_SOLVER: Final[SolverSettings] = SolverSettings()
DEFAULT_SIMULATION: Final[SimulationSettings] = SimulationSettings()


def env_int(name: str) -> int | None:
    """
    Parse an optional integer env var.

    Returns None if unset/empty.
    """
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"Invalid integer value for {name}: {raw!r}") from e


def env_float(name: str) -> float | None:
    """
    Parse an optional float env var.

    Returns None if unset/empty.
    """
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return None
    try:
        return float(raw)
    except ValueError as e:
        raise ConfigError(f"Invalid float value for {name}: {raw!r}") from e


def settings_from_env(
    base: SolverSettings = DEFAULT_SOLVER,
    *,
    tol: float | None = None,
) -> SolverSettings:
    """
    Apply `BESTCHOICE_*` env overrides (and an explicit `tol`) on top of `base`.

    `tol` wins over the env var; it never loosens `alpha_tol`.
    """
    cfg = base
    brute = env_int("BESTCHOICE_BRUTE_FORCE_CAP")
    if brute is not None:
        cfg = replace(cfg, brute_force_cap=brute)
    dp = env_int("BESTCHOICE_DP_CAP")
    if dp is not None:
        cfg = replace(cfg, dp_cap=dp)
    root_tol = env_float("BESTCHOICE_ROOT_TOL")
    if root_tol is not None:
        cfg = replace(cfg, root_tol=root_tol)
    regime = env_int("BESTCHOICE_REGIME_CAP")
    if regime is not None:
        cfg = replace(cfg, regime_cap=regime)
    if tol is not None:
        cfg = replace(cfg, root_tol=tol, alpha_tol=min(cfg.alpha_tol, tol))

    validate_settings(cfg)
    return cfg


def simulation_from_env(base: SimulationSettings = DEFAULT_SIMULATION) -> SimulationSettings:
    cfg = base
    batch = env_int("BESTCHOICE_BATCH_SIZE")
    if batch is not None:
        cfg = replace(cfg, batch_size=batch)
    elements = env_int("BESTCHOICE_BATCH_ELEMENTS")
    if elements is not None:
        cfg = replace(cfg, batch_elements=elements)
    if cfg.batch_size <= 0:
        raise ConfigError(f"batch_size must be > 0, got {cfg.batch_size}.")
    if cfg.batch_elements <= 0:
        raise ConfigError(f"batch_elements must be > 0, got {cfg.batch_elements}.")
    if not (0.0 < cfg.ci_level < 1.0):
        raise ConfigError(f"ci_level must be in (0, 1), got {cfg.ci_level}.")
    return cfg


def validate_settings(s: SolverSettings) -> None:
    """
    Validate solver settings.

    Caps must be positive; tolerances must be positive and finite.
    """
    if s.brute_force_cap <= 0:
        raise ConfigError(f"brute_force_cap must be > 0, got {s.brute_force_cap}.")
    if s.dp_cap <= 0:
        raise ConfigError(f"dp_cap must be > 0, got {s.dp_cap}.")
    if s.regime_cap <= 0:
        raise ConfigError(f"regime_cap must be > 0, got {s.regime_cap}.")

    fields = (
        ("root_tol", s.root_tol),
        ("alpha_tol", s.alpha_tol),
        ("tail_switch_ratio", s.tail_switch_ratio),
        ("tail_rel_tol", s.tail_rel_tol),
        ("e1_rel_tol", s.e1_rel_tol),
    )
    for name, value in fields:
        if not (0.0 < value < 1.0):
            raise ConfigError(f"{name} must be in (0, 1), got {value}.")


def parse_theta(value: str) -> Fraction | float:
    """
    Parse a θ literal.

    `p/q` and plain integers give an exact `Fraction` (activating the exact path);
    decimals give a float. θ must be positive.
    """
    m = _FRACTION_RE.match(value)
    if m is not None:
        den = int(m.group(2))
        if den == 0:
            raise ConfigError(f"Invalid theta {value!r}: zero denominator.")
        theta: Fraction | float = Fraction(int(m.group(1)), den)
    elif _INTEGER_RE.match(value):
        theta = Fraction(int(value))
    else:
        try:
            theta = float(value)
        except ValueError as e:
            raise ConfigError(
                f"Invalid theta {value!r}. Expected a decimal like '0.75' or a fraction like '3/4'."
            ) from e

    if not (theta > 0) or (isinstance(theta, float) and not math.isfinite(theta)):
        raise ConfigError(f"theta must be > 0, got {value!r}.")
    return theta
