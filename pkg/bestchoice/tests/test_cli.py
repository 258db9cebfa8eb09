from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction
from pathlib import Path

import pytest
from typer.testing import CliRunner

from bestchoice import cli
from bestchoice.asymptotic import p_asym
from bestchoice.errors import NumericalError
from bestchoice.specfun import objective_f

runner = CliRunner()

THETA_STAR = (0.63212, 0.796812, 0.860917, 0.894457, 0.915009)
P_STAR = (0.367879, 0.323805, 0.309256, 0.302113, 0.297883)


def _run(*args: str, env: dict[str, str] | None = None) -> tuple[int, str]:
    result = runner.invoke(cli.app, ["-q", *args], env=env)
    return result.exit_code, result.output


def _json(*args: str) -> dict[str, object]:
    code, out = _run(*args)
    assert code == 0, out
    return json.loads(out)


def _csv(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


def test_alpha_beta_plain() -> None:
    code, out = _run("alpha-beta")
    assert code == 0
    assert out.strip() == "0.434818215003993, 0.281493629956917"


def test_alpha_beta_json() -> None:
    data = _json("--format", "json", "alpha-beta")
    assert abs(data["alpha"] - 0.43481821500399293) < 1e-12
    assert abs(data["beta"] - 0.28149362995691674) < 1e-12


def test_exact_emits_rationals_verbatim() -> None:
    data = _json("exact", "--n", "4", "--theta", "1", "--r", "1")
    assert data["p_exact"] == "11/24"
    assert data["p"] == pytest.approx(11 / 24, rel=1e-15)
    assert data["w"] == 11
    assert data["method"] == "closed_form"


def test_exact_and_brute_agree() -> None:
    closed = _json("exact", "--n", "6", "--theta", "3/4", "--r", "2", "--method", "recurrence")
    brute = _json("brute", "--n", "6", "--theta", "3/4", "--r", "2")
    assert closed["p_exact"] == brute["p_exact"]
    assert (closed["method"], brute["method"]) == ("recurrence", "brute_force")


def test_exact_csv_format() -> None:
    code, out = _run("--format", "csv", "exact", "--n", "2", "--theta", "0.5", "--r", "0")
    assert code == 0
    rows = _csv(out)
    assert out.splitlines()[0] == "n,theta,r,w,p,method"
    assert float(rows[0]["p"]) == pytest.approx(2 / 3, rel=1e-11)


def test_optimal_and_dp() -> None:
    best = _json("optimal", "--n", "100", "--theta", "1")
    assert best["r"] == 37

    dp = _json("dp", "--n", "4", "--theta", "1/2")
    assert dp["positional"] is True
    assert dp["method"] == "dp"
    assert dp["value_exact"] == dp["best_p_exact"]


def test_table_format() -> None:
    code, out = _run("--format", "table", "optimal", "--n", "10", "--theta", "0.9")
    assert code == 0
    assert "theta" in out


def test_regime_table_matches_reference_values() -> None:
    code, out = _run("regime", "--r-max", "5")
    assert code == 0
    assert out.splitlines()[0] == "r,theta_low,theta_high,p_at_low"
    rows = _csv(out)
    assert [int(row["r"]) for row in rows] == [0, 1, 2, 3, 4, 5]
    for row, theta_star, p_star in zip(rows[1:], THETA_STAR, P_STAR, strict=True):
        assert abs(float(row["theta_low"]) - theta_star) < 1e-5
        assert abs(float(row["p_at_low"]) - p_star) < 1e-6
    for a, b in zip(rows, rows[1:], strict=False):
        assert a["theta_high"] == b["theta_low"]


def test_regime_critical_points() -> None:
    code, out = _run("regime", "--r-max", "5", "--critical")
    assert code == 0
    assert out.splitlines()[0] == "r,theta_star,p_star"
    rows = _csv(out)
    assert [float(row["theta_star"]) for row in rows] == pytest.approx(THETA_STAR, abs=1e-5)
    assert [float(row["p_star"]) for row in rows] == pytest.approx(P_STAR, abs=1e-6)


def test_curves_round_trip(tmp_path: Path) -> None:
    path = tmp_path / "curves.csv"
    code, _ = _run("--output", str(path), "curves", "--grid", "9", "--r-max", "3")
    assert code == 0
    rows = _csv(path.read_text(encoding="utf-8"))
    assert len(rows) == 9 * 4
    for row in rows:
        theta = float(row["theta"])
        assert float(row["p"]) == pytest.approx(p_asym(int(row["r"]), theta), rel=1e-10)


def test_xe1x_round_trip() -> None:
    code, out = _run("xe1x", "--x-max", "2", "--grid", "20")
    assert code == 0
    rows = _csv(out)
    assert len(rows) == 21
    for row in rows:
        assert float(row["f"]) == pytest.approx(objective_f(float(row["x"])), rel=1e-10)
    peak = rows[-1]
    assert float(peak["f"]) >= max(float(row["f"]) for row in rows[:-1])


def test_policy() -> None:
    data = _json("policy", "--theta", "0.9")
    assert data["r"] == 4
    assert data["r_real"] == pytest.approx(4.348, rel=1e-3)
    assert data["success"] == pytest.approx(0.2815, abs=1e-4)


def test_simulate_json() -> None:
    data = _json("simulate", "--n", "5", "--theta", "0.5", "--r", "1", "--samples", "2000", "--seed", "7")
    assert set(data) == {
        "n",
        "theta",
        "r",
        "samples",
        "seed",
        "workers",
        "rng",
        "mean",
        "std_error",
        "ci",
        "exact",
    }
    assert data["rng"] == "PCG64"
    low, high = data["ci"]
    assert low <= data["mean"] <= high
    assert abs(data["mean"] - data["exact"]) < 5 * data["std_error"] + 1e-3

    again = _json("simulate", "--n", "5", "--theta", "0.5", "--r", "1", "--samples", "2000", "--seed", "7")
    assert again == data


@pytest.mark.parametrize(("lam", "expected"), [("2", 0.5), ("4", 0.25)])
def test_trend(lam: str, expected: float) -> None:
    data = _json("trend", "--n", "10000", "--lambda", lam, "--theta", "1.01")
    assert abs(data["p"] - expected) < 0.01
    assert data["r"] == 10000 // int(lam)
    assert data["distance"] == pytest.approx(abs(data["p"] - data["limit"]), abs=1e-14)


def test_duality_exact() -> None:
    data = _json("duality", "--n", "3", "--theta", "1/2", "--r", "1")
    assert data["p_exact"] == "5/14"
    assert data["factor_exact"] == "7/24"
    assert data["payoff_exact"] == "5/48"


def test_gap() -> None:
    data = _json("gap")
    assert data["classical"] == pytest.approx(math.exp(-1), rel=1e-14)
    assert data["gap"] == pytest.approx(0.0864, abs=1e-4)


def test_usage_errors_exit_2() -> None:
    assert _run("exact", "--bogus")[0] == 2
    assert _run("exact", "--n", "3")[0] == 2
    assert _run("exact", "--n", "0", "--theta", "1", "--r", "0")[0] == 2


@pytest.mark.parametrize(
    "args",
    [
        ("brute", "--n", "11", "--theta", "1/2", "--r", "1"),
        ("dp", "--n", "9", "--theta", "1/2"),
        ("exact", "--n", "3", "--theta", "0", "--r", "1"),
        ("exact", "--n", "3", "--theta", "1/2", "--r", "3"),
        ("policy", "--theta", "1.0"),
        ("trend", "--n", "100", "--lambda", "2", "--theta", "0.5"),
    ],
)
def test_domain_errors_exit_3(args: tuple[str, ...]) -> None:
    code, out = _run(*args)
    assert code == 3
    assert "ERROR:" in out


def test_env_caps_apply() -> None:
    args = ("brute", "--n", "5", "--theta", "1/2", "--r", "1")
    assert _run(*args)[0] == 0
    assert _run(*args, env={"BESTCHOICE_BRUTE_FORCE_CAP": "4"})[0] == 3


def test_bad_env_is_a_config_error() -> None:
    code, out = _run("gap", env={"BESTCHOICE_DP_CAP": "lots"})
    assert code == 3
    assert "CONFIG ERROR:" in out


def test_numerical_failure_exits_4(monkeypatch: pytest.MonkeyPatch) -> None:
    def broken(*_args: object, **_kwargs: object) -> object:
        raise NumericalError("alpha bracket lost its sign change")

    monkeypatch.setattr(cli, "find_alpha_beta", broken)
    code, out = _run("alpha-beta")
    assert code == 4
    assert "NUMERICAL ERROR:" in out


def test_exact_weight_beyond_binary64_is_null_in_json() -> None:
    data = _json("exact", "--n", "200", "--theta", "1/2", "--r", "5")
    assert data["w"] is None
    num, den = (int(v) for v in data["w_exact"].split("/"))
    assert num // den > 10**308
    assert 0.0 < data["p"] < 1.0


def test_exact_weight_beyond_binary64_is_inf_in_csv() -> None:
    code, out = _run("--format", "csv", "exact", "--n", "200", "--theta", "1/2", "--r", "5")
    assert code == 0, out
    assert _csv(out)[0]["w"] == "inf"


def test_duality_factor_beyond_binary64() -> None:
    data = _json("duality", "--n", "2000", "--theta", "2", "--r", "1")
    assert data["factor"] is None
    assert data["payoff"] is None
    assert Fraction(data["factor_exact"]) == Fraction(2**2001 - 2, 2000)
    assert 0.0 < data["p"] < 1.0


def test_recurrence_reports_probability_when_weight_overflows() -> None:
    data = _json("exact", "--n", "400", "--theta", "0.99", "--r", "50", "--method", "recurrence")
    assert data["w"] is None
    assert 0.0 < data["p"] < 1.0
    closed = _json("exact", "--n", "400", "--theta", "0.99", "--r", "50")
    assert data["p"] == closed["p"]


def test_policy_accepts_fraction_theta() -> None:
    data = _json("policy", "--theta", "9/10")
    assert data["theta"] == 0.9
    assert data["r"] == 4
