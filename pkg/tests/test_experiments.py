import dataclasses

import pytest

from feemech.config import ModelConfig, apply_overrides
from feemech.errors import ConstructionError, DomainError
from feemech.experiments import (
    Factor,
    SweepResult,
    SweepRow,
    SweepSpec,
    Verdict,
    config_diff,
    default_sweeps,
    directional_verdict,
    run_sweep,
    spec_from_config,
    table1_report,
    with_factor,
)
from feemech.weitzman import comparative_advantage_closed_form

BASE = ModelConfig()
PATHS = {
    Factor.DEMAND_VARIANCE: "shocks.var_demand",
    Factor.DEMAND_COST_COVARIANCE: "shocks.cov",
    Factor.TOKEN_VOLATILITY: "token.log_vol",
    Factor.ELASTICITY: "dynamics.epsilon",
    Factor.BARGAINING_POWER: "beta",
}


def test_grid_validation():
    with pytest.raises(ConstructionError):
        SweepSpec(Factor.DEMAND_VARIANCE, (1.0, 1.0, 1.0), BASE)
    with pytest.raises(ConstructionError):
        SweepSpec(Factor.DEMAND_VARIANCE, (1.0, 2.0), BASE)
    with pytest.raises(ConstructionError):
        SweepSpec(Factor.DEMAND_VARIANCE, (1.0, 3.0, 2.0), BASE)
    # a covariance beyond the PSD bound makes the row model invalid
    with pytest.raises(ConstructionError):
        SweepSpec(Factor.DEMAND_COST_COVARIANCE, (0.0, 0.5, 2.0), BASE)


@pytest.mark.parametrize("row", default_sweeps(), ids=lambda r: r.factor)
def test_ceteris_paribus(row):
    spec = spec_from_config(row, BASE, 100, 0)
    models = [with_factor(spec.baseline, spec.factor, v) for v in spec.grid]
    for a in models:
        for b in models:
            assert config_diff(a, b) <= {PATHS[spec.factor]}
    assert config_diff(models[0], models[-1]) == {PATHS[spec.factor]}


def _spec(factor, n=20_000, seed=0):
    row = next(r for r in default_sweeps() if r.factor == factor.value)
    return spec_from_config(row, BASE, n, seed)


def test_demand_variance_sweep_matches():
    spec = _spec(Factor.DEMAND_VARIANCE)
    res = run_sweep(spec)
    assert res.verdict is Verdict.MATCHES
    assert [r.value for r in res.rows] == list(spec.grid)
    for r in res.rows:
        closed = comparative_advantage_closed_form(r.model.environment())
        assert abs(r.delta - closed) < 4 * r.delta_se
    assert res.agreeing_pairs > 0 and res.opposing_pairs == 0


def test_rerun_is_bit_identical_and_thread_independent():
    spec = _spec(Factor.DEMAND_COST_COVARIANCE)
    a, b, c = run_sweep(spec), run_sweep(spec), run_sweep(spec, threads=4)
    assert a.to_csv() == b.to_csv() == c.to_csv()


def test_covariance_sweep_shares_draws():
    res = run_sweep(_spec(Factor.DEMAND_COST_COVARIANCE))
    assert res.verdict is Verdict.MATCHES
    # paired differences are much tighter than the per-row errors suggest
    assert res.gated_tau == pytest.approx(1.0)


def test_elasticity_grid_and_overshoot_regime():
    res = run_sweep(_spec(Factor.ELASTICITY))
    assert res.verdict is Verdict.MATCHES
    stats = [r.statistic for r in res.rows]
    assert stats == sorted(stats, reverse=True)
    # past d * eps ~ 1 the base fee overshoots and settling slows again
    model = _spec(Factor.ELASTICITY).baseline
    wide = run_sweep(SweepSpec(Factor.ELASTICITY, (2.0, 6.0, 12.6), model, 100, 0))
    assert wide.verdict is Verdict.INCONCLUSIVE
    assert [r.statistic for r in wide.rows] == [8.0, 1.0, 4.0]


def test_bargaining_handoff_toward_welfare_preferred():
    # |B''| > C'': the floor is welfare-preferred while the cap pays validators more
    model = apply_overrides(BASE, {"benefit": {"slope": -2.0}, "cost": {"intercept": 2.0, "q_ref": 10.0},
                                   "tip_per_gas": 4.0, "disagreement": [370.0, 0.0]})
    model = dataclasses.replace(model, benefit=dataclasses.replace(model.benefit, q_ref=10.0),
                                shocks=dataclasses.replace(model.shocks, var_demand=16.0))
    res = run_sweep(SweepSpec(Factor.BARGAINING_POWER, (0.0, 0.05, 0.5, 1.0), model, 1000, 0))
    assert [r.family for r in res.rows] == ["PriceFloor", "PriceFloor", "QuantityCap", "QuantityCap"]
    assert res.verdict is Verdict.MATCHES and res.agreeing_pairs > 0


def test_failed_rows_are_flagged():
    model = dataclasses.replace(BASE, disagreement=(1e9, 1e9))
    res = run_sweep(SweepSpec(Factor.BARGAINING_POWER, (0.0, 0.5, 1.0), model, 1000, 0))
    assert all(r.failed and "InfeasibleBargainingError" in r.failed for r in res.rows)
    assert res.verdict is Verdict.INCONCLUSIVE
    assert "InfeasibleBargainingError" in res.to_csv()


def _rows(values):
    return [SweepRow(value=float(i), model=BASE, statistic=v) for i, v in enumerate(values)]


def test_directional_verdicts():
    assert directional_verdict(_rows([1, 2, 3]), +1)[0] is Verdict.MATCHES
    assert directional_verdict(_rows([1, 1, 1]), +1)[0] is Verdict.MATCHES
    assert directional_verdict(_rows([3, 2, 1]), +1)[0] is Verdict.OPPOSES
    assert directional_verdict(_rows([1, 3, 2]), +1)[0] is Verdict.INCONCLUSIVE
    v, raw, gated, agree, oppose = directional_verdict(_rows([37, 18, 8]), -1)
    assert (v, raw, gated, agree, oppose) == (Verdict.MATCHES, 1.0, 1.0, 3, 0)
    assert directional_verdict(_rows([float("inf"), 5, 2]), -1)[0] is Verdict.MATCHES


def _result(factor, verdict):
    spec = SweepSpec(factor, (0.25, 0.5, 0.75), BASE, 10, 0)
    return SweepResult(spec, (), verdict, 0.0, 0.0, 0, 0)


def test_table1_report_status():
    ok = [_result(f, Verdict.MATCHES) for f in Factor]
    rep = table1_report(ok)
    assert rep.status == "PASS" and len(rep.rows) == 5
    assert [r["expected"] for r in rep.rows] == ["P", "Q", "Q", "P", "Q"]
    warn = ok[:4] + [_result(Factor.BARGAINING_POWER, Verdict.INCONCLUSIVE)]
    assert table1_report(warn).status == "WARN"
    fail = warn[:3] + [_result(Factor.ELASTICITY, Verdict.OPPOSES), warn[4]]
    rep = table1_report(fail)
    assert rep.status == "FAIL"
    assert "Opposes" in rep.to_text() and "STATUS: FAIL" in rep.to_text()
    with pytest.raises(DomainError):
        table1_report(ok[:4])
