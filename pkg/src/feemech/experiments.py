"""Single-factor sweeps checked against the expected direction of each factor.

Each sweep rebuilds the model with one factor changed, estimates the
price-vs-cap advantage and the bargaining outcome on common random numbers,
and reduces the row statistics to a directional verdict:

* pairwise differences between grid points are *significant* when they
  exceed three paired standard errors (and a rounding floor);
* ``MatchesTable1`` when no significant pair runs against the expected
  direction, ``Opposes`` when significant pairs exist and all of them run
  against it, ``Inconclusive`` otherwise (or when a row failed).

Flat statistics therefore match: the claims are "non-decreasing" ones.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .bargaining import BargainingProblem, solve_bargaining
from .config import FactorSweepConfig, ModelConfig, apply_overrides, to_dict
from .eip1559 import blocks_to_band, simulate_trajectory
from .errors import ConstructionError, DomainError, FeeMechError
from .weitzman import comparative_advantage_mc


class Factor(str, Enum):
    DEMAND_VARIANCE = "DemandVariance"
    DEMAND_COST_COVARIANCE = "DemandCostCovariance"
    TOKEN_VOLATILITY = "TokenVolatility"
    ELASTICITY = "Elasticity"
    BARGAINING_POWER = "BargainingPower"


class Verdict(str, Enum):
    MATCHES = "MatchesTable1"
    OPPOSES = "Opposes"
    INCONCLUSIVE = "Inconclusive"


FACTOR_PATH = {
    Factor.DEMAND_VARIANCE: ("shocks", "var_demand"),
    Factor.DEMAND_COST_COVARIANCE: ("shocks", "cov"),
    Factor.TOKEN_VOLATILITY: ("token", "log_vol"),
    Factor.ELASTICITY: ("dynamics", "epsilon"),
    Factor.BARGAINING_POWER: ("beta",),
}

# (factor label, example, favoured outcome)
TABLE1 = {
    Factor.DEMAND_VARIANCE: ("High demand uncertainty", "Different use cases", "P"),
    Factor.DEMAND_COST_COVARIANCE: ("+ Corr. btw demand uncertainty and MC", "PoW", "Q"),
    Factor.TOKEN_VOLATILITY: ("Token price fluctuations", "Fees in native token", "Q"),
    Factor.ELASTICITY: ("High elasticity of inclusion in next block", "Faster blocks or confirmation", "P"),
    Factor.BARGAINING_POWER: ("Low validator bargaining power", "High decentralization", "Q"),
}

# sign the row statistic must follow as the factor value increases
EXPECTED_DIRECTION = {
    Factor.DEMAND_VARIANCE: +1,
    Factor.DEMAND_COST_COVARIANCE: -1,
    Factor.TOKEN_VOLATILITY: +1,
    Factor.ELASTICITY: -1,
    Factor.BARGAINING_POWER: -1,
}

STATISTIC = {
    Factor.DEMAND_VARIANCE: "price advantage delta",
    Factor.DEMAND_COST_COVARIANCE: "price advantage delta",
    Factor.TOKEN_VOLATILITY: "quantity advantage in USD (-delta)",
    Factor.ELASTICITY: "blocks until size stays within band of target",
    Factor.BARGAINING_POWER: "designer-preferred family chosen (0/1)",
}


def with_factor(model: ModelConfig, factor: Factor, value: float) -> ModelConfig:
    path = FACTOR_PATH[Factor(factor)]
    if len(path) == 1:
        return dataclasses.replace(model, **{path[0]: value})
    inner = dataclasses.replace(getattr(model, path[0]), **{path[1]: value})
    return dataclasses.replace(model, **{path[0]: inner})


def config_diff(a, b, prefix: str = "") -> set:
    """Dotted paths of leaf values that differ between two configs."""
    da = to_dict(a) if not isinstance(a, dict) else a
    db = to_dict(b) if not isinstance(b, dict) else b
    out = set()
    for k in sorted(set(da) | set(db)):
        va, vb = da.get(k), db.get(k)
        p = f"{prefix}{k}"
        if isinstance(va, dict) and isinstance(vb, dict):
            out |= config_diff(va, vb, p + ".")
        elif va != vb:
            out.add(p)
    return out


@dataclass(frozen=True)
class SweepSpec:
    factor: Factor
    grid: tuple
    baseline: ModelConfig
    replications: int = 100_000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "factor", Factor(self.factor))
        grid = tuple(float(x) for x in self.grid)
        if len(grid) < 3:
            raise ConstructionError("a sweep grid needs at least three values")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConstructionError("sweep grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        if self.replications < 2:
            raise ConstructionError("replications must be >= 2")
        # every row must be a valid model
        for v in grid:
            try:
                m = with_factor(self.baseline, self.factor, v)
                m.environment()
                m.dynamics.demand_process()
            except FeeMechError as exc:
                raise ConstructionError(f"grid value {v} gives an invalid model: {exc}") from None


@dataclass(frozen=True, eq=False)
class SweepRow:
    value: float
    model: ModelConfig
    family: Optional[str] = None
    parameter: float = math.nan
    objective: float = math.nan
    family_objectives: dict = field(default_factory=dict)
    delta: float = math.nan
    delta_se: float = math.nan
    statistic: float = math.nan
    failed: Optional[str] = None
    samples: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(frozen=True, eq=False)
class SweepResult:
    spec: SweepSpec
    rows: tuple
    verdict: Verdict
    kendall_tau: float
    gated_tau: float
    agreeing_pairs: int
    opposing_pairs: int

    def to_csv(self) -> str:
        fams = sorted({f for r in self.rows for f in r.family_objectives})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["factor_value", "family", "parameter", "objective", "delta", "delta_se",
                    "statistic", *[f"objective_{f}" for f in fams], "failed"])
        g = lambda x: f"{x:.12g}"
        for r in self.rows:
            w.writerow([g(r.value), r.family or "", g(r.parameter), g(r.objective), g(r.delta),
                        g(r.delta_se), g(r.statistic),
                        *[g(r.family_objectives.get(f, math.nan)) for f in fams], r.failed or ""])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "factor": self.spec.factor.value,
            "grid": list(self.spec.grid),
            "statistic": STATISTIC[self.spec.factor],
            "expected_direction": EXPECTED_DIRECTION[self.spec.factor],
            "verdict": self.verdict.value,
            "kendall_tau": self.kendall_tau,
            "gated_tau": self.gated_tau,
            "agreeing_pairs": self.agreeing_pairs,
            "opposing_pairs": self.opposing_pairs,
            "rows": [
                {"value": r.value, "family": r.family, "parameter": r.parameter, "objective": r.objective,
                 "delta": r.delta, "delta_se": r.delta_se, "statistic": r.statistic, "failed": r.failed}
                for r in self.rows
            ],
        }


def step_response_blocks(model: ModelConfig) -> float:
    """Blocks until block size settles within the band after the configured demand path."""
    dyn = model.dynamics
    traj = simulate_trajectory(dyn.params, dyn.demand_process(), model.token, dyn.tip_per_gas, dyn.blocks, 0)
    return blocks_to_band(traj, dyn.band)


def _row(spec: SweepSpec, value: float, threads: int) -> SweepRow:
    model = with_factor(spec.baseline, spec.factor, value)
    env = model.environment()
    est = comparative_advantage_mc(env, spec.seed, spec.replications,
                                   tip_per_gas=model.tip_per_gas, threads=threads)
    problem = BargainingProblem(env, model.beta, model.candidates, model.tip_per_gas,
                                model.disagreement, seed=spec.seed, n=spec.replications)
    sol = solve_bargaining(problem, threads=threads)
    factor = spec.factor
    samples = None
    if factor in (Factor.DEMAND_VARIANCE, Factor.DEMAND_COST_COVARIANCE):
        stat, samples = est.delta, est.diffs
    elif factor is Factor.TOKEN_VOLATILITY:
        stat, samples = -est.delta, -est.diffs
    elif factor is Factor.ELASTICITY:
        stat = step_response_blocks(model)
    else:
        designer = solve_bargaining(dataclasses.replace(problem, beta=0.0), threads=threads)
        stat = 1.0 if sol.family is designer.family else 0.0
    return SweepRow(
        value=value,
        model=model,
        family=sol.family.value,
        parameter=sol.parameter,
        objective=sol.objective_value,
        family_objectives={o.family.value: o.objective for o in sol.per_family},
        delta=est.delta,
        delta_se=est.std_error,
        statistic=stat,
        samples=samples,
    )


def _pair_se(a: SweepRow, b: SweepRow) -> float:
    if a.samples is None or b.samples is None:
        return 0.0
    d = b.samples - a.samples
    return float(np.std(d, ddof=1) / math.sqrt(len(d)))


def directional_verdict(rows, direction: int, z: float = 3.0):
    """(verdict, raw tau, gated tau, agreeing, opposing) for the row statistics."""
    vals = [r.statistic for r in rows]
    scale = max([abs(v) for v in vals if math.isfinite(v)] + [1.0])
    atol = 1e-9 * scale
    raw = gated = 0.0
    agree = oppose = 0
    pairs = 0
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            pairs += 1
            diff = vals[j] - vals[i]
            if math.isinf(vals[i]) or math.isinf(vals[j]):
                if vals[i] == vals[j]:
                    continue
                sig = True
            else:
                sig = abs(diff) > z * _pair_se(rows[i], rows[j]) and abs(diff) > atol
            s = float(np.sign(diff)) * direction
            raw += s
            if sig:
                gated += s
                if s > 0:
                    agree += 1
                else:
                    oppose += 1
    raw /= pairs
    gated /= pairs
    if oppose == 0:
        verdict = Verdict.MATCHES
    elif agree == 0:
        verdict = Verdict.OPPOSES
    else:
        verdict = Verdict.INCONCLUSIVE
    return verdict, raw, gated, agree, oppose


def _safe_row(spec: SweepSpec, value: float, threads: int) -> SweepRow:
    try:
        return _row(spec, value, threads)
    except FeeMechError as exc:
        return SweepRow(value=value, model=with_factor(spec.baseline, spec.factor, value),
                        failed=f"{type(exc).__name__}: {exc}")


def run_sweep(spec: SweepSpec, threads: int = 1) -> SweepResult:
    """Evaluate every grid value; rows run concurrently and are kept in grid order."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(spec.grid))) as ex:
            rows = list(ex.map(lambda v: _safe_row(spec, v, 1), spec.grid))
    else:
        rows = [_safe_row(spec, v, 1) for v in spec.grid]
    ok = [r for r in rows if r.failed is None]
    direction = EXPECTED_DIRECTION[spec.factor]
    if len(ok) >= 2:
        verdict, raw, gated, agree, oppose = directional_verdict(ok, direction)
    else:
        verdict, raw, gated, agree, oppose = Verdict.INCONCLUSIVE, math.nan, math.nan, 0, 0
    if len(ok) < len(rows):
        verdict = Verdict.INCONCLUSIVE
    return SweepResult(spec, tuple(rows), verdict, raw, gated, agree, oppose)


# ---------------------------------------------------------------- baseline

def default_sweeps() -> tuple:
    """Shipped grid and per-row overrides for the five factor rows.

    The common baseline sits on the knife edge B'' = -1, C'' = 1. Rows whose
    effect vanishes there are moved off it by a constant override that holds
    across the whole row.
    """
    return (
        FactorSweepConfig("DemandVariance", (0.25, 0.5, 1.0, 2.0, 4.0), {"benefit": {"slope": -2.0}}),
        FactorSweepConfig("DemandCostCovariance", (0.0, 0.25, 0.5, 0.75), {}),
        FactorSweepConfig("TokenVolatility", (0.0, 0.02, 0.05, 0.1), {}),
        FactorSweepConfig(
            "Elasticity", (0.5, 1.0, 2.0, 4.0, 6.0),
            {"dynamics": {"step_at": 0, "step_factor": 2.0, "demand_log_sd": 0.0, "blocks": 400}},
        ),
        FactorSweepConfig("BargainingPower", (0.0, 0.25, 0.5, 0.75, 1.0), {"cost": {"slope": 2.0}}),
    )


def spec_from_config(row: FactorSweepConfig, baseline: ModelConfig, replications: int, seed: int) -> SweepSpec:
    model = apply_overrides(baseline, row.overrides) if row.overrides else baseline
    return SweepSpec(Factor(row.factor), row.grid, model, replications, seed)


# ------------------------------------------------------------------ report

@dataclass(frozen=True)
class Table1Report:
    rows: tuple
    status: str

    def to_dict(self) -> dict:
        return {"status": self.status, "rows": [dict(r) for r in self.rows]}

    def to_text(self) -> str:
        lines = [f"{'FACTOR':44s} {'EXAMPLE':30s} {'EXPECTED':8s} OBSERVED"]
        for r in self.rows:
            lines.append(f"{r['factor']:44s} {r['example']:30s} {r['expected']:8s} {r['verdict']}")
        lines.append(f"STATUS: {self.status}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def table1_report(results) -> Table1Report:
    by_factor = {r.spec.factor: r for r in results}
    missing = [f.value for f in Factor if f not in by_factor]
    if missing:
        raise DomainError(f"missing sweeps for {missing}")
    rows = []
    for f in Factor:
        label, example, outcome = TABLE1[f]
        res = by_factor[f]
        rows.append({
            "factor": label,
            "sweep": f.value,
            "example": example,
            "expected": outcome,
            "verdict": res.verdict.value,
            "failed_rows": sum(r.failed is not None for r in res.rows),
        })
    verdicts = {r["verdict"] for r in rows}
    if Verdict.OPPOSES.value in verdicts:
        status = "FAIL"
    elif Verdict.INCONCLUSIVE.value in verdicts:
        status = "WARN"
    else:
        status = "PASS"
    return Table1Report(tuple(rows), status)
