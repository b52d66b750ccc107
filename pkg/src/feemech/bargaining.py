"""Nash bargaining between a welfare-maximising designer and validators.

The designer and the validators agree on a mechanism family and its scalar
parameter by maximising

    max(E[SB] - sb0, 0) ** (1 - beta) * max(E[VP] - vp0, 0) ** beta

where SB is social benefit, VP validator profit and beta the validators'
bargaining power. Expectations are taken before the product.

Validator profit under a cap is auction revenue ``q * B1(q)`` less cost;
under a price floor or fixed price the base fee is burned and validators
keep only tips.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConstructionError, InfeasibleBargainingError
from .mechanisms import Family
from .optimize import golden_section_max
from .weitzman import (
    DEFAULT_DRAWS,
    QuadraticEnvironment,
    Scenarios,
    WelfareOutcome,
    _evaluate,
    instrument_bracket,
)

DEFAULT_CANDIDATES = (Family.QUANTITY_CAP, Family.PRICE_FLOOR)
GRID_POINTS = 512


def nash_objective(outcome: WelfareOutcome, beta: float, disagreement=(0.0, 0.0)) -> float:
    sb = max(outcome.social_benefit - disagreement[0], 0.0)
    vp = max(outcome.validator_profit - disagreement[1], 0.0)
    if beta == 0.0:
        return sb
    if beta == 1.0:
        return vp
    if sb <= 0.0 or vp <= 0.0:
        return 0.0
    return sb ** (1.0 - beta) * vp**beta


@dataclass(frozen=True)
class BargainingProblem:
    env: QuadraticEnvironment
    beta: float
    candidates: tuple = DEFAULT_CANDIDATES
    tip_per_gas: float = 0.0
    disagreement: tuple = (0.0, 0.0)
    method: str = "auto"
    seed: int = 0
    n: int = DEFAULT_DRAWS
    grid_points: int = GRID_POINTS

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ConstructionError(f"beta must lie in [0, 1], got {self.beta}")
        cands = tuple(Family(c) for c in self.candidates)
        if not cands:
            raise ConstructionError("candidate set is empty")
        if len(set(cands)) != len(cands):
            raise ConstructionError("duplicate candidate families")
        object.__setattr__(self, "candidates", tuple(sorted(cands, key=lambda f: f.rank)))
        object.__setattr__(self, "disagreement", tuple(float(x) for x in self.disagreement))
        if self.tip_per_gas < 0:
            raise ConstructionError("tip_per_gas must be nonnegative")
        if self.grid_points < 3:
            raise ConstructionError("grid needs at least three points")


@dataclass(frozen=True)
class FamilyOptimum:
    family: Family
    parameter: float
    objective: float
    grid_best: float
    welfare: WelfareOutcome


@dataclass(frozen=True)
class BargainingSolution:
    family: Family
    parameter: float
    objective_value: float
    welfare: WelfareOutcome
    runner_up: Optional[tuple]
    per_family: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "parameter": self.parameter,
            "objective": self.objective_value,
            "welfare": _outcome_dict(self.welfare),
            "runner_up": None if self.runner_up is None else {
                "family": self.runner_up[0].value, "objective_gap": self.runner_up[1]},
            "per_family": [
                {"family": o.family.value, "parameter": o.parameter, "objective": o.objective,
                 "grid_best": o.grid_best, "social_benefit": o.welfare.social_benefit,
                 "validator_profit": o.welfare.validator_profit}
                for o in self.per_family
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _outcome_dict(o: WelfareOutcome) -> dict:
    return {k: getattr(o, k) for k in o.__dataclass_fields__}


class _Evaluator:
    """Caches welfare outcomes for one family; shared draws when using MC."""

    def __init__(self, problem: BargainingProblem, family: Family, scenarios):
        self.p = problem
        self.family = family
        self.scenarios = scenarios
        self.cache = {}

    def outcome(self, x: float) -> WelfareOutcome:
        x = float(x)
        if x not in self.cache:
            p = self.p
            method = "mc" if self.scenarios is not None else "closed"
            self.cache[x] = _evaluate(p.env, self.family, x, p.tip_per_gas, method,
                                      self.scenarios, p.seed, p.n, 1)
        return self.cache[x]

    def objective(self, x: float) -> float:
        return nash_objective(self.outcome(x), self.p.beta, self.p.disagreement)


def _optimise_family(problem: BargainingProblem, ev: _Evaluator) -> FamilyOptimum:
    lo, hi = instrument_bracket(problem.env, ev.family)
    xs = np.linspace(lo, hi, problem.grid_points)
    vals = np.array([ev.objective(x) for x in xs])
    i = int(np.argmax(vals))
    grid_best = float(vals[i])
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
    res = golden_section_max(ev.objective, a, b, 1e-9 * max(hi, 1e-300))
    x, fx = (res.x, res.fx) if res.fx >= grid_best else (float(xs[i]), grid_best)
    return FamilyOptimum(ev.family, float(x), float(fx), grid_best, ev.outcome(x))


def solve_bargaining(problem: BargainingProblem, scenarios: Optional[Scenarios] = None,
                     threads: int = 1) -> BargainingSolution:
    """Best (family, parameter) pair under the Nash product.

    Each family's parameter is scanned on an even grid over its bracket and
    refined by golden-section search between the neighbours of the best grid
    point. Exact ties between families go to the earlier family in the order
    QuantityCap, PriceFloor, FixedPrice.
    """
    env = problem.env
    use_mc = problem.method == "mc" or (problem.method == "auto" and (scenarios is not None or env.token_moves))
    if use_mc and scenarios is None:
        scenarios = Scenarios.monte_carlo(env, problem.seed, problem.n, threads)
    optima = [_optimise_family(problem, _Evaluator(problem, f, scenarios if use_mc else None))
              for f in problem.candidates]
    if all(o.objective <= 0.0 for o in optima):
        raise InfeasibleBargainingError(
            "no candidate family yields positive surplus for both parties",
            {o.family.value: o.objective for o in optima},
        )
    best = optima[0]
    for o in optima[1:]:
        if o.objective > best.objective:
            best = o
    others = [o for o in optima if o is not best]
    runner = None
    if others:
        second = max(others, key=lambda o: (o.objective, -o.family.rank))
        runner = (second.family, best.objective - second.objective)
    return BargainingSolution(best.family, best.parameter, best.objective, best.welfare, runner, tuple(optima))
