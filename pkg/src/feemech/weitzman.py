"""Welfare under quantity caps, price floors and fixed prices.

The environment is linear-quadratic: marginal benefit and marginal cost are
straight lines around a common expansion point, shifted by a demand shock
and a cost shock. Welfare of any instrument can be computed three ways:

* ``closed``: exact expectations from Gaussian partial moments (or exact
  enumeration of the four two-point states);
* ``mc``: sample means over Monte Carlo draws;
* ``auto``: ``closed`` whenever it exists, otherwise ``mc``.

Price instruments are quoted in token; when the environment carries a token
price model, the USD price users face is ``p * exp(drift + log_vol * z)`` and
only the Monte Carlo path applies. The cap is a gas quantity and is immune to
token moves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .errors import ConstructionError, DomainError, OptimizationError, UnsupportedMechanismError
from .mechanisms import Eip1559, Family, FixedPrice, PriceFloor, QuantityCap, make_mechanism
from .models import DistKind, LinearMarginalCurve, ShockModel, TokenPriceModel, sample_shocks, sample_token_multipliers
from .optimize import golden_section_max

DEFAULT_DRAWS = 100_000
# tail mass below which a clamp is treated as never binding
CLAMP_TAIL = 1e-15
_CLAMP_Z = 8.0
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class QuadraticEnvironment:
    benefit_marginal: LinearMarginalCurve
    cost_marginal: LinearMarginalCurve
    shocks: ShockModel = field(default_factory=ShockModel)
    token: Optional[TokenPriceModel] = None

    def __post_init__(self):
        if not self.benefit_marginal.slope < 0:
            raise ConstructionError("benefit slope must be strictly negative")
        if not self.cost_marginal.slope >= 0:
            raise ConstructionError("cost slope must be nonnegative")
        if self.benefit_marginal.q_ref != self.cost_marginal.q_ref:
            raise ConstructionError("benefit and cost curves must share q_ref")

    @property
    def b(self) -> float:
        return -self.benefit_marginal.slope

    @property
    def c(self) -> float:
        return self.cost_marginal.slope

    @property
    def q_ref(self) -> float:
        return self.benefit_marginal.q_ref

    @property
    def choke_price(self) -> float:
        """Marginal benefit at zero quantity with no shock."""
        return self.benefit_marginal.intercept + self.b * self.q_ref

    @property
    def net_intercept(self) -> float:
        """Marginal net benefit at zero quantity with no shocks."""
        return (
            self.benefit_marginal.intercept
            - self.cost_marginal.intercept
            + (self.b + self.c) * self.q_ref
        )

    @property
    def token_moves(self) -> bool:
        t = self.token
        return t is not None and (t.log_vol > 0 or t.drift != 0)

    def certainty_equivalent_quantity(self) -> float:
        return max(0.0, self.net_intercept / (self.b + self.c))


@dataclass(frozen=True)
class WelfareOutcome:
    social_benefit: float
    validator_profit: float
    deadweight_loss: float
    burned: float
    tips: float
    std_error: float = 0.0
    mean_quantity: float = 0.0
    first_best: float = 0.0
    draws: int = 0


@dataclass(frozen=True, eq=False)
class Scenarios:
    """A fixed set of shock states, optionally weighted (exact enumeration)."""

    demand: np.ndarray
    cost: np.ndarray
    mult: np.ndarray
    weights: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return len(self.demand)

    @classmethod
    def monte_carlo(cls, env: QuadraticEnvironment, seed: int, n: int, threads: int = 1) -> "Scenarios":
        s = sample_shocks(env.shocks, seed, n, threads)
        if env.token_moves:
            mult = sample_token_multipliers(env.token, seed, n, threads)
        else:
            mult = np.ones(n)
        return cls(s[:, 0].copy(), s[:, 1].copy(), mult)

    @classmethod
    def two_point(cls, env: QuadraticEnvironment) -> "Scenarios":
        if env.shocks.dist_kind is not DistKind.TWO_POINT or env.token_moves:
            raise UnsupportedMechanismError("exact enumeration needs two-point shocks and a fixed token price")
        d, c, p = env.shocks.two_point_states()
        return cls(d, c, np.ones(4), p)


# ----------------------------------------------------------------- per state

def efficient_quantity(env: QuadraticEnvironment, shock) -> float:
    """Ex-post first-best quantity where marginal benefit meets marginal cost."""
    d, c = shock
    return float(np.maximum(0.0, _efficient(env, d, c)))


def _efficient(env, d, c):
    return (env.net_intercept + d - c) / (env.b + env.c)


def free_quantity(env: QuadraticEnvironment, demand_shock):
    """Quantity demanded at a zero price."""
    return np.maximum(0.0, (env.choke_price + demand_shock) / env.b)


def adjusted_quantity(env: QuadraticEnvironment, p_floor: float, shock, tip_per_gas: float = 0.0) -> float:
    """Quantity at which users' marginal benefit equals the posted price."""
    d = shock[0]
    return float(np.maximum(0.0, (env.choke_price + d - p_floor - tip_per_gas) / env.b))


def _realized(env, family, param, d, mult, tip):
    if family is Family.QUANTITY_CAP:
        if param < 0:
            raise DomainError("quantity cap must be nonnegative")
        return np.minimum(param, free_quantity(env, d))
    return np.maximum(0.0, (env.choke_price + d - param * mult - tip) / env.b)


def _dwl(env, q, q_star, d, c):
    # integral of the marginal net-benefit gap from q to q_star
    g0 = env.net_intercept + d - c
    return (q_star - q) * (g0 - 0.5 * (env.b + env.c) * (q_star + q))


def deadweight_loss(env: QuadraticEnvironment, mechanism, shock, tip_per_gas: float = 0.0) -> float:
    """Welfare lost in one shock state relative to the ex-post first best."""
    if isinstance(mechanism, Eip1559):
        raise UnsupportedMechanismError("a dynamic mechanism has no single-shot deadweight loss")
    family, param = _unpack(mechanism)
    d, c = shock
    q = _realized(env, family, param, d, 1.0, tip_per_gas)
    q_star = max(0.0, _efficient(env, d, c))
    return float(max(0.0, _dwl(env, q, q_star, d, c)))


def _unpack(mechanism):
    if isinstance(mechanism, QuantityCap):
        return Family.QUANTITY_CAP, mechanism.q_cap
    if isinstance(mechanism, PriceFloor):
        return Family.PRICE_FLOOR, mechanism.p_floor
    if isinstance(mechanism, FixedPrice):
        return Family.FIXED_PRICE, mechanism.price
    raise UnsupportedMechanismError(f"unsupported mechanism {mechanism!r}")


def outcome_arrays(env: QuadraticEnvironment, family: Family, param: float, sc: Scenarios, tip: float = 0.0):
    """Per-state quantity, welfare, first-best welfare, profit, burn and tips."""
    B, C = env.benefit_marginal, env.cost_marginal
    d, c = sc.demand, sc.cost
    q = _realized(env, family, param, d, sc.mult, tip)
    q_star = np.maximum(0.0, _efficient(env, d, c))
    w = B.integral(q, d) - C.integral(q, c)
    cost = C.integral(q, c)
    if family is Family.QUANTITY_CAP:
        revenue = q * B.value_at(q, d)
        profit = revenue - cost
        burned = np.zeros_like(q)
        tips = revenue
    else:
        profit = tip * q - cost
        burned = param * sc.mult * q
        tips = tip * q
    return {
        "q": q,
        "welfare": w,
        "first_best": B.integral(q_star, d) - C.integral(q_star, c),
        "dwl": _dwl(env, q, q_star, d, c),
        "profit": profit,
        "burned": burned,
        "tips": tips,
    }


def _summarise(arrays, sc: Scenarios) -> WelfareOutcome:
    if sc.weights is not None:
        avg = lambda x: float(np.dot(sc.weights, x))
        se = 0.0
        draws = 0
    else:
        avg = lambda x: float(np.mean(x))
        n = sc.size
        se = float(np.std(arrays["welfare"], ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        draws = n
    return WelfareOutcome(
        social_benefit=avg(arrays["welfare"]),
        validator_profit=avg(arrays["profit"]),
        deadweight_loss=max(0.0, avg(arrays["dwl"])),
        burned=avg(arrays["burned"]),
        tips=avg(arrays["tips"]),
        std_error=se,
        mean_quantity=avg(arrays["q"]),
        first_best=avg(arrays["first_best"]),
        draws=draws,
    )


# --------------------------------------------------------------- closed form

def _clip_moments(mu, s, lo, hi):
    """E[q], E[q^2], E[(X - mu) q] for q = clip(X, lo, hi), X ~ N(mu, s^2)."""
    if s == 0.0:
        q = min(max(mu, lo), hi)
        return q, q * q, 0.0
    a = (lo - mu) / s
    p_lo = ndtr(a)
    phi_a = math.exp(-0.5 * a * a) / _SQRT_2PI
    if math.isinf(hi):
        p_hi, phi_b, b_phi_b, hi_term = 0.0, 0.0, 0.0, 0.0
        m0 = 1.0 - p_lo
    else:
        b = (hi - mu) / s
        p_hi = ndtr(-b)
        phi_b = math.exp(-0.5 * b * b) / _SQRT_2PI
        b_phi_b = b * phi_b
        m0 = ndtr(b) - p_lo
        hi_term = hi
    # moments of a standard normal restricted to (a, b)
    z1 = phi_a - phi_b
    z2 = m0 + a * phi_a - b_phi_b
    mid1 = mu * m0 + s * z1
    mid2 = mu * mu * m0 + 2.0 * mu * s * z1 + s * s * z2
    eq = lo * p_lo + mid1 + hi_term * p_hi
    eq2 = lo * lo * p_lo + mid2 + hi_term * hi_term * p_hi
    euq = -lo * s * phi_a + mu * s * z1 + s * s * z2 + hi_term * s * phi_b
    return eq, eq2, euq


def _linear_moments(env, mu, w_d, w_c, lo, hi):
    """E[q], E[q^2], E[beta q], E[eta q] for q = clip(mu + w_d beta + w_c eta)."""
    sh = env.shocks
    var_u = w_d * w_d * sh.var_demand + 2 * w_d * w_c * sh.cov + w_c * w_c * sh.var_cost
    s = math.sqrt(max(var_u, 0.0))
    eq, eq2, euq = _clip_moments(mu, s, lo, hi)
    if var_u <= 0.0:
        return eq, eq2, 0.0, 0.0
    cov_du = w_d * sh.var_demand + w_c * sh.cov
    cov_cu = w_d * sh.cov + w_c * sh.var_cost
    return eq, eq2, cov_du / var_u * euq, cov_cu / var_u * euq


def _gaussian_outcome(env, family, param, tip) -> WelfareOutcome:
    b, c = env.b, env.c
    F = env.choke_price
    cost_lin = env.cost_marginal.intercept - c * env.q_ref
    if family is Family.QUANTITY_CAP:
        if param < 0:
            raise DomainError("quantity cap must be nonnegative")
        eq, eq2, ebq, ecq = _linear_moments(env, F / b, 1.0 / b, 0.0, 0.0, param)
    else:
        eq, eq2, ebq, ecq = _linear_moments(env, (F - param - tip) / b, 1.0 / b, 0.0, 0.0, math.inf)
    k = b + c
    fq, fq2, fbq, fcq = _linear_moments(env, env.net_intercept / k, 1.0 / k, -1.0 / k, 0.0, math.inf)

    def welfare(q, q2, bq, cq):
        return F * q + bq - 0.5 * b * q2 - (cost_lin * q + cq + 0.5 * c * q2)

    w = welfare(eq, eq2, ebq, ecq)
    w_star = welfare(fq, fq2, fbq, fcq)
    cost = cost_lin * eq + ecq + 0.5 * c * eq2
    if family is Family.QUANTITY_CAP:
        revenue = F * eq + ebq - b * eq2
        profit, burned, tips = revenue - cost, 0.0, revenue
    else:
        profit, burned, tips = tip * eq - cost, param * eq, tip * eq
    return WelfareOutcome(
        social_benefit=w,
        validator_profit=profit,
        deadweight_loss=max(0.0, w_star - w),
        burned=burned,
        tips=tips,
        std_error=0.0,
        mean_quantity=eq,
        first_best=w_star,
    )


def closed_form_available(env: QuadraticEnvironment) -> bool:
    return not env.token_moves


# ------------------------------------------------------------------ welfare

def welfare(
    env: QuadraticEnvironment,
    mechanism,
    *,
    tip_per_gas: float = 0.0,
    method: str = "auto",
    scenarios: Optional[Scenarios] = None,
    seed: int = 0,
    n: int = DEFAULT_DRAWS,
    threads: int = 1,
) -> WelfareOutcome:
    family, param = _unpack(mechanism)
    return _evaluate(env, family, param, tip_per_gas, method, scenarios, seed, n, threads)


def _evaluate(env, family, param, tip, method, scenarios, seed, n, threads):
    if method not in ("auto", "closed", "mc"):
        raise DomainError(f"unknown method {method!r}")
    if method == "mc" or (method == "auto" and (scenarios is not None or env.token_moves)):
        sc = scenarios if scenarios is not None else Scenarios.monte_carlo(env, seed, n, threads)
        return _summarise(outcome_arrays(env, family, param, sc, tip), sc)
    if env.token_moves:
        raise UnsupportedMechanismError("no closed form when the token price moves")
    if env.shocks.dist_kind is DistKind.GAUSSIAN:
        return _gaussian_outcome(env, family, param, tip)
    sc = Scenarios.two_point(env)
    return _summarise(outcome_arrays(env, family, param, sc, tip), sc)


def welfare_quantity_cap(env, q_cap, **kw) -> WelfareOutcome:
    """Expected outcome when block space is capped at ``q_cap`` gas."""
    return welfare(env, QuantityCap(q_cap), **kw)


def welfare_price_floor(env, p_floor, **kw) -> WelfareOutcome:
    """Expected outcome when the per-gas price is fixed at ``p_floor`` and quantity adjusts."""
    return welfare(env, PriceFloor(p_floor), **kw)


def welfare_fixed_price(env, p, **kw) -> WelfareOutcome:
    # one-shot: a fixed price and a floor coincide
    return welfare(env, FixedPrice(p), **kw)


# ------------------------------------------------------------- optimisation

def instrument_bracket(env: QuadraticEnvironment, family: Family):
    """Search interval for the instrument's parameter."""
    family = Family(family)
    if family is Family.QUANTITY_CAP:
        scale = max(env.q_ref, env.certainty_equivalent_quantity())
        if scale <= 0:
            scale = max(env.choke_price / env.b, 1.0)
        return 0.0, 4.0 * scale
    hi = 4.0 * (env.choke_price + 3.0 * env.shocks.sd_demand)
    return 0.0, max(hi, 1.0)


def _certainty_equivalent(env, family, tip):
    q = env.certainty_equivalent_quantity()
    if family is Family.QUANTITY_CAP:
        return q
    return env.choke_price - env.b * q - tip


def _clamps_inactive(env, family, param, tip) -> bool:
    b = env.b
    sh = env.shocks
    if env.net_intercept <= 0:
        return False
    if sh.dist_kind is DistKind.TWO_POINT:
        d, _, _ = sh.two_point_states()
        qf = (env.choke_price + d) / b
        if family is Family.QUANTITY_CAP:
            return bool(np.all(qf >= param))
        return bool(np.all(qf - (param + tip) / b >= 0))
    sd = sh.sd_demand / b
    if family is Family.QUANTITY_CAP:
        gap = env.choke_price / b - param
    else:
        gap = (env.choke_price - param - tip) / b
    return gap > _CLAMP_Z * sd if sd > 0 else gap >= 0


def optimal_instrument(
    env: QuadraticEnvironment,
    family,
    *,
    tip_per_gas: float = 0.0,
    method: str = "auto",
    scenarios: Optional[Scenarios] = None,
    seed: int = 0,
    n: int = DEFAULT_DRAWS,
    threads: int = 1,
    rel_tol: float = 1e-9,
):
    """Parameter maximising expected social benefit, and the outcome there.

    In the linear-quadratic environment with no binding clamp the optimum is
    the certainty-equivalent one and is returned directly. Otherwise the
    objective is maximised by golden-section search; the upper end of the
    bracket is doubled (at most four times) while the optimum sits on it.
    """
    family = Family(family)
    use_mc = method == "mc" or (method == "auto" and (scenarios is not None or env.token_moves))
    if use_mc and scenarios is None:
        scenarios = Scenarios.monte_carlo(env, seed, n, threads)

    def outcome(x):
        return _evaluate(env, family, x, tip_per_gas, "mc" if use_mc else "closed", scenarios, seed, n, threads)

    if not use_mc:
        ce = _certainty_equivalent(env, family, tip_per_gas)
        if ce >= 0 and _clamps_inactive(env, family, ce, tip_per_gas):
            return ce, outcome(ce)

    lo, hi = instrument_bracket(env, family)
    f = lambda x: outcome(x).social_benefit
    for expansion in range(5):
        _check_unimodal(f, lo, hi, family)
        tol = rel_tol * max(hi, 1e-300)
        res = golden_section_max(f, lo, hi, tol)
        if hi - res.x > 10 * tol:
            return res.x, outcome(res.x)
        hi *= 2.0
    raise OptimizationError(
        f"{family.value}: optimum keeps hitting the upper bracket",
        {"family": family.value, "last_bracket": (lo, hi / 2.0), "x": res.x, "fx": res.fx},
    )


def _check_unimodal(f, lo, hi, family, points: int = 33):
    xs = np.linspace(lo, hi, points)
    ys = np.array([f(x) for x in xs])
    tol = 1e-12 * (np.max(np.abs(ys)) + 1.0)
    peaks = [
        i for i in range(1, points - 1)
        if ys[i] > ys[i - 1] + tol and ys[i] > ys[i + 1] + tol
    ]
    if len(peaks) > 1:
        raise OptimizationError(
            f"{family.value}: objective is not unimodal on [{lo}, {hi}]",
            {"family": family.value, "grid": xs.tolist(), "values": ys.tolist(), "peaks": peaks},
        )


# ----------------------------------------------------- comparative advantage

@dataclass(frozen=True, eq=False)
class DeltaEstimate:
    delta: float
    std_error: float
    q_cap: float
    p_floor: float
    diffs: np.ndarray = field(repr=False)

    def significant(self, z: float = 3.0, atol: float = 1e-9) -> bool:
        """``|delta|`` exceeds ``z`` standard errors and a rounding floor."""
        return abs(self.delta) > z * self.std_error and abs(self.delta) > atol


def comparative_advantage_mc(
    env: QuadraticEnvironment,
    seed: int,
    n: int,
    *,
    tip_per_gas: float = 0.0,
    threads: int = 1,
) -> DeltaEstimate:
    """Monte Carlo estimate of E[welfare(price floor) - welfare(quantity cap)].

    Both instruments sit at their optima and are evaluated on the same draws.
    """
    if n < 2:
        raise DomainError("need at least two draws")
    sc = Scenarios.monte_carlo(env, seed, n, threads)
    method = "mc" if env.token_moves else "closed"
    kw = dict(tip_per_gas=tip_per_gas, method=method, scenarios=sc if method == "mc" else None)
    q_cap, _ = optimal_instrument(env, Family.QUANTITY_CAP, **kw)
    p_floor, _ = optimal_instrument(env, Family.PRICE_FLOOR, **kw)
    w_q = outcome_arrays(env, Family.QUANTITY_CAP, q_cap, sc, tip_per_gas)["welfare"]
    w_p = outcome_arrays(env, Family.PRICE_FLOOR, p_floor, sc, tip_per_gas)["welfare"]
    diffs = w_p - w_q
    return DeltaEstimate(
        delta=float(np.mean(diffs)),
        std_error=float(np.std(diffs, ddof=1) / math.sqrt(n)),
        q_cap=q_cap,
        p_floor=p_floor,
        diffs=diffs,
    )


def comparative_advantage_closed_form(env: QuadraticEnvironment) -> float:
    """Advantage of the optimal price floor over the optimal quantity cap.

    ``-Var[beta] (B'' + C'') / (2 B''^2) + Cov[beta, eta] / B''``. Positive
    when demand is steeper than marginal cost (|B''| > C'') and falls with
    the demand-cost covariance. Exact while no clamp binds.
    """
    if not isinstance(env, QuadraticEnvironment):
        raise UnsupportedMechanismError("closed form needs a linear-quadratic environment")
    if env.token_moves:
        raise UnsupportedMechanismError("closed form assumes a fixed token price")
    b_pp = env.benefit_marginal.slope
    c_pp = env.cost_marginal.slope
    sh = env.shocks
    # adding 0.0 turns a -0.0 at the knife edge into 0.0
    return -sh.var_demand * (b_pp + c_pp) / (2.0 * b_pp * b_pp) + sh.cov / b_pp + 0.0


