"""Economic primitives: demand, marginal curves, shocks and token prices.

Units throughout: quantities in gas, prices in token per gas, token price in
USD per token.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import rng
from .errors import ConstructionError, DomainError

# |epsilon - 1| below this switches the benefit integral to its log branch
LOG_BRANCH_TOL = 1e-9


@dataclass(frozen=True)
class IsoelasticDemand:
    """Aggregate demand ``q = psi / p**epsilon``."""

    psi: float
    epsilon: float

    def __post_init__(self):
        if not (self.psi > 0 and math.isfinite(self.psi)):
            raise ConstructionError(f"psi must be positive and finite, got {self.psi}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ConstructionError(f"epsilon must be positive and finite, got {self.epsilon}")

    def quantity_at(self, p):
        p = np.asarray(p, dtype=float)
        if np.any(~(p > 0)):
            raise DomainError("price must be strictly positive")
        q = self.psi / p**self.epsilon
        return float(q) if q.ndim == 0 else q

    def inverse(self, q):
        q = np.asarray(q, dtype=float)
        if np.any(~(q > 0)):
            raise DomainError("quantity must be strictly positive")
        p = (self.psi / q) ** (1.0 / self.epsilon)
        return float(p) if p.ndim == 0 else p

    def benefit(self, q: float, q_ref: float) -> float:
        """Area under the inverse demand curve between ``q_ref`` and ``q``.

        The integral from 0 diverges for epsilon <= 1, so benefits are
        measured relative to a reference quantity.
        """
        if q <= 0 or q_ref <= 0:
            raise DomainError("benefit needs positive quantities")
        e = self.epsilon
        if abs(e - 1.0) < LOG_BRANCH_TOL:
            return self.psi * (math.log(q) - math.log(q_ref))
        k = 1.0 - 1.0 / e
        return self.psi ** (1.0 / e) * (q**k - q_ref**k) / k


def quantity_at(demand: IsoelasticDemand, p):
    """Block space demanded at price ``p``: ``psi / p**epsilon``."""
    return demand.quantity_at(p)


def inverse_demand(demand: IsoelasticDemand, q):
    """Price at which ``q`` gas is demanded: ``(psi / q)**(1/epsilon)``."""
    return demand.inverse(q)


@dataclass(frozen=True)
class LinearMarginalCurve:
    """Marginal curve linearised around ``q_ref``.

    ``value_at(q) = intercept + shock + slope * (q - q_ref)``. A benefit curve
    has ``slope <= 0``; a cost curve has ``slope >= 0``.
    """

    intercept: float
    slope: float
    q_ref: float = 0.0
    shock: float = 0.0

    def __post_init__(self):
        if self.q_ref < 0:
            raise ConstructionError(f"q_ref must be nonnegative, got {self.q_ref}")
        for name in ("intercept", "slope", "q_ref", "shock"):
            if not math.isfinite(getattr(self, name)):
                raise ConstructionError(f"{name} must be finite")

    def value_at(self, q, shock=None):
        s = self.shock if shock is None else shock
        return self.intercept + s + self.slope * (np.asarray(q, dtype=float) - self.q_ref)

    def integral(self, q, shock=None):
        """Exact integral of the curve from 0 to ``q``."""
        s = self.shock if shock is None else shock
        q = np.asarray(q, dtype=float)
        return (self.intercept + s - self.slope * self.q_ref) * q + 0.5 * self.slope * q * q


@dataclass(frozen=True)
class CostCurve:
    marginal: LinearMarginalCurve

    def __post_init__(self):
        if self.marginal.slope < 0:
            raise ConstructionError("cost curve slope must be >= 0")

    def total_cost(self, q, shock=None):
        return self.marginal.integral(q, shock)


class DistKind(str, Enum):
    GAUSSIAN = "gaussian"
    TWO_POINT = "two_point"


@dataclass(frozen=True)
class ShockModel:
    """Joint law of the (demand, cost) shock pair, both mean zero."""

    dist_kind: DistKind = DistKind.GAUSSIAN
    var_demand: float = 0.0
    var_cost: float = 0.0
    cov: float = 0.0
    two_point_prob: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "dist_kind", DistKind(self.dist_kind))
        if self.var_demand < 0 or self.var_cost < 0:
            raise ConstructionError("variances must be nonnegative")
        # small slack so that cov = sqrt(vd*vc) computed in floating point passes
        bound = self.var_demand * self.var_cost
        if self.cov * self.cov > bound * (1 + 1e-12) + 1e-300:
            raise ConstructionError(
                f"covariance matrix not PSD: cov^2={self.cov**2} > var_demand*var_cost={bound}"
            )
        if not 0.0 < self.two_point_prob < 1.0:
            raise ConstructionError("two_point_prob must lie in (0, 1)")
        if (
            self.dist_kind is DistKind.TWO_POINT
            and self.two_point_prob != 0.5
            and self.cov != 0.0
        ):
            raise ConstructionError("asymmetric two-point shocks require cov = 0")

    @property
    def sd_demand(self) -> float:
        return math.sqrt(self.var_demand)

    @property
    def sd_cost(self) -> float:
        return math.sqrt(self.var_cost)

    @property
    def correlation(self) -> float:
        den = self.sd_demand * self.sd_cost
        return 0.0 if den == 0 else max(-1.0, min(1.0, self.cov / den))

    def two_point_states(self):
        """Support and probabilities of the two-point law: (demand, cost, prob) arrays."""
        p = self.two_point_prob
        hi = self.sd_demand * math.sqrt((1 - p) / p)
        lo = -self.sd_demand * math.sqrt(p / (1 - p))
        same = 0.5 + 0.5 * self.correlation
        c = self.sd_cost
        demand = np.array([hi, hi, lo, lo])
        cost = np.array([c, -c, -c, c])
        prob = np.array([p * same, p * (1 - same), (1 - p) * same, (1 - p) * (1 - same)])
        return demand, cost, prob

    def transform(self, z: np.ndarray) -> np.ndarray:
        """Map an (n, 2) array of base variates to (demand, cost) shocks.

        Gaussian: ``z`` are standard normals. Two-point: ``z`` are uniforms.
        """
        out = np.empty_like(z)
        if self.dist_kind is DistKind.GAUSSIAN:
            sd_d, sd_c = self.sd_demand, self.sd_cost
            out[:, 0] = sd_d * z[:, 0]
            if sd_d > 0:
                resid = max(self.var_cost - self.cov**2 / self.var_demand, 0.0)
                out[:, 1] = (self.cov / sd_d) * z[:, 0] + math.sqrt(resid) * z[:, 1]
            else:
                out[:, 1] = sd_c * z[:, 1]
        else:
            p = self.two_point_prob
            hi = self.sd_demand * math.sqrt((1 - p) / p)
            lo = -self.sd_demand * math.sqrt(p / (1 - p))
            up = z[:, 0] < p
            out[:, 0] = np.where(up, hi, lo)
            sign_d = np.where(up, 1.0, -1.0)
            same = z[:, 1] < 0.5 + 0.5 * self.correlation
            out[:, 1] = self.sd_cost * np.where(same, sign_d, -sign_d)
        return out


def _base_variates(model: ShockModel):
    if model.dist_kind is DistKind.GAUSSIAN:
        return lambda gen, m: gen.standard_normal((m, 2))
    return lambda gen, m: gen.random((m, 2))


def sample_shocks(model: ShockModel, seed: int, n: int, threads: int = 1) -> np.ndarray:
    """Draw ``n`` (demand_shock, cost_shock) pairs as an (n, 2) array.

    The base variates depend only on (seed, n, dist_kind), so two models of
    the same kind sampled with one seed share common random numbers.
    """
    z = rng.chunked(n, seed, "shocks", _base_variates(model), threads)
    return model.transform(z)


@dataclass(frozen=True)
class TokenPriceModel:
    """Geometric random walk for the token's USD price, one step per block."""

    initial_usd: float = 1.0
    log_vol: float = 0.0
    drift: float = 0.0

    def __post_init__(self):
        if not self.initial_usd > 0:
            raise ConstructionError("initial_usd must be positive")
        if not self.log_vol >= 0:
            raise ConstructionError("log_vol must be nonnegative")


def sample_token_path(model: TokenPriceModel, seed: int, t: int) -> np.ndarray:
    """Price path of length ``t`` starting at ``initial_usd``."""
    if t < 1:
        raise DomainError(f"path length must be >= 1, got {t}")
    z = rng.substream(seed, "token_path").standard_normal(t - 1)
    steps = model.drift + model.log_vol * z
    path = np.empty(t)
    path[0] = model.initial_usd
    path[1:] = model.initial_usd * np.exp(np.cumsum(steps))
    return path


def sample_token_multipliers(model: TokenPriceModel, seed: int, n: int, threads: int = 1) -> np.ndarray:
    """One-period gross token return ``exp(drift + log_vol * z)`` for ``n`` draws."""
    z = rng.chunked(n, seed, "token", lambda gen, m: gen.standard_normal(m), threads)
    return np.exp(model.drift + model.log_vol * z)
