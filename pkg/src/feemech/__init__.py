"""Welfare and bargaining analysis of blockchain transaction fee mechanisms."""
from .bargaining import BargainingProblem, nash_objective, solve_bargaining
from .eip1559 import Eip1559Params, next_base_fee, simulate_trajectory, transaction_payment
from .errors import (
    ConfigError,
    ConstructionError,
    DomainError,
    FeeMechError,
    InfeasibleBargainingError,
    OptimizationError,
    UnsupportedMechanismError,
)
from .mechanisms import Family, FixedPrice, PriceFloor, QuantityCap
from .models import IsoelasticDemand, LinearMarginalCurve, ShockModel, TokenPriceModel
from .weitzman import (
    QuadraticEnvironment,
    comparative_advantage_closed_form,
    comparative_advantage_mc,
    optimal_instrument,
    welfare,
)

__version__ = "0.1.0"
