"""Run configuration: strict JSON schema mapped onto frozen dataclasses."""
from __future__ import annotations

import dataclasses
import json
import re
import typing
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from .eip1559 import DemandProcess, Eip1559Params
from .errors import ConfigError, FeeMechError
from .mechanisms import Family
from .models import IsoelasticDemand, LinearMarginalCurve, ShockModel, TokenPriceModel
from .rng import check_seed
from .weitzman import QuadraticEnvironment

SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class CurveConfig:
    intercept: float
    slope: float
    q_ref: float = 0.0


@dataclass(frozen=True)
class DynamicsConfig:
    """Block-level EIP-1559 simulation settings.

    ``psi = None`` places the initial base fee at the steady state:
    ``psi = q_target * p_init ** epsilon``.
    """

    params: Eip1559Params = Eip1559Params(p_init=20.0)
    epsilon: float = 12.6
    psi: Optional[float] = None
    blocks: int = 1000
    demand_log_sd: float = 0.0
    rho: float = 0.0
    step_at: Optional[int] = None
    step_factor: float = 1.0
    tip_per_gas: float = 0.0
    band: float = 0.05

    def __post_init__(self):
        if self.blocks < 1:
            raise ConfigError(f"dynamics.blocks must be >= 1, got {self.blocks}")
        if not self.epsilon > 0:
            raise ConfigError("dynamics.epsilon must be positive")

    def demand(self) -> IsoelasticDemand:
        psi = self.psi
        if psi is None:
            psi = self.params.q_target * self.params.p_init**self.epsilon
        return IsoelasticDemand(psi, self.epsilon)

    def demand_process(self) -> DemandProcess:
        return DemandProcess(self.demand(), self.demand_log_sd, self.rho, self.step_at, self.step_factor)


@dataclass(frozen=True)
class ModelConfig:
    """Every economic parameter an analysis can depend on."""

    benefit: CurveConfig = CurveConfig(20.0, -1.0, 20.0)
    cost: CurveConfig = CurveConfig(20.0, 1.0, 20.0)
    shocks: ShockModel = ShockModel("gaussian", 1.0, 1.0, 0.0)
    token: TokenPriceModel = TokenPriceModel(2000.0, 0.0, 0.0)
    tip_per_gas: float = 0.1
    beta: float = 0.0
    candidates: tuple = (Family.QUANTITY_CAP, Family.PRICE_FLOOR)
    disagreement: tuple = (0.0, 0.0)
    dynamics: DynamicsConfig = DynamicsConfig()

    def environment(self) -> QuadraticEnvironment:
        return QuadraticEnvironment(
            LinearMarginalCurve(self.benefit.intercept, self.benefit.slope, self.benefit.q_ref),
            LinearMarginalCurve(self.cost.intercept, self.cost.slope, self.cost.q_ref),
            self.shocks,
            self.token,
        )


@dataclass(frozen=True)
class FactorSweepConfig:
    factor: str
    grid: tuple
    overrides: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RunConfig:
    schema_version: str = SCHEMA_VERSION
    seed: int = 0
    output_dir: str = "results"
    replications: int = 100_000
    model: ModelConfig = ModelConfig()
    sweeps: tuple = ()

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(
                f"schema_version {self.schema_version!r} not supported (expected {SCHEMA_VERSION!r})"
            )
        try:
            check_seed(self.seed)
        except FeeMechError as exc:
            raise ConfigError(str(exc)) from None
        if self.replications < 2:
            raise ConfigError("replications must be >= 2")


# ------------------------------------------------------------ (de)serialise

def to_dict(obj) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (tuple, list)):
        return [to_dict(x) for x in obj]
    if isinstance(obj, dict):
        return {k: to_dict(v) for k, v in obj.items()}
    return obj


_ELEMENT_TYPES = {
    (ModelConfig, "candidates"): Family,
    (ModelConfig, "disagreement"): float,
    (RunConfig, "sweeps"): FactorSweepConfig,
    (FactorSweepConfig, "grid"): float,
}


def from_dict(cls, data, path: str = ""):
    """Build ``cls`` from ``data``, rejecting unknown or mistyped keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path or '<root>'}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        err = ConfigError(f"{path or '<root>'}: unknown key(s) {unknown}")
        err.key = unknown[0]
        raise err
    kwargs = {}
    for name, value in data.items():
        sub = f"{path}.{name}" if path else name
        kwargs[name] = _convert(hints[name], value, sub, _ELEMENT_TYPES.get((cls, name)))
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (FeeMechError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path or '<root>'}: {exc}") from None


def _convert(tp, value, path, element=None):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _convert(args[0], value, path, element)
    if dataclasses.is_dataclass(tp):
        return from_dict(tp, value, path)
    if tp is tuple or origin is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        return tuple(_convert(element, v, f"{path}[{i}]") if element else v for i, v in enumerate(value))
    if tp is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object")
        return value
    if isinstance(tp, type) and issubclass(tp, Enum):
        try:
            return tp(value)
        except ValueError:
            raise ConfigError(f"{path}: invalid value {value!r}") from None
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    return value


def _locate(text: str, key: str):
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    if not m:
        return None, None
    before = text[: m.start()]
    return before.count("\n") + 1, m.start() - (before.rfind("\n") + 1) + 1


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg}", exc.lineno, exc.colno) from None
    try:
        return from_dict(RunConfig, data)
    except ConfigError as exc:
        key = getattr(exc, "key", None)
        if key is None or exc.line is not None:
            raise
        line, col = _locate(text, key)
        raise ConfigError(str(exc), line, col) from None


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


def merge(base: dict, overrides: dict) -> dict:
    out = dict(base)
    for k, v in overrides.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def apply_overrides(model: ModelConfig, overrides: dict) -> ModelConfig:
    return from_dict(ModelConfig, merge(to_dict(model), overrides), "model")
