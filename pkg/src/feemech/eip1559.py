"""EIP-1559 base-fee dynamics, payment splitting and trajectory statistics."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import rng
from .errors import ConstructionError, DomainError
from .models import IsoelasticDemand, TokenPriceModel, sample_token_path

ETHEREUM_EPSILON = 12.6

CSV_HEADER = ("block", "base_fee", "block_size", "burned", "tips", "token_price_usd", "fee_usd")


@dataclass(frozen=True)
class Eip1559Params:
    q_target: float = 15_000_000.0
    q_max: float = 30_000_000.0
    d: float = 0.125
    p_init: float = 1.0
    p_min: float = 0.0

    def __post_init__(self):
        if not self.q_target > 0:
            raise ConstructionError("q_target must be positive")
        if not self.q_max >= self.q_target:
            raise ConstructionError("q_max must be >= q_target")
        if not 0.0 <= self.d < 1.0:
            raise ConstructionError("d must lie in [0, 1)")
        if not self.p_init > 0:
            raise ConstructionError("p_init must be positive")
        if not self.p_min >= 0:
            raise ConstructionError("p_min must be nonnegative")


def next_base_fee(p_prev: float, q_prev: float, params: Eip1559Params) -> float:
    """One step of the base-fee update rule."""
    if not 0.0 <= q_prev <= params.q_max:
        raise DomainError(f"block size {q_prev} outside [0, {params.q_max}]")
    p = p_prev * (1.0 + params.d * (q_prev - params.q_target) / params.q_target)
    return max(params.p_min, p)


def realized_block_size(p: float, psi: float, epsilon: float, q_max: float) -> float:
    if not p > 0:
        raise DomainError("base fee must be positive")
    return min(psi / p**epsilon, q_max)


def steady_state_fee(psi: float, epsilon: float, q_target: float) -> float:
    """Base fee at which demand exactly fills the target."""
    return (psi / q_target) ** (1.0 / epsilon)


@dataclass(frozen=True)
class Payment:
    paid: float
    burned: float
    to_validator: float


def transaction_payment(gas: float, base_fee: float, tip: float, cap: float) -> Optional[Payment]:
    """Split one transaction's payment into burn and validator share.

    Returns ``None`` when the fee cap is below the base fee (the transaction
    is excluded). With integer inputs the split is exact.
    """
    if not gas > 0:
        raise DomainError("gas must be positive")
    if tip < 0:
        raise DomainError("tip must be nonnegative")
    if cap < base_fee:
        return None
    per_gas_tip = min(base_fee + tip, cap) - base_fee
    burned = gas * base_fee
    to_validator = gas * per_gas_tip
    return Payment(burned + to_validator, burned, to_validator)


@dataclass(frozen=True)
class DemandProcess:
    """Block-by-block demand shifter ``psi_k = psi_0 * exp(x_k) * step_k``.

    ``x_k`` is a stationary AR(1) in logs with standard deviation ``log_sd``
    and persistence ``rho`` (``rho = 0`` gives i.i.d. shocks). From block
    ``step_at`` on the shifter is multiplied by ``step_factor``.
    """

    base: IsoelasticDemand
    log_sd: float = 0.0
    rho: float = 0.0
    step_at: Optional[int] = None
    step_factor: float = 1.0

    def __post_init__(self):
        if self.log_sd < 0:
            raise ConstructionError("log_sd must be nonnegative")
        if not 0.0 <= self.rho < 1.0:
            raise ConstructionError("rho must lie in [0, 1)")
        if not self.step_factor > 0:
            raise ConstructionError("step_factor must be positive")

    def psi_path(self, seed: int, t: int) -> np.ndarray:
        psi = np.full(t, self.base.psi)
        if self.log_sd > 0:
            z = rng.substream(seed, "demand").standard_normal(t)
            x = np.empty(t)
            x[0] = self.log_sd * z[0]
            innov = self.log_sd * math.sqrt(1.0 - self.rho**2)
            for k in range(1, t):
                x[k] = self.rho * x[k - 1] + innov * z[k]
            psi = psi * np.exp(x)
        if self.step_at is not None:
            psi[self.step_at:] *= self.step_factor
        return psi


@dataclass(frozen=True, slots=True)
class BlockRecord:
    index: int
    base_fee: float
    block_size: float
    burned: float
    tips: float
    token_price: float

    @property
    def fee_usd(self) -> float:
        return self.base_fee * self.token_price


@dataclass(frozen=True)
class Trajectory:
    params: Eip1559Params
    blocks: tuple
    seed: int

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(b, name) for b in self.blocks], dtype=float)

    def to_json(self) -> str:
        """Lossless serialisation (floats are written with round-trip repr)."""
        return json.dumps(
            {
                "params": asdict(self.params),
                "seed": self.seed,
                "blocks": [[b.index, b.base_fee, b.block_size, b.burned, b.tips, b.token_price] for b in self.blocks],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Trajectory":
        data = json.loads(text)
        blocks = tuple(BlockRecord(int(r[0]), *map(float, r[1:])) for r in data["blocks"])
        return cls(Eip1559Params(**data["params"]), blocks, data["seed"])


def simulate_trajectory(
    params: Eip1559Params,
    demand: DemandProcess,
    token: TokenPriceModel,
    tip_per_gas: float,
    t: int,
    seed: int,
) -> Trajectory:
    """Iterate the base-fee rule for ``t`` blocks under aggregate demand."""
    if t < 1:
        raise DomainError(f"need at least one block, got {t}")
    if tip_per_gas < 0:
        raise DomainError("tip_per_gas must be nonnegative")
    psi = demand.psi_path(seed, t)
    prices = sample_token_path(token, seed, t)
    eps = demand.base.epsilon
    p = params.p_init
    blocks = []
    for k in range(t):
        size = realized_block_size(p, float(psi[k]), eps, params.q_max)
        blocks.append(BlockRecord(k, p, size, p * size, tip_per_gas * size, float(prices[k])))
        p = next_base_fee(p, size, params)
    return Trajectory(params, tuple(blocks), seed)


def replay_matches(traj: Trajectory) -> bool:
    """True if every recorded base fee follows from its predecessor's block."""
    blocks = traj.blocks
    for prev, cur in zip(blocks, blocks[1:]):
        if next_base_fee(prev.base_fee, prev.block_size, traj.params) != cur.base_fee:
            return False
        if cur.burned != cur.base_fee * cur.block_size:
            return False
    return True


@dataclass(frozen=True)
class TrajectoryStats:
    blocks: int
    mean_base_fee: float
    var_base_fee: float
    mean_fee_usd: float
    var_fee_usd: float
    mean_block_size: float
    total_burned: float
    total_tips: float
    full_block_fraction: float


def trajectory_stats(traj: Trajectory) -> TrajectoryStats:
    if not traj.blocks:
        raise DomainError("empty trajectory")
    fee = traj.column("base_fee")
    usd = fee * traj.column("token_price")
    size = traj.column("block_size")
    return TrajectoryStats(
        blocks=len(traj.blocks),
        mean_base_fee=float(fee.mean()),
        var_base_fee=float(fee.var()),
        mean_fee_usd=float(usd.mean()),
        var_fee_usd=float(usd.var()),
        mean_block_size=float(size.mean()),
        total_burned=math.fsum(b.burned for b in traj.blocks),
        total_tips=math.fsum(b.tips for b in traj.blocks),
        full_block_fraction=float(np.mean(size >= traj.params.q_max)),
    )


def blocks_to_band(traj: Trajectory, band: float = 0.05) -> float:
    """Blocks until the size enters and stays within ``band`` of the target.

    Returns ``inf`` if the last block is still outside the band.
    """
    target = traj.params.q_target
    outside = [i for i, b in enumerate(traj.blocks) if abs(b.block_size / target - 1.0) > band]
    if not outside:
        return 0.0
    if outside[-1] == len(traj.blocks) - 1:
        return math.inf
    return float(outside[-1] + 1)


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def trajectory_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for b in traj.blocks:
        w.writerow(
            [b.index, _fmt(b.base_fee), _fmt(b.block_size), _fmt(b.burned), _fmt(b.tips),
             _fmt(b.token_price), _fmt(b.fee_usd)]
        )
    return buf.getvalue()
