"""Mechanism tags: the instruments a designer can commit to."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union

from .eip1559 import Eip1559Params


class Family(str, Enum):
    """Mechanism families, in tie-break order."""

    QUANTITY_CAP = "QuantityCap"
    PRICE_FLOOR = "PriceFloor"
    FIXED_PRICE = "FixedPrice"

    @property
    def rank(self) -> int:
        return list(Family).index(self)


@dataclass(frozen=True)
class QuantityCap:
    q_cap: float
    family = Family.QUANTITY_CAP


@dataclass(frozen=True)
class PriceFloor:
    p_floor: float
    family = Family.PRICE_FLOOR


@dataclass(frozen=True)
class FixedPrice:
    price: float
    family = Family.FIXED_PRICE


@dataclass(frozen=True)
class Eip1559:
    params: Eip1559Params


Mechanism = Union[QuantityCap, PriceFloor, FixedPrice, Eip1559]


def make_mechanism(family: Family, parameter: float):
    family = Family(family)
    if family is Family.QUANTITY_CAP:
        return QuantityCap(parameter)
    if family is Family.PRICE_FLOOR:
        return PriceFloor(parameter)
    return FixedPrice(parameter)
