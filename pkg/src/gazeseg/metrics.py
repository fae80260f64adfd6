"""Segmentation quality metrics and their aggregation."""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

from .core import Mask
from .errors import EmptyInput, ShapeMismatch


class AggregateStat(NamedTuple):
    """Mean and population standard deviation over n samples."""

    mean: float
    std: float
    n: int


def dice(a: Mask, b: Mask) -> float:
    """Dice overlap 2|a&b| / (|a|+|b|); two empty masks score 1.0 by convention."""
    if a.bits.shape != b.bits.shape:
        raise ShapeMismatch(f"mask shapes differ: {a.bits.shape} vs {b.bits.shape}")
    inter = int((a.bits & b.bits).sum())
    total = a.area() + b.area()
    if total == 0:
        return 1.0
    return 2.0 * inter / total


def aggregate(scores: Sequence[float]) -> AggregateStat:
    """Arithmetic mean and population std of a nonempty score list."""
    if len(scores) == 0:
        raise EmptyInput("cannot aggregate an empty score list")
    n = len(scores)
    mean = sum(scores) / n
    var = sum((s - mean) ** 2 for s in scores) / n
    return AggregateStat(mean=mean, std=math.sqrt(var), n=n)
