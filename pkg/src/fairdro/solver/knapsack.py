"""Continuous knapsack via the exact greedy rule.

Items are taken in order of descending reward/weight ratio until the budget
is exhausted; at most one item ends up fractional. Ties in the ratio break
toward the smaller index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KnapsackInstance:
    rewards: np.ndarray  # c >= 0
    weights: np.ndarray  # w in (0, inf]
    budget: float

    def __post_init__(self):
        c = np.asarray(self.rewards, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if c.shape != w.shape or c.ndim != 1:
            raise ValueError("rewards/weights must be equal-length vectors")
        if np.any(c < 0):
            raise ValueError("rewards must be non-negative")
        if np.any(w <= 0):
            raise ValueError("weights must be positive (inf allowed)")
        if not (self.budget >= 0):
            raise ValueError("budget must be non-negative")
        object.__setattr__(self, "rewards", c)
        object.__setattr__(self, "weights", w)


def greedy_knapsack(inst: KnapsackInstance):
    """Maximize c.z subject to w.z <= budget, z in [0,1]^M; returns (z, value)."""
    c, w = inst.rewards, inst.weights
    z = np.zeros_like(c)
    take = np.flatnonzero((c > 0) & np.isfinite(w))
    if take.size == 0:
        return z, 0.0
    ratio = c[take] / w[take]
    # stable sort on -ratio keeps ascending-index order within ties
    order = take[np.argsort(-ratio, kind="stable")]
    remaining = float(inst.budget)
    value = 0.0
    for i in order:
        if remaining <= 0.0:
            break
        if w[i] <= remaining:
            z[i] = 1.0
            remaining -= float(w[i])
            value += float(c[i])
        else:
            frac = remaining / float(w[i])
            z[i] = frac
            value += float(c[i]) * frac
            remaining = 0.0
            break
    return z, value
