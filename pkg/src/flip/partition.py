"""Dataset partitioning across simulated clients.

Four sizing policies are supported. The uniform policy deals the remainder
to the lowest client ids; the weighted policies (linear, square,
exponential in the 1-based client id) floor every share except the last
and give the final client whatever remains.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class PartitionError(ValueError):
    """Base class for partitioning failures."""


class DegeneratePartitionError(PartitionError):
    """A policy produced an empty client share at this n and k."""


class Policy(enum.Enum):
    IID = "iid"
    LINEAR = "linear"
    SQUARE = "square"
    EXPONENTIAL = "exponential"

    @classmethod
    def parse(cls, text: str) -> "Policy":
        try:
            return cls(text.strip().lower())
        except ValueError:
            names = ", ".join(p.value for p in cls)
            raise ValueError(f"unknown policy {text!r}; expected one of {names}")


@dataclass(frozen=True)
class PartitionPlan:
    """Sizes plus the concrete index assignment behind them."""

    sizes: tuple[int, ...]
    assignments: tuple[np.ndarray, ...] = field(repr=False)
    seed: int

    def __post_init__(self):
        if len(self.sizes) != len(self.assignments):
            raise ValueError("sizes and assignments must have the same length")
        for size, idx in zip(self.sizes, self.assignments):
            if size != idx.size:
                raise ValueError("each size must match its assignment length")

    @property
    def total(self) -> int:
        return sum(self.sizes)


def partition_sizes(n: int, k: int, policy: Policy) -> list[int]:
    """Client share sizes for n records over k clients under the policy.

    Uniform: floor(n/k) each, first (n mod k) clients get one extra.
    Weighted: floor(n * w_i / sum w) for clients 1..k-1 in integer
    arithmetic where the weights allow it, remainder to client k.
    """
    n, k = int(n), int(k)
    if k < 1:
        raise ValueError(f"need at least one client, got k={k}")
    if n < k:
        raise ValueError(f"cannot split n={n} records across k={k} clients")
    if policy is Policy.IID:
        base, extra = divmod(n, k)
        sizes = [base + 1 if i < extra else base for i in range(k)]
    else:
        if policy is Policy.LINEAR:
            head = [n * i * 2 // (k * (k + 1)) for i in range(1, k)]
        elif policy is Policy.SQUARE:
            denom = k * (k + 1) * (2 * k + 1) // 6
            head = [n * i * i // denom for i in range(1, k)]
        elif policy is Policy.EXPONENTIAL:
            weights = np.exp(np.arange(1, k + 1, dtype=float))
            total = float(weights.sum())
            head = [math.floor(n * float(w) / total) for w in weights[:-1]]
        else:
            raise ValueError(f"unknown policy {policy!r}")
        sizes = head + [n - sum(head)]
    if any(s <= 0 for s in sizes):
        raise DegeneratePartitionError(
            f"policy {policy.value} gives an empty share at n={n}, k={k}: {sizes}"
        )
    return sizes


def assign_indices(n: int, sizes, seed: int) -> PartitionPlan:
    """Deal a seeded uniform shuffle of range(n) out by the given sizes."""
    sizes = [int(s) for s in sizes]
    if any(s < 1 for s in sizes):
        raise ValueError(f"sizes must be positive, got {sizes}")
    if sum(sizes) != n:
        raise ValueError(f"sizes sum to {sum(sizes)}, expected n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    bounds = np.cumsum([0] + sizes)
    parts = tuple(perm[bounds[i] : bounds[i + 1]] for i in range(len(sizes)))
    return PartitionPlan(tuple(sizes), parts, int(seed))


def make_plan(n: int, k: int, policy: Policy, seed: int = 0) -> PartitionPlan:
    """partition_sizes and assign_indices in one call."""
    return assign_indices(n, partition_sizes(n, k, policy), seed)
