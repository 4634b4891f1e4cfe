"""Turns plain-language privacy requirements into concrete run parameters.

The mapping from a stated goal to an epsilon is policy, not math, so it
lives in an editable table. Everything downstream of the table is
mechanical: delta is the inverse of each client's shard size, the batch
size is the largest one the memory budget admits, the accountant follows
from whether Poisson batch-size spikes fit in that budget, and the noise
multipliers come from the calibrator.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .accounting import (
    CalibrationError,
    FixedSizeScheme,
    PoissonScheme,
    PrivacyTarget,
    calibrate_sigma,
)
from .dpsgd import expected_poisson_peak
from .partition import Policy, partition_sizes


class GoalKind(enum.Enum):
    MITIGATE_MIA = "mitigate-mia"
    MITIGATE_RECONSTRUCTION = "mitigate-reconstruction"
    REGULATORY = "regulatory"


# editable defaults; membership inference needs the stricter budget
DEFAULT_GOAL_EPSILON = {
    GoalKind.MITIGATE_MIA: 6.0,
    GoalKind.MITIGATE_RECONSTRUCTION: 10.0,
}

REMEDIES = (
    "expand the client data partitions",
    "increase the memory budget and switch accountant",
    "relax the epsilon target",
)

# The quadrature accountant's cost grows with the largest order on the
# grid, and its optimum for desk-scale shards sits well below 64. The
# truncated grid can only overstate epsilon, so calibrating against it
# stays conservative.
FIXED_SIZE_ORDERS = np.arange(2, 65)


@dataclass(frozen=True)
class PrivacyGoal:
    kind: GoalKind
    epsilon: float | None = None

    def __post_init__(self):
        if self.kind is GoalKind.REGULATORY:
            if self.epsilon is None or not (self.epsilon > 0):
                raise ValueError("a regulatory goal needs a positive epsilon")
        elif self.epsilon is not None:
            raise ValueError(f"{self.kind.value} takes its epsilon from the table")

    @classmethod
    def mitigate_mia(cls):
        return cls(GoalKind.MITIGATE_MIA)

    @classmethod
    def mitigate_reconstruction(cls):
        return cls(GoalKind.MITIGATE_RECONSTRUCTION)

    @classmethod
    def regulatory(cls, epsilon: float):
        return cls(GoalKind.REGULATORY, float(epsilon))


@dataclass(frozen=True)
class Requirements:
    goal: PrivacyGoal
    clients: int
    dataset_size: int
    rounds: int
    memory_budget: float
    model_units: int
    min_accuracy: float | None = None
    policy_hint: Policy | None = None
    local_epochs: int = 1
    preferred_accountant: str = "poisson"

    def __post_init__(self):
        if self.clients < 1:
            raise ValueError("need at least one client")
        if self.dataset_size < self.clients:
            raise ValueError("dataset smaller than the client count")
        if self.rounds < 1 or self.local_epochs < 1:
            raise ValueError("rounds and local_epochs must be >= 1")
        if self.model_units < 1:
            raise ValueError("model_units must be positive")
        if not (self.memory_budget > self.model_units):
            raise ValueError(
                f"memory budget {self.memory_budget} does not even hold the "
                f"model ({self.model_units} units)"
            )
        if self.min_accuracy is not None and not (0.0 <= self.min_accuracy <= 1.0):
            raise ValueError("min_accuracy must lie in [0, 1]")
        if self.preferred_accountant not in ("poisson", "fixed-size"):
            raise ValueError("preferred_accountant must be poisson or fixed-size")

    @property
    def policy(self) -> Policy:
        return self.policy_hint if self.policy_hint is not None else Policy.IID


@dataclass(frozen=True)
class Recommendation:
    epsilon: float
    accountant: str
    batch_size: int
    partition_sizes: tuple[int, ...]
    deltas: tuple[float, ...]
    sigmas: tuple[float, ...]
    steps_per_client: tuple[int, ...]
    memory_peak_estimate: float
    overrun_probability: float | None
    rationale: tuple[str, ...]


class EventKind(enum.Enum):
    ACCURACY_SHORTFALL = "accuracy-shortfall"
    MEMORY_OVERRUN = "memory-overrun"
    CALIBRATION_FAILURE = "calibration-failure"


@dataclass(frozen=True)
class AdherenceEvent:
    round_index: int
    kind: EventKind
    message: str
    remedies: tuple[str, ...] = REMEDIES


def load_goal_table(path) -> dict:
    """Read a {goal-kind: epsilon} table from a JSON file."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    table = {}
    for key, value in raw.items():
        kind = GoalKind(key)
        if kind is GoalKind.REGULATORY:
            raise ValueError("regulatory epsilon comes from the requirement")
        if not (isinstance(value, (int, float)) and value > 0):
            raise ValueError(f"epsilon for {key} must be positive, got {value!r}")
        table[kind] = float(value)
    return table


def goal_epsilon(goal: PrivacyGoal, table=None) -> float:
    if goal.kind is GoalKind.REGULATORY:
        return float(goal.epsilon)
    merged = dict(DEFAULT_GOAL_EPSILON)
    if table:
        merged.update(table)
    return merged[goal.kind]


def recommend(requirements: Requirements, goal_table=None,
              orders=None) -> Recommendation:
    """Map requirements to (epsilon, deltas, accountant, batch, sigmas)."""
    epsilon = goal_epsilon(requirements.goal, goal_table)
    sizes = partition_sizes(
        requirements.dataset_size, requirements.clients, requirements.policy
    )
    rationale = [
        f"goal {requirements.goal.kind.value} maps to epsilon {epsilon:g}"
    ]

    # largest batch the budget holds, capped by the smallest shard
    slack = requirements.memory_budget - requirements.model_units
    cap = min(sizes)
    batch = cap if math.isinf(slack) else min(cap, int(slack))
    if batch < 1:
        raise CalibrationError(
            "memory budget leaves no room for even a single-example batch; "
            + "; ".join(REMEDIES)
        )
    if batch < cap:
        rationale.append(
            f"batch size {batch} fills the memory budget "
            f"({requirements.memory_budget:g} units, model {requirements.model_units})"
        )
    else:
        rationale.append(f"batch size {batch} capped by the smallest shard")

    steps = tuple(
        requirements.rounds * requirements.local_epochs * math.ceil(n / batch)
        for n in sizes
    )
    worst_peak = max(
        expected_poisson_peak(batch, batch / n, s) for n, s in zip(sizes, steps)
    )
    poisson_fits = requirements.memory_budget >= requirements.model_units + worst_peak
    if not poisson_fits:
        accountant = "fixed-size"
        rationale.append(
            f"Poisson batch spikes (expected peak ~{worst_peak:.0f} examples) "
            f"exceed the budget; fixed-size batches keep memory constant"
        )
    else:
        accountant = requirements.preferred_accountant
        rationale.append(
            f"expected Poisson peak ~{worst_peak:.0f} examples fits the budget; "
            f"keeping the preferred {accountant} accountant"
        )

    overrun = None
    if accountant == "poisson" and math.isfinite(requirements.memory_budget):
        capacity = int(requirements.memory_budget - requirements.model_units)
        overrun = max(
            float(binom.sf(capacity, n, batch / n)) for n in sizes
        )
        rationale.append(
            f"single-step probability of a batch above the budget: {overrun:.3g}"
        )

    if orders is None and accountant == "fixed-size":
        orders = FIXED_SIZE_ORDERS
    deltas = tuple(1.0 / n for n in sizes)
    sigmas = []
    for n, delta, step_count in zip(sizes, deltas, steps):
        if accountant == "fixed-size":
            scheme = FixedSizeScheme(batch_size=batch, dataset_size=n)
        else:
            scheme = PoissonScheme(rate=batch / n)
        try:
            result = calibrate_sigma(
                PrivacyTarget(epsilon, delta), scheme, step_count, orders=orders
            )
        except CalibrationError as exc:
            raise CalibrationError(f"{exc}; " + "; ".join(REMEDIES)) from exc
        sigmas.append(result.sigma)

    peak_estimate = (
        requirements.model_units + batch if accountant == "fixed-size"
        else requirements.model_units + worst_peak
    )
    return Recommendation(
        epsilon=epsilon,
        accountant=accountant,
        batch_size=batch,
        partition_sizes=tuple(sizes),
        deltas=deltas,
        sigmas=tuple(sigmas),
        steps_per_client=steps,
        memory_peak_estimate=float(peak_estimate),
        overrun_probability=overrun,
        rationale=tuple(rationale),
    )


def check_adherence(run_record, requirements: Requirements,
                    trend_points=0.5, trend_window=3) -> list[AdherenceEvent]:
    """Compare a run record against the stated requirements."""
    return adherence_events(
        run_record,
        rounds_planned=requirements.rounds,
        memory_budget=requirements.memory_budget,
        min_accuracy=requirements.min_accuracy,
        trend_points=trend_points,
        trend_window=trend_window,
    )


def adherence_events(run_record, rounds_planned: int, memory_budget: float,
                     min_accuracy=None, trend_points=0.5,
                     trend_window=3) -> list[AdherenceEvent]:
    """The raw adherence check, decoupled from the Requirements type.

    An accuracy shortfall fires once, at the first round past the halfway
    mark where the best accuracy so far is below the required minimum and
    the recent round-over-round improvement is under trend_points
    (percentage points per round). A memory overrun fires at the first
    round where any client's recorded peak exceeds the budget.
    """
    events = []
    rounds = list(run_record.rounds)
    budget = memory_budget
    for record in rounds:
        over = [
            s for s in record.clients if s.memory_peak_units > budget
        ]
        if over:
            worst = max(over, key=lambda s: s.memory_peak_units)
            events.append(AdherenceEvent(
                round_index=record.round_index,
                kind=EventKind.MEMORY_OVERRUN,
                message=(
                    f"client {worst.client} peaked at {worst.memory_peak_units} "
                    f"units, above the budget of {budget:g}"
                ),
            ))
            break
    if min_accuracy is not None and rounds:
        halfway = rounds_planned / 2.0
        best = -math.inf
        history = []
        for record in rounds:
            history.append(record.accuracy)
            best = max(best, record.accuracy)
            if record.round_index <= halfway or len(history) < 2:
                continue
            window = history[-(trend_window + 1):]
            trend = (window[-1] - window[0]) / (len(window) - 1)
            if best < min_accuracy and trend < trend_points / 100.0:
                events.append(AdherenceEvent(
                    round_index=record.round_index,
                    kind=EventKind.ACCURACY_SHORTFALL,
                    message=(
                        f"best accuracy {best:.3f} after round "
                        f"{record.round_index} is below the required "
                        f"{min_accuracy:.3f} and the trend "
                        f"({trend * 100:.2f} points/round) has stalled"
                    ),
                ))
                break
    return events
