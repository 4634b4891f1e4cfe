"""Shared translation from a JSON-style run config to an executable plan.

Both the HTTP service and the command line accept the same dictionary
shape, so the parsing and defaulting live here. A plan bundles the
federation configuration with the synthetic-data recipe and the optional
adherence targets (minimum accuracy, per-client memory budget).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import make_blobs
from .dpsgd import Injection
from .federation import (
    ClientPrivacy,
    FederationConfig,
    RunRecord,
    run_federation,
)
from .accounting import (
    Adjacency,
    FixedSizeScheme,
    PoissonScheme,
    PrivacyTarget,
    accounted_steps,
)
from .models import Logistic, Mlp, init_model
from .partition import Policy
from .practitioner import adherence_events

_TOP_LEVEL_KEYS = {
    "dataset_size", "features", "classes", "separation",
    "clients", "rounds", "policy", "architecture",
    "batch_size", "learning_rate", "local_epochs", "seed",
    "test_fraction", "workers", "privacy",
    "min_accuracy", "memory_budget",
}

_PRIVACY_KEYS = {"sigma", "clip_norm", "injection", "sampler", "delta",
                 "target"}


@dataclass(frozen=True)
class LaunchPlan:
    dataset_size: int
    features: int
    classes: int
    separation: float
    config: FederationConfig
    min_accuracy: float | None
    memory_budget: float

    def make_data(self):
        return make_blobs(self.dataset_size, features=self.features,
                          classes=self.classes, separation=self.separation,
                          seed=self.config.seed)

    @property
    def model_units(self) -> int:
        probe = init_model(self.config.architecture, seed=0)
        return int(probe.parameters.size)


def _require(payload: dict, key: str):
    if key not in payload:
        raise ValueError(f"run config is missing {key!r}")
    return payload[key]


def _parse_architecture(raw, features: int, classes: int):
    if raw is None or raw == "logistic":
        return Logistic(features, classes)
    if raw == "mlp":
        return Mlp(features, hidden=32, classes=classes)
    if isinstance(raw, dict):
        kind = raw.get("kind")
        if kind == "logistic":
            return Logistic(features, classes)
        if kind == "mlp":
            hidden = int(raw.get("hidden", 32))
            return Mlp(features, hidden=hidden, classes=classes)
    raise ValueError(f"unknown architecture {raw!r}")


def _parse_privacy(raw) -> ClientPrivacy:
    if not isinstance(raw, dict):
        raise ValueError("privacy settings must be an object")
    unknown = set(raw) - _PRIVACY_KEYS
    if unknown:
        raise ValueError(f"unknown privacy keys: {sorted(unknown)}")
    target = raw.get("target")
    if target is not None:
        target = PrivacyTarget(float(target["epsilon"]),
                               float(target["delta"]))
    return ClientPrivacy(
        sigma=float(_require(raw, "sigma")),
        clip_norm=float(_require(raw, "clip_norm")),
        injection=Injection(raw.get("injection", "per-step")),
        sampler=raw.get("sampler", "poisson"),
        delta=None if raw.get("delta") is None else float(raw["delta"]),
        target=target,
    )


def plan_from_dict(payload: dict) -> LaunchPlan:
    """Validate a config dictionary and build the launch plan."""
    if not isinstance(payload, dict):
        raise ValueError("run config must be a JSON object")
    unknown = set(payload) - _TOP_LEVEL_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")

    dataset_size = int(_require(payload, "dataset_size"))
    features = int(payload.get("features", 20))
    classes = int(payload.get("classes", 2))
    separation = float(payload.get("separation", 4.0))
    clients = int(_require(payload, "clients"))
    architecture = _parse_architecture(payload.get("architecture"),
                                       features, classes)

    privacy = _require(payload, "privacy")
    if isinstance(privacy, dict):
        client_privacy = tuple(_parse_privacy(privacy) for _ in range(clients))
    elif isinstance(privacy, list):
        if len(privacy) != clients:
            raise ValueError(
                f"privacy list has {len(privacy)} entries for {clients} clients"
            )
        client_privacy = tuple(_parse_privacy(entry) for entry in privacy)
    else:
        raise ValueError("privacy must be an object or a list of objects")

    config = FederationConfig(
        clients=clients,
        rounds=int(_require(payload, "rounds")),
        architecture=architecture,
        policy=Policy.parse(payload.get("policy", "iid")),
        batch_size=int(_require(payload, "batch_size")),
        learning_rate=float(_require(payload, "learning_rate")),
        client_privacy=client_privacy,
        local_epochs=int(payload.get("local_epochs", 1)),
        seed=int(payload.get("seed", 0)),
        test_fraction=float(payload.get("test_fraction", 0.2)),
        workers=int(payload.get("workers", 1)),
    )

    min_accuracy = payload.get("min_accuracy")
    if min_accuracy is not None:
        min_accuracy = float(min_accuracy)
        if not (0.0 <= min_accuracy <= 1.0):
            raise ValueError("min_accuracy must lie in [0, 1]")
    budget = payload.get("memory_budget")
    budget = math.inf if budget is None else float(budget)
    if budget <= 0:
        raise ValueError("memory_budget must be positive")

    return LaunchPlan(
        dataset_size=dataset_size,
        features=features,
        classes=classes,
        separation=separation,
        config=config,
        min_accuracy=min_accuracy,
        memory_budget=budget,
    )


def execute_plan(plan: LaunchPlan, control=None, on_round=None) -> RunRecord:
    X, y = plan.make_data()
    return run_federation(plan.config, X, y, control=control,
                          on_round=on_round)


# ---------------------------------------------------------------------------
# calibration argument resolution, shared by the CLI and the service
# ---------------------------------------------------------------------------

def scheme_from_args(scheme_name, rate=None, batch_size=None,
                     dataset_size=None, adjacency=None):
    """Build an accounting scheme from loose request arguments."""
    name = {"fixed": "fixed-size"}.get(scheme_name, scheme_name)
    if adjacency is not None and not isinstance(adjacency, Adjacency):
        adjacency = Adjacency(adjacency)
    if name == "poisson":
        if rate is None:
            if batch_size is None or dataset_size is None:
                raise ValueError(
                    "poisson needs a rate, or batch_size with dataset_size"
                )
            rate = batch_size / dataset_size
        if adjacency is None:
            return PoissonScheme(rate)
        return PoissonScheme(rate, adjacency)
    if name == "fixed-size":
        if batch_size is None or dataset_size is None:
            raise ValueError("fixed-size needs batch_size and dataset_size")
        if adjacency is None:
            return FixedSizeScheme(batch_size, dataset_size)
        return FixedSizeScheme(batch_size, dataset_size, adjacency)
    raise ValueError(f"unknown scheme {scheme_name!r}")


def steps_from_args(steps=None, rounds=None, batch_size=None,
                    dataset_size=None, local_epochs=1) -> int:
    if (steps is None) == (rounds is None):
        raise ValueError("give exactly one of steps or rounds")
    if steps is not None:
        return int(steps)
    if batch_size is None or dataset_size is None:
        raise ValueError(
            "rounds-based accounting needs batch_size and dataset_size"
        )
    return accounted_steps(dataset_size, batch_size, rounds, local_epochs)


# ---------------------------------------------------------------------------
# run event stream, shared by the CLI and the service
# ---------------------------------------------------------------------------

def plain(value):
    """Strip numpy scalar and array types so payloads survive json.dumps."""
    if isinstance(value, dict):
        return {key: plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(item) for item in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def round_event(record) -> dict:
    return plain({
        "type": "round_complete",
        "round": record.round_index,
        "accuracy": record.accuracy,
        "loss": record.loss,
        "clients": [
            {
                "client": s.client,
                "epsilon_spent": s.epsilon_spent,
                "delta": s.delta,
                "memory_peak_units": s.memory_peak_units,
                "batch_min": s.batch_sizes_min,
                "batch_mean": s.batch_sizes_mean,
                "batch_max": s.batch_sizes_max,
                "skipped_steps": s.skipped_steps,
                "shard_accuracy": s.shard_accuracy,
            }
            for s in record.clients
        ],
    })


def warning_event(event) -> dict:
    return {
        "type": "warning",
        "round": event.round_index,
        "kind": event.kind.value,
        "message": event.message,
        "remedies": list(event.remedies),
    }


def done_event(status: str, diagnostic, rounds_done: int) -> dict:
    return {
        "type": "done",
        "status": status,
        "diagnostic": diagnostic,
        "rounds": rounds_done,
    }


class _PartialRecord:
    """Just enough of a run record for the adherence checker."""

    def __init__(self, rounds):
        self.rounds = rounds


class RunEventStream:
    """Turns round callbacks into the NDJSON event sequence.

    Every completed round becomes a round_complete event; adherence
    violations against the plan's targets become warning events, each
    kind emitted once. The caller pushes the terminal done event via
    finish() because only it knows the final status.
    """

    def __init__(self, plan: LaunchPlan, sink):
        self._plan = plan
        self._sink = sink
        self.rounds = []
        self._warned = set()

    def on_round(self, record):
        self.rounds.append(record)
        self._sink(round_event(record))
        events = adherence_events(
            _PartialRecord(self.rounds),
            rounds_planned=self._plan.config.rounds,
            memory_budget=self._plan.memory_budget,
            min_accuracy=self._plan.min_accuracy,
        )
        for event in events:
            if event.kind in self._warned:
                continue
            self._warned.add(event.kind)
            self._sink(warning_event(event))

    def finish(self, status: str, diagnostic=None):
        self._sink(done_event(status, diagnostic, len(self.rounds)))
