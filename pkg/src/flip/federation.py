"""Federated averaging over DP-SGD clients.

Each round broadcasts the global model, trains every client locally under
its own privacy settings, aggregates parameters weighted by shard size,
and evaluates on a held-out global test split. Privacy spent per client is
always read back from the accountant by composing the per-step curve; the
orchestrator never integrates epsilon on its own.
"""
from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .accounting import PrivacyTarget, RdpCurve, compose, rdp_to_dp, scheme_rdp
from .data import train_test_split
from .dpsgd import (
    FixedSizeSampler,
    Injection,
    LocalPrivacy,
    PoissonSampler,
    StreamKey,
    local_round,
)
from .models import Architecture, Model, accuracy, init_model, mean_loss
from .partition import Policy, make_plan


class FederationSetupError(ValueError):
    """Configuration rejected before any training started."""


SAMPLER_KINDS = ("poisson", "fixed-size")


@dataclass(frozen=True)
class ClientPrivacy:
    """Privacy settings for one client slot.

    delta defaults to 1 / shard size when left as None. target, if given,
    is cross-checked against the accountant at setup: the configured sigma
    must actually achieve the target epsilon over the full run.
    """

    sigma: float
    clip_norm: float
    injection: Injection = Injection.PER_STEP
    sampler: str = "poisson"
    delta: float | None = None
    target: PrivacyTarget | None = None

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if not (self.clip_norm > 0):
            raise ValueError(f"clip norm must be positive, got {self.clip_norm}")
        if self.sampler not in SAMPLER_KINDS:
            raise ValueError(
                f"sampler must be one of {SAMPLER_KINDS}, got {self.sampler!r}"
            )
        if self.delta is not None and not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    def local(self) -> LocalPrivacy:
        return LocalPrivacy(self.sigma, self.clip_norm, self.injection)


def uniform_clients(k: int, **kwargs) -> tuple[ClientPrivacy, ...]:
    """The same ClientPrivacy repeated for every client slot."""
    return tuple(ClientPrivacy(**kwargs) for _ in range(k))


@dataclass(frozen=True)
class FederationConfig:
    clients: int
    rounds: int
    architecture: Architecture
    policy: Policy
    batch_size: int
    learning_rate: float
    client_privacy: tuple[ClientPrivacy, ...]
    local_epochs: int = 1
    seed: int = 0
    test_fraction: float = 0.2
    workers: int = 1

    def __post_init__(self):
        if self.clients < 1 or self.rounds < 1 or self.local_epochs < 1:
            raise ValueError("clients, rounds, local_epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (self.learning_rate > 0):
            raise ValueError("learning_rate must be positive")
        if len(self.client_privacy) != self.clients:
            raise ValueError(
                f"need one ClientPrivacy per client: "
                f"{len(self.client_privacy)} given for {self.clients} clients"
            )
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class ClientRoundStats:
    client: int
    batch_sizes_min: int
    batch_sizes_mean: float
    batch_sizes_max: int
    skipped_steps: int
    memory_peak_units: int
    shard_accuracy: float
    epsilon_spent: float
    delta: float


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    accuracy: float
    loss: float
    clients: tuple[ClientRoundStats, ...]


@dataclass
class RunRecord:
    rounds: list[RoundRecord] = field(default_factory=list)
    status: str = "done"
    diagnostic: str | None = None

    @property
    def max_accuracy(self) -> float:
        if not self.rounds:
            return float("nan")
        return max(r.accuracy for r in self.rounds)


class RunAborted(RuntimeError):
    """Raised inside a run when an abort was requested at a checkpoint."""


class RunControl:
    """Pause/resume/abort switch checked between rounds.

    checkpoint() blocks while paused and raises RunAborted once an abort
    has been requested; callers on other threads flip the flags.
    """

    def __init__(self):
        self._cond = threading.Condition()
        self._paused = False
        self._aborted = False

    def pause(self):
        with self._cond:
            self._paused = True
            self._cond.notify_all()

    def resume(self):
        with self._cond:
            self._paused = False
            self._cond.notify_all()

    def abort(self):
        with self._cond:
            self._aborted = True
            self._cond.notify_all()

    @property
    def paused(self) -> bool:
        with self._cond:
            return self._paused

    @property
    def aborted(self) -> bool:
        with self._cond:
            return self._aborted

    def checkpoint(self):
        with self._cond:
            while self._paused and not self._aborted:
                self._cond.wait()
            if self._aborted:
                raise RunAborted("abort requested")


# ---------------------------------------------------------------------------
# aggregation and evaluation
# ---------------------------------------------------------------------------


def fed_avg(client_params, client_sizes) -> np.ndarray:
    """Average client parameter vectors weighted by shard sizes."""
    params = [np.asarray(p, dtype=float) for p in client_params]
    if not params:
        raise ValueError("need at least one client")
    shape = params[0].shape
    if any(p.shape != shape or p.ndim != 1 for p in params):
        raise ValueError("client parameter vectors must share one flat shape")
    sizes = np.asarray(client_sizes, dtype=float)
    if sizes.shape != (len(params),) or np.any(sizes <= 0):
        raise ValueError("need one positive size per client")
    weights = sizes / sizes.sum()
    return (np.stack(params) * weights[:, None]).sum(axis=0)


def evaluate(model: Model, X, y) -> float:
    """Fraction of correct argmax predictions on the test set."""
    return accuracy(model, X, y)


# ---------------------------------------------------------------------------
# the round loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _ClientSetup:
    index: int
    X: np.ndarray
    y: np.ndarray
    sampler: object
    privacy: ClientPrivacy
    steps_per_round: int
    delta: float
    curve: RdpCurve | None  # None when sigma is zero

    def compositions(self, rounds_done: int) -> int:
        # per-round injection composes once per round; per-step composes
        # over every sampled step (steps_per_round already includes epochs)
        if self.privacy.injection is Injection.PER_ROUND:
            return rounds_done
        return rounds_done * self.steps_per_round

    def epsilon_after(self, rounds_done: int) -> float:
        if self.curve is None:
            return math.inf
        n = self.compositions(rounds_done)
        if n == 0:
            return 0.0
        return rdp_to_dp(compose(self.curve, n), self.delta)[0]


def _build_clients(config: FederationConfig, Xtr, ytr) -> list[_ClientSetup]:
    plan = make_plan(len(ytr), config.clients, config.policy, config.seed)
    clients = []
    for i, idx in enumerate(plan.assignments):
        privacy = config.client_privacy[i]
        n_i = idx.size
        if config.batch_size > n_i:
            raise FederationSetupError(
                f"client {i} holds {n_i} records, fewer than the batch size "
                f"{config.batch_size}"
            )
        if privacy.sampler == "fixed-size":
            sampler = FixedSizeSampler(config.batch_size)
        else:
            sampler = PoissonSampler(config.batch_size / n_i)
        steps_per_round = config.local_epochs * math.ceil(n_i / config.batch_size)
        delta = privacy.delta if privacy.delta is not None else 1.0 / n_i
        curve = None
        if privacy.sigma > 0:
            curve = scheme_rdp(privacy.sigma, sampler.matching_scheme(n_i))
        setup = _ClientSetup(
            i, Xtr[idx], ytr[idx], sampler, privacy, steps_per_round, delta, curve
        )
        if privacy.target is not None:
            achieved = setup.epsilon_after(config.rounds)
            if achieved > privacy.target.epsilon * 1.01:
                raise FederationSetupError(
                    f"client {i}: sigma {privacy.sigma} spends epsilon "
                    f"{achieved:.4g} over the run, above its target "
                    f"{privacy.target.epsilon:g}"
                )
        clients.append(setup)
    return clients


def run_federation(config: FederationConfig, X, y, control: RunControl | None = None,
                   on_round=None) -> RunRecord:
    """Run the federation; returns the record even when aborted early.

    on_round, if given, is called with each RoundRecord as it is produced.
    control, if given, is consulted between rounds for pause/abort.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    Xtr, ytr, Xte, yte = train_test_split(
        X, y, config.test_fraction, seed=config.seed
    )
    try:
        clients = _build_clients(config, Xtr, ytr)
    except ValueError as exc:
        raise FederationSetupError(str(exc)) from exc

    model = init_model(config.architecture, seed=config.seed)
    record = RunRecord()

    def train_one(setup: _ClientSetup, round_index: int):
        return local_round(
            model, setup.X, setup.y, setup.sampler, setup.privacy.local(),
            config.learning_rate, setup.steps_per_round,
            StreamKey(config.seed, setup.index, round_index),
        )

    for round_index in range(1, config.rounds + 1):
        try:
            if control is not None:
                control.checkpoint()
            if config.workers > 1:
                with ThreadPoolExecutor(max_workers=config.workers) as pool:
                    results = list(
                        pool.map(lambda s: train_one(s, round_index), clients)
                    )
            else:
                results = [train_one(s, round_index) for s in clients]
        except RunAborted:
            record.status = "aborted"
            record.diagnostic = f"aborted by request before round {round_index}"
            return record
        except ValueError as exc:
            record.status = "aborted"
            record.diagnostic = f"client failure in round {round_index}: {exc}"
            return record

        sizes = [c.y.size for c in clients]
        model = model.with_parameters(
            fed_avg([r.parameters for r in results], sizes)
        )
        stats = []
        for setup, result in zip(clients, results):
            batch_sizes = result.batch_sizes
            stats.append(ClientRoundStats(
                client=setup.index,
                batch_sizes_min=int(batch_sizes.min()),
                batch_sizes_mean=float(batch_sizes.mean()),
                batch_sizes_max=int(batch_sizes.max()),
                skipped_steps=result.skipped_steps,
                memory_peak_units=int(
                    config.architecture.param_count + batch_sizes.max()
                ),
                shard_accuracy=evaluate(model, setup.X, setup.y),
                epsilon_spent=setup.epsilon_after(round_index),
                delta=setup.delta,
            ))
        record.rounds.append(RoundRecord(
            round_index=round_index,
            accuracy=evaluate(model, Xte, yte),
            loss=mean_loss(model, Xte, yte),
            clients=tuple(stats),
        ))
        if on_round is not None:
            on_round(record.rounds[-1])
    return record
