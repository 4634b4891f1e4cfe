"""Client-local differentially private SGD.

Per-example gradients are clipped to an l2 ball, summed, noised with a
Gaussian whose scale is sigma times the clipping norm, and averaged over
the realized batch. Noise can be injected at every step or once per round
on the round's parameter delta.

Randomness is derived per (client, round, step) from the master seed, so a
run is reproducible no matter how client work is scheduled.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .accounting import FixedSizeScheme, PoissonScheme
from .models import Model


class Injection(enum.Enum):
    PER_STEP = "per-step"
    PER_ROUND = "per-round"


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PoissonSampler:
    """Every record joins the batch independently with this probability."""

    rate: float

    def __post_init__(self):
        if not (0.0 < self.rate <= 1.0):
            raise ValueError(f"sampling rate must lie in (0, 1], got {self.rate}")

    def draw(self, n: int, rng) -> np.ndarray:
        return np.flatnonzero(rng.random(n) < self.rate)

    def nominal_size(self, n: int) -> int:
        return max(1, int(round(self.rate * n)))

    def matching_scheme(self, n: int) -> PoissonScheme:
        return PoissonScheme(self.rate)


@dataclass(frozen=True)
class FixedSizeSampler:
    """Exactly batch_size records, drawn uniformly without replacement."""

    batch_size: int

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")

    def draw(self, n: int, rng) -> np.ndarray:
        if self.batch_size > n:
            raise ValueError(f"cannot draw {self.batch_size} of {n} records")
        return rng.choice(n, size=self.batch_size, replace=False)

    def nominal_size(self, n: int) -> int:
        return self.batch_size

    def matching_scheme(self, n: int) -> FixedSizeScheme:
        return FixedSizeScheme(self.batch_size, n)


Sampler = PoissonSampler | FixedSizeSampler


@dataclass(frozen=True)
class MemoryProfile:
    """Abstract memory model: base units plus one unit per batched example."""

    per_step_batch_sizes: np.ndarray
    base_units: int = 0

    @property
    def peak_units(self) -> int:
        sizes = self.per_step_batch_sizes
        return int(self.base_units + (sizes.max() if sizes.size else 0))

    @property
    def constant(self) -> bool:
        sizes = self.per_step_batch_sizes
        return sizes.size == 0 or bool(np.all(sizes == sizes[0]))


def sample_minibatches(sampler: Sampler, n: int, steps: int, rng, base_units=0):
    """Draw `steps` batches over range(n); returns (batches, MemoryProfile)."""
    if steps < 1:
        raise ValueError(f"steps must be positive, got {steps}")
    batches = [sampler.draw(n, rng) for _ in range(steps)]
    sizes = np.array([b.size for b in batches], dtype=int)
    return batches, MemoryProfile(sizes, base_units)


def expected_poisson_peak(batch_size: int, rate: float, steps: int) -> float:
    """Mean peak batch size over `steps` Poisson draws with mean batch_size.

    Gaussian-maximum estimate: L + sqrt(2 ln(steps) * L (1 - rate)).
    """
    if batch_size < 1 or steps < 1 or not (0 < rate <= 1):
        raise ValueError("need batch_size >= 1, steps >= 1, rate in (0, 1]")
    spread = 2.0 * math.log(max(steps, 2)) * batch_size * (1.0 - rate)
    return batch_size + math.sqrt(spread)


# ---------------------------------------------------------------------------
# private steps
# ---------------------------------------------------------------------------


def clip_gradient(gradient, clip_norm: float) -> np.ndarray:
    """Scale the vector onto the l2 ball of radius clip_norm if outside it."""
    g = np.asarray(gradient, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient must be finite")
    if not (clip_norm > 0):
        raise ValueError(f"clip norm must be positive, got {clip_norm}")
    return g / max(1.0, float(np.linalg.norm(g)) / clip_norm)


def _clip_rows(grads: np.ndarray, clip_norm: float) -> np.ndarray:
    norms = np.linalg.norm(grads, axis=1)
    if not np.all(np.isfinite(norms)):
        raise ValueError("per-example gradients must be finite")
    scale = np.maximum(1.0, norms / clip_norm)
    clipped = grads / scale[:, None]
    assert np.all(np.linalg.norm(clipped, axis=1) <= clip_norm * (1 + 1e-9))
    return clipped


def noisy_step(model: Model, X, y, clip_norm, sigma, learning_rate, rng) -> Model:
    """One DP-SGD step on the given batch; returns the stepped model.

    The update direction is (sum of clipped per-example gradients plus
    Normal(0, sigma^2 clip_norm^2 I)) divided by the realized batch size.
    With sigma = 0 no randomness is consumed and the step is deterministic.
    """
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("batch must be nonempty")
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    grads = model.architecture.per_example_gradients(model.parameters, X, y)
    total = _clip_rows(grads, clip_norm).sum(axis=0)
    if sigma > 0:
        total = total + rng.normal(0.0, sigma * clip_norm, total.shape)
    return model.with_parameters(
        model.parameters - learning_rate * (total / y.size)
    )


def per_round_inject(update, sigma, clip_norm, batch_size, rng) -> np.ndarray:
    """Add Normal(0, (sigma clip_norm / batch_size)^2) to each coordinate."""
    u = np.asarray(update, dtype=float)
    if batch_size < 1:
        raise ValueError(f"batch_size must be positive, got {batch_size}")
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0:
        return u.copy()
    return u + rng.normal(0.0, sigma * clip_norm / batch_size, u.shape)


# ---------------------------------------------------------------------------
# one client-round
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalPrivacy:
    """Noise configuration one client trains under."""

    sigma: float
    clip_norm: float
    injection: Injection = Injection.PER_STEP
    # Where per-round noise lands: the round's parameter delta or the final
    # weights. For additive noise both produce start + delta + noise; the
    # flag is configuration surface only and is recorded with the run.
    round_noise_on: str = "delta"

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if not (self.clip_norm > 0):
            raise ValueError(f"clip norm must be positive, got {self.clip_norm}")
        if self.round_noise_on not in ("delta", "weights"):
            raise ValueError("round_noise_on must be 'delta' or 'weights'")


@dataclass(frozen=True)
class StreamKey:
    """RNG lineage for one client-round; children are per-(step, purpose)."""

    master_seed: int
    client: int
    round_index: int

    def _rng(self, *tail) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(
                (self.master_seed, self.client, self.round_index) + tail
            )
        )

    def batch_rng(self, step: int):
        return self._rng(step, 0)

    def noise_rng(self, step: int):
        return self._rng(step, 1)

    def round_rng(self):
        return self._rng(2)


@dataclass(frozen=True)
class LocalRoundResult:
    parameters: np.ndarray
    batch_sizes: np.ndarray
    skipped_steps: int


def local_round(model: Model, X, y, sampler: Sampler, privacy: LocalPrivacy,
                learning_rate: float, steps: int, stream: StreamKey) -> LocalRoundResult:
    """Run `steps` DP-SGD steps on this client's shard.

    Empty Poisson batches are skipped but still occupy their step slot, so
    the privacy accounting (which composes over the full step count) stays
    conservative.
    """
    if steps < 1:
        raise ValueError(f"steps must be positive, got {steps}")
    n = np.asarray(y).size
    start = model.parameters
    current = model
    sizes = np.empty(steps, dtype=int)
    skipped = 0
    per_step_sigma = privacy.sigma if privacy.injection is Injection.PER_STEP else 0.0
    for step in range(steps):
        idx = sampler.draw(n, stream.batch_rng(step))
        sizes[step] = idx.size
        if idx.size == 0:
            skipped += 1
            continue
        current = noisy_step(
            current, X[idx], y[idx], privacy.clip_norm, per_step_sigma,
            learning_rate, stream.noise_rng(step),
        )
    if privacy.injection is Injection.PER_ROUND and privacy.sigma > 0:
        delta = current.parameters - start
        noised = per_round_inject(
            delta, privacy.sigma, privacy.clip_norm,
            sampler.nominal_size(n), stream.round_rng(),
        )
        current = current.with_parameters(start + noised)
    return LocalRoundResult(current.parameters, sizes, skipped)
