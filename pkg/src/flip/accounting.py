"""Renyi-DP accounting for subsampled Gaussian mechanisms.

Everything here is a pure function of its inputs. Curves live on a grid of
orders; composition multiplies, conversion minimizes over the grid, and
calibration bisects the noise multiplier until a target epsilon is met from
the conservative side.

Two subsampling schemes are supported:

* Poisson sampling (add/remove adjacency): each record joins a step's batch
  independently with probability ``rate``. The per-step curve has the
  closed-form integer-order expansion implemented in
  :func:`poisson_subsampled_rdp`.
* Fixed-size sampling (replace-one by default): exactly ``batch_size`` of
  ``dataset_size`` records per step. The per-step curve is the worse of the
  two Renyi directions between a unit Gaussian and a subsampling mixture,
  evaluated by numerical quadrature in :func:`fixed_size_rdp`.

All probability arithmetic is done in log space.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

DEFAULT_ORDERS = np.arange(2, 257)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# keep logC tables around; calibration re-evaluates the same grid dozens of times
_LOG_BINOM_CACHE: dict[bytes, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


class AccountingError(Exception):
    """Base class for accountant failures."""


class CalibrationError(AccountingError):
    """Raised when no sigma inside the bracket can meet the target."""


class QuadratureError(AccountingError):
    """Raised when grid refinement fails to reach the requested tolerance."""


class Adjacency(enum.Enum):
    ADD_REMOVE = "add-remove"
    REPLACE_ONE = "replace-one"

    @property
    def shift(self) -> float:
        # worst-case mean separation, in units of the clipping norm
        return 2.0 if self is Adjacency.REPLACE_ONE else 1.0


@dataclass(frozen=True)
class PrivacyTarget:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon}")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class PoissonScheme:
    """Poisson subsampling at the given per-record inclusion rate."""

    rate: float
    adjacency: Adjacency = Adjacency.ADD_REMOVE

    def __post_init__(self):
        if not (0.0 < self.rate <= 1.0):
            raise ValueError(f"sampling rate must lie in (0, 1], got {self.rate}")


@dataclass(frozen=True)
class FixedSizeScheme:
    """Fixed-size minibatches: exactly batch_size of dataset_size records."""

    batch_size: int
    dataset_size: int
    adjacency: Adjacency = Adjacency.REPLACE_ONE

    def __post_init__(self):
        if not (1 <= self.batch_size <= self.dataset_size):
            raise ValueError(
                f"need 1 <= batch_size <= dataset_size, got "
                f"{self.batch_size} of {self.dataset_size}"
            )

    @property
    def rate(self) -> float:
        return self.batch_size / self.dataset_size


class RdpCurve:
    """Renyi divergence values over a grid of orders for a mechanism.

    Composition over identical steps is tracked as an exact integer
    multiplier rather than baked into the floats: compose(c, a + b) and
    compose(c, a) + compose(c, b) are then the same curve bit for bit,
    which plain elementwise multiplication cannot guarantee (the
    distributive law does not survive rounding).
    """

    __slots__ = ("orders", "_base", "steps")

    def __init__(self, orders, values, steps: int = 1):
        orders = np.asarray(orders, dtype=float)
        values = np.asarray(values, dtype=float)
        if orders.ndim != 1 or orders.size == 0:
            raise ValueError("orders must be a non-empty 1-d array")
        if values.shape != orders.shape:
            raise ValueError("orders and values must have the same length")
        if np.any(orders <= 1.0):
            raise ValueError("all orders must exceed 1")
        if not np.all(np.isfinite(values)):
            raise ValueError("curve values must be finite")
        if np.any(values < -1e-12):
            raise ValueError("curve values must be nonnegative")
        diffs = np.diff(values)
        slack = np.maximum(1e-12, 1e-9 * np.abs(values[1:]))
        if np.any(diffs < -slack):
            raise ValueError("Renyi curve must be nondecreasing in the order")
        if not isinstance(steps, (int, np.integer)) or steps < 1:
            raise ValueError(f"steps must be a positive integer, got {steps}")
        self.orders = orders
        self._base = values
        self.steps = int(steps)

    @property
    def values(self) -> np.ndarray:
        if self.steps == 1:
            return self._base
        return self._base * self.steps

    def __add__(self, other) -> "RdpCurve":
        if not isinstance(other, RdpCurve):
            return NotImplemented
        if not np.array_equal(self.orders, other.orders):
            raise ValueError("cannot add curves on different order grids")
        if self._base is other._base or np.array_equal(self._base, other._base):
            return RdpCurve(self.orders, self._base, self.steps + other.steps)
        return RdpCurve(self.orders, self.values + other.values)

    def __len__(self) -> int:
        return int(self.orders.size)

    def __repr__(self) -> str:
        return (
            f"RdpCurve(orders={self.orders[0]:g}..{self.orders[-1]:g}"
            f" n={len(self)} steps={self.steps})"
        )


@dataclass(frozen=True)
class CalibrationResult:
    sigma: float
    achieved_epsilon: float
    best_order: float
    steps: int


def _as_orders(orders, integer=False) -> np.ndarray:
    arr = np.asarray(orders, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("orders must be a non-empty 1-d array")
    if np.any(~np.isfinite(arr)) or np.any(arr <= 1.0):
        raise ValueError("all orders must be finite and exceed 1")
    if np.any(np.diff(arr) <= 0):
        raise ValueError("orders must be strictly increasing")
    if integer and np.any(arr != np.floor(arr)):
        raise ValueError("this accountant requires integer orders")
    return arr


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not (math.isfinite(sigma) and sigma > 0):
        raise ValueError(f"sigma must be positive and finite, got {sigma}")
    return sigma


def gaussian_rdp(sigma, orders=DEFAULT_ORDERS) -> RdpCurve:
    """Gaussian mechanism at sensitivity 1: R(alpha) = alpha / (2 sigma^2)."""
    sigma = _check_sigma(sigma)
    orders = _as_orders(orders)
    return RdpCurve(orders, orders / (2.0 * sigma * sigma))


def _log_binom_table(orders: np.ndarray):
    key = orders.tobytes()
    hit = _LOG_BINOM_CACHE.get(key)
    if hit is not None:
        return hit
    amax = int(orders[-1])
    j = np.arange(amax + 1, dtype=float)
    a = orders[:, None]
    logc = gammaln(a + 1.0) - gammaln(j[None, :] + 1.0) - gammaln(a - j[None, :] + 1.0)
    mask = j[None, :] > a
    logc[mask] = -np.inf
    if len(_LOG_BINOM_CACHE) > 8:
        _LOG_BINOM_CACHE.clear()
    _LOG_BINOM_CACHE[key] = (logc, j, mask)
    return logc, j, mask


def poisson_subsampled_rdp(sigma, rate, orders=DEFAULT_ORDERS) -> RdpCurve:
    """Per-step RDP of the Poisson-subsampled Gaussian, add/remove adjacency.

    Integer-order expansion, evaluated in log space:

        R(a) = ln( sum_{j=0..a} C(a,j) (1-rate)^(a-j) rate^j e^{j(j-1)/(2 sigma^2)} ) / (a-1)

    At rate 1 this reduces exactly to the Gaussian base case.
    """
    sigma = _check_sigma(sigma)
    if not (0.0 < rate <= 1.0):
        raise ValueError(f"sampling rate must lie in (0, 1], got {rate}")
    orders = _as_orders(orders, integer=True)
    if orders[0] < 2:
        raise ValueError("integer orders must start at 2 or above")
    if rate == 1.0:
        return gaussian_rdp(sigma, orders)
    logc, j, mask = _log_binom_table(orders)
    terms = (
        logc
        + j[None, :] * math.log(rate)
        + (orders[:, None] - j[None, :]) * math.log1p(-rate)
        + (j * (j - 1.0))[None, :] / (2.0 * sigma * sigma)
    )
    terms = np.where(mask, -np.inf, terms)
    values = logsumexp(terms, axis=1) / (orders - 1.0)
    return RdpCurve(orders, np.maximum(values, 0.0))


def _log_mixture_density(u: np.ndarray, rate: float, shift: float) -> np.ndarray:
    # log of (1-rate) phi(u) + rate phi(u - shift), phi standard normal
    shifted = -0.5 * (u - shift) ** 2 - _LOG_SQRT_2PI
    if rate == 1.0:
        return shifted
    base = -0.5 * u * u - _LOG_SQRT_2PI
    return np.logaddexp(math.log1p(-rate) + base, math.log(rate) + shifted)


def _renyi_on_grid(orders, rate, shift, half_width, step):
    """Trapezoid evaluation of both Renyi directions on one shared grid."""
    count = int(math.ceil(2.0 * half_width / step))
    u = np.linspace(-half_width, half_width, count + 1)
    log_p = _log_mixture_density(u, rate, shift)
    log_q = -0.5 * u * u - _LOG_SQRT_2PI
    log_w = np.full(u.shape, math.log((2.0 * half_width) / count))
    log_w[0] -= math.log(2.0)
    log_w[-1] -= math.log(2.0)
    # bound the (orders x points) temporaries to a few dozen MB
    chunk = int(max(1, min(32, 4_000_000 // (count + 1))))
    fwd = np.empty(orders.size)
    rev = np.empty(orders.size)
    for lo in range(0, orders.size, chunk):
        a = orders[lo : lo + chunk, None]
        fwd[lo : lo + chunk] = logsumexp(a * log_p + (1.0 - a) * log_q + log_w, axis=1)
        rev[lo : lo + chunk] = logsumexp(a * log_q + (1.0 - a) * log_p + log_w, axis=1)
    denom = orders - 1.0
    return fwd / denom, rev / denom


def _mixture_renyi_both(orders, rate, shift, rel_tol=1e-8, max_refinements=6):
    """Both directions of D_alpha(mixture || base), refined until stable.

    The alpha-tilted integrand concentrates near u = (2 alpha - 1) * shift,
    so the window is sized from the largest order rather than a fixed
    multiple of sigma. Grid halving continues until both directions move by
    less than rel_tol, which is the convergence contract.
    """
    amax = float(orders[-1])
    s = abs(shift)
    half_width = (2.0 * amax + 1.0) * max(s, 1.0) + 10.0
    # the step resolves the narrowest feature: the crossover between mixture
    # branches, of width ~1/s. Past s = 8 that crossover region sits at least
    # exp(-s^2/8) below the dominant component peaks and stops contributing
    # at double precision, so resolution is capped there; the refinement
    # drift check below remains the backstop either way.
    step = min(0.4, 1.0 / (2.5 * min(max(1.0, s), 8.0)))
    fwd, rev = _renyi_on_grid(orders, rate, shift, half_width, step)
    for _ in range(max_refinements):
        step *= 0.5
        fwd2, rev2 = _renyi_on_grid(orders, rate, shift, half_width, step)
        # drift tolerance is relative with an absolute floor: when the shift
        # is tiny the divergences sit near 1e-11 and the refinement residue
        # is float noise, so a purely relative criterion can never be met
        tol = np.maximum(
            rel_tol * (np.maximum(np.abs(fwd2), np.abs(rev2)) + 1e-300), 1e-12
        )
        settled = np.all(np.abs(fwd2 - fwd) <= tol) and np.all(
            np.abs(rev2 - rev) <= tol
        )
        fwd, rev = fwd2, rev2
        if settled:
            return np.maximum(fwd, 0.0), np.maximum(rev, 0.0)
    raise QuadratureError(
        f"quadrature did not reach relative tolerance {rel_tol:g} "
        f"(rate={rate:g}, shift={shift:g}, final step={step:g})"
    )


def mixture_rdp(sigma, rate, shift=1.0, orders=DEFAULT_ORDERS, direction="forward",
                rel_tol=1e-8) -> RdpCurve:
    """Renyi curve of the subsampling mixture by direct quadrature.

    This is the oracle for the closed-form accountants: at shift 1 the
    forward direction equals poisson_subsampled_rdp. direction is one of
    "forward" (mixture against base), "reverse", or "max".
    """
    sigma = _check_sigma(sigma)
    if not (0.0 < rate <= 1.0):
        raise ValueError(f"sampling rate must lie in (0, 1], got {rate}")
    orders = _as_orders(orders)
    if direction not in ("forward", "reverse", "max"):
        raise ValueError(f"unknown direction {direction!r}")
    s = shift / sigma
    if rate == 1.0:
        # mixture collapses to a shifted Gaussian; both directions coincide
        return RdpCurve(orders, orders * (s * s) / 2.0)
    fwd, rev = _mixture_renyi_both(orders, rate, s, rel_tol=rel_tol)
    if direction == "forward":
        vals = fwd
    elif direction == "reverse":
        vals = rev
    else:
        vals = np.maximum(fwd, rev)
    return RdpCurve(orders, vals)


def fixed_size_rdp(sigma, batch_size, dataset_size, adjacency=Adjacency.REPLACE_ONE,
                   orders=DEFAULT_ORDERS, rel_tol=1e-8) -> RdpCurve:
    """Per-step RDP of the fixed-size-minibatch Gaussian.

    The curve is max(D_alpha(mix || base), D_alpha(base || mix)) where base
    is Normal(0, sigma^2) and mix = (1-rate) base + rate Normal(shift,
    sigma^2), rate = batch_size / dataset_size. The shift is 2 for
    replace-one adjacency (covering both adjacency relations) and 1 for the
    add/remove-only mode.
    """
    scheme = FixedSizeScheme(batch_size, dataset_size, adjacency)
    return mixture_rdp(
        sigma, scheme.rate, shift=adjacency.shift, orders=orders,
        direction="max", rel_tol=rel_tol,
    )


def compose(curve: RdpCurve, steps: int) -> RdpCurve:
    """RDP composes additively across identical steps."""
    if not isinstance(steps, (int, np.integer)) or steps < 1:
        raise ValueError(f"steps must be a positive integer, got {steps}")
    return RdpCurve(curve.orders, curve._base, curve.steps * int(steps))


def rdp_to_dp(curve: RdpCurve, delta: float) -> tuple[float, float]:
    """Convert a composed curve to (epsilon, best_order) at the given delta.

    Classic conversion: epsilon = min over orders of
    R(alpha) + ln(1/delta) / (alpha - 1).
    """
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if len(curve) == 0:
        raise ValueError("cannot convert an empty curve")
    eps = curve.values + math.log(1.0 / delta) / (curve.orders - 1.0)
    i = int(np.argmin(eps))
    return float(eps[i]), float(curve.orders[i])


def scheme_rdp(sigma, scheme, orders=None) -> RdpCurve:
    """Per-step curve for either subsampling scheme at its adjacency."""
    if isinstance(scheme, PoissonScheme):
        if scheme.adjacency is Adjacency.ADD_REMOVE:
            return poisson_subsampled_rdp(
                sigma, scheme.rate, DEFAULT_ORDERS if orders is None else orders
            )
        # replace-one Poisson has no closed form here; use the same
        # worst-direction mixture bound as the fixed-size accountant
        return mixture_rdp(
            sigma, scheme.rate, shift=scheme.adjacency.shift,
            orders=DEFAULT_ORDERS if orders is None else orders, direction="max",
        )
    if isinstance(scheme, FixedSizeScheme):
        return fixed_size_rdp(
            sigma, scheme.batch_size, scheme.dataset_size, scheme.adjacency,
            DEFAULT_ORDERS if orders is None else orders,
        )
    raise TypeError(f"unknown subsampling scheme: {scheme!r}")


def epsilon_for_sigma(sigma, scheme, steps, target_delta, orders=None) -> tuple[float, float]:
    """Achieved (epsilon, best_order) after composing steps at this sigma."""
    curve = scheme_rdp(sigma, scheme, orders)
    return rdp_to_dp(compose(curve, steps), target_delta)


def calibrate_sigma(target: PrivacyTarget, scheme, steps, orders=None,
                    bracket=(1e-2, 1e3), max_iters=60, rel_tol=1e-3) -> CalibrationResult:
    """Find the smallest sigma in the bracket meeting the target epsilon.

    Bisection over sigma. The returned sigma is on the conservative side:
    achieved epsilon lies in [target*(1 - rel_tol), target], never above.
    Raises CalibrationError naming the offending bracket endpoint when the
    window cannot be reached.
    """
    if not isinstance(steps, (int, np.integer)) or steps < 1:
        raise ValueError(f"steps must be a positive integer, got {steps}")
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (0 < lo < hi):
        raise ValueError(f"bad bracket {bracket}")
    goal = target.epsilon
    floor = goal * (1.0 - rel_tol)
    grid = DEFAULT_ORDERS if orders is None else _as_orders(orders)

    def achieved(sig, on=grid):
        return epsilon_for_sigma(sig, scheme, steps, target.delta, on)

    eps_hi, order_hi = achieved(hi)
    if eps_hi > goal:
        raise CalibrationError(
            f"target epsilon {goal:g} is unreachable: sigma at the upper "
            f"bracket endpoint {hi:g} still yields epsilon {eps_hi:.6g}"
        )
    # The least-noise endpoint is probed on the smallest few orders only. A
    # minimum over a subset bounds the full-grid minimum from above, so
    # falling below the window here proves the full grid does too, and it
    # skips the one evaluation whose quadrature window is widest by far.
    eps_lo, _ = achieved(lo, on=grid[: min(5, len(grid))])
    if eps_lo < floor:
        raise CalibrationError(
            f"target epsilon {goal:g} is unreachable: sigma at the lower "
            f"bracket endpoint {lo:g} already yields epsilon {eps_lo:.6g}, "
            f"below the calibration window [{floor:.6g}, {goal:g}]"
        )
    for _ in range(max_iters):
        if eps_hi >= floor:
            return CalibrationResult(hi, eps_hi, order_hi, int(steps))
        mid = 0.5 * (lo + hi)
        eps_mid, order_mid = achieved(mid)
        if eps_mid <= goal:
            hi, eps_hi, order_hi = mid, eps_mid, order_mid
        else:
            lo = mid
    raise CalibrationError(
        f"bisection did not converge to the window [{floor:.6g}, {goal:g}] "
        f"within {max_iters} iterations (last sigma {hi:g})"
    )


def accounted_steps(dataset_size: int, batch_size: int, rounds: int,
                    local_epochs: int = 1) -> int:
    """Step-count convention: rounds x epochs x ceil(dataset / batch)."""
    if dataset_size < 1 or batch_size < 1 or rounds < 1 or local_epochs < 1:
        raise ValueError("dataset_size, batch_size, rounds, local_epochs must be >= 1")
    return rounds * local_epochs * math.ceil(dataset_size / batch_size)
