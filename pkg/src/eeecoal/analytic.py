"""Closed-form energy and delay models for EEE frame coalescing.

Conventions used throughout the package:

* all times are microseconds, all rates are frames per microsecond;
  conversion from bits/s happens at the boundary (see :mod:`eeecoal.traffic`),
* the link sleeps through an uninterruptible transition of length ``ts``,
  wakes through one of length ``tw``, and burns idle power ``phi_off``
  (relative to active) while in low-power idle,
* the controller-parameter solvers return ``nan`` as the "infeasible"
  sentinel (delay target unreachable); use :func:`is_infeasible` to test.

All functions here are pure and stateless.  The scalar ones are numba-jitted
so the simulator kernel can call them per coalescing cycle without leaving
compiled code; with ``EEECOAL_NO_NUMBA=1`` they run as plain Python.
"""

import math
from dataclasses import dataclass

from ._accel import njit


def is_infeasible(x: float) -> bool:
    """True if a solver returned the infeasible sentinel."""
    return math.isnan(x)


@dataclass(frozen=True)
class EeeParams:
    """Physical constants of one EEE interface.

    Defaults are the standard values for a 10GBASE-T port: the LPI mode
    draws 10% of active power, and mode transitions take 2.88 / 4.48 us.
    """

    phi_off: float = 0.1
    ts: float = 2.88
    tw: float = 4.48
    line_rate: float = 10e9  # bits per second

    def __post_init__(self):
        if not 0.0 <= self.phi_off < 1.0:
            raise ValueError(f"phi_off must be in [0, 1), got {self.phi_off}")
        if self.ts <= 0 or self.tw <= 0:
            raise ValueError("transition times ts and tw must be positive")
        if self.line_rate <= 0:
            raise ValueError("line_rate must be positive")

    @property
    def rate_bits_per_us(self) -> float:
        return self.line_rate * 1e-6


@dataclass(frozen=True)
class TrafficStats:
    """First and second moments of the arrival and service processes.

    ``lam`` and ``mu`` are frame rates (frames/us); the variances are of the
    interarrival and service *times* (us^2).
    """

    lam: float
    mu: float
    var_interarrival: float
    var_service: float

    def __post_init__(self):
        if self.lam <= 0 or self.mu <= 0:
            raise ValueError("lam and mu must be positive")
        if self.lam / self.mu >= 1.0:
            raise ValueError(
                f"unstable system: utilization {self.lam / self.mu:.4f} >= 1"
            )
        if self.var_interarrival < 0 or self.var_service < 0:
            raise ValueError("variances must be nonnegative")

    @property
    def rho(self) -> float:
        return self.lam / self.mu


@dataclass(frozen=True)
class CoalescingOutcome:
    """Predicted steady-state behaviour of one coalescing configuration."""

    t_off_mean: float     # mean LPI residency per cycle, us
    mean_delay: float     # mean queuing delay, us
    energy_ratio: float   # consumption relative to a power-unaware port


@dataclass(frozen=True)
class BoundResult:
    """Sleep-time upper bound and the energy lower bound it implies."""

    t_off_upper: float
    energy_lower: float


# --------------------------------------------------------------------------
# baseline delay
# --------------------------------------------------------------------------

@njit(cache=True)
def w0_general(lam, mu, var_interarrival, var_service):
    """Coalescing-independent baseline delay term of the GI/G/1 model.

    Equals the classic single-server mean wait plus one mean interarrival
    time; for Poisson arrivals it is exact.
    """
    if lam <= 0.0 or mu <= 0.0:
        raise ValueError("lam and mu must be positive")
    rho = lam / mu
    if rho >= 1.0:
        raise ValueError("utilization must be < 1")
    if var_interarrival < 0.0 or var_service < 0.0:
        raise ValueError("variances must be nonnegative")
    return (lam * lam * (var_interarrival + var_service) + (1.0 - rho) ** 2) / (
        2.0 * lam * (1.0 - rho)
    )


def w0_exact(stats: TrafficStats) -> float:
    """Baseline delay from full traffic moments."""
    return w0_general(stats.lam, stats.mu, stats.var_interarrival, stats.var_service)


@njit(cache=True)
def w0_poisson_deterministic(lam, rho):
    """Baseline delay assuming Poisson arrivals and fixed-size frames.

    The form the adaptive controllers use: only the arrival and service
    rates need to be measured.
    """
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    if rho < 0.0 or rho >= 1.0:
        raise ValueError("rho must be in [0, 1)")
    return (1.0 + (1.0 - rho) ** 2) / (2.0 * lam * (1.0 - rho))


# --------------------------------------------------------------------------
# energy
# --------------------------------------------------------------------------

@njit(cache=True)
def energy_ratio_scalar(phi_off, ts, tw, rho, t_off_mean):
    if t_off_mean < 0.0:
        raise ValueError("t_off_mean must be >= 0")
    if rho < 0.0 or rho >= 1.0:
        raise ValueError("rho must be in [0, 1)")
    if math.isinf(t_off_mean):
        frac = 1.0
    else:
        frac = t_off_mean / (t_off_mean + ts + tw)
    return 1.0 - (1.0 - phi_off) * (1.0 - rho) * frac


def energy_ratio(params: EeeParams, rho: float, t_off_mean: float) -> float:
    """Energy drawn relative to a port that never sleeps.

    Decreases from 1 (no sleeping) towards the floor
    ``1 - (1 - phi_off) * (1 - rho)`` as the mean sleep time grows.
    """
    return energy_ratio_scalar(params.phi_off, params.ts, params.tw, rho, t_off_mean)


# --------------------------------------------------------------------------
# time-based coalescing (timer of duration v started by the first arrival)
# --------------------------------------------------------------------------

@njit(cache=True)
def toff_time_based(lam, v, ts):
    """Mean LPI residency per cycle for a timer coalescer, Poisson arrivals."""
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    if v <= ts:
        raise ValueError("timer must exceed the sleep transition (v > ts)")
    return 1.0 / lam + v - ts


@njit(cache=True)
def delay_time_based(lam, v, tw, w0):
    """Mean queuing delay for a timer coalescer, Poisson arrivals.

    Accepts v = 0 (wake on first arrival); with tw = 0 as well this reduces
    to the plain no-vacation queue, i.e. w0 - 1/lam.
    """
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    if v < 0.0:
        raise ValueError("timer must be nonnegative")
    x = v + tw
    return w0 + (lam * lam * x * x - 2.0) / (2.0 * lam * (1.0 + lam * x))


# --------------------------------------------------------------------------
# size-based coalescing (wake when qw frames are queued)
# --------------------------------------------------------------------------

@njit(cache=True)
def upper_incomplete_gamma(q, x):
    """Upper incomplete gamma for integer order q >= 1.

    Uses the exact finite series (q-1)! e^-x sum_{k<q} x^k/k!.  Overflows
    for q > 170 where (q-1)! exceeds float64 range; the solvers below use a
    regularized form instead and have no such limit.
    """
    if q < 1:
        raise ValueError("q must be a positive integer")
    if x < 0.0:
        raise ValueError("x must be nonnegative")
    fact = 1.0
    for k in range(1, q):
        fact *= k
    s = 1.0
    term = 1.0
    for k in range(1, q):
        term *= x / k
        s += term
    return fact * math.exp(-x) * s


@njit(cache=True)
def toff_size_based(lam, qw, ts):
    """Mean LPI residency per cycle for a queue-threshold coalescer.

    Mean positive part of (Erlang-qw arrival epoch - ts); evaluated through
    regularized incomplete-gamma sums so large thresholds do not overflow.
    """
    if qw < 1:
        raise ValueError("qw must be >= 1")
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    if ts < 0.0:
        raise ValueError("ts must be nonnegative")
    x = lam * ts
    # s0 = sum_{k<qw} x^k/k!, s1 = s0 + x^qw/qw!
    term = 1.0
    s0 = 1.0
    for k in range(1, qw):
        term *= x / k
        s0 += term
    term *= x / qw
    s1 = s0 + term
    e = math.exp(-x)
    return (qw * e * s1 - x * e * s0) / lam


@njit(cache=True)
def delay_size_based(lam, qw, tw, w0):
    """Mean queuing delay for a queue-threshold coalescer, Poisson arrivals.

    qw may be fractional (>= 1); the root solver evaluates it off the integer
    grid.  qw = 1 coincides exactly with delay_time_based at v = 0.
    """
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    if qw < 1.0:
        raise ValueError("qw must be >= 1")
    a = lam * tw
    return (
        w0
        - (qw - 1.0) / (lam * qw)
        + ((qw + a - 1.0) ** 2 + qw - 3.0) / (2.0 * lam * (qw + a))
    )


@njit(cache=True)
def delay_size_based_approx(lam, qw, tw, w0):
    """Large-threshold approximation of :func:`delay_size_based`."""
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    if qw < 1.0:
        raise ValueError("qw must be >= 1")
    return w0 + (qw + lam * tw - 3.0) / (2.0 * lam)


# --------------------------------------------------------------------------
# controller parameter solvers
# --------------------------------------------------------------------------

@njit(cache=True)
def optimal_timer(tau, lam, tw, w0, ts=0.0):
    """Timer duration whose predicted mean delay equals tau.

    Exact algebraic inverse of :func:`delay_time_based`.  Returns nan when
    the solution does not exceed ``ts`` (the interface would get no LPI
    residency at all, so sleeping should be suspended).
    """
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    d = tau - w0
    v = d - tw + math.sqrt(1.0 + (1.0 + lam * d) ** 2) / lam
    if v <= ts:
        return math.nan
    return v


@njit(cache=True)
def optimal_threshold_approx(tau, lam, tw, w0):
    """Queue threshold for delay tau via the large-threshold approximation.

    Returns nan when the result drops below 1 frame.
    """
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    q = 2.0 * lam * (tau - w0 - tw / 2.0) + 3.0
    if q < 1.0:
        return math.nan
    return q


@njit(cache=True)
def _threshold_cubic_value(q, lam, tw, d):
    a = 2.0 * lam * tw - 2.0 * lam * d - 3.0
    b = lam * lam * tw * tw - 2.0 * lam * lam * tw * d - 4.0 * lam * tw
    c = 2.0 * lam * tw
    return ((q + a) * q + b) * q + c


@njit(cache=True)
def optimal_threshold_cubic(tau, lam, tw, w0):
    """Queue threshold for delay tau as a root of the exact cubic condition.

    Bracketing bisection on [1, 2*lam*tau + 10] to 1e-9; if several roots
    fall in range, the one whose predicted delay is nearest tau wins.
    Returns nan when no root >= 1 exists.
    """
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    d = tau - w0
    lo = 1.0
    hi = 2.0 * lam * tau + 10.0
    nseg = 256
    best = math.nan
    best_dist = math.inf
    x_prev = lo
    f_prev = _threshold_cubic_value(lo, lam, tw, d)
    for k in range(1, nseg + 1):
        x = lo + (hi - lo) * k / nseg
        f = _threshold_cubic_value(x, lam, tw, d)
        root = math.nan
        if f_prev == 0.0:
            root = x_prev
        elif f_prev * f < 0.0:
            a, b = x_prev, x
            fa = f_prev
            while b - a > 1e-9:
                m = 0.5 * (a + b)
                fm = _threshold_cubic_value(m, lam, tw, d)
                if fm == 0.0:
                    a = m
                    b = m
                elif fa * fm < 0.0:
                    b = m
                else:
                    a = m
                    fa = fm
            root = 0.5 * (a + b)
        if not math.isnan(root):
            dist = abs(delay_size_based(lam, root, tw, w0) - tau)
            if dist < best_dist:
                best_dist = dist
                best = root
        x_prev = x
        f_prev = f
    if f_prev == 0.0 and abs(delay_size_based(lam, x_prev, tw, w0) - tau) < best_dist:
        best = x_prev
    return best


# --------------------------------------------------------------------------
# efficiency bounds for a target mean delay
# --------------------------------------------------------------------------

@njit(cache=True)
def toff_upper_bound_scalar(tau, ts, tw, lam, mu, var_i, var_s):
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    w0 = w0_general(lam, mu, var_i, var_s)
    rho = lam / mu
    g = lam * var_i + (1.0 - rho) / lam
    s = tau - w0 + g
    val = (
        tau - ts - tw - w0 + g
        + math.sqrt(s * s + 2.0 * (var_i + var_s) + ((1.0 - rho) / lam) ** 2)
    )
    if val <= 0.0:
        return math.nan
    return val


def toff_upper_bound(tau: float, params: EeeParams, stats: TrafficStats) -> float:
    """Largest mean sleep time compatible with mean delay tau.

    Returns nan when tau is unreachable even without sleeping.
    """
    return toff_upper_bound_scalar(
        tau, params.ts, params.tw,
        stats.lam, stats.mu, stats.var_interarrival, stats.var_service,
    )


def energy_lower_bound(tau: float, params: EeeParams, stats: TrafficStats) -> float:
    """Least possible energy ratio under a mean-delay target tau.

    Infeasible targets map to 1.0 (no sleeping possible, no savings).
    """
    t_up = toff_upper_bound(tau, params, stats)
    if math.isnan(t_up):
        return 1.0
    return energy_ratio(params, stats.rho, t_up)


def delay_energy_bound(tau: float, params: EeeParams, stats: TrafficStats) -> BoundResult:
    """Bundle of the sleep-time upper bound and the energy lower bound."""
    return BoundResult(
        t_off_upper=toff_upper_bound(tau, params, stats),
        energy_lower=energy_lower_bound(tau, params, stats),
    )


# --------------------------------------------------------------------------
# bundled predictions
# --------------------------------------------------------------------------

def time_based_outcome(params: EeeParams, stats: TrafficStats, v: float) -> CoalescingOutcome:
    """Predicted sleep time, delay and energy for a fixed timer."""
    w0 = w0_exact(stats)
    t_off = toff_time_based(stats.lam, v, params.ts)
    return CoalescingOutcome(
        t_off_mean=t_off,
        mean_delay=delay_time_based(stats.lam, v, params.tw, w0),
        energy_ratio=energy_ratio(params, stats.rho, t_off),
    )


def size_based_outcome(params: EeeParams, stats: TrafficStats, qw: int) -> CoalescingOutcome:
    """Predicted sleep time, delay and energy for a fixed queue threshold."""
    w0 = w0_exact(stats)
    t_off = toff_size_based(stats.lam, int(qw), params.ts)
    return CoalescingOutcome(
        t_off_mean=t_off,
        mean_delay=delay_size_based(stats.lam, float(qw), params.tw, w0),
        energy_ratio=energy_ratio(params, stats.rho, t_off),
    )
