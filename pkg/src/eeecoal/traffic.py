"""Synthetic traffic generators and timestamped trace replay.

Arrival processes are renewal processes with exponential (Poisson) or
Pareto interarrivals; frame sizes are fixed or bimodal and drawn
independently of arrivals.  Traces are plain CSV files of
``arrival_time_us,frame_size_bytes`` lines (header optional, ``#`` comments
ignored) so any capture format can be converted with a one-liner.

Generation is deterministic per seed.  Arrival and size draws come from two
independent child generators of the run seed, so the streaming API and the
vectorized array API produce identical frame sequences.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analytic import TrafficStats

ETH_MIN_FRAME = 64
ETH_MAX_FRAME = 1518


@dataclass(frozen=True)
class Frame:
    arrival_time: float  # us
    size: int            # bytes


@dataclass(frozen=True)
class Poisson:
    """Exponential interarrivals with mean 1/lam (lam in frames/us)."""

    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("arrival rate must be positive")


@dataclass(frozen=True)
class Pareto:
    """Pareto-I interarrivals with shape alpha and mean 1/lam.

    The scale is pinned to x_m = (alpha-1)/(alpha*lam) so sweeps stay
    parameterized by offered load.  alpha must exceed 2 for the variance to
    be finite; the third moment is infinite for alpha <= 3, so sample skew
    does not converge (variance does).
    """

    alpha: float
    lam: float

    def __post_init__(self):
        if self.alpha <= 2:
            raise ValueError("Pareto shape alpha must be > 2 for finite variance")
        if self.lam <= 0:
            raise ValueError("arrival rate must be positive")

    @property
    def x_m(self) -> float:
        return (self.alpha - 1.0) / (self.alpha * self.lam)


@dataclass(frozen=True)
class FixedSize:
    size: int

    def __post_init__(self):
        if not ETH_MIN_FRAME <= self.size <= ETH_MAX_FRAME:
            raise ValueError(f"frame size must be in [{ETH_MIN_FRAME}, {ETH_MAX_FRAME}]")


@dataclass(frozen=True)
class BimodalSize:
    """Two-point size mix: small with probability p_small, else large."""

    p_small: float
    small: int
    large: int

    def __post_init__(self):
        if not 0.0 <= self.p_small <= 1.0:
            raise ValueError("p_small must be in [0, 1]")
        for s in (self.small, self.large):
            if not ETH_MIN_FRAME <= s <= ETH_MAX_FRAME:
                raise ValueError(f"frame size must be in [{ETH_MIN_FRAME}, {ETH_MAX_FRAME}]")


@dataclass(frozen=True)
class TrafficSpec:
    """Either a generated (arrival + sizes) source or a trace file."""

    arrival: Poisson | Pareto | None = None
    sizes: FixedSize | BimodalSize | None = None
    trace: str | Path | None = None

    def __post_init__(self):
        if self.trace is not None:
            if self.arrival is not None or self.sizes is not None:
                raise ValueError("a trace spec cannot also carry generators")
        elif self.arrival is None or self.sizes is None:
            raise ValueError("generated specs need both an arrival and a size model")

    @property
    def is_trace(self) -> bool:
        return self.trace is not None


def mean_frame_bits(sizes: FixedSize | BimodalSize) -> float:
    if isinstance(sizes, FixedSize):
        return 8.0 * sizes.size
    return 8.0 * (sizes.p_small * sizes.small + (1.0 - sizes.p_small) * sizes.large)


def rate_to_lambda(rate_bps: float, sizes: FixedSize | BimodalSize) -> float:
    """Offered load in bits/s -> mean arrival rate in frames/us."""
    return rate_bps * 1e-6 / mean_frame_bits(sizes)


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Trace:
    """A loaded trace: arrival times (us, non-decreasing) and sizes (bytes)."""

    times: np.ndarray
    sizes: np.ndarray
    path: str | None = None

    @property
    def n_frames(self) -> int:
        return len(self.times)

    @property
    def total_bytes(self) -> int:
        return int(self.sizes.sum())

    @property
    def mean_rate_bps(self) -> float:
        """Mean offered load: frame rate over the spanned interval times mean size."""
        if self.n_frames < 2:
            return 0.0
        span = float(self.times[-1] - self.times[0])
        if span <= 0:
            return 0.0
        lam = (self.n_frames - 1) / span            # frames/us
        return lam * 8.0 * float(self.sizes.mean()) * 1e6

    def summary(self) -> str:
        return (
            f"{self.n_frames} frames, {self.total_bytes} bytes, "
            f"mean rate {self.mean_rate_bps / 1e9:.4g} Gb/s"
        )


def load_trace(path: str | Path) -> Trace:
    """Parse a trace CSV; malformed lines and decreasing timestamps are errors."""
    times: list[float] = []
    sizes: list[float] = []
    seen_data = False
    with open(path, "r", encoding="utf-8", newline=None) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = [f.strip() for f in line.split(",")]
            if len(fields) != 2:
                raise TraceFormatError(
                    f"{path}: line {lineno}: expected 'arrival_time_us,frame_size_bytes', got {line!r}"
                )
            try:
                t = float(fields[0])
                s = float(fields[1])
            except ValueError:
                if not seen_data:
                    # optional header line
                    continue
                raise TraceFormatError(
                    f"{path}: line {lineno}: non-numeric fields in {line!r}"
                ) from None
            if s <= 0:
                raise TraceFormatError(f"{path}: line {lineno}: frame size must be positive")
            if times and t < times[-1]:
                raise TraceFormatError(
                    f"{path}: line {lineno}: decreasing timestamp {t} after {times[-1]}"
                )
            times.append(t)
            sizes.append(s)
            seen_data = True
    return Trace(
        times=np.asarray(times, dtype=np.float64),
        sizes=np.asarray(sizes, dtype=np.float64),
        path=str(path),
    )


# --------------------------------------------------------------------------
# generation
# --------------------------------------------------------------------------

def _child_rngs(seed) -> tuple[np.random.Generator, np.random.Generator]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    arr_ss, size_ss = ss.spawn(2)
    return np.random.default_rng(arr_ss), np.random.default_rng(size_ss)


def _draw_interarrivals(arrival, rng, n: int) -> np.ndarray:
    if isinstance(arrival, Poisson):
        return rng.exponential(1.0 / arrival.lam, n)
    # Pareto-I by inversion; 1-U keeps the base uniform away from 0
    u = rng.random(n)
    return arrival.x_m * (1.0 - u) ** (-1.0 / arrival.alpha)


def _draw_sizes(sizes, rng, n: int) -> np.ndarray:
    if isinstance(sizes, FixedSize):
        return np.full(n, float(sizes.size))
    small = rng.random(n) < sizes.p_small
    return np.where(small, float(sizes.small), float(sizes.large))


def sample_frames(spec: TrafficSpec, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized draw of n frames: (arrival_times, sizes_bytes)."""
    if spec.is_trace:
        trace = load_trace(spec.trace)
        return trace.times[:n].copy(), trace.sizes[:n].copy()
    if n <= 0:
        raise ValueError("n must be positive")
    rng_a, rng_s = _child_rngs(seed)
    times = np.cumsum(_draw_interarrivals(spec.arrival, rng_a, n))
    return times, _draw_sizes(spec.sizes, rng_s, n)


def sample_frames_until(spec: TrafficSpec, horizon_us: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Draw frames with arrival times <= horizon_us."""
    if spec.is_trace:
        trace = load_trace(spec.trace)
        k = int(np.searchsorted(trace.times, horizon_us, side="right"))
        return trace.times[:k].copy(), trace.sizes[:k].copy()
    if horizon_us <= 0:
        raise ValueError("horizon must be positive")
    rng_a, rng_s = _child_rngs(seed)
    lam = spec.arrival.lam
    chunk = max(1024, int(lam * horizon_us * 1.1) + 1)
    parts = []
    total = 0.0
    count = 0
    while total <= horizon_us:
        ia = _draw_interarrivals(spec.arrival, rng_a, chunk)
        parts.append(ia)
        total += float(ia.sum())
        count += chunk
    times = np.cumsum(np.concatenate(parts))
    k = int(np.searchsorted(times, horizon_us, side="right"))
    return times[:k], _draw_sizes(spec.sizes, rng_s, k)


class FrameStream:
    """Sequential frame source over a spec; iteration yields :class:`Frame`.

    Generated streams are infinite; trace streams raise StopIteration when
    the file is exhausted.
    """

    def __init__(self, spec: TrafficSpec, seed=0):
        self.spec = spec
        self._t = 0.0
        if spec.is_trace:
            self._trace = load_trace(spec.trace)
            self._idx = 0
        else:
            self._trace = None
            self._rng_a, self._rng_s = _child_rngs(seed)

    def __iter__(self):
        return self

    def __next__(self) -> Frame:
        return self.next_frame()

    def next_frame(self) -> Frame:
        if self._trace is not None:
            if self._idx >= self._trace.n_frames:
                raise StopIteration
            f = Frame(float(self._trace.times[self._idx]), int(self._trace.sizes[self._idx]))
            self._idx += 1
            return f
        self._t += float(_draw_interarrivals(self.spec.arrival, self._rng_a, 1)[0])
        size = int(_draw_sizes(self.spec.sizes, self._rng_s, 1)[0])
        return Frame(self._t, size)


def open_stream(spec: TrafficSpec, seed=0) -> FrameStream:
    return FrameStream(spec, seed)


def next_frame(stream: FrameStream) -> Frame:
    return stream.next_frame()


# --------------------------------------------------------------------------
# moments
# --------------------------------------------------------------------------

def theoretical_stats(spec: TrafficSpec, line_rate: float) -> TrafficStats:
    """Exact moments of a generated spec (traces need measured_stats)."""
    if spec.is_trace:
        raise ValueError("theoretical_stats is undefined for traces; use measured_stats")
    arrival, sizes = spec.arrival, spec.sizes
    lam = arrival.lam
    if isinstance(arrival, Poisson):
        var_i = 1.0 / lam**2
    else:
        xm = arrival.x_m
        a = arrival.alpha
        var_i = xm * xm * a / ((a - 1.0) ** 2 * (a - 2.0))
    rate = line_rate * 1e-6  # bits/us
    if isinstance(sizes, FixedSize):
        mean_svc = 8.0 * sizes.size / rate
        var_s = 0.0
    else:
        t_small = 8.0 * sizes.small / rate
        t_large = 8.0 * sizes.large / rate
        p = sizes.p_small
        mean_svc = p * t_small + (1.0 - p) * t_large
        var_s = p * (1.0 - p) * (t_large - t_small) ** 2
    return TrafficStats(
        lam=lam, mu=1.0 / mean_svc, var_interarrival=var_i, var_service=var_s
    )


def measured_stats(times: np.ndarray, sizes: np.ndarray, line_rate: float) -> TrafficStats:
    """Sample moments of an observed frame sequence (e.g. a trace)."""
    if len(times) < 2:
        raise ValueError("need at least two frames to measure moments")
    ia = np.diff(times)
    mean_ia = float(ia.mean())
    if mean_ia <= 0:
        raise ValueError("degenerate trace: zero time span")
    svc = np.asarray(sizes, dtype=np.float64) * 8.0 / (line_rate * 1e-6)
    return TrafficStats(
        lam=1.0 / mean_ia,
        mu=1.0 / float(svc.mean()),
        var_interarrival=float(ia.var()),
        var_service=float(svc.var()),
    )
