"""Chemical signal propagation between spray emitters and point sensors.

A spray burst releases Q molecules at an emitter position.  The cloud
drifts with the ambient flow and spreads by turbulent diffusion, so the
concentration at displacement ``r`` a delay ``t`` after the burst is the
free-space advection-diffusion kernel

    C(r, t) = Q * (4*pi*D*t)**-1.5 * exp(-||r - v*t||**2 / (4*D*t))

The channel is linear: traces for an arbitrary spray schedule are sums of
shifted, scaled copies of this kernel (``synthesize_traces`` over a
sampled ``ImpulseMatrix``).  A particle random-walk backend
(``simulate_particles``) estimates the same traces by counting walkers
inside a capture ball around each sensor; it cross-checks the closed form
and models what a physical testbed would actually measure.

Bursts are treated as instantaneous point releases: the nominal burst
duration (0.1 s) is far below the symbol period, so the emitted cloud is
fully formed within a single sample.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import (
    DegenerateGeometry,
    GridMismatch,
    InvalidParameter,
    InvalidParticleCount,
    InvalidTime,
    ScheduleOutOfRange,
)

# Monte-Carlo walkers are processed in fixed-size chunks, each driven by its
# own counter-based RNG stream keyed on (seed, record, chunk).  Results are
# integer occupancy counts accumulated per chunk, so the outcome is identical
# no matter how many workers the chunks are spread over.
MC_CHUNK = 1 << 17

# Walkers this far downstream of the last sensor can no longer diffuse back
# against the drift (6-sigma criterion); they are dropped from the walk.
_ESCAPE_SIGMA = 6.0


# =====================================================================
# TYPES
# =====================================================================

@dataclass(frozen=True)
class ChannelParams:
    """Physical propagation parameters."""

    diffusivity: float = 0.05          # m^2/s, effective turbulent D
    drift: tuple[float, float, float] = (1.0, 0.0, 0.0)   # m/s ambient flow
    molecules_per_burst: float = 1e18  # Q released by one full spray
    burst_duration: float = 0.1        # s, modeled as an instantaneous release

    def __post_init__(self):
        if not (self.diffusivity > 0 and np.isfinite(self.diffusivity)):
            raise InvalidParameter(f"diffusivity must be > 0, got {self.diffusivity}")
        d = np.asarray(self.drift, dtype=float)
        if d.shape != (3,) or not np.all(np.isfinite(d)):
            raise InvalidParameter(f"drift must be a finite 3-vector, got {self.drift}")
        if not (self.molecules_per_burst >= 0 and np.isfinite(self.molecules_per_burst)):
            raise InvalidParameter(
                f"molecules_per_burst must be >= 0, got {self.molecules_per_burst}")
        if not (self.burst_duration >= 0 and np.isfinite(self.burst_duration)):
            raise InvalidParameter(
                f"burst_duration must be >= 0, got {self.burst_duration}")

    @property
    def drift_vector(self) -> np.ndarray:
        return np.asarray(self.drift, dtype=float)


@dataclass(frozen=True)
class Geometry:
    """Emitter and sensor positions plus the sensing-ball radius."""

    tx: tuple = ((0.0, 0.4, 0.0), (0.0, -0.4, 0.0))   # m, spray nozzles
    rx: tuple = ((3.0, 0.4, 0.0), (3.0, -0.4, 0.0))   # m, sensor centers
    capture_radius: float = 0.1                        # m, occupancy ball

    def __post_init__(self):
        tx = np.asarray(self.tx, dtype=float)
        rx = np.asarray(self.rx, dtype=float)
        for name, arr in (("tx", tx), ("rx", rx)):
            if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 1:
                raise DegenerateGeometry(f"{name} must be an (n, 3) array of positions")
            if not np.all(np.isfinite(arr)):
                raise DegenerateGeometry(f"{name} positions must be finite")
        if not (self.capture_radius > 0 and np.isfinite(self.capture_radius)):
            raise DegenerateGeometry(
                f"capture_radius must be > 0, got {self.capture_radius}")
        d = np.linalg.norm(rx[:, None, :] - tx[None, :, :], axis=2)
        if np.any(d <= 0):
            raise DegenerateGeometry("a sensor coincides with an emitter")
        # A ball swallowing its emitter would see the singular release point.
        if self.capture_radius >= d.min():
            raise DegenerateGeometry(
                f"capture_radius {self.capture_radius} must be smaller than the "
                f"closest emitter-sensor distance {d.min():.3f}")
        if rx.shape[0] > 1:
            rr = np.linalg.norm(rx[:, None, :] - rx[None, :, :], axis=2)
            if np.any(rr[np.triu_indices(rx.shape[0], k=1)] <= 0):
                raise DegenerateGeometry("two sensors coincide")

    @property
    def tx_positions(self) -> np.ndarray:
        return np.asarray(self.tx, dtype=float)

    @property
    def rx_positions(self) -> np.ndarray:
        return np.asarray(self.rx, dtype=float)

    @property
    def n_tx(self) -> int:
        return len(self.tx)

    @property
    def n_rx(self) -> int:
        return len(self.rx)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sample times start, start + dt, ..., start + (n-1)*dt.

    The default start of one step keeps t = 0 (where the impulse kernel is
    singular and nothing has arrived yet) off the grid.
    """

    dt: float = 0.1            # s
    n: int = 100               # samples
    start: float | None = None   # s, defaults to dt

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise InvalidParameter(f"dt must be > 0, got {self.dt}")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise InvalidParameter(f"grid length must be a positive int, got {self.n}")
        if self.start is None:
            object.__setattr__(self, "start", self.dt)
        if not (self.start >= 0 and np.isfinite(self.start)):
            raise InvalidParameter(f"grid start must be >= 0, got {self.start}")

    @property
    def times(self) -> np.ndarray:
        return self.start + np.arange(self.n, dtype=float) * self.dt

    @property
    def end(self) -> float:
        """Time of the last sample."""
        return self.start + (self.n - 1) * self.dt

    @property
    def span_end(self) -> float:
        """Exclusive end: one step past the last sample."""
        return self.start + self.n * self.dt

    def index_nearest(self, t: float) -> int:
        """Index of the sample closest to time t (may be out of range)."""
        return int(round((t - self.start) / self.dt))

    def matches(self, other: "TimeGrid") -> bool:
        return (self.n == other.n and self.dt == other.dt
                and self.start == other.start)


@dataclass(frozen=True)
class SprayRecord:
    """One scheduled spray burst."""

    time: float        # s, release instant
    link: int          # which nozzle fires
    molecules: float   # molecules released

    def __post_init__(self):
        if not (np.isfinite(self.time) and self.time >= 0):
            raise InvalidTime(f"spray time must be >= 0, got {self.time}")
        if not (isinstance(self.link, (int, np.integer)) and self.link >= 0):
            raise InvalidParameter(f"link must be a non-negative int, got {self.link}")
        if not (self.molecules >= 0 and np.isfinite(self.molecules)):
            raise InvalidParameter(f"molecules must be >= 0, got {self.molecules}")


@dataclass
class ConcentrationTrace:
    """Concentration sampled at every sensor over a shared time grid."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)   # (n_rx, n) molecules/m^3

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.n:
            raise GridMismatch(
                f"values shape {self.values.shape} does not match grid length {self.grid.n}")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise InvalidParameter("concentration values must be finite and >= 0")

    @property
    def n_rx(self) -> int:
        return self.values.shape[0]


@dataclass
class ImpulseMatrix:
    """Unit-burst responses: entry [i, j] is rx i's trace for tx j, Q = 1."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)   # (n_rx, n_tx, n)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3 or self.values.shape[2] != self.grid.n:
            raise GridMismatch(
                f"impulse shape {self.values.shape} does not match grid length {self.grid.n}")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise InvalidParameter("impulse responses must be finite and >= 0")

    @property
    def n_rx(self) -> int:
        return self.values.shape[0]

    @property
    def n_tx(self) -> int:
        return self.values.shape[1]


# =====================================================================
# CLOSED FORM
# =====================================================================

def impulse_concentration(r, t: float, params: ChannelParams) -> float:
    """Concentration at displacement r, delay t after one full burst."""
    if not (np.isfinite(t) and t > 0):
        raise InvalidTime(f"delay must be > 0, got {t}")
    r = np.asarray(r, dtype=float)
    if r.shape != (3,) or not np.all(np.isfinite(r)):
        raise InvalidParameter(f"displacement must be a finite 3-vector, got {r}")
    d4t = 4.0 * params.diffusivity * t
    offset = r - params.drift_vector * t
    kernel = (np.pi * d4t) ** -1.5 * np.exp(-(offset @ offset) / d4t)
    return float(params.molecules_per_burst * kernel)


def channel_impulse_matrix(geometry: Geometry, params: ChannelParams,
                           grid: TimeGrid) -> ImpulseMatrix:
    """Sample the unit-burst (Q = 1) kernel for every emitter-sensor pair."""
    t = grid.times
    if t[0] <= 0:
        raise InvalidTime("impulse responses need a grid that starts after t = 0")
    disp = geometry.rx_positions[:, None, :] - geometry.tx_positions[None, :, :]
    offset = disp[:, :, None, :] - params.drift_vector[None, None, None, :] * t[:, None]
    d4t = 4.0 * params.diffusivity * t
    dist2 = np.einsum("ijtk,ijtk->ijt", offset, offset)
    return ImpulseMatrix(grid=grid,
                         values=(np.pi * d4t) ** -1.5 * np.exp(-dist2 / d4t))


def synthesize_traces(schedule, impulse: ImpulseMatrix) -> ConcentrationTrace:
    """Superpose shifted, scaled impulse responses for a spray schedule.

    Release times are snapped to the nearest grid step; the approximation
    is deterministic and negligible because dt is far below the symbol
    period.  A release exactly at the end of the grid contributes nothing.
    """
    grid = impulse.grid
    out = np.zeros((impulse.n_rx, grid.n))
    for rec in schedule:
        if rec.time > grid.span_end:
            raise ScheduleOutOfRange(
                f"spray at t={rec.time} is past the grid end {grid.span_end}")
        if rec.link >= impulse.n_tx:
            raise ScheduleOutOfRange(f"no emitter with index {rec.link}")
        shift = int(round(rec.time / grid.dt))
        span = grid.n - shift
        if span > 0 and rec.molecules > 0:
            out[:, shift:] += rec.molecules * impulse.values[:, rec.link, :span]
    return ConcentrationTrace(grid=grid, values=out)


def integrated_mass(t: float, params: ChannelParams) -> float:
    """Total molecules in the cloud at delay t, by radial quadrature.

    Integrates the kernel over all space in the drift-comoving frame; for a
    conservative channel this must recover molecules_per_burst.
    """
    if not (np.isfinite(t) and t > 0):
        raise InvalidTime(f"delay must be > 0, got {t}")
    d4t = 4.0 * params.diffusivity * t

    def shell(r):
        return 4.0 * np.pi * r * r * (np.pi * d4t) ** -1.5 * np.exp(-r * r / d4t)

    total, _ = integrate.quad(shell, 0.0, np.inf)
    return params.molecules_per_burst * total


# =====================================================================
# MONTE-CARLO BACKEND
# =====================================================================

def _walk_chunk(key, start, size, steps, origin, drift_step, step_sigma,
                rx, rho2, escape_axis, escape_limit):
    """Random-walk one chunk of walkers; return integer ball counts.

    Walkers past ``escape_limit`` along ``escape_axis`` are discarded: with
    the drift carrying them away, diffusion can no longer bring them back
    within any horizon (6-sigma bound), so they cannot affect the counts.
    """
    rng = np.random.Generator(np.random.Philox(key=key))
    pos = np.broadcast_to(origin.astype(np.float32), (size, 3)).copy()
    counts = np.zeros((rx.shape[0], steps - start), dtype=np.int64)
    for s in range(start, steps):
        pos += drift_step
        pos += rng.standard_normal((pos.shape[0], 3), dtype=np.float32) * step_sigma
        for i in range(rx.shape[0]):
            dx = pos[:, 0] - rx[i, 0]
            dy = pos[:, 1] - rx[i, 1]
            dz = pos[:, 2] - rx[i, 2]
            counts[i, s - start] = int((dx * dx + dy * dy + dz * dz <= rho2).sum())
        if escape_axis is not None:
            keep = pos @ escape_axis <= escape_limit
            if not keep.all():
                pos = pos[keep]
                if pos.shape[0] == 0:
                    break
    return counts


def simulate_particles(schedule, geometry: Geometry, params: ChannelParams,
                       grid: TimeGrid, n: int = 1_000_000, seed: int = 0,
                       workers: int = 1) -> ConcentrationTrace:
    """Estimate sensor concentrations by particle random walk.

    Each spray record releases ``n`` walkers carrying molecules/n each.
    Per time step a walker moves by drift*dt plus isotropic Normal(0, 2*D*dt)
    noise; concentration at a sensor is (walkers inside the capture ball) /
    (ball volume) * (molecules / n).  Deterministic for fixed (seed, n)
    regardless of ``workers``: walkers are split into fixed chunks with
    per-chunk counter-based RNG streams and integer count accumulation.
    """
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise InvalidParticleCount(f"particle count must be a positive int, got {n}")
    if not (isinstance(seed, (int, np.integer)) and seed >= 0):
        raise InvalidParameter(f"seed must be a non-negative int, got {seed}")
    if workers < 1:
        raise InvalidParameter(f"workers must be >= 1, got {workers}")
    if abs(grid.start - grid.dt) > 1e-12:
        # Walker age is an integer number of dt steps at every sample, which
        # lines up with the sample times only on the canonical grid.
        raise GridMismatch("the particle backend needs a grid with start == dt")
    schedule = list(schedule)
    for rec in schedule:
        if rec.time > grid.span_end:
            raise ScheduleOutOfRange(
                f"spray at t={rec.time} is past the grid end {grid.span_end}")
        if rec.link >= geometry.n_tx:
            raise ScheduleOutOfRange(f"no emitter with index {rec.link}")

    rho = geometry.capture_radius
    rho2 = np.float32(rho * rho)
    vball = 4.0 / 3.0 * np.pi * rho ** 3
    rx = geometry.rx_positions.astype(np.float32)
    drift = params.drift_vector
    drift_step = (drift * grid.dt).astype(np.float32)
    step_sigma = np.float32(np.sqrt(2.0 * params.diffusivity * grid.dt))

    speed = float(np.linalg.norm(drift))
    escape_axis = None
    escape_limit = np.float32(0.0)
    if speed > 0:
        # Farthest sensor plane along the drift, plus the maximum distance a
        # walker can claw back against the drift before it is swept away.
        axis = (drift / speed).astype(np.float32)
        claw_back = (_ESCAPE_SIGMA ** 2 / 2.0) * params.diffusivity / speed
        escape_axis = axis
        escape_limit = np.float32(
            np.max(geometry.rx_positions @ axis.astype(float)) + rho + claw_back)

    chunks = []
    for rec_idx, rec in enumerate(schedule):
        if rec.molecules <= 0:
            continue
        first = max(int(round(rec.time / grid.dt)), 0)
        if first >= grid.n:
            continue
        origin = geometry.tx_positions[rec.link]
        scale = rec.molecules / (n * vball)
        for c, lo in enumerate(range(0, n, MC_CHUNK)):
            size = min(MC_CHUNK, n - lo)
            key = np.array([seed, (rec_idx << 32) + c], dtype=np.uint64)
            chunks.append((key, first, size, origin, scale))

    values = np.zeros((geometry.n_rx, grid.n))

    def run(job):
        key, first, size, origin, scale = job
        counts = _walk_chunk(key, first, size, grid.n, origin, drift_step,
                             step_sigma, rx, rho2, escape_axis, escape_limit)
        return first, scale, counts

    if workers == 1:
        results = map(run, chunks)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))
    for first, scale, counts in results:
        values[:, first:] += counts * scale
    return ConcentrationTrace(grid=grid, values=values)


# =====================================================================
# EXPORT
# =====================================================================

def write_trace_csv(trace: ConcentrationTrace, path) -> None:
    """Dump a trace as t,rx0,rx1,... rows for external plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"rx{i}" for i in range(trace.n_rx)])
        for k, t in enumerate(trace.grid.times):
            writer.writerow([f"{t:.6f}"] + [repr(float(v))
                                            for v in trace.values[:, k]])
