"""Spray modulation, sensor transduction, and non-coherent detection.

Transmission is on-off keyed: bit 1 fires a full spray burst at the start
of its symbol slot, bit 0 stays silent.  Each frame opens with a preamble
of solo bursts (one per active link, each followed by a silent decay slot)
that serves three jobs at once: start detection, timing reference, and a
pilot for estimating how strongly each link leaks into the other receiver.

Detection never needs the channel phase or amplitude in absolute terms.
The receiver slides a one-slot window over the voltage trace and scores
each position by its rise, ``max(v[k:k+W]) - v[k]``.  A fresh burst makes
the trace climb within the window, so its rise is large, while the slow
decay tail left by earlier bursts only makes the trace fall, contributing
nothing.  That difference is what makes the scheme robust to inter-symbol
interference.  The first window whose rise reaches a fraction beta of the
best rise anywhere marks the preamble; thresholds for payload slots are a
fraction beta of the rise measured in the receiver's own preamble slot.

Cross-link interference is handled decision-directed: tentative bits are
re-synthesized through the receiver's own channel, scaled by the pilot
gain ratio, subtracted from the neighbour's trace, and the slots are
scored again on the cleaned trace.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from .channel import ConcentrationTrace, SprayRecord, TimeGrid
from .errors import (
    GridMismatch,
    InvalidParameter,
    NoStartIndicator,
    PreambleNotDetected,
    TraceTooShort,
)

# The sliding-window arrival marks (roughly) one window length before the
# pulse peak; slot references are backed off half a slot from the peak so
# every burst crests mid-slot.  Design constant, not a tunable.
SYNC_LEAD_FRACTION = 0.5


# =====================================================================
# TYPES
# =====================================================================

@dataclass(frozen=True)
class SensorParams:
    """First-order chemical sensor with additive readout noise."""

    gain: float = 1.25e-18      # V per molecules/m^3 at steady state
    response_time: float = 0.5  # s, first-order lag constant
    noise_sigma: float = 0.0    # V, std of additive Gaussian readout noise
    v_max: float = 5.0          # V, output clamp
    sample_rate: float = 10.0   # Hz, must match the trace grid

    def __post_init__(self):
        if not (self.gain > 0 and np.isfinite(self.gain)):
            raise InvalidParameter(f"gain must be > 0, got {self.gain}")
        if not (self.response_time > 0 and np.isfinite(self.response_time)):
            raise InvalidParameter(
                f"response_time must be > 0, got {self.response_time}")
        if not (self.noise_sigma >= 0 and np.isfinite(self.noise_sigma)):
            raise InvalidParameter(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not (self.v_max > 0 and np.isfinite(self.v_max)):
            raise InvalidParameter(f"v_max must be > 0, got {self.v_max}")
        if not (self.sample_rate > 0 and np.isfinite(self.sample_rate)):
            raise InvalidParameter(f"sample_rate must be > 0, got {self.sample_rate}")


@dataclass
class VoltageTrace:
    """One sensor's sampled output voltage on a shared time grid."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)   # (n,) volts

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.shape[0] != self.grid.n:
            raise GridMismatch(
                f"values shape {self.values.shape} does not match grid length {self.grid.n}")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise InvalidParameter("voltage values must be finite and >= 0")


@dataclass(frozen=True)
class TimingConfig:
    """Slot layout of one frame on the air."""

    symbol_period: float            # s per bit slot
    preamble_slots_per_link: int = 2  # solo burst + silent decay slot
    guard: float = 2.0              # s between preamble and payload
    overhead: float = 6.0           # s charged per frame in air-time accounting
    links: int = 2                  # active spatial streams (1 = single link)

    def __post_init__(self):
        if not (self.symbol_period > 0 and np.isfinite(self.symbol_period)):
            raise InvalidParameter(
                f"symbol_period must be > 0, got {self.symbol_period}")
        if self.preamble_slots_per_link < 1:
            raise InvalidParameter("need at least one preamble slot per link")
        if self.guard < 0 or self.overhead < 0:
            raise InvalidParameter("guard and overhead must be >= 0")
        if self.links < 1:
            raise InvalidParameter(f"links must be >= 1, got {self.links}")

    @property
    def preamble_slots(self) -> int:
        return self.links * self.preamble_slots_per_link

    @property
    def preamble_duration(self) -> float:
        return self.preamble_slots * self.symbol_period

    def solo_slot(self, link: int) -> int:
        """Preamble slot index in which only this link fires."""
        if not 0 <= link < self.links:
            raise InvalidParameter(f"no link {link} in a {self.links}-link frame")
        return link * self.preamble_slots_per_link


@dataclass(frozen=True)
class DetectionConfig:
    """Receiver decision parameters."""

    threshold_fraction: float = 0.5   # beta: threshold = beta * reference rise

    def __post_init__(self):
        if not (0 < self.threshold_fraction <= 1):
            raise InvalidParameter(
                f"threshold_fraction must be in (0, 1], got {self.threshold_fraction}")


@dataclass(frozen=True)
class IliGains:
    """Cross-link leakage ratios; alpha[i][j] scales link j's own-channel
    signal estimate into what receiver i sees of it."""

    alpha: tuple

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidParameter("alpha must be a square matrix")
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise InvalidParameter("cross gains must be finite and >= 0")

    @property
    def as_array(self) -> np.ndarray:
        return np.asarray(self.alpha, dtype=float)

    @property
    def alpha_01(self) -> float:
        """Leakage of link 1 into receiver 0."""
        return float(self.alpha[0][1])

    @property
    def alpha_10(self) -> float:
        """Leakage of link 0 into receiver 1."""
        return float(self.alpha[1][0])


@dataclass(frozen=True)
class SlotStat:
    """Decision record for one symbol slot at one receiver."""

    slot: int
    start: float        # s, slot window start on the trace
    statistic: float    # V, in-slot rise
    threshold: float    # V
    bit: int


# =====================================================================
# MODULATION AND SENSING
# =====================================================================

def modulate(bits, link: int, start_time: float, timing: TimingConfig,
             molecules: float) -> list[SprayRecord]:
    """Map a bit sequence to spray records, one slot per bit, 1 = burst."""
    if start_time < 0 or not np.isfinite(start_time):
        raise InvalidParameter(f"start_time must be >= 0, got {start_time}")
    records = []
    for k, b in enumerate(bits):
        if b not in (0, 1):
            raise InvalidParameter(f"bits must be 0 or 1, got {b!r}")
        if b:
            records.append(SprayRecord(time=start_time + k * timing.symbol_period,
                                       link=link, molecules=molecules))
    return records


def _resample_nearest(conc: ConcentrationTrace, rate: float) -> ConcentrationTrace:
    """Nearest-sample resample onto the sensor's own clock."""
    grid = conc.grid
    dt2 = 1.0 / rate
    n2 = int(np.floor((grid.end - grid.start) / dt2)) + 1
    if n2 < 1:
        raise GridMismatch(
            f"trace span {grid.end - grid.start:.3f} s holds no sample at "
            f"{rate} Hz")
    new = TimeGrid(dt=dt2, n=n2, start=grid.start)
    idx = np.clip(np.round((new.times - grid.start) / grid.dt).astype(int),
                  0, grid.n - 1)
    return ConcentrationTrace(grid=new, values=conc.values[:, idx])


def sense(conc: ConcentrationTrace, params: SensorParams,
          seed: int | None = None) -> list[VoltageTrace]:
    """Run every sensor channel through the first-order lag and readout chain.

    Concentration is resampled to the sensor clock by nearest sample when
    the rates differ.  The lag is discretized exactly for stepwise-constant
    input: ``v[i] = a*v[i-1] + (1-a)*k*c[i-1]`` with ``a = exp(-dt/tau)``,
    the impulse-invariant response of the RC front end between samples, and
    v starts at 0.  Gaussian noise is added after the lag and the result is
    clamped to the sensor's output range.  Returns one trace per sensor.
    """
    if abs(conc.grid.dt * params.sample_rate - 1.0) > 1e-9:
        conc = _resample_nearest(conc, params.sample_rate)
    dt = conc.grid.dt
    a = np.exp(-dt / params.response_time)
    drive = params.gain * conc.values                     # (n_rx, n)
    clean = signal.lfilter([0.0, 1.0 - a], [1.0, -a], drive, axis=1)
    if params.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        clean = clean + rng.normal(0.0, params.noise_sigma, size=clean.shape)
    out = np.clip(clean, 0.0, params.v_max)
    return [VoltageTrace(grid=conc.grid, values=out[i]) for i in range(out.shape[0])]


# =====================================================================
# RISE STATISTICS
# =====================================================================

def window_samples(timing: TimingConfig, dt: float) -> int:
    w = int(round(timing.symbol_period / dt))
    if w < 1:
        raise InvalidParameter("symbol period shorter than one sample")
    return w


def sliding_rise(values: np.ndarray, w: int) -> np.ndarray:
    """rise[k] = max(values[k:k+w]) - values[k] for every full window."""
    if len(values) < w:
        raise TraceTooShort(f"trace has {len(values)} samples, window needs {w}")
    windows = sliding_window_view(values, w)
    return windows.max(axis=1) - values[: len(values) - w + 1]


def slot_rise(trace: VoltageTrace, t_start: float, timing: TimingConfig) -> float:
    """In-slot rise over [t_start, t_start + symbol_period)."""
    i0 = trace.grid.index_nearest(t_start)
    i1 = i0 + window_samples(timing, trace.grid.dt)
    if i0 < 0 or i1 > trace.grid.n:
        raise TraceTooShort(
            f"slot [{t_start:.3f}, {t_start + timing.symbol_period:.3f}) s is not "
            f"fully on the trace (samples {i0}:{i1} of {trace.grid.n})")
    seg = trace.values[i0:i1]
    return float(seg.max() - seg[0])


def _slot_reference(start: float, timing: TimingConfig, dt: float,
                    lock_slot: int) -> float:
    """Start time of preamble slot 0, given a sliding-window arrival time.

    The arrival window begins one window length before the locked pulse's
    crest; step forward to the crest, back off half a slot so the crest
    sits mid-slot, then rewind to the start of the preamble.
    """
    w = window_samples(timing, dt)
    crest = start + (w - 1) * dt
    return crest - (SYNC_LEAD_FRACTION + lock_slot) * timing.symbol_period


def payload_start(start: float, timing: TimingConfig, dt: float,
                  lock_slot: int) -> float:
    """Start time of payload slot 0 for a receiver locked on lock_slot."""
    ref = _slot_reference(start, timing, dt, lock_slot)
    return ref + timing.preamble_duration + timing.guard


# =====================================================================
# DETECTION
# =====================================================================

def detect_preamble(trace: VoltageTrace, timing: TimingConfig,
                    cfg: DetectionConfig) -> float:
    """Arrival time of the first strong rise (start-of-frame indicator).

    Scans the whole trace with a one-slot window and returns the time of the
    earliest window whose rise reaches ``threshold_fraction`` of the best
    rise found anywhere.  Ties go to the earlier window.
    """
    w = window_samples(timing, trace.grid.dt)
    rise = sliding_rise(trace.values, w)
    peak = rise.max()
    if peak <= 0:
        raise NoStartIndicator("trace never rises; no start indicator found")
    hits = np.flatnonzero(rise >= cfg.threshold_fraction * peak)
    return float(trace.grid.times[hits[0]])


def preamble_rise(trace: VoltageTrace, start: float, timing: TimingConfig,
                  link: int) -> float:
    """Rise measured in this link's solo preamble slot (own-signal pilot)."""
    ref = _slot_reference(start, timing, trace.grid.dt, timing.solo_slot(link))
    return slot_rise(trace, ref + timing.solo_slot(link) * timing.symbol_period,
                     timing)


def detect_bits(trace: VoltageTrace, start: float, n_bits: int,
                timing: TimingConfig, cfg: DetectionConfig, link: int = 0,
                threshold: float | None = None):
    """Score payload slots on a trace locked to this link's preamble.

    ``start`` must come from ``detect_preamble`` on the same trace.  When no
    explicit threshold is given it is ``threshold_fraction`` times the rise
    in the receiver's own preamble slot, so the decision level self-scales
    with the realized channel gain.  Returns (bits, slot_stats).
    """
    if n_bits < 0:
        raise InvalidParameter(f"n_bits must be >= 0, got {n_bits}")
    if threshold is None:
        pilot = preamble_rise(trace, start, timing, link)
        if pilot <= 0:
            raise PreambleNotDetected(
                "no rise in the receiver's own preamble slot; cannot set threshold")
        threshold = cfg.threshold_fraction * pilot
    first = payload_start(start, timing, trace.grid.dt, timing.solo_slot(link))
    bits, stats = [], []
    for k in range(n_bits):
        t_k = first + k * timing.symbol_period
        s_k = slot_rise(trace, t_k, timing)
        bit = int(s_k > threshold)
        bits.append(bit)
        stats.append(SlotStat(slot=k, start=t_k, statistic=s_k,
                              threshold=threshold, bit=bit))
    return bits, stats


def available_payload_slots(trace: VoltageTrace, start: float,
                            timing: TimingConfig, link: int = 0) -> int:
    """How many whole payload slots fit on the trace after the preamble."""
    first = payload_start(start, timing, trace.grid.dt, timing.solo_slot(link))
    span = trace.grid.span_end - first
    return max(int(np.floor(span / timing.symbol_period + 1e-9)), 0)


# =====================================================================
# INTER-LINK INTERFERENCE
# =====================================================================

def estimate_cross_gain(traces, starts, timing: TimingConfig) -> IliGains:
    """Measure cross-link leakage from the solo preamble slots.

    ``alpha[i][j]`` is the rise receiver i sees while only link j fires,
    normalized by the rise receiver j sees in that same slot.  Each
    receiver's slot clock comes from its own preamble lock, so the ratio
    compares the same burst through the cross and direct paths.
    """
    n = len(traces)
    if len(starts) != n:
        raise InvalidParameter("need one preamble start per trace")
    refs = [_slot_reference(starts[i], timing, traces[i].grid.dt,
                            timing.solo_slot(i)) for i in range(n)]
    alpha = np.zeros((n, n))
    for j in range(n):
        offset = timing.solo_slot(j) * timing.symbol_period
        own = slot_rise(traces[j], refs[j] + offset, timing)
        if own <= 0:
            raise PreambleNotDetected(
                f"link {j} shows no rise in its own solo slot; preamble is flat")
        for i in range(n):
            if i == j:
                continue
            leak = slot_rise(traces[i], refs[i] + offset, timing)
            alpha[i, j] = max(leak, 0.0) / own
    return IliGains(alpha=tuple(map(tuple, alpha)))


def cancel_ili(traces, gains: IliGains, estimates) -> list[VoltageTrace]:
    """Subtract scaled own-channel estimates of the other links.

    ``estimates[j]`` is the synthetic, noise-free voltage link j's tentative
    bits would produce at its own receiver.  The cleaned trace for receiver
    i is ``clip(v_i - sum_j alpha[i][j] * estimates[j], >= 0)``.
    """
    a = gains.as_array
    n = len(traces)
    if a.shape != (n, n) or len(estimates) != n:
        raise InvalidParameter("gains, traces and estimates sizes disagree")
    cleaned = []
    for i in range(n):
        v = traces[i].values.copy()
        for j in range(n):
            if i == j:
                continue
            if not traces[i].grid.matches(estimates[j].grid):
                raise GridMismatch("estimate grid does not match trace grid")
            v -= a[i, j] * estimates[j].values
        cleaned.append(VoltageTrace(grid=traces[i].grid,
                                    values=np.clip(v, 0.0, None)))
    return cleaned


# =====================================================================
# EXPORT
# =====================================================================

def write_slot_stats_csv(stats_per_rx, path) -> None:
    """Dump per-slot decisions as rx,slot,t_start,statistic,threshold,bit."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rx", "slot", "t_start", "statistic", "threshold", "bit"])
        for rx, stats in enumerate(stats_per_rx):
            for st in stats:
                writer.writerow([rx, st.slot, f"{st.start:.6f}",
                                 repr(float(st.statistic)),
                                 repr(float(st.threshold)), st.bit])
