"""End-to-end link runs: transmit a message, receive it, score it.

``run_link`` wires the whole chain together: frame a message, lay the
preamble and payload bursts on a spray schedule, propagate them through
the channel (closed form, or a particle-estimated impulse response when
the Monte-Carlo backend is selected), push the concentrations through the
sensors, and run per-receiver detection with optional decision-directed
cross-link cancellation.  Reports carry everything needed to reproduce
and audit a run, and serialize to canonical JSON byte-identically for a
fixed configuration.

Air time and data rate in reports follow the frame accounting in
``protocol``: they rate the link protocol on a simulated clock and do not
depend on how much settling tail a run happens to simulate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import channel as ch
from . import modem
from . import protocol
from .errors import (
    InvalidParameter,
    InvalidSweep,
    InvalidTime,
    NoStartIndicator,
    PreambleNotDetected,
    ScheduleOutOfRange,
    TraceTooShort,
)

MODES = protocol.MODES

# Calibrated slot widths: the cross-link pilot and cancellation stages of
# the two-stream mode need slightly longer slots to keep the decay tails
# of neighbouring bursts out of each other's decision windows.
SYMBOL_PERIOD = {"siso": 3.4, "mimo": 3.8}


def default_timing(mode: str) -> modem.TimingConfig:
    """Factory for the calibrated per-mode slot layout."""
    if mode not in MODES:
        raise InvalidParameter(f"mode must be one of {MODES}, got {mode!r}")
    return modem.TimingConfig(symbol_period=SYMBOL_PERIOD[mode],
                              links=protocol.STREAMS[mode])


# =====================================================================
# CONFIGURATION
# =====================================================================

@dataclass(frozen=True)
class RunConfig:
    """Everything that determines one link run."""

    mode: str = "mimo"
    message: str = "abcdef"
    seed: int = 0
    backend: str = "analytical"        # "analytical" | "mc"
    particles: int = 200_000           # walkers per burst (mc backend)
    mc_workers: int = 1
    ili_cancellation: bool = True
    frame_start: float = 2.0           # s, first preamble burst
    grid_dt: float = 0.1               # s, simulation / sensor sample step
    tail: float = 15.0                 # s simulated past the last slot
    channel: ch.ChannelParams = field(default_factory=ch.ChannelParams)
    geometry: ch.Geometry = field(default_factory=ch.Geometry)
    sensor: modem.SensorParams = field(default_factory=modem.SensorParams)
    detection: modem.DetectionConfig = field(default_factory=modem.DetectionConfig)
    timing: modem.TimingConfig | None = None   # None = calibrated default

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidParameter(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.backend not in ("analytical", "mc"):
            raise InvalidParameter(
                f"backend must be 'analytical' or 'mc', got {self.backend!r}")
        if not (isinstance(self.seed, (int, np.integer)) and self.seed >= 0):
            raise InvalidParameter(f"seed must be a non-negative int, got {self.seed}")
        if not (self.frame_start >= 0 and np.isfinite(self.frame_start)):
            raise InvalidTime(f"frame_start must be >= 0, got {self.frame_start}")
        if not (self.grid_dt > 0 and self.tail >= 0):
            raise InvalidParameter("grid_dt must be > 0 and tail >= 0")
        if self.timing is not None and self.timing.links != protocol.STREAMS[self.mode]:
            raise InvalidParameter(
                f"timing carries {self.timing.links} links but mode {self.mode!r} "
                f"uses {protocol.STREAMS[self.mode]}")

    def resolved_timing(self) -> modem.TimingConfig:
        return self.timing if self.timing is not None else default_timing(self.mode)


def config_from_dict(raw: dict) -> RunConfig:
    """Build a RunConfig from plain JSON data (CLI config files, HTTP)."""
    raw = dict(raw)
    kwargs = {}
    nested = {
        "channel": ch.ChannelParams,
        "geometry": ch.Geometry,
        "sensor": modem.SensorParams,
        "detection": modem.DetectionConfig,
        "timing": modem.TimingConfig,
    }
    for key, cls in nested.items():
        if key in raw and raw[key] is not None:
            sub = raw.pop(key)
            if not isinstance(sub, dict):
                raise InvalidParameter(f"{key} must be an object")
            for k, v in sub.items():
                if isinstance(v, list):
                    sub[k] = tuple(tuple(x) if isinstance(x, list) else x for x in v)
            try:
                kwargs[key] = cls(**sub)
            except TypeError as exc:
                raise InvalidParameter(f"bad {key} config: {exc}") from None
    allowed = {f for f in RunConfig.__dataclass_fields__} - set(nested)
    unknown = set(raw) - allowed
    if unknown:
        raise InvalidParameter(f"unknown config keys: {sorted(unknown)}")
    try:
        return RunConfig(**raw, **kwargs)
    except TypeError as exc:
        raise InvalidParameter(f"bad config: {exc}") from None


# =====================================================================
# REPORTS
# =====================================================================

@dataclass
class LinkReport:
    """Scorecard for a single transmitted frame."""

    mode: str
    backend: str
    seed: int
    message_sent: str
    message_decoded: str
    rx_decoded: list
    rx_char_counts: list
    rx_locked: list
    payload_bits: int
    air_time_s: float
    data_rate_bps: float          # rounded, reporting convention
    data_rate_bps_exact: float
    bit_errors: int
    bits_compared: int
    ber: float
    char_errors: int
    cer: float
    noise_sigma: float
    ili_enabled: bool
    ili_applied: bool
    ili_gains: list
    slot_stats: list              # per rx, list of SlotStat

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "slot_stats"}
        d["slot_stats"] = [
            [
                {"slot": s.slot, "start": round(s.start, 6),
                 "statistic": s.statistic, "threshold": s.threshold, "bit": s.bit}
                for s in stats
            ]
            for stats in self.slot_stats
        ]
        return d


@dataclass
class ComparisonReport:
    """Side-by-side runs of the same message under two configurations."""

    siso: LinkReport
    mimo: LinkReport
    rate_ratio: float             # second rate / first rate, exact rates

    def to_dict(self) -> dict:
        return {"siso": self.siso.to_dict(), "mimo": self.mimo.to_dict(),
                "rate_ratio": self.rate_ratio}


def canonical_json(report) -> str:
    """Stable, compact JSON for reports (byte-identical per configuration)."""
    d = report.to_dict() if hasattr(report, "to_dict") else report
    return json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=False)


# =====================================================================
# RUN ARTIFACTS
# =====================================================================

@dataclass
class RunArtifacts:
    """Everything the run produced, for services, plots and debugging."""

    config: RunConfig
    timing: modem.TimingConfig
    frame: protocol.Frame
    grid: ch.TimeGrid
    schedule: list
    concentration: ch.ConcentrationTrace
    voltages: list                # raw sensed traces, one per rx
    cleaned: list                 # post-cancellation traces used for decisions
    starts: list                  # preamble arrival per rx (None if unlocked)
    detected_bits: list           # per rx
    report: LinkReport


# =====================================================================
# LINK RUN
# =====================================================================

@lru_cache(maxsize=4)
def _mc_impulse(geometry: ch.Geometry, params: ch.ChannelParams,
                grid: ch.TimeGrid, n: int, seed: int,
                workers: int) -> ch.ImpulseMatrix:
    """Particle-estimated impulse matrix; cached because it is by far the
    most expensive artifact and depends only on these arguments."""
    cols = []
    for j in range(geometry.n_tx):
        burst = [ch.SprayRecord(time=0.0, link=j, molecules=1.0)]
        est = ch.simulate_particles(burst, geometry, params, grid,
                                    n=n, seed=seed * 1000 + j, workers=workers)
        cols.append(est.values)
    return ch.ImpulseMatrix(grid=grid, values=np.stack(cols, axis=1))


def _impulse_matrix(cfg: RunConfig, grid: ch.TimeGrid) -> ch.ImpulseMatrix:
    if cfg.backend == "analytical":
        return ch.channel_impulse_matrix(cfg.geometry, cfg.channel, grid)
    return _mc_impulse(cfg.geometry, cfg.channel, grid, cfg.particles,
                       cfg.seed, cfg.mc_workers)


def _sensed_peak_delay(impulse: ch.ImpulseMatrix, link: int,
                       cfg: RunConfig) -> float:
    """Delay from emission to the sensed crest of one own-link burst."""
    q = cfg.channel.molecules_per_burst
    drive = ch.ConcentrationTrace(grid=impulse.grid,
                                  values=q * impulse.values[:, link, :])
    quiet = replace(cfg.sensor, noise_sigma=0.0)
    sensed = modem.sense(drive, quiet)[link]
    return float(sensed.grid.times[int(np.argmax(sensed.values))])


def _score(detected: list, frame: protocol.Frame, decoded_parts: list):
    """Bit and character error counts against what was sent."""
    bit_errors = 0
    bits_compared = 0
    for sent, got in zip(frame.stream_bits, detected):
        n = len(sent)
        bits_compared += n
        padded = list(got[:n]) + [0] * max(0, n - len(got))
        bit_errors += sum(1 for a, b in zip(sent, padded) if a != b)
    decoded = protocol.deinterleave(decoded_parts)
    char_errors = sum(1 for a, b in zip(frame.message, decoded) if a != b)
    char_errors += abs(len(frame.message) - len(decoded))
    return bit_errors, bits_compared, char_errors, decoded


def run_link_detailed(cfg: RunConfig) -> RunArtifacts:
    """Run one frame end to end and keep every intermediate product."""
    timing = cfg.resolved_timing()
    links = timing.links
    frame = protocol.encode_text(cfg.message, cfg.mode)
    q = cfg.channel.molecules_per_burst
    det = cfg.detection

    # ---- transmit side ----
    schedule = []
    for link in range(links):
        t_solo = cfg.frame_start + timing.solo_slot(link) * timing.symbol_period
        schedule.append(ch.SprayRecord(time=t_solo, link=link, molecules=q))
    pay0 = cfg.frame_start + timing.preamble_duration + timing.guard
    for link in range(links):
        schedule.extend(modem.modulate(frame.stream_bits[link], link, pay0,
                                       timing, q))

    longest = max(frame.slots_per_stream)
    duration = pay0 + longest * timing.symbol_period + cfg.tail
    grid = ch.TimeGrid(dt=cfg.grid_dt, n=int(np.ceil(duration / cfg.grid_dt)))

    # ---- channel and sensors ----
    impulse = _impulse_matrix(cfg, grid)
    conc = ch.synthesize_traces(schedule, impulse)
    voltages = modem.sense(conc, cfg.sensor, seed=cfg.seed)

    # ---- per-receiver sync and tentative detection ----
    starts = [None] * links
    detected = [[] for _ in range(links)]
    stats = [[] for _ in range(links)]
    locked = [False] * links
    for i in range(links):
        try:
            starts[i] = modem.detect_preamble(voltages[i], timing, det)
            n_slots = modem.available_payload_slots(voltages[i], starts[i],
                                                    timing, link=i)
            detected[i], stats[i] = modem.detect_bits(
                voltages[i], starts[i], n_slots, timing, det, link=i)
            locked[i] = True
        except (NoStartIndicator, PreambleNotDetected, TraceTooShort):
            # Receiver lost sync; it contributes nothing but the run and
            # its error statistics must survive (worst-case noise behaves
            # like an unplugged sensor, not like a crash).
            starts[i] = None

    # ---- decision-directed cross-link cancellation ----
    cleaned = list(voltages)
    applied = False
    gains = modem.IliGains(alpha=tuple(tuple(0.0 for _ in range(links))
                                       for _ in range(links)))
    if cfg.ili_cancellation and links > 1 and all(locked):
        try:
            gains = modem.estimate_cross_gain(voltages, starts, timing)
            estimates = []
            for j in range(links):
                delay = _sensed_peak_delay(impulse, j, cfg)
                emit0 = (modem.payload_start(starts[j], timing, grid.dt,
                                             timing.solo_slot(j))
                         + modem.SYNC_LEAD_FRACTION * timing.symbol_period - delay)
                bursts = modem.modulate(detected[j], j, emit0, timing, q)
                only_j = ch.synthesize_traces(bursts, impulse)
                quiet = replace(cfg.sensor, noise_sigma=0.0)
                estimates.append(modem.sense(only_j, quiet)[j])
            cleaned = modem.cancel_ili(voltages, gains, estimates)
            for i in range(links):
                detected[i], stats[i] = modem.detect_bits(
                    cleaned[i], starts[i], len(detected[i]), timing, det, link=i)
            applied = True
        except (PreambleNotDetected, TraceTooShort, InvalidTime,
                ScheduleOutOfRange):
            # Pilot too weak or timing estimate unusable: fall back to the
            # tentative decisions rather than aborting the run.
            cleaned = list(voltages)

    # ---- decode and score ----
    decoded_parts = [protocol.decode_stream_lenient(detected[i])[0]
                     for i in range(links)]
    bit_errors, bits_compared, char_errors, decoded = _score(
        detected, frame, decoded_parts)

    rate_exact, rate_rounded = protocol.data_rate(frame, timing)
    rx_decoded = decoded_parts + [""] * (cfg.geometry.n_rx - links)
    report = LinkReport(
        mode=cfg.mode,
        backend=cfg.backend,
        seed=cfg.seed,
        message_sent=frame.message,
        message_decoded=decoded,
        rx_decoded=rx_decoded,
        rx_char_counts=[len(s) for s in rx_decoded],
        rx_locked=locked + [False] * (cfg.geometry.n_rx - links),
        payload_bits=frame.payload_bits,
        air_time_s=round(protocol.frame_air_time(frame, timing), 6),
        data_rate_bps=rate_rounded,
        data_rate_bps_exact=rate_exact,
        bit_errors=bit_errors,
        bits_compared=bits_compared,
        ber=bit_errors / bits_compared,
        char_errors=char_errors,
        cer=char_errors / len(frame.message),
        noise_sigma=cfg.sensor.noise_sigma,
        ili_enabled=bool(cfg.ili_cancellation and links > 1),
        ili_applied=applied,
        ili_gains=[[float(a) for a in row] for row in gains.alpha],
        slot_stats=stats + [[] for _ in range(cfg.geometry.n_rx - links)],
    )
    return RunArtifacts(config=cfg, timing=timing, frame=frame, grid=grid,
                        schedule=schedule, concentration=conc,
                        voltages=voltages, cleaned=cleaned, starts=starts,
                        detected_bits=detected, report=report)


def run_link(cfg: RunConfig) -> LinkReport:
    """Transmit one frame with the given configuration and score it."""
    return run_link_detailed(cfg).report


def compare_modes(message: str, seed: int = 0, base: RunConfig | None = None,
                  modes: tuple = ("siso", "mimo")) -> ComparisonReport:
    """Run the same message through two configurations and compare rates.

    By default this is the single-link baseline against the two-link mode;
    passing ``modes=("siso", "siso")`` sanity-checks the ratio at 1.
    """
    if len(modes) != 2:
        raise InvalidParameter(f"modes must name two runs, got {modes!r}")
    base = base if base is not None else RunConfig()
    first = run_link(replace(base, mode=modes[0], message=message, seed=seed,
                             timing=None))
    second = run_link(replace(base, mode=modes[1], message=message, seed=seed,
                              timing=None))
    ratio = second.data_rate_bps_exact / first.data_rate_bps_exact
    return ComparisonReport(siso=first, mimo=second, rate_ratio=ratio)


# =====================================================================
# NOISE SWEEPS
# =====================================================================

def nominal_rise(cfg: RunConfig | None = None) -> float:
    """Noise-free rise one full burst produces in its decision slot.

    Sweep noise levels are expressed as fractions of this reference, so a
    level of 0.1 means sensor noise at 10 percent of the usable signal.
    """
    cfg = cfg if cfg is not None else RunConfig()
    timing = cfg.resolved_timing()
    span = cfg.frame_start + timing.preamble_duration + cfg.tail
    grid = ch.TimeGrid(dt=cfg.grid_dt, n=int(np.ceil(span / cfg.grid_dt)))
    q = cfg.channel.molecules_per_burst
    burst = [ch.SprayRecord(time=cfg.frame_start, link=0, molecules=q)]
    impulse = ch.channel_impulse_matrix(cfg.geometry, cfg.channel, grid)
    conc = ch.synthesize_traces(burst, impulse)
    quiet = replace(cfg.sensor, noise_sigma=0.0)
    trace = modem.sense(conc, quiet)[0]
    start = modem.detect_preamble(trace, timing, cfg.detection)
    return modem.preamble_rise(trace, start, timing, link=0)


@dataclass(frozen=True)
class SweepPoint:
    """Aggregate error rates for one (noise level, mode) cell."""

    sigma_fraction: float
    mode: str
    ber: float                 # mean over reps
    cer: float                 # mean over reps
    ber_samples: tuple
    cer_samples: tuple


def sweep_noise(levels, reps: int, cfg: RunConfig | None = None) -> list:
    """Error rates vs sensor noise for both modes.

    ``levels`` are noise sigmas as fractions of ``nominal_rise``.  Each
    cell averages ``reps`` runs with distinct seeds (cfg.seed + rep).
    """
    levels = list(levels)
    if not levels:
        raise InvalidSweep("no noise levels given")
    if any(not (lv >= 0 and np.isfinite(lv)) for lv in levels):
        raise InvalidSweep(f"noise levels must be finite and >= 0, got {levels}")
    if reps < 1:
        raise InvalidSweep(f"reps must be >= 1, got {reps}")
    cfg = cfg if cfg is not None else RunConfig()
    ref = nominal_rise(cfg)
    points = []
    for mode in MODES:
        for lv in levels:
            bers, cers = [], []
            for rep in range(reps):
                sensor = replace(cfg.sensor, noise_sigma=lv * ref)
                run = replace(cfg, mode=mode, sensor=sensor,
                              seed=cfg.seed + rep, timing=None)
                rpt = run_link(run)
                bers.append(rpt.ber)
                cers.append(rpt.cer)
            points.append(SweepPoint(sigma_fraction=lv, mode=mode,
                                     ber=float(np.mean(bers)),
                                     cer=float(np.mean(cers)),
                                     ber_samples=tuple(bers),
                                     cer_samples=tuple(cers)))
    return points


def write_sweep_csv(points, path) -> None:
    """Dump sweep results as sigma,mode,ber,cer rows."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sigma", "mode", "ber", "cer"])
        for p in points:
            writer.writerow([repr(p.sigma_fraction), p.mode, repr(p.ber),
                             repr(p.cer)])
