"""Desk-scale molecular MIMO link simulator.

Two spray emitters talk to two chemical sensors across a few meters of
drifting air.  The package models the propagation physics, the sensing
chain, a non-coherent slotted modem with cross-link interference
cancellation, and the text framing protocol on top, plus an experiment
harness, a CLI and a live demo service.
"""

from .channel import (
    ChannelParams,
    ConcentrationTrace,
    Geometry,
    ImpulseMatrix,
    SprayRecord,
    TimeGrid,
    channel_impulse_matrix,
    impulse_concentration,
    integrated_mass,
    simulate_particles,
    synthesize_traces,
    write_trace_csv,
)
from .errors import (
    DegenerateGeometry,
    EmptyMessage,
    GridMismatch,
    InvalidParameter,
    InvalidParticleCount,
    InvalidSweep,
    InvalidTime,
    MalformedStream,
    MissingEndIndicator,
    MolmimoError,
    NoStartIndicator,
    PreambleNotDetected,
    ScheduleOutOfRange,
    TraceTooShort,
    UnsupportedCharacter,
)
from .harness import (
    ComparisonReport,
    LinkReport,
    RunConfig,
    SweepPoint,
    canonical_json,
    compare_modes,
    config_from_dict,
    default_timing,
    nominal_rise,
    run_link,
    run_link_detailed,
    sweep_noise,
    write_sweep_csv,
)
from .modem import (
    DetectionConfig,
    IliGains,
    SensorParams,
    SlotStat,
    TimingConfig,
    VoltageTrace,
    cancel_ili,
    detect_bits,
    detect_preamble,
    estimate_cross_gain,
    modulate,
    sense,
    slot_rise,
    write_slot_stats_csv,
)
from .protocol import (
    Frame,
    data_rate,
    decode_stream,
    decode_stream_lenient,
    decode_text,
    deinterleave,
    encode_chars,
    encode_text,
    frame_air_time,
    interleave,
    normalize_text,
    round_rate,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
