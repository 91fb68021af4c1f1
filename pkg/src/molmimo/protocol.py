"""Text framing for the spray link: 5-bit codes, interleaving, air time.

The alphabet packs lower-case letters, space and light punctuation into
5-bit codes: a-z are 1-26, space 27, '.' 28, ',' 29, '?' 30.  Code 31
(all ones) is the end-of-transmission marker; since it is the only code a
payload never uses, a decoder can stop on it unambiguously, and being all
ones it always sprays, so the end indicator stays physically detectable
under on-off keying.  Code 0 is reserved.  Bits go MSB first.

Two-stream frames split the message character by character, round robin:
stream 0 carries characters 1, 3, 5, ... and stream 1 carries 2, 4, 6, ...
(so an odd-length message gives stream 0 one extra character).  Each
stream ends with its own end marker.

Air-time accounting is deliberately simple: a frame occupies the channel
for (longest stream's payload bits) * symbol_period plus a fixed per-frame
overhead that covers preamble, guard and end markers.  Data rate, payload
bits / air time, is reported rounded half-up to two decimals.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .errors import (
    EmptyMessage,
    InvalidParameter,
    MalformedStream,
    MissingEndIndicator,
    UnsupportedCharacter,
)
from .modem import TimingConfig

MODES = ("siso", "mimo")
STREAMS = {"siso": 1, "mimo": 2}

CODE_BITS = 5
EOT_CODE = 31
EOT_BITS = (1, 1, 1, 1, 1)

CHAR_TO_CODE = {chr(ord("a") + i): i + 1 for i in range(26)}
CHAR_TO_CODE.update({" ": 27, ".": 28, ",": 29, "?": 30})
CODE_TO_CHAR = {code: ch for ch, code in CHAR_TO_CODE.items()}


def _streams_for(mode: str) -> int:
    if mode not in MODES:
        raise InvalidParameter(f"mode must be one of {MODES}, got {mode!r}")
    return STREAMS[mode]


# =====================================================================
# CODEC
# =====================================================================

def normalize_text(text: str) -> str:
    """Case-fold a message to the transmitted form."""
    return text.lower()


def encode_chars(text: str) -> list[int]:
    """Codes of a character sequence as bits, MSB first, no end marker."""
    bits = []
    for ch in normalize_text(text):
        code = CHAR_TO_CODE.get(ch)
        if code is None:
            raise UnsupportedCharacter(f"character {ch!r} is not in the alphabet")
        bits.extend((code >> shift) & 1 for shift in range(CODE_BITS - 1, -1, -1))
    return bits


def _codes(bits) -> list[int]:
    bits = list(bits)
    if len(bits) % CODE_BITS != 0:
        raise MalformedStream(
            f"stream length {len(bits)} is not a multiple of {CODE_BITS}")
    if any(b not in (0, 1) for b in bits):
        raise MalformedStream("stream contains non-binary symbols")
    return [
        sum(bit << (CODE_BITS - 1 - k) for k, bit in enumerate(bits[i:i + CODE_BITS]))
        for i in range(0, len(bits), CODE_BITS)
    ]


def decode_stream(bits) -> str:
    """Decode one stream up to its end marker.

    The stream must be a whole number of codes and must contain the end
    marker; unknown or reserved codes decode to '?'.
    """
    chars = []
    for code in _codes(bits):
        if code == EOT_CODE:
            return "".join(chars)
        chars.append(CODE_TO_CHAR.get(code, "?"))
    raise MissingEndIndicator("stream ended without the end-of-transmission code")


def decode_stream_lenient(bits) -> tuple[str, bool]:
    """Best-effort decode for noisy streams.

    Trailing bits that do not fill a code are dropped and a missing end
    marker is reported instead of raised.  Returns (text, saw_end_marker).
    """
    bits = [1 if b else 0 for b in bits]
    bits = bits[: len(bits) - len(bits) % CODE_BITS]
    chars = []
    for code in _codes(bits):
        if code == EOT_CODE:
            return "".join(chars), True
        chars.append(CODE_TO_CHAR.get(code, "?"))
    return "".join(chars), False


# =====================================================================
# INTERLEAVING AND FRAMES
# =====================================================================

def interleave(text: str, streams: int) -> list[str]:
    """Deal characters round robin across streams (char 1 -> stream 0)."""
    if streams < 1:
        raise InvalidParameter(f"streams must be >= 1, got {streams}")
    return [text[i::streams] for i in range(streams)]


def deinterleave(parts) -> str:
    """Inverse of interleave, tolerant of parts of uneven length.

    Every character goes back to its round-robin position; positions a
    short stream failed to deliver read as '?' so that nothing a longer
    stream did deliver is dropped.
    """
    parts = list(parts)
    n = len(parts)
    last = max(((len(p) - 1) * n + i for i, p in enumerate(parts) if p),
               default=-1)
    out = []
    for k in range(last + 1):
        part = parts[k % n]
        idx = k // n
        out.append(part[idx] if idx < len(part) else "?")
    return "".join(out)


@dataclass(frozen=True)
class Frame:
    """A message prepared for transmission over one or two spatial streams."""

    mode: str
    message: str                 # normalized text
    streams: tuple               # per-stream character substrings
    stream_bits: tuple           # per-stream bits, end marker included

    @property
    def payload_chars(self) -> int:
        return len(self.message)

    @property
    def payload_bits(self) -> int:
        """Information bits across all streams (end markers excluded)."""
        return CODE_BITS * len(self.message)

    @property
    def slots_per_stream(self) -> tuple:
        return tuple(len(b) for b in self.stream_bits)


def encode_text(message: str, mode: str = "mimo") -> Frame:
    """Normalize, validate, split and encode a message for transmission."""
    n_streams = _streams_for(mode)
    text = normalize_text(message)
    if len(text) == 0:
        raise EmptyMessage("cannot frame an empty message")
    parts = interleave(text, n_streams)
    bits = tuple(tuple(encode_chars(p) + list(EOT_BITS)) for p in parts)
    return Frame(mode=mode, message=text, streams=tuple(parts), stream_bits=bits)


def decode_text(streams, mode: str = "mimo") -> str:
    """Decode per-stream bits and merge them back into one message.

    Strict counterpart of ``encode_text``: every stream must be a whole
    number of 5-bit codes (else MalformedStream) and carry an end marker
    (else MissingEndIndicator); unknown codes decode as '?'.
    """
    n_streams = _streams_for(mode)
    streams = list(streams)
    if len(streams) != n_streams:
        raise InvalidParameter(
            f"{mode} carries {n_streams} stream(s), got {len(streams)}")
    return deinterleave([decode_stream(bits) for bits in streams])


# =====================================================================
# AIR TIME
# =====================================================================

def frame_air_time(frame: Frame, timing: TimingConfig) -> float:
    """Channel occupancy charged to a frame: longest stream plus overhead.

    Only payload bits are charged per slot; preamble, guard and end markers
    are folded into the fixed per-frame overhead.
    """
    per_stream = [CODE_BITS * len(p) for p in frame.streams]
    longest = max(per_stream) if per_stream else 0
    return longest * timing.symbol_period + timing.overhead


def round_rate(rate: float) -> float:
    """Round a bit rate half-up to two decimals (reporting convention)."""
    return float(Decimal(repr(rate)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def data_rate(frame: Frame, timing: TimingConfig) -> tuple[float, float]:
    """(exact, rounded) payload data rate for one frame in bit/s."""
    air = frame_air_time(frame, timing)
    exact = frame.payload_bits / air
    return exact, round_rate(exact)
