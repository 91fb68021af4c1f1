"""Text codec, framing, interleaving and air-time accounting."""

import numpy as np
import pytest

from molmimo import modem, protocol
from molmimo.errors import (
    EmptyMessage,
    InvalidParameter,
    MalformedStream,
    MissingEndIndicator,
    UnsupportedCharacter,
)

SISO_TIMING = modem.TimingConfig(symbol_period=3.4, links=1)
MIMO_TIMING = modem.TimingConfig(symbol_period=3.8, links=2)

ALPHABET = "abcdefghijklmnopqrstuvwxyz .,?"


# =====================================================================
# CODEC
# =====================================================================

def test_single_char_siso_frame():
    frame = protocol.encode_text("a", mode="siso")
    assert frame.stream_bits == ((0, 0, 0, 0, 1, 1, 1, 1, 1, 1),)


def test_codes_cover_alphabet_bijectively():
    codes = [protocol.CHAR_TO_CODE[c] for c in ALPHABET]
    assert len(set(codes)) == len(ALPHABET)
    assert min(codes) == 1 and max(codes) == 30
    assert protocol.EOT_CODE == 31
    assert 0 not in codes            # reserved
    assert 31 not in codes           # end marker cannot appear in payload
    for c in ALPHABET:
        assert protocol.CODE_TO_CHAR[protocol.CHAR_TO_CODE[c]] == c


def test_codes_are_msb_first():
    # 'b' is code 2 -> 00010
    assert protocol.encode_chars("b") == [0, 0, 0, 1, 0]
    # 'z' is code 26 -> 11010
    assert protocol.encode_chars("z") == [1, 1, 0, 1, 0]


def test_unsupported_character_rejected():
    with pytest.raises(UnsupportedCharacter):
        protocol.encode_text("É", mode="siso")
    with pytest.raises(UnsupportedCharacter):
        protocol.encode_text("semi;colon", mode="mimo")


def test_case_folds_to_lower():
    assert protocol.encode_text("AbC", mode="siso").message == "abc"


def test_empty_message_rejected():
    with pytest.raises(EmptyMessage):
        protocol.encode_text("", mode="mimo")


# =====================================================================
# FRAMING AND INTERLEAVING
# =====================================================================

def test_mimo_deals_characters_round_robin():
    frame = protocol.encode_text("abcdef", mode="mimo")
    assert frame.streams == ("ace", "bdf")
    assert frame.payload_bits == 30
    for bits in frame.stream_bits:
        assert len(bits) == 20                      # 15 payload + end marker
        assert bits[-5:] == protocol.EOT_BITS


def test_stream_balance():
    even = protocol.encode_text("abcdef", mode="mimo")
    assert len(even.streams[0]) == len(even.streams[1]) == 3
    odd = protocol.encode_text("abcde", mode="mimo")
    assert len(odd.streams[0]) == 3 and len(odd.streams[1]) == 2


def test_round_trip_identity():
    rng = np.random.default_rng(11)
    cases = ["a", "ab", "hello?", "x" * 12, "the, quick."]
    for n in range(1, 13):
        cases.append("".join(rng.choice(list(ALPHABET), n)))
    for mode in protocol.MODES:
        for text in cases:
            frame = protocol.encode_text(text, mode=mode)
            assert protocol.decode_text(frame.stream_bits, mode=mode) == text


def test_reserved_code_decodes_to_question_mark():
    bits = (0, 0, 0, 0, 0) + protocol.EOT_BITS
    assert protocol.decode_stream(bits) == "?"


def test_decoding_stops_at_end_marker():
    tail_garbage = protocol.encode_chars("ab") + list(protocol.EOT_BITS) \
        + protocol.encode_chars("zz")
    assert protocol.decode_stream(tail_garbage) == "ab"


def test_missing_end_marker_rejected():
    with pytest.raises(MissingEndIndicator):
        protocol.decode_stream((0, 0, 0, 0, 1))
    with pytest.raises(MissingEndIndicator):
        protocol.decode_text([(0, 0, 0, 0, 1)], mode="siso")


def test_ragged_stream_rejected():
    with pytest.raises(MalformedStream):
        protocol.decode_stream((0, 0, 0, 1))
    with pytest.raises(MalformedStream):
        protocol.decode_stream((0, 1, 2, 0, 0))


def test_lenient_decode_reports_missing_marker():
    text, saw_eot = protocol.decode_stream_lenient(protocol.encode_chars("abc"))
    assert text == "abc" and saw_eot is False
    text, saw_eot = protocol.decode_stream_lenient(
        protocol.encode_chars("abc") + list(protocol.EOT_BITS))
    assert text == "abc" and saw_eot is True
    # trailing partial code dropped rather than raised
    text, _ = protocol.decode_stream_lenient(protocol.encode_chars("ab") + [1, 0])
    assert text == "ab"


def test_stream_count_must_match_mode():
    frame = protocol.encode_text("abcd", mode="mimo")
    with pytest.raises(InvalidParameter):
        protocol.decode_text(frame.stream_bits, mode="siso")


def test_interleave_deinterleave_are_inverse():
    for streams in (1, 2, 3):
        parts = protocol.interleave("abcdefg", streams)
        assert protocol.deinterleave(parts) == "abcdefg"
    # uneven parts pad missing positions, keep delivered ones
    assert protocol.deinterleave(["ace", "b"]) == "abc?e"
    assert protocol.deinterleave(["", ""]) == ""


# =====================================================================
# AIR TIME
# =====================================================================

def test_reference_frame_air_times():
    siso = protocol.encode_text("abcdef", mode="siso")
    mimo = protocol.encode_text("abcdef", mode="mimo")
    assert protocol.frame_air_time(siso, SISO_TIMING) == pytest.approx(108.0)
    assert protocol.frame_air_time(mimo, MIMO_TIMING) == pytest.approx(63.0)


def test_air_time_ratio_is_twelve_sevenths():
    siso = protocol.encode_text("abcdef", mode="siso")
    mimo = protocol.encode_text("abcdef", mode="mimo")
    ratio = (protocol.frame_air_time(siso, SISO_TIMING)
             / protocol.frame_air_time(mimo, MIMO_TIMING))
    assert ratio == pytest.approx(12.0 / 7.0, rel=1e-12)


def test_zero_payload_costs_only_overhead():
    frame = protocol.Frame(mode="siso", message="", streams=("",),
                           stream_bits=(protocol.EOT_BITS,))
    assert protocol.frame_air_time(frame, SISO_TIMING) == SISO_TIMING.overhead


def test_longest_stream_sets_mimo_air_time():
    odd = protocol.encode_text("abcde", mode="mimo")   # streams of 3 and 2
    assert protocol.frame_air_time(odd, MIMO_TIMING) == pytest.approx(
        15 * 3.8 + 6.0)


def test_reported_rates_round_half_up():
    siso = protocol.encode_text("abcdef", mode="siso")
    mimo = protocol.encode_text("abcdef", mode="mimo")
    assert protocol.data_rate(siso, SISO_TIMING) == (pytest.approx(30 / 108), 0.28)
    assert protocol.data_rate(mimo, MIMO_TIMING) == (pytest.approx(30 / 63), 0.48)
    assert protocol.round_rate(0.275) == 0.28    # half goes up, not to even
    assert protocol.round_rate(0.005) == 0.01
