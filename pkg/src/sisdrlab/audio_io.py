"""Bit-exact mono WAV reading and writing.

Only 16-bit little-endian integer PCM, single channel. Quantization is
symmetric: floats are scaled by 2**15, rounded half away from zero and
saturated to the int16 range, so a write/read round trip moves no sample by
more than one quantization step (2**-15).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    MultiChannelError,
    SampleRangeError,
    SignalMismatchError,
    UnsupportedEncodingError,
    WavFormatError,
)
from .signals import Signal

__all__ = ["WavSpec", "read_wav", "write_wav", "quantize"]

_PCM_FORMAT_CODE = 1
_FULL_SCALE = 32768.0  # 2**15
_INT16_MIN = -32768
_INT16_MAX = 32767


@dataclass(frozen=True)
class WavSpec:
    """Container parameters for PCM output; this version is locked to 16-bit mono."""

    sample_rate_hz: int
    bit_depth: int = 16
    channels: int = 1

    def __post_init__(self) -> None:
        if int(self.sample_rate_hz) <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.bit_depth != 16:
            raise ValueError("only 16-bit PCM is supported")
        if self.channels != 1:
            raise ValueError("only mono files are supported")
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))


def read_wav(path: str | Path) -> Signal:
    """Read a 16-bit mono PCM WAV file into floats in [-1, 1).

    Integer codes are divided by 2**15, so code 16384 reads back as exactly
    0.5. Raises FileNotFoundError for a missing file, WavFormatError for a
    malformed container, UnsupportedEncodingError for non-16-bit-PCM data
    and MultiChannelError for anything but mono.
    """
    blob = Path(path).read_bytes()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")
    fmt_body = None
    data_body = None
    offset = 12
    while offset + 8 <= len(blob):
        chunk_id = blob[offset : offset + 4]
        (size,) = struct.unpack_from("<I", blob, offset + 4)
        body = blob[offset + 8 : offset + 8 + size]
        if len(body) < size:
            raise WavFormatError(
                f"{path}: truncated {chunk_id.decode('ascii', 'replace').strip()} chunk"
            )
        if chunk_id == b"fmt " and fmt_body is None:
            fmt_body = body
        elif chunk_id == b"data" and data_body is None:
            data_body = body
        offset += 8 + size + (size & 1)  # chunks are 16-bit aligned
    if fmt_body is None:
        raise WavFormatError(f"{path}: missing fmt chunk")
    if data_body is None:
        raise WavFormatError(f"{path}: missing data chunk")
    if len(fmt_body) < 16:
        raise WavFormatError(f"{path}: fmt chunk too short")
    format_code, channels, sample_rate, _, _, bits = struct.unpack_from(
        "<HHIIHH", fmt_body
    )
    if format_code != _PCM_FORMAT_CODE:
        raise UnsupportedEncodingError(
            f"{path}: format code {format_code}; only integer PCM (code 1) is supported"
        )
    if channels != 1:
        raise MultiChannelError(f"{path}: {channels} channels; only mono is supported")
    if bits != 16:
        raise UnsupportedEncodingError(
            f"{path}: {bits}-bit samples; only 16-bit PCM is supported"
        )
    if sample_rate <= 0:
        raise WavFormatError(f"{path}: invalid sample rate {sample_rate}")
    if len(data_body) == 0:
        raise WavFormatError(f"{path}: empty data chunk")
    if len(data_body) % 2:
        raise WavFormatError(f"{path}: data chunk is not a whole number of samples")
    codes = np.frombuffer(data_body, dtype="<i2")
    return Signal(codes.astype(np.float64) / _FULL_SCALE, sample_rate)


def quantize(samples: np.ndarray, clip_policy: str = "error") -> np.ndarray:
    """Map floats to int16 PCM codes (scale 2**15, round half away from zero).

    clip_policy 'saturate' clamps out-of-range values to the int16 limits;
    'error' raises SampleRangeError if any |sample| exceeds 1.0.
    """
    if clip_policy not in ("saturate", "error"):
        raise ValueError(f"unknown clip_policy {clip_policy!r}")
    x = np.asarray(samples, dtype=np.float64)
    if clip_policy == "error" and x.size:
        peak = float(np.max(np.abs(x)))
        if peak > 1.0:
            raise SampleRangeError(f"peak |sample| {peak:.6g} exceeds 1.0")
    scaled = x * _FULL_SCALE
    # np.round would round halves to even; the format contract is half away
    # from zero, which trunc(x + sign(x)*0.5) implements exactly.
    rounded = np.trunc(scaled + np.copysign(0.5, scaled))
    return np.clip(rounded, _INT16_MIN, _INT16_MAX).astype(np.int16)


def write_wav(
    path: str | Path,
    s: Signal,
    wav_spec: WavSpec | None = None,
    clip_policy: str = "error",
) -> None:
    """Write a signal as 16-bit mono PCM; identical inputs give identical bytes.

    The header is a fixed 44-byte canonical RIFF layout with no optional
    chunks, so files are directly comparable byte-for-byte.
    """
    if wav_spec is None:
        wav_spec = WavSpec(s.sample_rate_hz)
    elif wav_spec.sample_rate_hz != s.sample_rate_hz:
        raise SignalMismatchError(
            f"spec rate {wav_spec.sample_rate_hz} != signal rate {s.sample_rate_hz}"
        )
    codes = quantize(s.samples, clip_policy)
    payload = codes.astype("<i2").tobytes()
    rate = wav_spec.sample_rate_hz
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        _PCM_FORMAT_CODE,
        1,
        rate,
        rate * 2,  # byte rate = rate * block align
        2,  # block align: mono 16-bit
        16,
        b"data",
        len(payload),
    )
    Path(path).write_bytes(header + payload)
