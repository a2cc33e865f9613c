"""Elementary operations on mono signals.

All arithmetic is IEEE double precision. :class:`Signal` is an immutable
value object; every operation returns a new one and never mutates inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SignalMismatchError, ZeroEnergyError

__all__ = [
    "Signal",
    "ensure_compatible",
    "energy",
    "inner_product",
    "correlation_coefficient",
    "scale",
    "add",
    "snr_db",
    "gain_for_target_snr",
    "generate_test_signal",
]

_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True, eq=False)
class Signal:
    """A mono waveform: finite float64 samples plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must all be finite")
        rate = int(self.sample_rate_hz)
        if rate <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {rate}")
        samples = samples.copy()
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", rate)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


def ensure_compatible(a: Signal, b: Signal) -> None:
    """Raise SignalMismatchError unless a and b share length and rate."""
    if len(a) != len(b):
        raise SignalMismatchError(f"length mismatch: {len(a)} vs {len(b)}")
    if a.sample_rate_hz != b.sample_rate_hz:
        raise SignalMismatchError(
            f"sample rate mismatch: {a.sample_rate_hz} vs {b.sample_rate_hz}"
        )


def energy(s: Signal, compensated: bool = False) -> float:
    """Sum of squared samples.

    With ``compensated=True`` the sum is accumulated exactly (math.fsum),
    which matters only for signals long enough that plain accumulation
    drifts (millions of samples).
    """
    if compensated:
        return math.fsum(float(x) * float(x) for x in s.samples)
    return float(np.dot(s.samples, s.samples))


def inner_product(a: Signal, b: Signal, compensated: bool = False) -> float:
    """Euclidean inner product of two equal-length signals."""
    ensure_compatible(a, b)
    if compensated:
        return math.fsum(float(x) * float(y) for x, y in zip(a.samples, b.samples))
    return float(np.dot(a.samples, b.samples))


def correlation_coefficient(a: Signal, b: Signal) -> float:
    """Cosine of the angle between two signals, clamped to [-1, 1]."""
    ensure_compatible(a, b)
    ea = energy(a)
    eb = energy(b)
    if ea == 0.0 or eb == 0.0:
        raise ZeroEnergyError("correlation is undefined for an all-zero signal")
    rho = inner_product(a, b) / math.sqrt(ea * eb)
    return min(1.0, max(-1.0, rho))


def scale(s: Signal, gain: float) -> Signal:
    """Multiply every sample by a finite gain."""
    gain = float(gain)
    if not math.isfinite(gain):
        raise ValueError(f"gain must be finite, got {gain}")
    return Signal(s.samples * gain, s.sample_rate_hz)


def add(a: Signal, b: Signal) -> Signal:
    """Sample-wise sum of two compatible signals."""
    ensure_compatible(a, b)
    return Signal(a.samples + b.samples, a.sample_rate_hz)


def snr_db(target: Signal, noise: Signal) -> float:
    """Energy ratio of target to noise in dB."""
    ensure_compatible(target, noise)
    et = energy(target)
    en = energy(noise)
    if et == 0.0:
        raise ZeroEnergyError("target has zero energy")
    if en == 0.0:
        raise ZeroEnergyError("noise has zero energy")
    return 10.0 * math.log10(et / en)


def gain_for_target_snr(target: Signal, noise: Signal, snr_target_db: float) -> float:
    """Gain g such that snr_db(target, scale(noise, g)) == snr_target_db.

    Pure energy arithmetic; the two signals need not share a length.
    """
    snr_target_db = float(snr_target_db)
    if not math.isfinite(snr_target_db):
        raise ValueError(f"snr_target_db must be finite, got {snr_target_db}")
    et = energy(target)
    en = energy(noise)
    if et == 0.0:
        raise ZeroEnergyError("target has zero energy")
    if en == 0.0:
        raise ZeroEnergyError("noise has zero energy")
    return math.sqrt(et / en) * 10.0 ** (-snr_target_db / 20.0)


_KIND_TAGS = {"white-noise": 0, "sine": 1, "chirp": 2}


def generate_test_signal(
    kind: str, length: int, sample_rate_hz: int, seed: int
) -> Signal:
    """Deterministic synthetic signal for experiments and tests.

    Kinds:
      * ``white-noise`` — i.i.d. uniform samples in [-0.5, 0.5).
      * ``sine`` — amplitude 0.45; frequency (2%..45% of the sample rate)
        and phase drawn from the seed.
      * ``chirp`` — amplitude 0.45; linear sweep from 2% to 45% of the
        sample rate over the signal, start phase drawn from the seed.

    The same (kind, length, sample_rate_hz, seed) always yields the same
    samples; different kinds use distinct streams of the same seed.
    """
    if kind not in _KIND_TAGS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {sorted(_KIND_TAGS)}")
    length = int(length)
    if length < 1:
        raise ValueError("length must be >= 1")
    rate = int(sample_rate_hz)
    if rate <= 0:
        raise ValueError("sample_rate_hz must be positive")
    rng = np.random.default_rng(
        np.random.SeedSequence([int(seed) & _MASK64, _KIND_TAGS[kind]])
    )
    if kind == "white-noise":
        samples = rng.uniform(-0.5, 0.5, size=length)
    elif kind == "sine":
        freq = rng.uniform(0.02 * rate, 0.45 * rate)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        t = np.arange(length, dtype=np.float64) / rate
        samples = 0.45 * np.sin(2.0 * math.pi * freq * t + phase)
    else:  # chirp
        f0 = 0.02 * rate
        f1 = 0.45 * rate
        phase = rng.uniform(0.0, 2.0 * math.pi)
        t = np.arange(length, dtype=np.float64) / rate
        duration = length / rate
        inst_phase = 2.0 * math.pi * (f0 * t + (f1 - f0) * t * t / (2.0 * duration))
        samples = 0.45 * np.sin(inst_phase + phase)
    return Signal(samples, rate)
