"""Shared helpers for the test suite."""

import numpy as np
import pytest

from sisdrlab.signals import Signal

RATE = 8000


def make_signal(values, rate=RATE) -> Signal:
    return Signal(np.asarray(values, dtype=np.float64), rate)


def random_signal(seed: int, length: int = 8000, rate: int = RATE, amp: float = 0.5) -> Signal:
    rng = np.random.default_rng(seed)
    return Signal(rng.uniform(-amp, amp, size=length), rate)


def orthogonal_to(target: Signal, seed: int, energy_value: float) -> Signal:
    """A signal of prescribed energy exactly orthogonal to ``target``."""
    rng = np.random.default_rng(seed)
    raw = rng.uniform(-0.5, 0.5, size=len(target))
    t = target.samples
    raw = raw - (raw @ t) / (t @ t) * t
    raw = raw - (raw @ t) / (t @ t) * t  # second pass flushes rounding residue
    raw *= np.sqrt(energy_value / (raw @ raw))
    return Signal(raw, target.sample_rate_hz)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
