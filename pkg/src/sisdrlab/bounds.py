"""Behaviour of the scale-invariant ratio when the reference itself is noisy.

A recorded "reference" is modelled as target + noise. Even a perfect
estimate (one that returns the clean target exactly) then scores a finite
value against that reference, and the score admits a closed form in just
three quantities: the target energy, the noise energy and their correlation.
This module provides that closed form, the exact expansion it comes from, a
constructor for references with prescribed correlation/SNR, and the curve
obtained by scaling the reference's noise constituent up or down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import signals
from .errors import DegenerateCorrelationError, ParallelSignalsError, ZeroEnergyError
from .metrics import MetricValue, ZERO_PROJECTION_REL_ALPHA, si_sdr
from .signals import Signal

__all__ = [
    "NoisyReference",
    "DenominatorTerms",
    "TradeoffPoint",
    "TradeoffCurve",
    "ideal_alpha",
    "denominator_terms",
    "factored_denominator",
    "ideal_upper_bound",
    "si_sdr_decomposed",
    "construct_reference_with_rho",
    "default_betas",
    "tradeoff_curve",
]

# |rho| this close to 1 makes the (1 - rho^2) factor meaningless in double
# precision; operations dividing by it refuse to proceed.
RHO_DEGENERACY_GUARD = 1e-9


@dataclass(frozen=True, eq=False)
class NoisyReference:
    """A reference decomposed as target + noise, with measured statistics.

    ``rho`` is the correlation between the two constituents and ``snr_db``
    their energy ratio in dB; both are computed once at construction.
    """

    target: Signal
    noise: Signal
    rho: float = field(init=False)
    snr_db: float = field(init=False)

    def __post_init__(self) -> None:
        signals.ensure_compatible(self.target, self.noise)
        object.__setattr__(
            self, "rho", signals.correlation_coefficient(self.target, self.noise)
        )
        object.__setattr__(self, "snr_db", signals.snr_db(self.target, self.noise))

    def composite(self) -> Signal:
        """The observable reference: target and noise summed sample-wise."""
        return signals.add(self.target, self.noise)


@dataclass(frozen=True)
class DenominatorTerms:
    """Residual-energy expansion for an ideal estimate, term by term.

    With g the least-squares gain of the composite reference against the
    clean target, the residual splits into a target part a = (g-1)^2 * Et,
    a noise part b = g^2 * En and a cross term
    c = 2 g (g-1) rho sqrt(Et En). Their sum is the exact residual energy.
    """

    a: float
    b: float
    c: float

    @property
    def total(self) -> float:
        return self.a + self.b + self.c


def _guard_rho(rho: float) -> None:
    if abs(rho) >= 1.0 - RHO_DEGENERACY_GUARD:
        raise DegenerateCorrelationError(
            f"|rho| = {abs(rho):.12f} is too close to 1; target and noise are "
            "effectively parallel"
        )


def ideal_alpha(ref: NoisyReference) -> float:
    """Least-squares gain of the composite reference against the clean target.

    Closed form (Et + rho*sqrt(Et*En)) / (Et + En + 2*rho*sqrt(Et*En)):
    what the scale-invariant metric multiplies the reference by when the
    estimate is the clean target itself.
    """
    et = signals.energy(ref.target)
    en = signals.energy(ref.noise)
    cross = ref.rho * math.sqrt(et * en)
    composite_energy = et + en + 2.0 * cross
    if composite_energy <= 1e-15 * (et + en):
        raise DegenerateCorrelationError(
            "target and noise cancel: composite reference has (near-)zero energy"
        )
    return (et + cross) / composite_energy


def denominator_terms(ref: NoisyReference) -> DenominatorTerms:
    """Exact term-by-term expansion of the ideal estimate's residual energy."""
    _guard_rho(ref.rho)
    et = signals.energy(ref.target)
    en = signals.energy(ref.noise)
    cross = ref.rho * math.sqrt(et * en)
    alpha = ideal_alpha(ref)
    a = (alpha - 1.0) ** 2 * et
    b = alpha * alpha * en
    c = 2.0 * alpha * (alpha - 1.0) * cross
    return DenominatorTerms(a=a, b=b, c=c)


def factored_denominator(ref: NoisyReference) -> float:
    """The same residual energy in product form.

    En * Et * (1 - rho^2) / (Et + En + 2*rho*sqrt(Et*En)) — algebraically
    equal to DenominatorTerms.total but free of subtractive cancellation.
    """
    _guard_rho(ref.rho)
    et = signals.energy(ref.target)
    en = signals.energy(ref.noise)
    cross = ref.rho * math.sqrt(et * en)
    composite_energy = et + en + 2.0 * cross
    if composite_energy <= 1e-15 * (et + en):
        raise DegenerateCorrelationError(
            "target and noise cancel: composite reference has (near-)zero energy"
        )
    return en * et * (1.0 - ref.rho * ref.rho) / composite_energy


def ideal_upper_bound(ref: NoisyReference) -> float:
    """Best scale-invariant score any estimate can reach against this reference.

    Attained by the clean target itself:
    10*log10((Et + rho*sqrt(Et*En))^2 / (En*Et*(1 - rho^2))). For rho = 0
    this reduces to Et/En — the reference SNR caps the achievable score.
    """
    _guard_rho(ref.rho)
    et = signals.energy(ref.target)
    en = signals.energy(ref.noise)
    cross = ref.rho * math.sqrt(et * en)
    numerator = (et + cross) ** 2
    denominator = en * et * (1.0 - ref.rho * ref.rho)
    if numerator == 0.0:
        # The target is orthogonal to the composite: no projection survives.
        return float("-inf")
    return 10.0 * math.log10(numerator / denominator)


def si_sdr_decomposed(ref: NoisyReference, est: Signal) -> MetricValue:
    """Scale-invariant ratio against target+noise without forming their sum.

    Expands every energy and inner product over the (target, noise) split —
    an independent computational route that must agree with the direct
    metric on the composite signal. The expansion obtains the residual by
    cancellation of large terms, so it cannot resolve residuals below about
    1e-15 of the estimate energy; anything under 1e-12 of it is reported as
    exact reconstruction (+inf).
    """
    signals.ensure_compatible(ref.target, est)
    et = signals.energy(ref.target)
    en = signals.energy(ref.noise)
    est_energy = signals.energy(est)
    if est_energy == 0.0:
        raise ZeroEnergyError("estimate has zero energy")
    tn = signals.inner_product(ref.target, ref.noise)
    composite_energy = et + en + 2.0 * tn
    if composite_energy <= 1e-15 * (et + en):
        raise DegenerateCorrelationError(
            "target and noise cancel: composite reference has (near-)zero energy"
        )
    e_dot_t = signals.inner_product(est, ref.target)
    e_dot_n = signals.inner_product(est, ref.noise)
    alpha = (e_dot_t + e_dot_n) / composite_energy
    if abs(alpha) <= ZERO_PROJECTION_REL_ALPHA * math.sqrt(
        est_energy / composite_energy
    ):
        return MetricValue(float("-inf"))
    target_energy = alpha * alpha * composite_energy
    residual = (
        alpha * alpha * composite_energy
        + est_energy
        - 2.0 * alpha * (e_dot_t + e_dot_n)
    )
    # The expansion can go negative by rounding when the estimate
    # reconstructs the reference almost exactly; that is the +inf pole.
    # 1e-12 of the estimate energy sits safely above the cancellation floor.
    if residual <= 1e-12 * est_energy:
        return MetricValue(float("inf"))
    return MetricValue(10.0 * math.log10(target_energy / residual))


def construct_reference_with_rho(
    target: Signal, raw_noise: Signal, rho: float, snr_db: float
) -> NoisyReference:
    """Build a reference whose noise has prescribed correlation and SNR.

    The raw noise only donates a direction: it is orthogonalised against the
    target, recombined with the target direction at correlation ``rho``
    (|rho| < 1), then scaled so the target-to-noise energy ratio is
    ``snr_db``. The resulting measured statistics match the requested ones
    to rounding error.
    """
    rho = float(rho)
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho must lie strictly inside (-1, 1), got {rho}")
    snr_db = float(snr_db)
    if not math.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite, got {snr_db}")
    signals.ensure_compatible(target, raw_noise)
    et = signals.energy(target)
    e_raw = signals.energy(raw_noise)
    if et == 0.0:
        raise ZeroEnergyError("target has zero energy")
    if e_raw == 0.0:
        raise ZeroEnergyError("raw noise has zero energy")
    t = target.samples
    u = t / math.sqrt(et)
    residual = raw_noise.samples - float(raw_noise.samples @ u) * u
    residual_energy = float(residual @ residual)
    if residual_energy <= 1e-24 * e_raw:
        raise ParallelSignalsError(
            "raw noise is parallel to the target; no orthogonal direction left"
        )
    v = residual / math.sqrt(residual_energy)
    unit_noise = rho * u + math.sqrt(1.0 - rho * rho) * v
    noise = unit_noise * (math.sqrt(et) * 10.0 ** (-snr_db / 20.0))
    return NoisyReference(target, Signal(noise, target.sample_rate_hz))


@dataclass(frozen=True)
class TradeoffPoint:
    """One noise scaling: the factor, the resulting SNR, and the score."""

    beta: float
    output_snr_db: float
    si_sdr_db: float


@dataclass(frozen=True)
class TradeoffCurve:
    """Scores of partially-denoised outputs against the full noisy reference."""

    reference_snr_db: float
    points: tuple[TradeoffPoint, ...]


def default_betas(count: int = 50, stop: float = 1e-4) -> list[float]:
    """Log-spaced noise scalings from 1.0 down to ``stop``."""
    count = int(count)
    if count < 2:
        raise ValueError("count must be >= 2")
    stop = float(stop)
    if not 0.0 < stop < 1.0:
        raise ValueError(f"stop must lie in (0, 1), got {stop}")
    grid = np.logspace(0.0, math.log10(stop), count)
    betas = [float(b) for b in grid]
    betas[0] = 1.0  # the grid must start at exactly 1 (no-denoising anchor)
    return betas


def _validate_betas(betas: list[float]) -> list[float]:
    betas = [float(b) for b in betas]
    if not betas:
        raise ValueError("betas must be non-empty")
    if betas[0] != 1.0:
        raise ValueError("betas must start at exactly 1.0")
    for b in betas:
        if not 0.0 < b <= 1.0:
            raise ValueError(f"every beta must lie in (0, 1], got {b}")
    for prev, cur in zip(betas, betas[1:]):
        if not cur < prev:
            raise ValueError("betas must be strictly decreasing")
    return betas


def tradeoff_curve(ref: NoisyReference, betas: list[float] | None = None) -> TradeoffCurve:
    """Score outputs that keep the target and scale the noise by each beta.

    The estimate at scaling beta is target + beta*noise, evaluated against
    the full composite reference (beta = 1 reproduces the reference exactly
    and scores +inf). output_snr_db is the target-to-scaled-noise ratio
    actually achieved at that point.
    """
    betas = default_betas() if betas is None else _validate_betas(list(betas))
    composite = ref.composite()
    points = []
    for beta in betas:
        scaled_noise = signals.scale(ref.noise, beta)
        estimate = signals.add(ref.target, scaled_noise)
        output_snr = signals.snr_db(ref.target, scaled_noise)
        value = si_sdr(composite, estimate)
        points.append(
            TradeoffPoint(beta=beta, output_snr_db=output_snr, si_sdr_db=value.db)
        )
    return TradeoffCurve(reference_snr_db=ref.snr_db, points=tuple(points))
