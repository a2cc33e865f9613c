"""Separation quality metrics.

Scale-invariant and plain distortion ratios, improvement over a mixture
baseline, and best-permutation (assignment-invariant) evaluation for up to
eight sources.

Sentinel convention: a ratio is +inf when the estimate reconstructs the
(optimally scaled) reference exactly, and -inf when the estimate has no
component along the reference at all. Both checks are scale-aware so that
rescaling estimate or reference can never flip a verdict.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .errors import SourceCountError, UnboundedMetricError, ZeroEnergyError
from .signals import Signal, energy, ensure_compatible, inner_product

__all__ = [
    "MetricValue",
    "PitResult",
    "optimal_scale",
    "si_sdr",
    "sdr",
    "si_sdr_improvement",
    "pit_evaluate",
    "pit_si_sdr_loss",
    "EXACT_RECONSTRUCTION_REL_RESIDUAL",
    "ZERO_PROJECTION_REL_ALPHA",
]

# Residual energy at or below this fraction of the reference energy counts
# as exact reconstruction (+inf).
EXACT_RECONSTRUCTION_REL_RESIDUAL = 1e-24
# |alpha| at or below this multiple of ||est||/||ref|| counts as a vanishing
# projection (-inf).
ZERO_PROJECTION_REL_ALPHA = 1e-12

_MAX_SOURCES = 8


@dataclass(frozen=True)
class MetricValue:
    """A ratio metric in dB; +/-inf mark the two poles described above."""

    db: float

    @property
    def finite(self) -> bool:
        return math.isfinite(self.db)


def optimal_scale(ref: Signal, est: Signal) -> float:
    """Least-squares gain alpha minimizing ||alpha*ref - est||."""
    ensure_compatible(ref, est)
    ref_energy = energy(ref)
    if ref_energy == 0.0:
        raise ZeroEnergyError("reference has zero energy")
    return inner_product(est, ref) / ref_energy


def si_sdr(ref: Signal, est: Signal) -> MetricValue:
    """Scale-invariant ratio of projected reference to residual, in dB.

    The estimate is compared against the reference scaled by the
    least-squares gain, so any nonzero rescaling of either input leaves the
    value unchanged.
    """
    ensure_compatible(ref, est)
    ref_energy = energy(ref)
    est_energy = energy(est)
    if ref_energy == 0.0:
        raise ZeroEnergyError("reference has zero energy")
    if est_energy == 0.0:
        raise ZeroEnergyError("estimate has zero energy")
    alpha = inner_product(est, ref) / ref_energy
    # Vanishing projection first: a tiny orthogonal estimate also has a
    # tiny residual, and must report -inf, not +inf.
    if abs(alpha) <= ZERO_PROJECTION_REL_ALPHA * math.sqrt(est_energy / ref_energy):
        return MetricValue(float("-inf"))
    target_energy = alpha * alpha * ref_energy
    residual = alpha * ref.samples - est.samples
    residual_energy = float(residual @ residual)
    if residual_energy <= EXACT_RECONSTRUCTION_REL_RESIDUAL * ref_energy:
        return MetricValue(float("inf"))
    return MetricValue(10.0 * math.log10(target_energy / residual_energy))


def sdr(ref: Signal, est: Signal) -> MetricValue:
    """Plain (scale-sensitive) ratio of reference to error energy, in dB."""
    ensure_compatible(ref, est)
    ref_energy = energy(ref)
    est_energy = energy(est)
    if ref_energy == 0.0:
        raise ZeroEnergyError("reference has zero energy")
    if est_energy == 0.0:
        raise ZeroEnergyError("estimate has zero energy")
    error = ref.samples - est.samples
    error_energy = float(error @ error)
    if error_energy <= EXACT_RECONSTRUCTION_REL_RESIDUAL * ref_energy:
        return MetricValue(float("inf"))
    return MetricValue(10.0 * math.log10(ref_energy / error_energy))


def si_sdr_improvement(ref: Signal, est: Signal, mixture: Signal) -> float:
    """How much the estimate improves on simply outputting the mixture, in dB."""
    est_value = si_sdr(ref, est)
    mix_value = si_sdr(ref, mixture)
    if not (est_value.finite and mix_value.finite):
        raise UnboundedMetricError(
            "improvement is undefined when either term is infinite: "
            f"estimate {est_value.db}, mixture {mix_value.db}"
        )
    return est_value.db - mix_value.db


@dataclass(frozen=True)
class PitResult:
    """Outcome of best-assignment evaluation.

    ``permutation[i]`` is the reference index matched to estimate ``i``.
    ``mean_db`` is the arithmetic mean of the per-source values whenever all
    are finite, +/-inf when the assignment is uniformly infinite, and nan
    when it mixes the two poles.
    """

    permutation: tuple[int, ...]
    per_source_db: tuple[MetricValue, ...]
    mean_db: float


def _extended_mean(values: list[float]) -> float:
    has_pos = any(v == math.inf for v in values)
    has_neg = any(v == -math.inf for v in values)
    if has_pos and has_neg:
        return float("nan")
    if has_pos:
        return float("inf")
    if has_neg:
        return float("-inf")
    return math.fsum(values) / len(values)


def pit_evaluate(
    refs: list[Signal], ests: list[Signal], metric: str = "si-sdr"
) -> PitResult:
    """Score every estimate/reference bijection and keep the best mean.

    Exact ties go to the lexicographically smallest permutation;
    assignments whose per-source values mix +inf and -inf have an undefined
    mean and rank below every other assignment. Supports 1..8 sources
    (exhaustive enumeration; 8! = 40320 assignments).
    """
    metric_fns = {"si-sdr": si_sdr, "sdr": sdr}
    if metric not in metric_fns:
        raise ValueError(
            f"unknown metric {metric!r}; expected one of {sorted(metric_fns)}"
        )
    if len(refs) != len(ests):
        raise SourceCountError(f"{len(refs)} references vs {len(ests)} estimates")
    n = len(refs)
    if n < 1 or n > _MAX_SOURCES:
        raise SourceCountError(f"source count must be in 1..{_MAX_SOURCES}, got {n}")
    fn = metric_fns[metric]
    table = [[fn(refs[j], ests[i]).db for j in range(n)] for i in range(n)]
    best_perm: tuple[int, ...] | None = None
    best_mean = float("nan")
    best_key = float("-inf")
    for perm in itertools.permutations(range(n)):
        mean = _extended_mean([table[i][j] for i, j in enumerate(perm)])
        key = float("-inf") if math.isnan(mean) else mean
        if best_perm is None or key > best_key:
            best_perm = perm
            best_mean = mean
            best_key = key
    assert best_perm is not None
    per_source = tuple(MetricValue(table[i][j]) for i, j in enumerate(best_perm))
    return PitResult(best_perm, per_source, best_mean)


def pit_si_sdr_loss(refs: list[Signal], ests: list[Signal]) -> float:
    """Negative best-assignment mean of the scale-invariant ratio.

    Finite by construction or it raises: optimizers cannot step on inf.
    """
    result = pit_evaluate(refs, ests, "si-sdr")
    if not all(v.finite for v in result.per_source_db):
        raise UnboundedMetricError(
            "loss is undefined: at least one per-source value is infinite"
        )
    return -result.mean_db
