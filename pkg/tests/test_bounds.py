import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sisdrlab.bounds import (
    NoisyReference,
    construct_reference_with_rho,
    default_betas,
    denominator_terms,
    factored_denominator,
    ideal_alpha,
    ideal_upper_bound,
    si_sdr_decomposed,
    tradeoff_curve,
)
from sisdrlab.errors import (
    DegenerateCorrelationError,
    ParallelSignalsError,
    SignalMismatchError,
    ZeroEnergyError,
)
from sisdrlab.metrics import optimal_scale, si_sdr
from sisdrlab.signals import Signal, scale

from conftest import RATE, make_signal, random_signal

# Closed form evaluated by hand for Et/En = 10 (i.e. 10 dB) and rho = 0.5:
# 10*log10((10 + 0.5*sqrt(10))^2 / (10 * (1 - 0.25))).
BOUND_SNR10_RHO05 = 12.524412721964852


def reference(seed: int, rho: float, snr: float, length: int = 8000) -> NoisyReference:
    target = random_signal(seed, length=length)
    raw = random_signal(seed + 100_000, length=length)
    return construct_reference_with_rho(target, raw, rho, snr)


class TestNoisyReference:
    def test_measures_statistics(self):
        ref = reference(1, 0.25, 7.5)
        assert ref.rho == pytest.approx(0.25, abs=1e-9)
        assert ref.snr_db == pytest.approx(7.5, abs=1e-9)

    def test_composite_is_exact_sum(self):
        ref = reference(2, -0.4, 3.0)
        np.testing.assert_array_equal(
            ref.composite().samples, ref.target.samples + ref.noise.samples
        )

    def test_rejects_mismatch(self):
        with pytest.raises(SignalMismatchError):
            NoisyReference(make_signal([1.0, 2.0]), make_signal([1.0]))

    def test_rejects_zero_energy(self):
        with pytest.raises(ZeroEnergyError):
            NoisyReference(make_signal([1.0, 0.0]), make_signal([0.0, 0.0]))


class TestIdealAlpha:
    def test_orthogonal_equal_energy_is_half(self):
        ref = NoisyReference(make_signal([1.0, 0.0]), make_signal([0.0, 1.0]))
        assert ideal_alpha(ref) == 0.5

    def test_vanishing_noise_tends_to_one(self):
        ref = NoisyReference(make_signal([1.0, 0.0]), make_signal([0.0, 1e-10]))
        assert abs(ideal_alpha(ref) - 1.0) <= 1e-9

    def test_equals_least_squares_gain_of_composite(self):
        for seed in range(20):
            ref = reference(seed, float(np.random.default_rng(seed).uniform(-0.8, 0.8)), 12.0)
            assert ideal_alpha(ref) == pytest.approx(
                optimal_scale(ref.composite(), ref.target), rel=1e-12
            )

    def test_cancelling_constituents_rejected(self):
        target = make_signal([1.0, 1.0])
        noise = scale(target, -1.0 + 1e-13)
        with pytest.raises(DegenerateCorrelationError):
            ideal_alpha(NoisyReference(target, noise))


class TestDenominatorTerms:
    def test_orthogonal_equal_energy_split(self):
        ref = NoisyReference(make_signal([1.0, 0.0]), make_signal([0.0, 1.0]))
        terms = denominator_terms(ref)
        assert (terms.a, terms.b, terms.c) == (0.25, 0.25, 0.0)
        assert terms.total == 0.5

    def test_parallel_noise_rejected(self):
        target = random_signal(3, length=500)
        with pytest.raises(DegenerateCorrelationError):
            denominator_terms(NoisyReference(target, scale(target, 1e-6)))

    def test_expansion_matches_direct_residual(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            ref = reference(
                int(rng.integers(0, 10_000)),
                float(rng.uniform(-0.9, 0.9)),
                float(rng.uniform(-10.0, 40.0)),
                length=2000,
            )
            alpha = ideal_alpha(ref)
            residue = alpha * ref.composite().samples - ref.target.samples
            direct = float(residue @ residue)
            terms = denominator_terms(ref)
            assert terms.total == pytest.approx(direct, rel=1e-9)
            assert factored_denominator(ref) == pytest.approx(direct, rel=1e-9)
            assert terms.total == pytest.approx(factored_denominator(ref), rel=1e-9)


class TestIdealUpperBound:
    def test_zero_correlation_equals_reference_snr(self):
        for snr in (0.0, 5.0, 10.0, 20.0, 40.0):
            ref = reference(5, 0.0, snr)
            assert ideal_upper_bound(ref) == pytest.approx(snr, abs=1e-9)

    def test_frozen_value_snr10_rho05(self):
        ref = reference(6, 0.5, 10.0)
        assert ideal_upper_bound(ref) == pytest.approx(BOUND_SNR10_RHO05, abs=1e-9)

    def test_attained_by_clean_target(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(200):
            ref = reference(
                int(rng.integers(0, 10_000)),
                float(rng.uniform(-0.9, 0.9)),
                float(rng.uniform(-10.0, 40.0)),
                length=2000,
            )
            direct = si_sdr(ref.composite(), ref.target).db
            worst = max(worst, abs(ideal_upper_bound(ref) - direct))
        assert worst < 1e-6

    def test_positive_rho_raises_the_ceiling(self):
        low = ideal_upper_bound(reference(8, 0.0, 10.0))
        high = ideal_upper_bound(reference(8, 0.5, 10.0))
        assert high > low

    def test_near_parallel_rejected(self):
        target = random_signal(9, length=500)
        with pytest.raises(DegenerateCorrelationError):
            ideal_upper_bound(NoisyReference(target, scale(target, 0.1)))


class TestSiSdrDecomposed:
    def test_agrees_with_direct_route(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            ref = reference(
                int(rng.integers(0, 10_000)),
                float(rng.uniform(-0.9, 0.9)),
                float(rng.uniform(-5.0, 30.0)),
                length=1500,
            )
            est = Signal(
                ref.target.samples + rng.normal(0.0, 0.1, len(ref.target)), RATE
            )
            direct = si_sdr(ref.composite(), est).db
            split = si_sdr_decomposed(ref, est).db
            assert abs(direct - split) < 1e-9

    def test_exact_composite_estimate_is_plus_inf(self):
        ref = reference(11, 0.3, 8.0)
        assert si_sdr_decomposed(ref, ref.composite()).db == math.inf

    def test_zero_estimate_rejected(self):
        ref = reference(12, 0.0, 10.0)
        with pytest.raises(ZeroEnergyError):
            si_sdr_decomposed(ref, Signal(np.zeros(len(ref.target)), RATE))


class TestConstructReference:
    @pytest.mark.parametrize("rho", [0.0, -0.3, 0.77])
    def test_achieves_requested_rho(self, rho):
        ref = reference(13, rho, 10.0)
        assert ref.rho == pytest.approx(rho, abs=1e-9)

    @pytest.mark.parametrize("snr", [-10.0, 0.0, 20.0])
    def test_achieves_requested_snr(self, snr):
        ref = reference(14, 0.2, snr)
        assert ref.snr_db == pytest.approx(snr, abs=1e-9)

    def test_rejects_unit_rho(self):
        t = random_signal(15, length=100)
        raw = random_signal(16, length=100)
        for rho in (1.0, -1.0, 1.5):
            with pytest.raises(ValueError):
                construct_reference_with_rho(t, raw, rho, 10.0)

    def test_rejects_parallel_raw_noise(self):
        t = random_signal(17, length=100)
        with pytest.raises(ParallelSignalsError):
            construct_reference_with_rho(t, scale(t, 2.0), 0.0, 10.0)

    def test_rejects_zero_energy(self):
        t = random_signal(18, length=100)
        z = Signal(np.zeros(100), RATE)
        with pytest.raises(ZeroEnergyError):
            construct_reference_with_rho(z, t, 0.0, 10.0)
        with pytest.raises(ZeroEnergyError):
            construct_reference_with_rho(t, z, 0.0, 10.0)

    @given(
        rho=st.floats(-0.95, 0.95),
        snr=st.floats(-20.0, 45.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_property_round_trip(self, rho, snr):
        ref = construct_reference_with_rho(
            random_signal(19, length=600), random_signal(20, length=600), rho, snr
        )
        assert ref.rho == pytest.approx(rho, abs=1e-9)
        assert ref.snr_db == pytest.approx(snr, abs=1e-9)


class TestDefaultBetas:
    def test_grid_shape(self):
        betas = default_betas()
        assert len(betas) == 50
        assert betas[0] == 1.0
        assert betas[-1] == pytest.approx(1e-4, rel=1e-12)
        assert all(b2 < b1 for b1, b2 in zip(betas, betas[1:]))

    def test_validation(self):
        with pytest.raises(ValueError):
            default_betas(count=1)
        with pytest.raises(ValueError):
            default_betas(stop=1.0)
        with pytest.raises(ValueError):
            default_betas(stop=0.0)


class TestTradeoffCurve:
    def test_unit_beta_reproduces_reference(self):
        ref = reference(21, 0.0, 10.0)
        curve = tradeoff_curve(ref)
        anchor = curve.points[0]
        assert anchor.beta == 1.0
        assert anchor.si_sdr_db == math.inf
        assert anchor.output_snr_db == pytest.approx(10.0, abs=1e-9)
        assert curve.reference_snr_db == pytest.approx(10.0, abs=1e-9)

    def test_thousandfold_attenuation(self):
        ref = reference(22, 0.0, 10.0)
        curve = tradeoff_curve(ref, [1.0, 1e-3])
        point = curve.points[1]
        assert point.output_snr_db == pytest.approx(70.0, abs=1e-9)
        # Scores approach the reference SNR from above as the noise shrinks.
        assert point.si_sdr_db > 10.0
        assert point.si_sdr_db == pytest.approx(10.0, abs=0.01)

    def test_monotone_and_endpoint(self):
        for snr in (5.0, 10.0, 15.0, 20.0):
            curve = tradeoff_curve(reference(23, 0.0, snr))
            values = [p.si_sdr_db for p in curve.points]
            assert values[0] == math.inf
            finite = values[1:]
            assert all(a >= b - 1e-9 for a, b in zip(finite, finite[1:]))
            assert abs(finite[-1] - snr) <= 0.05

    def test_beta_validation(self):
        ref = reference(24, 0.0, 10.0)
        with pytest.raises(ValueError):
            tradeoff_curve(ref, [0.9, 0.5])  # must start at 1.0
        with pytest.raises(ValueError):
            tradeoff_curve(ref, [1.0, 0.5, 0.5])  # strictly decreasing
        with pytest.raises(ValueError):
            tradeoff_curve(ref, [1.0, 0.0])  # in (0, 1]
        with pytest.raises(ValueError):
            tradeoff_curve(ref, [])
