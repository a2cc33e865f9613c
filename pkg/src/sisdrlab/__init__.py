"""Separation metrics with honest limits.

Scale-invariant distortion ratios (with best-permutation evaluation), the
closed-form ceiling those ratios hit when the reference itself carries
noise, the denoising-versus-score tradeoff that follows, and a deterministic
two-speaker mixing pipeline that records full provenance.
"""

from .audio_io import WavSpec, read_wav, write_wav
from .bounds import (
    DenominatorTerms,
    NoisyReference,
    TradeoffCurve,
    TradeoffPoint,
    construct_reference_with_rho,
    default_betas,
    denominator_terms,
    factored_denominator,
    ideal_alpha,
    ideal_upper_bound,
    si_sdr_decomposed,
    tradeoff_curve,
)
from .errors import (
    ClippingError,
    DegenerateCorrelationError,
    MultiChannelError,
    ParallelSignalsError,
    SampleRangeError,
    SchemaVersionError,
    SignalMismatchError,
    SisdrlabError,
    SourceCountError,
    UnboundedMetricError,
    UnsupportedEncodingError,
    WavFormatError,
    ZeroEnergyError,
)
from .metrics import (
    MetricValue,
    PitResult,
    optimal_scale,
    pit_evaluate,
    pit_si_sdr_loss,
    sdr,
    si_sdr,
    si_sdr_improvement,
)
from .mixer import (
    Manifest,
    MixConfig,
    MixRecord,
    add_noise,
    build_dataset,
    load_manifest,
    load_manifest_csv,
    mix_pair,
    save_manifest,
)
from .reports import (
    MetricReport,
    UtteranceScores,
    aggregate,
    evaluate_manifest,
    load_report,
    merge_reports,
    save_report,
)
from .signals import (
    Signal,
    add,
    correlation_coefficient,
    energy,
    gain_for_target_snr,
    generate_test_signal,
    inner_product,
    scale,
    snr_db,
)

__version__ = "0.1.0"
