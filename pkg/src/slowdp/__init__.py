"""Slowly scaling per-record differential privacy.

Mechanisms whose per-record privacy guarantees grow sublinearly in a
record's influence on a sum: transformation mechanisms (privatize a concave
transform of the query with Gaussian noise, then invert with an unbiased
estimator) and additive mechanisms drawing heavy-tailed noise (generalized
Gaussian, exponential polylogarithmic).  Includes policy-function
accounting, prediction intervals, and a group-by-sum experiment harness
with a CLI (``slowdp``).
"""

from .bounds import (
    PredictionInterval,
    additive_prediction_interval,
    transform_prediction_interval,
)
from .distributions import (
    ExpPolylogNoise,
    GaussianNoise,
    GenGaussianNoise,
    NoiseSpec,
    RngStream,
    noise_cdf,
    noise_from_json,
    noise_pdf,
    noise_quantile,
    noise_sample,
    noise_to_json,
    noise_variance,
)
from .errors import (
    CalibrationError,
    DataError,
    DomainError,
    FamilyError,
    MomentError,
    ParameterError,
    SeriesDivergenceError,
    SeriesTruncationError,
    SlowDPError,
    UnsupportedOrderError,
)
from .harness import (
    Dataset,
    ExperimentConfig,
    ExperimentReport,
    GroupResult,
    QuintileSummary,
    are,
    calibrate,
    groupby_sum,
    load_csv,
    mechanism_sd,
    privacy_loss_cdf,
    run_experiment,
    sd_curve,
    synth_dataset,
    write_dataset_csv,
    write_report_csvs,
)
from .mechanisms import (
    AdditiveMechanism,
    MechanismSpec,
    TransformationMechanism,
    UnitSplitGaussian,
    additive_privatize,
    mechanism_from_json,
    mechanism_to_json,
    privatize,
    transformation_privatize,
    unit_split_count,
    unit_split_privatize,
)
from .policy import (
    AdditiveSource,
    ComposedPolicy,
    ConstantSource,
    DifferingPair,
    GaussianSource,
    PolicyEval,
    PolicyFlavor,
    PolicySpec,
    TransformSource,
    UnitSplitSource,
    additive_prdp_loss,
    bounded_additive_prdp,
    bounded_transform_policy,
    compose_parallel,
    compose_sequential,
    gaussian_zcdp_loss,
    group_loss_coefficient,
    per_record_sensitivity_sum,
    policy_for_mechanism,
    policy_from_json,
    policy_to_json,
    prdp_to_przcdp,
    transform_policy_loss,
    unit_split_loss,
)
from .transform import (
    EstimatorKind,
    EstimatorSpec,
    TransformKind,
    TransformSpec,
    apply_transform,
    estimate,
    mechanism_variance,
)

__version__ = "0.1.0"
