"""Gini indices, CAP/Lorenz curves, Bregman scores and auto-calibration tools."""

from .autocal import (
    BinCalibrator,
    CalibrationBin,
    CalibrationReport,
    ConvexOrderReport,
    Dominance,
    EqualCountBins,
    Isotonic,
    bin_means,
    calibration_report,
    convex_order_check,
    parse_method,
    pava,
    rank_bins,
    recalibrate,
    stop_loss,
)
from .core import (
    Dataset,
    DegenerateResponse,
    DomainError,
    GiniError,
    InvalidInput,
    PreconditionFailed,
    TiePolicy,
    TiesNotAllowed,
    empirical_cdf,
    empirical_quantile,
    midranks,
)
from .curves import (
    Curve,
    CurveKind,
    ResponseType,
    cap_curve,
    lorenz_curve,
    mirrored_cap,
    sample_grid,
    self_cap_curve,
    self_cap_integral,
)
from .gini import (
    DenominatorMethod,
    GiniReport,
    auc,
    gini_binary,
    gini_denominator,
    gini_eco,
    gini_ml,
    mean_abs_difference,
    somers_d,
)
from .scoring import ConvexGenerator, bregman, bregman_array, expected_score, masked_score
from .sim import (
    ExperimentConfig,
    ExperimentReport,
    GeneratorKind,
    GeneratorSpec,
    Metric,
    MetricKind,
    Variant,
    VariantKind,
    apply_variant,
    generate,
    load_config,
    parse_config,
    run_experiment,
)

__version__ = "0.1.0"
