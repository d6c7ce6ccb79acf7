"""Streaming time-series anomaly detection toolkit.

The package splits into small layers: :mod:`tadkit.core` holds the value
types everything else shares; :mod:`tadkit.datagen`, :mod:`tadkit.resample`
and :mod:`tadkit.periodicity` prepare and characterize data;
:mod:`tadkit.detectors` + :mod:`tadkit.thresholds` turn readings into alert
decisions; :mod:`tadkit.evaluation` measures those decisions under batch,
streaming, and interactive protocols; :mod:`tadkit.conditional` and
:mod:`tadkit.cohort` cover covariate-aware scoring and population-level
diagnosis.  The ``tad`` command line lives in :mod:`tadkit.cli`.
"""

__version__ = "0.1.0"

from .core import (
    MISSING,
    AlignmentError,
    CovariateSet,
    DegenerateScaleError,
    EventStream,
    FormatError,
    InputError,
    LabelSequence,
    OrderingError,
    PopulationDataset,
    ProtocolError,
    SchemaError,
    ScoreSequence,
    SpecError,
    TadError,
    TimeSeries,
    align,
    is_missing,
    slice_prefix,
)
from .datagen import (
    InjectionConfig,
    LabeledSeries,
    PeriodicGeneratorConfig,
    generate_periodic,
    inject_point_anomalies,
    series_rng,
)
from .resample import ResampleSpec, resample, suggest_rate
from .periodicity import (
    AcfProfile,
    BenchmarkResult,
    MethodResult,
    PeriodEstimate,
    autocorrelation,
    detect_period_acf,
    detect_period_autoperiod,
    detect_period_fft,
    detect_period_peaks,
    run_period_benchmark,
)
from .detectors import DetectorConfig, StreamingDetector, make_detector, run_batch, run_streaming
from .thresholds import Thresholder, ThresholdSpec, apply_batch, oracle_fixed_threshold
from .evaluation import (
    AlwaysFlagPolicy,
    DetectorThresholdPolicy,
    EvalReport,
    FeedbackLog,
    LossSpec,
    NeverFlagPolicy,
    detection_delay,
    evaluate_batch,
    evaluate_streaming,
    run_hil,
    run_population,
)
from .conditional import (
    ConditionalConfig,
    ConditionalScorer,
    JointConfig,
    JointScorer,
    run_conditional,
    run_joint,
)
from .cohort import CohortMinerConfig, Rule, RuleInterval, mine_rules, mine_rules_over_time

__all__ = [
    "__version__",
    # core
    "MISSING",
    "TadError",
    "SpecError",
    "AlignmentError",
    "DegenerateScaleError",
    "OrderingError",
    "InputError",
    "ProtocolError",
    "SchemaError",
    "FormatError",
    "TimeSeries",
    "LabelSequence",
    "ScoreSequence",
    "EventStream",
    "PopulationDataset",
    "CovariateSet",
    "is_missing",
    "slice_prefix",
    "align",
    # data preparation
    "PeriodicGeneratorConfig",
    "InjectionConfig",
    "LabeledSeries",
    "series_rng",
    "generate_periodic",
    "inject_point_anomalies",
    "ResampleSpec",
    "resample",
    "suggest_rate",
    # periodicity
    "AcfProfile",
    "PeriodEstimate",
    "MethodResult",
    "BenchmarkResult",
    "autocorrelation",
    "detect_period_acf",
    "detect_period_peaks",
    "detect_period_fft",
    "detect_period_autoperiod",
    "run_period_benchmark",
    # detection and thresholding
    "DetectorConfig",
    "StreamingDetector",
    "make_detector",
    "run_streaming",
    "run_batch",
    "ThresholdSpec",
    "Thresholder",
    "apply_batch",
    "oracle_fixed_threshold",
    # evaluation
    "LossSpec",
    "FeedbackLog",
    "EvalReport",
    "AlwaysFlagPolicy",
    "NeverFlagPolicy",
    "DetectorThresholdPolicy",
    "detection_delay",
    "evaluate_batch",
    "evaluate_streaming",
    "run_hil",
    "run_population",
    # conditional / multivariate
    "ConditionalConfig",
    "ConditionalScorer",
    "JointConfig",
    "JointScorer",
    "run_conditional",
    "run_joint",
    # population rules
    "Rule",
    "CohortMinerConfig",
    "RuleInterval",
    "mine_rules",
    "mine_rules_over_time",
]
