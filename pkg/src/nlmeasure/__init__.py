"""Measures of nonlinearity for stochastic transformations y = g(u, v).

The library estimates the moment blocks of a transformation by seeded
Monte Carlo, fits the best affine approximation, and evaluates how far the
transformation is from affine behavior: the classic MSE-based measure, its
normalized variant, and unitless normalized weighted measures that are
invariant to affine changes of units.
"""

from .errors import (
    DegenerateCovarianceError,
    DegenerateOutputError,
    InsufficientSamplesError,
    ModelFormError,
    NoClosedFormError,
    NonFiniteSampleError,
    NotPositiveSemiDefiniteError,
)
from .measures import (
    LinearFit,
    MonResult,
    WeightMatrix,
    assemble_family_y,
    best_linear_fit,
    compute_mon,
    mon_additive,
    mon_multiplicative,
    mon_upper_bound,
    weight_diag,
    weight_family,
    weight_full,
    weight_identity,
    weight_legacy,
)
from .models import (
    MODEL_NAMES,
    MODEL_VARIANTS,
    GaussianPrior,
    StochasticModel,
    UnitChange,
    apply_unit_change,
    base_unit_change,
    builtin_model,
    make_multiplicative,
)
from .moments import (
    DEFAULT_CHUNK_SIZE,
    MomentAccumulator,
    MomentEstimates,
    accumulate,
    estimate_moments,
    finalize,
    merge,
    rescale_outputs,
    sample_gaussian,
)
from .sweep import (
    DEFAULT_SAMPLES,
    Measure,
    SweepConfig,
    SweepRecord,
    derive_point_seed,
    read_csv,
    run_point,
    run_sweep,
    weight_for_measure,
    write_csv,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateCovarianceError",
    "DegenerateOutputError",
    "InsufficientSamplesError",
    "ModelFormError",
    "NoClosedFormError",
    "NonFiniteSampleError",
    "NotPositiveSemiDefiniteError",
    "LinearFit",
    "MonResult",
    "WeightMatrix",
    "assemble_family_y",
    "best_linear_fit",
    "compute_mon",
    "mon_additive",
    "mon_multiplicative",
    "mon_upper_bound",
    "weight_diag",
    "weight_family",
    "weight_full",
    "weight_identity",
    "weight_legacy",
    "MODEL_NAMES",
    "MODEL_VARIANTS",
    "GaussianPrior",
    "StochasticModel",
    "UnitChange",
    "apply_unit_change",
    "base_unit_change",
    "builtin_model",
    "make_multiplicative",
    "DEFAULT_CHUNK_SIZE",
    "MomentAccumulator",
    "MomentEstimates",
    "accumulate",
    "estimate_moments",
    "finalize",
    "merge",
    "rescale_outputs",
    "sample_gaussian",
    "DEFAULT_SAMPLES",
    "Measure",
    "SweepConfig",
    "SweepRecord",
    "derive_point_seed",
    "read_csv",
    "run_point",
    "run_sweep",
    "weight_for_measure",
    "write_csv",
]
