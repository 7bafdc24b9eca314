"""Mexican-needlet frames on the circle and thresholding density estimation."""

from .estimator import (
    ConcentrationReport,
    EstimateResult,
    RiskReport,
    TuningParams,
    concentration_check,
    derive_tuning,
    empirical_coefficients,
    estimate_density,
    estimator_frame,
    l2_risk,
    monte_carlo_risk,
    paired_risk_difference,
    threshold_and_synthesize,
)
from .fourier import (
    FourierTable,
    GridFunction,
    fourier_coefficients,
    from_callable,
    l2_distance,
    l2_norm,
    power_spectrum,
    reconstruct,
    uniform_grid,
)
from .frame import (
    AtomIndex,
    BiasConstants,
    BiasReport,
    CoefficientTable,
    FrameParams,
    Partition,
    analyze,
    besov_level_norms,
    besov_smoothness,
    bias_report,
    build_partition,
    calibrate_bias_constants,
    calibrate_envelope_constant,
    localization_envelope,
    needlet_eval,
    summation,
    tightness_ratio,
)
from .sampling import DensityModel, SampleSet, density_eval, make_model, sample
from .special import (
    calderon_constant,
    calderon_partial_sums,
    lambda_Bs,
    lower_incomplete_gamma,
    upper_incomplete_gamma,
    weight,
    weight_tail_sum,
)

__version__ = "0.1.0"
