"""Renewal reward simulation and jump-density estimation by wavelet
decompounding."""

from .decompound import (
    ContractionError,
    CorrectionCoeffs,
    GridDensity,
    InsufficientDataError,
    apply_compounding,
    build_correction,
    contraction_factor,
    convolution_power_estimator,
    corrected_estimator,
    correction_coeffs,
    count_probs,
    estimate_theta,
    fixed_point_inverse,
    grid_convolve,
    naive_estimator,
    oracle_estimator,
    truncation_order,
)
from .model import (
    DEFAULT_THETA_BOX,
    JumpMixture,
    LaplaceComponent,
    RenewalModel,
    UniformComponent,
    clamp_theta,
    invert_q,
    invert_q_bisect,
)
from .simulate import (
    IncrementSeries,
    SamplePath,
    block_sums,
    discretize,
    nonzero_increments,
    replicate_seed,
    sample_path,
)
from .wavelet import (
    DensityEstimate,
    Pyramid,
    WaveletConfig,
    bin_samples,
    density_estimate,
    dwt,
    hard_threshold,
    idwt,
    threshold_value,
)

__version__ = "0.1.0"
