"""Pseudospectral simulation and verification toolkit for the weakly damped,
forced BBM equation on a large periodic domain."""

from .dynamics import (
    ForcingSpec,
    LwpReport,
    SolverConfig,
    Trajectory,
    evolve,
    i_y1_norm,
    linear_evolve,
    linear_trajectory,
    lwp_bound_check,
    rhs,
    y_norm,
)
from .errors import (
    ConfigError,
    DivergenceError,
    GridMismatchError,
    NoConvergenceError,
    ResolutionError,
    SymmetryError,
    UnsupportedProfileError,
    WindowError,
)
from .orbit import (
    AbsorbingReport,
    DecayFit,
    OrbitResult,
    absorbing_check,
    decay_fit,
    error_evolve,
    local_stability_experiment,
    poincare_iterate,
)
from .picard import (
    PicardReport,
    WindowReport,
    apply_G,
    picard_solve_z,
    window_bound_check,
)
from .spectral import (
    Grid,
    ImethodParams,
    SpectralField,
    apply_multiplier,
    derivative,
    from_spectral,
    helmholtz_inverse,
    i_h1_norm,
    i_multiplier,
    i_operator,
    l2_inner,
    l2_norm,
    nonlinear_product,
    read_field_binary,
    read_field_csv,
    sobolev_norm,
    to_spectral,
    write_field_binary,
    write_field_csv,
)
from .verification import (
    EstimateReport,
    LocalizedBump,
    NearBand,
    PowerLaw,
    WhiteBand,
    adversarial_triples,
    calibrate_trilinear_constant,
    sample_fields,
    sample_trajectory_pairs,
    trilinear_form,
    verify_bilinear,
    verify_equivalence,
    verify_trilinear,
)

__version__ = "0.1.0"
