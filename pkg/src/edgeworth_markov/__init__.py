"""Operator-valued Edgeworth expansions for additive functionals of
finite-state Markov chains, with exact and Monte-Carlo verification."""

__version__ = "0.1.0"

from .chains import (
    ChainSpec,
    PsiBounds,
    StationaryStructure,
    center_observable,
    psi_bounds,
    sigma_sq_series,
    stationary,
    validate,
)
from .expansion import (
    EdgeworthApprox,
    PartitionSet,
    build_approx,
    coeff_a,
    edgeworth_cdf,
    freq_poly,
    hermite,
    operator_A,
    partitions,
    scalar_expansion,
)
from .oracle import (
    EmpiricalLaw,
    LatticeLaw,
    SupErrorRow,
    VerificationReport,
    dp_exact,
    dp_moments,
    mc_sample,
    mc_sample_multi,
    sup_error,
)
from .spectral import (
    CharMatrix,
    SpectralSummary,
    char_matrix,
    cramer_check,
    cumulant_crosscheck_fd,
    iterate_bound_check,
    moments_and_cumulants,
    principal_eig,
    proj_derivatives,
    spectral_radius_scan,
    spectral_summary,
)

__all__ = [name for name in dir() if not name.startswith("_")]
