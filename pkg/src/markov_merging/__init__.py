"""Merging of time-inhomogeneous finite Markov chains.

Exact merging-time oracles, weighted operator norms, singular values of
kernels between weighted l^2 spaces, log-Sobolev and Nash constants, the
merging bounds built from them, and c-stability checks, together with a
gallery of example families.
"""
from .core import (
    Kernel,
    Measure,
    Schedule,
    StateSpace,
    check_kernel,
    check_measure,
    check_reversible,
    compose,
    evolve,
    invariant_measure,
    lazy,
    validate_kernel,
)
from .distances import (
    MergingReport,
    center_to_pairwise,
    distance_profile,
    dp_distance,
    merging_time_relsup,
    merging_time_tv,
    operator_norm,
    relsup_pairwise,
    tv_distance,
)
from .spectral import (
    SpectralReport,
    adjoint_kernel,
    dirichlet_form,
    reversibilization,
    singular_product_bound,
    singular_values,
    spectral_gap,
)
from .functional import (
    Certificate,
    LogSobolevEstimate,
    NashParams,
    entropy_contraction,
    g_function,
    hypercontractivity_check,
    l2_entropy,
    log_sobolev_constant,
    mls_constant,
    nash_certify,
    nu_of_kernel,
    phi_gap,
    relative_entropy,
    rho_lower_bound,
)
from .bounds import (
    BoundReport,
    entropy_tv_bound,
    ls_d2_bound,
    ls_sup_bound,
    ls_threshold,
    nash_d2_bound,
    nash_norm_bound,
    nash_stab2_bound,
    nash_stab_bound,
)
from .stability import (
    SNClassCoefficients,
    StabilityCertificate,
    bd_perturbation_stability,
    check_c_stability,
    s2n_class,
    s2n_closure_check,
    search_c_stability,
    sn_class,
    sn_closure_check,
)
from .experiment import ExperimentConfig, adversary, compare_bounds, run

__version__ = "0.1.0"
