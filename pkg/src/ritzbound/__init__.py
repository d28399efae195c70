"""Residual-based error bounds for Ritz values and approximate singular values."""
from .bounds import (
    BoundReport,
    ClusterSpec,
    bound_asymptotic,
    bound_classical,
    bound_lili,
    bound_offdiag_quadratic,
    bound_thm_cluster,
    bound_thm_main,
    bound_thm_svd,
    bound_weyl,
    gaps_svd,
    gaps_symmetric,
    jordan_wielandt_augment,
    match_and_report,
    svd_bounds,
    symmetric_bounds,
)
from .experiments import ExperimentConfig, emit_csv, run_experiment
from .extraction import (
    SvdPerturbation,
    SymmetricPerturbation,
    hmt_structure,
    lanczos,
    lanczos_to_perturbation,
    petrov_galerkin,
    rayleigh_ritz,
)

__version__ = "0.1.0"
