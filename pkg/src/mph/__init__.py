"""Multivariate phase-type (mPH) distributions with a shared initial state.

Closed-form functionals and dependence measures, exact simulation, EM
estimation, Erlang-mixture approximation, and time-changed / fractional
extensions.
"""

from .core import (
    MphModel,
    MphStarRepresentation,
    cdf,
    copula_density_grid,
    density,
    dependence_matrices,
    kendall,
    laplace,
    marginal,
    marginal_sd,
    moment,
    pearson,
    ph_cdf,
    ph_density,
    ph_quantile,
    ph_survival,
    spearman,
    sub_model,
    survival,
    survival_kron,
    to_mphstar,
    validate,
)
from .em import (
    ExpectedStats,
    FitConfig,
    FitResult,
    degrees_of_freedom,
    e_step,
    fit,
    fit_report,
    log_likelihood,
    m_step,
)
from .erlang import (
    ErlangMixtureSpec,
    approximation_error,
    build_erlang_mixture,
    discretize_cdf,
    discretize_sample,
)
from .errors import (
    DomainError,
    InvalidArgumentError,
    MphError,
    NumericalError,
    UnsupportedCaseError,
    ValidationError,
)
from .extensions import (
    FracMphModel,
    MiphModel,
    TimeChange,
    frac_cdf,
    frac_density,
    frac_sample,
    frac_survival,
    miph_cdf,
    miph_density,
    miph_sample,
    miph_survival,
    positive_stable,
)
from .io import load_model, read_csv, save_model, write_csv
from .linalg import KernelConfig, expm, mittag_leffler, mittag_leffler_matrix, vanloan_integral
from .sampling import PathStats, sample, sample_with_paths

__version__ = "0.1.0"
