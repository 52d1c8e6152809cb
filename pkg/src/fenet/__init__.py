"""Functional elastic-net regression for high-dimensional functional linear models.

Variable selection by a group elastic-net penalty on RKHS-transformed
predictors, a post-selection refined ridge estimator, simulation scenarios,
selection/prediction metrics, and covariance-condition diagnostics.
"""

__version__ = "0.1.0"

from .design import (
    PSI_COV_FLOOR,
    PSI_IDENTITY,
    Dataset,
    HyperParams,
    ReducedRankDesign,
    apply_centering,
    build_design,
    center,
    empirical_eigen,
    new_scores,
    reslice_design,
    transform_predictors,
)
from .diagnostics import PartSepCov, aleph, check_conditions, kappa_bound
from .errors import (
    ConfigError,
    DataError,
    FenetError,
    GridMismatchError,
    NumericalError,
)
from .grid import Grid, GridFunction, inner, make_grid, norm2
from .kernels import (
    KernelSpec,
    SqrtKernelOp,
    apply_sqrt,
    cosine_bernoulli_kernel,
    custom_kernel,
    eval_kernel,
    sine_bernoulli_kernel,
    spectral_sqrt,
)
from .metrics import (
    MetricsReport,
    mnd,
    mspe,
    rer_analytic,
    rer_monte_carlo,
    roc,
    roc_auc,
    selection_rates,
)
from .refine import RefinedFit, fit_refined
from .simulate import ScenarioConfig, Truth, ar1_chol, generate
from .solver import (
    BlockProblem,
    FEnetFit,
    KKTReport,
    fit_fenet,
    fit_path,
    kkt_check,
    objective,
    solve_block,
    universal_lam1,
)

__all__ = [name for name in dir() if not name.startswith("_")]
