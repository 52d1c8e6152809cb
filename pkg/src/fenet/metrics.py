"""Variable-selection and prediction metrics.

Selection quality is scored by exact set-cardinality rates (FPR/FNR), signal
recovery by the maximum L2 distance between fitted and true coefficient
curves (MND), and prediction by the relative excess risk (RER): the expected
squared error of the prediction mean normalized by the predictive variance
of the true signal.  RER has an analytic mode (exact under the generator's
series representation) and a Monte Carlo mode (averaged over a test sample);
the two agree within Monte Carlo error and serve as mutual checks.
"""

from dataclasses import dataclass, field

import numpy as np

from .design import ReducedRankDesign, new_scores
from .errors import ConfigError, DataError, GridMismatchError
from .grid import Grid, norms_rows
from .simulate import Truth, _basis_matrix, ar1_corr
from .solver import fit_path

QUANTILES = (0.025, 0.5, 0.975)


def selection_rates(selected, signal_set, p: int):
    """(false positive rate, false negative rate) of a selected index set."""
    sel = set(int(j) for j in np.asarray(selected).ravel())
    sig = set(int(j) for j in np.asarray(signal_set).ravel())
    if not sel <= set(range(p)) or not sig <= set(range(p)):
        raise ConfigError("index sets must be subsets of {0..p-1}")
    non_signal = p - len(sig)
    fpr = len(sel - sig) / non_signal if non_signal else 0.0
    fnr = len(sig - sel) / len(sig) if sig else 0.0
    return fpr, fnr


def mnd(fitted_curves: np.ndarray, true_curves: np.ndarray, grid: Grid) -> float:
    """Maximum over predictors of the L2 norm of (fitted - true) curve."""
    if fitted_curves.shape != true_curves.shape:
        raise DataError("fitted and true curve stacks differ in shape")
    if fitted_curves.shape[1] != grid.num_points:
        raise GridMismatchError("curves are not on the given grid")
    return float(norms_rows(fitted_curves - true_curves, grid).max())


def rer_analytic(fitted_curves: np.ndarray, truth: Truth, grid: Grid) -> float:
    """Relative excess risk evaluated through the generator series.

    Projects the curve errors onto the predictor basis by quadrature and
    contracts with the score covariance:  sum_k nu_k a_k' Sigma_p a_k, with
    a_jk = <basis_k, fitted_j - true_j>, normalized by the same form at the
    true coefficients.
    """
    if fitted_curves.shape != truth.beta_curves.shape:
        raise DataError("curve stack does not match the truth object")
    basis = _basis_matrix("cos", truth.k_max, grid)
    proj = basis * grid.weights
    sigma_p = ar1_corr(truth.p, truth.rho)
    diff = fitted_curves - truth.beta_curves
    num = _series_risk(diff, proj, sigma_p, truth.nu)
    den = _series_risk(truth.beta_curves, proj, sigma_p, truth.nu)
    if den == 0.0:
        raise DataError("true coefficients are identically zero; RER undefined")
    return num / den


def _series_risk(curves, proj, sigma_p, nu):
    a = curves @ proj.T  # (p, k)
    return float(np.einsum("k,jk,jl,lk->", nu, a, sigma_p, a))


def rer_monte_carlo(fitted_curves: np.ndarray, test_curves: np.ndarray,
                    true_curves: np.ndarray, grid: Grid):
    """Monte Carlo relative excess risk over a test sample.

    Returns (rer, standard_error) where the standard error of the ratio is
    obtained by the delta method over per-sample squared prediction means.
    """
    w = grid.weights
    n_test = test_curves.shape[0]
    diff_means = np.einsum("ijt,t,jt->i", test_curves, w, fitted_curves - true_curves)
    true_means = np.einsum("ijt,t,jt->i", test_curves, w, true_curves)
    d = diff_means ** 2
    b = true_means ** 2
    mean_b = b.mean()
    if mean_b == 0.0:
        raise DataError("test sample carries no signal variance; RER undefined")
    mean_d = d.mean()
    rer = mean_d / mean_b
    var_d = d.var(ddof=1)
    var_b = b.var(ddof=1)
    cov_db = np.cov(d, b, ddof=1)[0, 1]
    var_ratio = (
        var_d / mean_b**2
        + mean_d**2 * var_b / mean_b**4
        - 2.0 * mean_d * cov_db / mean_b**3
    ) / n_test
    return rer, float(np.sqrt(max(var_ratio, 0.0)))


def mspe(predictions: np.ndarray, responses: np.ndarray) -> float:
    """Mean squared prediction error on a (centered-consistently) test set."""
    predictions = np.asarray(predictions, dtype=float)
    responses = np.asarray(responses, dtype=float)
    if predictions.shape != responses.shape:
        raise DataError("predictions and responses differ in length")
    return float(np.mean((responses - predictions) ** 2))


def predict_from_coef(design: ReducedRankDesign, coef_blocks, curves: np.ndarray) -> np.ndarray:
    """Score-space predictions of new transformed, centered curves.

    `coef_blocks` maps predictor index -> c_j (dict) or is a list over all j.
    """
    scores = new_scores(design, curves)
    items = coef_blocks.items() if isinstance(coef_blocks, dict) else enumerate(coef_blocks)
    pred = np.zeros(curves.shape[0])
    for j, c in items:
        if c is not None and np.asarray(c).size:
            pred += scores[j] @ np.asarray(c, dtype=float)
    return pred


@dataclass(frozen=True)
class RocPoint:
    lam: float
    fpr: float
    tpr: float
    num_selected: int


def roc(design: ReducedRankDesign, y, hp_fixed, lam_grid, signal_set) -> list:
    """Selection rates along a lam path with all other tuning fixed.

    `lam_grid` must be sorted ascending; fits run warm-started from the
    largest lam down.  lam = 0 is excluded (pure ridge selects everything;
    (fpr, tpr) = (1, 1) is the documented limiting point).
    """
    lam_grid = np.asarray(lam_grid, dtype=float)
    if np.any(np.diff(lam_grid) <= 0):
        raise ConfigError("lam grid must be sorted strictly ascending")
    if lam_grid[0] <= 0:
        raise ConfigError("lam = 0 is excluded from ROC paths")
    points = fit_path(design, y, lam_grid, hp_fixed.alpha, certify=False,
                      tol_outer=1e-9)
    out = []
    for pt in points:
        sel = np.flatnonzero(pt.selected_mask)
        fpr, fnr = selection_rates(sel, signal_set, design.p)
        out.append(RocPoint(lam=pt.lam, fpr=fpr, tpr=1.0 - fnr, num_selected=sel.size))
    return out


def roc_auc(points) -> float:
    """Area under the (fpr, tpr) curve, anchored at (0,0) and (1,1)."""
    fpr = np.array([p.fpr for p in points] + [0.0, 1.0])
    tpr = np.array([p.tpr for p in points] + [0.0, 1.0])
    order = np.lexsort((tpr, fpr))
    return float(np.trapezoid(tpr[order], fpr[order]))


@dataclass(frozen=True)
class MetricsReport:
    """Per-replicate metric values plus median and (2.5%, 97.5%) quantiles."""

    per_replicate: dict = field(repr=False)
    quantiles: dict

    @staticmethod
    def aggregate(per_replicate: dict) -> "MetricsReport":
        quantiles = {}
        for name, values in per_replicate.items():
            arr = np.asarray(values, dtype=float)
            lo, med, hi = np.quantile(arr, QUANTILES)
            quantiles[name] = {"q2.5": float(lo), "median": float(med), "q97.5": float(hi)}
        return MetricsReport(per_replicate=per_replicate, quantiles=quantiles)
