"""Post-selection refined ridge estimator on the selected predictors.

Restricting the model to the selected set and dropping the sparsity penalty
leaves a ridge problem with the closed form

    c_hat = (1/n) ((1/n) Gamma_S' Gamma_S + lam3 I)^{-1} Gamma_S' y,

where Gamma_S stacks the score matrices of the selected predictors.  The
cross-predictor Gram is dense (scores of different predictors correlate), so
the system is solved by a symmetric positive-definite factorization.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .design import ReducedRankDesign
from .errors import ConfigError, NumericalError


@dataclass(frozen=True)
class RefinedFit:
    """Ridge refit on a selected set: coefficients exist only for j in S."""

    selected: np.ndarray
    coef_blocks: dict = field(repr=False)
    curves: np.ndarray = field(repr=False)
    lam3: float

    def coef_block(self, j: int) -> np.ndarray:
        return self.coef_blocks[j]


def fit_refined(
    design: ReducedRankDesign, y, selected, lam3: float
) -> RefinedFit:
    """Closed-form ridge refit of the model restricted to `selected`.

    Requires lam3 > 0, or lam3 = 0 with a full-column-rank stacked design.
    """
    selected = np.asarray(sorted(set(int(j) for j in np.asarray(selected).ravel())))
    if selected.size == 0:
        raise ConfigError(
            "refined fit needs a nonempty selected set; the null model has no "
            "coefficients to refine"
        )
    if np.any(selected < 0) or np.any(selected >= design.p):
        raise ConfigError(f"selected indices out of range for p={design.p}")
    if lam3 < 0:
        raise ConfigError(f"lam3 must be >= 0, got {lam3}")
    y = np.asarray(y, dtype=float)
    n = design.n
    gamma = np.hstack([design.scores[j] for j in selected])
    gram = gamma.T @ gamma / n + lam3 * np.eye(gamma.shape[1])
    rhs = gamma.T @ y / n
    try:
        chol = scipy.linalg.cho_factor(gram, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"refined system is singular at lam3={lam3}; increase lam3"
        ) from exc
    coef = scipy.linalg.cho_solve(chol, rhs)
    blocks = {}
    curves = np.zeros((design.p, design.grid.num_points))
    offset = 0
    for j in selected:
        m = design.scores[j].shape[1]
        blocks[int(j)] = coef[offset:offset + m].copy()
        curves[j] = design.coefficient_curve(j, blocks[int(j)])
        offset += m
    return RefinedFit(selected=selected, coef_blocks=blocks, curves=curves, lam3=lam3)


def predict_scores(design: ReducedRankDesign, fit: RefinedFit, scores: list) -> np.ndarray:
    """Predictions (centered scale) from per-predictor score matrices."""
    pred = np.zeros(scores[fit.selected[0]].shape[0]) if fit.selected.size else 0.0
    for j in fit.selected:
        pred = pred + scores[j] @ fit.coef_blocks[int(j)]
    return pred
