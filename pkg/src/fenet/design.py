"""Predictor transformation and the reduced-rank design seen by the solver.

Per predictor j the pipeline is: center -> apply the square-root kernel
operator -> empirical eigendecomposition of the sample covariance operator
(via the n x n dual Gram matrix) -> principal-component scores.  The solver
then only ever sees, for each predictor, a score matrix, the empirical
eigenvalues, and a diagonal penalty metric.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError, GridMismatchError, NumericalError
from .grid import Grid
from .kernels import SqrtKernelOp, apply_sqrt_values

PSI_IDENTITY = "identity"
PSI_COV_FLOOR = "cov_floor"

_RANK_RTOL = 1e-12


@dataclass(frozen=True)
class Dataset:
    """n x p functional predictors on a shared grid plus scalar responses.

    `curves` has shape (n, p, T).  After `center`, `x_means` (p, T) and
    `y_mean` record the training means for prediction-time reuse.  `truth`
    carries generator ground truth for simulated data (see simulate module).
    """

    grid: Grid
    curves: np.ndarray = field(repr=False)
    responses: np.ndarray = field(repr=False)
    noise_sd: float | None = None
    truth: object | None = None
    x_means: np.ndarray | None = field(default=None, repr=False)
    y_mean: float | None = None

    def __post_init__(self):
        curves = np.asarray(self.curves, dtype=float)
        responses = np.asarray(self.responses, dtype=float)
        if curves.ndim != 3:
            raise DataError(f"curves must be (n, p, T), got shape {curves.shape}")
        n, p, t = curves.shape
        if t != self.grid.num_points:
            raise GridMismatchError(
                f"curves have {t} grid values, grid has {self.grid.num_points}"
            )
        if responses.shape != (n,):
            raise DataError(
                f"responses shape {responses.shape} does not match n={n} samples"
            )
        object.__setattr__(self, "curves", curves)
        object.__setattr__(self, "responses", responses)

    @property
    def n(self) -> int:
        return self.curves.shape[0]

    @property
    def p(self) -> int:
        return self.curves.shape[1]


@dataclass(frozen=True)
class HyperParams:
    """Tuning parameters: overall level lam split by alpha, rank s, psi floor theta.

    lam1 = alpha * lam drives sparsity, lam2 = (1 - alpha) * lam is the ridge
    level, s is the number of eigenfunctions per predictor, theta the floor
    inside the covariance-scaled penalty, lam3 the refined-ridge penalty.
    """

    lam: float
    alpha: float
    s: int
    theta: float = 0.0
    lam3: float = 0.0
    psi: str = PSI_COV_FLOOR

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError(f"lam must be >= 0, got {self.lam}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.s < 1:
            raise ConfigError(f"s must be >= 1, got {self.s}")
        if self.theta < 0:
            raise ConfigError(f"theta must be >= 0, got {self.theta}")
        if self.lam3 < 0:
            raise ConfigError(f"lam3 must be >= 0, got {self.lam3}")
        if self.psi not in (PSI_IDENTITY, PSI_COV_FLOOR):
            raise ConfigError(f"unknown psi kind {self.psi!r}")

    @property
    def lam1(self) -> float:
        return self.alpha * self.lam

    @property
    def lam2(self) -> float:
        return (1.0 - self.alpha) * self.lam


@dataclass(frozen=True)
class ReducedRankDesign:
    """Everything the solver needs: per-predictor scores, spectra, penalty metric.

    For predictor j, `eigenfunctions[j]` is (T, M_j) with quadrature-orthonormal
    columns, `eigenvalues[j]` the non-increasing empirical eigenvalues, and
    `scores[j]` the (n, M_j) principal-component score matrix satisfying
    (1/n) scores.T @ scores = diag(eigenvalues).  `h_diag[j]` is the diagonal
    of the penalty matrix H_j (identity, or eigenvalues + theta).
    """

    grid: Grid
    n: int
    p: int
    eigenfunctions: list = field(repr=False)
    eigenvalues: list = field(repr=False)
    scores: list = field(repr=False)
    h_diag: list = field(repr=False)
    psi: str = PSI_COV_FLOOR
    theta: float = 0.0
    x_means: np.ndarray | None = field(default=None, repr=False)
    y_mean: float = 0.0
    kernel_ops: tuple | None = field(default=None, repr=False)

    @property
    def block_sizes(self) -> np.ndarray:
        return np.array([s.shape[1] for s in self.scores], dtype=np.int64)

    def coefficient_curve(self, j: int, coef: np.ndarray) -> np.ndarray:
        """Coefficient curve for predictor j from its solver coefficients.

        The solver's c_j parameterizes the L2 surrogate f_j in the
        eigenfunction basis; the coefficient function is the square-root
        kernel image of that surrogate.
        """
        surrogate = self.eigenfunctions[j] @ coef
        if self.kernel_ops is None:
            return surrogate
        return apply_sqrt_values(self.kernel_ops[j], surrogate)


def center(data: Dataset) -> Dataset:
    """Subtract the cross-sample mean curve per predictor and the mean response.

    Idempotent; the subtracted means are recorded on the returned Dataset
    (already-centered data keeps its original recorded means).
    """
    if data.n < 2:
        raise DataError(f"centering needs n >= 2 samples, got {data.n}")
    x_means = data.curves.mean(axis=0)
    y_mean = float(data.responses.mean())
    curves = data.curves - x_means[None, :, :]
    responses = data.responses - y_mean
    prev_x = data.x_means if data.x_means is not None else 0.0
    prev_y = data.y_mean if data.y_mean is not None else 0.0
    return replace(
        data,
        curves=curves,
        responses=responses,
        x_means=prev_x + x_means,
        y_mean=prev_y + y_mean,
    )


def apply_centering(data: Dataset, x_means: np.ndarray, y_mean: float) -> Dataset:
    """Center new data with previously recorded training means."""
    return replace(
        data,
        curves=data.curves - x_means[None, :, :],
        responses=data.responses - y_mean,
        x_means=x_means,
        y_mean=y_mean,
    )


def transform_predictors(data: Dataset, kernel_ops) -> Dataset:
    """Replace every curve by its square-root-kernel image; responses unchanged.

    `kernel_ops` is one SqrtKernelOp shared by all predictors or a sequence of
    length p.
    """
    ops = _per_predictor(kernel_ops, data.p)
    if all(op is ops[0] for op in ops):
        if ops[0].grid != data.grid:
            raise GridMismatchError("kernel operator grid does not match data grid")
        curves = apply_sqrt_values(ops[0], data.curves)
    else:
        curves = np.empty_like(data.curves)
        for j, op in enumerate(ops):
            if op.grid != data.grid:
                raise GridMismatchError(
                    f"kernel operator for predictor {j} is on a different grid"
                )
            curves[:, j, :] = apply_sqrt_values(op, data.curves[:, j, :])
    return replace(data, curves=curves)


def _per_predictor(kernel_ops, p: int) -> list:
    if isinstance(kernel_ops, SqrtKernelOp):
        return [kernel_ops] * p
    ops = list(kernel_ops)
    if len(ops) != p:
        raise ConfigError(f"got {len(ops)} kernel operators for p={p} predictors")
    return ops


def empirical_eigen(curves: np.ndarray, grid: Grid, m: int):
    """Top-m eigenpairs of the empirical covariance operator of one predictor.

    `curves` is (n, T) and assumed centered.  Solved through the n x n dual
    Gram matrix G[i,i'] = (1/n) <X_i, X_i'>; requesting more modes than the
    available rank truncates to the rank.  Returns (eigenfunctions (T, m_eff),
    eigenvalues (m_eff,), scores (n, m_eff)).
    """
    n = curves.shape[0]
    gram = (curves * grid.weights) @ curves.T / n
    gram = 0.5 * (gram + gram.T)
    eigvals, eigvecs = np.linalg.eigh(gram)
    eigvals = eigvals[::-1]
    eigvecs = eigvecs[:, ::-1]
    top = max(eigvals[0], 0.0) if eigvals.size else 0.0
    rank = int(np.sum(eigvals > _RANK_RTOL * top)) if top > 0 else 0
    m_eff = min(m, rank, n)
    eigvals = eigvals[:m_eff]
    eigvecs = eigvecs[:, :m_eff]
    scale = np.sqrt(n * eigvals)
    phi = curves.T @ eigvecs / scale[None, :]
    scores = eigvecs * scale[None, :]
    # Deterministic sign: largest-magnitude grid value of each phi positive.
    flip = phi[np.abs(phi).argmax(axis=0), np.arange(m_eff)] < 0
    phi[:, flip] *= -1.0
    scores[:, flip] *= -1.0
    return phi, eigvals, scores


def build_design(data: Dataset, hp: HyperParams, kernel_ops=None) -> ReducedRankDesign:
    """Assemble the reduced-rank design from transformed, centered data.

    Pass the kernel operators used by `transform_predictors` so fitted
    surrogates can be mapped back to coefficient curves; omit them only if
    the predictors were not kernel-transformed.
    """
    if data.x_means is None or data.y_mean is None:
        raise DataError("data must be centered before building the design")
    phis, rhos, gammas, h_diag = [], [], [], []
    for j in range(data.p):
        phi, rho, scores = empirical_eigen(data.curves[:, j, :], data.grid, hp.s)
        phis.append(phi)
        rhos.append(rho)
        gammas.append(scores)
        h_diag.append(_h_diag(rho, hp, j))
    return ReducedRankDesign(
        grid=data.grid,
        n=data.n,
        p=data.p,
        eigenfunctions=phis,
        eigenvalues=rhos,
        scores=gammas,
        h_diag=h_diag,
        psi=hp.psi,
        theta=hp.theta if hp.psi == PSI_COV_FLOOR else 0.0,
        x_means=np.asarray(data.x_means, dtype=float),
        y_mean=float(data.y_mean),
        kernel_ops=tuple(_per_predictor(kernel_ops, data.p))
        if kernel_ops is not None else None,
    )


def _h_diag(rho: np.ndarray, hp: HyperParams, j: int) -> np.ndarray:
    if hp.psi == PSI_IDENTITY:
        return np.ones_like(rho)
    h = rho + hp.theta
    if np.any(h <= 0.0):
        raise NumericalError(
            f"predictor {j}: H_j is singular (zero eigenvalue with theta=0); "
            f"use theta > 0 or the identity psi"
        )
    return h


def reslice_design(design: ReducedRankDesign, hp: HyperParams) -> ReducedRankDesign:
    """Derive the design at a smaller rank and/or different penalty floor.

    Eigenpairs are computed once at the largest rank and sliced, so a grid
    search over (s, theta) reuses one eigendecomposition per predictor.
    """
    phis, rhos, gammas, h_diag = [], [], [], []
    for j in range(design.p):
        m = min(hp.s, design.eigenvalues[j].shape[0])
        rho = design.eigenvalues[j][:m]
        phis.append(design.eigenfunctions[j][:, :m])
        rhos.append(rho)
        gammas.append(design.scores[j][:, :m])
        h_diag.append(_h_diag(rho, hp, j))
    return replace(
        design,
        eigenfunctions=phis,
        eigenvalues=rhos,
        scores=gammas,
        h_diag=h_diag,
        psi=hp.psi,
        theta=hp.theta if hp.psi == PSI_COV_FLOOR else 0.0,
    )


def new_scores(design: ReducedRankDesign, curves: np.ndarray) -> list:
    """Scores of new (already centered and transformed) curves against the
    training eigenfunctions; returns a list of (n_new, M_j) arrays."""
    if curves.shape[2] != design.grid.num_points:
        raise GridMismatchError("new curves are on a different grid")
    w = design.grid.weights
    return [
        (curves[:, j, :] * w) @ design.eigenfunctions[j]
        for j in range(design.p)
    ]
