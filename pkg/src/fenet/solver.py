"""Block coordinate-descent solver for the group elastic-net objective.

The objective, in the d = H^(1/2) c parameterization, is

    (1/2n) ||y - sum_j A_j d_j||^2 + lam1 sum_j ||d_j||_2
        + (lam2/2) sum_j d_j' H_j^{-1} d_j,       A_j = Gamma_j H_j^{-1/2}.

Each blockwise subproblem  min (1/2) d'Omega d - rho'd + lam1 ||d||  has the
thresholding solution: zero when ||rho|| <= lam1, otherwise the root of
Omega d - rho + lam1 d/||d|| = 0.  With the covariance-floor (or identity)
penalty metric, Omega is diagonal and the root reduces to a scalar equation
solved to near machine precision, so cyclic sweeps of exact block solves
drive the objective monotonically to the global minimum; convergence is
accepted only once the stationarity conditions hold to tolerance.
"""

from dataclasses import dataclass, field

import numpy as np

from ._cd import cd_gradients, cd_sweep, root_scaled_norm
from .design import PSI_IDENTITY, HyperParams, ReducedRankDesign
from .errors import ConfigError, NumericalError

_BLOCK_RESIDUAL_RTOL = 1e-10
_DENSE_MAX_ITER = 100_000


@dataclass(frozen=True)
class BlockProblem:
    """One blockwise subproblem: quadratic form omega, linear term rho, lam1.

    `omega` is either an (M, M) symmetric positive-definite matrix or a
    length-M vector holding a positive diagonal.
    """

    omega: np.ndarray
    rho: np.ndarray
    lam1: float

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        rho = np.asarray(self.rho, dtype=float)
        if self.lam1 < 0:
            raise ConfigError(f"lam1 must be >= 0, got {self.lam1}")
        if omega.ndim == 1:
            if omega.shape != rho.shape:
                raise ConfigError("diagonal omega and rho sizes differ")
            if np.any(omega <= 0):
                raise NumericalError("omega diagonal must be positive")
        elif omega.ndim == 2:
            if omega.shape != (rho.size, rho.size):
                raise ConfigError("omega and rho sizes differ")
            scale = max(np.abs(omega).max(), 1.0)
            if np.abs(omega - omega.T).max() > 1e-12 * scale:
                raise NumericalError("omega must be symmetric")
            if np.linalg.eigvalsh(omega)[0] <= 0:
                raise NumericalError("omega must be positive definite")
        else:
            raise ConfigError("omega must be a vector or a square matrix")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "rho", rho)


def solve_block(prob: BlockProblem, d_init: np.ndarray | None = None) -> np.ndarray:
    """Exact minimizer of one block subproblem.

    Returns the zero vector when ||rho||_2 <= lam1 (boundary included).
    Diagonal omega uses the scalar root; dense omega falls back to the
    fixed-point iteration d <- (Omega + lam1 ||d||^-1 I)^-1 rho.
    """
    rho = prob.rho
    lam1 = prob.lam1
    nr = float(np.linalg.norm(rho))
    if nr <= lam1:
        return np.zeros_like(rho)
    diag = prob.omega if prob.omega.ndim == 1 else None
    if lam1 == 0.0:
        if diag is not None:
            return rho / diag
        return np.linalg.solve(prob.omega, rho)
    if diag is not None:
        s = root_scaled_norm(
            np.ascontiguousarray(rho), np.ascontiguousarray(diag), lam1, nr
        )
        return s * rho / (s * diag + lam1)
    return _solve_block_dense(prob.omega, rho, lam1, nr, d_init)


def _solve_block_dense(omega, rho, lam1, nr, d_init):
    tol = 0.1 * _BLOCK_RESIDUAL_RTOL * (1.0 + np.abs(rho).max())
    if d_init is not None and np.linalg.norm(d_init) > 0:
        d = np.asarray(d_init, dtype=float)
    else:
        d = np.linalg.solve(omega + (lam1 / nr) * np.eye(rho.size), rho)
    eye = np.eye(rho.size)
    for _ in range(_DENSE_MAX_ITER):
        nd = np.linalg.norm(d)
        if nd == 0.0:
            raise NumericalError("dense block iteration collapsed to zero")
        d = np.linalg.solve(omega + (lam1 / nd) * eye, rho)
        nd = np.linalg.norm(d)
        residual = omega @ d - rho + lam1 * d / nd
        if np.abs(residual).max() <= tol:
            return d
    raise NumericalError(
        f"dense block solve did not reach tolerance {tol:.3e} in "
        f"{_DENSE_MAX_ITER} iterations (||rho||={nr:.3e}, lam1={lam1:.3e})"
    )


@dataclass(frozen=True)
class KKTReport:
    """Stationarity diagnostics of a fit at its converged point.

    For selected blocks, `active_residual_inf` holds the max-norm of the
    blockwise stationarity residual; for deselected blocks, `slack` holds
    lam1 - ||rho_j||_2 (negative means a violation).  Entries not applicable
    to a block are NaN.
    """

    active: np.ndarray
    active_residual_inf: np.ndarray
    slack: np.ndarray
    max_violation: float


@dataclass(frozen=True)
class FEnetFit:
    """Result of a functional elastic-net fit.

    Deselected blocks are exact zero vectors.  `coef_blocks` holds
    c_j = H_j^{-1/2} d_j, the surrogate coefficients in the eigenfunction
    basis; `curves` holds the coefficient functions (the square-root kernel
    image of the surrogates) on the grid, one row per predictor.
    """

    blocks: list = field(repr=False)
    coef_blocks: list = field(repr=False)
    curves: np.ndarray = field(repr=False)
    selected: np.ndarray
    objective_trace: np.ndarray = field(repr=False)
    sweeps: int
    converged: bool
    kkt_max: float
    hp: HyperParams
    n: int

    @property
    def block_norms(self) -> np.ndarray:
        return np.array([float(np.linalg.norm(b)) for b in self.blocks])


class _Stacked:
    """Flat, cache-friendly view of a design for the sweep kernel."""

    __slots__ = ("at", "offs", "block_of", "h", "hm12", "q", "rho", "n", "p", "work")

    def __init__(self, design: ReducedRankDesign):
        sizes = design.block_sizes
        offs = np.zeros(design.p + 1, dtype=np.int64)
        np.cumsum(sizes, out=offs[1:])
        total = int(offs[-1])
        n = design.n
        self.n = n
        self.p = design.p
        self.offs = offs
        self.block_of = np.repeat(np.arange(design.p), sizes)
        self.h = np.concatenate(design.h_diag) if total else np.empty(0)
        self.hm12 = 1.0 / np.sqrt(self.h)
        self.rho = np.concatenate(design.eigenvalues) if total else np.empty(0)
        self.q = self.rho / self.h
        at = np.empty((total, n))
        for j in range(design.p):
            at[offs[j]:offs[j + 1]] = (design.scores[j] * self.hm12[offs[j]:offs[j + 1]]).T
        self.at = at
        self.work = np.empty(int(sizes.max()) if design.p else 1)

    def omega(self, lam2: float) -> np.ndarray:
        return (self.rho + lam2) / self.h

    def residual(self, y: np.ndarray, d: np.ndarray) -> np.ndarray:
        return y - self.at.T @ d

    def block_norms(self, v: np.ndarray) -> np.ndarray:
        sq = np.bincount(self.block_of, weights=v * v, minlength=self.p)
        return np.sqrt(sq)

    def objective(self, r, d, lam1, lam2) -> float:
        value = 0.5 * float(r @ r) / self.n
        value += lam1 * float(self.block_norms(d).sum())
        value += 0.5 * lam2 * float((d * d / self.h).sum())
        return value

    def kkt(self, r, d, lam1, lam2) -> KKTReport:
        g = cd_gradients(self.at, r, self.n) if self.at.shape[0] else np.empty(0)
        bnorm = self.block_norms(d)
        active = bnorm > 0.0
        res_inf = np.full(self.p, np.nan)
        slack = np.full(self.p, np.nan)
        if np.any(active):
            denom = bnorm[self.block_of]
            cols = denom > 0.0
            res = np.zeros_like(d)
            res[cols] = (
                (lam2 / self.h[cols]) * d[cols]
                + lam1 * d[cols] / denom[cols]
                - g[cols]
            )
            acc = np.zeros(self.p)
            np.maximum.at(acc, self.block_of[cols], np.abs(res[cols]))
            res_inf[active] = acc[active]
        gnorm = self.block_norms(g)
        slack[~active] = lam1 - gnorm[~active]
        violations = [0.0]
        if np.any(active):
            violations.append(float(np.nanmax(res_inf[active])))
        if np.any(~active):
            violations.append(float(max(0.0, -np.nanmin(slack[~active]))))
        return KKTReport(active, res_inf, slack, max(violations))


def _stack(design: ReducedRankDesign) -> _Stacked:
    return _Stacked(design)


def _flatten_init(stacked: _Stacked, d_init) -> np.ndarray:
    if d_init is None:
        return np.zeros(stacked.at.shape[0])
    blocks = list(d_init)
    if len(blocks) != stacked.p:
        raise ConfigError(f"d_init has {len(blocks)} blocks, design has {stacked.p}")
    flat = np.concatenate([np.asarray(b, dtype=float).ravel() for b in blocks]) \
        if stacked.at.shape[0] else np.empty(0)
    if flat.shape[0] != stacked.at.shape[0]:
        raise ConfigError("d_init block sizes do not match the design")
    return flat


def _run_cd(stacked, y, d, lam1, lam2, tol_outer, max_sweeps, kkt_tol, certify):
    """Sweeps until the objective plateaus and (if certifying) KKT passes."""
    omega = stacked.omega(lam2)
    r = stacked.residual(y, d)
    prev = stacked.objective(r, d, lam1, lam2)
    trace = [prev]
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        cd_sweep(stacked.at, stacked.offs, stacked.q, omega, lam1, r, d, stacked.work)
        r = stacked.residual(y, d)
        obj = stacked.objective(r, d, lam1, lam2)
        trace.append(obj)
        if not np.isfinite(obj):
            raise NumericalError(f"objective became non-finite at sweep {sweeps}")
        if prev - obj <= tol_outer * max(1.0, abs(prev)):
            if not certify:
                converged = True
                prev = obj
                break
            if stacked.kkt(r, d, lam1, lam2).max_violation <= kkt_tol:
                converged = True
                prev = obj
                break
        prev = obj
    return r, np.array(trace), sweeps, converged


def fit_fenet(
    design: ReducedRankDesign,
    y: np.ndarray,
    hp: HyperParams,
    *,
    d_init=None,
    tol_outer: float = 1e-9,
    max_sweeps: int = 500,
    kkt_tol_factor: float = 1e-9,
    certify: bool = True,
) -> FEnetFit:
    """Fit the functional elastic-net by cyclic block coordinate descent.

    Blocks are updated in fixed order 1..p starting from zero (or `d_init`).
    The fit is declared converged once the relative objective decrease per
    sweep falls below `tol_outer` and, when `certify` is set, the
    stationarity violation is below kkt_tol_factor * (1 + ||y||_inf).
    A non-converged fit is still returned, flagged accordingly.
    """
    y = np.ascontiguousarray(y, dtype=float)
    if y.shape != (design.n,):
        raise ConfigError(f"y has shape {y.shape}, design expects ({design.n},)")
    if hp.lam == 0.0:
        return _fit_least_squares(design, y, hp)
    stacked = _stack(design)
    d = _flatten_init(stacked, d_init)
    kkt_tol = kkt_tol_factor * (1.0 + float(np.abs(y).max()))
    r, trace, sweeps, converged = _run_cd(
        stacked, y, d, hp.lam1, hp.lam2, tol_outer, max_sweeps, kkt_tol, certify
    )
    kkt_max = stacked.kkt(r, d, hp.lam1, hp.lam2).max_violation
    return _build_fit(design, stacked, d, trace, sweeps, converged, kkt_max, hp)


def _build_fit(design, stacked, d, trace, sweeps, converged, kkt_max, hp):
    offs = stacked.offs
    blocks = [d[offs[j]:offs[j + 1]].copy() for j in range(design.p)]
    coef_blocks = [
        blocks[j] * stacked.hm12[offs[j]:offs[j + 1]] for j in range(design.p)
    ]
    curves = np.zeros((design.p, design.grid.num_points))
    selected = []
    for j in range(design.p):
        if np.any(blocks[j] != 0.0):
            selected.append(j)
            curves[j] = design.coefficient_curve(j, coef_blocks[j])
    return FEnetFit(
        blocks=blocks,
        coef_blocks=coef_blocks,
        curves=curves,
        selected=np.array(selected, dtype=int),
        objective_trace=trace,
        sweeps=sweeps,
        converged=converged,
        kkt_max=kkt_max,
        hp=hp,
        n=design.n,
    )


def _fit_least_squares(design, y, hp):
    """Degenerate lam = 0 fit: plain least squares on the stacked design."""
    from .refine import fit_refined

    refined = fit_refined(design, y, np.arange(design.p), 0.0)
    stacked = _stack(design)
    offs = stacked.offs
    d = np.concatenate(
        [refined.coef_blocks[j] / stacked.hm12[offs[j]:offs[j + 1]]
         for j in range(design.p)]
    ) if stacked.at.shape[0] else np.empty(0)
    r = stacked.residual(y, d)
    obj = stacked.objective(r, d, 0.0, 0.0)
    kkt_max = stacked.kkt(r, d, 0.0, 0.0).max_violation
    return _build_fit(design, stacked, d, np.array([obj]), 0, True, kkt_max, hp)


def objective(design: ReducedRankDesign, y, blocks, hp: HyperParams) -> float:
    """The penalized objective value at the given coefficient blocks."""
    stacked = _stack(design)
    d = _flatten_init(stacked, blocks)
    r = stacked.residual(np.asarray(y, dtype=float), d)
    return stacked.objective(r, d, hp.lam1, hp.lam2)


def kkt_check(fit: FEnetFit, design: ReducedRankDesign, y, hp: HyperParams) -> KKTReport:
    """Stationarity report of a completed fit, recomputed from scratch."""
    stacked = _stack(design)
    d = _flatten_init(stacked, fit.blocks)
    r = stacked.residual(np.ascontiguousarray(y, dtype=float), d)
    return stacked.kkt(r, d, hp.lam1, hp.lam2)


def universal_lam1(design: ReducedRankDesign, y) -> float:
    """Smallest lam1 at which the first sweep from zero deselects every block."""
    stacked = _stack(design)
    if stacked.at.shape[0] == 0:
        return 0.0
    g = cd_gradients(stacked.at, np.ascontiguousarray(y, dtype=float), stacked.n)
    return float(stacked.block_norms(g).max())


@dataclass(frozen=True)
class PathPoint:
    """Lean record of one fit along a regularization path."""

    lam: float
    coef_flat: np.ndarray = field(repr=False)
    selected_mask: np.ndarray = field(repr=False)
    objective: float
    objective_trace: np.ndarray = field(repr=False)
    converged: bool

    @property
    def num_selected(self) -> int:
        return int(self.selected_mask.sum())


def fit_path(
    design: ReducedRankDesign,
    y: np.ndarray,
    lams: np.ndarray,
    alpha: float,
    *,
    tol_outer: float = 1e-9,
    max_sweeps: int = 500,
    kkt_tol_factor: float = 1e-9,
    certify: bool = True,
) -> list:
    """Warm-started fits along a lam grid at fixed alpha and penalty metric.

    Fits run from the largest lam down; each fit starts from the previous
    solution.  Returns one PathPoint per requested lam, in the input order.
    `coef_flat` holds the stacked c_j = H_j^{-1/2} d_j.
    """
    y = np.ascontiguousarray(y, dtype=float)
    lams = np.asarray(lams, dtype=float)
    stacked = _stack(design)
    kkt_tol = kkt_tol_factor * (1.0 + float(np.abs(y).max()))
    order = np.argsort(-lams, kind="stable")
    d = np.zeros(stacked.at.shape[0])
    points: list = [None] * lams.size
    for idx in order:
        lam = lams[idx]
        if lam == 0.0:
            raise ConfigError("lam = 0 is not allowed on a path; fit it separately")
        lam1 = alpha * lam
        lam2 = (1.0 - alpha) * lam
        _, trace, _, converged = _run_cd(
            stacked, y, d, lam1, lam2, tol_outer, max_sweeps, kkt_tol, certify
        )
        mask = stacked.block_norms(d) > 0.0
        points[idx] = PathPoint(
            lam=float(lam),
            coef_flat=(d * stacked.hm12).copy(),
            selected_mask=mask,
            objective=float(trace[-1]),
            objective_trace=trace,
            converged=converged,
        )
    return points
