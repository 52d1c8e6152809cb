"""Synthetic data generators for the three benchmark scenarios.

Predictors are Karhunen-Loeve series in the cosine basis,

    X_ij(t) = sqrt(2) sum_k z_ijk sqrt(nu_k) cos(k*pi*t),

with, per frequency k, the score vector (z_i1k, ..., z_ipk) drawn from
N(0, Sigma_p) where Sigma_p is AR(1) with parameter rho.  True coefficient
functions on the signal set {1..q} are

    beta_j(t) = 4 sum_k (-1)^{u_jk} r_k phi_k(t),     u_jk ~ Bernoulli(1/2),

with scenario-specific (phi_k, r_k, nu_k):

    I:   phi_k = sqrt(2) cos(k*pi*t),  nu_k = r_k = exp(-k/4)
    II:  phi_k = sqrt(2) sin(k*pi*t),  nu_k = r_k = exp(-k/4)
    III: phi_k = sqrt(2) cos(k*pi*t),  r_k = k^-2, nu_k = (|k-k0|+1)^-2

Responses are computed from the analytic series coefficients (no quadrature
error enters y); in scenario II this uses the exact cosine/sine cross-Gram.

Reproducibility: all draws come from numpy's PCG64 generator.  A master seed
feeds a SeedSequence; replicate r of an experiment uses spawn child r.  Draw
order is fixed: signs u, train scores, train noise, test scores, test noise.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .design import Dataset
from .errors import ConfigError
from .grid import DEFAULT_NUM_POINTS, Grid, make_grid

SCENARIOS = ("I", "II", "III")
RNG_ALGORITHM = "numpy-PCG64/SeedSequence-spawn"


@dataclass(frozen=True)
class ScenarioConfig:
    """Declarative description of one simulated problem."""

    scenario: str
    n: int
    p: int
    q: int
    rho: float = 0.0
    sigma: float = 0.5
    k_max: int = 100
    k0: int = 10
    test_n: int = 100
    num_grid_points: int = DEFAULT_NUM_POINTS
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.q > self.p:
            raise ConfigError(f"q={self.q} exceeds p={self.p}")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigError(f"rho must be in [0, 1), got {self.rho}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        if self.n < 2 or self.test_n < 1 or self.q < 1:
            raise ConfigError("need n >= 2, test_n >= 1, q >= 1")
        if self.scenario == "III" and self.k_max < self.k0 + 5:
            raise ConfigError(
                f"scenario III needs k_max >= k0+5 = {self.k0 + 5}, got {self.k_max}"
            )


@dataclass(frozen=True)
class Truth:
    """Generator ground truth needed by the metrics."""

    signal_set: np.ndarray
    beta_curves: np.ndarray = field(repr=False)
    beta_coefs: np.ndarray = field(repr=False)
    signs: np.ndarray = field(repr=False)
    basis: str
    nu: np.ndarray = field(repr=False)
    rho: float
    sigma: float
    k_max: int
    p: int


def scenario_series(cfg: ScenarioConfig):
    """(nu_k, r_k, basis kind) for k = 1..k_max under the given scenario."""
    k = np.arange(1, cfg.k_max + 1, dtype=float)
    if cfg.scenario in ("I", "II"):
        nu = np.exp(-k / 4.0)
        r = np.exp(-k / 4.0)
    else:
        nu = (np.abs(k - cfg.k0) + 1.0) ** -2.0
        r = k ** -2.0
    basis = "sin" if cfg.scenario == "II" else "cos"
    return nu, r, basis


def ar1_chol(p: int, rho: float) -> np.ndarray:
    """Closed-form lower Cholesky factor of the AR(1) correlation matrix.

    L[j,0] = rho^j and L[j,k] = rho^(j-k) sqrt(1-rho^2) for 1 <= k <= j, so
    L L' reproduces rho^|j-k| exactly.
    """
    if not 0.0 <= rho < 1.0:
        raise ConfigError(f"rho must be in [0, 1), got {rho}")
    powers = rho ** np.arange(p, dtype=float)
    lower = np.zeros((p, p))
    lower[:, 0] = powers
    scale = np.sqrt(1.0 - rho * rho)
    for k in range(1, p):
        lower[k:, k] = scale * powers[: p - k]
    return lower


def ar1_corr(p: int, rho: float) -> np.ndarray:
    """The AR(1) correlation matrix with entries rho^|j-k|."""
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def cos_sin_cross_gram(k_max: int) -> np.ndarray:
    """M[k,k'] = integral of 2 cos(k pi t) sin(k' pi t) over [0,1].

    Zero when k+k' is even; otherwise 2/pi * (1/(k+k') + 1/(k'-k)).
    """
    k = np.arange(1, k_max + 1)
    ksum = k[:, None] + k[None, :]
    kdif = k[None, :] - k[:, None]
    gram = np.zeros((k_max, k_max))
    odd = ksum % 2 == 1
    with np.errstate(divide="ignore"):
        vals = 2.0 / np.pi * (1.0 / ksum + np.where(kdif == 0, np.inf, 1.0 / kdif))
    gram[odd] = vals[odd]
    return gram


def _basis_matrix(kind: str, k_max: int, grid: Grid) -> np.ndarray:
    """Rows sqrt(2) cos(k pi t) (or sin), k = 1..k_max, on the grid."""
    k = np.arange(1, k_max + 1)[:, None]
    phase = k * np.pi * grid.points[None, :]
    return np.sqrt(2.0) * (np.sin(phase) if kind == "sin" else np.cos(phase))


def _draw_scores(rng, n, p, k_max, chol):
    raw = rng.standard_normal((n, p, k_max))
    if chol is None:
        return raw
    return np.einsum("jl,ilk->ijk", chol, raw)


def generate(cfg: ScenarioConfig):
    """Simulate (train Dataset, test Dataset, Truth) under the scenario.

    The response is assembled from the analytic series coefficients; curves
    are materialized on the grid afterwards, so y carries no quadrature error.
    Fixed seed implies bitwise-identical output.
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    return generate_with_rng(cfg, rng)


def generate_with_rng(cfg: ScenarioConfig, rng):
    """Like `generate` but drawing from the caller's generator stream."""
    grid = make_grid(cfg.num_grid_points)
    nu, r, basis = scenario_series(cfg)
    sqrt_nu = np.sqrt(nu)
    chol = ar1_chol(cfg.p, cfg.rho) if cfg.rho != 0.0 else None

    signs = rng.integers(0, 2, size=(cfg.q, cfg.k_max))
    beta_coefs = 4.0 * np.where(signs == 1, -1.0, 1.0) * r[None, :]

    # Response weights: <X_j, beta_j> = sum_k a_jk (G b_j)_k with a = z*sqrt(nu)
    # and G the basis cross-Gram (identity when both bases are cosines).
    if basis == "cos":
        resp_weights = beta_coefs
    else:
        resp_weights = beta_coefs @ cos_sin_cross_gram(cfg.k_max).T

    cos_basis = _basis_matrix("cos", cfg.k_max, grid)
    beta_basis = cos_basis if basis == "cos" else _basis_matrix("sin", cfg.k_max, grid)
    beta_curves = np.zeros((cfg.p, grid.num_points))
    beta_curves[: cfg.q] = beta_coefs @ beta_basis

    def one_sample_set(n):
        z = _draw_scores(rng, n, cfg.p, cfg.k_max, chol)
        noise = cfg.sigma * rng.standard_normal(n)
        a = z * sqrt_nu[None, None, :]
        y = np.einsum("ijk,jk->i", a[:, : cfg.q, :], resp_weights) + noise
        curves = (a.reshape(n * cfg.p, cfg.k_max) @ cos_basis).reshape(
            n, cfg.p, grid.num_points
        )
        return Dataset(grid=grid, curves=curves, responses=y, noise_sd=cfg.sigma)

    truth = Truth(
        signal_set=np.arange(cfg.q),
        beta_curves=beta_curves,
        beta_coefs=beta_coefs,
        signs=signs,
        basis=basis,
        nu=nu,
        rho=cfg.rho,
        sigma=cfg.sigma,
        k_max=cfg.k_max,
        p=cfg.p,
    )
    train = one_sample_set(cfg.n)
    test = one_sample_set(cfg.test_n)
    train = replace(train, truth=truth)
    test = replace(test, truth=truth)
    return train, test, truth
