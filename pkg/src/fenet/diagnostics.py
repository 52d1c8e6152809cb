"""Numerical checks of the selection-consistency conditions for partially
separable covariances.

The covariance of the signal block is modeled as sum_k nu_k R (psi_k x psi_k)
with one q x q correlation matrix R shared across frequencies.  Two
operator-norm quantities control the theory:

  * kappa(lam2): the (inf, inf)-norm of T (T + lam2 I)^{-1}, bounded above by
    max_j sum_j' max_k |B_k[j,j']| with B_k = R (R + (lam2/nu_k) I)^{-1}.
    Closed-form ceilings: 1 + 3 rho/(1-rho) for AR(1); for MA(1),
    1 + (1 - 4 rho^2)^{-1/2} * 2 theta/(1-theta) with
    theta = (1 - sqrt(1 - 4 rho^2)) / (2 rho).

  * aleph(lam2): the same norm of (T - diag T)(diag T + lam2 I)^{-1}, equal to
    max_j sum_{j' != j} max_k (nu_k/(nu_k+lam2)) |R[j,j']| because all
    frequency blocks share the sign structure of R.  Values below 1 certify
    the within-signal correlation condition; MA(1) stays below 2 rho, AR(1)
    below 2 rho/(1-rho), so rho <= 1/3 suffices for AR(1) at large q.

The exact (inf,inf) norm of kappa's operator has no closed algorithm; the
upper bound above is paired with a sampled lower bound from random unit-ball
probes on the rank-K truncation so the truth is bracketed.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError
from .simulate import ar1_corr

MA1 = "ma1"
AR1 = "ar1"


@dataclass(frozen=True)
class PartSepCov:
    """Partially separable signal-block covariance: kind, rho, eigenvalues, q."""

    kind: str
    rho: float
    nu: np.ndarray = field(repr=False)
    q: int

    def __post_init__(self):
        if self.kind not in (MA1, AR1):
            raise ConfigError(f"kind must be {MA1!r} or {AR1!r}, got {self.kind!r}")
        if self.kind == MA1 and not abs(self.rho) < 0.5:
            raise ConfigError(f"MA(1) needs |rho| < 1/2, got {self.rho}")
        if self.kind == AR1 and not abs(self.rho) < 1.0:
            raise ConfigError(f"AR(1) needs |rho| < 1, got {self.rho}")
        if self.q < 1:
            raise ConfigError(f"q must be >= 1, got {self.q}")
        nu = np.asarray(self.nu, dtype=float)
        if nu.ndim != 1 or nu.size < 1:
            raise ConfigError("nu must be a nonempty vector")
        if np.any(nu <= 0) or np.any(np.diff(nu) > 0):
            raise ConfigError("nu must be positive and non-increasing")
        object.__setattr__(self, "nu", nu)

    @property
    def corr(self) -> np.ndarray:
        if self.kind == AR1:
            return ar1_corr(self.q, self.rho)
        r = np.eye(self.q)
        idx = np.arange(self.q - 1)
        r[idx, idx + 1] = self.rho
        r[idx + 1, idx] = self.rho
        return r


def geometric_nu(k_terms: int, decay: float = 0.25) -> np.ndarray:
    """nu_k = exp(-decay * k), k = 1..k_terms."""
    return np.exp(-decay * np.arange(1, k_terms + 1))


@dataclass(frozen=True)
class KappaBound:
    upper: float
    sampled_lower: float


def kappa_bound(cov: PartSepCov, lam2: float, *, num_probes: int = 64,
                seed: int = 0) -> KappaBound:
    """Upper bound and sampled lower bound for kappa(lam2).

    The upper bound is the row-sum-of-max over the per-frequency shrinkage
    matrices B_k; the lower bound maximizes ||A f||_inf over random probes f
    with max_j ||f_j||_2 <= 1 restricted to the rank-K truncation.
    """
    if lam2 <= 0:
        raise ConfigError(f"lam2 must be > 0, got {lam2}")
    bks = _shrinkage_blocks(cov, lam2)
    upper = float(np.abs(bks).max(axis=0).sum(axis=1).max())
    rng = np.random.default_rng(seed)
    k_terms = cov.nu.size
    lower = 0.0
    for _ in range(num_probes):
        coef = rng.standard_normal((cov.q, k_terms))
        coef /= np.linalg.norm(coef, axis=1, keepdims=True)
        image = np.einsum("kjl,lk->jk", bks, coef)
        lower = max(lower, float(np.linalg.norm(image, axis=1).max()))
    return KappaBound(upper=upper, sampled_lower=lower)


def _shrinkage_blocks(cov: PartSepCov, lam2: float) -> np.ndarray:
    """B_k = R (R + (lam2/nu_k) I)^{-1} for every retained frequency.

    R and its shifted inverse commute (shared eigenvectors), so B_k is
    symmetric and equals (R + theta_k I)^{-1} R.
    """
    r = cov.corr
    eye = np.eye(cov.q)
    out = np.empty((cov.nu.size, cov.q, cov.q))
    for k, nu_k in enumerate(cov.nu):
        b = np.linalg.solve(r + (lam2 / nu_k) * eye, r)
        out[k] = 0.5 * (b + b.T)
    return out


def aleph(cov: PartSepCov, lam2: float) -> float:
    """The within-signal correlation functional aleph(lam2).

    Exact for this covariance family: all frequency blocks share R's sign
    structure, so the norm is max_j sum_{j' != j} max_k
    (nu_k/(nu_k+lam2)) |R[j,j']|, and the max over k sits at nu_1.
    """
    if lam2 < 0:
        raise ConfigError(f"lam2 must be >= 0, got {lam2}")
    shrink = cov.nu[0] / (cov.nu[0] + lam2)
    off = np.abs(cov.corr - np.diag(np.diag(cov.corr)))
    return float(shrink * off.sum(axis=1).max())


def kappa_ceiling(cov: PartSepCov) -> float:
    """The closed-form lam2- and q-free ceiling on kappa for the family."""
    rho = abs(cov.rho)
    if cov.kind == AR1:
        return 1.0 + 3.0 * rho / (1.0 - rho)
    if rho == 0.0:
        return 1.0
    root = np.sqrt(1.0 - 4.0 * rho * rho)
    theta = (1.0 - root) / (2.0 * rho)
    return 1.0 + (1.0 / root) * 2.0 * theta / (1.0 - theta)


def aleph_ceiling(cov: PartSepCov) -> float:
    """The lam2-free ceiling on aleph: 2 rho (MA1) or 2 rho/(1-rho) (AR1)."""
    rho = abs(cov.rho)
    return 2.0 * rho if cov.kind == MA1 else 2.0 * rho / (1.0 - rho)


@dataclass(frozen=True)
class ConditionReport:
    """Serializable summary of the checkable conditions at one lam2."""

    kind: str
    rho: float
    q: int
    lam2: float
    kappa_upper: float
    kappa_sampled_lower: float
    kappa_ceiling: float
    aleph: float
    aleph_ceiling: float
    c4_satisfied: bool
    tau: float
    truncation_terms: int
    neglected_tail_bound: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def check_conditions(cov: PartSepCov, lam2: float, *, seed: int = 0) -> ConditionReport:
    """Aggregate kappa/aleph numerics and the trace bound into one report."""
    kb = kappa_bound(cov, lam2, seed=seed)
    al = aleph(cov, lam2)
    return ConditionReport(
        kind=cov.kind,
        rho=cov.rho,
        q=cov.q,
        lam2=lam2,
        kappa_upper=kb.upper,
        kappa_sampled_lower=kb.sampled_lower,
        kappa_ceiling=kappa_ceiling(cov),
        aleph=al,
        aleph_ceiling=aleph_ceiling(cov),
        c4_satisfied=bool(al < 1.0),
        tau=float(cov.nu.sum()),
        truncation_terms=int(cov.nu.size),
        neglected_tail_bound=float(cov.q * cov.nu[-1]),
    )
