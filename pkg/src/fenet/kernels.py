"""Reproducing kernels on [0,1], their quadrature spectra, and square-root operators.

The two built-in kernels come from fourth-order Bernoulli polynomials,

    cosine kind:  K(s,t) = -(1/3) [B4(|s-t|/2) + B4((s+t)/2)]
    sine kind:    K(s,t) = -(1/3) [B4(|s-t|/2) - B4((s+t)/2)]

with B4(x) = x^4 - 2x^3 + x^2 - 1/30.  Their Mercer series are
sum_k (k*pi)^-4 * 2cos(k*pi*s)cos(k*pi*t) and the sine analogue, so the
leading eigenpairs are known in closed form and used as test oracles.

The square-root operator is obtained from the symmetric weighted eigenproblem
W^(1/2) K W^(1/2) (W = diagonal quadrature weights), which yields
eigenfunctions that are exactly orthonormal under the quadrature inner
product.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, NumericalError
from .grid import Grid, GridFunction

COSINE_BERNOULLI = "cosine_bernoulli"
SINE_BERNOULLI = "sine_bernoulli"
CUSTOM = "custom"

_SYMMETRY_TOL = 1e-12
_PSD_TOL = 1e-10


def bernoulli4(x):
    """Fourth Bernoulli polynomial, Horner form x^2 (x-1)^2 - 1/30."""
    x = np.asarray(x, dtype=float)
    return x * x * (x - 1.0) * (x - 1.0) - 1.0 / 30.0


@dataclass(frozen=True)
class KernelSpec:
    """A reproducing kernel: a named closed form or an explicit grid matrix."""

    kind: str
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind in (COSINE_BERNOULLI, SINE_BERNOULLI):
            if self.matrix is not None:
                raise ValueError(f"{self.kind} kernel takes no matrix")
        elif self.kind == CUSTOM:
            m = np.asarray(self.matrix, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError(f"custom kernel matrix must be square, got {m.shape}")
            scale = max(np.abs(m).max(), 1.0)
            if np.abs(m - m.T).max() > _SYMMETRY_TOL * scale:
                raise NumericalError("custom kernel matrix is not symmetric")
            object.__setattr__(self, "matrix", 0.5 * (m + m.T))
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")


def cosine_bernoulli_kernel() -> KernelSpec:
    return KernelSpec(COSINE_BERNOULLI)


def sine_bernoulli_kernel() -> KernelSpec:
    return KernelSpec(SINE_BERNOULLI)


def custom_kernel(matrix: np.ndarray) -> KernelSpec:
    return KernelSpec(CUSTOM, matrix)


def eval_kernel(spec: KernelSpec, s, t, grid: Grid | None = None):
    """Evaluate the kernel at (s, t); arrays broadcast.

    Custom kernels are defined by their values on a grid, so evaluation
    requires `grid` and (s, t) must coincide with grid points.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0.0) or np.any(s > 1.0) or np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("kernel arguments must lie in [0, 1]")
    if spec.kind == COSINE_BERNOULLI:
        return -(bernoulli4(np.abs(s - t) / 2.0) + bernoulli4((s + t) / 2.0)) / 3.0
    if spec.kind == SINE_BERNOULLI:
        return -(bernoulli4(np.abs(s - t) / 2.0) - bernoulli4((s + t) / 2.0)) / 3.0
    if grid is None:
        raise ValueError("custom kernels need the grid they were sampled on")
    i = _grid_index(grid, s)
    j = _grid_index(grid, t)
    return spec.matrix[i, j]


def _grid_index(grid: Grid, x: np.ndarray) -> np.ndarray:
    h = 1.0 / (grid.num_points - 1)
    idx = np.rint(x / h).astype(int)
    if np.any(np.abs(idx * h - x) > 1e-9):
        raise ValueError("custom kernel evaluation only defined at grid points")
    return idx


def kernel_matrix(spec: KernelSpec, grid: Grid) -> np.ndarray:
    """The kernel sampled at all grid-point pairs, shape (T, T)."""
    if spec.kind == CUSTOM:
        if spec.matrix.shape[0] != grid.num_points:
            raise GridMismatchError(
                f"custom kernel has {spec.matrix.shape[0]} points, grid has "
                f"{grid.num_points}"
            )
        return spec.matrix
    s = grid.points[:, None]
    t = grid.points[None, :]
    return eval_kernel(spec, s, t)


@dataclass(frozen=True)
class SqrtKernelOp:
    """Retained spectral pairs of a kernel's integral operator on a grid.

    `eigenfunctions` has shape (T, M) with quadrature-orthonormal columns and
    `eigenvalues` is non-increasing and positive.
    """

    grid: Grid
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray = field(repr=False)

    @property
    def num_modes(self) -> int:
        return self.eigenvalues.shape[0]


def spectral_sqrt(spec: KernelSpec, grid: Grid, floor_ratio: float = 1e-12) -> SqrtKernelOp:
    """Solve the weighted eigenproblem of the kernel's integral operator.

    Modes with eigenvalue below floor_ratio * (largest eigenvalue) are
    dropped.  A zero kernel yields an empty spectrum (apply_sqrt then maps
    everything to zero).
    """
    if not 0.0 < floor_ratio < 1.0:
        raise ValueError(f"floor_ratio must be in (0, 1), got {floor_ratio}")
    K = kernel_matrix(spec, grid)
    sqrt_w = np.sqrt(grid.weights)
    B = sqrt_w[:, None] * K * sqrt_w[None, :]
    B = 0.5 * (B + B.T)
    eigvals, eigvecs = np.linalg.eigh(B)
    eigvals = eigvals[::-1]
    eigvecs = eigvecs[:, ::-1]
    top = eigvals[0] if eigvals.size else 0.0
    if top <= 0.0:
        if eigvals.size and eigvals[-1] < -_PSD_TOL * max(abs(top), 1.0):
            raise NumericalError("kernel matrix is not positive semi-definite")
        return SqrtKernelOp(grid, np.empty(0), np.empty((grid.num_points, 0)))
    if eigvals[-1] < -_PSD_TOL * top:
        raise NumericalError(
            f"kernel matrix is not positive semi-definite "
            f"(min eigenvalue {eigvals[-1]:.3e}, max {top:.3e})"
        )
    keep = eigvals >= floor_ratio * top
    eigvals = eigvals[keep]
    phi = eigvecs[:, keep] / sqrt_w[:, None]
    # Deterministic sign: largest-magnitude entry of each eigenfunction positive.
    flip = phi[np.abs(phi).argmax(axis=0), np.arange(phi.shape[1])] < 0
    phi[:, flip] *= -1.0
    return SqrtKernelOp(grid, eigvals, phi)


def apply_sqrt(op: SqrtKernelOp, f: GridFunction) -> GridFunction:
    """Apply the square-root integral operator to one function."""
    if f.grid != op.grid:
        raise GridMismatchError("function grid does not match operator grid")
    return GridFunction(op.grid, apply_sqrt_values(op, f.values))


def apply_sqrt_values(op: SqrtKernelOp, values: np.ndarray) -> np.ndarray:
    """Vectorized apply_sqrt on raw value stacks of shape (..., T)."""
    if op.num_modes == 0:
        return np.zeros_like(values)
    coef = (values * op.grid.weights) @ op.eigenfunctions
    return (coef * np.sqrt(op.eigenvalues)) @ op.eigenfunctions.T
