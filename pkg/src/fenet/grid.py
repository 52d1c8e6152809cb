"""Functions on a uniform grid over [0, 1] and trapezoid quadrature.

Every curve in a model lives on one shared grid; cross-grid operations raise
GridMismatchError instead of resampling silently.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError

DEFAULT_NUM_POINTS = 201


@dataclass(frozen=True)
class Grid:
    """Uniform grid t_m = m/(T-1), m = 0..T-1, with trapezoid weights.

    The weights are (h/2, h, ..., h, h/2) with h = 1/(T-1); they sum to 1
    exactly (up to float rounding below 1e-14).
    """

    num_points: int
    points: np.ndarray = field(repr=False, compare=False)
    weights: np.ndarray = field(repr=False, compare=False)

    def __eq__(self, other):
        return isinstance(other, Grid) and self.num_points == other.num_points

    def __hash__(self):
        return hash(("Grid", self.num_points))


def make_grid(num_points: int = DEFAULT_NUM_POINTS) -> Grid:
    """Build the uniform trapezoid grid with `num_points` points."""
    if num_points < 2:
        raise ValueError(f"grid needs at least 2 points, got {num_points}")
    h = 1.0 / (num_points - 1)
    points = np.arange(num_points) * h
    weights = np.full(num_points, h)
    weights[0] = h / 2.0
    weights[-1] = h / 2.0
    points.setflags(write=False)
    weights.setflags(write=False)
    return Grid(num_points, points, weights)


@dataclass(frozen=True)
class GridFunction:
    """A real function on [0, 1] represented by its values on a Grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.num_points,):
            raise ValueError(
                f"values shape {values.shape} does not match grid with "
                f"{self.grid.num_points} points"
            )
        object.__setattr__(self, "values", values)


def _check_same_grid(f: GridFunction, g: GridFunction) -> None:
    if f.grid != g.grid:
        raise GridMismatchError(
            f"functions live on different grids "
            f"({f.grid.num_points} vs {g.grid.num_points} points)"
        )


def inner(f: GridFunction, g: GridFunction) -> float:
    """Quadrature inner product of two functions on the same grid."""
    _check_same_grid(f, g)
    return float(np.dot(f.grid.weights * f.values, g.values))


def norm2(f: GridFunction) -> float:
    """Quadrature norm sqrt(<f, f>)."""
    return float(np.sqrt(max(np.dot(f.grid.weights * f.values, f.values), 0.0)))


def norms_rows(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Quadrature norms along the last axis of a stack of curve values."""
    sq = np.einsum("...t,t,...t->...", values, grid.weights, values)
    return np.sqrt(np.maximum(sq, 0.0))
