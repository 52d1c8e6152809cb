"""File formats: long-form CSV for curves, JSON for fits and metadata.

Curve files use the header `sample,predictor,grid_index,value` with 0-based
indices; responses use `sample,response`.  Floats are written with repr
(shortest round-trip), so a write/read cycle is lossless and output bytes
are deterministic.
"""

import csv
import json
import os

import numpy as np

from .design import Dataset
from .errors import DataError
from .grid import Grid, make_grid

CURVE_HEADER = ["sample", "predictor", "grid_index", "value"]
RESPONSE_HEADER = ["sample", "response"]
BETA_HEADER = ["predictor", "grid_index", "t", "value"]
PREDICTION_HEADER = ["sample", "prediction"]
ROC_HEADER = ["lambda", "fpr", "tpr"]


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _check_header(path, got, expected):
    if got != expected:
        missing = [c for c in expected if c not in (got or [])]
        raise DataError(
            f"{path}: line 1: expected columns {','.join(expected)}, got "
            f"{','.join(got or ['<empty>'])}"
            + (f" (missing {','.join(missing)})" if missing else "")
        )


def write_curves(path: str, curves: np.ndarray) -> None:
    """Write an (n, p, T) curve array in long form."""
    n, p, t = curves.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_HEADER)
        for i in range(n):
            for j in range(p):
                row_vals = curves[i, j]
                for m in range(t):
                    writer.writerow([i, j, m, repr(float(row_vals[m]))])


def read_curves(path: str, grid: Grid) -> np.ndarray:
    """Read a long-form curve file onto the declared grid."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(path, header, CURVE_HEADER)
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                records.append((int(row[0]), int(row[1]), int(row[2]), float(row[3])))
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}: line {lineno}: bad row {row!r}") from exc
    if not records:
        raise DataError(f"{path}: no curve records")
    arr = np.array(records)
    n = int(arr[:, 0].max()) + 1
    p = int(arr[:, 1].max()) + 1
    t = grid.num_points
    if int(arr[:, 2].max()) + 1 != t:
        raise DataError(
            f"{path}: grid_index runs to {int(arr[:, 2].max())}, but the "
            f"declared grid has {t} points"
        )
    if len(records) != n * p * t:
        raise DataError(
            f"{path}: expected {n * p * t} rows for n={n}, p={p}, T={t}; "
            f"got {len(records)}"
        )
    curves = np.zeros((n, p, t))
    curves[arr[:, 0].astype(int), arr[:, 1].astype(int), arr[:, 2].astype(int)] = arr[:, 3]
    return curves


def write_responses(path: str, responses: np.ndarray) -> None:
    write_csv(path, RESPONSE_HEADER, list(enumerate(np.asarray(responses, float))))


def read_responses(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(path, header, RESPONSE_HEADER)
        values = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                values[int(row[0])] = float(row[1])
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}: line {lineno}: bad row {row!r}") from exc
    if not values:
        raise DataError(f"{path}: no responses")
    out = np.zeros(max(values) + 1)
    for i, v in values.items():
        out[i] = v
    return out


def write_dataset(outdir: str, data: Dataset, prefix: str = "train") -> None:
    os.makedirs(outdir, exist_ok=True)
    write_curves(os.path.join(outdir, f"{prefix}_curves.csv"), data.curves)
    write_responses(os.path.join(outdir, f"{prefix}_responses.csv"), data.responses)


def read_dataset(outdir: str, grid: Grid, prefix: str = "train") -> Dataset:
    curves = read_curves(os.path.join(outdir, f"{prefix}_curves.csv"), grid)
    responses = read_responses(os.path.join(outdir, f"{prefix}_responses.csv"))
    if responses.shape[0] != curves.shape[0]:
        raise DataError(
            f"{prefix}: {curves.shape[0]} samples in curves but "
            f"{responses.shape[0]} responses"
        )
    return Dataset(grid=grid, curves=curves, responses=responses)


def write_truth(path: str, truth, cfg_dict: dict) -> None:
    payload = {
        "signal_set": [int(j) for j in truth.signal_set],
        "signs": truth.signs.tolist(),
        "beta_coefs": truth.beta_coefs.tolist(),
        "basis": truth.basis,
        "nu": truth.nu.tolist(),
        "rho": truth.rho,
        "sigma": truth.sigma,
        "k_max": truth.k_max,
        "p": truth.p,
        "config": cfg_dict,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_truth(path: str):
    from .simulate import Truth, _basis_matrix

    with open(path) as fh:
        data = json.load(fh)
    grid = make_grid(data["config"]["num_grid_points"])
    beta_coefs = np.array(data["beta_coefs"], dtype=float)
    basis = _basis_matrix(data["basis"], data["k_max"], grid)
    beta_curves = np.zeros((data["p"], grid.num_points))
    beta_curves[np.array(data["signal_set"], dtype=int)] = beta_coefs @ basis
    return Truth(
        signal_set=np.array(data["signal_set"], dtype=int),
        beta_curves=beta_curves,
        beta_coefs=beta_coefs,
        signs=np.array(data["signs"], dtype=int),
        basis=data["basis"],
        nu=np.array(data["nu"], dtype=float),
        rho=float(data["rho"]),
        sigma=float(data["sigma"]),
        k_max=int(data["k_max"]),
        p=int(data["p"]),
    ), grid


def write_beta_curves(path: str, curves: np.ndarray, grid: Grid) -> None:
    rows = []
    for j in range(curves.shape[0]):
        for m in range(grid.num_points):
            rows.append([j, m, repr(float(grid.points[m])), repr(float(curves[j, m]))])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BETA_HEADER)
        writer.writerows(rows)


def write_fit_json(path: str, fit, design, extra: dict | None = None) -> None:
    """Persist a fit with everything prediction needs (means + curves)."""
    payload = {
        "selected": [int(j) for j in fit.selected],
        "block_norms": [float(v) for v in fit.block_norms],
        "objective_trace": [float(v) for v in fit.objective_trace],
        "sweeps": int(fit.sweeps),
        "converged": bool(fit.converged),
        "kkt_max": float(fit.kkt_max),
        "hp": {
            "lam": fit.hp.lam, "alpha": fit.hp.alpha, "s": fit.hp.s,
            "theta": fit.hp.theta, "lam3": fit.hp.lam3, "psi": fit.hp.psi,
        },
        "n": int(fit.n),
        "num_grid_points": design.grid.num_points,
        "y_mean": float(design.y_mean),
        "x_means": np.asarray(design.x_means).tolist(),
        "curves": fit.curves.tolist(),
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_fit_json(path: str) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    for key in ("curves", "x_means"):
        data[key] = np.array(data[key], dtype=float)
    data["selected"] = np.array(data["selected"], dtype=int)
    return data


def predict_from_fit(fit_data: dict, curves: np.ndarray, grid: Grid) -> np.ndarray:
    """Apply stored centering means and coefficient curves to new curves."""
    if curves.shape[2] != grid.num_points:
        raise DataError("prediction curves are on a different grid")
    if curves.shape[1] != fit_data["x_means"].shape[0]:
        raise DataError(
            f"fit has {fit_data['x_means'].shape[0]} predictors, data has "
            f"{curves.shape[1]}"
        )
    centered = curves - fit_data["x_means"][None, :, :]
    pred = np.einsum("ijt,t,jt->i", centered, grid.weights, fit_data["curves"])
    return pred + fit_data["y_mean"]


def read_kernel_matrix(path: str) -> np.ndarray:
    """Read a T x T custom kernel matrix from a headerless CSV."""
    try:
        matrix = np.loadtxt(path, delimiter=",")
    except ValueError as exc:
        raise DataError(f"{path}: not a numeric CSV matrix: {exc}") from exc
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DataError(f"{path}: kernel matrix must be square, got {matrix.shape}")
    return matrix
