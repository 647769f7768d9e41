"""Dense linear-algebra kernels.

SVD, Moore-Penrose pseudoinverse, spectral summaries and minimum-norm least
squares. These back every closed-form oracle and diagnostic constant in the
package. All functions are pure; matrices are validated and frozen on entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative cutoff below which singular values are treated as zero.
# Matches the double-precision SVD noise floor at the matrix sizes used here.
DEFAULT_TOL = 1e-10


class NumericsError(Exception):
    """Raised when a factorization fails to converge."""


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Validate and return a read-only float64 2-D array in row-major order.

    Parameters
    ----------
    values : array_like
        Rectangular data interpretable as a 2-D array.
    name : str
        Label used in error messages.
    """
    m = np.array(values, dtype=np.float64, order="C")
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={m.ndim}")
    if m.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class SpectralSummary:
    """Singular-value summary of a matrix.

    sigma_star is the smallest singular value strictly above the cutoff
    tolerance*sigma_max; it is None for a rank-0 matrix, where the quantity
    is undefined.
    """

    sigma_max: float
    sigma_min: float
    sigma_star: float | None
    rank: int
    tolerance: float


def svd(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin singular value decomposition M = U diag(sigmas) V^T.

    Returns
    -------
    (U, sigmas, V) : U and V with orthonormal columns, sigmas nonincreasing.

    Raises
    ------
    NumericsError
        If the iterative factorization does not converge.
    """
    m = as_matrix(m)
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"SVD did not converge: {exc}") from exc
    return u, s, vt.T


def pseudoinverse(m, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse with a relative singular-value cutoff.

    Singular values below tol*sigma_max are treated as exact zeros.
    """
    m = as_matrix(m)
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    u, s, v = svd(m)
    cutoff = tol * s[0]
    keep = s > cutoff
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (v * inv_s) @ u.T


def spectral_summary(m, tol: float = DEFAULT_TOL) -> SpectralSummary:
    """Compute sigma_max, sigma_min, sigma_star and rank of a matrix."""
    m = as_matrix(m)
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    _, s, _ = svd(m)
    sigma_max = float(s[0])
    sigma_min = float(s[-1])
    rank = int(np.count_nonzero(s > tol * sigma_max))
    sigma_star = float(s[rank - 1]) if rank > 0 else None
    return SpectralSummary(
        sigma_max=sigma_max,
        sigma_min=sigma_min,
        sigma_star=sigma_star,
        rank=rank,
        tolerance=tol,
    )


def min_norm_least_squares(x, y) -> np.ndarray:
    """Minimum-Frobenius-norm minimizer of 0.5*||Y - XW||^2, i.e. X^+ Y.

    Y may be a vector or a matrix; the result matches its dimensionality.
    One iterative-refinement step sharpens the residual on ill-conditioned
    consistent systems; it leaves inconsistent systems unchanged to rounding
    and preserves the row-space (minimum-norm) property.
    """
    x = as_matrix(x)
    y_arr = np.asarray(y, dtype=np.float64)
    if y_arr.ndim not in (1, 2):
        raise ValueError(f"y must be 1-D or 2-D, got ndim={y_arr.ndim}")
    if y_arr.shape[0] != x.shape[0]:
        raise ValueError(
            f"row mismatch: X has {x.shape[0]} rows, Y has {y_arr.shape[0]}"
        )
    pinv = pseudoinverse(x)
    w = pinv @ y_arr
    return w + pinv @ (y_arr - x @ w)
