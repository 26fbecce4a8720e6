"""Small dense solves with an explicit singularity test."""

import warnings
from typing import Iterable, Optional

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from ..core.errors import ParameterError, RankError

PIVOT_TOLERANCE = 1e-12


def solve_left(matrix: np.ndarray, rhs: np.ndarray, indices: Optional[Iterable[int]] = None) -> np.ndarray:
    """Solve x @ matrix = rhs by partial-pivot LU.

    Raises RankError naming `indices` (default: all rows) when a pivot is
    at most PIVOT_TOLERANCE times the largest entry of the matrix.
    """
    matrix = np.asarray(matrix, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = matrix.shape[0]
    labels = tuple(range(n)) if indices is None else tuple(indices)
    if n == 0:
        return np.zeros(0)

    scale = np.abs(matrix).max()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(matrix.T)
    if scale == 0 or np.abs(np.diag(lu)).min() <= PIVOT_TOLERANCE * scale:
        raise RankError(labels)
    return lu_solve((lu, piv), rhs)


def check_system(B, nu) -> tuple[np.ndarray, np.ndarray]:
    """Validate a mean matrix and drift vector; a scalar nu is broadcast."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] == 0:
        raise ParameterError(f"mean matrix must be square and non-empty, got shape {B.shape}")
    if not np.all(np.isfinite(B)) or np.any(B <= 0):
        raise ParameterError("mean matrix entries must be finite and positive")
    try:
        nu = np.broadcast_to(np.asarray(nu, dtype=float), (B.shape[0],)).copy()
    except ValueError:
        raise ParameterError(f"nu must be a scalar or have {B.shape[0]} entries") from None
    if not np.all(np.isfinite(nu)) or np.any(nu <= 0):
        raise ParameterError(f"nu must be finite and positive, got {nu.tolist()}")
    return B, nu
