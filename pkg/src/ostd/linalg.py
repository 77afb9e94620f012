"""SPD solves with a single jitter retry."""

import numpy as np
import scipy.linalg

from .errors import IllConditionedError

JITTER_SCALE = 1e-10


def spd_factor(A: np.ndarray, what: str = "matrix"):
    """Cholesky-factor a symmetric positive-definite matrix.

    On failure the diagonal is bumped once by ``1e-10 * trace / n``; if that
    still fails an :class:`IllConditionedError` carries the condition estimate.
    """
    A = np.asarray(A, dtype=float)
    try:
        return scipy.linalg.cho_factor(A, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        pass
    n = A.shape[0]
    jitter = JITTER_SCALE * max(np.trace(A), np.finfo(float).tiny) / n
    try:
        return scipy.linalg.cho_factor(A + jitter * np.eye(n), lower=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        try:
            cond = float(np.linalg.cond(A))
        except np.linalg.LinAlgError:
            cond = float("inf")
        raise IllConditionedError(f"{what} is not numerically positive definite", cond) from None


def spd_solve(A: np.ndarray, B: np.ndarray, what: str = "matrix") -> np.ndarray:
    return scipy.linalg.cho_solve(spd_factor(A, what), B)


def spd_inverse(A: np.ndarray, what: str = "matrix") -> np.ndarray:
    inv = spd_solve(A, np.eye(A.shape[0]), what)
    return 0.5 * (inv + inv.T)
