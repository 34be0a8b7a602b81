"""Dense real/complex kernels: LU solves, matrix exponential, abscissa bound.

Matrices here are small (a few hundred states at most), so everything is
plain dense numpy.  Inverses appearing in the analytic formulas are always
realised as solves against the factor that is actually needed.
"""

import math
import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, lapack, lu_factor, lu_solve

__all__ = [
    "SingularMatrixError",
    "solve",
    "solve_left",
    "expm",
    "spectral_abscissa_bound",
]

# Systems whose reciprocal 1-norm condition estimate falls below this are
# treated as singular to working precision.
RCOND_FLOOR = 1e3 * np.finfo(float).eps

# Higham (2005) degree-13 Pade coefficients and the scaling threshold.
_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a matrix is singular to working precision.

    ``rcond`` carries the reciprocal condition estimate (0 for an exact zero
    pivot).
    """

    def __init__(self, message, rcond):
        super().__init__(f"{message} (rcond estimate {rcond:.3e})")
        self.rcond = rcond


def _check_finite(a, what):
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains non-finite entries")


def _rcond(a, lu):
    anorm = np.linalg.norm(a, 1)
    if anorm == 0.0:
        return 0.0
    gecon = lapack.get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0:
        return 0.0
    return float(rcond)


def solve(a, b):
    """Solve ``a @ x = b`` by LU with partial pivoting.

    Parameters
    ----------
    a : (n, n) array_like, real or complex
    b : (n,) or (n, k) array_like

    Raises
    ------
    SingularMatrixError
        If ``a`` is singular to working precision.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, matrix has {a.shape[0]}")
    if a.shape[0] == 0:
        dtype = np.result_type(a, b, float)
        return np.zeros(b.shape, dtype=dtype)
    _check_finite(a, "matrix")
    _check_finite(b, "right-hand side")
    if np.iscomplexobj(b) and not np.iscomplexobj(a):
        a = a.astype(complex)
    lu, piv = _factor(a)
    rcond = _rcond(a, lu)
    if rcond < RCOND_FLOOR:
        raise SingularMatrixError("matrix is singular to working precision", rcond)
    if np.iscomplexobj(lu) and not np.iscomplexobj(b):
        b = b.astype(complex)
    return lu_solve((lu, piv), b, check_finite=False)


def _factor(a):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", LinAlgWarning)
            return lu_factor(a, check_finite=False)
    except LinAlgWarning as exc:  # exact zero pivot
        raise SingularMatrixError(str(exc), 0.0) from None


def solve_left(b, a):
    """Return ``b @ inv(a)`` for a row vector or matrix ``b``."""
    a = np.asarray(a)
    b = np.asarray(b)
    return solve(a.T, b.T).T


def expm(a):
    """Matrix exponential by scaling and squaring with a degree-13 Pade
    approximant (fixed degree, no adaptive degree selection)."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    _check_finite(a, "matrix")
    dtype = np.result_type(a, float)
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=dtype)
    a = a.astype(dtype, copy=False)
    norm = np.linalg.norm(a, 1)
    if norm == 0.0:
        return np.eye(n, dtype=dtype)
    squarings = 0
    if norm > _THETA13:
        squarings = int(math.ceil(math.log2(norm / _THETA13)))
        a = a / 2.0**squarings
    b = _PADE13
    ident = np.eye(n, dtype=dtype)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(squarings):
        r = r @ r
    return r


def spectral_abscissa_bound(a):
    """Largest real part of the eigenvalues of ``a``.

    Falls back to the Gershgorin bound ``max_i (a_ii + sum_j!=i |a_ij|)``
    when the eigenvalue solver fails; the bound is then an upper bound, not
    the abscissa itself.
    """
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return -math.inf
    try:
        return float(np.max(np.linalg.eigvals(a).real))
    except np.linalg.LinAlgError:
        radius = np.sum(np.abs(a), axis=1) - np.abs(np.diag(a))
        return float(np.max(np.diag(a) + radius))
