"""Dense real square-matrix kernel.

Every function accepts a single ``(n, n)`` array or a stack ``(..., n, n)``
and broadcasts over the leading axes, so one call can advance a whole batch
of Monte Carlo paths.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "DimensionMismatch",
    "SingularMatrix",
    "adjoint_power",
    "as_square",
    "commutator",
    "frobenius_norm",
    "identity_like",
    "mat_exp",
    "mat_inverse",
]

# relative accuracy targets
TOL_EXP = 1e-13
TOL_INV = 1e-10

_PIVOT_RTOL = 1e-12
# Taylor degree for the scaled exponential; with norm <= 1/2 the truncation
# error is below 0.5**19 / 19! ~ 1e-23.
_EXP_DEGREE = 18
_EXP_THETA = 0.5


class DimensionMismatch(ValueError):
    """Operands do not have compatible square shapes."""


class SingularMatrix(ArithmeticError):
    """A pivot vanished during elimination."""


def as_square(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a float array of shape ``(..., n, n)`` with finite entries."""
    A = np.asarray(M, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2] or A.shape[-1] < 1:
        raise DimensionMismatch(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def _check_pair(A: np.ndarray, B: np.ndarray) -> None:
    if A.shape[-1] != B.shape[-1]:
        raise DimensionMismatch(f"dimension {A.shape[-1]} vs {B.shape[-1]}")


def identity_like(A: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.eye(A.shape[-1]), A.shape).copy()


def frobenius_norm(M) -> np.ndarray | float:
    """Square root of the sum of squared entries (per matrix for stacks)."""
    A = np.asarray(M, dtype=float)
    out = np.sqrt(np.sum(A * A, axis=(-2, -1)))
    return float(out) if out.ndim == 0 else out


def commutator(A, B) -> np.ndarray:
    """Matrix commutator ``AB - BA``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    _check_pair(A, B)
    return A @ B - B @ A


def adjoint_power(Omega, H, k: int) -> np.ndarray:
    """Apply ``ad_Omega`` ``k`` times to ``H``; ``k = 0`` returns ``H``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    Omega = np.asarray(Omega, dtype=float)
    out = np.asarray(H, dtype=float)
    _check_pair(Omega, out)
    for _ in range(k):
        out = Omega @ out - out @ Omega
    return out


def mat_inverse(M) -> np.ndarray:
    """Invert by Gauss-Jordan elimination with partial pivoting.

    Raises
    ------
    SingularMatrix
        If a pivot falls below ``1e-12`` times the largest entry of the
        input (per matrix in a stack).
    """
    A = as_square(M).copy()
    n = A.shape[-1]
    batch = A.shape[:-2]
    A = A.reshape((-1, n, n))
    inv = np.broadcast_to(np.eye(n), A.shape).copy()
    scale = np.max(np.abs(A), axis=(-2, -1))
    rows = np.arange(A.shape[0])
    for k in range(n):
        p = k + np.argmax(np.abs(A[:, k:, k]), axis=1)
        swap = p != k
        if np.any(swap):
            r, pk = rows[swap], p[swap]
            A[r, k], A[r, pk] = A[r, pk].copy(), A[r, k].copy()
            inv[r, k], inv[r, pk] = inv[r, pk].copy(), inv[r, k].copy()
        piv = A[:, k, k].copy()
        bad = ~(np.abs(piv) > _PIVOT_RTOL * scale)
        if np.any(bad):
            raise SingularMatrix(
                f"pivot {k} below {_PIVOT_RTOL:g} relative to matrix scale"
            )
        A[:, k, :] /= piv[:, None]
        inv[:, k, :] /= piv[:, None]
        f = A[:, :, k].copy()
        f[:, k] = 0.0
        A -= f[:, :, None] * A[:, k, None, :]
        inv -= f[:, :, None] * inv[:, k, None, :]
    return inv.reshape(batch + (n, n))


def mat_exp(M) -> np.ndarray:
    """Matrix exponential by scaling and squaring a fixed-degree Taylor series.

    The matrix is scaled by ``2**-s`` so that its 1-norm is at most 1/2, the
    truncated series is evaluated by Horner's rule and the result is squared
    ``s`` times. Each matrix of a stack gets its own ``s``.
    """
    A = as_square(M)
    norm1 = np.max(np.sum(np.abs(A), axis=-2), axis=-1)
    with np.errstate(divide="ignore"):
        s = np.where(norm1 > _EXP_THETA, np.ceil(np.log2(norm1 / _EXP_THETA)), 0.0)
    s = s.astype(int)
    X = A / (2.0 ** s)[..., None, None]
    eye = identity_like(A)
    E = eye.copy()
    for k in range(_EXP_DEGREE, 0, -1):
        E = eye + (X @ E) / k
    for i in range(int(np.max(s, initial=0))):
        sq = E @ E
        E = np.where((s > i)[..., None, None], sq, E)
    return E
