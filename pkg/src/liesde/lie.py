"""Local parametrizations of matrix Lie groups and their differentials.

Two maps from the Lie algebra to the group are supported, the matrix
exponential and the Cayley transform. For each the module provides the map
itself, the inverse of its right-trivialized differential ``dpsi_{-Omega}^{-1}``
and the first two directional derivatives of that inverse with respect to
``Omega``. The exponential versions work on the Bernoulli series truncated
after ``q`` terms.

All operators broadcast over leading stack axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial, pi

import numpy as np

from .matops import (
    DimensionMismatch,
    as_square,
    frobenius_norm,
    identity_like,
    mat_exp,
    mat_inverse,
)

__all__ = [
    "BERNOULLI",
    "DomainError",
    "GroupDescriptor",
    "NotSkew",
    "Parametrization",
    "c_coeff_cayley",
    "c_coeff_exp",
    "d2cayinv_dir",
    "d2dexpinv_dir",
    "d2psi_inv_dir",
    "dcay",
    "dcay_inv",
    "ddcayinv_dir",
    "ddexpinv_dir",
    "dexp_inv_trunc",
    "dexp_trunc",
    "dpsi_inv",
    "dpsi_inv_dir",
    "drift_from_diffusion",
    "psi_apply",
    "son_generators",
]

# B_0 .. B_8 with the B_1 = -1/2 convention
BERNOULLI = (
    Fraction(1),
    Fraction(-1, 2),
    Fraction(1, 6),
    Fraction(0),
    Fraction(-1, 30),
    Fraction(0),
    Fraction(1, 42),
    Fraction(0),
    Fraction(-1, 30),
)
MAX_TRUNCATION = len(BERNOULLI) - 1

DRIFT_TOL = 1e-8
SKEW_TOL = 1e-12


class DomainError(ValueError):
    """Argument outside the convergence domain of a series."""


class NotSkew(ValueError):
    """Matrix expected to be skew-symmetric is not."""


@dataclass(frozen=True)
class Parametrization:
    """Choice of local map ``psi`` from the algebra to the group.

    ``kind`` is ``"exp"`` or ``"cay"``. ``q`` is the truncation index of the
    inverse-differential series and is only used for ``"exp"``.
    """

    kind: str = "cay"
    q: int = 1

    def __post_init__(self):
        if self.kind not in ("exp", "cay"):
            raise ValueError(f"unknown parametrization {self.kind!r}")
        if not 0 <= self.q <= MAX_TRUNCATION:
            raise ValueError(f"truncation q must lie in [0, {MAX_TRUNCATION}]")

    @classmethod
    def exponential(cls, q: int = 1) -> "Parametrization":
        return cls("exp", q)

    @classmethod
    def cayley(cls) -> "Parametrization":
        return cls("cay", 0)

    @property
    def label(self) -> str:
        return f"exp(q={self.q})" if self.kind == "exp" else "cay"


@dataclass(frozen=True)
class GroupDescriptor:
    """Group in which a model's solution lives, with a membership test.

    For ``"UnitSphereCarrier"`` the distance is measured on the carrier
    vector ``Q @ y0`` instead of on ``Q`` itself.
    """

    name: str = "SOn"
    dim: int = 3
    y0: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.name not in ("SOn", "UnitSphereCarrier"):
            raise ValueError(f"unknown group {self.name!r}")
        if self.name == "UnitSphereCarrier" and self.y0 is None:
            raise ValueError("UnitSphereCarrier needs the carrier vector y0")

    def distance(self, Q) -> np.ndarray | float:
        Q = np.asarray(Q, dtype=float)
        if self.name == "SOn":
            QtQ = np.swapaxes(Q, -1, -2) @ Q
            return frobenius_norm(QtQ - identity_like(QtQ))
        y = Q @ np.asarray(self.y0, dtype=float)
        out = np.abs(np.linalg.norm(y, axis=-1) - 1.0)
        return float(out) if out.ndim == 0 else out

    def contains(self, Q, tol: float = DRIFT_TOL) -> bool:
        Q = np.asarray(Q, dtype=float)
        ok = np.all(np.asarray(self.distance(Q)) <= tol)
        if self.name == "SOn":
            ok = ok and bool(np.all(np.linalg.det(Q) > 0))
        return bool(ok)


def _eye(A):
    return identity_like(np.asarray(A, dtype=float))


def _ad(X, Y):
    return X @ Y - Y @ X


def psi_apply(p: Parametrization, Omega) -> np.ndarray:
    """Map an algebra element to the group: ``exp(Omega)`` or ``cay(Omega)``.

    The exponential is always evaluated in full; ``p.q`` only affects the
    differential.
    """
    Omega = as_square(Omega, "Omega")
    if p.kind == "exp":
        return mat_exp(Omega)
    eye = _eye(Omega)
    return mat_inverse(eye - Omega) @ (eye + Omega)


def _check_q(q: int) -> None:
    if not 0 <= q <= MAX_TRUNCATION:
        raise ValueError(f"truncation q must lie in [0, {MAX_TRUNCATION}]")


def dexp_inv_trunc(Omega, H, q: int) -> np.ndarray:
    """Bernoulli series for ``dexp_{-Omega}^{-1}(H)`` truncated after ``q``.

    Raises
    ------
    DomainError
        If ``||Omega||_F >= pi``, where the series diverges.
    """
    _check_q(q)
    Omega = np.asarray(Omega, dtype=float)
    H = np.asarray(H, dtype=float)
    if Omega.shape[-1] != H.shape[-1]:
        raise DimensionMismatch("Omega and H differ in dimension")
    if np.any(np.asarray(frobenius_norm(Omega)) >= pi):
        raise DomainError("dexp inverse series needs ||Omega|| < pi")
    out = H.copy()
    term = H
    for k in range(1, q + 1):
        term = _ad(-Omega, term)
        if BERNOULLI[k]:
            out = out + float(BERNOULLI[k]) / factorial(k) * term
    return out


def dexp_trunc(Omega, H, q: int) -> np.ndarray:
    """Forward series ``sum_{k<=q} ad_{-Omega}^k(H) / (k+1)!``."""
    Omega = np.asarray(Omega, dtype=float)
    term = np.asarray(H, dtype=float)
    out = term.copy()
    for k in range(1, q + 1):
        term = _ad(-Omega, term)
        out = out + term / factorial(k + 1)
    return out


def dcay_inv(Omega, H) -> np.ndarray:
    """``dcay_{-Omega}^{-1}(H) = (I + Omega) H (I - Omega) / 2``."""
    Omega = np.asarray(Omega, dtype=float)
    H = np.asarray(H, dtype=float)
    if Omega.shape[-1] != H.shape[-1]:
        raise DimensionMismatch("Omega and H differ in dimension")
    eye = _eye(Omega)
    return 0.5 * (eye + Omega) @ H @ (eye - Omega)


def dcay(Omega, H) -> np.ndarray:
    """``dcay_{-Omega}(H) = 2 (I + Omega)^{-1} H (I - Omega)^{-1}``."""
    Omega = np.asarray(Omega, dtype=float)
    eye = _eye(Omega)
    return 2.0 * mat_inverse(eye + Omega) @ np.asarray(H, float) @ mat_inverse(eye - Omega)


def dpsi_inv(p: Parametrization, Omega, H) -> np.ndarray:
    if p.kind == "exp":
        return dexp_inv_trunc(Omega, H, p.q)
    return dcay_inv(Omega, H)


def ddcayinv_dir(Omega, H, Htilde) -> np.ndarray:
    """Derivative of ``dcay_{-Omega}^{-1}(H)`` in ``Omega`` along ``Htilde``."""
    Omega, H, Ht = (np.asarray(a, dtype=float) for a in (Omega, H, Htilde))
    if not Omega.shape[-1] == H.shape[-1] == Ht.shape[-1]:
        raise DimensionMismatch("operands differ in dimension")
    return 0.5 * (-H @ Ht + Ht @ H - Omega @ H @ Ht - Ht @ H @ Omega)


def d2cayinv_dir(H, Htilde) -> np.ndarray:
    """Second derivative of ``dcay_{-Omega}^{-1}(H)`` along ``Htilde`` twice.

    The inverse differential is quadratic in ``Omega``, so this does not
    depend on ``Omega``.
    """
    H, Ht = np.asarray(H, dtype=float), np.asarray(Htilde, dtype=float)
    if H.shape[-1] != Ht.shape[-1]:
        raise DimensionMismatch("operands differ in dimension")
    return -Ht @ H @ Ht


def _ad_word(letters, H):
    # letters[0] is applied last: ad_{l0}(ad_{l1}(... ad_{lk}(H)))
    out = H
    for X in reversed(letters):
        out = X @ out - out @ X
    return out


def ddexpinv_dir(Omega, H, Htilde, q: int = 4) -> np.ndarray:
    """Derivative of the ``q``-truncated ``dexp_{-Omega}^{-1}(H)`` along ``Htilde``.

    The derivative of ``ad_{-Omega}^k`` along ``X`` is the sum of the ``k``
    words in which one ``-Omega`` is replaced by ``-X``.
    """
    _check_q(q)
    Omega, H, Ht = (np.asarray(a, dtype=float) for a in (Omega, H, Htilde))
    if not Omega.shape[-1] == H.shape[-1] == Ht.shape[-1]:
        raise DimensionMismatch("operands differ in dimension")
    out = np.zeros(np.broadcast_shapes(Omega.shape, H.shape, Ht.shape))
    for k in range(1, q + 1):
        if not BERNOULLI[k]:
            continue
        acc = 0.0
        for i in range(k):
            word = [-Omega] * k
            word[i] = -Ht
            acc = acc + _ad_word(word, H)
        out = out + float(BERNOULLI[k]) / factorial(k) * acc
    return out


def d2dexpinv_dir(Omega, H, Htilde, q: int = 4) -> np.ndarray:
    """Second derivative of the ``q``-truncated ``dexp_{-Omega}^{-1}(H)``.

    Twice the sum over the words with two ``-Omega`` letters replaced by
    ``-Htilde``. At ``Omega = 0`` only the ``k = 2`` term survives.
    """
    _check_q(q)
    Omega, H, Ht = (np.asarray(a, dtype=float) for a in (Omega, H, Htilde))
    if not Omega.shape[-1] == H.shape[-1] == Ht.shape[-1]:
        raise DimensionMismatch("operands differ in dimension")
    out = np.zeros(np.broadcast_shapes(Omega.shape, H.shape, Ht.shape))
    for k in range(2, q + 1):
        if not BERNOULLI[k]:
            continue
        acc = 0.0
        for i in range(k):
            for j in range(i + 1, k):
                word = [-Omega] * k
                word[i] = word[j] = -Ht
                acc = acc + _ad_word(word, H)
        out = out + 2.0 * float(BERNOULLI[k]) / factorial(k) * acc
    return out


def dpsi_inv_dir(p: Parametrization, Omega, H, Htilde) -> np.ndarray:
    """First directional derivative of ``dpsi_{-Omega}^{-1}(H)``."""
    if p.kind == "exp":
        return ddexpinv_dir(Omega, H, Htilde, p.q)
    return ddcayinv_dir(Omega, H, Htilde)


def d2psi_inv_dir(p: Parametrization, Omega, H, Htilde) -> np.ndarray:
    """Second directional derivative of ``dpsi_{-Omega}^{-1}(H)``."""
    if p.kind == "exp":
        return d2dexpinv_dir(Omega, H, Htilde, p.q)
    return d2cayinv_dir(H, Htilde) + 0.0 * np.asarray(Omega, dtype=float)


def c_coeff_cayley(V, Omega) -> np.ndarray:
    """Ito correction ``V Omega V`` of the Cayley-parametrized algebra SDE."""
    V, Omega = np.asarray(V, dtype=float), np.asarray(Omega, dtype=float)
    if V.shape[-1] != Omega.shape[-1]:
        raise DimensionMismatch("V and Omega differ in dimension")
    return V @ Omega @ V


def c_coeff_exp(Omega, Gamma, order: int = 2) -> np.ndarray:
    """Double series for the Ito correction under the exponential map.

    Keeps the terms with ``p + q <= order`` of
    ``sum 1/(p+q+2) (-1)^p / (p! (q+1)!) ad_Omega^p ad_Gamma ad_Omega^q Gamma``.
    The neglected remainder is ``O(||Omega||^(order+1))``.
    """
    Omega, Gamma = np.asarray(Omega, dtype=float), np.asarray(Gamma, dtype=float)
    if Omega.shape[-1] != Gamma.shape[-1]:
        raise DimensionMismatch("Omega and Gamma differ in dimension")
    out = np.zeros(np.broadcast_shapes(Omega.shape, Gamma.shape))
    inner = Gamma
    for qq in range(order + 1):
        middle = _ad(Gamma, inner)
        outer = middle
        for pp in range(order - qq + 1):
            coef = (-1) ** pp / ((pp + qq + 2) * factorial(pp) * factorial(qq + 1))
            out = out + coef * outer
            outer = _ad(Omega, outer)
        inner = _ad(Omega, inner)
    return out


def son_generators(n: int) -> list[np.ndarray]:
    """Basis ``E_ji - E_ij`` (i < j) of the skew-symmetric n x n matrices.

    For ``n = 3`` the order is the (0,1), (0,2), (1,2) planes, i.e. rotation
    generators with a ``+1`` below the diagonal.
    """
    if n < 2:
        raise ValueError("so(n) needs n >= 2")
    gens = []
    for i in range(n):
        for j in range(i + 1, n):
            G = np.zeros((n, n))
            G[j, i] = 1.0
            G[i, j] = -1.0
            gens.append(G)
    return gens


def drift_from_diffusion(V) -> np.ndarray:
    """Drift ``K`` with ``K + K^T = V^2``: strict lower triangle of ``V^2``
    plus half its diagonal.

    Raises
    ------
    NotSkew
        If ``V`` is not skew-symmetric to ``1e-12 (1 + ||V||_F)``.
    """
    V = as_square(V, "V")
    skew_err = np.asarray(frobenius_norm(V + np.swapaxes(V, -1, -2)))
    if np.any(skew_err > SKEW_TOL * (1.0 + np.asarray(frobenius_norm(V)))):
        raise NotSkew("diffusion matrix is not skew-symmetric")
    V2 = V @ V
    diag = np.diagonal(V2, axis1=-2, axis2=-1)
    return np.tril(V2, -1) + 0.5 * diag[..., None] * np.eye(V.shape[-1])
