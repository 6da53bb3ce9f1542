"""SDE problem definitions on matrix Lie groups.

A :class:`LieSDEModel` supplies the group-level coefficients ``K(t, Q)`` and
``V(t, Q)`` of

    dQ = Q K dt + Q V dW        (side="left")
    dQ = K Q dt + V Q dW        (side="right")

:func:`algebra_coefficients` turns them into the drift ``A(Omega)`` and
diffusion ``Gamma(Omega)`` of the Lie-algebra SDE solved inside one step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import cos, sin
from typing import Callable

import numpy as np

from .lie import (
    GroupDescriptor,
    Parametrization,
    c_coeff_cayley,
    c_coeff_exp,
    d2psi_inv_dir,
    dpsi_inv,
    dpsi_inv_dir,
    drift_from_diffusion,
    psi_apply,
    son_generators,
)

__all__ = [
    "AlgebraCoefficients",
    "InvalidInertia",
    "InvalidInitial",
    "LieSDEModel",
    "algebra_coefficients",
    "make_rigid_body_model",
    "make_so2_corr_model",
    "make_so3_test_model",
    "make_zero_model",
    "rigid_body_V",
]

Provider = Callable[[float, np.ndarray], np.ndarray]

# time step for central differences when a model has no analytic d/dt
_FD_DT = 1e-5


class InvalidInertia(ValueError):
    pass


class InvalidInitial(ValueError):
    pass


@dataclass(frozen=True)
class LieSDEModel:
    """Coefficient provider for a linear or nonlinear SDE on a matrix group.

    ``K`` and ``V`` take ``(t, Q)`` where ``Q`` may be a stack of states and
    return one matrix or a matching stack. ``state_dependent`` tells the
    integrators whether the coefficients look at ``Q`` at all.
    ``dK_dt``/``dV_dt`` are optional exact time derivatives for
    state-independent models.
    """

    dim: int
    side: str
    K: Provider
    V: Provider
    group: GroupDescriptor
    label: str = ""
    state_dependent: bool = False
    dK_dt: Callable[[float], np.ndarray] | None = None
    dV_dt: Callable[[float], np.ndarray] | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")

    def time_derivatives(self, t: float, Q) -> tuple[np.ndarray, np.ndarray]:
        """``(dK/dt, dV/dt)`` at fixed state, exact when the model provides it."""
        if self.dK_dt is not None and self.dV_dt is not None:
            return self.dK_dt(t), self.dV_dt(t)
        h = _FD_DT * max(1.0, abs(t))
        dK = (self.K(t + h, Q) - self.K(t - h, Q)) / (2 * h)
        dV = (self.V(t + h, Q) - self.V(t - h, Q)) / (2 * h)
        return dK, dV


def make_zero_model(n: int = 3, side: str = "left") -> LieSDEModel:
    zero = np.zeros((n, n))
    return LieSDEModel(
        dim=n,
        side=side,
        K=lambda t, Q: zero,
        V=lambda t, Q: zero,
        group=GroupDescriptor("SOn", n),
        label="zero",
        dK_dt=lambda t: zero,
        dV_dt=lambda t: zero,
    )


def make_so3_test_model() -> LieSDEModel:
    """Time-dependent SO(3) benchmark.

    ``V_t = cos(t) G1 + sin(t) G2 + (1 + t + t^2 + t^3) G3`` and ``K_t`` is the
    lower-triangular solution of ``K + K^T = V^2``.
    """
    G1, G2, G3 = son_generators(3)

    def V(t, Q=None):
        return cos(t) * G1 + sin(t) * G2 + (1 + t + t * t + t**3) * G3

    def dV(t):
        return -sin(t) * G1 + cos(t) * G2 + (1 + 2 * t + 3 * t * t) * G3

    def K(t, Q=None):
        return drift_from_diffusion(V(t))

    def dK(t):
        v, dv = V(t), dV(t)
        d = dv @ v + v @ dv  # d(V^2)/dt; the lower-triangle map is linear
        return np.tril(d, -1) + 0.5 * np.diag(np.diag(d))

    return LieSDEModel(
        dim=3,
        side="left",
        K=K,
        V=V,
        group=GroupDescriptor("SOn", 3),
        label="so3-test",
        dK_dt=dK,
        dV_dt=dV,
    )


def make_so2_corr_model(c: float) -> LieSDEModel:
    """SO(2) rotation driven by constant noise ``V = c J``."""
    (J,) = son_generators(2)
    V = c * J
    K = drift_from_diffusion(V)
    zero = np.zeros((2, 2))
    return LieSDEModel(
        dim=2,
        side="left",
        K=lambda t, Q=None: K,
        V=lambda t, Q=None: V,
        group=GroupDescriptor("SOn", 2),
        label="so2-corr",
        dK_dt=lambda t: zero,
        dV_dt=lambda t: zero,
        params={"c": c},
    )


def rigid_body_V(y, inertia) -> np.ndarray:
    """Skew matrix of the free rigid body, ``dy/dt = V(y) y``.

    ``y`` may be a stack of 3-vectors, giving a stack of matrices.
    """
    I1, I2, I3 = (float(v) for v in inertia)
    if min(I1, I2, I3) <= 0:
        raise InvalidInertia("moments of inertia must be positive")
    y = np.asarray(y, dtype=float)
    a, b, c = y[..., 0] / I1, y[..., 1] / I2, y[..., 2] / I3
    z = np.zeros_like(a)
    return np.stack(
        [
            np.stack([z, c, -b], axis=-1),
            np.stack([-c, z, a], axis=-1),
            np.stack([b, -a, z], axis=-1),
        ],
        axis=-2,
    )


RIGID_BODY_Y0 = (sin(1.1), 0.0, cos(1.1))
RIGID_BODY_INERTIA = (2.0, 1.0, 2.0 / 3.0)


def make_rigid_body_model(inertia=RIGID_BODY_INERTIA, y0=RIGID_BODY_Y0) -> LieSDEModel:
    """Stochastic free rigid body ``dQ = K(Q) Q dt + V(Q) Q dW`` on SO(3).

    The angular momentum is carried as ``y = Q y0`` and stays on the unit
    sphere for exact solutions.
    """
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (3,) or abs(np.linalg.norm(y0) - 1.0) > 1e-12:
        raise InvalidInitial("y0 must be a unit 3-vector")
    rigid_body_V(y0, inertia)  # validates inertia

    def V(t, Q):
        return rigid_body_V(np.asarray(Q) @ y0, inertia)

    def K(t, Q):
        return drift_from_diffusion(V(t, Q))

    return LieSDEModel(
        dim=3,
        side="right",
        K=K,
        V=V,
        group=GroupDescriptor("UnitSphereCarrier", 3, tuple(y0)),
        label="rigid-body",
        state_dependent=True,
        params={"inertia": tuple(float(v) for v in inertia), "y0": tuple(y0)},
    )


class AlgebraCoefficients:
    """Drift ``A`` and diffusion ``Gamma`` of the algebra SDE for one step.

    Parameters
    ----------
    model, param
        Problem and local parametrization.
    t, Q
        Step start time and state (``Q`` may be a stack of paths).
    stage_times
        If False every evaluation uses the step start ``t``; otherwise an
        evaluation at time offset ``tau`` uses ``t + tau``.
    ito_correction
        Include the ``-C(Omega)/2`` term in the drift. It vanishes at
        ``Omega = 0`` but not its derivatives.
    """

    def __init__(
        self,
        model: LieSDEModel,
        param: Parametrization,
        t: float,
        Q,
        stage_times: bool = True,
        ito_correction: bool = True,
    ):
        self.model = model
        self.param = param
        self.t = float(t)
        self.Q = np.asarray(Q, dtype=float)
        self.stage_times = stage_times
        self.ito_correction = ito_correction
        # right multiplication flips the sign of the differential's index
        self.sign = 1.0 if model.side == "left" else -1.0
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def _state(self, Omega):
        g = psi_apply(self.param, Omega)
        return self.Q @ g if self.model.side == "left" else g @ self.Q

    def coefficients_at(self, Omega, tau: float = 0.0):
        """Group coefficients ``(K, V)`` at time offset ``tau`` and state ``psi(Omega)``."""
        t = self.t + (tau if self.stage_times else 0.0)
        if self.model.state_dependent:
            Q = self._state(Omega)
            return self.model.K(t, Q), self.model.V(t, Q)
        key = t
        if key not in self._cache:
            self._cache[key] = (
                np.asarray(self.model.K(t, self.Q), float),
                np.asarray(self.model.V(t, self.Q), float),
            )
        return self._cache[key]

    def _correction(self, Omega, V, Gamma):
        if self.param.kind == "cay":
            return c_coeff_cayley(V, Omega)
        s = self.sign
        return s * c_coeff_exp(s * Omega, Gamma)

    def A(self, Omega, tau: float = 0.0) -> np.ndarray:
        K, V = self.coefficients_at(Omega, tau)
        H = K - 0.5 * (V @ V)
        if self.ito_correction:
            Gamma = dpsi_inv(self.param, self.sign * Omega, V)
            H = H - 0.5 * self._correction(Omega, V, Gamma)
        return dpsi_inv(self.param, self.sign * Omega, H)

    def Gamma(self, Omega, tau: float = 0.0) -> np.ndarray:
        _, V = self.coefficients_at(Omega, tau)
        return dpsi_inv(self.param, self.sign * Omega, V)

    # ---- values and derivatives at Omega = 0 for the Ito-Taylor scheme ----

    def taylor_terms(self) -> dict[str, np.ndarray]:
        """All coefficient products the order-1.5 Ito-Taylor step needs at 0.

        Derivatives are directional derivatives in ``Omega``; the composite
        ``(Gamma' Gamma)' Gamma`` is expanded by the product rule.
        """
        if self.model.state_dependent:
            raise NotImplementedError(
                "Ito-Taylor derivatives are only available for state-independent coefficients"
            )
        p, s = self.param, self.sign
        K, V = self.coefficients_at(None, 0.0)
        zero = np.zeros_like(np.broadcast_to(V, np.broadcast_shapes(K.shape, V.shape)))
        B = K - 0.5 * (V @ V)

        def L(H):  # dpsi^{-1} at 0: identity (exp) or halving (cay)
            return dpsi_inv(p, zero, H)

        def D1(H, X):
            return s * dpsi_inv_dir(p, zero, H, X)

        def D2(H, X):
            return d2psi_inv_dir(p, zero, H, X)

        def dC(X):  # first derivative of C at 0 along X (both sides)
            if not self.ito_correction:
                return zero
            if p.kind == "cay":
                return V @ X @ V
            return _ad(V, _ad(X, V)) / 6.0

        def d2C(X):  # second derivative of C at 0 along X twice
            if not self.ito_correction or p.kind == "cay":
                return zero
            G1 = dpsi_inv_dir(p, zero, V, X)
            val = (
                (_ad(G1, _ad(X, V)) + _ad(V, _ad(X, G1))) / 3.0
                + _ad(V, _ad(X, _ad(X, V))) / 12.0
                - _ad(X, _ad(V, _ad(X, V))) / 4.0
            )
            return s * val

        def dA(X):
            return D1(B, X) - 0.5 * L(dC(X))

        def d2A(X):
            return D2(B, X) - s * dpsi_inv_dir(p, zero, dC(X), X) - 0.5 * L(d2C(X))

        def dG(X):
            return D1(V, X)

        A0, G0 = L(B), L(V)
        GpG = dG(G0)
        terms = {
            "A": A0,
            "G": G0,
            "GpG": GpG,
            "ApG": dA(G0),
            "ApA": dA(A0),
            "AppGG": d2A(G0),
            "GpA": dG(A0),
            "GppGG": D2(V, G0),
            "GpG_pG": D2(V, G0) + dG(GpG),
        }
        if self.stage_times:
            dK, dV = self.model.time_derivatives(self.t, self.Q)
            terms["At"] = L(dK - 0.5 * (dV @ V + V @ dV))
            terms["Gt"] = L(dV)
        else:
            terms["At"] = zero
            terms["Gt"] = zero
        return terms


def _ad(X, Y):
    return X @ Y - Y @ X


def algebra_coefficients(
    model: LieSDEModel,
    p: Parametrization,
    t_j: float,
    Q_j,
    stage_times: bool = True,
    ito_correction: bool = True,
) -> AlgebraCoefficients:
    """Build the algebra SDE coefficients anchored at ``(t_j, Q_j)``."""
    return AlgebraCoefficients(model, p, t_j, Q_j, stage_times, ito_correction)
