"""Structure-preserving steppers for SDEs on matrix Lie groups.

Every geometric step starts from ``Omega_0 = 0`` at the current state,
advances the algebra SDE with one of three one-step methods and maps the
result back with ``psi``:

    Q_{j+1} = Q_j psi(Omega_1)      (left-multiplied models)
    Q_{j+1} = psi(Omega_1) Q_j      (right-multiplied models)

All steppers accept scalar increments or arrays of shape ``(M,)`` and then
advance ``M`` paths at once.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lie import Parametrization, psi_apply
from .matops import SingularMatrix
from .model import AlgebraCoefficients, LieSDEModel, algebra_coefficients

__all__ = [
    "ConfigError",
    "NonFiniteState",
    "NumericalFailure",
    "ROSSLER_SRI",
    "SRITableau",
    "SchemeConfig",
    "Trajectory",
    "ZeroStepSize",
    "manifold_distance",
    "simulate",
    "simulate_path",
    "step_flat_em",
    "step_gem",
    "step_git15",
    "step_gsrk15",
    "write_trajectory_csv",
]

SCHEMES = ("gem", "git15", "gsrk15", "em")
STRONG_ORDER = {"gem": 1.0, "git15": 1.5, "gsrk15": 1.5, "em": 0.5}


class ConfigError(ValueError):
    pass


class ZeroStepSize(ConfigError):
    pass


class NumericalFailure(ArithmeticError):
    """A step produced an unusable state; ``step`` is the failing step index."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


class NonFiniteState(NumericalFailure):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme, parametrization and options for one integrator run.

    ``stage_times`` evaluates time-dependent coefficients at each stage's own
    time and adds the ``d/dt`` terms of the Ito-Taylor expansion; with False
    everything is frozen at the step start. ``ito_correction`` keeps the
    ``-C(Omega)/2`` drift term, which matters through its derivatives.
    """

    scheme: str = "gem"
    param: Parametrization = field(default_factory=Parametrization.cayley)
    stage_times: bool = True
    ito_correction: bool = True
    allow_underresolved: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        self.validate()

    @property
    def strong_order(self) -> float:
        return STRONG_ORDER[self.scheme]

    @property
    def geometric(self) -> bool:
        return self.scheme != "em"

    def validate(self) -> None:
        if self.scheme == "em" or self.param.kind != "exp":
            return
        needed = 2 * self.strong_order - 2
        if self.param.q < needed and not self.allow_underresolved:
            raise ConfigError(
                f"truncation q={self.param.q} is below 2*gamma - 2 = {needed:g} "
                f"for {self.scheme} (strong order {self.strong_order:g}); "
                "the scheme would lose its order. Pass allow_underresolved to run anyway."
            )

    @property
    def label(self) -> str:
        return self.scheme if self.scheme == "em" else f"{self.scheme}/{self.param.label}"


@dataclass(frozen=True)
class SRITableau:
    """Stochastic Runge-Kutta tableau for Ito SDEs with scalar noise.

    ``A0, B0`` build the drift stages, ``A1, B1`` the diffusion stages.
    ``beta`` holds the diffusion weights on ``dW``, ``I11/sqrt(h)``,
    ``I10/h`` and ``I111/h``. Stage time offsets are the row sums of ``A0``
    and ``A1``.
    """

    A0: np.ndarray
    B0: np.ndarray
    A1: np.ndarray
    B1: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    @property
    def c0(self) -> np.ndarray:
        return self.A0.sum(axis=1)

    @property
    def c1(self) -> np.ndarray:
        return self.A1.sum(axis=1)


def _tab(rows, size):
    M = np.zeros((size, size))
    for i, row in enumerate(rows):
        M[i, : len(row)] = row
    return M


# Order 1.5 tableau with three drift and four diffusion stages. The entries
# A1[2, 0] and A1[3, 0] are negative; with positive signs the scheme drops
# to strong order 1.
ROSSLER_SRI = SRITableau(
    A0=_tab([[], [3 / 4], [0, 0]], 3),
    B0=_tab([[], [3 / 2], [0, 0]], 3),
    A1=_tab([[], [1 / 9], [-5 / 9, 1 / 3], [-1, 1 / 3, 1]], 4)[:, :3],
    B1=_tab([[], [1 / 3], [-1 / 3, 1], [1, -1, 1]], 4),
    alpha=np.array([1 / 3, 2 / 3, 0.0]),
    beta=np.array(
        [
            [13 / 4, -9 / 4, -9 / 4, 9 / 4],
            [-15 / 4, 15 / 4, 3 / 4, -3 / 4],
            [-9 / 4, 9 / 4, 9 / 4, -9 / 4],
            [6, -9, 0, 3],
        ]
    ),
)


def _w(x):
    """Broadcast a scalar or per-path increment against matrix stacks."""
    return np.asarray(x, dtype=float)[..., None, None]


def _zero_like(coeffs: AlgebraCoefficients):
    n = coeffs.model.dim
    return np.zeros(coeffs.Q.shape[:-2] + (n, n))


def step_gem(coeffs: AlgebraCoefficients, dW, dZ, dt: float) -> np.ndarray:
    """Euler-Maruyama in the algebra: ``Omega_1 = A(0) dt + Gamma(0) dW``."""
    zero = _zero_like(coeffs)
    return coeffs.A(zero) * dt + coeffs.Gamma(zero) * _w(dW)


def step_git15(coeffs: AlgebraCoefficients, dW, dZ, dt: float) -> np.ndarray:
    """Order-1.5 Ito-Taylor step in the algebra, derivatives taken at 0."""
    T = coeffs.taylor_terms()
    W, Z = _w(dW), _w(dZ)
    out = (
        T["A"] * dt
        + T["G"] * W
        + 0.5 * T["GpG"] * (W * W - dt)
        + T["ApG"] * Z
        + 0.5 * (T["ApA"] + 0.5 * T["AppGG"] + T["At"]) * dt * dt
        + (T["GpA"] + 0.5 * T["GppGG"] + T["Gt"]) * (W * dt - Z)
        + 0.5 * T["GpG_pG"] * (W * W / 3.0 - dt) * W
    )
    return out + _zero_like(coeffs)


def step_gsrk15(
    coeffs: AlgebraCoefficients, dW, dZ, dt: float, tableau: SRITableau = ROSSLER_SRI
) -> np.ndarray:
    """Derivative-free order-1.5 stochastic Runge-Kutta step in the algebra."""
    if not dt > 0:
        raise ZeroStepSize("step size must be positive")
    W, Z = _w(dW), _w(dZ)
    sq = np.sqrt(dt)
    zero = _zero_like(coeffs)
    tb = tableau
    s0, s1 = len(tb.alpha), tb.beta.shape[1]
    a: list[np.ndarray] = []
    g: list[np.ndarray] = []
    # drift stages use the first diffusion value only (B0 is strictly lower
    # with a single nonzero column), diffusion stages use earlier drift values
    for i in range(max(s0, s1)):
        if i < s0:
            H = zero.copy()
            for k in range(i):
                if tb.A0[i, k]:
                    H = H + tb.A0[i, k] * a[k] * dt
                if tb.B0[i, k]:
                    H = H + tb.B0[i, k] * g[k] * (Z / dt)
            a.append(coeffs.A(H, tb.c0[i] * dt))
        Ht = zero.copy()
        for k in range(min(i, s0)):
            if tb.A1[i, k]:
                Ht = Ht + tb.A1[i, k] * a[k] * dt
        for k in range(i):
            if tb.B1[i, k]:
                Ht = Ht + tb.B1[i, k] * g[k] * sq
        g.append(coeffs.Gamma(Ht, tb.c1[i] * dt))
    I11 = 0.5 * (W * W - dt)
    I111 = (W * W - 3.0 * dt) * W / 6.0
    weights = (W, I11 / sq, Z / dt, I111 / dt)
    out = sum(tb.alpha[i] * a[i] for i in range(s0)) * dt
    for r in range(4):
        bracket = sum(tb.beta[r, i] * g[i] for i in range(s1) if tb.beta[r, i])
        out = out + bracket * weights[r]
    return out


STEPPERS = {"gem": step_gem, "git15": step_git15, "gsrk15": step_gsrk15}


def step_flat_em(model: LieSDEModel, t: float, Q, dW, dt: float) -> np.ndarray:
    """Plain Euler-Maruyama on the matrix equation, no projection."""
    Q = np.asarray(Q, dtype=float)
    K, V = model.K(t, Q), model.V(t, Q)
    if model.side == "left":
        return Q + (Q @ K) * dt + (Q @ V) * _w(dW)
    return Q + (K @ Q) * dt + (V @ Q) * _w(dW)


def manifold_distance(Q, group) -> np.ndarray | float:
    """``||Q^T Q - I||_F`` for SO(n), ``| |Q y0| - 1 |`` for a unit-sphere carrier."""
    return group.distance(Q)


def _n_steps(T: float, dt: float) -> int:
    J = int(round(T / dt))
    if J < 1 or abs(J * dt - T) > 1e-9 * max(T, 1.0):
        raise ConfigError(f"T={T} is not an integer multiple of dt={dt}")
    return J


def geometric_step(model, cfg: SchemeConfig, t: float, Q, dW, dZ, dt: float) -> np.ndarray:
    """One full step: algebra update followed by projection to the group."""
    if cfg.scheme == "em":
        return step_flat_em(model, t, Q, dW, dt)
    coeffs = algebra_coefficients(
        model, cfg.param, t, Q, cfg.stage_times, cfg.ito_correction
    )
    Omega = STEPPERS[cfg.scheme](coeffs, dW, dZ, dt)
    g = psi_apply(cfg.param, Omega)
    return Q @ g if model.side == "left" else g @ Q


def simulate(
    model: LieSDEModel,
    cfg: SchemeConfig,
    T: float,
    dt: float,
    dW,
    dZ,
    record: bool = False,
    Q0=None,
):
    """Integrate ``M`` paths on ``[0, T]`` with increments of shape ``(M, J)``.

    Returns the terminal states ``(M, n, n)``; with ``record=True`` returns
    ``(states, drift)`` with shapes ``(J + 1, M, n, n)`` and ``(J + 1, M)``.

    Raises
    ------
    NumericalFailure
        On a singular Cayley denominator or non-finite state, with the
        step index.
    """
    cfg.validate()
    dW = np.atleast_2d(np.asarray(dW, dtype=float))
    dZ = np.atleast_2d(np.asarray(dZ, dtype=float))
    J = _n_steps(T, dt)
    if dW.shape[1] != J or dZ.shape != dW.shape:
        raise ConfigError(f"increment table has {dW.shape[1]} steps, grid needs {J}")
    M, n = dW.shape[0], model.dim
    Q = np.broadcast_to(np.eye(n) if Q0 is None else np.asarray(Q0, float), (M, n, n)).copy()
    if record:
        states = np.empty((J + 1, M, n, n))
        drift = np.empty((J + 1, M))
        states[0] = Q
        drift[0] = manifold_distance(Q, model.group)
    for j in range(J):
        try:
            Q = geometric_step(model, cfg, j * dt, Q, dW[:, j], dZ[:, j], dt)
        except SingularMatrix as exc:
            raise NumericalFailure(f"singular Cayley denominator ({exc})", j) from exc
        if not np.all(np.isfinite(Q)):
            raise NonFiniteState("non-finite state", j)
        if record:
            states[j + 1] = Q
            drift[j + 1] = manifold_distance(Q, model.group)
    return (states, drift) if record else Q


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    drift: np.ndarray
    carrier: np.ndarray | None = None


def simulate_path(model: LieSDEModel, cfg: SchemeConfig, T: float, dt: float,
                  dW: Sequence[float], dZ: Sequence[float]) -> Trajectory:
    """Integrate a single path and keep every state."""
    states, drift = simulate(model, cfg, T, dt, np.asarray(dW)[None], np.asarray(dZ)[None],
                             record=True)
    states, drift = states[:, 0], drift[:, 0]
    times = dt * np.arange(states.shape[0])
    carrier = None
    if model.group.name == "UnitSphereCarrier":
        carrier = states @ np.asarray(model.group.y0)
    return Trajectory(times, states, drift, carrier)


def write_trajectory_csv(path, trajectories: Sequence[Trajectory]) -> None:
    """Write ``path_id, t, Q11..Qnn[, y1..y3], drift`` rows for every trajectory."""
    first = trajectories[0]
    n = first.states.shape[-1]
    header = ["path_id", "t"] + [f"Q{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    if first.carrier is not None:
        header += ["y1", "y2", "y3"]
    header.append("drift")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for pid, tr in enumerate(trajectories):
            for k, t in enumerate(tr.times):
                row = [pid, repr(float(t))] + [repr(float(v)) for v in tr.states[k].ravel()]
                if tr.carrier is not None:
                    row += [repr(float(v)) for v in tr.carrier[k]]
                row.append(repr(float(tr.drift[k])))
                w.writerow(row)
