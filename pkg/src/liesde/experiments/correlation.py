"""Two-asset correlation flow on SO(2): data, densities and calibration.

A rotation ``Q_t`` in SO(2) moves a covariance matrix as ``P_t = Q_t^T P0 Q_t``;
normalising by the standard deviations gives a correlation matrix ``R_t``.
The noise amplitude ``c`` of the rotation is fitted so that the density of
simulated correlations matches a density estimated from rolling historical
correlations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Callable, Sequence

import numpy as np

from ..integrators import SchemeConfig, simulate
from ..lie import Parametrization
from ..model import make_so2_corr_model
from ..noise import build_table

__all__ = [
    "CalibrationResult",
    "DegenerateWindow",
    "DensityEstimate",
    "MalformedCSV",
    "R0_DEFAULT_OFFDIAG",
    "TooFewSamples",
    "calibrate",
    "correlation_flow",
    "correlation_matrices",
    "density_distance",
    "kde",
    "load_prices_csv",
    "log_returns",
    "rolling_correlation",
    "silverman_bandwidth",
    "synthetic_gbm_prices",
    "write_prices_csv",
]

R0_DEFAULT_OFFDIAG = -0.0159

# numpy 2 renamed trapz
_trapezoid = getattr(np, "trapezoid", None) or np.trapz


class MalformedCSV(ValueError):
    pass


class DegenerateWindow(ArithmeticError):
    """A window with zero return variance; reported as NaN in the output series."""


class TooFewSamples(ValueError):
    pass


# ---------------------------------------------------------------------------
# prices and rolling correlation


def load_prices_csv(path, window: int = 30):
    """Read ``date,price_a,price_b`` rows.

    Returns ``(dates, a, b)`` with dates as strings and prices as arrays.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["date", "price_a", "price_b"]:
        raise MalformedCSV("expected header 'date,price_a,price_b'")
    dates, a, b = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise MalformedCSV(f"line {lineno}: expected 3 fields, got {len(row)}")
        try:
            date.fromisoformat(row[0].strip())
            pa, pb = float(row[1]), float(row[2])
        except ValueError as exc:
            raise MalformedCSV(f"line {lineno}: {exc}") from exc
        if not (pa > 0 and pb > 0 and math.isfinite(pa) and math.isfinite(pb)):
            raise MalformedCSV(f"line {lineno}: prices must be positive and finite")
        dates.append(row[0].strip())
        a.append(pa)
        b.append(pb)
    if len(a) < window + 1:
        raise MalformedCSV(f"need at least {window + 1} price rows, got {len(a)}")
    return dates, np.array(a), np.array(b)


def write_prices_csv(path, dates: Sequence[str], a, b) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "price_a", "price_b"])
        for d, x, y in zip(dates, a, b):
            w.writerow([d, repr(float(x)), repr(float(y))])


def log_returns(prices) -> np.ndarray:
    p = np.asarray(prices, dtype=float)
    return np.diff(np.log(p))


def rolling_correlation(a, b, window: int = 30) -> np.ndarray:
    """Pearson correlation of daily log-returns over each trailing window.

    The output has ``len(returns) - window + 1`` entries; windows where either
    series has zero variance give NaN.
    """
    if window < 2:
        raise ValueError("window must be at least 2")
    ra, rb = log_returns(a), log_returns(b)
    if ra.shape != rb.shape:
        raise ValueError("price series must have equal length")
    if len(ra) < window:
        raise ValueError(f"need at least {window} returns")
    wa = np.lib.stride_tricks.sliding_window_view(ra, window)
    wb = np.lib.stride_tricks.sliding_window_view(rb, window)
    da = wa - wa.mean(axis=1, keepdims=True)
    db = wb - wb.mean(axis=1, keepdims=True)
    sab = np.sum(da * db, axis=1)
    saa = np.sum(da * da, axis=1)
    sbb = np.sum(db * db, axis=1)
    # relative threshold: constant windows leave rounding-level residues
    scale_a = window * np.max(np.abs(wa), axis=1) ** 2
    scale_b = window * np.max(np.abs(wb), axis=1) ** 2
    bad = (saa <= 1e-24 * np.maximum(scale_a, 1e-300)) | (saa == 0)
    bad |= (sbb <= 1e-24 * np.maximum(scale_b, 1e-300)) | (sbb == 0)
    out = np.full(len(sab), np.nan)
    ok = ~bad
    out[ok] = np.clip(sab[ok] / np.sqrt(saa[ok] * sbb[ok]), -1.0, 1.0)
    return out


def synthetic_gbm_prices(n_days: int, rho: float = 0.0, seed: int = 0,
                         vol=(0.01, 0.006), drift=(0.0, 0.0), start=(100.0, 1.3),
                         first_date: str = "2005-01-03"):
    """Correlated geometric Brownian motion pair sampled daily.

    Returns ``(dates, a, b)``; ``n_days`` is the number of price rows.
    """
    if not -1.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [-1, 1]")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_days - 1, 2))
    z2 = rho * z[:, 0] + math.sqrt(1.0 - rho * rho) * z[:, 1]
    sa, sb = vol
    ra = drift[0] - 0.5 * sa * sa + sa * z[:, 0]
    rb = drift[1] - 0.5 * sb * sb + sb * z2
    a = start[0] * np.exp(np.concatenate([[0.0], np.cumsum(ra)]))
    b = start[1] * np.exp(np.concatenate([[0.0], np.cumsum(rb)]))
    d0 = date.fromisoformat(first_date)
    dates = [(d0 + timedelta(days=k)).isoformat() for k in range(n_days)]
    return dates, a, b


# ---------------------------------------------------------------------------
# correlation flow


def _check_r0(R0):
    R0 = np.asarray(R0, dtype=float)
    if R0.shape != (2, 2) or not np.allclose(R0, R0.T, atol=0, rtol=0):
        raise ValueError("R0 must be a symmetric 2x2 matrix")
    if not np.allclose(np.diag(R0), 1.0, atol=1e-12) or not -1 < R0[0, 1] < 1:
        raise ValueError("R0 needs unit diagonal and off-diagonal in (-1, 1)")
    return R0


def default_r0() -> np.ndarray:
    return np.array([[1.0, R0_DEFAULT_OFFDIAG], [R0_DEFAULT_OFFDIAG, 1.0]])


def correlation_matrices(Q, P0) -> np.ndarray:
    """``R = S^-1 P S^-1`` with ``P = Q^T P0 Q`` and ``S = sqrt(diag P)``."""
    P = np.swapaxes(Q, -1, -2) @ P0 @ Q
    s = np.sqrt(np.diagonal(P, axis1=-2, axis2=-1))
    R = P / (s[..., :, None] * s[..., None, :])
    # exact unit diagonal, and clip rounding beyond +-1
    idx = np.arange(P.shape[-1])
    R[..., idx, idx] = 1.0
    return np.clip(R, -1.0, 1.0)


def correlation_flow(c: float, R0=None, T: float = 1.0, dt: float = 2.0**-6,
                     n_paths: int = 1000, seed: int = 0,
                     scheme: str = "git15", param: Parametrization | None = None,
                     variances=(1.0, 1.0), return_matrices: bool = False):
    """Terminal off-diagonal correlations of ``R_T`` across ``n_paths`` paths.

    ``P0`` is ``D R0 D`` with ``D = diag(sqrt(variances))``; unit variances
    give ``P0 = R0``. With ``return_matrices`` the full ``R_T`` stack is
    returned as well.
    """
    R0 = default_r0() if R0 is None else _check_r0(R0)
    d = np.sqrt(np.asarray(variances, dtype=float))
    P0 = d[:, None] * R0 * d[None, :]
    cfg = SchemeConfig(scheme, param or Parametrization.cayley())
    model = make_so2_corr_model(c)
    n = int(round(T / dt))
    table = build_table(seed, dt, n, n_paths)
    Q = simulate(model, cfg, T, dt, table.dW, table.dZ)
    R = correlation_matrices(Q, P0)
    if return_matrices:
        return R[:, 0, 1].copy(), R
    return R[:, 0, 1].copy()


# ---------------------------------------------------------------------------
# kernel density and calibration


@dataclass
class DensityEstimate:
    grid: np.ndarray
    values: np.ndarray
    bandwidth: float

    def integral(self) -> float:
        return float(_trapezoid(self.values, self.grid))


def silverman_bandwidth(x) -> float:
    """``0.9 min(sd, IQR/1.34) N^(-1/5)``.

    When that spread is zero the larger of the two is used, and a fully
    degenerate sample falls back to a unit spread.
    """
    x = np.asarray(x, dtype=float)
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    iqr = float(q75 - q25) / 1.34
    spread = min(sd, iqr)
    if spread <= 0:
        spread = max(sd, iqr)
    if spread <= 0:
        spread = 1.0
    return 0.9 * spread * len(x) ** -0.2


def kde(samples, grid, bandwidth: float | None = None, support=None) -> DensityEstimate:
    """Gaussian kernel density estimate on ``grid``.

    Non-finite samples are dropped. ``support=(lo, hi)`` reflects the kernels
    at the interval ends so no mass leaks outside a bounded domain.
    """
    x = np.asarray(samples, dtype=float).ravel()
    x = x[np.isfinite(x)]
    if len(x) < 10:
        raise TooFewSamples(f"need at least 10 finite samples, got {len(x)}")
    grid = np.asarray(grid, dtype=float)
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if h <= 0:
        raise ValueError("bandwidth must be positive")

    def bumps(centres):
        vals = np.zeros_like(grid)
        # chunk to bound memory for large samples
        for k in range(0, len(centres), 4096):
            u = (grid[:, None] - centres[None, k:k + 4096]) / h
            vals += np.exp(-0.5 * u * u).sum(axis=1)
        return vals

    values = bumps(x)
    if support is not None:
        lo, hi = support
        values += bumps(2 * lo - x) + bumps(2 * hi - x)
        values[(grid < lo) | (grid > hi)] = 0.0
    values /= len(x) * h * math.sqrt(2 * math.pi)
    return DensityEstimate(grid, values, h)


def density_distance(f: DensityEstimate, g: DensityEstimate) -> float:
    """L2 distance on the shared grid, by the trapezoidal rule."""
    if f.grid.shape != g.grid.shape or not np.array_equal(f.grid, g.grid):
        raise ValueError("densities live on different grids")
    d2 = (f.values - g.values) ** 2
    return float(math.sqrt(max(_trapezoid(d2, f.grid), 0.0)))


@dataclass
class CalibrationResult:
    c: float
    distance: float
    evaluations: int
    history: list


def calibrate(hist_density: DensityEstimate, flow_factory: Callable[[float], np.ndarray],
              bounds=(0.05, 2.0), budget: int = 20, support=(-1.0, 1.0)) -> CalibrationResult:
    """Golden-section search for the ``c`` minimising the L2 density distance.

    ``flow_factory(c)`` must return correlation samples and should use a fixed
    seed so the objective is deterministic. At most ``budget`` evaluations are
    spent; the best probe seen is returned.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    lo, hi = (float(v) for v in bounds)
    if not lo < hi:
        raise ValueError("bounds must satisfy lo < hi")
    history = []

    def objective(c):
        est = kde(flow_factory(c), hist_density.grid, support=support)
        d = density_distance(est, hist_density)
        history.append((c, d))
        return d

    if budget == 1:
        c = 0.5 * (lo + hi)
        return CalibrationResult(c, objective(c), 1, history)
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    x1, x2 = b - invphi * (b - a), a + invphi * (b - a)
    f1, f2 = objective(x1), objective(x2)
    while len(history) < budget:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = objective(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = objective(x2)
    c, d = min(history, key=lambda cd: cd[1])
    return CalibrationResult(c, d, len(history), history)
