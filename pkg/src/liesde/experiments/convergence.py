"""Strong convergence measurement on coupled Brownian paths.

One fine table drives both the reference solution and every coarse run;
coarse increments are built by aggregating fine ones, so all step sizes see
the same Brownian path.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..integrators import SchemeConfig, simulate
from ..lie import Parametrization
from ..model import LieSDEModel
from ..noise import build_table, coarsen

__all__ = [
    "ConvergenceReport",
    "IncompatibleGrids",
    "InsufficientPoints",
    "convergence_study",
    "fit_slope",
    "reference_config",
]


class IncompatibleGrids(ValueError):
    pass


class InsufficientPoints(ValueError):
    pass


@dataclass
class ConvergenceReport:
    step_sizes: list[float]
    mean_errors: list[float]
    slope: float | None
    intercept: float | None
    n_paths: int
    config: dict = field(default_factory=dict)
    std_errors: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


def fit_slope(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares line through ``(log2 dt, log2 err)`` points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise InsufficientPoints("need at least two points")
    x, y = pts[:, 0], pts[:, 1]
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise InsufficientPoints("points share one abscissa")
    slope = np.sum((x - xm) * (y - ym)) / sxx
    return float(slope), float(ym - slope * xm)


def reference_config(cfg: SchemeConfig, reference_param: Parametrization | None = None
                     ) -> SchemeConfig:
    """Same scheme and options as ``cfg``, by default with the Cayley map."""
    return SchemeConfig(
        cfg.scheme,
        reference_param or Parametrization.cayley(),
        cfg.stage_times,
        cfg.ito_correction,
        allow_underresolved=True,
    )


def _levels(dt_list, dt_ref, T):
    factors = []
    for dt in dt_list:
        f = dt / dt_ref
        fi = int(round(f))
        if fi < 1 or abs(f - fi) > 1e-9 * f or fi & (fi - 1):
            raise IncompatibleGrids(f"dt={dt} is not a power-of-two multiple of dt_ref={dt_ref}")
        if abs(T / dt - round(T / dt)) > 1e-9 * T / dt:
            raise IncompatibleGrids(f"T={T} is not a multiple of dt={dt}")
        factors.append(fi)
    return factors


def convergence_study(
    model: LieSDEModel,
    cfg: SchemeConfig,
    dt_list: Sequence[float],
    dt_ref: float,
    n_paths: int,
    seed: int,
    T: float = 1.0,
    reference_param: Parametrization | None = None,
    exact_solution: Callable[[float], np.ndarray] | None = None,
    batch_size: int = 250,
    threads: int = 1,
    reference_cache: dict | None = None,
) -> ConvergenceReport:
    """Mean terminal Frobenius error against a fine-step reference.

    The reference is the same scheme run at ``dt_ref`` with
    ``reference_param`` (Cayley by default) on the same table, unless
    ``exact_solution(T)`` is given. Paths are processed in batches; every
    batch regenerates its rows of the seeded table, so results do not depend
    on ``batch_size`` or ``threads``. ``reference_cache`` (a dict) lets
    several studies on the same table share reference runs.
    """
    if n_paths < 2:
        raise ValueError("need at least two paths")
    dt_list = sorted(float(d) for d in dt_list)
    factors = _levels(dt_list, dt_ref, T)
    n_fine = int(round(T / dt_ref))
    ref_cfg = reference_config(cfg, reference_param)
    starts = list(range(0, n_paths, batch_size))

    def run_batch(start):
        stop = min(start + batch_size, n_paths)
        table = build_table(seed, dt_ref, n_fine, stop - start, first_path=start)
        if exact_solution is not None:
            ref = np.broadcast_to(exact_solution(T), (stop - start, model.dim, model.dim))
        else:
            key = (model.label, ref_cfg, T, dt_ref, seed, start, stop)
            if reference_cache is not None and key in reference_cache:
                ref = reference_cache[key]
            else:
                ref = simulate(model, ref_cfg, T, dt_ref, table.dW, table.dZ)
                if reference_cache is not None:
                    reference_cache[key] = ref
        errs = np.empty((len(dt_list), stop - start))
        for i, f in enumerate(factors):
            tab = coarsen(table, f)
            Q = simulate(model, cfg, T, tab.dt, tab.dW, tab.dZ)
            errs[i] = np.linalg.norm(Q - ref, axis=(-2, -1))
        return errs

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run_batch, starts))
    else:
        parts = [run_batch(s) for s in starts]
    errs = np.concatenate(parts, axis=1)
    mean = errs.mean(axis=1)
    sem = errs.std(axis=1, ddof=1) / np.sqrt(n_paths)
    slope = intercept = None
    if len(dt_list) >= 3:
        slope, intercept = fit_slope(list(zip(np.log2(dt_list), np.log2(mean))))
    config = {
        "model": model.label,
        "scheme": cfg.scheme,
        "param": cfg.param.kind,
        "q": cfg.param.q,
        "stage_times": cfg.stage_times,
        "ito_correction": cfg.ito_correction,
        "reference": "exact" if exact_solution is not None else ref_cfg.label,
        "dt_ref": dt_ref,
        "T": T,
        "seed": seed,
    }
    return ConvergenceReport(
        step_sizes=list(dt_list),
        mean_errors=[float(v) for v in mean],
        slope=slope,
        intercept=intercept,
        n_paths=n_paths,
        config=config,
        std_errors=[float(v) for v in sem],
    )
