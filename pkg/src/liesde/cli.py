"""Command-line front end: ``liesde <subcommand> [flags]``.

Subcommands
-----------
convergence   strong-convergence study on the SO(3) test model
rigid-body    geometric versus flat Euler-Maruyama for the stochastic rigid body
corr-flow     rolling correlation, density estimate, calibration and flow density
step-check    single-step scheme and derivative diagnostics

Settings resolve as defaults < ``--config`` file (flat ``key=value`` lines) <
flags. Every run writes ``manifest.json`` with the resolved settings next to
its outputs. Exit status is 0 on success, 2 on configuration errors and 3 on
numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import FORMAT_VERSION, __version__
from .integrators import ConfigError, NumericalFailure, SchemeConfig, step_gem, step_git15
from .integrators import ROSSLER_SRI, step_gsrk15
from .lie import (
    DomainError,
    Parametrization,
    c_coeff_cayley,
    ddcayinv_dir,
    ddexpinv_dir,
    dcay_inv,
    dexp_inv_trunc,
)
from .matops import SingularMatrix
from .model import algebra_coefficients, make_so3_test_model

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# flag defaults; None means "subcommand specific"
DEFAULTS = {
    "scheme": None,
    "param": "cay",
    "q": 1,
    "dt": None,
    "dt_ref": None,
    "T": None,
    "paths": None,
    "seed": 1,
    "out": "out",
    "reference_param": "cay",
    "allow_underresolved": False,
    "input_csv": None,
    "window": 30,
    "threads": None,
    "frozen_time": False,
    "no_ito_correction": False,
    "drift_tol": 1e-10,
    "steps": 200,
    "full_scale": False,
    "r0": -0.0159,
    "bounds": "0.05,2.0",
    "budget": 20,
    "synthetic_days": 300,
    "synthetic_rho": 0.0,
    "p0_variances": "1,1",
}

SUBCOMMAND_DEFAULTS = {
    "convergence": {"scheme": "gem", "dt": "2^-10,2^-9,2^-8,2^-7,2^-6", "dt_ref": "2^-13",
                    "T": 1.0, "paths": 200},
    "rigid-body": {"scheme": "gem", "dt": "0.03", "T": None, "paths": 1},
    "corr-flow": {"scheme": "git15", "dt": "2^-6", "T": 1.0, "paths": 2000},
    "step-check": {"scheme": "gsrk15", "dt": "2^-6", "T": None, "paths": 1},
}

BOOL_KEYS = {"allow_underresolved", "frozen_time", "no_ito_correction", "full_scale"}
INT_KEYS = {"q", "paths", "seed", "window", "threads", "steps", "budget", "synthetic_days"}
FLOAT_KEYS = {"T", "drift_tol", "r0", "synthetic_rho"}


class UsageError(ValueError):
    pass


def parse_step(text: str) -> float:
    """``0.03``, ``1/64`` or ``2^-6``."""
    s = str(text).strip()
    try:
        if "^" in s:
            base, exp = s.split("^")
            return float(base) ** int(exp)
        return float(Fraction(s))
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"cannot parse step size {text!r}") from exc


def parse_step_list(text) -> list[float]:
    return [parse_step(s) for s in str(text).split(",") if s.strip()]


def read_config_file(path) -> dict:
    """Flat ``key=value`` file; ``#`` starts a comment, dashes in keys become underscores."""
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, val = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, val)
    return values


def _coerce(key, val):
    if key in BOOL_KEYS:
        if isinstance(val, bool):
            return val
        low = str(val).lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{key}: expected a boolean, got {val!r}")
    try:
        if key in INT_KEYS:
            return int(val)
        if key in FLOAT_KEYS:
            return float(val)
    except ValueError as exc:
        raise UsageError(f"{key}: {exc}") from exc
    return val


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liesde", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version",
                        version=f"liesde {__version__} (output format {FORMAT_VERSION})")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", default=None, help="flat key=value settings file")
    common.add_argument("--scheme", choices=("gem", "git15", "gsrk15", "em"), default=S)
    common.add_argument("--param", choices=("exp", "cay"), default=S)
    common.add_argument("--q", type=int, default=S, help="dexp^-1 truncation index")
    common.add_argument("--dt", default=S, help="step size(s), e.g. 0.03 or 2^-10,2^-9")
    common.add_argument("--dt-ref", default=S, help="reference step size")
    common.add_argument("--T", type=float, default=S, help="final time")
    common.add_argument("--paths", type=int, default=S)
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--out", default=S, help="output directory")
    common.add_argument("--reference-param", choices=("exp", "cay"), default=S)
    common.add_argument("--allow-underresolved", action="store_true", default=S)
    common.add_argument("--threads", type=int, default=S)
    common.add_argument("--frozen-time", action="store_true", default=S,
                        help="evaluate all coefficients at the step start time")
    common.add_argument("--no-ito-correction", action="store_true", default=S,
                        help="drop the -C(Omega)/2 drift correction")
    common.add_argument("--drift-tol", type=float, default=S)

    sub.add_parser("convergence", parents=[common], help="strong convergence study") \
        .add_argument("--full-scale", action="store_true", default=S,
                      help="M=1000, dt 2^-14..2^-9, reference 2^-16")
    p = sub.add_parser("rigid-body", parents=[common], help="stochastic rigid body")
    p.add_argument("--steps", type=int, default=S)
    p = sub.add_parser("corr-flow", parents=[common], help="correlation flow pipeline")
    p.add_argument("--input-csv", default=S)
    p.add_argument("--window", type=int, default=S)
    p.add_argument("--r0", type=float, default=S, help="initial off-diagonal correlation")
    p.add_argument("--bounds", default=S, help="calibration interval lo,hi")
    p.add_argument("--budget", type=int, default=S, help="calibration evaluations")
    p.add_argument("--synthetic-days", type=int, default=S)
    p.add_argument("--synthetic-rho", type=float, default=S)
    p.add_argument("--p0-variances", default=S, help="variances building P0 from R0")
    sub.add_parser("step-check", parents=[common], help="single-step diagnostics")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    cfg.update({k: v for k, v in SUBCOMMAND_DEFAULTS[args.command].items()})
    if args.config:
        cfg.update(read_config_file(args.config))
    for key, val in vars(args).items():
        if key in DEFAULTS:
            cfg[key] = _coerce(key, val)
    if cfg["threads"] is None:
        cfg["threads"] = os.cpu_count() or 1
    if cfg["threads"] < 1:
        raise UsageError("--threads must be positive")
    if cfg.get("full_scale"):
        cfg.update(paths=1000, dt="2^-14,2^-13,2^-12,2^-11,2^-10,2^-9", dt_ref="2^-16")
    cfg["command"] = args.command
    return cfg


def _param(kind: str, q: int) -> Parametrization:
    return Parametrization.cayley() if kind == "cay" else Parametrization.exponential(q)


def scheme_config(cfg: dict) -> SchemeConfig:
    return SchemeConfig(
        cfg["scheme"],
        _param(cfg["param"], cfg["q"]),
        stage_times=not cfg["frozen_time"],
        ito_correction=not cfg["no_ito_correction"],
        allow_underresolved=cfg["allow_underresolved"],
    )


def _json_dump(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_manifest(out: Path, cfg: dict, outputs: list[str]) -> None:
    manifest = {
        "subcommand": cfg["command"],
        "config": _echo(cfg),
        "version": __version__,
        "format_version": FORMAT_VERSION,
        "outputs": sorted(outputs + ["manifest.json"]),
    }
    _json_dump(out / "manifest.json", manifest)


# ---------------------------------------------------------------------------
# subcommands


def cmd_convergence(cfg: dict, out: Path) -> list[str]:
    from .experiments.convergence import convergence_study

    sc = scheme_config(cfg)
    report = convergence_study(
        make_so3_test_model(), sc, parse_step_list(cfg["dt"]), parse_step(cfg["dt_ref"]),
        cfg["paths"], cfg["seed"], T=cfg["T"],
        reference_param=_param(cfg["reference_param"], max(cfg["q"], 2)),
        threads=cfg["threads"],
    )
    with open(out / "convergence.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["dt", "mean_error", "std_error"])
        for row in zip(report.step_sizes, report.mean_errors, report.std_errors):
            w.writerow([repr(float(v)) for v in row])
    _json_dump(out / "report.json", {
        "slope": report.slope,
        "intercept": report.intercept,
        "n_paths": report.n_paths,
        "step_sizes": report.step_sizes,
        "mean_errors": report.mean_errors,
        "study": report.config,
        "config": _echo(cfg),
    })
    print(f"{sc.label}: slope {report.slope:.3f} over {len(report.step_sizes)} step sizes")
    return ["convergence.csv", "report.json"]


def cmd_rigid_body(cfg: dict, out: Path) -> list[str]:
    from .experiments.rigid_body import RigidBodyConfig, rigid_body_run

    if cfg["scheme"] == "em":
        raise ConfigError("rigid-body always runs flat Euler-Maruyama alongside; "
                          "choose a geometric --scheme")
    if cfg["scheme"] == "git15":
        raise ConfigError("git15 needs state-independent coefficients; use gem or gsrk15")
    rb = RigidBodyConfig(seed=cfg["seed"], n_steps=cfg["steps"], dt=parse_step(cfg["dt"]),
                         scheme=cfg["scheme"], param=_param(cfg["param"], cfg["q"]))
    res = rigid_body_run(rb, out)
    geo_max = float(np.max(res.geometric.drift))
    flat_max = float(np.max(res.flat.drift))
    _json_dump(out / "report.json", {
        "max_drift_geometric": geo_max,
        "max_drift_flat": flat_max,
        "drift_tol": cfg["drift_tol"],
        "within_tol": geo_max <= cfg["drift_tol"],
        "config": _echo(cfg),
    })
    print(f"max ||y|-1|: geometric {geo_max:.3e}, flat {flat_max:.3e}")
    return ["trajectory.csv", "drift.csv", "report.json"]


def cmd_corr_flow(cfg: dict, out: Path) -> list[str]:
    from .experiments import correlation as cf

    outputs = []
    if cfg["input_csv"]:
        _, a, b = cf.load_prices_csv(cfg["input_csv"], cfg["window"])
    else:
        dates, a, b = cf.synthetic_gbm_prices(cfg["synthetic_days"], cfg["synthetic_rho"],
                                              seed=cfg["seed"])
        cf.write_prices_csv(out / "prices.csv", dates, a, b)
        outputs.append("prices.csv")
    rolling = cf.rolling_correlation(a, b, cfg["window"])
    grid = np.linspace(-1.0, 1.0, 401)
    hist = cf.kde(rolling, grid, support=(-1.0, 1.0))
    try:
        lo, hi = (float(v) for v in str(cfg["bounds"]).split(","))
        variances = tuple(float(v) for v in str(cfg["p0_variances"]).split(","))
    except ValueError as exc:
        raise UsageError(f"bad --bounds or --p0-variances: {exc}") from exc
    R0 = np.array([[1.0, cfg["r0"]], [cfg["r0"], 1.0]])
    sc = scheme_config(cfg)
    dt = parse_step(cfg["dt"])

    def flow(c):
        return cf.correlation_flow(c, R0, cfg["T"], dt, cfg["paths"], cfg["seed"],
                                   sc.scheme, sc.param, variances)

    cal = cf.calibrate(hist, flow, (lo, hi), cfg["budget"])
    model_density = cf.kde(flow(cal.c), grid, support=(-1.0, 1.0))
    with open(out / "density.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "hist", "model"])
        for x, h, m in zip(grid, hist.values, model_density.values):
            w.writerow([repr(float(x)), repr(float(h)), repr(float(m))])
    with open(out / "rolling.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "correlation"])
        for k, r in enumerate(rolling):
            w.writerow([k, "nan" if np.isnan(r) else repr(float(r))])
    _json_dump(out / "report.json", {
        "c": cal.c,
        "distance": cal.distance,
        "evaluations": cal.evaluations,
        "history": [[c, d] for c, d in cal.history],
        "hist_bandwidth": hist.bandwidth,
        "n_rolling": int(np.sum(np.isfinite(rolling))),
        "config": _echo(cfg),
    })
    print(f"calibrated c = {cal.c:.4f}, L2 distance {cal.distance:.4f}")
    return outputs + ["density.csv", "rolling.csv", "report.json"]


def cmd_step_check(cfg: dict, out: Path) -> list[str]:
    """One step of each scheme at Q = I, plus derivative residuals."""
    from .noise import build_table

    dt = parse_step(cfg["dt"])
    model = make_so3_test_model()
    table = build_table(cfg["seed"], dt, 1, 1)
    dW, dZ = table.dW[:, 0], table.dZ[:, 0]
    p = _param(cfg["param"], cfg["q"])
    sc = SchemeConfig(cfg["scheme"], p, not cfg["frozen_time"], not cfg["no_ito_correction"],
                      cfg["allow_underresolved"])
    coeffs = algebra_coefficients(model, p, 0.0, np.eye(3)[None], sc.stage_times,
                                  sc.ito_correction)
    steps = {
        "gem": step_gem(coeffs, dW, dZ, dt)[0],
        "git15": step_git15(coeffs, dW, dZ, dt)[0],
        "gsrk15": step_gsrk15(coeffs, dW, dZ, dt, ROSSLER_SRI)[0],
    }
    rng = np.random.default_rng(cfg["seed"])
    Om, H, Ht = (0.3 * _rand_skew(rng) for _ in range(3))
    h = 1e-6
    fd_cay = (dcay_inv(Om + h * Ht, H) - dcay_inv(Om - h * Ht, H)) / (2 * h)
    fd_exp = (dexp_inv_trunc(Om + h * Ht, H, 4) - dexp_inv_trunc(Om - h * Ht, H, 4)) / (2 * h)
    V = _rand_skew(rng)
    report = {
        "dW": float(dW[0]),
        "dZ": float(dZ[0]),
        "omega": {k: v.tolist() for k, v in steps.items()},
        "gsrk15_minus_git15": float(np.linalg.norm(steps["gsrk15"] - steps["git15"])),
        "ddcayinv_fd_residual": float(np.linalg.norm(ddcayinv_dir(Om, H, Ht) - fd_cay)),
        "ddexpinv_fd_residual": float(np.linalg.norm(ddexpinv_dir(Om, H, Ht, 4) - fd_exp)),
        "c_cayley_norm": float(np.linalg.norm(c_coeff_cayley(V, Om))),
        "config": _echo(cfg),
    }
    _json_dump(out / "report.json", report)
    print(f"|gsrk15 - git15| = {report['gsrk15_minus_git15']:.3e}, "
          f"ddcayinv residual {report['ddcayinv_fd_residual']:.1e}, "
          f"ddexpinv residual {report['ddexpinv_fd_residual']:.1e}")
    return ["report.json"]


def _rand_skew(rng, n=3):
    A = rng.standard_normal((n, n))
    return A - A.T


def _echo(cfg):
    # the output directory is left out so reruns elsewhere compare byte for byte
    return {k: v for k, v in sorted(cfg.items()) if k != "out"}


COMMANDS = {
    "convergence": cmd_convergence,
    "rigid-body": cmd_rigid_body,
    "corr-flow": cmd_corr_flow,
    "step-check": cmd_step_check,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already, 0 on --help/--version
        return int(exc.code or 0)
    from .experiments.convergence import IncompatibleGrids
    from .experiments.correlation import MalformedCSV, TooFewSamples
    from .model import InvalidInertia, InvalidInitial
    from .noise import IndivisibleSteps

    config_errors = (UsageError, ConfigError, IncompatibleGrids, MalformedCSV, TooFewSamples,
                     InvalidInertia, InvalidInitial, IndivisibleSteps, DomainError)
    try:
        cfg = resolve(args)
        if cfg["command"] != "rigid-body":
            scheme_config(cfg)  # early validation
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[cfg["command"]](cfg, out)
        write_manifest(out, cfg, outputs)
    except config_errors as exc:
        print(f"liesde: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        where = f" at step {exc.step}" if getattr(exc, "step", None) is not None else ""
        print(f"liesde: numerical failure{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SingularMatrix as exc:
        print(f"liesde: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
