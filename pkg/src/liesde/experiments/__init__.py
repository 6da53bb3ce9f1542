"""Drivers for the convergence, rigid body and correlation-flow studies."""

from .convergence import (
    ConvergenceReport,
    IncompatibleGrids,
    InsufficientPoints,
    convergence_study,
    fit_slope,
    reference_config,
)
from .correlation import (
    CalibrationResult,
    DegenerateWindow,
    DensityEstimate,
    MalformedCSV,
    TooFewSamples,
    calibrate,
    correlation_flow,
    correlation_matrices,
    density_distance,
    kde,
    load_prices_csv,
    rolling_correlation,
    silverman_bandwidth,
    synthetic_gbm_prices,
    write_prices_csv,
)
from .rigid_body import RigidBodyConfig, RigidBodyResult, rigid_body_run, write_drift_csv
