"""Strong convergence on coupled Brownian paths.

A single fine table drives the reference solution and every coarse run, so the
error measures only the discretisation. Small sizes keep this demo under a
minute; ``liesde convergence`` runs the full desk-scale study.
"""
import numpy as np

from liesde import SchemeConfig, make_so3_test_model
from liesde.experiments import convergence_study
from liesde.lie import Parametrization

model = make_so3_test_model()
dts = [2.0**-k for k in (8, 7, 6, 5)]
cache = {}  # reference runs are shared between studies on the same table

for scheme in ("gem", "git15", "gsrk15"):
    cfg = SchemeConfig(scheme, Parametrization.cayley())
    rep = convergence_study(model, cfg, dts, 2.0**-11, n_paths=40, seed=3, reference_cache=cache)
    errs = "  ".join(f"{e:.2e}" for e in rep.mean_errors)
    print(f"{cfg.label:12s} errors {errs}   fitted slope {rep.slope:.2f}")

# Expected: about 1 for GEM and about 1.5 or a little above for the two
# order-1.5 schemes.
