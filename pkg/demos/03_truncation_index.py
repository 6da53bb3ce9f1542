"""How many Bernoulli terms does the exponential map need?

The order-1.5 schemes evaluate ``dexp^-1`` through its truncated Bernoulli
series. With only the first-order term (q = 1) the term
``(1/12) [Omega, [Omega, B]]`` is dropped. Along a step ``Omega`` is roughly
``V W_s`` whose square has nonzero mean, so a deterministic ``O(dt^2)``
local error remains and the global order falls to 1. From q = 2 on the
order-1.5 behaviour returns.
"""
from liesde import SchemeConfig, make_so3_test_model
from liesde.experiments import convergence_study
from liesde.lie import Parametrization

model = make_so3_test_model()
dts = [2.0**-k for k in (9, 8, 7, 6)]
cache = {}
for q in (0, 1, 2, 4):
    cfg = SchemeConfig("gsrk15", Parametrization.exponential(q), allow_underresolved=True)
    rep = convergence_study(model, cfg, dts, 2.0**-12, n_paths=40, seed=5, reference_cache=cache)
    print(f"gsrk15 / exp, q = {q}: slope {rep.slope:.2f}")
