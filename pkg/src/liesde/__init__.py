"""Structure-preserving Magnus-type integrators for Ito SDEs on matrix Lie groups.

The solution is written as ``Q_{j+1} = Q_j psi(Omega)`` (or ``psi(Omega) Q_j``
for right-multiplied models), where ``Omega`` solves an SDE in the Lie
algebra and ``psi`` is the matrix exponential or the Cayley map. Stepping in
the algebra and projecting with ``psi`` keeps every iterate on the group.
"""

__version__ = "0.1.0"
# version of the CSV/JSON/binary output layout
FORMAT_VERSION = 1

from .integrators import (  # noqa: E402
    ConfigError,
    NonFiniteState,
    NumericalFailure,
    SchemeConfig,
    simulate,
    simulate_path,
)
from .lie import Parametrization  # noqa: E402
from .model import (  # noqa: E402
    LieSDEModel,
    make_rigid_body_model,
    make_so2_corr_model,
    make_so3_test_model,
)
from .noise import BrownianTable, build_table, coarsen  # noqa: E402
