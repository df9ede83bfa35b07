"""Convex incremental-potential contact models and benchmark tooling."""

import os as _os

# Multithreaded BLAS reductions are not bitwise reproducible run to run, and
# the matrices here are far too small to benefit from threads anyway.  Set
# before the first numpy import; explicit user settings win.  (No effect if
# numpy was already imported by the embedding application.)
for _var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    _os.environ.setdefault(_var, "1")

from .normal_laws import (  # noqa: E402
    BarrierBreach,
    DiscreteNormal,
    HuntCrossley,
    IpcBarrier,
    LogBarrier,
    UnsupportedLaw,
    convexity_margin,
    discrete_impulse,
    impulse_antiderivative,
    impulse_derivative,
    normal_force,
    transition_velocity,
)
from .potentials import (  # noqa: E402
    MODEL_IDS,
    ContactData,
    FrictionParams,
    PotentialEval,
    effective_stiction_tolerance,
    evaluate,
    lagged_eval,
    naive_impulse,
    sap_eval,
    sap_stiction_tolerance,
    similar_eval,
)
from .softmath import soft_norm, soft_norm_hessian, soft_unit  # noqa: E402

__version__ = "0.1.0"
