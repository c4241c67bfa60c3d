"""Random matrix products on Zariski-dense subgroups of SL_d(R).

Estimators for the Lyapunov spectrum and its top gap, exponential
convergence of the walk direction, convergence and non-convergence of the
orthogonal factors of the polar decomposition, asymptotic independence of
those factors, dimension lower bounds for the stationary law, and a
rigorous table-tennis freeness certificate with an exact word oracle.
"""

__version__ = "0.1.0"

from . import boundary, dimension, errors, fits, linalg, measures, pingpong, walk  # noqa: F401
