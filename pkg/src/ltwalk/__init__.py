"""Local-time functionals of transient lattice random walks.

Simulation of random walks on Z^d with streaming local-time statistics,
exact renewal-equation analysis of return probabilities and visit-count
moments, and statistical verification of the law-of-large-numbers
limits, variance bounds and maximal-local-time bounds at desk scale.
"""

from .kernel import BACKEND, available_backends

__version__ = "0.1.0"

__all__ = ["BACKEND", "available_backends", "__version__"]
