"""
Continuous-time social network dynamics.

Network-attribute co-evolution model and its hidden-network extension:
forward simulation, evidence-constrained importance sampling,
Metropolis-Hastings trajectory sampling, and parameter estimation by
Monte Carlo EM and the method of moments.
"""

__version__ = "1.0.0"

__all__ = ["__version__"]
