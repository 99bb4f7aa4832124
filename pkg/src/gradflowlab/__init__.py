"""Numerical laboratory for gradient systems.

Builds gradient flows by time-incremental minimization across Hilbert,
Banach, metric, and rate-independent settings, and certifies the computed
trajectories against variational identities: energy-dissipation balance,
Fenchel-Young optimality, metric-slope estimates, the variational-interpolant
identity, evolutionary variational inequalities, and contraction estimates.
"""

__version__ = "0.1.0"
