"""Simulation and numerical verification of occupation-time fluctuations
for the (d, alpha, beta)-branching particle system."""

__version__ = "0.1.0"
