"""Occupation-time fluctuation laboratory for branching particle systems
with symmetric stable motion and inhomogeneous Poisson initial states."""

__version__ = "0.1.0"
