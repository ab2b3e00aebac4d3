"""Offline figures from occufluct CSV artifacts.

This package never recomputes science: every overlay (predicted slopes,
exponents, oracle values) comes in through the CSV columns or the figure
spec, which the primary component wrote.
"""

__version__ = "0.1.0"
