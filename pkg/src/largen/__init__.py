"""Lattice simulator, exact large-N oracle and 1/N expansion engine for the
Wick-renormalized O(N) Phi^4 model on the two-dimensional torus."""

__version__ = "0.1.0"
