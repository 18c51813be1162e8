"""Regularized Koiter shell coupled to an incompressible fluid on a moving domain.

Importing the package is cheap; numerical modules load numpy on first use
so the command line can pin thread counts beforehand.
"""

__version__ = "0.1.0"
