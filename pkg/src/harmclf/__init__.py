"""Weakly-harmonic and holomorphic classifiers over integer-frequency
feature banks, with reflective-projection PGD attacks, analytic-polyhedra
adversarial detection, and the continuity-bias hypothesis test."""

__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
