"""Deterministic 2D bin-picking laboratory.

Simulates a planar parts bin, a density-guided rough grasping stage, an
antipodal fine grasp detector, and push-based singulation policies, with
seeded Monte Carlo benchmarks on top.
"""

from .kernels import backend_name

__all__ = ["backend_name"]
__version__ = "1.0.0"
