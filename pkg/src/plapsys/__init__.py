"""Numerical machinery for positive solutions of singular quasilinear
p-Laplacian systems with convection terms.

The pipeline mirrors a constructive existence argument: eigenpair and
torsion solves feed barrier construction and pointwise certification, a
shifted monotone iteration solves the frozen-gradient auxiliary system
between the barriers, and a Picard loop approximates the fixed point of the
frozen-gradient solution map, with distance-ratio bounds verified on the
result.
"""

from ._kernels import backend_name

__all__ = ["backend_name"]
__version__ = "0.1.0"
