"""Half-ball nonlocal vector calculus on periodic lattices.

Exact-adjoint gradient, divergence and curl built from radial kernels, their
Fourier symbols, discrete Poincare constants, volume-constrained solvers,
Helmholtz decompositions and an identity verification harness.
"""

from __future__ import annotations

from .kernels import KernelSpec, check_assumptions, comparison_kernel, moments
from .lattice import DomainMask, Torus, build_box_domain
from .operators import curl, div, grad, vector_laplacian
from .stencil import StencilWeights, build_stencil

__version__ = "0.1.0"

__all__ = [
    "DomainMask",
    "KernelSpec",
    "StencilWeights",
    "Torus",
    "build_box_domain",
    "build_stencil",
    "check_assumptions",
    "comparison_kernel",
    "curl",
    "div",
    "grad",
    "moments",
    "vector_laplacian",
]
