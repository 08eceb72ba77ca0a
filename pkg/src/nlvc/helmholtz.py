"""Helmholtz decomposition of constrained vector fields.

Given ``u`` vanishing outside the interior, solve ``-L f = u`` on interior
unknowns (componentwise CG) and set

    2D:  p = -D^{-nu} f,  q = D^{nu}(J f),  u = G^{nu} p + J G^{-nu} q
    3D:  p = -D^{-nu} f,  v = C^{nu} f,     u = G^{nu} p + C^{-nu} v

on the interior.  The rotational part is orthogonal to ``G p`` and, in 3D,
``v`` is divergence free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .krylov import cg
from .lattice import DomainMask
from .operators import curl, div, grad, inner, norm, rotate2d
from .poincare import normal_operator
from .stencil import StencilWeights


class HelmholtzDivergence(RuntimeError):
    pass


@dataclass
class HelmholtzResult2D:
    p: np.ndarray
    q: np.ndarray
    f: np.ndarray
    gradient_part: np.ndarray
    rotational_part: np.ndarray
    residual: float
    orthogonality: float
    iterations: int

    def report(self) -> dict:
        return {"residual": self.residual, "orthogonality": self.orthogonality, "iterations": self.iterations}


@dataclass
class HelmholtzResult3D:
    p: np.ndarray
    v: np.ndarray
    f: np.ndarray
    gradient_part: np.ndarray
    rotational_part: np.ndarray
    residual: float
    orthogonality: float
    divfree_norm: float
    iterations: int

    def report(self) -> dict:
        return {
            "residual": self.residual,
            "orthogonality": self.orthogonality,
            "divfree_norm": self.divfree_norm,
            "iterations": self.iterations,
        }


def _laplace_inverse(u: np.ndarray, domain: DomainMask, stencil: StencilWeights, tol: float) -> tuple[np.ndarray, int]:
    apply = normal_operator(domain, stencil)
    comps, its = [], 0
    for comp in u:
        x, info = cg(apply, domain.restrict(comp), rtol=1e-2 * tol)
        if not info.converged and info.residual > tol:
            raise HelmholtzDivergence(f"Laplacian solve stopped at relative residual {info.residual:.3e}")
        its += info.iterations
        comps.append(domain.extend(x))
    return np.stack(comps), its


def _check_input(u: np.ndarray, domain: DomainMask, d: int) -> None:
    if u.shape != (d, *domain.torus.shape):
        raise ValueError(f"expected a vector field of shape {(d, *domain.torus.shape)}")
    if np.any(u[:, ~domain.interior] != 0):
        raise ValueError("field must vanish outside the interior")


def _relative(num: float, den: float) -> float:
    return num / den if den > 0 else num


def decompose2d(u: np.ndarray, domain: DomainMask, stencil: StencilWeights, tol: float = 1e-10) -> HelmholtzResult2D:
    if stencil.d != 2:
        raise ValueError("decompose2d needs d = 2")
    _check_input(u, domain, 2)
    h = stencil.torus.h
    f, its = _laplace_inverse(u, domain, stencil, tol)
    p = -div(f, stencil, sign=-1)
    q = div(rotate2d(f), stencil, sign=1)
    gp = grad(p, stencil)
    rot = rotate2d(grad(q, stencil, sign=-1))
    unorm2 = inner(u, u, h, 2)
    res = norm(domain.constrain(u - gp - rot), h, 2)
    return HelmholtzResult2D(
        p, q, f, gp, rot, _relative(res, math.sqrt(unorm2)), _relative(abs(inner(gp, rot, h, 2)), unorm2), its
    )


def decompose3d(u: np.ndarray, domain: DomainMask, stencil: StencilWeights, tol: float = 1e-10) -> HelmholtzResult3D:
    if stencil.d != 3:
        raise ValueError("decompose3d needs d = 3")
    _check_input(u, domain, 3)
    h = stencil.torus.h
    f, its = _laplace_inverse(u, domain, stencil, tol)
    p = -div(f, stencil, sign=-1)
    v = curl(f, stencil, sign=1)
    gp = grad(p, stencil)
    rot = curl(v, stencil, sign=-1)
    unorm2 = inner(u, u, h, 3)
    res = norm(domain.constrain(u - gp - rot), h, 3)
    dv = div(v, stencil, sign=1)
    vnorm = norm(v, h, 3)
    return HelmholtzResult3D(
        p, v, f, gp, rot,
        _relative(res, math.sqrt(unorm2)),
        _relative(abs(inner(gp, rot, h, 3)), unorm2),
        _relative(norm(dv, h, 3), vnorm),
        its,
    )
