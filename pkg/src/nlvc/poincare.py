"""Discrete Poincare constant of the constrained half-ball gradient.

For a domain mask the constant is

    Pi_h = sup ||u|| / ||G u||  over fields vanishing outside the interior,

which is ``1 / sigma_min`` of the gradient restricted to interior unknowns.
It is found by inverse power iteration on ``A = G^T G`` with inner CG solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import KernelSpec
from .krylov import ConvergenceError, cg
from .lattice import DomainMask, Torus, build_box_domain
from .operators import grad, vector_laplacian
from .stencil import StencilWeights, build_stencil

DEFAULT_SEED = 0xA11CE


class PoincareBreakdown(RuntimeError):
    """The constrained gradient is numerically singular."""


@dataclass
class PoincareEstimate:
    Pi_h: float
    sigma_min: float
    iterations: int
    residual: float
    refinement_history: list[tuple[float, float]] = field(default_factory=list)
    inner_iterations: int = 0

    def to_json(self) -> dict:
        return {
            "Pi_h": self.Pi_h,
            "sigma_min": self.sigma_min,
            "iterations": self.iterations,
            "residual": self.residual,
            "history": [list(p) for p in self.refinement_history],
        }


def normal_operator(domain: DomainMask, stencil: StencilWeights, backend: str = "auto"):
    """x -> restrict(G^T G extend(x)) on interior unknowns (scalar fields)."""

    def apply(x: np.ndarray) -> np.ndarray:
        u = domain.extend(x)
        return -domain.restrict(vector_laplacian(u, stencil, backend=backend))

    return apply


def gradient_matrix(domain: DomainMask, stencil: StencilWeights) -> np.ndarray:
    """Dense gradient restricted to interior columns; rows cover every component at every torus point."""
    cols = []
    for j in range(domain.count):
        e = np.zeros(domain.count)
        e[j] = 1.0
        cols.append(grad(domain.extend(e), stencil, backend="direct").ravel())
    return np.stack(cols, axis=1)


def dense_poincare(domain: DomainMask, stencil: StencilWeights) -> float:
    """Reference value from the SVD of the assembled constrained gradient."""
    if domain.count == 0:
        raise ValueError("domain has no interior points")
    if domain.count > 4000:
        raise ValueError("dense reference is limited to small interiors")
    sv = np.linalg.svd(gradient_matrix(domain, stencil), compute_uv=False)
    return 1.0 / float(sv[-1])


def estimate_poincare(domain: DomainMask, stencil: StencilWeights, tol: float = 1e-12, seed: int = DEFAULT_SEED,
                      max_iter: int = 500, backend: str = "auto") -> PoincareEstimate:
    """Inverse power iteration for the smallest eigenvalue of G^T G on interior unknowns.

    Stops when the Rayleigh quotient changes by less than ``tol`` relatively.
    The inner CG tolerance follows the outer progress so early sweeps stay cheap.
    """
    if domain.count == 0:
        raise ValueError("domain has no interior points")
    apply = normal_operator(domain, stencil, backend)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(domain.count)
    x /= np.linalg.norm(x)
    mu = float(x @ apply(x))
    change, inner_total = 1.0, 0
    it = 0
    for it in range(1, max_iter + 1):
        inner_tol = max(min(1e-2, 1e-2 * change), 1e-15)
        try:
            y, info = cg(apply, x, rtol=inner_tol)
        except ConvergenceError as exc:
            raise PoincareBreakdown(f"inner solve broke down: {exc}") from exc
        inner_total += info.iterations
        ny = float(np.linalg.norm(y))
        if not math.isfinite(ny) or ny == 0:
            raise PoincareBreakdown("inverse iteration produced a degenerate vector")
        x = y / ny
        ax = apply(x)
        mu_new = float(x @ ax)
        if mu_new <= 0:
            raise PoincareBreakdown("constrained gradient is numerically singular")
        change = abs(mu_new - mu) / mu_new
        mu = mu_new
        if change < tol:
            break
    residual = float(np.linalg.norm(ax - mu * x))
    sigma = math.sqrt(mu)
    return PoincareEstimate(1.0 / sigma, sigma, it, residual, inner_iterations=inner_total)


def spot_check(domain: DomainMask, stencil: StencilWeights, Pi_h: float, samples: int = 100, seed: int = DEFAULT_SEED) -> float:
    """Largest ratio ||u|| / (Pi_h ||G u||) over random constrained fields; at most 1 up to roundoff."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        u = domain.extend(rng.standard_normal(domain.count))
        g = grad(u, stencil)
        worst = max(worst, float(np.linalg.norm(u) / (Pi_h * np.linalg.norm(g))))
    return worst


def torus_for_box(lo, hi, h: float, reach: float, d: int) -> Torus:
    """Smallest even torus holding the box plus a collar of physical width ``reach`` on each side."""
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (d,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (d,))
    cells = int(math.ceil(float(np.max(hi - lo)) / h - 1e-9)) + 2 * int(math.ceil(reach / h - 1e-9)) + 2
    cells += cells % 2
    return Torus((cells,) * d, h)


def box_problem(spec: KernelSpec, lo, hi, h: float, nu=None, radius: float | None = None):
    """Torus, stencil and box domain sized so the collar never wraps."""
    d = spec.d
    if nu is None:
        nu = np.eye(d)[0]
    reach = radius if radius is not None else spec.delta
    if not math.isfinite(reach):
        raise ValueError("infinite-support kernels need an explicit truncation radius")
    torus = torus_for_box(lo, hi, h, reach, d)
    stencil = build_stencil(spec, torus, nu, radius=reach)
    domain = build_box_domain(torus, lo, hi, stencil.radius_cells)
    return torus, stencil, domain


def refinement_study(spec: KernelSpec, lo, hi, h_list, nu=None, radius: float | None = None, tol: float = 1e-10) -> tuple[list[tuple[float, float]], float]:
    """Pi_h on a sequence of grids; returns the history and the largest relative change between levels."""
    if len(h_list) < 3:
        raise ValueError("a refinement study needs at least three grid levels")
    history = []
    for h in h_list:
        _, stencil, domain = box_problem(spec, lo, hi, h, nu, radius)
        if domain.count == 0:
            raise ValueError(f"grid spacing {h} leaves no interior points")
        history.append((float(h), estimate_poincare(domain, stencil, tol=tol).Pi_h))
    values = [p for _, p in history]
    change = max(abs(b - a) / abs(a) for a, b in zip(values[:-1], values[1:]))
    return history, change
