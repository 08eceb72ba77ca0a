"""Lattice weights for the half-ball operators.

For an offset ``z`` (integer lattice units) the weight is

    beta(z) = factor(z, nu) * z / |z| * w_h(z) * h**d,

where ``w_h(z)`` is the average of the kernel over the lattice cell centred at
``z h``.  The origin cell is skipped because every operator multiplies the
kernel by a difference that vanishes there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .kernels import KernelSpec, breakpoints, eval_radial, hemisphere_factor, is_singular, radial_integral
from .lattice import Torus, halfspace_factors, unit_direction

_GAUSS_ORDER = 6
_MAX_DEPTH = 5


def _tensor_rule(d: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x, w = 0.5 * x, 0.5 * w
    pts = np.stack(np.meshgrid(*([x] * d), indexing="ij"), axis=-1).reshape(-1, d)
    wts = np.prod(np.stack(np.meshgrid(*([w] * d), indexing="ij"), axis=-1).reshape(-1, d), axis=1)
    return pts, wts


def _radius_range(centers: np.ndarray, half: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    near = np.maximum(np.abs(centers) - half[:, None], 0.0)
    far = np.abs(centers) + half[:, None]
    return np.linalg.norm(near, axis=1), np.linalg.norm(far, axis=1)


def cell_averages(spec: KernelSpec, offsets: np.ndarray, h: float, order: int = _GAUSS_ORDER, max_depth: int = _MAX_DEPTH) -> np.ndarray:
    """Average of ``w`` over the cells ``z h + [-h/2, h/2]^d``.

    Cells cut by a radial breakpoint of the profile, and cells where a
    singular profile varies strongly, are split recursively before a tensor
    Gauss rule is applied.
    """
    d = spec.d
    pts, wts = _tensor_rule(d, order)
    kinks = np.asarray(breakpoints(spec))
    singular = is_singular(spec)

    offsets = np.asarray(offsets, dtype=float)
    owner = np.arange(len(offsets))
    centers = offsets * h
    half = np.full(len(offsets), 0.5 * h)
    totals = np.zeros(len(offsets))
    for depth in range(max_depth + 1):
        if len(centers) == 0:
            break
        rmin, rmax = _radius_range(centers, half)
        split = np.zeros(len(centers), dtype=bool)
        if depth < max_depth:
            if kinks.size:
                split |= np.any((kinks[None, :] > rmin[:, None]) & (kinks[None, :] < rmax[:, None]), axis=1)
            if singular:
                split |= rmax > 1.5 * np.maximum(rmin, 1e-300)
        keep = ~split
        if np.any(keep):
            c, s, o = centers[keep], half[keep], owner[keep]
            nodes = c[:, None, :] + (2 * s)[:, None, None] * pts[None, :, :]
            vals = eval_radial(spec, np.linalg.norm(nodes, axis=2))
            contrib = (vals @ wts) * (2 * s / h) ** d
            np.add.at(totals, o, contrib)
        if not np.any(split):
            break
        c, s, o = centers[split], half[split], owner[split]
        shifts = (np.indices((2,) * d).reshape(d, -1).T - 0.5)
        centers = (c[:, None, :] + (s[:, None, None]) * shifts[None, :, :]).reshape(-1, d)
        half = np.repeat(s / 2, len(shifts))
        owner = np.repeat(o, len(shifts))
    return totals


def stencil_offsets(d: int, h: float, radius: float) -> np.ndarray:
    """Nonzero integer offsets whose cell meets the open ball of physical ``radius``."""
    r = int(math.ceil(radius / h + 0.5))
    grid = np.indices((2 * r + 1,) * d).reshape(d, -1).T - r
    grid = grid[np.any(grid != 0, axis=1)]
    near = np.linalg.norm(np.maximum(np.abs(grid) - 0.5, 0.0), axis=1) * h
    return grid[near < radius * (1 - 1e-12)]


@dataclass(frozen=True, eq=False)
class StencilWeights:
    """Half-ball weights on a torus for a fixed direction ``nu``.

    ``mass[k] = w_h(z_k) h^d`` and ``unit[k] = z_k / |z_k|`` are kept separately so
    that variable-direction operators can reuse them with per-point factors.
    """

    torus: Torus
    kernel: KernelSpec
    nu: np.ndarray
    offsets: np.ndarray
    unit: np.ndarray
    mass: np.ndarray
    factor: np.ndarray
    trunc_radius: float
    tail_correction: float
    cells: int = field(default=0)

    @property
    def d(self) -> int:
        return self.torus.d

    @cached_property
    def beta(self) -> np.ndarray:
        return (self.factor * self.mass)[:, None] * self.unit

    @cached_property
    def c_nu(self) -> np.ndarray:
        return self.beta.sum(axis=0)

    @property
    def c_hat_discrete(self) -> float:
        return float(self.c_nu @ self.nu)

    @property
    def m1_discrete(self) -> float:
        """Lattice first moment  sum |z| w_h(z) h^d  over |z| <= 1."""
        r = np.linalg.norm(self.offsets, axis=1) * self.torus.h
        inside = r <= 1 + 1e-12
        return float(np.sum(r[inside] * self.mass[inside]))

    @property
    def radius_cells(self) -> int:
        return int(np.max(np.abs(self.offsets))) if len(self.offsets) else 0

    def flipped(self) -> "StencilWeights":
        """Weights for the opposite direction ``-nu``."""
        return self._flipped

    @cached_property
    def _flipped(self) -> "StencilWeights":
        return StencilWeights(
            self.torus, self.kernel, -self.nu, self.offsets, self.unit, self.mass,
            1.0 - self.factor, self.trunc_radius, self.tail_correction, self.cells,
        )

    def with_direction(self, nu) -> "StencilWeights":
        nu = unit_direction(nu)
        return StencilWeights(
            self.torus, self.kernel, nu, self.offsets, self.unit, self.mass,
            halfspace_factors(self.offsets, nu), self.trunc_radius, self.tail_correction, self.cells,
        )

    def corrupted(self, index: int = 0) -> "StencilWeights":
        """Copy whose weight at one offset has the wrong sign; a negative control for adjointness checks."""
        mass = self.mass.copy()
        k = int(np.flatnonzero(self.factor == 1.0)[index])
        mass[k] = -mass[k]
        return StencilWeights(
            self.torus, self.kernel, self.nu, self.offsets, self.unit, mass,
            self.factor, self.trunc_radius, self.tail_correction, self.cells,
        )

    def kernel_array(self) -> np.ndarray:
        """``beta`` placed on the torus at ``z mod n``, shape ``(d, *n)``."""
        out = np.zeros((self.d, *self.torus.shape))
        idx = tuple((self.offsets % np.asarray(self.torus.n)).T)
        for i in range(self.d):
            np.add.at(out[i], idx, self.beta[:, i])
        return out


def build_stencil(spec: KernelSpec, torus: Torus, nu, radius: float | None = None) -> StencilWeights:
    """Assemble the half-ball weights of ``spec`` on ``torus`` for direction ``nu``.

    ``radius`` truncates infinite-support kernels (physical units); it defaults
    to the largest radius that does not alias on the torus.  Compact kernels
    use their horizon unless a smaller ``radius`` is given.
    """
    if spec.d != torus.d:
        raise ValueError(f"kernel dimension {spec.d} does not match torus dimension {torus.d}")
    nu = unit_direction(nu)
    if nu.shape != (torus.d,):
        raise ValueError("direction has the wrong length")
    h = torus.h
    max_radius = (min(torus.n) // 2 - 1) * h
    if radius is None:
        radius = spec.delta if spec.compact else max_radius
    radius = min(radius, spec.delta)
    offsets = stencil_offsets(torus.d, h, radius)
    if offsets.size and np.any(2 * np.abs(offsets).max(axis=0) >= np.asarray(torus.n)):
        raise ValueError(
            f"stencil of radius {radius:g} aliases on a torus with {torus.n} points; enlarge the torus"
        )

    key = np.sort(np.abs(offsets), axis=1)
    uniq, inverse = np.unique(key, axis=0, return_inverse=True)
    # cells straddling the truncation sphere keep only the part inside it
    support = spec if radius >= spec.delta else replace(spec, delta=radius)
    avg = cell_averages(support, uniq, h)[inverse.ravel()]

    lengths = np.linalg.norm(offsets, axis=1)
    unit = offsets / lengths[:, None]
    mass = avg * h**torus.d
    tail = 0.0
    if radius < spec.delta:
        tail = hemisphere_factor(spec.d) * radial_integral(spec, spec.d - 1, radius, spec.delta)
    return StencilWeights(
        torus, spec, nu, offsets, unit, mass, halfspace_factors(offsets, nu), float(radius), float(tail), len(offsets)
    )

