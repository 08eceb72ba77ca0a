"""Embedding torus, box domains with interaction collars, and the half-space factor."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

TIE_TOL = 1e-12


class SizingError(ValueError):
    """The domain plus its interaction collar does not fit on the torus."""


@dataclass(frozen=True)
class Torus:
    """Periodic lattice with ``n[i]`` points of spacing ``h`` along axis ``i``."""

    n: tuple[int, ...]
    h: float

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(k) for k in self.n))
        if not 1 <= len(self.n) <= 3:
            raise ValueError("torus dimension must be 1, 2 or 3")
        if min(self.n) < 4:
            raise ValueError("need at least 4 points per axis")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")

    @classmethod
    def cube(cls, d: int, n: int, h: float) -> "Torus":
        return cls((n,) * d, h)

    @property
    def d(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def size(self) -> int:
        return math.prod(self.n)

    @property
    def extent(self) -> tuple[float, ...]:
        return tuple(k * self.h for k in self.n)

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    def coordinates(self) -> np.ndarray:
        """Physical coordinates ``i * h`` of every lattice point, shape ``(d, *n)``."""
        axes = [np.arange(k) * self.h for k in self.n]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    def frequencies(self) -> np.ndarray:
        """Physical frequencies ``k / (n h)`` in FFT order, shape ``(d, *n)``."""
        axes = [np.fft.fftfreq(k, d=self.h) for k in self.n]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    def to_json(self) -> dict:
        return {"n": list(self.n), "h": self.h}

    @classmethod
    def from_json(cls, data: dict) -> "Torus":
        n = data["n"]
        if isinstance(n, int):
            raise ValueError("torus 'n' must list the points per axis")
        return cls(tuple(n), float(data["h"]))


def unit_direction(nu) -> np.ndarray:
    """Normalise a direction vector; raises on the zero vector."""
    v = np.asarray(nu, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("direction must be nonzero")
    if abs(norm - 1) <= 1e-14:
        return v
    return v / norm


def axis_direction(d: int, axis: int = 0, sign: int = 1) -> np.ndarray:
    e = np.zeros(d)
    e[axis] = float(sign)
    return e


def halfspace_factor(z, nu) -> float:
    """Lattice half-space indicator: 1 on the open positive side, 0 on the negative side, 1/2 on the hyperplane."""
    z = np.asarray(z, dtype=float)
    if not np.any(z):
        raise ValueError("offset z must be nonzero")
    dot = float(z @ np.asarray(nu, dtype=float))
    tol = TIE_TOL * float(np.linalg.norm(z))
    if dot > tol:
        return 1.0
    if dot < -tol:
        return 0.0
    return 0.5


def halfspace_factors(offsets: np.ndarray, nu) -> np.ndarray:
    """Vectorised ``halfspace_factor`` over an ``(m, d)`` array of offsets."""
    offsets = np.asarray(offsets, dtype=float)
    dots = offsets @ np.asarray(nu, dtype=float)
    tol = TIE_TOL * np.linalg.norm(offsets, axis=1)
    return np.where(dots > tol, 1.0, np.where(dots < -tol, 0.0, 0.5))


@dataclass(frozen=True, eq=False)
class DomainMask:
    """Interior lattice points of a domain and the collar reached by the stencil."""

    torus: Torus
    interior: np.ndarray
    collar: np.ndarray
    origin_offset: tuple[int, ...]
    stencil_radius: int

    @property
    def count(self) -> int:
        return int(self.interior.sum())

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.interior.ravel())

    def restrict(self, values: np.ndarray) -> np.ndarray:
        """Interior values of a field with any number of leading component axes."""
        lead = values.shape[: values.ndim - self.torus.d]
        return values.reshape(*lead, -1)[..., self.indices]

    def extend(self, interior_values: np.ndarray) -> np.ndarray:
        """Embed interior values in a full-torus field that vanishes elsewhere."""
        lead = interior_values.shape[:-1]
        out = np.zeros((*lead, self.torus.size))
        out[..., self.indices] = interior_values
        return out.reshape(*lead, *self.torus.shape)

    def constrain(self, values: np.ndarray) -> np.ndarray:
        """Zero a field outside the interior."""
        return np.where(self.interior, values, 0.0)

    def is_connected(self) -> bool:
        labels, count = ndimage.label(self.interior)
        return count == 1

    def to_csv(self, path) -> None:
        coords = self.torus.coordinates().reshape(self.torus.d, -1)[:, self.indices].T
        header = ",".join(f"x{i + 1}" for i in range(self.torus.d))
        np.savetxt(path, coords, delimiter=",", header=header, comments="", fmt="%.17g")


def _collar(interior: np.ndarray, radius: int) -> np.ndarray:
    """Points outside the interior within ``radius`` cells (max-norm) of it, periodic."""
    if radius == 0 or not interior.any():
        return np.zeros_like(interior)
    footprint = np.ones((2 * radius + 1,) * interior.ndim)
    reach = ndimage.convolve(interior.astype(float), footprint, mode="wrap") > 0.5
    return reach & ~interior


def build_box_domain(torus: Torus, lo, hi, stencil_radius: int) -> DomainMask:
    """Interior = lattice points strictly inside the box; collar = points within ``stencil_radius`` cells.

    Raises ``SizingError`` when the box plus two collars exceeds the torus extent.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != (torus.d,) or hi.shape != (torus.d,):
        raise ValueError("box corners must have one entry per axis")
    if np.any(hi <= lo):
        raise ValueError("box must have positive extent")
    if stencil_radius < 0:
        raise ValueError("stencil radius must be >= 0")
    need = (hi - lo) + 2 * stencil_radius * torus.h
    have = np.asarray(torus.extent)
    if np.any(need > have * (1 + 1e-12)):
        raise SizingError(
            f"box {lo.tolist()}..{hi.tolist()} with collar {stencil_radius} cells needs torus extent "
            f"{need.tolist()}, torus has {have.tolist()}"
        )
    eps = 1e-9 * torus.h
    inside = []
    for axis in range(torus.d):
        x = np.arange(torus.n[axis]) * torus.h
        inside.append((x > lo[axis] + eps) & (x < hi[axis] - eps))
    interior = inside[0]
    for axis in range(1, torus.d):
        interior = np.multiply.outer(interior, inside[axis])
    interior = np.asarray(interior, dtype=bool)
    collar = _collar(interior, stencil_radius)
    origin = tuple(int(math.floor(v / torus.h + 1e-9)) + 1 for v in lo)
    return DomainMask(torus, interior, collar, origin, stencil_radius)


def mask_from_array(torus: Torus, interior: np.ndarray, stencil_radius: int) -> DomainMask:
    """Domain from a boolean voxel mask; no smoothness of the boundary is assumed."""
    interior = np.asarray(interior, dtype=bool)
    if interior.shape != torus.shape:
        raise ValueError("mask shape does not match the torus")
    idx = np.argwhere(interior)
    if idx.size:
        span = idx.max(axis=0) - idx.min(axis=0) + 1
        if np.any(span + 2 * stencil_radius > np.asarray(torus.n)):
            raise SizingError("mask plus collar wraps around the torus")
        origin = tuple(int(v) for v in idx.min(axis=0))
    else:
        origin = (0,) * torus.d
    return DomainMask(torus, interior, _collar(interior, stencil_radius), origin, stencil_radius)


def domain_from_json(data: dict, stencil_radius: int) -> DomainMask:
    torus = Torus.from_json(data["torus"])
    box = data["box"]
    return build_box_domain(torus, box["lo"], box["hi"], stencil_radius)
