"""Half-ball gradient, divergence and curl on the torus.

Field layout: a scalar field has shape ``grid``; a field with ``N`` components has
shape ``(N, *grid)``; a matrix field has shape ``(d, N, *grid)``.  The leading
axis of a gradient output (and of a divergence input) is the direction index.

Two backends are available.  ``"direct"`` sums over stencil offsets in a fixed
order and is bitwise reproducible.  ``"fft"`` applies the exact discrete
symbol as a Fourier multiplier.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from .stencil import StencilWeights

_DIRECT_LIMIT = 400
_workers = 1


def set_threads(n: int) -> None:
    """Worker count for FFT evaluations."""
    global _workers
    _workers = max(1, int(n))


def inner(a: np.ndarray, b: np.ndarray, h: float, d: int) -> float:
    """Lattice inner product  h^d * sum(a * b)."""
    return float(np.vdot(a, b).real) * h**d


def norm(a: np.ndarray, h: float, d: int) -> float:
    return float(np.sqrt(inner(a, a, h, d)))


def _grid_axes(arr: np.ndarray, d: int) -> tuple[int, ...]:
    return tuple(range(arr.ndim - d, arr.ndim))


def _shift(arr: np.ndarray, z, d: int) -> np.ndarray:
    """``arr(x + z)`` on the torus."""
    return np.roll(arr, shift=tuple(-int(k) for k in z), axis=_grid_axes(arr, d))


def _pick_backend(stencil: StencilWeights, backend: str) -> str:
    if backend == "auto":
        return "direct" if stencil.cells <= _DIRECT_LIMIT else "fft"
    if backend not in ("direct", "fft"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend


def _check_scalar_or_vector(u: np.ndarray, stencil: StencilWeights) -> None:
    d = stencil.d
    if u.shape[u.ndim - d:] != stencil.torus.shape or u.ndim not in (d, d + 1):
        raise ValueError(f"expected a scalar or vector field on grid {stencil.torus.shape}, got shape {u.shape}")


def _check_direction_leading(v: np.ndarray, stencil: StencilWeights) -> None:
    d = stencil.d
    if v.ndim not in (d + 1, d + 2) or v.shape[0] != d or v.shape[v.ndim - d:] != stencil.torus.shape:
        raise ValueError(f"expected a field with leading axis {d} on grid {stencil.torus.shape}, got shape {v.shape}")


def _oriented(stencil: StencilWeights, sign: int) -> StencilWeights:
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return stencil if sign == 1 else stencil.flipped()


# ---------------------------------------------------------------------------
# discrete symbol


def discrete_symbol(stencil: StencilWeights, exact: bool = False) -> np.ndarray:
    """lambda_h(k) = sum_z beta(z) (exp(2 pi i k.z / n) - 1), shape ``(d, *n)`` in FFT order.

    ``exact=True`` evaluates the finite sum directly; otherwise the sum is
    formed with one inverse FFT of the placed weights.  In both cases
    ``lambda_h(0) = 0`` and ``lambda_h(-k) = conj(lambda_h(k))`` hold exactly.
    """
    torus = stencil.torus
    cache = stencil.__dict__.setdefault("_symbol_cache", {})
    if exact in cache:
        return cache[exact]
    d, shape = torus.d, torus.shape
    if exact:
        lam = np.zeros((d, *shape), dtype=complex)
        ks = [np.fft.fftfreq(n) * n for n in shape]
        for z, b in zip(stencil.offsets, stencil.beta):
            phase = np.ones(shape, dtype=complex)
            for axis in range(d):
                e = np.exp(2j * np.pi * ks[axis] * z[axis] / shape[axis])
                phase = phase * e.reshape([-1 if a == axis else 1 for a in range(d)])
            lam += b.reshape(d, *([1] * d)) * (phase - 1.0)
    else:
        placed = stencil.kernel_array()
        mu = sfft.ifftn(placed, axes=tuple(range(1, d + 1)), workers=_workers) * torus.size
        lam = mu - stencil.c_nu.reshape(d, *([1] * d))
    lam[(slice(None),) + (0,) * d] = 0.0
    mirror = lam[(slice(None),) + tuple(np.s_[::-1] for _ in range(d))]
    mirror = np.roll(mirror, 1, axis=tuple(range(1, d + 1)))
    lam = 0.5 * (lam + np.conj(mirror))
    cache[exact] = lam
    return lam


def _fft(arr: np.ndarray, d: int) -> np.ndarray:
    return sfft.fftn(arr, axes=_grid_axes(arr, d), workers=_workers)


def _ifft_real(arr: np.ndarray, d: int) -> np.ndarray:
    return sfft.ifftn(arr, axes=_grid_axes(arr, d), workers=_workers).real


def _expand(lam: np.ndarray, extra: int) -> np.ndarray:
    """Insert ``extra`` singleton axes after the direction axis."""
    return lam.reshape(lam.shape[0], *([1] * extra), *lam.shape[1:])


# ---------------------------------------------------------------------------
# fixed-direction operators


def grad(u: np.ndarray, stencil: StencilWeights, sign: int = 1, backend: str = "auto") -> np.ndarray:
    """Half-ball gradient  G u(x) = sum_z beta(z) (u(x+z) - u(x)); ``sign=-1`` uses direction ``-nu``."""
    _check_scalar_or_vector(u, stencil)
    st = _oriented(stencil, sign)
    d = st.d
    if _pick_backend(st, backend) == "fft":
        lam = discrete_symbol(st)
        uh = _fft(u, d)
        return _ifft_real(_expand(lam, u.ndim - d) * uh[None], d)
    out = np.zeros((d, *u.shape))
    for z, b in zip(st.offsets, st.beta):
        diff = _shift(u, z, d) - u
        for i in range(d):
            if b[i] != 0.0:
                out[i] += b[i] * diff
    return out


def div(v: np.ndarray, stencil: StencilWeights, sign: int = -1, backend: str = "auto", method: str = "adjoint") -> np.ndarray:
    """Half-ball divergence in direction ``sign * nu``.

    ``method="adjoint"`` builds it as the negative lattice transpose of the
    gradient in the opposite direction, which makes integration by parts hold
    to roundoff.  ``method="pairwise"`` evaluates the equivalent pairwise form
    sum_z z/|z| . (chi(z) v(x+z) + chi(-z) v(x)) w_h(z) h^d independently, as a
    cross-check.  ``method="direct"`` sums beta(z) . (v(x+z) - v(x)).
    """
    _check_direction_leading(v, stencil)
    d = stencil.d
    if _pick_backend(stencil, backend) == "fft":
        lam = discrete_symbol(stencil)
        if sign == -1:
            lam = -np.conj(lam)
        vh = _fft(v, d)
        return _ifft_real(np.sum(_expand(lam, v.ndim - d - 1) * vh, axis=0), d)
    out = np.zeros(v.shape[1:])
    if method == "adjoint":
        other = _oriented(stencil, -sign)
        for z, b in zip(other.offsets, other.beta):
            back = _shift(v, -z, d) - v
            for i in range(d):
                if b[i] != 0.0:
                    out -= b[i] * back[i]
    elif method == "direct":
        st = _oriented(stencil, sign)
        for z, b in zip(st.offsets, st.beta):
            diff = _shift(v, z, d) - v
            for i in range(d):
                if b[i] != 0.0:
                    out += b[i] * diff[i]
    elif method == "pairwise":
        st = _oriented(stencil, sign)
        for z, e, m, f in zip(st.offsets, st.unit, st.mass, st.factor):
            ahead = _shift(v, z, d)
            for i in range(d):
                if e[i] != 0.0:
                    out += (e[i] * m) * (f * ahead[i] + (1.0 - f) * v[i])
    else:
        raise ValueError(f"unknown divergence method {method!r}")
    return out


def _cross_lambda(lam: np.ndarray, vh: np.ndarray) -> np.ndarray:
    return np.stack([
        lam[1] * vh[2] - lam[2] * vh[1],
        lam[2] * vh[0] - lam[0] * vh[2],
        lam[0] * vh[1] - lam[1] * vh[0],
    ])


def curl(v: np.ndarray, stencil: StencilWeights, sign: int = 1, backend: str = "auto") -> np.ndarray:
    """Half-ball curl (d = 3)  C v(x) = sum_z beta(z) x (v(x+z) - v(x))."""
    if stencil.d != 3:
        raise ValueError("curl is defined for d = 3 only")
    _check_direction_leading(v, stencil)
    if v.ndim != 4:
        raise ValueError("curl acts on vector fields of shape (3, *grid)")
    st = _oriented(stencil, sign)
    if _pick_backend(st, backend) == "fft":
        lam = discrete_symbol(st)
        return _ifft_real(_cross_lambda(lam, _fft(v, 3)), 3)
    out = np.zeros_like(v, dtype=float)
    for z, b in zip(st.offsets, st.beta):
        diff = _shift(v, z, 3) - v
        out[0] += b[1] * diff[2] - b[2] * diff[1]
        out[1] += b[2] * diff[0] - b[0] * diff[2]
        out[2] += b[0] * diff[1] - b[1] * diff[0]
    return out


def vector_laplacian(u: np.ndarray, stencil: StencilWeights, backend: str = "auto") -> np.ndarray:
    """L u = D^{-nu} G^{nu} u (negative semidefinite)."""
    _check_scalar_or_vector(u, stencil)
    d = stencil.d
    if _pick_backend(stencil, backend) == "fft":
        lam = discrete_symbol(stencil)
        weight = -np.sum(np.abs(lam) ** 2, axis=0)
        return _ifft_real(weight * _fft(u, d), d)
    return div(grad(u, stencil, backend="direct"), stencil, sign=-1, backend="direct")


def rotate2d(v: np.ndarray) -> np.ndarray:
    """J v with J = [[0, 1], [-1, 0]], applied as a signed permutation."""
    return np.stack([v[1], -v[0]])


# ---------------------------------------------------------------------------
# variable-direction operators


def _pointwise_factors(z, n_field: np.ndarray) -> np.ndarray:
    """chi_{n(x)}(z) for every lattice point x."""
    dots = np.tensordot(np.asarray(z, dtype=float), n_field, axes=(0, 0))
    tol = 1e-12 * float(np.linalg.norm(z))
    return np.where(dots > tol, 1.0, np.where(dots < -tol, 0.0, 0.5))


def unit_field_from_velocity(b: np.ndarray, fallback) -> np.ndarray:
    """n = -b / |b| where b is nonzero, ``fallback`` elsewhere."""
    mag = np.sqrt(np.sum(b * b, axis=0))
    fb = np.asarray(fallback, dtype=float).reshape(-1, *([1] * (b.ndim - 1)))
    safe = np.where(mag > 0, mag, 1.0)
    return np.where(mag > 0, -b / safe, fb)


def _check_unit_field(n_field: np.ndarray, stencil: StencilWeights) -> None:
    _check_direction_leading(n_field, stencil)
    mag = np.sqrt(np.sum(n_field**2, axis=0))
    if np.any(np.abs(mag - 1) > 1e-12):
        raise ValueError("direction field must have unit length everywhere")


def grad_var_dir(u: np.ndarray, n_field: np.ndarray, stencil: StencilWeights) -> np.ndarray:
    """Gradient with the half-space chosen pointwise by n(x)."""
    _check_scalar_or_vector(u, stencil)
    _check_unit_field(n_field, stencil)
    d = stencil.d
    out = np.zeros((d, *u.shape))
    for z, e, m in zip(stencil.offsets, stencil.unit, stencil.mass):
        f = _pointwise_factors(z, n_field)
        term = f * (_shift(u, z, d) - u)
        for i in range(d):
            if e[i] != 0.0:
                out[i] += (e[i] * m) * term
    return out


def div_var_dir(v: np.ndarray, n_field: np.ndarray, stencil: StencilWeights, sign: int = -1) -> np.ndarray:
    """Divergence for the direction field ``sign * n``.

    D^{n} v(x) = sum_z z/|z| . (chi_{n(x+z)}(z) v(x+z) + chi_{n(x)}(-z) v(x)) w_h(z) h^d.
    """
    _check_direction_leading(v, stencil)
    _check_unit_field(n_field, stencil)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    d = stencil.d
    out = np.zeros(v.shape[1:])
    for z, e, m in zip(stencil.offsets, stencil.unit, stencil.mass):
        f_here = _pointwise_factors(z, n_field)
        f_there = _shift(f_here, z, d)
        if sign == 1:
            a, c = f_there, 1.0 - f_here
        else:
            a, c = 1.0 - f_there, f_here
        ahead = _shift(v, z, d)
        for i in range(d):
            if e[i] != 0.0:
                out += (e[i] * m) * (a * ahead[i] + c * v[i])
    return out


# ---------------------------------------------------------------------------
# product rule


def product_rule_remainder(phi: np.ndarray, field: np.ndarray, stencil: StencilWeights) -> np.ndarray:
    """Remainder S in  D^{-nu}(phi F) = phi D^{-nu} F + G^{nu} phi . F + S.

    S(x) = sum_z z/|z| . (chi(-z) F(x+z) - chi(z) F(x)) (phi(x+z) - phi(x)) w_h(z) h^d.
    """
    _check_direction_leading(field, stencil)
    d = stencil.d
    out = np.zeros(field.shape[1:])
    for z, e, m, f in zip(stencil.offsets, stencil.unit, stencil.mass, stencil.factor):
        dphi = _shift(phi, z, d) - phi
        ahead = _shift(field, z, d)
        for i in range(d):
            if e[i] != 0.0:
                out += (e[i] * m) * ((1.0 - f) * ahead[i] - f * field[i]) * dphi
    return out
