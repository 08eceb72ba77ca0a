"""Fourier symbols of the half-ball gradient.

The continuum symbol is

    lambda(xi) = int_{z . nu >= 0} z/|z| w(|z|) (exp(2 pi i xi . z) - 1) dz.

Writing ``z = r * eta`` it factors into an angular integral of the radial
transform

    F_d(k) = int_0^inf r**(d-1) w(r) (exp(2 pi i k r) - 1) dr,

evaluated at ``k = xi . eta``.  ``F_d`` is computed panel-wise: Gauss-Jacobi on
the panel touching the origin (absorbing the power singularity), Gauss-Legendre
elsewhere, and closed forms for pure power-law tails.  The angular integral is
parametrised around ``xi`` so that the only non-smooth points (``k = 0`` and,
in 3D, the edge of the admissible azimuth range) sit at segment ends, where a
polynomial change of variables restores smoothness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, sici

from .kernels import (
    KernelSpec,
    RadialPiece,
    comparison_kernel,
    moments,
    radial_pieces,
    sphere_area,
)
from .stencil import StencilWeights

_PANEL_PHASE = 40.0


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class SymbolSample:
    xi: np.ndarray
    lam: np.ndarray
    Lambda_w: float

    @property
    def re(self) -> np.ndarray:
        return self.lam.real

    @property
    def im(self) -> np.ndarray:
        return self.lam.imag

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.lam))


# ---------------------------------------------------------------------------
# radial transform


@lru_cache(maxsize=64)
def _jacobi(n: int, gamma_: float):
    x, w = roots_jacobi(n, 0.0, gamma_)
    return x, w


@lru_cache(maxsize=64)
def _legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def _expm1i(x: np.ndarray) -> np.ndarray:
    """exp(i x) - 1 without cancellation."""
    return 2j * np.sin(0.5 * x) * np.exp(0.5j * x)


def _node_count(span_phase: float) -> int:
    return int(math.ceil(0.8 * span_phase)) + 24


def _finite_piece(piece: RadialPiece, q: float, a: float, b: float, omega: np.ndarray) -> np.ndarray:
    """int_a^b coef r^q exp(-rate r) (exp(i omega r) - 1) dr for each omega."""
    wmax = float(np.max(np.abs(omega))) if omega.size else 0.0
    out = np.zeros(omega.shape, dtype=complex)
    panel = _PANEL_PHASE / wmax if wmax > 0 else math.inf
    start = a
    if a == 0:
        b0 = min(b, panel, 1.0 if math.isfinite(b) else panel)
        b0 = min(b0, b)
        gam = q if q > -1 else q + 1
        if gam <= -1:
            raise QuadratureError("radial integrand is not integrable at the origin")
        n = _node_count(wmax * b0)
        x, w = _jacobi(n, gam)
        r = 0.5 * b0 * (1 + x)
        scale = (0.5 * b0) ** (gam + 1)
        smooth = piece.coef * np.exp(-piece.rate * r) * r ** (q - gam)
        phase = _expm1i(np.multiply.outer(omega, r))
        out += scale * (phase * (w * smooth)).sum(axis=-1)
        start = b0
    if start >= b:
        return out
    edges = [start]
    while edges[-1] < b:
        nxt = min(b, edges[-1] + panel, 2 * edges[-1])
        edges.append(nxt)
    for lo, hi in zip(edges[:-1], edges[1:]):
        n = _node_count(wmax * (hi - lo))
        x, w = _legendre(n)
        r = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        dens = piece.coef * r**q * np.exp(-piece.rate * r)
        phase = _expm1i(np.multiply.outer(omega, r))
        out += 0.5 * (hi - lo) * (phase * (w * dens)).sum(axis=-1)
    return out


def _infinite_piece(piece: RadialPiece, q: float, omega: np.ndarray) -> np.ndarray:
    """int_a^inf coef r^q exp(-rate r) (exp(i omega r) - 1) dr for q = -1 - alpha, omega >= 0.

    The integral from 0 has the closed form coef Gamma(-alpha) ((rate - i omega)^alpha - rate^alpha);
    the part below ``a`` is removed by quadrature.
    """
    alpha = -1.0 - q
    a, coef, rate = piece.a, piece.coef, piece.rate
    out = np.zeros(omega.shape, dtype=complex)
    pos = omega > 0
    om = omega[pos]
    if math.isclose(alpha, 1.0):
        if rate > 0 or a == 0:
            raise QuadratureError("r^-2 radial density needs a finite start and no tempering")
        x = om * a
        si, ci = sici(x)
        out[pos] = coef * om * (_expm1i(x) / x - (0.5 * np.pi - si) - 1j * ci)
        return out
    if not 0 < alpha < 1:
        raise QuadratureError(f"unsupported tail exponent {alpha}")
    full = coef * math.gamma(-alpha) * ((rate - 1j * om) ** alpha - rate**alpha)
    if a > 0:
        full = full - _finite_piece(RadialPiece(0.0, a, coef, piece.power, rate), q, 0.0, a, om)
    out[pos] = full
    return out


def radial_transform(spec: KernelSpec, k) -> np.ndarray:
    """F_d(k) = int_0^inf r^(d-1) w(r) (exp(2 pi i k r) - 1) dr for an array of real ``k``."""
    k = np.asarray(k, dtype=float)
    flat = k.ravel()
    omega = 2 * np.pi * np.abs(flat)
    total = np.zeros(flat.shape, dtype=complex)
    d = spec.d
    for piece in radial_pieces(spec):
        q = piece.power + d - 1
        a, b = piece.a, piece.b
        if math.isinf(b):
            total += _infinite_piece(piece, q, omega)
        else:
            total += _finite_piece(piece, q, a, b, omega)
    total = np.where(flat < 0, np.conj(total), total)
    return total.reshape(k.shape)


def oscillation_radius(spec: KernelSpec) -> float:
    """Radius setting the oscillation scale of the radial transform."""
    radius = 0.0
    for piece in radial_pieces(spec):
        radius = max(radius, piece.b if math.isfinite(piece.b) else piece.a)
    return max(radius, 1e-3)


# ---------------------------------------------------------------------------
# angular quadrature


@lru_cache(maxsize=32)
def _smooth_rule(n: int):
    """Gauss-Legendre on [0, 1] composed with a degree-7 smoothstep (flat to third order at both ends)."""
    x, w = _legendre(n)
    t = 0.5 * (x + 1)
    s = t**4 * (35 - 84 * t + 70 * t**2 - 20 * t**3)
    ds = 140 * t**3 * (1 - t) ** 3
    return s, 0.5 * w * ds


def _segments(lo: float, hi: float, cuts) -> list[tuple[float, float]]:
    pts = sorted({lo, hi, *[c for c in cuts if lo < c < hi]})
    return [(p, q) for p, q in zip(pts[:-1], pts[1:]) if q - p > 1e-15]


def _angular_nodes(lo: float, hi: float, cuts, rate: float):
    nodes, weights = [], []
    for a, b in _segments(lo, hi, cuts):
        n = 48 + int(math.ceil(1.6 * rate * (b - a)))
        s, w = _smooth_rule(n)
        nodes.append(a + (b - a) * s)
        weights.append((b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _frame(xi_hat: np.ndarray, nu: np.ndarray):
    """Unit vector orthogonal to xi_hat in the plane of (xi_hat, nu), plus cos/sin of their angle."""
    c = float(nu @ xi_hat)
    perp = nu - c * xi_hat
    s = float(np.linalg.norm(perp))
    if s < 1e-14:
        trial = np.zeros_like(xi_hat)
        trial[int(np.argmin(np.abs(xi_hat)))] = 1.0
        perp = trial - (trial @ xi_hat) * xi_hat
        s_dir = perp / np.linalg.norm(perp)
        return s_dir, c, 0.0
    return perp / s, c, s


def _symbol_1d(spec: KernelSpec, nu: float, xi: float) -> complex:
    return complex(nu * radial_transform(spec, np.array([nu * xi]))[0])


def _symbol_2d(spec: KernelSpec, nu: np.ndarray, xi: np.ndarray) -> np.ndarray:
    rho = float(np.linalg.norm(xi))
    xi_hat = xi / rho
    a = np.array([-xi_hat[1], xi_hat[0]])
    psi_nu = math.atan2(float(nu @ a), float(nu @ xi_hat))
    lo, hi = psi_nu - 0.5 * np.pi, psi_nu + 0.5 * np.pi
    cuts = [m * 0.5 * np.pi for m in range(-5, 6, 2)]
    rate = 2 * np.pi * rho * oscillation_radius(spec)
    psi, wts = _angular_nodes(lo, hi, cuts, rate)
    F = radial_transform(spec, rho * np.cos(psi))
    comp_xi = np.sum(wts * np.cos(psi) * F)
    comp_a = np.sum(wts * np.sin(psi) * F)
    return comp_xi * xi_hat + comp_a * a


def _symbol_3d(spec: KernelSpec, nu: np.ndarray, xi: np.ndarray) -> np.ndarray:
    rho = float(np.linalg.norm(xi))
    xi_hat = xi / rho
    a, c0, s0 = _frame(xi_hat, nu)
    cuts = [0.5 * np.pi]
    if s0 > 0:
        psi1 = math.atan2(abs(c0), s0)
        cuts += [psi1, np.pi - psi1]
    rate = 2 * np.pi * rho * oscillation_radius(spec)
    psi, wts = _angular_nodes(0.0, np.pi, cuts, rate)
    A = c0 * np.cos(psi)
    B = s0 * np.sin(psi)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(B > 0, -A / np.where(B > 0, B, 1.0), np.where(A >= 0, -np.inf, np.inf))
    half_width = np.arccos(np.clip(t, -1.0, 1.0))
    F = radial_transform(spec, rho * np.cos(psi))
    sin_psi = np.sin(psi)
    comp_xi = np.sum(wts * sin_psi * 2 * half_width * np.cos(psi) * F)
    comp_a = np.sum(wts * sin_psi * 2 * sin_psi * np.sin(half_width) * F)
    return comp_xi * xi_hat + comp_a * a


def imag_profile(spec: KernelSpec, rho: float) -> float:
    """Scalar profile of the imaginary part, reduced to one angular integral about a fixed axis."""
    d = spec.d
    if rho == 0:
        return 0.0
    if d == 1:
        return float(radial_transform(spec, np.array([rho]))[0].imag)
    rate = 2 * np.pi * rho * oscillation_radius(spec)
    theta, wts = _angular_nodes(0.0, 0.5 * np.pi, [], rate)
    F = radial_transform(spec, rho * np.cos(theta)).imag
    weight = np.cos(theta) * np.sin(theta) ** (d - 2)
    return float(sphere_area(d - 1) * np.sum(wts * weight * F))


def symbol_continuum(spec: KernelSpec, nu, xi) -> SymbolSample:
    """Continuum symbol at one frequency ``xi`` (cycles per unit length)."""
    d = spec.d
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if nu.shape != (d,) or xi.shape != (d,):
        raise ValueError("direction and frequency must have length d")
    rho = float(np.linalg.norm(xi))
    if rho == 0:
        return SymbolSample(xi, np.zeros(d, dtype=complex), 0.0)
    if d == 1:
        lam = np.array([_symbol_1d(spec, float(nu[0]), float(xi[0]))])
    elif d == 2:
        lam = _symbol_2d(spec, nu, xi)
    else:
        lam = _symbol_3d(spec, nu, xi)
    return SymbolSample(xi, lam, imag_profile(spec, rho))


def symbol_bound(spec: KernelSpec, xi) -> float:
    """sqrt(2) * (2 pi M1 |xi| + M2)."""
    mom = moments(spec)
    return math.sqrt(2) * (2 * np.pi * mom.M1 * float(np.linalg.norm(xi)) + mom.M2)


def positivity_witness(spec: KernelSpec, nu, xi) -> float:
    """|Re lambda^{e1}(R^T xi) . e1| for a rotation R taking e1 to nu; strictly positive for xi != 0."""
    d = spec.d
    nu = np.asarray(nu, dtype=float)
    rot = rotation_to(nu)
    e1 = np.zeros(d)
    e1[0] = 1.0
    sample = symbol_continuum(spec, e1, rot.T @ np.asarray(xi, dtype=float))
    return abs(float(sample.re[0]))


def rotation_to(nu: np.ndarray) -> np.ndarray:
    """An orthogonal matrix whose first column is ``nu``."""
    d = len(nu)
    basis = np.eye(d)
    basis[:, 0] = nu
    q, r = np.linalg.qr(basis)
    if q[:, 0] @ nu < 0:
        q[:, 0] = -q[:, 0]
    return q


# ---------------------------------------------------------------------------
# checks built on the continuum symbol


@dataclass(frozen=True)
class EquivarianceReport:
    max_deviation: float
    deviations: np.ndarray


def check_equivariance(spec: KernelSpec, rot, xis, nu=None) -> EquivarianceReport:
    """Compare lambda^{R nu}(xi) with R lambda^{nu}(R^T xi), both by quadrature."""
    rot = np.asarray(rot, dtype=float)
    d = spec.d
    if np.max(np.abs(rot.T @ rot - np.eye(d))) > 1e-14:
        raise ValueError("matrix is not orthogonal")
    if nu is None:
        nu = np.zeros(d)
        nu[0] = 1.0
    nu = np.asarray(nu, dtype=float)
    devs = []
    for xi in np.atleast_2d(xis):
        left = symbol_continuum(spec, rot @ nu, xi).lam
        right = rot @ symbol_continuum(spec, nu, rot.T @ xi).lam
        scale = max(np.linalg.norm(left), 1e-300)
        devs.append(np.linalg.norm(left - right) / scale)
    devs = np.asarray(devs)
    return EquivarianceReport(float(devs.max()) if devs.size else 0.0, devs)


def direction_grid(d: int, count: int = 16) -> np.ndarray:
    """Unit vectors: +-1 in 1D, equally spaced angles in 2D, a Fibonacci sphere in 3D."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        ang = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    i = np.arange(count) + 0.5
    z = 1 - 2 * i / count
    r = np.sqrt(1 - z**2)
    phi = np.pi * (1 + 5**0.5) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def frequency_grid(d: int, radii=None, n_angles: int = 16) -> np.ndarray:
    if radii is None:
        radii = np.logspace(-2, 2, 25)
    dirs = direction_grid(d, n_angles)
    return np.concatenate([rho * dirs for rho in np.asarray(radii)])


@dataclass(frozen=True)
class ComparisonResult:
    C_est: float
    argmin_xi: np.ndarray
    ratios: np.ndarray
    xis: np.ndarray
    flagged: bool


def comparison_constant(spec: KernelSpec, nu, xis=None, phi: KernelSpec | None = None) -> ComparisonResult:
    """Grid minimum of |lambda_w(xi)| / |lambda_phi(xi)| against the comparison kernel."""
    if phi is None:
        phi = comparison_kernel(spec)
    if xis is None:
        xis = frequency_grid(spec.d)
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    ratios = np.empty(len(xis))
    for j, xi in enumerate(xis):
        top = symbol_continuum(spec, nu, xi).magnitude
        bottom = symbol_continuum(phi, nu, xi).magnitude
        ratios[j] = top / bottom if bottom > 0 else math.inf
    j = int(np.argmin(ratios))
    return ComparisonResult(float(ratios[j]), xis[j], ratios, xis, bool(ratios[j] < 1e-12))


# ---------------------------------------------------------------------------
# lattice symbol


def symbol_discrete(stencil: StencilWeights, exact: bool = False) -> np.ndarray:
    """Discrete symbol on every torus frequency, shape ``(d, *n)`` in FFT order."""
    from .operators import discrete_symbol

    return discrete_symbol(stencil, exact=exact)


def discrete_symbol_at(stencil: StencilWeights, xi) -> np.ndarray:
    """sum_z beta(z) (exp(2 pi i xi . z h) - 1) at an arbitrary physical frequency."""
    xi = np.asarray(xi, dtype=float)
    phase = 2 * np.pi * (stencil.offsets * stencil.torus.h) @ xi
    return (stencil.beta * _expm1i(phase)[:, None]).sum(axis=0)
