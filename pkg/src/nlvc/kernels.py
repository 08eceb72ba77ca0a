"""Radial interaction kernels.

A kernel is stored as a short list of radial pieces.  Each piece has the form

    w(r) = coef * r**power * exp(-rate * r),    a <= r < b,

which covers every family used here (constant, singular power, power-law
tail, tempered power) and keeps moments and Fourier transforms in closed
form whenever ``rate == 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize
from scipy.special import gamma

FAMILIES = ("CompactIntegrable", "CompactSingular", "FractionalTail", "Tempered")

JSON_KEYS = ("family", "d", "delta", "s", "alpha", "c0", "lambda_t", "eps0", "R", "clip")


class InvalidKernel(ValueError):
    """Raised when a kernel description is malformed or violates the kernel assumptions."""


class RadialPiece(NamedTuple):
    a: float
    b: float
    coef: float
    power: float
    rate: float = 0.0

    def value(self, r):
        return self.coef * r**self.power * np.exp(-self.rate * r)


@dataclass(frozen=True)
class KernelSpec:
    """Radial kernel description.

    Parameters
    ----------
    family : one of ``FAMILIES``.
    d : spatial dimension (1, 2 or 3).
    delta : truncation radius of the support, ``inf`` for unbounded support.
    s : singularity exponent; near the origin ``w ~ r**(-d - s)``.  ``r w(r)`` is
        locally integrable exactly when ``s < 1``.  Ignored by
        ``CompactIntegrable``.
    alpha : tail exponent, ``w = c0 r**(-d - alpha)`` beyond ``R``.
    c0 : amplitude.
    lambda_t : tempering rate for the ``Tempered`` family.
    eps0 : radius on which ``w > 0`` is required; defaults to ``min(1, delta) / 2``.
    R : radius beyond which the ``FractionalTail`` profile is a pure power law.
    clip : optional cap on the kernel value, ``w -> min(clip, w)``.
    """

    family: str
    d: int
    delta: float = math.inf
    s: float = 0.0
    alpha: float | None = None
    c0: float = 1.0
    lambda_t: float = 0.0
    eps0: float | None = None
    R: float = 0.0
    clip: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidKernel(f"unknown kernel family {self.family!r}")
        if self.d not in (1, 2, 3):
            raise InvalidKernel(f"dimension must be 1, 2 or 3, got {self.d}")
        if not self.delta > 0:
            raise InvalidKernel("horizon delta must be positive")
        if not self.c0 > 0:
            raise InvalidKernel("amplitude c0 must be positive")
        if self.s < 0:
            raise InvalidKernel("singularity exponent s must be >= 0")
        if self.lambda_t < 0:
            raise InvalidKernel("tempering rate must be >= 0")
        if self.R < 0:
            raise InvalidKernel("tail radius R must be >= 0")
        if self.clip is not None and not self.clip > 0:
            raise InvalidKernel("clip value must be positive")
        if self.eps0 is not None and not 0 < self.eps0 < 1:
            raise InvalidKernel("eps0 must lie in (0, 1)")
        if self.family in ("CompactIntegrable", "CompactSingular") and math.isinf(self.delta):
            raise InvalidKernel(f"{self.family} needs a finite horizon")
        if self.family in ("FractionalTail", "Tempered"):
            if self.alpha is None:
                raise InvalidKernel(f"{self.family} needs a tail exponent alpha")
            if not 0 < self.alpha <= 1:
                raise InvalidKernel(f"tail exponent alpha must lie in (0, 1], got {self.alpha}")
        if self.family == "Tempered" and self.alpha >= 1:
            raise InvalidKernel("Tempered kernels need alpha < 1")

    @property
    def positivity_radius(self) -> float:
        if self.eps0 is not None:
            return self.eps0
        return min(1.0, self.delta) / 2

    @property
    def compact(self) -> bool:
        return math.isfinite(self.delta)

    def to_json(self) -> dict:
        out = {}
        for key in JSON_KEYS:
            value = getattr(self, key)
            if isinstance(value, float) and math.isinf(value):
                value = None
            out[key] = value
        return out

    @classmethod
    def from_json(cls, data: dict) -> "KernelSpec":
        unknown = set(data) - set(JSON_KEYS)
        if unknown:
            raise InvalidKernel(f"unknown kernel keys: {sorted(unknown)}")
        if "family" not in data or "d" not in data:
            raise InvalidKernel("kernel needs at least 'family' and 'd'")
        kwargs = {k: v for k, v in data.items() if v is not None}
        if "delta" in data and data["delta"] is None:
            kwargs["delta"] = math.inf
        for key in ("delta", "s", "alpha", "c0", "lambda_t", "eps0", "R", "clip"):
            if key in kwargs:
                kwargs[key] = float(kwargs[key])
        kwargs["d"] = int(kwargs["d"])
        return cls(**kwargs)


@dataclass(frozen=True)
class KernelMoments:
    M1: float
    M2: float
    c_hat: float
    total_mass: float


class AssumptionCheck(NamedTuple):
    id: str
    passed: bool
    detail: str


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 for d = 1)."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def _unclipped_pieces(spec: KernelSpec) -> list[RadialPiece]:
    d, c0, delta = spec.d, spec.c0, spec.delta
    if spec.family == "CompactIntegrable":
        return [RadialPiece(0.0, delta, c0, 0.0)]
    if spec.family == "CompactSingular":
        return [RadialPiece(0.0, delta, c0, -d - spec.s)]
    if spec.family == "Tempered":
        return [RadialPiece(0.0, delta, c0, -d - spec.alpha, spec.lambda_t)]
    alpha = spec.alpha
    if spec.R == 0:
        return [RadialPiece(0.0, delta, c0, -d - alpha)]
    R = spec.R
    inner = RadialPiece(0.0, min(R, delta), c0 * R ** (spec.s - alpha), -d - spec.s)
    if delta <= R:
        return [inner]
    return [inner, RadialPiece(R, delta, c0, -d - alpha)]


def _clip_crossing(piece: RadialPiece, cap: float) -> float:
    """Largest r in the piece where the (non-increasing) profile still exceeds ``cap``."""
    starts_above = (piece.a == 0 and piece.power < 0) or piece.value(piece.a) > cap
    if not starts_above:
        return piece.a
    upper = piece.b if math.isfinite(piece.b) else max(piece.a, 1.0) * 1e6
    if piece.value(upper) >= cap:
        return piece.b
    if piece.rate == 0:
        return float((cap / piece.coef) ** (1 / piece.power))

    def gap(r):
        return math.log(piece.coef) + piece.power * math.log(r) - piece.rate * r - math.log(cap)

    lo = piece.a if piece.a > 0 else 1e-300
    return optimize.brentq(gap, lo, upper, xtol=1e-15, rtol=4e-16)


def radial_pieces(spec: KernelSpec) -> list[RadialPiece]:
    """Piecewise description of the radial profile, clipped if ``spec.clip`` is set."""
    pieces = _unclipped_pieces(spec)
    if spec.clip is None:
        return pieces
    cap = spec.clip
    out = []
    for piece in pieces:
        if piece.power > 0:
            raise InvalidKernel("clipping assumes a non-increasing profile")
        r_cut = _clip_crossing(piece, cap)
        if r_cut > piece.a:
            out.append(RadialPiece(piece.a, r_cut, cap, 0.0))
        if r_cut < piece.b:
            out.append(RadialPiece(r_cut, piece.b, *piece[2:]))
    return out


def breakpoints(spec: KernelSpec) -> list[float]:
    """Radii where the profile is discontinuous or changes form."""
    pts = set()
    for piece in radial_pieces(spec):
        for r in (piece.a, piece.b):
            if 0 < r < math.inf:
                pts.add(float(r))
    return sorted(pts)


def is_singular(spec: KernelSpec) -> bool:
    first = radial_pieces(spec)[0]
    return first.a == 0 and first.power < 0


def eval_radial(spec: KernelSpec, r):
    """Radial profile ``w(r)``; zero beyond the support."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("radius must be non-negative")
    if np.any(r_arr == 0):
        if is_singular(spec):
            raise ValueError("singular kernel profile diverges at r = 0")
    out = np.zeros_like(r_arr)
    for piece in radial_pieces(spec):
        sel = (r_arr >= piece.a) & (r_arr < piece.b)
        if piece.a == 0:
            sel &= r_arr > 0
        if np.any(sel):
            out[sel] = piece.value(r_arr[sel])
    if np.any(r_arr == 0) and not is_singular(spec):
        first = radial_pieces(spec)[0]
        out[r_arr == 0] = first.coef if first.power == 0 else 0.0
    if np.ndim(r) == 0:
        return float(out)
    return out


def _piece_moment_closed(piece: RadialPiece, m: float, lo: float, hi: float) -> float:
    """Closed form of  int_lo^hi r**m w(r) dr  over one rate-free piece."""
    q = piece.power + m
    if lo == 0 and q <= -1:
        return math.inf
    if math.isinf(hi) and q >= -1:
        return math.inf
    if q == -1:
        return piece.coef * math.log(hi / lo)
    hi_term = 0.0 if math.isinf(hi) else hi ** (q + 1)
    lo_term = 0.0 if lo == 0 else lo ** (q + 1)
    return piece.coef * (hi_term - lo_term) / (q + 1)


def _piece_moment_quad(piece: RadialPiece, m: float, lo: float, hi: float) -> float:
    q = piece.power + m
    if lo == 0 and q <= -1:
        return math.inf
    if math.isinf(hi) and piece.rate == 0 and q >= -1:
        return math.inf

    def smooth(r):
        return piece.coef * math.exp(-piece.rate * r)

    total = 0.0
    if lo == 0:
        mid = hi if math.isfinite(hi) else 1.0
        mid = min(mid, 1.0)
        val, _ = integrate.quad(smooth, 0.0, mid, weight="alg", wvar=(q, 0.0), epsabs=0, epsrel=1e-12, limit=200)
        total += val
        lo = mid
    if hi > lo:
        val, _ = integrate.quad(
            lambda r: r**q * smooth(r), lo, hi, epsabs=0, epsrel=1e-12, limit=400
        )
        total += val
    return total


def radial_integral(spec: KernelSpec, m: float, lo: float = 0.0, hi: float = math.inf, method: str = "auto") -> float:
    """Compute  int_lo^hi r**m w(r) dr.

    ``method`` selects ``"closed"`` (rate-free pieces only), ``"quad"`` or
    ``"auto"`` (closed form where available, quadrature otherwise).
    """
    total = 0.0
    for piece in radial_pieces(spec):
        a, b = max(piece.a, lo), min(piece.b, hi)
        if b <= a:
            continue
        if method == "quad" or (method == "auto" and piece.rate != 0):
            total += _piece_moment_quad(piece, m, a, b)
        elif piece.rate != 0:
            raise ValueError("no closed form for tempered pieces")
        else:
            total += _piece_moment_closed(piece, m, a, b)
        if math.isinf(total):
            return math.inf
    return total


def hemisphere_factor(d: int) -> float:
    """int over the unit half-sphere {z1 > 0} of z1, i.e. omega_{d-2} / (d - 1)."""
    if d == 1:
        return 1.0
    return sphere_area(d - 1) / (d - 1)


def moments(spec: KernelSpec, method: str = "auto") -> KernelMoments:
    """First moment inside the unit ball, mass outside it, c_hat and total mass.

    Raises ``InvalidKernel`` if the first moment or the outer mass diverges.
    """
    d = spec.d
    omega = sphere_area(d)
    M1 = omega * radial_integral(spec, d, 0.0, 1.0, method)
    M2 = omega * radial_integral(spec, d - 1, 1.0, math.inf, method)
    if not (math.isfinite(M1) and math.isfinite(M2)):
        raise InvalidKernel(f"kernel moments diverge (M1={M1}, M2={M2})")
    mass_density = radial_integral(spec, d - 1, 0.0, math.inf, method)
    total_mass = omega * mass_density
    c_hat = hemisphere_factor(d) * mass_density
    return KernelMoments(M1=M1, M2=M2, c_hat=c_hat, total_mass=total_mass)


def comparison_kernel(spec: KernelSpec) -> KernelSpec:
    """The integrable comparison kernel  min(1, w) restricted to the unit ball."""
    cap = 1.0 if spec.clip is None else min(1.0, spec.clip)
    return replace(spec, delta=min(spec.delta, 1.0), clip=cap, eps0=spec.positivity_radius if spec.eps0 is None else spec.eps0)


def scale_kernel(spec: KernelSpec, factor: float) -> KernelSpec:
    """Kernel  factor**(-d-1) * w(x / factor), which keeps the first moment fixed."""
    d, t = spec.d, factor
    amp = t ** (-d - 1)
    kw = dict(delta=spec.delta * t, R=spec.R * t)
    if spec.family == "CompactIntegrable":
        kw["c0"] = spec.c0 * amp
    elif spec.family == "CompactSingular":
        kw["c0"] = spec.c0 * amp * t ** (d + spec.s)
    else:
        kw["c0"] = spec.c0 * amp * t ** (d + spec.alpha)
        kw["lambda_t"] = spec.lambda_t / t
    if spec.clip is not None:
        kw["clip"] = spec.clip * amp
    if spec.eps0 is not None:
        kw["eps0"] = min(spec.eps0 * t, 0.999)
    return replace(spec, **kw)


def tail_clause(spec: KernelSpec) -> int | None:
    """Which tail condition holds: 1 (finite first moment), 2 (fractional power tail) or None."""
    first = radial_integral(spec, spec.d, 0.0, math.inf)
    if math.isfinite(first):
        return 1
    last = radial_pieces(spec)[-1]
    power_tail = (
        spec.family == "FractionalTail"
        and math.isinf(last.b)
        and last.rate == 0
        and math.isclose(last.coef, spec.c0)
        and math.isclose(last.power, -spec.d - spec.alpha)
    )
    if power_tail and 0 < spec.alpha <= 1:
        return 2
    return None


def check_assumptions(spec: KernelSpec) -> list[AssumptionCheck]:
    """Report on positivity, local integrability, finite moments and the tail condition."""
    d = spec.d
    report = []

    local = radial_integral(spec, d, 0.0, min(1.0, spec.positivity_radius), "quad")
    report.append(AssumptionCheck(
        "local_first_moment",
        math.isfinite(local),
        "r*w(r) locally integrable" if math.isfinite(local) else "int_0 r^d w(r) dr diverges at the origin",
    ))

    eps0 = spec.positivity_radius
    probe = eps0 * np.geomspace(1e-6, 1.0, 64)
    positive = bool(np.all(eval_radial(spec, probe) > 0))
    report.append(AssumptionCheck("positive_near_origin", positive, f"w > 0 on (0, {eps0:g}]"))

    omega = sphere_area(d)
    M1 = omega * radial_integral(spec, d, 0.0, 1.0, "quad")
    M2 = omega * radial_integral(spec, d - 1, 1.0, math.inf, "quad")
    finite = math.isfinite(M1) and math.isfinite(M2) and M1 > 0
    report.append(AssumptionCheck("finite_moments", finite, f"M1={M1:.6g}, M2={M2:.6g}"))

    clause = tail_clause(spec) if finite else None
    detail = {1: "clause (1): finite first moment", 2: "clause (2): fractional power tail"}.get(clause, "no tail clause holds")
    report.append(AssumptionCheck("tail_condition", clause is not None, detail))
    return report


def assumptions_hold(spec: KernelSpec) -> bool:
    return all(item.passed for item in check_assumptions(spec))


def fractional_symbol_constant(alpha: float) -> complex:
    """int_0^inf r**(-1-alpha) (exp(i r) - 1) dr = Gamma(-alpha) exp(-i pi alpha / 2), 0 < alpha < 1."""
    return complex(gamma(-alpha) * np.exp(-0.5j * np.pi * alpha))
