"""Volume-constrained convection-diffusion and correspondence elasticity.

Both problems are posed on the interior unknowns of a ``DomainMask``; fields
vanish outside the interior.  Loads are interior vectors paired with test
fields through the lattice inner product, so the weak form reads
``A u = f`` on interior unknowns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .krylov import KrylovInfo, cg, gmres_solve
from .lattice import DomainMask
from .operators import div, div_var_dir, grad, grad_var_dir, inner, unit_field_from_velocity, vector_laplacian
from .poincare import normal_operator
from .stencil import StencilWeights

CLAUSE_TOL = 1e-12


class AssumptionFailure(ValueError):
    """The velocity field violates both admissible clauses."""


class SolverDivergence(RuntimeError):
    def __init__(self, message: str, report: "SolveReport"):
        super().__init__(message)
        self.report = report


@dataclass
class SolveReport:
    method: str
    iterations: int
    residual: float
    converged: bool
    energy: float | None = None
    bilinear: float | None = None
    assumption: dict | None = None
    coercivity_margin: float | None = None
    coercivity_ratio: float | None = None
    solution_norm: float | None = None
    load_dual_norm: float | None = None
    bound: float | None = None
    bound_holds: bool | None = None

    def to_json(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def _h_scale(domain: DomainMask) -> float:
    return domain.torus.h ** domain.torus.d


def dual_norm(f_interior: np.ndarray, domain: DomainMask, stencil: StencilWeights, rtol: float = 1e-12) -> float:
    """sup_v (f, v) / ||G v|| over constrained fields, for a scalar or vector interior load."""
    apply = normal_operator(domain, stencil)
    loads = np.atleast_2d(f_interior)
    total = 0.0
    for comp in loads:
        y, _ = cg(apply, comp, rtol=rtol)
        total += float(comp @ y)
    return math.sqrt(max(total, 0.0) * _h_scale(domain))


# ---------------------------------------------------------------------------
# convection-diffusion


@dataclass
class CDProblem:
    domain: DomainMask
    w_stencil: StencilWeights
    phi_stencil: StencilWeights
    epsilon: np.ndarray
    b: np.ndarray
    f: np.ndarray | None = None
    n_field: np.ndarray = field(init=False)

    def __post_init__(self):
        d = self.domain.torus.d
        shape = self.domain.torus.shape
        self.epsilon = np.broadcast_to(np.asarray(self.epsilon, dtype=float), shape).copy()
        b = np.asarray(self.b, dtype=float)
        if b.ndim == 1:
            b = b.reshape(d, *([1] * d))
        self.b = np.broadcast_to(b, (d, *shape)).copy()
        if self.epsilon.min() <= 0:
            raise ValueError("diffusivity must have a positive lower bound")
        self.n_field = unit_field_from_velocity(self.b, self.w_stencil.nu)

    @property
    def eps1(self) -> float:
        return float(self.epsilon.min())

    @property
    def has_convection(self) -> bool:
        return bool(np.any(self.b != 0))


@dataclass(frozen=True)
class VelocityCheck:
    clause: str
    eta: float
    threshold: float
    max_divergence: float

    @property
    def passed(self) -> bool:
        return self.clause in ("i", "ii")

    def to_json(self) -> dict:
        return {"clause": self.clause, "eta": self.eta, "threshold": self.threshold, "max_divergence": self.max_divergence}


def velocity_divergence(b: np.ndarray, phi_stencil: StencilWeights, n_field: np.ndarray) -> np.ndarray:
    """D_phi^{-n} b on the whole torus."""
    return div_var_dir(b, n_field, phi_stencil, sign=-1)


def check_velocity_assumption(b: np.ndarray, phi_stencil: StencilWeights, n_field: np.ndarray, Pi_h: float, eps1: float,
                              domain: DomainMask) -> VelocityCheck:
    """Clause i when D_phi^{-n} b <= 0 on the interior, else clause ii when |D_phi^{-n} b| < 2 eps1 / Pi_h^2."""
    values = domain.restrict(velocity_divergence(b, phi_stencil, n_field))
    top = float(values.max()) if values.size else 0.0
    eta = float(np.abs(values).max()) if values.size else 0.0
    threshold = 2.0 * eps1 / Pi_h**2
    if top <= CLAUSE_TOL:
        clause = "i"
    elif eta < threshold:
        clause = "ii"
    else:
        clause = "fail"
    return VelocityCheck(clause, eta, threshold, top)


def coercivity_margin(check: VelocityCheck, eps1: float, Pi_h: float) -> float:
    if check.clause == "i":
        return eps1
    return eps1 - 0.5 * check.eta * Pi_h**2


def diffusion_part(u: np.ndarray, problem: CDProblem) -> np.ndarray:
    st = problem.w_stencil
    return -div(problem.epsilon * grad(u, st), st, sign=-1)


def convection_part(u: np.ndarray, problem: CDProblem) -> np.ndarray:
    if not problem.has_convection:
        return np.zeros_like(u)
    g = grad_var_dir(u, problem.n_field, problem.phi_stencil)
    return np.sum(problem.b * g, axis=0)


def apply_cd_operator(u: np.ndarray, problem: CDProblem) -> np.ndarray:
    """-D^{-nu}(eps G u) + b . G_phi^n u, zeroed outside the interior."""
    return problem.domain.constrain(diffusion_part(u, problem) + convection_part(u, problem))


def cd_bilinear(u: np.ndarray, v: np.ndarray, problem: CDProblem) -> float:
    """(eps G u, G v) + (b . G_phi^n u, v)."""
    st = problem.w_stencil
    h, d = st.torus.h, st.d
    diff = inner(problem.epsilon * grad(u, st), grad(v, st), h, d)
    return diff + inner(convection_part(u, problem), v, h, d)


def solve_cd(problem: CDProblem, tol: float = 1e-10, Pi_h: float | None = None, f: np.ndarray | None = None,
             force_symmetric: bool = False) -> tuple[np.ndarray, SolveReport]:
    """Solve the constrained problem; returns the full-torus solution and a report.

    The Krylov residual target is ``1e-2 * tol`` so that the solution error, not
    only the residual, lands near ``tol`` for moderately conditioned operators.
    """
    domain = problem.domain
    load = problem.f if f is None else f
    if load is None:
        raise ValueError("problem has no load")
    load = np.asarray(load, dtype=float)
    if load.shape == domain.torus.shape:
        load = domain.restrict(load)
    check = None
    margin = problem.eps1
    if problem.has_convection:
        if Pi_h is None:
            raise ValueError("a Poincare constant is needed to check the velocity assumption")
        check = check_velocity_assumption(problem.b, problem.phi_stencil, problem.n_field, Pi_h, problem.eps1, domain)
        if not check.passed:
            raise AssumptionFailure(f"velocity violates both clauses: eta={check.eta:.3e}, threshold={check.threshold:.3e}")
        margin = coercivity_margin(check, problem.eps1, Pi_h)

    def apply(x):
        return domain.restrict(apply_cd_operator(domain.extend(x), problem))

    inner_tol = 1e-2 * tol
    if problem.has_convection and not force_symmetric:
        x, info = gmres_solve(apply, load, rtol=inner_tol)
    else:
        x, info = cg(apply, load, rtol=inner_tol)
    u = domain.extend(x)
    report = _report(info, tol)
    report.assumption = check.to_json() if check else {"clause": "i", "eta": 0.0}
    report.coercivity_margin = margin
    _attach_bounds(report, u, load, problem.w_stencil, domain, margin, cd_bilinear(u, u, problem))
    if not report.converged:
        raise SolverDivergence(f"Krylov solve stopped at relative residual {report.residual:.3e}", report)
    return u, report


def _report(info: KrylovInfo, tol: float) -> SolveReport:
    return SolveReport(info.method, info.iterations, info.residual, info.residual <= tol)


def _attach_bounds(report: SolveReport, u: np.ndarray, load: np.ndarray, stencil: StencilWeights, domain: DomainMask,
                   margin: float, form_value: float) -> None:
    """A-priori estimate ||G u|| <= ||f||_* / margin and the a-posteriori coercivity ratio."""
    h, d = stencil.torus.h, stencil.d
    gnorm = math.sqrt(inner(grad(u, stencil), grad(u, stencil), h, d))
    report.solution_norm = gnorm
    report.bilinear = form_value
    report.coercivity_ratio = form_value / gnorm**2 if gnorm > 0 else None
    if margin > 0:
        fd = dual_norm(load, domain, stencil)
        report.load_dual_norm = fd
        report.bound = fd / margin
        report.bound_holds = bool(gnorm <= report.bound * (1 + 1e-8) + 1e-300)


def convection_inequality_check(v: np.ndarray, b: np.ndarray, phi_stencil: StencilWeights, n_field: np.ndarray) -> float:
    """(b . G_phi^n v, v) + 1/2 (v^2, D_phi^{-n} b); nonnegative for constrained v."""
    h, d = phi_stencil.torus.h, phi_stencil.d
    conv = np.sum(b * grad_var_dir(v, n_field, phi_stencil), axis=0)
    return inner(conv, v, h, d) + 0.5 * inner(v * v, velocity_divergence(b, phi_stencil, n_field), h, d)


def convection_flux_term(v: np.ndarray, b: np.ndarray, phi_stencil: StencilWeights, n_field: np.ndarray) -> float:
    """1/2 sum_x sum_z chi_{n(x)}(z) (v(x+z) - v(x))^2 (-z/|z| . b(x)) w_h(z) h^d, times h^d; equals the margin above."""
    st = phi_stencil
    d = st.d
    total = np.zeros(v.shape)
    for z, e, m in zip(st.offsets, st.unit, st.mass):
        dots = np.tensordot(np.asarray(z, dtype=float), n_field, axes=(0, 0))
        tol = 1e-12 * float(np.linalg.norm(z))
        f = np.where(dots > tol, 1.0, np.where(dots < -tol, 0.0, 0.5))
        ahead = np.roll(v, tuple(-int(k) for k in z), axis=tuple(range(d)))
        total += f * (ahead - v) ** 2 * (-np.tensordot(e, b, axes=(0, 0))) * m
    return 0.5 * float(total.sum()) * st.torus.h**d


# ---------------------------------------------------------------------------
# elasticity


@dataclass
class ElasticityProblem:
    domain: DomainMask
    stencil: StencilWeights
    lame_lambda: float
    lame_mu: float
    f: np.ndarray | None = None

    def __post_init__(self):
        if not self.lame_mu > 0 or not self.lame_lambda + 2 * self.lame_mu > 0:
            raise ValueError("Lame parameters need mu > 0 and lambda + 2 mu > 0")

    @property
    def korn_constant(self) -> float:
        return min(self.lame_lambda + 2 * self.lame_mu, self.lame_mu)


def strain(u: np.ndarray, stencil: StencilWeights) -> np.ndarray:
    """Symmetric part of the (d, d, *grid) gradient of a displacement."""
    g = grad(u, stencil)
    return 0.5 * (g + np.swapaxes(g, 0, 1))


def energy(u: np.ndarray, problem: ElasticityProblem) -> float:
    """1/2 lambda ||D^{-nu} u||^2 + mu ||e(u)||^2."""
    st = problem.stencil
    h, d = st.torus.h, st.d
    dv = div(u, st, sign=-1)
    e = strain(u, st)
    return 0.5 * problem.lame_lambda * inner(dv, dv, h, d) + problem.lame_mu * inner(e, e, h, d)


def elastic_bilinear(u: np.ndarray, v: np.ndarray, problem: ElasticityProblem) -> float:
    """mu sum_j (G u_j, G v_j) + (lambda + mu) (D^{-nu} u, D^{-nu} v)."""
    st = problem.stencil
    h, d = st.torus.h, st.d
    return (problem.lame_mu * inner(grad(u, st), grad(v, st), h, d)
            + (problem.lame_lambda + problem.lame_mu) * inner(div(u, st, sign=-1), div(v, st, sign=-1), h, d))


def apply_navier(u: np.ndarray, problem: ElasticityProblem) -> np.ndarray:
    """-mu L u - (lambda + mu) G D^{-nu} u, zeroed outside the interior."""
    st = problem.stencil
    out = -problem.lame_mu * vector_laplacian(u, st) - (problem.lame_lambda + problem.lame_mu) * grad(div(u, st, sign=-1), st)
    return problem.domain.constrain(out)


def solve_elasticity(problem: ElasticityProblem, tol: float = 1e-10, f: np.ndarray | None = None) -> tuple[np.ndarray, SolveReport]:
    """CG on the Navier operator; load shape ``(d, count)`` or a full ``(d, *grid)`` field."""
    domain = problem.domain
    d = domain.torus.d
    load = problem.f if f is None else f
    if load is None:
        raise ValueError("problem has no load")
    load = np.asarray(load, dtype=float)
    if load.shape == (d, *domain.torus.shape):
        load = domain.restrict(load)
    count = domain.count

    def apply(x):
        u = domain.extend(x.reshape(d, count))
        return domain.restrict(apply_navier(u, problem)).ravel()

    x, info = cg(apply, load.ravel(), rtol=1e-2 * tol)
    u = domain.extend(x.reshape(d, count))
    report = _report(info, tol)
    report.energy = energy(u, problem)
    report.coercivity_margin = problem.korn_constant
    _attach_bounds(report, u, load, problem.stencil, domain, problem.korn_constant, elastic_bilinear(u, u, problem))
    if not report.converged:
        raise SolverDivergence(f"CG stopped at relative residual {report.residual:.3e}", report)
    return u, report
