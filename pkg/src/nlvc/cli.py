"""Command-line entry point: ``nlvc <command> --config <file> [--out <dir>] ...``.

Exit codes: 0 success, 1 verification failures, 2 configuration error,
3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import COMMANDS, ConfigError, RunConfig, manifest, parse_config
from .fields import Field, write_field
from .helmholtz import HelmholtzDivergence, decompose2d, decompose3d
from .kernels import comparison_kernel
from .krylov import ConvergenceError
from .lattice import SizingError, build_box_domain
from .operators import curl, grad, rotate2d, set_threads
from .poincare import PoincareBreakdown, dense_poincare, estimate_poincare, refinement_study, spot_check, torus_for_box
from .solvers import (
    AssumptionFailure,
    CDProblem,
    ElasticityProblem,
    SolverDivergence,
    apply_cd_operator,
    apply_navier,
    solve_cd,
    solve_elasticity,
)
from .stencil import build_stencil
from .symbols import comparison_constant, frequency_grid, imag_profile, symbol_bound, symbol_continuum
from .verification import SuiteConfig, localization_study, run_identity_suite

log = logging.getLogger("nlvc")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
DENSE_LIMIT = 400


class Failure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------------------
# shared problem setup


def _phi_reach(cfg: RunConfig) -> float:
    return min(comparison_kernel(cfg.kernel).delta, cfg.reach)


def setup_problem(cfg: RunConfig, with_phi: bool = False):
    """Torus, stencil(s) and box domain; the torus is sized so no collar wraps."""
    reach = max(cfg.reach, _phi_reach(cfg)) if with_phi else cfg.reach
    torus = cfg.torus or torus_for_box(cfg.box_lo, cfg.box_hi, cfg.h, reach, cfg.d)
    st = build_stencil(cfg.kernel, torus, cfg.direction, radius=cfg.reach)
    phi = build_stencil(comparison_kernel(cfg.kernel), torus, cfg.direction, radius=_phi_reach(cfg)) if with_phi else None
    collar = max(st.radius_cells, phi.radius_cells if phi else 0)
    domain = build_box_domain(torus, cfg.box_lo, cfg.box_hi, collar)
    if domain.count == 0:
        raise ConfigError("the box contains no lattice points")
    return torus, st, phi, domain


def _bump(domain, rank: int = 0) -> np.ndarray:
    """Smooth manufactured field supported on the interior."""
    torus = domain.torus
    x = torus.coordinates()
    idx = np.argwhere(domain.interior)
    lo = idx.min(axis=0) * torus.h
    hi = idx.max(axis=0) * torus.h
    t = [(x[i] - lo[i] + torus.h) / (hi[i] - lo[i] + 2 * torus.h) for i in range(torus.d)]
    base = np.prod([np.sin(np.pi * np.clip(ti, 0, 1)) ** 2 for ti in t], axis=0)
    base = domain.constrain(base)
    if rank == 0:
        return base
    return np.stack([base * (1 + 0.5 * np.cos(np.pi * t[k])) for k in range(torus.d)])


# ---------------------------------------------------------------------------
# commands


def cmd_symbol(cfg: RunConfig, out: Path) -> int:
    p = cfg.params
    xis = frequency_grid(cfg.d, p["radii"], int(p["angles"]))
    rows, worst = [], 0.0
    for xi in xis:
        s = symbol_continuum(cfg.kernel, cfg.direction, xi)
        bound = symbol_bound(cfg.kernel, xi)
        rows.append([*xi, *s.re, *s.im, s.magnitude, bound, imag_profile(cfg.kernel, float(np.linalg.norm(xi)))])
        worst = max(worst, s.magnitude / bound)
    d = cfg.d
    header = [f"xi{i + 1}" for i in range(d)] + [f"re{i + 1}" for i in range(d)] + [f"im{i + 1}" for i in range(d)]
    with open(out / "symbol.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header + ["abs", "bound", "Lambda_w"])
        writer.writerows([[repr(float(v)) for v in row] for row in rows])
    report = {"samples": len(rows), "max_bound_ratio": worst, "min_abs": min(r[3 * d] for r in rows)}
    if p["comparison"]:
        res = comparison_constant(cfg.kernel, cfg.direction, xis)
        report["comparison"] = {"C_est": res.C_est, "argmin_xi": res.argmin_xi, "flagged": res.flagged}
    _write_json(out / "symbol_report.json", report)
    print(f"wrote {len(rows)} symbol samples; max |lambda|/bound = {worst:.6g}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    p = cfg.params
    suite = SuiteConfig(cfg.kernel, n=int(p["n"]), h=cfg.h, nu=tuple(cfg.direction), seed=cfg.seed,
                        samples=int(p["samples"]), backend=p["backend"], truncation_radius=cfg.truncation_radius,
                        corrupt=bool(p["corrupt"]))
    results = run_identity_suite(suite)
    _write_json(out / "verify.json", {"suite": suite.to_json(), "fingerprint": suite.fingerprint(),
                                      "results": [r.to_json() for r in results]})
    width = max(len(r.check_id) for r in results)
    for r in results:
        if r.comparison == "report":
            print(f"{r.check_id:<{width}}  INFO  {r.value:.3e}")
            continue
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.check_id:<{width}}  {status}  {r.value:.3e} {r.comparison} {r.tolerance:.1e}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_poincare(cfg: RunConfig, out: Path) -> int:
    _, st, _, domain = setup_problem(cfg)
    est = estimate_poincare(domain, st, tol=cfg.tol, seed=cfg.seed)
    report = est.to_json()
    report["interior_points"] = domain.count
    report["spot_check"] = spot_check(domain, st, est.Pi_h, seed=cfg.seed)
    dense = cfg.params["dense_check"]
    if dense or (dense is None and domain.count <= DENSE_LIMIT):
        ref = dense_poincare(domain, st)
        report["dense_Pi_h"] = ref
        report["dense_relative_gap"] = abs(est.Pi_h - ref) / ref
    if cfg.params["h_list"]:
        history, change = refinement_study(cfg.kernel, cfg.box_lo, cfg.box_hi, cfg.params["h_list"], cfg.direction,
                                           cfg.reach, tol=cfg.tol)
        report["history"] = [list(p) for p in history]
        report["max_refinement_change"] = change
    _write_json(out / "poincare.json", report)
    print(f"Pi_h = {est.Pi_h:.12g} ({domain.count} interior points, {est.iterations} iterations)")
    return EXIT_OK


def _velocity(cfg: RunConfig, torus) -> np.ndarray:
    d = cfg.d
    base = np.zeros(d) if cfg.params["velocity"] is None else np.asarray(cfg.params["velocity"], dtype=float)
    if base.shape != (d,):
        raise ConfigError(f"velocity needs {d} entries")
    b = np.broadcast_to(base.reshape(d, *([1] * d)), (d, *torus.shape)).copy()
    amp = float(cfg.params["oscillation"])
    if amp:
        x = torus.coordinates()
        for i in range(d):
            b[i] += amp * np.sin(2 * np.pi * x[(i + 1) % d] / torus.extent[(i + 1) % d])
    return b


def cmd_solve_cd(cfg: RunConfig, out: Path) -> int:
    torus, st, phi, domain = setup_problem(cfg, with_phi=True)
    p = cfg.params
    problem = CDProblem(domain, st, phi, float(p["epsilon"]), _velocity(cfg, torus))
    Pi_h = estimate_poincare(domain, st, seed=cfg.seed).Pi_h if problem.has_convection else None
    exact = None
    if p["load"] == "manufactured":
        exact = _bump(domain)
        load = domain.restrict(apply_cd_operator(exact, problem))
    elif p["load"] == "ones":
        load = np.ones(domain.count)
    else:
        raise ConfigError("load must be 'ones' or 'manufactured'")
    try:
        u, report = solve_cd(problem, tol=cfg.tol, Pi_h=Pi_h, f=load)
    except AssumptionFailure as exc:
        raise Failure(EXIT_CONFIG, str(exc)) from exc
    return _finish_solve(out, u, report, exact, torus, "scalar", Pi_h)


def cmd_solve_elasticity(cfg: RunConfig, out: Path) -> int:
    torus, st, _, domain = setup_problem(cfg)
    p = cfg.params
    try:
        problem = ElasticityProblem(domain, st, float(p["lambda"]), float(p["mu"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    exact = None
    if p["load"] == "manufactured":
        exact = _bump(domain, rank=1)
        load = domain.restrict(apply_navier(exact, problem))
    elif p["load"] == "ones":
        load = np.ones((cfg.d, domain.count))
    else:
        raise ConfigError("load must be 'ones' or 'manufactured'")
    u, report = solve_elasticity(problem, tol=cfg.tol, f=load)
    return _finish_solve(out, u, report, exact, torus, "vector", None)


def _finish_solve(out: Path, u, report, exact, torus, rank: str, Pi_h) -> int:
    write_field(out / "u.f64", Field(torus, u, rank))
    data = report.to_json()
    if Pi_h is not None:
        data["Pi_h"] = Pi_h
    if exact is not None:
        data["manufactured_error"] = float(np.linalg.norm(u - exact) / np.linalg.norm(exact))
    _write_json(out / "report.json", data)
    print(f"{report.method}: {report.iterations} iterations, relative residual {report.residual:.3e}")
    if "manufactured_error" in data:
        print(f"manufactured-solution error {data['manufactured_error']:.3e}")
    return EXIT_OK


def cmd_helmholtz(cfg: RunConfig, out: Path) -> int:
    if cfg.d not in (2, 3):
        raise ConfigError("Helmholtz decomposition needs d = 2 or 3")
    torus, st, _, domain = setup_problem(cfg)
    rng = np.random.default_rng(cfg.seed)
    kind = cfg.params["input"]
    d = cfg.d
    if kind == "random":
        u = np.stack([domain.constrain(rng.standard_normal(torus.shape)) for _ in range(d)])
    elif kind == "gradient":
        u = np.stack([domain.constrain(c) for c in grad(domain.constrain(rng.standard_normal(torus.shape)), st)])
    elif kind == "rotational":
        if d == 2:
            w = rotate2d(grad(domain.constrain(rng.standard_normal(torus.shape)), st, sign=-1))
        else:
            w = curl(np.stack([domain.constrain(rng.standard_normal(torus.shape)) for _ in range(3)]), st, sign=-1)
        u = np.stack([domain.constrain(c) for c in w])
    else:
        raise ConfigError("input must be 'random', 'gradient' or 'rotational'")
    res = decompose2d(u, domain, st, cfg.tol) if d == 2 else decompose3d(u, domain, st, cfg.tol)
    unorm = float(np.linalg.norm(u))
    report = res.report()
    report["input"] = kind
    report["gradient_part_norm"] = float(np.linalg.norm(domain.constrain(res.gradient_part))) / unorm
    report["rotational_part_norm"] = float(np.linalg.norm(domain.constrain(res.rotational_part))) / unorm
    write_field(out / "u.f64", Field(torus, u, "vector"))
    write_field(out / "p.f64", Field(torus, res.p, "scalar"))
    write_field(out / "f.f64", Field(torus, res.f, "vector"))
    if d == 2:
        write_field(out / "q.f64", Field(torus, res.q, "scalar"))
    else:
        write_field(out / "v.f64", Field(torus, res.v, "vector"))
    _write_json(out / "helmholtz.json", report)
    print(f"residual {res.residual:.3e}, orthogonality {res.orthogonality:.3e}")
    return EXIT_OK


def cmd_localize(cfg: RunConfig, out: Path) -> int:
    if not cfg.kernel.compact or cfg.kernel.delta > 1:
        raise ConfigError("localization needs a kernel supported in the unit ball")
    rows, orders = localization_study(cfg.kernel, cfg.params["deltas"], int(cfg.params["n"]))
    with open(out / "localize.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delta", "grad_error", "div_error", "curl_error"])
        for r in rows:
            writer.writerow([r.delta, r.grad_error, r.div_error, "" if r.curl_error is None else r.curl_error])
    _write_json(out / "localize.json", {"rows": [r.__dict__ for r in rows], "orders": orders})
    for r in rows:
        print(f"delta={r.delta:<8g} grad {r.grad_error:.3e}  div {r.div_error:.3e}")
    print("fitted orders: " + ", ".join(f"{k} {v:.3f}" for k, v in orders.items()))
    return EXIT_OK


HANDLERS = {
    "symbol": cmd_symbol,
    "verify": cmd_verify,
    "poincare": cmd_poincare,
    "solve-cd": cmd_solve_cd,
    "solve-elasticity": cmd_solve_elasticity,
    "helmholtz": cmd_helmholtz,
    "localize": cmd_localize,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlvc", description="Half-ball nonlocal vector calculus on lattices.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON configuration or a manifest from an earlier run")
        p.add_argument("--out", default="nlvc_out", help="output directory (default: nlvc_out)")
        p.add_argument("--seed", type=int, help="unsigned 64-bit seed; overrides the config")
        p.add_argument("--tol", type=float, help="solver tolerance; overrides the config")
        p.add_argument("--threads", type=int, help="FFT worker count (fallback: NLVC_THREADS)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    threads = args.threads if args.threads is not None else os.environ.get("NLVC_THREADS")
    overrides = {k: v for k, v in (("seed", args.seed), ("tol", args.tol)) if v is not None}
    try:
        if threads is not None:
            set_threads(int(threads))
        cfg = parse_config(args.config, args.command, overrides)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "manifest.json", manifest(cfg))
        return HANDLERS[args.command](cfg, out)
    except Failure as exc:
        print(f"nlvc: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, SizingError, ValueError) as exc:
        print(f"nlvc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverDivergence, ConvergenceError, PoincareBreakdown, HelmholtzDivergence) as exc:
        print(f"nlvc: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
