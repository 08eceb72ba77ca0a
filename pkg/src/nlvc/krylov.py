"""Matrix-free Krylov solvers on flat interior vectors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

Apply = Callable[[np.ndarray], np.ndarray]


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, info: "KrylovInfo"):
        super().__init__(message)
        self.info = info


@dataclass
class KrylovInfo:
    method: str
    iterations: int = 0
    residual: float = 0.0
    converged: bool = False
    history: list[float] = field(default_factory=list)


def cg(apply: Apply, rhs: np.ndarray, rtol: float = 1e-10, maxiter: int | None = None, x0=None) -> tuple[np.ndarray, KrylovInfo]:
    """Conjugate gradients for a symmetric positive definite operator.

    Stops when ``|b - A x| <= rtol * |b|``; the true residual is recomputed at exit.
    """
    b = np.asarray(rhs, dtype=float)
    n = b.size
    maxiter = maxiter or max(10 * n, 100)
    info = KrylovInfo("cg")
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0:
        info.converged = True
        return np.zeros_like(b), info
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - apply(x) if x0 is not None else b.copy()
    p = r.copy()
    rr = float(r @ r)
    target = rtol * bnorm
    for k in range(1, maxiter + 1):
        ap = apply(p)
        pap = float(p @ ap)
        if pap <= 0:
            raise ConvergenceError("operator is not positive definite along a search direction", info)
        step = rr / pap
        x += step * p
        r -= step * ap
        rr_new = float(r @ r)
        info.iterations = k
        info.history.append(np.sqrt(rr_new) / bnorm)
        if np.sqrt(rr_new) <= target:
            true = float(np.linalg.norm(b - apply(x)))
            if true <= target:
                break
            r = b - apply(x)
            rr_new = float(r @ r)
            p = r.copy()
            rr = rr_new
            continue
        p = r + (rr_new / rr) * p
        rr = rr_new
    info.residual = float(np.linalg.norm(b - apply(x))) / bnorm
    info.converged = info.residual <= rtol
    return x, info


def gmres_solve(apply: Apply, rhs: np.ndarray, rtol: float = 1e-10, restart: int = 60, maxiter: int = 200) -> tuple[np.ndarray, KrylovInfo]:
    """Restarted GMRES (scipy) for nonsymmetric operators."""
    b = np.asarray(rhs, dtype=float)
    info = KrylovInfo("gmres")
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0:
        info.converged = True
        return np.zeros_like(b), info
    op = LinearOperator((b.size, b.size), matvec=apply, dtype=float)

    def record(res):
        info.iterations += 1
        info.history.append(float(res))

    x = np.zeros_like(b)
    for _ in range(4):
        # the preconditioned residual can drift from the true one; restart from the iterate if so
        x, _ = gmres(op, b, x0=x, rtol=rtol, atol=0.0, restart=restart, maxiter=maxiter, callback=record, callback_type="pr_norm")
        info.residual = float(np.linalg.norm(b - apply(x))) / bnorm
        if info.residual <= rtol:
            break
    info.converged = info.residual <= rtol
    return x, info
