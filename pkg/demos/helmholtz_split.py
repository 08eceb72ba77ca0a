"""Split a constrained vector field into a nonlocal gradient and a rotational part.

A random field splits with orthogonal pieces.  A gradient G p of a constrained
potential, cut back to the interior, is no longer a pure gradient of the
splitting's potential space, so a visible rotational part remains.

    python3 demos/helmholtz_split.py
"""

from __future__ import annotations

import argparse

import numpy as np

from nlvc.helmholtz import decompose2d
from nlvc.kernels import KernelSpec
from nlvc.operators import grad, norm
from nlvc.poincare import box_problem


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--seed", type=int, default=0xA11CE)
    parser.add_argument("--h", type=float, default=1 / 16)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    torus, st, dom = box_problem(KernelSpec("CompactIntegrable", 2, delta=0.25), [0, 0], [1, 1], args.h)

    u = dom.extend(rng.standard_normal((2, dom.count)))
    res = decompose2d(u, dom, st)
    print("random field")
    print(f"  reconstruction residual {res.residual:.2e}, orthogonality {res.orthogonality:.2e}")
    print(f"  |gradient part| {norm(res.gradient_part, torus.h, 2):.4f}, |rotational part| {norm(res.rotational_part, torus.h, 2):.4f}")

    p = dom.extend(rng.standard_normal(dom.count))
    ug = dom.constrain(grad(p, st))
    res = decompose2d(ug, dom, st)
    rot = norm(dom.constrain(res.rotational_part), torus.h, 2) / norm(ug, torus.h, 2)
    print("\ngradient of a constrained potential, restricted to the interior")
    print(f"  reconstruction residual {res.residual:.2e}")
    print(f"  rotational part relative to the field: {rot:.3%}")


if __name__ == "__main__":
    main()
