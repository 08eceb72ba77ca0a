"""Symbol of a fractional kernel, its comparison estimate, and the Poincare constant on a box.

    python3 demos/symbols_and_poincare.py --alpha 0.5
"""

from __future__ import annotations

import argparse

import numpy as np

from nlvc.kernels import KernelSpec, comparison_kernel, moments
from nlvc.poincare import box_problem, dense_poincare, estimate_poincare, refinement_study
from nlvc.symbols import comparison_constant, frequency_grid, symbol_bound, symbol_continuum


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--alpha", type=float, default=0.5, help="tail exponent in (0, 1)")
    args = parser.parse_args()

    spec = KernelSpec("FractionalTail", 1, alpha=args.alpha)
    phi = comparison_kernel(spec)
    print(f"kernel {spec.family} alpha={spec.alpha}; comparison kernel {phi.family} delta={phi.delta} clip={phi.clip}")
    print(f"comparison kernel moments: {moments(phi)}")

    print("\n   xi        Re lambda      Im lambda      |lambda| / bound")
    for xi in np.logspace(-1, 2, 7):
        s = symbol_continuum(spec, [1.0], [xi])
        print(f"{xi:8.3f}  {s.re[0]:13.6e}  {s.im[0]:13.6e}  {s.magnitude / symbol_bound(spec, [xi]):.4f}")

    res = comparison_constant(spec, [1.0], frequency_grid(1, np.logspace(-2, 2, 33)))
    print(f"\nmin |lambda_w| / |lambda_phi| = {res.C_est:.6f} at xi = {res.argmin_xi[0]:.4g}")

    # The fractional kernel is truncated at radius 0.5 for the lattice problems.
    _, st, dom = box_problem(spec, [0.0], [1.0], 1 / 64, radius=0.5)
    est = estimate_poincare(dom, st)
    print(f"\nPoincare constant on [0, 1], h = 1/64: {est.Pi_h:.10f} ({est.iterations} sweeps)")
    print(f"dense SVD of the constrained gradient:  {dense_poincare(dom, st):.10f}")

    compact = KernelSpec("CompactIntegrable", 2, delta=0.25)
    history, change = refinement_study(compact, [0, 0], [1, 1], [1 / 16, 1 / 32, 1 / 64])
    print("\ncompact kernel on the unit square:")
    for h, value in history:
        print(f"  h = 1/{round(1 / h):<3d} Pi_h = {value:.6f}")
    print(f"  largest change between levels: {100 * change:.2f}%")


if __name__ == "__main__":
    main()
