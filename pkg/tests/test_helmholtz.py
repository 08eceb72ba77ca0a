from __future__ import annotations

import numpy as np
import pytest

from nlvc.helmholtz import decompose2d, decompose3d
from nlvc.kernels import KernelSpec
from nlvc.operators import curl, div, grad, inner, norm, rotate2d
from nlvc.poincare import box_problem

SPEC2 = KernelSpec("CompactIntegrable", 2, delta=0.25)
SPEC3 = KernelSpec("CompactIntegrable", 3, delta=0.25)


@pytest.fixture(scope="module")
def setup2():
    return box_problem(SPEC2, [0, 0], [1, 1], 1 / 16)


@pytest.fixture(scope="module")
def setup3():
    return box_problem(SPEC3, [0] * 3, [1] * 3, 1 / 8)


def test_zero_input_2d(setup2):
    torus, st, dom = setup2
    res = decompose2d(np.zeros((2, *torus.shape)), dom, st)
    assert not np.any(res.p) and not np.any(res.q) and not np.any(res.f)


def test_zero_input_3d(setup3):
    torus, st, dom = setup3
    res = decompose3d(np.zeros((3, *torus.shape)), dom, st)
    assert not np.any(res.p) and not np.any(res.v)


def test_random_field_2d(setup2, rng):
    torus, st, dom = setup2
    tol = 1e-10
    u = dom.extend(rng.standard_normal((2, dom.count)))
    res = decompose2d(u, dom, st, tol)
    h = torus.h
    assert res.residual <= 10 * tol
    assert res.orthogonality <= 1e-10
    # components follow the stated formulas
    assert np.allclose(res.gradient_part, grad(res.p, st))
    assert np.allclose(res.rotational_part, rotate2d(grad(res.q, st, sign=-1)))
    recon = dom.constrain(res.gradient_part + res.rotational_part)
    assert norm(recon - u, h, 2) <= 10 * tol * norm(u, h, 2)


def test_random_field_3d(setup3, rng):
    torus, st, dom = setup3
    tol = 1e-10
    u = dom.extend(rng.standard_normal((3, dom.count)))
    res = decompose3d(u, dom, st, tol)
    assert res.residual <= 10 * tol
    assert res.orthogonality <= 1e-10
    dv = div(res.v, st, sign=1)
    assert norm(dv, torus.h, 3) <= 1e-12 * norm(res.v, torus.h, 3)
    assert np.allclose(res.rotational_part, curl(res.v, st, sign=-1))


def test_periodic_parts_orthogonal_on_whole_torus(setup2, rng):
    # (G a, J G^{-nu} b) vanishes identically on the torus for any a, b
    torus, st, _ = setup2
    a, b = rng.standard_normal((2, *torus.shape))
    ga, rb = grad(a, st), rotate2d(grad(b, st, sign=-1))
    assert abs(inner(ga, rb, torus.h, 2)) <= 1e-13 * norm(ga, torus.h, 2) * norm(rb, torus.h, 2)


def test_input_must_vanish_outside(setup2):
    torus, st, dom = setup2
    with pytest.raises(ValueError):
        decompose2d(np.ones((2, *torus.shape)), dom, st)


def test_dimension_checked(setup2):
    torus, st, dom = setup2
    with pytest.raises(ValueError):
        decompose3d(np.zeros((3, *torus.shape)), dom, st)
