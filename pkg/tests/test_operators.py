from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlvc.kernels import KernelSpec, moments
from nlvc.lattice import Torus, build_box_domain
from nlvc.operators import (
    curl,
    discrete_symbol,
    div,
    div_var_dir,
    grad,
    grad_var_dir,
    inner,
    norm,
    product_rule_remainder,
    rotate2d,
    unit_field_from_velocity,
    vector_laplacian,
)
from nlvc.stencil import build_stencil, cell_averages

seeds = st.integers(0, 2**32 - 1)


def _overlap_1d(z: int, delta: float) -> float:
    """Length of [z - 1/2, z + 1/2] inside [-delta, delta]."""
    return max(0.0, min(z + 0.5, delta) - max(z - 0.5, -delta))


def test_impulse_gradient_1d_brute_force():
    spec = KernelSpec("CompactIntegrable", 1, delta=2.0)
    st1 = build_stencil(spec, Torus((8,), 1.0), [1.0])
    u = np.zeros(8)
    u[1] = 1.0
    beta = {z: (1.0 if z > 0 else 0.0) * np.sign(z) * _overlap_1d(z, 2.0) for z in (-2, -1, 1, 2)}
    brute = np.array([sum(b * (u[(x + z) % 8] - u[x]) for z, b in beta.items()) for x in range(8)])
    assert np.array_equal(brute, [1.0, -1.5, 0, 0, 0, 0, 0, 0.5])
    for backend in ("direct", "fft"):
        assert np.allclose(grad(u, st1, backend=backend)[0], brute, atol=1e-15)


def test_impulse_curl_3d_brute_force(rng):
    spec = KernelSpec("CompactIntegrable", 3, delta=1.2)
    st3 = build_stencil(spec, Torus.cube(3, 4, 1.0), rng.standard_normal(3))
    assert len(st3.offsets) == 26
    v = np.zeros((3, 4, 4, 4))
    v[:, 1, 2, 3] = rng.standard_normal(3)
    brute = np.zeros_like(v)
    for x in itertools.product(range(4), repeat=3):
        for z, b in zip(st3.offsets, st3.beta):
            y = tuple((np.array(x) + z) % 4)
            brute[(slice(None), *x)] += np.cross(b, v[(slice(None), *y)] - v[(slice(None), *x)])
    for backend in ("direct", "fft"):
        assert np.allclose(curl(v, st3, backend=backend), brute, atol=1e-14)


def test_interior_cells_have_exact_average():
    offsets = np.array([[1, 0], [2, 1], [0, 3]])
    spec = KernelSpec("CompactIntegrable", 2, delta=0.5, c0=3.0)
    assert np.allclose(cell_averages(spec, offsets, 0.1), 3.0, rtol=0, atol=1e-14)


def test_cell_average_of_cut_cell_1d():
    spec = KernelSpec("CompactIntegrable", 1, delta=2.0)
    assert cell_averages(spec, np.array([[2], [1], [3]]), 1.0) == pytest.approx([0.5, 1.0, 0.0], abs=1e-14)


def test_cell_average_singular_1d_matches_antiderivative():
    spec = KernelSpec("CompactSingular", 1, delta=1.0, s=0.5)
    # w = r^-1.5; average over [0.5, 1.5] h with h = 0.1, cut at r = 1
    h = 0.1
    got = cell_averages(spec, np.array([[1], [5]]), h)
    exact = [(-2 * (0.15**-0.5 - 0.05**-0.5)) / h, (-2 * (0.55**-0.5 - 0.45**-0.5)) / h]
    assert got == pytest.approx(exact, rel=1e-10)


def test_first_moment_second_order(compact2d):
    m1 = moments(compact2d).M1
    errs = [abs(build_stencil(compact2d, Torus.cube(2, n, 1 / n), [1, 0]).m1_discrete - m1) for n in (64, 128, 256)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.5)


@pytest.mark.parametrize("fn", ["grad", "div", "lap"])
def test_constant_fields_map_to_zero(stencil2d, fn):
    c = np.full((2, 32, 32), 1.7)
    for backend in ("direct", "fft"):
        out = {"grad": lambda: grad(c[0], stencil2d, backend=backend),
               "div": lambda: div(c, stencil2d, backend=backend),
               "lap": lambda: vector_laplacian(c[0], stencil2d, backend=backend)}[fn]()
        assert np.max(np.abs(out)) <= 1e-14


def test_constant_curl_zero(stencil3d):
    c = np.ones((3, 16, 16, 16)) * np.array([1.0, -2.0, 0.5]).reshape(3, 1, 1, 1)
    assert np.max(np.abs(curl(c, stencil3d, backend="direct"))) <= 1e-14


def test_affine_field_reproduces_scaled_matrix(rng, compact2d):
    torus = Torus.cube(2, 64, 1 / 64)
    st2 = build_stencil(compact2d, torus, [0.6, 0.8])
    A = rng.standard_normal((2, 2))
    u = np.einsum("jk,k...->j...", A, torus.coordinates())
    g = grad(u, st2, backend="direct")
    lattice_m1 = np.sum(np.linalg.norm(st2.offsets, axis=1) * torus.h * st2.mass)
    r = st2.radius_cells
    inner_pts = g[:, :, r:-r, r:-r]
    assert np.max(np.abs(inner_pts - (lattice_m1 / 4 * A.T)[:, :, None, None])) <= 1e-12
    # against the continuum moment the error is quadrature-limited
    assert np.max(np.abs(inner_pts - (moments(compact2d).M1 / 4 * A.T)[:, :, None, None])) <= 5e-3


@given(seeds, st.sampled_from(["direct", "fft"]))
def test_integration_by_parts_scalar(seed, backend):
    st2 = _stencil2d()
    r = np.random.default_rng(seed)
    u, V = r.standard_normal((32, 32)), r.standard_normal((2, 32, 32))
    h = st2.torus.h
    gu = grad(u, st2, backend=backend)
    lhs = inner(gu, V, h, 2) + inner(u, div(V, st2, sign=-1, backend=backend), h, 2)
    assert abs(lhs) <= 1e-12 * (norm(gu, h, 2) * norm(V, h, 2) + norm(u, h, 2) * norm(div(V, st2), h, 2))


@given(seeds)
def test_integration_by_parts_matrix_fields(seed):
    st2 = _stencil2d()
    r = np.random.default_rng(seed)
    u, V = r.standard_normal((2, 32, 32)), r.standard_normal((2, 2, 32, 32))
    h = st2.torus.h
    lhs = inner(grad(u, st2), V, h, 2) + inner(u, div(V, st2, sign=-1), h, 2)
    assert abs(lhs) <= 1e-12 * norm(u, h, 2) * norm(V, h, 2) * 100


@given(seeds)
def test_divergence_methods_agree(seed):
    st2 = _stencil2d()
    V = np.random.default_rng(seed).standard_normal((2, 32, 32))
    ref = div(V, st2, backend="direct", method="adjoint")
    for method in ("direct", "pairwise"):
        assert np.max(np.abs(div(V, st2, backend="direct", method=method) - ref)) <= 1e-12 * np.max(np.abs(ref))


@given(seeds)
def test_curl_adjoint_and_vanishing(seed):
    st3 = _stencil3d()
    r = np.random.default_rng(seed)
    u, v, p = r.standard_normal((3, 8, 8, 8)), r.standard_normal((3, 8, 8, 8)), r.standard_normal((8, 8, 8))
    h = st3.torus.h
    cu = curl(u, st3)
    assert abs(inner(cu, v, h, 3) - inner(u, curl(v, st3, sign=-1), h, 3)) <= 1e-12 * norm(cu, h, 3) * norm(v, h, 3)
    assert np.max(np.abs(curl(grad(p, st3), st3))) <= 1e-12 * np.max(np.abs(grad(p, st3)))
    cv = curl(v, st3)
    assert np.max(np.abs(div(cv, st3, sign=1))) <= 1e-12 * np.max(np.abs(cv))


def test_backend_agreement(stencil3d, rng):
    u = rng.standard_normal((3, 16, 16, 16))
    pairs = [
        (grad(u, stencil3d, backend="direct"), grad(u, stencil3d, backend="fft")),
        (div(u, stencil3d, sign=1, backend="direct"), div(u, stencil3d, sign=1, backend="fft")),
        (curl(u, stencil3d, sign=-1, backend="direct"), curl(u, stencil3d, sign=-1, backend="fft")),
        (vector_laplacian(u, stencil3d, backend="direct"), vector_laplacian(u, stencil3d, backend="fft")),
    ]
    for a, b in pairs:
        assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))


def test_gradient_is_fourier_multiplier(stencil2d, rng):
    u = rng.standard_normal((32, 32))
    lam = discrete_symbol(stencil2d)
    uh = np.fft.fftn(u)
    lhs = np.fft.fftn(grad(u, stencil2d, backend="direct"), axes=(1, 2))
    assert np.linalg.norm(lhs - lam * uh) <= 1e-10 * np.linalg.norm(uh)


def test_discrete_symbol_structure(stencil2d):
    lam = discrete_symbol(stencil2d)
    assert np.all(lam[:, 0, 0] == 0)
    assert np.allclose(lam, discrete_symbol(stencil2d, exact=True), atol=1e-14)
    mirror = np.roll(lam[:, ::-1, ::-1], 1, axis=(1, 2))
    assert np.array_equal(lam, np.conj(mirror))


def test_rotation_is_signed_permutation(rng):
    v = rng.standard_normal((2, 5, 5))
    Jv = rotate2d(v)
    assert np.array_equal(Jv[0], v[1]) and np.array_equal(Jv[1], -v[0])
    assert np.array_equal(rotate2d(Jv), -v)


def test_var_dir_reduces_to_fixed_direction(stencil2d, rng):
    u, V = rng.standard_normal((32, 32)), rng.standard_normal((2, 32, 32))
    n = np.broadcast_to(stencil2d.nu.reshape(2, 1, 1), (2, 32, 32)).copy()
    assert np.max(np.abs(grad_var_dir(u, n, stencil2d) - grad(u, stencil2d, backend="direct"))) <= 1e-13
    for sign in (1, -1):
        got = div_var_dir(V, n, stencil2d, sign=sign)
        assert np.max(np.abs(got - div(V, stencil2d, sign=sign, backend="direct"))) <= 1e-12


@given(seeds)
def test_var_dir_adjoint(seed):
    st2 = _stencil2d()
    r = np.random.default_rng(seed)
    u, V = r.standard_normal((32, 32)), r.standard_normal((2, 32, 32))
    n = unit_field_from_velocity(r.standard_normal((2, 32, 32)), st2.nu)
    h = st2.torus.h
    g = grad_var_dir(u, n, st2)
    lhs = inner(g, V, h, 2) + inner(u, div_var_dir(V, n, st2, sign=-1), h, 2)
    assert abs(lhs) <= 1e-12 * (norm(g, h, 2) * norm(V, h, 2) + 1.0)


def test_var_dir_constant_field_zero(stencil2d, rng):
    n = unit_field_from_velocity(rng.standard_normal((2, 32, 32)), [1.0, 0.0])
    assert np.max(np.abs(grad_var_dir(np.full((32, 32), 2.5), n, stencil2d))) <= 1e-14


def test_unit_field_fallback():
    b = np.zeros((2, 4, 4))
    b[0, 1, 1] = 3.0
    n = unit_field_from_velocity(b, [0.0, 1.0])
    assert np.array_equal(n[:, 1, 1], [-1.0, 0.0])
    assert np.array_equal(n[:, 0, 0], [0.0, 1.0])


def test_product_rule_trivial_cases(stencil2d, rng):
    F = rng.standard_normal((2, 32, 32))
    assert np.max(np.abs(product_rule_remainder(np.ones((32, 32)), F, stencil2d))) == 0.0
    assert np.max(np.abs(product_rule_remainder(rng.standard_normal((32, 32)), np.zeros_like(F), stencil2d))) == 0.0


def test_product_rule_identity_16(compact2d, rng):
    st2 = build_stencil(compact2d, Torus.cube(2, 16, 1 / 16), [1.0, 0.0])
    x = st2.torus.coordinates()
    phi = np.sin(2 * np.pi * x[0]) * np.cos(2 * np.pi * x[1])
    F = rng.standard_normal((2, 16, 16))
    lhs = div(phi * F, st2, sign=-1, backend="direct")
    rhs = phi * div(F, st2, sign=-1, backend="direct") + np.sum(grad(phi, st2, backend="direct") * F, axis=0) \
        + product_rule_remainder(phi, F, st2)
    assert np.max(np.abs(lhs - rhs)) <= 1e-13


@given(seeds)
def test_norm_dominance(seed):
    st3 = _stencil3d()
    torus = st3.torus
    dom = build_box_domain(torus, [0.1] * 3, [0.4] * 3, st3.radius_cells)
    r = np.random.default_rng(seed)
    u = dom.extend(r.standard_normal((3, dom.count)))
    h = torus.h
    g = norm(grad(u, st3), h, 3)
    for sign in (1, -1):
        assert norm(div(u, st3, sign=sign), h, 3) <= (1 + 1e-10) * g
        assert norm(curl(u, st3, sign=sign), h, 3) <= (1 + 1e-10) * g


def test_wrong_shapes_rejected(stencil2d):
    with pytest.raises(ValueError):
        grad(np.zeros((31, 32)), stencil2d)
    with pytest.raises(ValueError):
        div(np.zeros((3, 32, 32)), stencil2d)
    with pytest.raises(ValueError):
        grad(np.zeros((32, 32)), stencil2d, sign=2)


def test_stencil_aliasing_rejected():
    with pytest.raises(ValueError, match="aliases"):
        build_stencil(KernelSpec("CompactIntegrable", 1, delta=4.0), Torus((8,), 1.0), [1.0])


def test_flipped_stencil_partition(stencil2d):
    assert np.array_equal(stencil2d.factor + stencil2d.flipped().factor, np.ones(len(stencil2d.offsets)))
    assert np.array_equal(stencil2d.flipped().nu, -stencil2d.nu)


_CACHE: dict = {}


def _stencil2d():
    if "2d" not in _CACHE:
        _CACHE["2d"] = build_stencil(KernelSpec("CompactIntegrable", 2, delta=0.25), Torus.cube(2, 32, 1 / 16), [0.6, 0.8])
    return _CACHE["2d"]


def _stencil3d():
    if "3d" not in _CACHE:
        spec = KernelSpec("CompactSingular", 3, delta=0.3, s=0.5)
        _CACHE["3d"] = build_stencil(spec, Torus.cube(3, 8, 1 / 8), [1.0, 2.0, 2.0])
    return _CACHE["3d"]


def test_m1_of_tail_truncated_kernel_uses_correction():
    spec = KernelSpec("FractionalTail", 1, alpha=0.5, R=1.0)
    st1 = build_stencil(spec, Torus((64,), 1 / 8), [1.0], radius=2.0)
    assert math.isfinite(st1.tail_correction) and st1.tail_correction > 0
