from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import gamma

from nlvc.kernels import KernelSpec, comparison_kernel, scale_kernel
from nlvc.lattice import Torus
from nlvc.stencil import build_stencil
from nlvc.symbols import (
    check_equivariance,
    comparison_constant,
    discrete_symbol_at,
    frequency_grid,
    imag_profile,
    positivity_witness,
    radial_transform,
    symbol_bound,
    symbol_continuum,
)

ROT90 = np.array([[0.0, -1.0], [1.0, 0.0]])
COMPACT2 = KernelSpec("CompactIntegrable", 2, delta=0.5, c0=2.0)
SINGULAR3 = KernelSpec("CompactSingular", 3, delta=0.7, s=0.3)
FRAC2 = KernelSpec("FractionalTail", 2, alpha=0.5)


def _polar_oracle(spec: KernelSpec, xi: np.ndarray, n: int = 120) -> np.ndarray:
    """Tensor Gauss-Legendre in polar coordinates over the half disc {z1 >= 0} of a constant kernel."""
    x, w = np.polynomial.legendre.leggauss(n)
    r = 0.5 * spec.delta * (x + 1)
    wr = 0.5 * spec.delta * w
    th = 0.5 * np.pi * x
    wt = 0.5 * np.pi * w
    R, T = np.meshgrid(r, th, indexing="ij")
    W = np.outer(wr, wt) * R * spec.c0
    phase = np.exp(2j * np.pi * (xi[0] * R * np.cos(T) + xi[1] * R * np.sin(T))) - 1
    return np.array([np.sum(W * np.cos(T) * phase), np.sum(W * np.sin(T) * phase)])


def test_zero_frequency():
    assert np.array_equal(symbol_continuum(COMPACT2, [1, 0], [0, 0]).lam, [0, 0])


@pytest.mark.parametrize("k", [0.3, 1.0, 7.5])
def test_indicator_1d_closed_form(k):
    spec = KernelSpec("CompactIntegrable", 1, delta=1.0)
    # int_0^1 (exp(2 pi i k r) - 1) dr
    exact = (np.exp(2j * np.pi * k) - 1) / (2j * np.pi * k) - 1
    assert symbol_continuum(spec, [1.0], [k]).lam[0] == pytest.approx(exact, abs=1e-13)
    assert symbol_continuum(spec, [-1.0], [k]).lam[0] == pytest.approx(-np.conj(exact), abs=1e-13)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("k", [0.01, 1.0, 30.0])
def test_pure_fractional_1d_closed_form(alpha, k):
    spec = KernelSpec("FractionalTail", 1, alpha=alpha, c0=1.5)
    exact = 1.5 * (2 * np.pi * k) ** alpha * gamma(-alpha) * np.exp(-0.5j * np.pi * alpha)
    assert symbol_continuum(spec, [1.0], [k]).lam[0] == pytest.approx(exact, rel=1e-10)


def test_pure_fractional_half_at_one():
    lam = symbol_continuum(KernelSpec("FractionalTail", 1, alpha=0.5), [1.0], [1.0]).lam[0]
    assert lam == pytest.approx(-2 * np.pi + 2j * np.pi, rel=1e-12)


def test_indicator_profile_at_half():
    assert imag_profile(KernelSpec("CompactIntegrable", 1, delta=1.0), 0.5) == pytest.approx(2 / np.pi, abs=1e-12)


def test_tempered_radial_transform_matches_quad():
    spec = KernelSpec("Tempered", 1, alpha=0.4, lambda_t=2.0)
    k = 0.8
    re = integrate.quad(lambda r: r**-1.4 * np.exp(-2 * r) * (np.cos(2 * np.pi * k * r) - 1), 0, np.inf, limit=400)[0]
    im = integrate.quad(lambda r: r**-1.4 * np.exp(-2 * r) * np.sin(2 * np.pi * k * r), 0, np.inf, limit=400)[0]
    assert radial_transform(spec, np.array([k]))[0] == pytest.approx(re + 1j * im, rel=1e-8)


@pytest.mark.parametrize("xi", [[0.3, 0.1], [2.0, -1.5], [-4.2, 7.7]])
def test_compact_2d_matches_polar_oracle(xi):
    xi = np.array(xi)
    assert np.allclose(symbol_continuum(COMPACT2, [1.0, 0.0], xi).lam, _polar_oracle(COMPACT2, xi), rtol=0, atol=1e-12)


@pytest.mark.parametrize("spec", [COMPACT2, SINGULAR3, FRAC2], ids=["compact2", "singular3", "frac2"])
def test_structure_at_random_frequencies(spec, rng):
    d = spec.d
    nu = rng.standard_normal(d)
    nu /= np.linalg.norm(nu)
    for _ in range(4):
        xi = rng.standard_normal(d) * rng.choice([0.1, 1.0, 5.0])
        s = symbol_continuum(spec, nu, xi)
        xhat = xi / np.linalg.norm(xi)
        perp = s.im - (s.im @ xhat) * xhat
        assert np.linalg.norm(perp) <= 1e-9 * s.magnitude
        assert s.im @ xhat == pytest.approx(s.Lambda_w, rel=1e-9)
        assert 0 < s.magnitude <= symbol_bound(spec, xi) * (1 + 1e-6)
        assert positivity_witness(spec, nu, xi) > 0


def test_equivariance_identity_and_quarter_turn(rng):
    xis = rng.standard_normal((10, 2)) * 3
    assert check_equivariance(COMPACT2, np.eye(2), xis).max_deviation == 0.0
    assert check_equivariance(COMPACT2, ROT90, xis).max_deviation <= 1e-7
    assert check_equivariance(FRAC2, ROT90, xis[:4]).max_deviation <= 1e-7


def test_comparison_constant_of_comparison_kernel_is_one():
    spec = KernelSpec("CompactIntegrable", 2, delta=1.0, c0=0.5)
    res = comparison_constant(spec, [1.0, 0.0], frequency_grid(2, [0.1, 1.0, 10.0], 4))
    assert np.all(res.ratios == 1.0)


def test_comparison_constant_fractional_regression():
    # grid minimum over the default log-spaced grid; recorded on first computation
    res = comparison_constant(KernelSpec("FractionalTail", 1, alpha=0.5), [1.0])
    assert res.C_est == pytest.approx(5.286767513634903, rel=1e-9)
    assert not res.flagged


def test_discrete_symbol_converges_second_order():
    xi = np.array([1.3, 0.7])
    ref = symbol_continuum(COMPACT2, [1.0, 0.0], xi).lam
    errs = []
    for n in (16, 32, 64):
        stencil = build_stencil(COMPACT2, Torus.cube(2, n, 2 / n), [1.0, 0.0])
        errs.append(np.linalg.norm(discrete_symbol_at(stencil, xi) - ref))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)


@given(st.floats(0.05, 1.0), st.floats(0.01, 20.0))
def test_scaled_kernel_symbol(t, k):
    # w_t(x) = t^{-d-1} w(x / t) has symbol lambda(t xi) / t
    spec = KernelSpec("CompactIntegrable", 1, delta=1.0)
    a = symbol_continuum(scale_kernel(spec, t), [1.0], [k]).lam[0]
    b = symbol_continuum(spec, [1.0], [t * k]).lam[0] / t
    assert a == pytest.approx(b, rel=1e-10, abs=1e-12)


def test_comparison_kernel_dominated_on_grid():
    spec = KernelSpec("FractionalTail", 2, alpha=0.75)
    res = comparison_constant(spec, [0.0, 1.0], frequency_grid(2, np.logspace(-1, 1, 4), 6), comparison_kernel(spec))
    assert res.C_est > 1e-6 and math.isfinite(res.C_est)
