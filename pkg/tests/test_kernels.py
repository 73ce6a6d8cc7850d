import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from geoperc.kernels import (
    Kernel,
    KernelConstraintError,
    NotNormalizableError,
    UnsupportedDimensionError,
    band,
    builtin_kernels,
    check_graph_kernel,
    check_monotone,
    check_reconstruction_condition,
    compute_spectrum,
    constant,
    exponential,
    funk_hecke_eigenvalue,
    funk_hecke_eigenvalues,
    gegenbauer_table,
    is_markov,
    linear,
    multiplicity,
    normalize_markov,
    parse_kernel,
    spectrum_from_eigenvalues,
    squared_norm,
    wrapped_gaussian,
)
from geoperc.sphere import RngStream, beta_density, sample_uniform


@pytest.mark.parametrize("d", [2, 3, 4, 7])
def test_multiplicity_low_degrees(d):
    assert multiplicity(d, 0) == 1
    assert multiplicity(d, 1) == d


def test_multiplicity_matches_dimension_count():
    # dim of degree-l harmonics = C(l+d-1, d-1) - C(l+d-3, d-1)
    for d in range(2, 8):
        for ell in range(2, 12):
            expect = math.comb(ell + d - 1, d - 1) - math.comb(ell + d - 3, d - 1)
            assert multiplicity(d, ell) == expect


@pytest.mark.parametrize("d", [3, 5, 8])
def test_gegenbauer_matches_scipy(d):
    t = np.linspace(-1, 1, 41)
    table = gegenbauer_table(10, t, d)
    alpha = (d - 2) / 2
    for ell in range(11):
        ref = special.eval_gegenbauer(ell, alpha, t) / special.eval_gegenbauer(ell, alpha, 1.0)
        assert np.allclose(table[ell], ref, atol=1e-12)


def test_gegenbauer_circle_is_chebyshev():
    t = np.linspace(-1, 1, 41)
    table = gegenbauer_table(8, t, 2)
    for ell in range(9):
        assert np.allclose(table[ell], special.eval_chebyt(ell, t), atol=1e-12)


def test_constant_kernel_spectrum():
    lam = funk_hecke_eigenvalues(constant(1.0, 3), 12)
    assert abs(lam[0] - 1) < 1e-12
    assert np.all(np.abs(lam[1:]) < 1e-10)


def test_linear_kernel_eigenvalues():
    lam = funk_hecke_eigenvalues(linear(5, 3, 3), 6)
    assert abs(lam[0] - 5) < 1e-8
    assert abs(lam[1] - 1) < 1e-8
    assert np.all(np.abs(lam[2:]) < 1e-10)


@pytest.mark.parametrize("d", [2, 3, 4, 6])
def test_linear_kernel_lambda_is_b_over_d(d):
    assert abs(funk_hecke_eigenvalue(linear(2.0, 1.5, d), 1) - 1.5 / d) < 1e-10


def test_exponential_lambda1_against_trapezoid():
    # independent oracle: int t e^{2t} beta_3(t) dt on a 10^6-point grid
    t = np.linspace(-1, 1, 1_000_001)
    ref = np.trapezoid(t * np.exp(2 * t) * beta_density(t, 3), t)
    assert abs(funk_hecke_eigenvalue(exponential(2.0, 3), 1) - ref) < 1e-6


def test_exponential_closed_form_d3():
    # for d = 3 the eigenvalues are modified spherical Bessel functions i_l(s)
    s = 1.7
    lam = funk_hecke_eigenvalues(exponential(s, 3), 8)
    ref = special.spherical_in(np.arange(9), s)
    assert np.allclose(lam, ref, atol=1e-12)


@pytest.mark.parametrize("beta", [0.25, 1.0, 4.0])
def test_wrapped_gaussian_eigenvalues(beta):
    lam = funk_hecke_eigenvalues(wrapped_gaussian(beta), 10)
    ell = np.arange(11)
    assert np.allclose(lam, np.exp(-(ell**2) * beta / 2), atol=1e-8)


def test_wrapped_gaussian_large_beta_is_nearly_uniform():
    k = wrapped_gaussian(50.0)
    assert funk_hecke_eigenvalue(k, 1) < 1e-5
    assert np.max(np.abs(k.grid_values - 1)) < 1e-5


def test_wrapped_gaussian_requires_circle():
    with pytest.raises(UnsupportedDimensionError):
        wrapped_gaussian(1.0, d=3)
    with pytest.raises(KernelConstraintError):
        wrapped_gaussian(0.0)


def test_spectrum_gaps_linear():
    s = compute_spectrum(linear(5, 3, 3), L=6)
    assert abs(s.lambda_phi - 1) < 1e-10
    assert abs(s.gap_delta - 1) < 1e-10
    assert abs(s.gap_nonconstant - 1) < 1e-10
    assert s.block_rank() == (1, "top")
    assert abs(check_reconstruction_condition(s, linear(5, 3, 3)) - 0.125) < 1e-10


def test_spectrum_constant_is_degenerate():
    k = constant(4.0, 3)
    s = compute_spectrum(k, L=8)
    assert s.degenerate
    assert abs(s.gap_delta - 4) < 1e-9
    assert abs(check_reconstruction_condition(s, k) - 4) < 1e-9


@pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
def test_reconstruction_condition_scales_linearly(c):
    k = exponential(1.3, 3)
    base = check_reconstruction_condition(compute_spectrum(k), k)
    kc = k.scaled(c)
    assert abs(check_reconstruction_condition(compute_spectrum(kc), kc) - c * base) < 1e-9 * c


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([0.5, 2.0, 10.0]), st.floats(0.1, 4.0), st.integers(2, 6), st.integers(0, 6))
def test_eigenvalue_homogeneity(c, s, d, ell):
    k = exponential(s, d)
    assert abs(funk_hecke_eigenvalue(k.scaled(c), ell) - c * funk_hecke_eigenvalue(k, ell)) < 1e-10 * max(1, c)


def test_parseval_wrapped_gaussian():
    k = wrapped_gaussian(1.0)
    s = compute_spectrum(k, L=64)
    hs, _ = integrate.quad(lambda th: k.on_angle(np.array(th)) ** 2 / math.pi, 0, math.pi, epsabs=1e-13)
    assert abs(np.sum(s.multiplicities * s.eigenvalues**2) - hs) < 1e-6
    assert abs(squared_norm(k) - hs) < 1e-9


@pytest.mark.parametrize("k", [exponential(3.0, 3), linear(2, 1, 4), band(0.3, 0.2, 3), exponential(1.0, 6)])
def test_parseval_inequality_and_tail(k):
    s = compute_spectrum(k)
    assert s.parseval_residual > -1e-6
    assert s.parseval_residual < 1e-8


def test_a2_stable_under_truncation():
    k = wrapped_gaussian(1.0)
    a64 = compute_spectrum(k, L=64).a2_constant
    a128 = compute_spectrum(k, L=128).a2_constant
    assert np.isfinite(a64)
    assert abs(a128 - a64) / a64 < 0.01


def test_rotation_invariance_monte_carlo():
    # E[f(<x,y>) psi(x) psi(y)] with psi = sqrt(d) x_1 equals lambda_1
    d, k = 3, exponential(1.5, 3)
    x = sample_uniform(d, RngStream(1), size=1_000_000)
    y = sample_uniform(d, RngStream(2), size=1_000_000)
    v = k(np.sum(x * y, axis=1)) * d * x[:, 0] * y[:, 0]
    se = v.std() / math.sqrt(v.size)
    assert abs(v.mean() - funk_hecke_eigenvalue(k, 1)) < 3 * se


def test_normalize_markov_linear():
    k = normalize_markov(linear(5, 3, 3))
    assert np.allclose(k(np.array([-1.0, 0.0, 1.0])), [0.4, 1.0, 1.6])
    assert abs(funk_hecke_eigenvalue(k, 0) - 1) < 1e-12


def test_normalize_markov_noop_cases():
    k = constant(1.0, 3)
    assert normalize_markov(k) is k
    g = wrapped_gaussian(0.7)
    assert abs(funk_hecke_eigenvalue(g, 0) - 1) < 1e-8
    assert is_markov(g)


def test_normalize_markov_rejects_nonpositive_mass():
    k = Kernel(f=lambda t: t, d=3)
    with pytest.raises(NotNormalizableError):
        normalize_markov(k)


@pytest.mark.parametrize("k", [exponential(2.0, 3), linear(3, 2, 2), band(0.5, 0.3, 4), wrapped_gaussian(0.3)])
def test_markov_contraction(k):
    s = compute_spectrum(normalize_markov(k))
    assert abs(s.lambda0 - 1) < 1e-9
    assert np.all(np.abs(s.eigenvalues) <= 1 + 1e-9)


def test_catalog_flags():
    cat = builtin_kernels()
    assert set(cat) >= {"linear", "constant", "exponential", "wrapped_gaussian", "band"}
    k = exponential(1.0, 3)
    assert k.monotone == "increasing" and check_monotone(k)
    assert not check_monotone(band(0.0, 0.3, 3))


def test_graph_kernel_rejects_negative_values():
    with pytest.raises(KernelConstraintError):
        linear(1, 2, 3)
    with pytest.raises(KernelConstraintError):
        check_graph_kernel(Kernel(f=lambda t: t, d=3))


def test_parse_kernel():
    assert parse_kernel("linear:5,3", 3).params == (5.0, 3.0)
    g = parse_kernel("gaussian:lambda=0.8", 2)
    assert abs(funk_hecke_eigenvalue(g, 1) - 0.8) < 1e-10
    assert parse_kernel("exponential:2", 4).d == 4
    with pytest.raises(KernelConstraintError):
        parse_kernel("nope:1", 3)


def test_negative_lambda_block_counts_from_bottom():
    s = spectrum_from_eigenvalues(3, [2.0, -0.5, 0.1, -0.8])
    assert s.block_rank() == (7, "bottom")
    assert [v for _, v in s.negative] == [-0.5, -0.8]


def test_quadrature_handles_sharp_kernel():
    k = exponential(200.0, 3)
    lam = funk_hecke_eigenvalues(k, 4)
    ref = special.spherical_in(np.arange(5), 200.0)
    assert np.allclose(lam, ref, rtol=1e-8)
