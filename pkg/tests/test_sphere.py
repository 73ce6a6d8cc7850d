import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from conftest import random_orthogonal
from geoperc.sphere import (
    DimensionError,
    RngStream,
    SphereDomainError,
    as_unit,
    basis_vector,
    beta_cdf,
    beta_density,
    gram_matrix,
    procrustes_align,
    read_positions_csv,
    reflection,
    sample_orthogonal_tangent,
    sample_uniform,
    write_positions_csv,
)


def test_rng_stream_is_value_semantic():
    a = RngStream(5, 1, (2,)).generator().random(4)
    b = RngStream(5, 1, (2,)).generator().random(4)
    c = RngStream(5, 1, (3,)).generator().random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert RngStream(5).child(2) == RngStream(5, 0, (2,))


def test_sample_uniform_circle_point_is_unit():
    u = sample_uniform(2, RngStream(1))
    assert u.shape == (2,)
    assert abs(np.hypot(*u) - 1) < 1e-12


@pytest.mark.parametrize("d", [0, 1, 2.5])
def test_sample_uniform_rejects_bad_dimension(d):
    with pytest.raises(DimensionError):
        sample_uniform(d, RngStream(0))


def test_sample_uniform_moments():
    u = sample_uniform(3, RngStream(2), size=100_000)
    assert np.all(np.abs(u.mean(axis=0)) < 0.02)
    assert abs(np.mean(u[:, 0] ** 2) - 1 / 3) < 0.01


def test_sample_uniform_rotation_invariance():
    rng = np.random.default_rng(3)
    q = random_orthogonal(3, rng)
    a = sample_uniform(3, RngStream(4), size=100_000)
    b = sample_uniform(3, RngStream(5), size=100_000) @ q.T
    assert stats.ks_2samp(a[:, 0], b[:, 0]).statistic < 0.02


def test_beta_density_d3_is_half():
    t = np.linspace(-1, 1, 11)
    assert np.allclose(beta_density(t, 3), 0.5)


@pytest.mark.parametrize("d", range(2, 11))
def test_beta_density_integrates_to_one(d):
    # substitute t = cos(theta) to remove the endpoint singularity at d = 2
    val, _ = integrate.quad(lambda th: beta_density(math.cos(th), d) * math.sin(th), 0, math.pi,
                            epsabs=1e-13, epsrel=1e-13)
    assert abs(val - 1) < 1e-10


def test_beta_density_constant_d5():
    # (1 - t^2) normalised on [-1, 1] is (3/4)(1 - t^2)
    assert abs(beta_density(0.0, 5) - 0.75) < 1e-14
    assert abs(beta_density(0.5, 5) - 0.75 * 0.75) < 1e-14


def test_beta_density_domain():
    with pytest.raises(SphereDomainError):
        beta_density(1.5, 3)


@pytest.mark.parametrize("d", [2, 3, 6])
def test_beta_cdf_matches_empirical(d):
    u = sample_uniform(d, RngStream(6), size=50_000)
    assert stats.kstest(u[:, 0], lambda t: beta_cdf(t, d)).statistic < 0.01


def test_tangent_on_circle_hits_both_directions():
    y = basis_vector(2, 0)
    u = sample_orthogonal_tangent(np.tile(y, (10_000, 1)), RngStream(7))
    assert np.allclose(np.abs(u[:, 1]), 1.0)
    assert abs(np.mean(u[:, 1] > 0) - 0.5) < 0.02


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_tangent_is_orthogonal_unit(d, seed):
    y = sample_uniform(d, seed, size=5)
    u = sample_orthogonal_tangent(y, seed + 1)
    assert np.all(np.abs(np.sum(u * y, axis=1)) < 1e-12)
    assert np.all(np.abs(np.linalg.norm(u, axis=1) - 1) < 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(1, 50), st.integers(0, 2**32 - 1))
def test_sampled_points_pass_norm_check(d, n, seed):
    x = sample_uniform(d, seed, size=n)
    assert np.all(np.abs(np.linalg.norm(x, axis=1) - 1) < 1e-12)
    as_unit(x)
    g = gram_matrix(x)
    assert np.allclose(g, g.T)
    assert np.allclose(np.diag(g), 1.0)
    assert np.linalg.eigvalsh(g).min() > -1e-9


def test_as_unit_rejects_non_unit():
    with pytest.raises(SphereDomainError):
        as_unit([1.0, 1.0])


def test_reflection_is_involution():
    w = sample_uniform(4, RngStream(8))
    r = reflection(w)
    assert np.allclose(r @ r, np.eye(4))
    assert np.allclose(r @ w, -w)


def test_procrustes_identity():
    m = np.random.default_rng(9).standard_normal((30, 3))
    rot, res = procrustes_align(m, m)
    assert res < 1e-9
    assert np.allclose(rot, np.eye(3), atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_procrustes_recovers_rotation(d, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((20, d))
    q = random_orthogonal(d, rng)
    rot, res = procrustes_align(m @ q, m)
    assert res < 1e-8
    assert np.allclose(rot, q.T, atol=1e-8)


def test_procrustes_noise_bound():
    rng = np.random.default_rng(10)
    m = rng.standard_normal((200, 3))
    _, res = procrustes_align(m + 0.01 * rng.standard_normal(m.shape), m)
    assert res <= 0.01 * math.sqrt(200 * 3) * 2


def test_procrustes_shape_mismatch():
    with pytest.raises(ValueError):
        procrustes_align(np.zeros((3, 2)), np.zeros((3, 3)))


def test_positions_csv_roundtrip(tmp_path):
    x = sample_uniform(3, RngStream(11), size=7)
    write_positions_csv(tmp_path / "p.csv", x)
    assert np.array_equal(read_positions_csv(tmp_path / "p.csv"), x)
