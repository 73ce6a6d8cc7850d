"""Points on the unit sphere S^{d-1}: sampling, marginals, Gram matrices, alignment."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import special

NORM_TOL = 1e-12


class DimensionError(ValueError):
    """Raised when a sphere dimension d < 2 is requested."""


class SphereDomainError(ValueError):
    """Raised for arguments outside [-1, 1] or non-unit inputs."""


@dataclass(frozen=True)
class RngStream:
    """Value-semantic random stream.

    Identical ``(seed, stream_id, path)`` always yields the identical draw
    sequence.  Parallel code derives children with :meth:`child` instead of
    sharing one generator.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id), *self.path))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> RngStream:
        return replace(self, path=self.path + (int(index),))


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a numpy Generator, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


def check_dimension(d: int) -> int:
    if int(d) != d or d < 2:
        raise DimensionError(f"sphere dimension d must be an integer >= 2, got {d}")
    return int(d)


def as_unit(x, tol: float = 1e-8) -> np.ndarray:
    """Return ``x`` renormalised to unit length.

    Vectors whose norm is further than ``tol`` from 1 are rejected rather
    than silently projected.
    """
    x = np.asarray(x, dtype=float)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(np.abs(norms - 1.0) > tol):
        raise SphereDomainError("expected unit vector(s)")
    check_dimension(x.shape[-1])
    return x / norms


def basis_vector(d: int, i: int = 0) -> np.ndarray:
    e = np.zeros(check_dimension(d))
    e[i] = 1.0
    return e


def sample_uniform(d: int, rng=None, size: int | None = None) -> np.ndarray:
    """Uniform point(s) on S^{d-1} by normalising isotropic Gaussians.

    Returns shape ``(d,)`` when ``size`` is None, else ``(size, d)``.
    """
    d = check_dimension(d)
    gen = as_generator(rng)
    shape = (d,) if size is None else (int(size), d)
    while True:
        g = gen.standard_normal(shape)
        norms = np.linalg.norm(g, axis=-1, keepdims=True)
        # norm == 0 has probability zero but would produce NaNs
        if np.all(norms > 0):
            return g / norms


def beta_normalizer(d: int) -> float:
    d = check_dimension(d)
    return float(np.exp(special.gammaln(d / 2) - special.gammaln((d - 1) / 2)) / np.sqrt(np.pi))


def beta_density(t, d: int):
    """Density of <u, e_1> for u uniform on S^{d-1}.

    beta_d(t) = Gamma(d/2) / (sqrt(pi) Gamma((d-1)/2)) * (1 - t^2)^((d-3)/2),
    which integrates to one on [-1, 1].  For d = 2 the density is
    1 / (pi sqrt(1 - t^2)) and diverges at the endpoints.
    """
    d = check_dimension(d)
    t_arr = np.asarray(t, dtype=float)
    if np.any(np.abs(t_arr) > 1.0):
        raise SphereDomainError("beta_density is defined on [-1, 1]")
    with np.errstate(divide="ignore"):
        out = beta_normalizer(d) * np.power(1.0 - t_arr * t_arr, (d - 3) / 2.0)
    return float(out) if np.ndim(out) == 0 else out


def beta_cdf(t, d: int):
    """CDF of the sphere marginal; a symmetric Beta((d-1)/2, (d-1)/2) on [-1, 1]."""
    d = check_dimension(d)
    t_arr = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
    a = (d - 1) / 2.0
    out = special.betainc(a, a, (1.0 + t_arr) / 2.0)
    return float(out) if np.ndim(out) == 0 else out


def sample_orthogonal_tangent(y, rng=None) -> np.ndarray:
    """Uniform unit vector(s) in the orthogonal complement of ``y``.

    ``y`` may be a single vector or a batch of shape ``(m, d)``; one tangent
    direction is drawn per row.
    """
    y = as_unit(y)
    gen = as_generator(rng)
    while True:
        g = gen.standard_normal(y.shape)
        g = g - np.sum(g * y, axis=-1, keepdims=True) * y
        norms = np.linalg.norm(g, axis=-1, keepdims=True)
        if np.all(norms > 1e-300):
            break
    u = g / norms
    # one more projection pass keeps <u, y> at roundoff level
    u = u - np.sum(u * y, axis=-1, keepdims=True) * y
    return u / np.linalg.norm(u, axis=-1, keepdims=True)


def reflection(w) -> np.ndarray:
    """Householder reflection I - 2 w w^T about the hyperplane w^perp."""
    w = as_unit(w)
    return np.eye(w.shape[0]) - 2.0 * np.outer(w, w)


def gram_matrix(points) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    return x @ x.T


def procrustes_align(estimate, truth) -> tuple[np.ndarray, float]:
    """Orthogonal Procrustes: R minimising ||estimate @ R - truth||_F.

    Returns ``(R, residual)`` with the residual at the optimum.
    """
    a = np.asarray(estimate, dtype=float)
    b = np.asarray(truth, dtype=float)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    u, _, vt = np.linalg.svd(a.T @ b)
    rot = u @ vt
    return rot, float(np.linalg.norm(a @ rot - b))


def write_positions_csv(path, points) -> None:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in pts:
            writer.writerow([format(v, ".17g") for v in row])


def read_positions_csv(path) -> np.ndarray:
    rows = [row for row in csv.reader(Path(path).read_text().splitlines()) if row]
    return np.array([[float(v) for v in row] for row in rows], dtype=float)
