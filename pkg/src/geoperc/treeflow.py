"""Branching random walks on the sphere and information flow from leaves to root.

Labels are propagated down a tree by a Markov kernel phi(x, .) d sigma.  The
module offers continuous-label simulation (Z_k statistic, any d), exact
root posteriors for a discretised circle (belief propagation, d = 2),
threshold calculators, and numerical checks of the reflection-symmetry
(DPS) lemmas behind the zero-flow bounds.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from .kernels import Kernel, Spectrum, check_monotone, funk_hecke_eigenvalue
from .sphere import (
    as_generator,
    as_unit,
    basis_vector,
    beta_cdf,
    beta_normalizer,
    sample_orthogonal_tangent,
    sample_uniform,
)

NODE_CAP = 10_000_000
CDF_GRID = 4096
CDF_TOL = 1e-6
MARKOV_TOL = 1e-8


class NotMarkovError(ValueError):
    pass


class HypothesisError(ValueError):
    """Kernel does not meet the hypotheses a calculator relies on."""


class ResourceCapError(RuntimeError):
    pass


class HypothesisWarning(UserWarning):
    pass


class DiscretizationWarning(UserWarning):
    pass


# --------------------------------------------------------------------------
# trees


@dataclass(frozen=True)
class TreeSpec:
    """Tree of depth ``depth``; integer ``q`` gives a q-ary tree.

    Non-integer q > 1 builds a tree of growth at most q: level k holds
    ceil(q^k) nodes and parents adopt up to ceil(q) children left to right.
    """

    q: float
    depth: int

    def __post_init__(self):
        if self.depth < 0 or int(self.depth) != self.depth:
            raise ValueError("depth must be a nonnegative integer")
        if self.regular:
            if self.q < 1:
                raise ValueError("arity must be >= 1")
        elif not self.q > 1:
            raise ValueError("growth bound q must exceed 1")
        if self.node_count() > NODE_CAP:
            raise ResourceCapError(
                f"tree with q={self.q}, depth={self.depth} has {self.node_count()} nodes (cap {NODE_CAP}); reduce depth"
            )

    @property
    def regular(self) -> bool:
        return float(self.q).is_integer()

    @property
    def fanout(self) -> int:
        return int(math.ceil(self.q))

    def level_size(self, k: int) -> int:
        if self.regular:
            return int(self.q) ** k
        return int(math.ceil(self.q**k - 1e-9))

    def node_count(self) -> int:
        total = 0
        for k in range(self.depth + 1):
            total += self.level_size(k)
            if total > NODE_CAP:
                break
        return total

    def parents(self, k: int) -> np.ndarray:
        """Parent index (within level k-1) of every node at level k >= 1."""
        return np.arange(self.level_size(k)) // self.fanout


@dataclass
class TreeSample:
    spec: TreeSpec
    levels: list  # levels[k]: (|T_k|, d) unit labels
    bins: list | None = None  # discrete mode: levels of int bin indices

    @property
    def root_label(self) -> np.ndarray:
        return self.levels[0][0]


# --------------------------------------------------------------------------
# neighbour sampling


class NeighborSampler:
    """Draw x ~ f(<x, y>) d sigma(x) given y.

    The cosine t = <x, y> is sampled by inverting a tabulated CDF in the
    angle theta = arccos t (density proportional to f(cos theta)
    sin^{d-2} theta), refined by grid doubling until the CDF moves by less
    than 1e-6.  The tangent part is uniform on the sphere orthogonal to y.
    """

    def __init__(self, k: Kernel, grid: int = CDF_GRID, check_markov: bool = True):
        if check_markov:
            lam0 = funk_hecke_eigenvalue(k, 0)
            if abs(lam0 - 1.0) > MARKOV_TOL:
                raise NotMarkovError(f"kernel has lambda_0 = {lam0:.10g}; normalise it first")
        self.kernel = k
        self.d = k.d
        theta, cdf = self._table(grid)
        while True:
            theta2, cdf2 = self._table(2 * len(theta) - 1)
            change = np.max(np.abs(np.interp(theta2, theta, cdf) - cdf2))
            theta, cdf = theta2, cdf2
            if change < CDF_TOL or len(theta) > 2**22:
                break
        self.theta, self.cdf = theta, cdf

    def _table(self, nodes: int):
        theta = np.linspace(0.0, np.pi, nodes)
        dens = beta_normalizer(self.d) * self.kernel.on_angle(theta) * np.sin(theta) ** (self.d - 2)
        cdf = np.concatenate(([0.0], np.cumsum((dens[1:] + dens[:-1]) * np.diff(theta) / 2.0)))
        return theta, cdf / cdf[-1]

    def sample_angle(self, size, rng=None) -> np.ndarray:
        u = as_generator(rng).random(size)
        return np.interp(u, self.cdf, self.theta)

    def cosine_cdf(self, t) -> np.ndarray:
        """Tabulated P(<x, y> <= t)."""
        th = np.arccos(np.clip(np.asarray(t, dtype=float), -1.0, 1.0))
        return 1.0 - np.interp(th, self.theta, self.cdf)

    def sample(self, parents, rng=None) -> np.ndarray:
        gen = as_generator(rng)
        y = np.atleast_2d(np.asarray(parents, dtype=float))
        theta = self.sample_angle(y.shape[0], gen)
        u = sample_orthogonal_tangent(y, gen)
        x = np.cos(theta)[:, None] * y + np.sin(theta)[:, None] * u
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        return x if np.ndim(parents) == 2 else x[0]


def sample_neighbor(y, k: Kernel, rng=None) -> np.ndarray:
    return NeighborSampler(k).sample(as_unit(y), rng)


def sample_tree(spec: TreeSpec, k: Kernel, rng=None, root=None, sampler: NeighborSampler | None = None) -> TreeSample:
    """Labels level by level; children independent given their parent."""
    gen = as_generator(rng)
    sampler = sampler or NeighborSampler(k)
    r = sample_uniform(k.d, gen) if root is None else as_unit(root)
    levels = [r[None, :]]
    for lvl in range(1, spec.depth + 1):
        levels.append(sampler.sample(levels[-1][spec.parents(lvl)], gen))
    return TreeSample(spec, levels)


def z_statistic(sample: TreeSample, k_level: int) -> np.ndarray:
    """Average label over level k."""
    if not 0 <= k_level < len(sample.levels):
        raise ValueError(f"level {k_level} not in tree of depth {len(sample.levels) - 1}")
    return sample.levels[k_level].mean(axis=0)


def z_projections(spec: TreeSpec, k: Kernel, replicates: int, rng, root=None) -> np.ndarray:
    """<Z_depth, root> over independent trees rooted at ``root`` (default e_1)."""
    gen = as_generator(rng)
    sampler = NeighborSampler(k)
    r = basis_vector(k.d) if root is None else as_unit(root)
    out = np.empty(replicates)
    for i in range(replicates):
        t = sample_tree(spec, k, gen, root=r, sampler=sampler)
        out[i] = z_statistic(t, spec.depth) @ r
    return out


def z_variance_bound(q: float, lam: float, k: int) -> float:
    """lambda^{2k} sum_{l=1}^k (q lambda^2)^{-l}."""
    return float(lam ** (2 * k) * sum((q * lam * lam) ** (-l) for l in range(1, k + 1)))


# --------------------------------------------------------------------------
# thresholds


def ks_condition(q: float, lambda_phi: float) -> bool:
    """Second-moment (Kesten-Stigum) sufficient condition for positive flow: q lambda^2 > 1."""
    if not q > 1:
        raise ValueError("q must exceed 1")
    return q * lambda_phi**2 > 1.0


def gaussian_zero_flow_condition(q: float, beta: float) -> bool:
    """Zero-flow condition for the wrapped Gaussian kernel: q exp(-beta/2) < 1."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    return q * math.exp(-beta / 2.0) < 1.0


def gaussian_flow_regime(q: float, beta: float) -> str:
    """'zero', 'positive' or 'open' (the window 1 <= q lambda and q lambda^2 <= 1)."""
    zero = gaussian_zero_flow_condition(q, beta)
    positive = ks_condition(q, math.exp(-beta / 2.0))
    assert not (zero and positive)
    return "zero" if zero else ("positive" if positive else "open")


@dataclass(frozen=True)
class QmaxReport:
    q_max: float
    p: float
    k0: float
    lambda_phi: float
    f_at_1: float
    symbolic_form: str = (
        "q <= (1 - c * ln(lambda) * (1 - lambda)^2 / ln(lambda * (1 - lambda) / f(1)))^(-1), c universal"
    )

    def to_dict(self) -> dict:
        return asdict(self)


def mixing_steps(lam: float, f_at_1: float) -> float:
    """k0 = ln(lambda (1 - lambda) / (32 f(1))) / ln(lambda)."""
    if not 0 < lam < 1:
        raise HypothesisError(f"need 0 < lambda(phi) < 1, got {lam}")
    if not f_at_1 > 0:
        raise HypothesisError("f(1) must be positive")
    return math.log(lam * (1.0 - lam) / (32.0 * f_at_1)) / math.log(lam)


def zero_flow_qmax(lam: float, f_at_1: float) -> QmaxReport:
    """Largest growth rate covered by the explicit single-reflection bound.

    p = 1 - (1 - lambda)^2 / (600 k0) and q_max = 1 / p.
    """
    k0 = mixing_steps(lam, f_at_1)
    p = 1.0 - (1.0 - lam) ** 2 / (600.0 * k0)
    return QmaxReport(q_max=1.0 / p, p=p, k0=k0, lambda_phi=lam, f_at_1=f_at_1)


def check_zero_flow_hypotheses(k: Kernel, s: Spectrum, tol: float = 1e-9) -> None:
    if not check_monotone(k):
        raise HypothesisError(f"{k.describe()}: f is not (verifiably) monotone")
    if not k.continuous:
        raise HypothesisError(f"{k.describe()}: f is not continuous")
    if abs(s.lambda0 - 1.0) > MARKOV_TOL:
        raise HypothesisError(f"kernel is not Markov (lambda_0 = {s.lambda0:.6g}); normalise it first")
    lam = s.lambda_phi
    if not lam > 0:
        raise HypothesisError(f"lambda(phi) = {lam:.4g} must be positive")
    if lam >= 1:
        raise HypothesisError(f"lambda(phi) = {lam:.4g} must be < 1")
    higher = np.abs(s.eigenvalues[1:])
    if np.any(higher > lam + tol):
        bad = int(np.argmax(higher > lam + tol)) + 1
        raise HypothesisError(f"|lambda_{bad}| = {higher[bad - 1]:.4g} exceeds lambda(phi) = {lam:.4g}")


def general_zero_flow_qmax(k: Kernel, s: Spectrum) -> QmaxReport:
    check_zero_flow_hypotheses(k, s)
    return zero_flow_qmax(s.lambda_phi, k.f_at_1)


# --------------------------------------------------------------------------
# discretised circle and belief propagation


def transition_matrix(k: Kernel, m: int) -> np.ndarray:
    """Circulant P[a, b] proportional to f(cos(2 pi (a - b) / m)), rows summing to 1."""
    if k.d != 2:
        raise ValueError("discrete mode needs d = 2")
    if m < 16:
        raise ValueError("use at least 16 bins")
    a = np.arange(m)
    p = k.on_angle(2.0 * np.pi * (a[:, None] - a[None, :]) / m)
    if np.any(p < 0):
        raise ValueError("kernel must be nonnegative")
    p = p / p.sum(axis=1, keepdims=True)
    if p.max() > 0.5:
        warnings.warn(
            f"transition rows put {p.max():.2f} mass on one bin; increase m", DiscretizationWarning, stacklevel=2
        )
    return p


def bin_vectors(bins, m: int) -> np.ndarray:
    ang = 2.0 * np.pi * np.asarray(bins) / m
    return np.stack([np.cos(ang), np.sin(ang)], axis=-1)


def sample_tree_bins(spec: TreeSpec, p: np.ndarray, rng=None, root_bin: int | None = None) -> list:
    gen = as_generator(rng)
    m = p.shape[0]
    cum = np.cumsum(p, axis=1)
    cum[:, -1] = 1.0
    r = int(gen.integers(m)) if root_bin is None else int(root_bin)
    levels = [np.array([r])]
    for lvl in range(1, spec.depth + 1):
        par = levels[-1][spec.parents(lvl)]
        u = gen.random(par.size)
        levels.append((u[:, None] > cum[par]).sum(axis=1))
    return levels


def bp_root_posterior(spec: TreeSpec, p: np.ndarray, leaf_bins, level: int | None = None, prior=None) -> np.ndarray:
    """Exact posterior of the root bin given the bins at ``level`` (default: depth).

    Upward pass: a node's message is the normalised product over its
    children of P @ (child message); leaves send indicators.
    """
    level = spec.depth if level is None else level
    m = p.shape[0]
    bins = np.asarray(leaf_bins)
    if bins.size != spec.level_size(level):
        raise ValueError("leaf bin count does not match the level size")
    msg = np.zeros((bins.size, m))
    msg[np.arange(bins.size), bins] = 1.0
    for lvl in range(level, 0, -1):
        sent = msg @ p.T
        parents = spec.parents(lvl)
        size = spec.level_size(lvl - 1)
        if spec.regular and bins.size:
            q = int(spec.q)
            combined = sent.reshape(size, q, m).prod(axis=1)
        else:
            combined = np.ones((size, m))
            np.multiply.at(combined, parents, sent)
        msg = combined / combined.sum(axis=1, keepdims=True)
    post = msg[0] * (np.full(m, 1.0 / m) if prior is None else np.asarray(prior, dtype=float))
    return post / post.sum()


def brute_force_root_posterior(spec: TreeSpec, p: np.ndarray, leaf_bins, prior=None) -> np.ndarray:
    """Root posterior by summing the joint law over every hidden assignment (tiny trees only)."""
    m = p.shape[0]
    leaves = np.asarray(leaf_bins)
    if spec.depth == 0:
        return np.eye(m)[int(leaves[0])]
    prior = np.full(m, 1.0 / m) if prior is None else np.asarray(prior, dtype=float)
    # hidden nodes: every level above the leaves, as (level, index)
    hidden = [(lvl, i) for lvl in range(spec.depth) for i in range(spec.level_size(lvl))]
    pos = {node: h for h, node in enumerate(hidden)}
    edges = []
    for lvl in range(1, spec.depth + 1):
        for i, par in enumerate(spec.parents(lvl)):
            edges.append(((lvl - 1, int(par)), (lvl, i)))
    post = np.zeros(m)
    for assign in itertools.product(range(m), repeat=len(hidden)):
        w = prior[assign[0]]
        for (plvl, pi), (clvl, ci) in edges:
            a = assign[pos[(plvl, pi)]]
            b = leaves[ci] if clvl == spec.depth else assign[pos[(clvl, ci)]]
            w *= p[a, b]
            if w == 0.0:
                break
        post[assign[0]] += w
    return post / post.sum()


def tv_to_uniform(post) -> float:
    post = np.asarray(post, dtype=float)
    return float(0.5 * np.abs(post - 1.0 / post.size).sum())


@dataclass(frozen=True)
class FlowPoint:
    k: int
    tv: float
    z: float
    posterior: np.ndarray


def bp_posterior_circle(spec: TreeSpec, k: Kernel, m: int, rng=None, root_bin: int | None = None) -> FlowPoint:
    """Simulate one discretised tree and return TV(root posterior, uniform)."""
    p = transition_matrix(k, m)
    levels = sample_tree_bins(spec, p, rng, root_bin)
    post = bp_root_posterior(spec, p, levels[-1])
    z = float(bin_vectors(levels[-1], m).mean(axis=0) @ bin_vectors(levels[0][0], m))
    return FlowPoint(spec.depth, tv_to_uniform(post), z, post)


@dataclass(frozen=True)
class FlowRecord:
    k: int
    tv_mean: float
    tv_stderr: float
    z_mean: float
    z_var: float
    replicates: int


@dataclass
class FlowCurve:
    records: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def tv(self, k: int) -> FlowRecord:
        for r in self.records:
            if r.k == k:
                return r
        raise KeyError(k)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "tv_mean", "tv_stderr", "z_mean", "z_var", "replicates"])
        for r in self.records:
            w.writerow([r.k, repr(r.tv_mean), repr(r.tv_stderr), repr(r.z_mean), repr(r.z_var), r.replicates])
        return buf.getvalue()


def flow_experiment(q: float, depths, k: Kernel, m: int, replicates: int, rng) -> FlowCurve:
    """Average TV(root posterior, uniform) over replicate trees for each depth.

    Each replicate draws one tree of the largest depth with a uniform root;
    the posterior at depth k uses only that tree's level-k bins.  Replicate
    r uses child stream r when ``rng`` is an RngStream.
    """
    depths = sorted(int(x) for x in depths)
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    spec = TreeSpec(q, depths[-1])
    p = transition_matrix(k, m)
    tv = np.empty((replicates, len(depths)))
    z = np.empty_like(tv)
    gen = None if hasattr(rng, "child") else as_generator(rng)
    for r in range(replicates):
        g = rng.child(r).generator() if gen is None else gen
        levels = sample_tree_bins(spec, p, g)
        root_vec = bin_vectors(levels[0][0], m)
        for c, kk in enumerate(depths):
            post = bp_root_posterior(spec, p, levels[kk], level=kk)
            tv[r, c] = tv_to_uniform(post)
            z[r, c] = bin_vectors(levels[kk], m).mean(axis=0) @ root_vec
    ddof = 1 if replicates > 1 else 0
    records = [
        FlowRecord(
            k=kk,
            tv_mean=float(tv[:, c].mean()),
            tv_stderr=float(tv[:, c].std(ddof=ddof) / math.sqrt(replicates)),
            z_mean=float(z[:, c].mean()),
            z_var=float(z[:, c].var(ddof=ddof)),
            replicates=replicates,
        )
        for c, kk in enumerate(depths)
    ]
    return FlowCurve(records, {"q": q, "m": m, "kernel": k.describe()})


# --------------------------------------------------------------------------
# reflection symmetry (DPS) checks


@dataclass(frozen=True)
class DpsReport:
    w: np.ndarray
    y: np.ndarray
    epsilon: float
    mass_plus: float
    mass_minus: float
    method: str
    stderr: float
    samples: int | None = None

    def to_dict(self) -> dict:
        return {
            "w": self.w.tolist(),
            "y": self.y.tolist(),
            "epsilon": self.epsilon,
            "mass_plus": self.mass_plus,
            "mass_minus": self.mass_minus,
            "method": self.method,
            "stderr": self.stderr,
            "samples": self.samples,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _angle(v) -> float:
    return math.atan2(v[1], v[0])


def _halfspace_mass_circle(k: Kernel, y, w) -> float:
    """mu(H_w^-) for d = 2 by adaptive quadrature over the half circle."""
    lo = _angle(w) - _angle(y) + np.pi / 2.0
    hi = lo + np.pi
    peaks = [2 * np.pi * j for j in range(-2, 3) if lo < 2 * np.pi * j < hi]
    val, _ = integrate.quad(lambda a: float(k.on_angle(np.array(a))), lo, hi, points=peaks or None,
                            epsabs=1e-11, epsrel=1e-11, limit=200)
    return val / (2.0 * np.pi)


def _halfspace_mass_sphere(k: Kernel, y, w) -> float:
    """mu(H_w^-) for d >= 3 by 1-D quadrature over t = <x, y>.

    Given <x, y> = t, <x, w> = t a + sqrt(1 - t^2) sqrt(1 - a^2) s with
    a = <y, w> and s distributed as the S^{d-2} marginal.
    """
    d = k.d
    a = float(np.clip(np.dot(y, w), -1.0, 1.0))
    if abs(abs(a) - 1.0) < 1e-15:
        # y = +-w: the half-space is a cap in t
        return 1.0 - _cap_mass(k, 0.0) if a < 0 else _cap_mass(k, 0.0)
    ra = math.sqrt(1.0 - a * a)

    def integrand(theta):
        t, st = math.cos(theta), math.sin(theta)
        thr = -t * a / (st * ra) if st > 0 else (-np.inf if t * a > 0 else np.inf)
        return float(k.on_angle(np.array(theta))) * st ** (d - 2) * float(beta_cdf(np.clip(thr, -1, 1), d - 1))

    val, _ = integrate.quad(integrand, 0.0, np.pi, epsabs=1e-11, epsrel=1e-11, limit=400)
    return beta_normalizer(d) * val


def _cap_mass(k: Kernel, t0: float) -> float:
    """mu({x : <x, y> < t0})."""
    hi = math.acos(-1.0)
    lo = math.acos(t0)
    val, _ = integrate.quad(lambda th: float(k.on_angle(np.array(th))) * math.sin(th) ** (k.d - 2), lo, hi,
                            epsabs=1e-12, limit=200)
    return beta_normalizer(k.d) * val


def dps_epsilon(
    k: Kernel,
    y,
    w,
    method: str = "auto",
    samples: int = 1_000_000,
    rng=None,
    sampler: NeighborSampler | None = None,
) -> DpsReport:
    """Reflection-symmetric fraction epsilon = 2 min(mu(H_w^+), mu(H_w^-)) of mu = f(<., y>) d sigma.

    ``method``: ``"quadrature"`` (exact 1-D integral), ``"monte-carlo"``
    (``samples`` draws, binomial standard error) or ``"auto"``
    (quadrature on the circle, Monte Carlo for d >= 3).
    """
    y, w = as_unit(y), as_unit(w)
    if k.monotone is None or not check_monotone(k):
        warnings.warn("kernel is not monotone; the reflection decomposition is not guaranteed",
                      HypothesisWarning, stacklevel=2)
    if method == "auto":
        method = "quadrature" if k.d == 2 else "monte-carlo"
    if method == "quadrature":
        lam0 = funk_hecke_eigenvalue(k, 0)
        if abs(lam0 - 1.0) > MARKOV_TOL:
            raise NotMarkovError(f"kernel has lambda_0 = {lam0:.10g}; normalise it first")
        minus = _halfspace_mass_circle(k, y, w) if k.d == 2 else _halfspace_mass_sphere(k, y, w)
        plus = 1.0 - minus
        return DpsReport(w, y, 2.0 * min(plus, minus), plus, minus, "quadrature", 0.0)
    if method != "monte-carlo":
        raise ValueError(f"unknown method {method!r}")
    sampler = sampler or NeighborSampler(k)
    x = sampler.sample(np.broadcast_to(y, (samples, y.size)), rng)
    minus = float(np.mean(x @ w < 0.0))
    plus = 1.0 - minus
    pmin = min(plus, minus)
    se = 2.0 * math.sqrt(pmin * (1.0 - pmin) / samples)
    return DpsReport(w, y, 2.0 * pmin, plus, minus, "monte-carlo", se, samples)


def symmetric_part_mass(k: Kernel, y, w) -> float:
    """Mass of min(f(<x, y>), f(<Rx, y>)) d sigma on the circle, R the reflection about w^perp.

    For monotone f this is the reflection-invariant part of the monotone
    decomposition and equals 2 min(mu(H_w^+), mu(H_w^-)).
    """
    if k.d != 2:
        raise ValueError("circle quadrature only (d = 2)")
    ay, aw = _angle(as_unit(y)), _angle(as_unit(w))

    def integrand(th):
        v1 = float(k.on_angle(np.array(th - ay)))
        v2 = float(k.on_angle(np.array(2 * aw + np.pi - th - ay)))
        return min(v1, v2)

    pts = np.linspace(0.0, 2 * np.pi, 65)[1:-1]
    val, _ = integrate.quad(integrand, 0.0, 2 * np.pi, points=pts, epsabs=1e-11, epsrel=1e-11, limit=500)
    return val / (2.0 * np.pi)


def band_halfwidth(lam: float, d: int) -> float:
    """(1 - lambda) / (16 sqrt(d)): the alignment band of the mixing and eigen-DPS bounds."""
    return (1.0 - lam) / (16.0 * math.sqrt(d))


def band_mass(halfwidth: float, d: int) -> float:
    """sigma({u : |<u, w>| <= halfwidth})."""
    return float(beta_cdf(halfwidth, d) - beta_cdf(-halfwidth, d))


def mixing_hit_probability(
    k: Kernel,
    w,
    x0,
    k0: float,
    replicates: int = 100_000,
    rng=None,
    lam: float | None = None,
) -> tuple[float, float]:
    """Monte Carlo P(X_{k0} in S(w)) for the walk started at x0, with its standard error.

    S(w) is the band |<u, w>| <= (1 - lambda) / (16 sqrt(d)).  Non-integer
    k0 is rounded up.
    """
    w, x0 = as_unit(w), as_unit(x0)
    lam = funk_hecke_eigenvalue(k, 1) if lam is None else lam
    h = band_halfwidth(lam, k.d)
    steps = int(math.ceil(k0 - 1e-12))
    if steps <= 0:
        return float(abs(x0 @ w) <= h), 0.0
    gen = as_generator(rng)
    sampler = NeighborSampler(k)
    x = np.broadcast_to(x0, (replicates, x0.size)).copy()
    for _ in range(steps):
        x = sampler.sample(x, gen)
    hit = np.abs(x @ w) <= h
    p = float(hit.mean())
    return p, math.sqrt(max(p * (1.0 - p), 1e-300) / replicates)
