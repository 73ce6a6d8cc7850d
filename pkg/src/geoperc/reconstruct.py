"""Spectral recovery of the latent Gram matrix from a sparse geometric graph.

Pipeline: trim high-degree vertices, compute the extreme eigenpairs of the
weighted adjacency A', pick the d eigenvectors whose eigenvalues sit at the
degree-1 block of the kernel spectrum, and return the Gram factor.  Dense
oracles over the exact kernel matrix M_n = f(<X_i, X_j>) / n back the
convergence checks.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .graph import DENSE_ORACLE_MAX_N, LatentSample, SparseGraph, trim_degrees
from .kernels import Kernel, Spectrum, multiplicity

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8


class SelectionError(RuntimeError):
    """The degree-1 eigenvalue block cannot be located."""


class EigenSolverError(ArithmeticError):
    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class EigenBlock:
    values: np.ndarray  # decreasing
    vectors: np.ndarray  # (n, m), orthonormal columns
    selection_ranks: np.ndarray | None = None  # 1-based positions in decreasing order


@dataclass(frozen=True)
class Selection:
    block: EigenBlock
    rule: str
    rank_values: np.ndarray | None
    nearest_values: np.ndarray | None
    agree: bool | None


@dataclass
class GramEstimate:
    """Gram estimate G_hat = factor @ factor.T, kept in factored form."""

    factor: np.ndarray
    meta: dict = field(default_factory=dict)

    def entry(self, i: int, j: int) -> float:
        return float(self.factor[i] @ self.factor[j])

    def gram(self) -> np.ndarray:
        if self.factor.shape[0] > 20_000:
            raise MemoryError("refusing to materialise an n x n Gram matrix for n > 20000")
        return self.factor @ self.factor.T


@dataclass
class ReconstructionReport:
    n: int
    d: int
    kernel: str
    mse: float | None
    spectral_gap_observed: float
    eigenvalues_near_target: list
    selection_ranks: list
    trimmed_count: int
    runtime_ms: float | None = None
    seed: int | None = None
    rule: str = "rank"
    nearest_eigenvalues: list | None = None
    selections_agree: bool | None = None
    budget_exceeded: bool = False

    def to_dict(self, timing: bool = False) -> dict:
        out = {
            "n": self.n,
            "d": self.d,
            "kernel": self.kernel,
            "seed": self.seed,
            "mse": self.mse,
            "eigenvalues_near_target": [float(v) for v in self.eigenvalues_near_target],
            "selection_ranks": [int(r) for r in self.selection_ranks],
            "trimmed_count": self.trimmed_count,
            "runtime_ms": self.runtime_ms if timing else None,
            "spectral_gap_observed": self.spectral_gap_observed,
            "rule": self.rule,
            "nearest_eigenvalues": None if self.nearest_eigenvalues is None else [float(v) for v in self.nearest_eigenvalues],
            "selections_agree": self.selections_agree,
            "trim_budget_exceeded": self.budget_exceeded,
        }
        return out


# --------------------------------------------------------------------------
# eigen-solver


def _as_operator(g):
    if isinstance(g, SparseGraph):
        return g.adjacency()
    if sp.issparse(g):
        return g.tocsr()
    return np.asarray(g, dtype=float)


def _check_residuals(a, values, vectors):
    res = np.linalg.norm(a @ vectors - vectors * values, axis=0)
    bound = RESIDUAL_TOL * np.maximum(1.0, np.abs(values))
    if np.any(res > bound):
        raise EigenSolverError(f"eigenpair residuals too large (max {res.max():.2e})", residuals=res)
    return res


def eigensolve_topk(g, k: int, mode: str = "largest", tau: float | None = None) -> EigenBlock:
    """k eigenpairs of the (weighted) adjacency, returned in decreasing order.

    ``mode``: ``"largest"`` / ``"smallest"`` algebraic, ``"magnitude"``
    (largest |lambda|) or ``"nearest"`` (the k pairs nearest ``tau``, by
    shift-invert).  Implicitly restarted Lanczos (ARPACK) is used unless k
    covers (almost) the whole spectrum.
    """
    a = _as_operator(g)
    n = a.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if mode not in ("largest", "smallest", "magnitude", "nearest"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "nearest" and tau is None:
        raise ValueError("nearest mode needs tau")
    which = {"largest": "LA", "smallest": "SA", "magnitude": "LM", "nearest": "LM"}[mode]
    if k >= n - 1:
        dense = a.toarray() if sp.issparse(a) else a
        w, v = np.linalg.eigh(dense)
        if mode == "largest":
            idx = np.argsort(-w, kind="stable")[:k]
        elif mode == "smallest":
            idx = np.argsort(w, kind="stable")[:k]
        elif mode == "nearest":
            idx = np.argsort(np.abs(w - tau), kind="stable")[:k]
        else:
            idx = np.argsort(-np.abs(w), kind="stable")[:k]
    else:
        v0 = np.random.default_rng(12345).standard_normal(n)
        try:
            if mode == "nearest":
                # nudge the shift off an exact eigenvalue so the factorisation exists
                sigma = float(tau) + 1e-9 * max(1.0, abs(float(tau)))
                w, v = sla.eigsh(sp.csc_matrix(a) if sp.issparse(a) else a, k=k, sigma=sigma, which="LM",
                                 v0=v0, tol=1e-13, maxiter=max(1000, 20 * n))
            else:
                w, v = sla.eigsh(a, k=k, which=which, v0=v0, tol=1e-13, maxiter=max(1000, 20 * n))
        except sla.ArpackNoConvergence as exc:
            raise EigenSolverError(
                f"Lanczos did not converge ({len(exc.eigenvalues)} of {k} pairs)",
                residuals=None,
            ) from exc
        idx = np.arange(k)
    w, v = w[idx], v[:, idx]
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    _check_residuals(a, w, v)
    return EigenBlock(w, v)


def dense_eigh(g) -> EigenBlock:
    a = _as_operator(g)
    dense = a.toarray() if sp.issparse(a) else np.asarray(a)
    w, v = np.linalg.eigh(dense)
    return EigenBlock(w[::-1], v[:, ::-1])


# --------------------------------------------------------------------------
# selection


def select_lambda_block(
    eigs: EigenBlock,
    s: Spectrum,
    rule: str = "rank",
    magnitude: EigenBlock | None = None,
) -> Selection:
    """Pick the d empirical eigenpairs matching the degree-1 kernel block.

    ``eigs`` holds decreasing eigenpairs from the top of the spectrum (or,
    for a negative lambda(phi), from the bottom).  The rank rule takes the
    positions the block occupies in the kernel's own sorted spectrum; the
    nearest rule takes the d values closest to lambda(phi) among
    ``magnitude`` (largest |lambda| pairs).  Both are reported when the
    inputs allow it.
    """
    d = s.d
    if s.degenerate:
        raise SelectionError(
            f"lambda(phi) = {s.lambda_phi:.3g} coincides with other harmonics; no isolated degree-1 block"
        )
    offset, side = s.block_rank()
    m = eigs.values.size
    rank_block = None
    if m >= offset + d:
        if side == "top":
            pos = np.arange(offset, offset + d)
            ranks = pos + 1
        else:
            pos = np.arange(m - offset - d, m - offset)
            ranks = -(m - pos)  # negative: counted from the bottom
        rank_block = EigenBlock(eigs.values[pos], eigs.vectors[:, pos], ranks)
    nearest_block = None
    source = magnitude if magnitude is not None else eigs
    if source.values.size >= d:
        pick = np.sort(np.argsort(np.abs(source.values - s.lambda_phi), kind="stable")[:d])
        nearest_block = EigenBlock(source.values[pick], source.vectors[:, pick], pick + 1)
    agree = None
    if rank_block is not None and nearest_block is not None:
        agree = bool(np.allclose(np.sort(rank_block.values), np.sort(nearest_block.values), rtol=0, atol=1e-12))
        if not agree:
            log.info("rank and nearest selections disagree: %s vs %s", rank_block.values, nearest_block.values)
    chosen = rank_block if rule == "rank" else nearest_block
    if rule not in ("rank", "nearest"):
        raise ValueError(f"unknown selection rule {rule!r}")
    if chosen is None:
        raise SelectionError(f"fewer than the {d} candidate eigenpairs required by the {rule} rule")
    return Selection(
        chosen,
        rule,
        None if rank_block is None else rank_block.values,
        None if nearest_block is None else nearest_block.values,
        agree,
    )


# --------------------------------------------------------------------------
# estimation


def gram_mse(factor: np.ndarray, truth: np.ndarray) -> float:
    """(1/n^2) sum_ij (G_hat_ij - <X_i, X_j>)^2 without forming n x n matrices."""
    f = np.asarray(factor, dtype=float)
    x = np.asarray(truth, dtype=float)
    n = x.shape[0]
    val = np.sum((f.T @ f) ** 2) - 2.0 * np.sum((f.T @ x) ** 2) + np.sum((x.T @ x) ** 2)
    return float(max(val, 0.0) / n**2)


def gram_scale(n: int, d: int, scale: str) -> float:
    # Y^T Y = I while (1/n) X^T X -> I/d, so n/d makes diag(G_hat) ~ 1
    if scale == "unit":
        return np.sqrt(n / d)
    if scale == "literal":
        return np.sqrt(n)
    raise ValueError(f"unknown gram scale {scale!r}")


def estimate_gram(
    g: SparseGraph,
    k: Kernel,
    s: Spectrum,
    latents: LatentSample | np.ndarray | None = None,
    *,
    trim: bool = True,
    threshold: float | None = None,
    rule: str = "rank",
    scale: str = "unit",
    solver: str = "lanczos",
) -> tuple[GramEstimate, ReconstructionReport]:
    """Estimate the latent Gram matrix from the graph.

    The trimmed adjacency A' is compared directly with the kernel
    eigenvalues (A' concentrates around M_n whose spectrum approximates the
    kernel's).  ``scale="unit"`` returns factor sqrt(n/d) Y; ``"literal"``
    gives sqrt(n) Y.  ``solver="dense"`` swaps Lanczos for a full dense
    eigendecomposition (oracle path, small n only).
    """
    t0 = time.perf_counter()
    d = s.d
    n = g.n
    if g.num_edges == 0:
        raise SelectionError("graph has no edges; nothing to embed")
    trimmed_count, budget = 0, False
    if trim:
        thr = 2.0 * k.sup_norm if threshold is None else float(threshold)
        g_used, rep = trim_degrees(g, thr, sup_norm=k.sup_norm)
        trimmed_count, budget = rep.trimmed_vertex_count, rep.budget_exceeded
    else:
        g_used = g
    a = g_used.adjacency()
    offset, side = s.block_rank()
    want = min(n, offset + d + 1)
    if solver == "dense":
        if n > DENSE_ORACLE_MAX_N:
            raise MemoryError(f"dense solver refuses n = {n}")
        full = dense_eigh(a)
        if side == "top":
            eigs = EigenBlock(full.values[:want], full.vectors[:, :want])
        else:
            eigs = EigenBlock(full.values[n - want:], full.vectors[:, n - want:])
        mag_idx = np.sort(np.argsort(-np.abs(full.values), kind="stable")[: min(n, max(4 * d, 20))])
        magnitude = EigenBlock(full.values[mag_idx], full.vectors[:, mag_idx])
    elif solver == "lanczos":
        eigs = eigensolve_topk(a, want, "largest" if side == "top" else "smallest")
        magnitude = eigensolve_topk(a, min(n, max(4 * d, 20)), "magnitude")
    else:
        raise ValueError(f"unknown solver {solver!r}")
    sel = select_lambda_block(eigs, s, rule=rule, magnitude=magnitude)
    factor = gram_scale(n, d, scale) * sel.block.vectors
    # observed gap around the selected block within the computed top eigenvalues
    gaps = []
    vals = eigs.values
    if side == "top":
        if offset > 0:
            gaps.append(vals[offset - 1] - vals[offset])
        if offset + d < vals.size:
            gaps.append(vals[offset + d - 1] - vals[offset + d])
    else:
        m = vals.size
        if offset > 0:
            gaps.append(vals[m - offset - 1] - vals[m - offset])
        if m - offset - d - 1 >= 0:
            gaps.append(vals[m - offset - d - 1] - vals[m - offset - d])
    mse = None
    if latents is not None:
        x = latents.positions if isinstance(latents, LatentSample) else np.asarray(latents)
        mse = gram_mse(factor, x)
    seed = g.meta.get("seed")
    report = ReconstructionReport(
        n=n,
        d=d,
        kernel=k.describe(),
        mse=mse,
        spectral_gap_observed=float(min(gaps)) if gaps else float("nan"),
        eigenvalues_near_target=list(sel.block.values),
        selection_ranks=list(sel.block.selection_ranks),
        trimmed_count=trimmed_count,
        runtime_ms=(time.perf_counter() - t0) * 1e3,
        seed=None if seed is None else int(seed),
        rule=rule,
        nearest_eigenvalues=None if sel.nearest_values is None else list(sel.nearest_values),
        selections_agree=sel.agree,
        budget_exceeded=budget,
    )
    est = GramEstimate(factor, {"rule": rule, "scale": scale, "side": side, "offset": offset})
    return est, report


# --------------------------------------------------------------------------
# dense oracles


def _positions(latents) -> np.ndarray:
    return latents.positions if isinstance(latents, LatentSample) else np.asarray(latents, dtype=float)


def dense_kernel_matrix(latents, k: Kernel, max_n: int = DENSE_ORACLE_MAX_N) -> np.ndarray:
    """M_n with entries f(<X_i, X_j>) / n (diagonal f(1) / n)."""
    x = _positions(latents)
    n = x.shape[0]
    if n > max_n:
        raise MemoryError(f"dense kernel matrix refuses n = {n} > {max_n}")
    gram = np.clip(x @ x.T, -1.0, 1.0)
    np.fill_diagonal(gram, 1.0)
    return k(gram) / n


def harmonic_basis(points, r: int) -> np.ndarray:
    """First r orthonormal spherical harmonics (degrees 0, 1, 2) at ``points``.

    Order: constant, sqrt(d) x_i, then sqrt(d(d+2)) x_i x_j for i < j, then
    Helmert contrasts of the squares.  Orthonormal in L^2(sigma).
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = x.shape
    r_max = 1 + d + multiplicity(d, 2)
    if not 1 <= r <= r_max:
        raise ValueError(f"r must be in [1, {r_max}] for degrees <= 2")
    cols = [np.ones(n)]
    cols += [np.sqrt(d) * x[:, i] for i in range(d)]
    c2 = np.sqrt(d * (d + 2))
    cols += [c2 * x[:, i] * x[:, j] for i in range(d) for j in range(i + 1, d)]
    sq = x * x
    for m in range(1, d):
        a = np.zeros(d)
        a[:m] = 1.0
        a[m] = -m
        # E[(sum a_i x_i^2)^2] = 2 |a|^2 / (d (d + 2)) when sum a_i = 0
        cols.append(np.sqrt(d * (d + 2) / (2.0 * a @ a)) * (sq @ a))
    return np.column_stack(cols[:r])


def empirical_harmonic_orthogonality(latents, r: int) -> float:
    """Operator norm of Psi^T Psi / n - I over the first r harmonics."""
    psi = harmonic_basis(_positions(latents), r)
    n = psi.shape[0]
    e = psi.T @ psi / n - np.eye(r)
    return float(np.linalg.norm(e, 2))


def gram_convergence(latents, k: Kernel, s: Spectrum) -> dict:
    """Frobenius distance between the degree-1 eigenprojection of M_n and <X_i, X_j> / n.

    ``"scaled"`` uses G_n = (1/d) sum v v^T; ``"unscaled"`` drops the 1/d.
    """
    x = _positions(latents)
    n, d = x.shape
    m = dense_kernel_matrix(x, k)
    full = dense_eigh(m)
    sel = select_lambda_block(full, s, rule="rank")
    proj = sel.block.vectors @ sel.block.vectors.T
    target = x @ x.T / n
    return {
        "scaled": float(np.linalg.norm(proj / d - target)),
        "unscaled": float(np.linalg.norm(proj - target)),
        "eigenvalues": sel.block.values,
    }


def gram_convergence_check(latents, k: Kernel, s: Spectrum, normalization: str = "scaled") -> float:
    return gram_convergence(latents, k, s)[normalization]
