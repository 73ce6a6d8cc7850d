"""Sparse inhomogeneous Erdos-Renyi graphs G(n, f(<X_i, X_j>) / n) over latent sphere points."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .kernels import Kernel, KernelConstraintError
from .sphere import RngStream, as_generator, check_dimension, sample_uniform

DENSE_ORACLE_MAX_N = 3000
DEFAULT_BLOCK_ROWS = 2048
MAX_TRIM_SWEEPS = 50


class ModelError(ValueError):
    pass


class TrimBudgetWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class LatentSample:
    positions: np.ndarray  # (n, d) unit rows
    d: int
    seed: RngStream | int | None = None

    @property
    def n(self) -> int:
        return self.positions.shape[0]


def sample_latents(n: int, d: int, rng) -> LatentSample:
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    d = check_dimension(d)
    return LatentSample(sample_uniform(d, rng, size=int(n)), d, rng if isinstance(rng, (RngStream, int)) else None)


@dataclass
class SparseGraph:
    """Undirected weighted edge list with i < j, no loops, no duplicates."""

    n: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_edges(cls, n: int, edges, weights=None, meta=None) -> SparseGraph:
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        i, j = np.minimum(e[:, 0], e[:, 1]), np.maximum(e[:, 0], e[:, 1])
        w = np.ones(len(e)) if weights is None else np.asarray(weights, dtype=float)
        g = cls(int(n), i, j, w, dict(meta or {}))
        g.validate()
        return g

    @property
    def num_edges(self) -> int:
        return int(self.rows.size)

    def validate(self) -> None:
        if np.any(self.rows >= self.cols):
            raise ModelError("edges must satisfy i < j (no self-loops)")
        if self.rows.size and (self.rows.min() < 0 or self.cols.max() >= self.n):
            raise ModelError("vertex index out of range")
        keys = self.rows * self.n + self.cols
        if np.unique(keys).size != keys.size:
            raise ModelError("duplicate edge")
        if np.any(self.weights <= 0) or np.any(self.weights > 1.0 + 1e-12):
            raise ModelError("edge weights must lie in (0, 1]")

    def adjacency(self) -> sp.csr_matrix:
        a = sp.coo_matrix((self.weights, (self.rows, self.cols)), shape=(self.n, self.n))
        return (a + a.T).tocsr()

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n)
        np.add.at(deg, self.rows, self.weights)
        np.add.at(deg, self.cols, self.weights)
        return deg

    def copy(self) -> SparseGraph:
        return SparseGraph(self.n, self.rows.copy(), self.cols.copy(), self.weights.copy(), dict(self.meta))

    def to_csv(self, path) -> None:
        header = " ".join(f"{k}={v}" for k, v in self.meta.items() if k in ("n", "d", "kernel", "seed"))
        if "n=" not in header:
            header = f"n={self.n} " + header
        with open(path, "w") as fh:
            fh.write(f"# {header.strip()}\n")
            for i, j, w in zip(self.rows.tolist(), self.cols.tolist(), self.weights.tolist()):
                fh.write(f"{i},{j},{format(w, '.17g')}\n")

    @classmethod
    def from_csv(cls, path) -> SparseGraph:
        with open(path) as fh:
            first = fh.readline()
            if not first.startswith("#"):
                raise ModelError("graph file must start with a '# n=<n> ...' header line")
            meta = dict(tok.split("=", 1) for tok in first[1:].split() if "=" in tok)
            if "n" not in meta:
                raise ModelError("graph header lacks n=<n>")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        n = int(meta["n"])
        if data.size == 0:
            return cls(n, np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0), meta)
        g = cls(n, data[:, 0].astype(np.int64), data[:, 1].astype(np.int64), data[:, 2].astype(float), meta)
        g.validate()
        return g


@dataclass(frozen=True)
class DegreeReport:
    degrees: np.ndarray
    max_degree: float
    mean_degree: float
    trimmed_vertex_count: int = 0
    touched: np.ndarray | None = None
    budget_exceeded: bool = False
    sweeps: int = 0


def degree_report(g: SparseGraph) -> DegreeReport:
    deg = g.degrees()
    return DegreeReport(deg, float(deg.max(initial=0.0)), float(2.0 * g.weights.sum() / g.n))


# --------------------------------------------------------------------------
# generation


def _check_probabilities(values: np.ndarray) -> None:
    if values.size and np.min(values) < 0:
        raise ModelError(f"negative kernel value {np.min(values):.4g}; edge probabilities undefined")


def _block_edges(x: np.ndarray, k: Kernel, r0: int, r1: int, cap: float, gen: np.random.Generator):
    """Edges (i, j), r0 <= i < r1, i < j, by geometric skipping over the pair stream.

    Candidates arrive at rate p = min(cap / n, 1) and are thinned to the true
    probability min(f / n, 1).
    """
    n = x.shape[0]
    counts = n - 1 - np.arange(r0, r1)
    starts = np.concatenate(([0], np.cumsum(counts)))
    total = int(starts[-1])
    if total == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    p = min(cap / n, 1.0)
    if p <= 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    if p >= 1.0:
        idx = np.arange(total)
    else:
        chunks, pos = [], -1
        batch = int(total * p * 1.1) + 64
        while pos < total:
            gaps = gen.geometric(p, size=batch)
            cand = pos + np.cumsum(gaps)
            chunks.append(cand)
            pos = int(cand[-1])
        idx = np.concatenate(chunks)
        idx = idx[idx < total]
    row_local = np.searchsorted(starts, idx, side="right") - 1
    i = r0 + row_local
    j = i + 1 + (idx - starts[row_local])
    vals = k(np.einsum("ij,ij->i", x[i], x[j]))
    _check_probabilities(vals)
    accept = np.minimum(vals / n, 1.0) / p
    keep = gen.random(idx.size) < accept
    return i[keep].astype(np.int64), j[keep].astype(np.int64)


def generate_graph(
    latents: LatentSample,
    k: Kernel,
    rng,
    block_rows: int = DEFAULT_BLOCK_ROWS,
    workers: int = 1,
) -> SparseGraph:
    """Sample G(n, f(<X_i, X_j>) / n) in expected O(n * sup f) time.

    Rows are processed in blocks, each with its own child stream of ``rng``
    so the result does not depend on ``workers``.  Probabilities above one
    are clamped.
    """
    if k.d != latents.d:
        raise KernelConstraintError(f"kernel dimension {k.d} != latent dimension {latents.d}")
    x = latents.positions
    n = x.shape[0]
    cap = k.sup_norm
    if cap < 0:
        raise ModelError("kernel is negative everywhere")
    stream = rng if isinstance(rng, RngStream) else RngStream(int(as_generator(rng).integers(2**63)))
    blocks = [(r0, min(r0 + block_rows, n)) for r0 in range(0, n, block_rows)]

    def work(b):
        r0, r1 = blocks[b]
        return _block_edges(x, k, r0, r1, cap, stream.child(b).generator())

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, range(len(blocks))))
    else:
        parts = [work(b) for b in range(len(blocks))]
    rows = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, np.int64)
    cols = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, np.int64)
    meta = {"n": n, "d": latents.d, "kernel": k.describe()}
    if isinstance(latents.seed, RngStream):
        meta["seed"] = latents.seed.seed
    elif isinstance(latents.seed, int):
        meta["seed"] = latents.seed
    return SparseGraph(n, rows, cols, np.ones(rows.size), meta)


def generate_graph_dense(latents: LatentSample, k: Kernel, rng) -> SparseGraph:
    """Reference O(n^2) Bernoulli sampler; kept as an oracle for small n."""
    n = latents.n
    if n > DENSE_ORACLE_MAX_N:
        raise MemoryError(f"dense sampler refuses n = {n} > {DENSE_ORACLE_MAX_N}")
    gen = as_generator(rng)
    x = latents.positions
    i, j = np.triu_indices(n, 1)
    vals = k(np.einsum("ij,ij->i", x[i], x[j]))
    _check_probabilities(vals)
    keep = gen.random(i.size) < np.minimum(vals / n, 1.0)
    return SparseGraph(n, i[keep].astype(np.int64), j[keep].astype(np.int64), np.ones(int(keep.sum())),
                       {"n": n, "d": latents.d, "kernel": k.describe()})


# --------------------------------------------------------------------------
# trimming


def trim_degrees(g: SparseGraph, threshold: float, sup_norm: float | None = None) -> tuple[SparseGraph, DegreeReport]:
    """Scale down edges at over-threshold vertices until every degree <= threshold.

    Each sweep multiplies an edge by min(c_i, c_j) where c_v = threshold /
    deg_v for offending vertices and 1 otherwise; only edges touching an
    originally offending vertex ever change.  When ``sup_norm`` is given and
    more than 10 n / sup_norm vertices offend, a :class:`TrimBudgetWarning`
    is issued (trimming still proceeds).
    """
    if not threshold > 0:
        raise ValueError("trim threshold must be positive")
    out = g.copy()
    deg = out.degrees()
    over = deg > threshold + 1e-9
    touched = np.flatnonzero(over)
    budget_exceeded = False
    if sup_norm is not None and touched.size > 10.0 * g.n / sup_norm:
        budget_exceeded = True
        warnings.warn(
            f"{touched.size} vertices exceed the trim threshold, above the budget 10n/||phi|| = {10.0 * g.n / sup_norm:.1f}",
            TrimBudgetWarning,
            stacklevel=2,
        )
    sweeps = 0
    while np.any(over):
        if sweeps >= MAX_TRIM_SWEEPS:
            raise ArithmeticError("degree trimming did not converge")
        c = np.ones(g.n)
        c[over] = threshold / deg[over]
        out.weights = out.weights * np.minimum(c[out.rows], c[out.cols])
        deg = out.degrees()
        over = deg > threshold + 1e-9
        sweeps += 1
    report = DegreeReport(
        deg, float(deg.max(initial=0.0)), float(2.0 * out.weights.sum() / g.n),
        trimmed_vertex_count=int(touched.size), touched=touched, budget_exceeded=budget_exceeded, sweeps=sweeps,
    )
    return out, report
