"""Rotation-invariant kernels f(<x, y>) on the sphere and their harmonic spectra.

A kernel acts on L^2(S^{d-1}) by integration against the uniform measure.
Its eigenfunctions are the spherical harmonics; the eigenvalue attached to
degree l is the Funk-Hecke integral

    lambda_l = int_{-1}^{1} f(t) G_l(t) beta_d(t) dt,

with G_l the Gegenbauer polynomial of parameter (d-2)/2 normalised so that
G_l(1) = 1.  Degree 1 carries the "signal" eigenvalue lambda(phi).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import special

from .sphere import beta_normalizer, check_dimension

GRID_POINTS = 10_000
QUAD_ORDER = 32
QUAD_TOL = 1e-10
MAX_PANELS = 4096
DEFAULT_L = 64
MAX_L = 512
TAIL_TOL = 1e-8


class KernelConstraintError(ValueError):
    """Kernel violates a modelling constraint (negativity, wrong dimension...)."""


class UnsupportedDimensionError(KernelConstraintError):
    pass


class NotNormalizableError(ValueError):
    pass


class QuadratureError(ArithmeticError):
    """Adaptive quadrature hit its refinement cap."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual estimate {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class Kernel:
    """phi(x, y) = f(<x, y>) on S^{d-1}.

    ``f`` must accept numpy arrays.  ``on_angle``, when given, evaluates
    f(cos theta) directly from the angle; it is used by quadrature and
    sampling near theta = 0 where going through t = cos theta loses digits.
    """

    f: Callable[[np.ndarray], np.ndarray]
    d: int
    name: str = "custom"
    params: tuple = ()
    monotone: str | None = None  # "increasing", "decreasing" or None
    continuous: bool = True
    on_angle_fn: Callable[[np.ndarray], np.ndarray] | None = None
    flags: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        check_dimension(self.d)
        if self.monotone not in (None, "increasing", "decreasing"):
            raise ValueError(f"unknown monotone flag {self.monotone!r}")

    def __call__(self, t):
        return self.f(np.asarray(t, dtype=float))

    def on_angle(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.on_angle_fn is not None:
            return self.on_angle_fn(theta)
        return self.f(np.cos(theta))

    @property
    def grid_values(self) -> np.ndarray:
        return _grid_values(self)

    @property
    def sup_norm(self) -> float:
        return float(np.max(self.grid_values))

    @property
    def f_at_1(self) -> float:
        return float(self.on_angle(np.array(0.0)))

    def is_nonnegative(self) -> bool:
        return bool(np.min(self.grid_values) >= 0.0)

    def scaled(self, c: float) -> Kernel:
        f, g = self.f, self.on_angle_fn
        c = float(c)
        return Kernel(
            f=lambda t: c * f(t),
            d=self.d,
            name=self.name,
            params=self.params + (("scale", c),),
            monotone=self.monotone if c > 0 else None,
            continuous=self.continuous,
            on_angle_fn=None if g is None else (lambda th: c * g(th)),
            flags=dict(self.flags),
        )

    def describe(self) -> str:
        if not self.params:
            return self.name
        parts = []
        for p in self.params:
            parts.append(f"{p[0]}={p[1]:g}" if isinstance(p, tuple) else f"{p:g}")
        return f"{self.name}:{','.join(parts)}"


def _grid_values(k: Kernel) -> np.ndarray:
    theta = np.linspace(0.0, np.pi, GRID_POINTS)
    return np.asarray(k.on_angle(theta), dtype=float)


def check_graph_kernel(k: Kernel) -> None:
    if not k.is_nonnegative():
        raise KernelConstraintError(
            f"kernel {k.describe()} takes negative values (min {np.min(k.grid_values):.4g}); "
            "edge probabilities must be nonnegative"
        )


def check_monotone(k: Kernel) -> bool:
    """Verify the declared monotone flag on the evaluation grid."""
    if k.monotone is None:
        return False
    v = k.grid_values[::-1]  # increasing t
    diffs = np.diff(v)
    scale = max(1.0, float(np.max(np.abs(v))))
    if k.monotone == "increasing":
        return bool(np.all(diffs >= -1e-12 * scale))
    return bool(np.all(diffs <= 1e-12 * scale))


# --------------------------------------------------------------------------
# catalog


def linear(a: float, b: float, d: int) -> Kernel:
    """f(t) = a + b t; requires |b| <= a so that f >= 0."""
    if abs(b) > a:
        raise KernelConstraintError(f"linear kernel needs |b| <= a (f(-1) = {a - abs(b):g} < 0)")
    mono = "increasing" if b > 0 else ("decreasing" if b < 0 else "increasing")
    return Kernel(
        f=lambda t: a + b * t,
        d=d,
        name="linear",
        params=(float(a), float(b)),
        monotone=mono,
        flags={"graph": True, "zero_flow_general": b > 0},
    )


def constant(c: float, d: int) -> Kernel:
    if c < 0:
        raise KernelConstraintError("constant kernel must be nonnegative")
    return Kernel(
        f=lambda t: np.full_like(np.asarray(t, dtype=float), float(c)),
        d=d,
        name="constant",
        params=(float(c),),
        monotone="increasing",
        flags={"graph": True, "zero_flow_general": False},
    )


def exponential(s: float, d: int) -> Kernel:
    """f(t) = exp(s t): monotone and continuous."""
    return Kernel(
        f=lambda t: np.exp(s * t),
        d=d,
        name="exponential",
        params=(float(s),),
        monotone="increasing" if s >= 0 else "decreasing",
        flags={"graph": True, "zero_flow_general": s > 0},
    )


def _wrapped_normal_on_angle(beta: float) -> Callable[[np.ndarray], np.ndarray]:
    two_pi = 2.0 * np.pi
    # keep images while exp(-(2 pi m - pi)^2 / 2 beta) can exceed 1e-16 of the peak
    m_max = 1
    while math.exp(-((two_pi * m_max - np.pi) ** 2) / (2.0 * beta)) > 1e-16:
        m_max += 1
    shifts = two_pi * np.arange(-m_max, m_max + 1)
    norm = two_pi / math.sqrt(two_pi * beta)

    def on_angle(theta):
        theta = np.asarray(theta, dtype=float)
        th = np.mod(theta + np.pi, two_pi) - np.pi
        z = th[..., None] + shifts
        return norm * np.exp(-(z * z) / (2.0 * beta)).sum(axis=-1)

    return on_angle


def wrapped_gaussian(beta: float, d: int = 2) -> Kernel:
    """Density of (x + N(0, beta)) mod 2 pi against the uniform measure on S^1.

    Eigenvalues are exp(-l^2 beta / 2); lambda(phi) = exp(-beta / 2).
    """
    if d != 2:
        raise UnsupportedDimensionError("the wrapped Gaussian kernel is defined on S^1 only (d = 2)")
    if not beta > 0:
        raise KernelConstraintError("wrapped Gaussian needs beta > 0")
    on_angle = _wrapped_normal_on_angle(float(beta))
    return Kernel(
        f=lambda t: on_angle(np.arccos(np.clip(t, -1.0, 1.0))),
        d=2,
        name="wrapped_gaussian",
        params=(float(beta),),
        monotone="increasing",
        on_angle_fn=on_angle,
        flags={"graph": True, "markov": True, "gaussian_zero_flow": True, "zero_flow_general": True},
    )


def wrapped_gaussian_for_lambda(lam: float) -> Kernel:
    """Wrapped Gaussian whose degree-1 eigenvalue equals ``lam``."""
    if not 0.0 < lam < 1.0:
        raise KernelConstraintError("need 0 < lambda < 1")
    return wrapped_gaussian(-2.0 * math.log(lam))


def band(center: float, half_width: float, d: int, height: float = 1.0, softness: float = 0.02) -> Kernel:
    """Smoothed indicator of |t - center| <= half_width.

    Non-monotone on purpose; used to stress the spectrum code and to exercise
    the hypothesis checks of the zero-flow calculators.
    """

    def f(t):
        t = np.asarray(t, dtype=float)
        return height * special.expit((half_width - np.abs(t - center)) / softness)

    return Kernel(
        f=f,
        d=d,
        name="band",
        params=(float(center), float(half_width), float(height)),
        monotone=None,
        flags={"graph": True, "zero_flow_general": False},
    )


_CATALOG = {
    "linear": linear,
    "constant": constant,
    "exponential": exponential,
    "wrapped_gaussian": wrapped_gaussian,
    "band": band,
}


def builtin_kernels() -> dict[str, Callable[..., Kernel]]:
    """Name -> constructor.  Each built kernel carries hypothesis flags in ``flags``."""
    return dict(_CATALOG)


def parse_kernel(spec: str, d: int) -> Kernel:
    """Build a kernel from ``"name:arg1,arg2"``.

    ``wrapped_gaussian`` (alias ``gaussian``) accepts either ``beta`` or
    ``lambda=<value>``.
    """
    name, _, rest = spec.partition(":")
    name = name.strip().lower()
    args, kwargs = [], {}
    for tok in filter(None, (s.strip() for s in rest.split(","))):
        if "=" in tok:
            key, val = tok.split("=", 1)
            kwargs[key.strip()] = float(val)
        else:
            args.append(float(tok))
    if name in ("gaussian", "wrapped_gaussian", "wg"):
        if "lambda" in kwargs:
            if d != 2:
                raise UnsupportedDimensionError("wrapped Gaussian requires d = 2")
            return wrapped_gaussian_for_lambda(kwargs["lambda"])
        beta = kwargs.get("beta", args[0] if args else None)
        if beta is None:
            raise KernelConstraintError("wrapped_gaussian needs beta or lambda=")
        return wrapped_gaussian(beta, d)
    if name not in _CATALOG:
        raise KernelConstraintError(f"unknown kernel {name!r}; choose from {sorted(_CATALOG)}")
    return _CATALOG[name](*args, d=d, **kwargs)


# --------------------------------------------------------------------------
# Funk-Hecke quadrature


def multiplicity(d: int, ell: int) -> int:
    """Dimension of the space of degree-l spherical harmonics on S^{d-1}."""
    d = check_dimension(d)
    if ell < 0:
        raise ValueError("degree must be >= 0")
    if ell == 0:
        return 1
    return (2 * ell + d - 2) * math.comb(ell + d - 3, ell - 1) // ell


def gegenbauer_table(L: int, t: np.ndarray, d: int) -> np.ndarray:
    """Normalised Gegenbauer polynomials G_0..G_L at ``t`` (G_l(1) = 1).

    Three-term recurrence with parameter alpha = (d - 2) / 2:
    G_{l+1} = ((2l + 2 alpha) t G_l - l G_{l-1}) / (l + 2 alpha).
    """
    alpha = (d - 2) / 2.0
    t = np.asarray(t, dtype=float)
    out = np.empty((L + 1,) + t.shape)
    out[0] = 1.0
    if L >= 1:
        out[1] = t
    for ell in range(1, L):
        out[ell + 1] = ((2 * ell + 2 * alpha) * t * out[ell] - ell * out[ell - 1]) / (ell + 2 * alpha)
    return out


@lru_cache(maxsize=None)
def _gauss_legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


def _theta_rule(panels: int):
    x, w = _gauss_legendre(QUAD_ORDER)
    edges = np.linspace(0.0, np.pi, panels + 1)
    half = np.diff(edges)[:, None] / 2.0
    mid = (edges[:-1] + edges[1:])[:, None] / 2.0
    return (mid + half * x).ravel(), (half * w).ravel()


def _eigen_integrals(k: Kernel, L: int, panels: int) -> tuple[np.ndarray, float]:
    theta, w = _theta_rule(panels)
    weight = beta_normalizer(k.d) * w * np.sin(theta) ** (k.d - 2) * k.on_angle(theta)
    return gegenbauer_table(L, np.cos(theta), k.d) @ weight, float(np.sum(np.abs(weight)))


def funk_hecke_eigenvalues(k: Kernel, L: int, tol: float = QUAD_TOL) -> np.ndarray:
    """Eigenvalues for degrees 0..L by composite Gauss-Legendre in the angle.

    Panels double until successive estimates agree to ``tol`` for every
    degree, measured relative to max(1, int |f| beta_d) which bounds every
    |lambda_l|; past ``MAX_PANELS`` a :class:`QuadratureError` is raised.
    """
    panels = max(4, (L + 15) // 8)
    prev, _ = _eigen_integrals(k, L, panels)
    while True:
        panels *= 2
        cur, mass = _eigen_integrals(k, L, panels)
        resid = float(np.max(np.abs(cur - prev)))
        if resid < tol * max(1.0, mass):
            return cur
        if panels >= MAX_PANELS:
            raise QuadratureError(f"Funk-Hecke quadrature did not converge for {k.describe()}", resid)
        prev = cur


def funk_hecke_eigenvalue(k: Kernel, ell: int) -> float:
    if ell < 0:
        raise ValueError("degree must be >= 0")
    return float(funk_hecke_eigenvalues(k, max(ell, 1))[ell])


def squared_norm(k: Kernel, tol: float = 1e-12) -> float:
    """int f(t)^2 beta_d(t) dt, the Hilbert-Schmidt mass per point."""
    g = Kernel(f=lambda t: k(t) ** 2, d=k.d, on_angle_fn=lambda th: k.on_angle(th) ** 2)
    return float(funk_hecke_eigenvalues(g, 0, tol=tol)[0])


# --------------------------------------------------------------------------
# spectrum


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues by degree together with the derived diagnostics.

    ``gap_delta`` is min |lambda(phi) - lambda_i| over harmonics outside the
    degree-1 block (constant included); ``gap_nonconstant`` additionally
    drops the constant harmonic.  Eigenvalues numerically equal to
    lambda(phi) are excluded from both minima and flagged via ``degenerate``.
    """

    d: int
    degrees: np.ndarray
    eigenvalues: np.ndarray
    multiplicities: np.ndarray
    gap_delta: float
    gap_nonconstant: float
    a2_constant: float
    a2_constant_abs: float
    degenerate: bool
    parseval_residual: float

    @property
    def max_degree(self) -> int:
        return int(self.degrees[-1])

    @property
    def lambda_phi(self) -> float:
        return float(self.eigenvalues[1])

    @property
    def lambda0(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def negative(self) -> list[tuple[int, float]]:
        return [(int(l), float(v)) for l, v in zip(self.degrees, self.eigenvalues) if v < 0]

    def block_rank(self) -> tuple[int, str]:
        """Offset s of the degree-1 block in the sorted spectrum, and the side.

        For lambda(phi) > 0 the block occupies decreasing-order positions
        s+1..s+d where s counts eigenvalues (with multiplicity) above it;
        for lambda(phi) < 0 positions are counted from the bottom.
        """
        lam = self.lambda_phi
        others = self.degrees != 1
        if lam >= 0:
            s = int(self.multiplicities[others & (self.eigenvalues > lam)].sum())
            return s, "top"
        s = int(self.multiplicities[others & (self.eigenvalues < lam)].sum())
        return s, "bottom"

    def decreasing(self, limit: int | None = None) -> np.ndarray:
        """Decreasing rearrangement expanded with multiplicity (optionally truncated)."""
        order = np.argsort(-self.eigenvalues, kind="stable")
        reps = self.multiplicities[order]
        if limit is not None:
            cum = np.cumsum(reps)
            cut = int(np.searchsorted(cum, limit)) + 1
            order, reps = order[:cut], reps[:cut]
        out = np.repeat(self.eigenvalues[order], reps)
        return out if limit is None else out[:limit]

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "L": self.max_degree,
            "entries": [
                {"degree": int(l), "eigenvalue": float(v), "multiplicity": int(m)}
                for l, v, m in zip(self.degrees, self.eigenvalues, self.multiplicities)
            ],
            "lambda_phi": self.lambda_phi,
            "lambda0": self.lambda0,
            "gap_delta": self.gap_delta,
            "gap_nonconstant": self.gap_nonconstant,
            "a2_constant": self.a2_constant,
            "a2_constant_abs": self.a2_constant_abs,
            "negative_eigenvalues": [{"degree": l, "eigenvalue": v} for l, v in self.negative],
            "degenerate": self.degenerate,
            "parseval_residual": self.parseval_residual,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _a2(values: np.ndarray, mult: np.ndarray) -> float:
    # max over positions i of lambda_{l_i} (i+1)^2; inside a tie block the
    # last position dominates, so no expansion is needed
    order = np.argsort(-values, kind="stable")
    v, m = values[order], mult[order]
    last_pos = np.cumsum(m)  # = i + 1 for the last member of each block
    # quadrature noise times (i+1)^2 would otherwise dominate deep in the tail
    keep = v > 1e-12 * max(1.0, float(np.max(np.abs(v))))
    if not np.any(keep):
        return 0.0
    return float(np.max(v[keep] * last_pos[keep].astype(float) ** 2))


def _gap(lam: float, values: np.ndarray, tie_tol: float) -> tuple[float, bool]:
    if values.size == 0:
        return float("nan"), False
    dist = np.abs(values - lam)
    ties = dist <= tie_tol
    rest = dist[~ties]
    return (float(rest.min()) if rest.size else 0.0), bool(np.any(ties))


def spectrum_from_eigenvalues(d: int, eigenvalues, hs_norm: float | None = None) -> Spectrum:
    """Assemble a :class:`Spectrum` from eigenvalues indexed by degree 0..L."""
    lam_all = np.asarray(eigenvalues, dtype=float)
    L = lam_all.size - 1
    if L < 1:
        raise ValueError("need at least degrees 0 and 1")
    degrees = np.arange(L + 1)
    mult = np.array([multiplicity(d, int(l)) for l in degrees], dtype=np.int64)
    lam = float(lam_all[1])
    tie_tol = 1e-9 * max(1.0, float(np.max(np.abs(lam_all))))
    outside = degrees != 1
    gap, tie_a = _gap(lam, lam_all[outside], tie_tol)
    gap_nc, tie_b = _gap(lam, lam_all[degrees >= 2], tie_tol)
    if not np.isfinite(gap_nc) or (tie_b and gap_nc == 0.0):
        # every non-constant harmonic ties with lambda(phi): only the
        # constant separates the block
        gap_nc = gap
    resid = float("nan") if hs_norm is None else float(hs_norm - np.sum(mult * lam_all**2))
    return Spectrum(
        d=d,
        degrees=degrees,
        eigenvalues=lam_all,
        multiplicities=mult,
        gap_delta=gap,
        gap_nonconstant=gap_nc,
        a2_constant=_a2(lam_all, mult),
        a2_constant_abs=_a2(np.abs(lam_all), mult),
        degenerate=tie_a or tie_b,
        parseval_residual=resid,
    )


def compute_spectrum(k: Kernel, L: int | None = None) -> Spectrum:
    """Spectrum up to degree L.

    With ``L=None`` the truncation starts at 64 and doubles until the
    Parseval tail sum_{l > L} N lambda_l^2 drops below 1e-8 (capped at 512).
    """
    hs = squared_norm(k)
    if L is not None:
        if L < 2:
            raise ValueError("truncation degree L must be >= 2")
        return spectrum_from_eigenvalues(k.d, funk_hecke_eigenvalues(k, L), hs)
    L = DEFAULT_L
    while True:
        spec = spectrum_from_eigenvalues(k.d, funk_hecke_eigenvalues(k, L), hs)
        if spec.parseval_residual < TAIL_TOL or L >= MAX_L:
            if spec.parseval_residual >= TAIL_TOL:
                warnings.warn(
                    f"spectrum tail {spec.parseval_residual:.2e} above {TAIL_TOL} at L={L}",
                    RuntimeWarning,
                    stacklevel=2,
                )
            return spec
        L *= 2


def check_reconstruction_condition(s: Spectrum, k: Kernel) -> float:
    """Ratio gap^2 / ||phi||_inf with the gap taken over non-constant harmonics.

    Larger is better.  No verdict is returned because the admissible constant
    is not explicit.
    """
    return float(s.gap_nonconstant**2 / k.sup_norm)


def normalize_markov(k: Kernel) -> Kernel:
    """Divide f by lambda_0 so that integrating phi(x, .) against sigma gives 1."""
    lam0 = funk_hecke_eigenvalue(k, 0)
    if not lam0 > 0:
        raise NotNormalizableError(f"lambda_0 = {lam0:.3g} <= 0; kernel cannot be made Markov")
    if abs(lam0 - 1.0) < 1e-14:
        return k
    out = k.scaled(1.0 / lam0)
    flags = dict(k.flags, markov=True)
    return Kernel(
        f=out.f,
        d=out.d,
        name=k.name,
        params=k.params + (("markov", 1.0),),
        monotone=k.monotone,
        continuous=k.continuous,
        on_angle_fn=out.on_angle_fn,
        flags=flags,
    )


def is_markov(k: Kernel, tol: float = 1e-8) -> bool:
    return abs(funk_hecke_eigenvalue(k, 0) - 1.0) <= tol
