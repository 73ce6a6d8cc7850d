"""Command-line front end: ``geoperc spectrum|generate|reconstruct|treeflow|thresholds|dps-check``.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 resource cap.
``GEO_SEED`` in the environment overrides ``--seed``.  ``--config FILE``
reads ``key = value`` lines (flag names with dashes or underscores);
explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import ArpackError

from . import svg
from .graph import ModelError, SparseGraph, generate_graph, generate_graph_dense, sample_latents
from .kernels import (
    Kernel,
    check_graph_kernel,
    check_reconstruction_condition,
    compute_spectrum,
    normalize_markov,
    parse_kernel,
    wrapped_gaussian,
    wrapped_gaussian_for_lambda,
)
from .reconstruct import SelectionError, estimate_gram
from .sphere import RngStream, basis_vector, read_positions_csv, write_positions_csv
from .treeflow import (
    HypothesisError,
    ResourceCapError,
    TreeSpec,
    band_halfwidth,
    dps_epsilon,
    flow_experiment,
    gaussian_zero_flow_condition,
    general_zero_flow_qmax,
    ks_condition,
    zero_flow_qmax,
)

EXIT_CONFIG, EXIT_NUMERIC, EXIT_RESOURCE = 2, 3, 4


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# helpers


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, quotes are stripped."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = val.strip("\"'")
    return out


def seed_from(args) -> int:
    env = os.environ.get("GEO_SEED")
    return int(env) if env not in (None, "") else int(args.seed)


def streams(seed: int) -> tuple[RngStream, RngStream]:
    """Independent (latent, graph) streams for one seed."""
    return RngStream(seed, 0), RngStream(seed, 1)


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _graph_kernel(spec: str, d: int) -> Kernel:
    k = parse_kernel(spec, d)
    check_graph_kernel(k)
    return k


def reconstruct_once(n: int, d: int, k: Kernel, seed: int, *, rule: str = "rank", threshold=None,
                     trim: bool = True, scale: str = "unit", solver: str = "lanczos", workers: int = 1,
                     spectrum=None):
    """Latents, graph and Gram estimate for one seed; returns (latents, graph, estimate, report)."""
    s = spectrum or compute_spectrum(k)
    lat_rng, graph_rng = streams(seed)
    lat = sample_latents(n, d, lat_rng)
    g = generate_graph(lat, k, graph_rng, workers=workers)
    g.meta["seed"] = seed
    est, rep = estimate_gram(g, k, s, lat, trim=trim, threshold=threshold, rule=rule, scale=scale, solver=solver)
    return lat, g, est, rep


# --------------------------------------------------------------------------
# commands


def cmd_spectrum(args) -> int:
    k = parse_kernel(args.kernel, args.d)
    s = compute_spectrum(k, args.L)
    out = s.to_dict()
    out["kernel"] = k.describe()
    if k.is_nonnegative():
        out["reconstruction_condition"] = check_reconstruction_condition(s, k)
    _write(args.out, _dump(out))
    if args.svg:
        Path(args.svg).write_text(
            svg.bar_chart(s.degrees, s.eigenvalues, f"Funk-Hecke eigenvalues: {k.describe()}", "degree", "eigenvalue")
        )
    return 0


def cmd_generate(args) -> int:
    seed = seed_from(args)
    k = _graph_kernel(args.kernel, args.d)
    lat_rng, graph_rng = streams(seed)
    lat = sample_latents(args.n, args.d, lat_rng)
    if args.dense:
        g = generate_graph_dense(lat, k, graph_rng)
    else:
        g = generate_graph(lat, k, graph_rng, workers=args.workers)
    g.meta["seed"] = seed
    g.to_csv(args.out)
    if args.positions:
        write_positions_csv(args.positions, lat.positions)
    deg = g.degrees()
    print(f"n={g.n} edges={g.num_edges} mean_degree={deg.mean():.4f} max_degree={deg.max(initial=0):.0f}",
          file=sys.stderr)
    return 0


def _parse_sweep(text: str) -> list[int]:
    key, _, vals = text.partition("=")
    if key.strip() != "n" or not vals:
        raise ConfigError("--sweep expects n=<n1>,<n2>,...")
    return [int(v) for v in vals.split(",") if v.strip()]


def cmd_reconstruct(args) -> int:
    seed = seed_from(args)
    opts = dict(rule=args.select, threshold=args.trim_threshold, trim=not args.no_trim, scale=args.scale)
    if args.load:
        if not args.kernel:
            raise ConfigError("spectrum required for selection: pass --kernel with --load")
        g = SparseGraph.from_csv(args.load)
        d = int(g.meta.get("d", args.d))
        k = _graph_kernel(args.kernel, d)
        truth = read_positions_csv(args.positions) if args.positions else None
        est, rep = estimate_gram(g, k, compute_spectrum(k), truth, **opts)
        return _emit_reconstruction(args, est, rep, truth)
    k = _graph_kernel(args.kernel, args.d)
    s = compute_spectrum(k)
    if args.sweep:
        ns = _parse_sweep(args.sweep)
        runs = []
        for n in ns:
            for j in range(args.seeds):
                _, _, _, rep = reconstruct_once(n, args.d, k, seed + j, spectrum=s, workers=args.workers, **opts)
                runs.append(rep.to_dict(timing=args.timing))
        medians = {str(n): float(np.median([r["mse"] for r in runs if r["n"] == n])) for n in ns}
        med = [medians[str(n)] for n in ns]
        out = {"runs": runs, "median_mse": medians,
               "strictly_decreasing": bool(all(b < a for a, b in zip(med, med[1:])))}
        _write(args.out, _dump(out))
        return 0
    lat, g, est, rep = reconstruct_once(args.n, args.d, k, seed, spectrum=s, workers=args.workers, **opts)
    if args.dense_oracle:
        _, rep_dense = estimate_gram(g, k, s, lat, solver="dense", **opts)
        diff = abs(rep.mse - rep_dense.mse)
        print(f"mse lanczos={rep.mse!r} dense={rep_dense.mse!r} diff={diff:.3e}", file=sys.stderr)
        if not diff < 1e-9:
            raise ArithmeticError(f"sparse and dense pipelines disagree by {diff:.3e} > 1e-9")
    return _emit_reconstruction(args, est, rep, lat.positions)


def _emit_reconstruction(args, est, rep, truth) -> int:
    _write(args.out, _dump(rep.to_dict(timing=args.timing)))
    if args.factor_csv:
        write_positions_csv(args.factor_csv, est.factor)
    if args.svg and truth is not None:
        x = np.asarray(truth)
        i, j = np.triu_indices(min(x.shape[0], 90), 1)
        est_ip = np.einsum("ij,ij->i", est.factor[i], est.factor[j])
        Path(args.svg).write_text(
            svg.scatter(np.einsum("ij,ij->i", x[i], x[j]), est_ip, "Gram entries", "true <X_i, X_j>", "estimate")
        )
    return 0


def _tree_kernel(args) -> tuple[Kernel, float]:
    given = [v is not None for v in (args.beta, args.lam, args.kernel)]
    if sum(given) != 1:
        raise ConfigError("pass exactly one of --beta, --lambda, --kernel")
    if args.beta is not None:
        k = wrapped_gaussian(args.beta)
        return k, math.exp(-args.beta / 2.0)
    if args.lam is not None:
        k = wrapped_gaussian_for_lambda(args.lam)
        return k, args.lam
    k = normalize_markov(parse_kernel(args.kernel, 2))
    return k, compute_spectrum(k).lambda_phi


def verdict_lines(q: float, k: Kernel, lam: float, beta: float | None) -> list[str]:
    lines = []
    ks = ks_condition(q, lam)
    lines.append(f"KS bound: {'positive flow' if ks else 'inconclusive'} "
                 f"(qλ² = {q * lam * lam:.3g} {'>' if ks else '<='} 1)")
    if beta is not None:
        zero = gaussian_zero_flow_condition(q, beta)
        lines.append(f"Gaussian bound: {'zero flow' if zero else 'inconclusive'} "
                     f"(qλ = {q * lam:.3g} {'<' if zero else '>='} 1)")
        if not zero and not ks:
            lines.append("regime: open (1 <= qλ and qλ² <= 1)")
    try:
        rep = general_zero_flow_qmax(k, compute_spectrum(k))
        covered = q <= rep.q_max
        lines.append(f"explicit-constant bound: q_max = {rep.q_max:.10g} (k0 = {rep.k0:.4g}); "
                     f"{'zero flow' if covered else 'not covered'} for q = {q:g}")
    except HypothesisError as exc:
        lines.append(f"explicit-constant bound: not applicable ({exc})")
    return lines


def cmd_treeflow(args) -> int:
    seed = seed_from(args)
    k, lam = _tree_kernel(args)
    beta = args.beta if args.beta is not None else (-2.0 * math.log(args.lam) if args.lam is not None else None)
    TreeSpec(args.q, args.depth)  # node cap check before any work
    for line in verdict_lines(args.q, k, lam, beta):
        print(line)
    depths = range(args.min_depth, args.depth + 1)
    curve = flow_experiment(args.q, depths, k, args.m, args.reps, RngStream(seed, 2))
    if args.out:
        Path(args.out).write_text(curve.to_csv())
    else:
        sys.stdout.write(curve.to_csv())
    if args.svg:
        r = curve.records
        Path(args.svg).write_text(svg.line_chart(
            {f"q={args.q:g}, λ={lam:.3g}": ([x.k for x in r], [x.tv_mean for x in r], [x.tv_stderr for x in r])},
            "TV(root posterior, uniform)", "depth k", "mean TV"))
    return 0


def cmd_thresholds(args) -> int:
    out: dict = {}
    lam = args.lam
    if args.beta is not None:
        lam = math.exp(-args.beta / 2.0)
        out["lambda_phi"] = lam
        if args.q is not None:
            out["gaussian_zero_flow"] = gaussian_zero_flow_condition(args.q, args.beta)
            out["q_lambda"] = args.q * lam
    if args.kernel:
        k = normalize_markov(parse_kernel(args.kernel, args.d))
        s = compute_spectrum(k)
        lam = s.lambda_phi
        out["lambda_phi"] = lam
        out["zero_flow_bound"] = general_zero_flow_qmax(k, s).to_dict()
    elif lam is not None:
        f1 = args.f1
        if f1 is None and args.beta is not None:
            f1 = wrapped_gaussian(args.beta).f_at_1
        if f1 is not None:
            out["zero_flow_bound"] = zero_flow_qmax(lam, f1).to_dict()
        elif lam >= 1 or lam <= 0:
            raise HypothesisError(f"need 0 < lambda(phi) < 1, got {lam}")
    if args.q is not None and lam is not None:
        out["ks_positive_flow"] = ks_condition(args.q, lam)
        out["q_lambda_squared"] = args.q * lam * lam
        print(f"KS: {'positive flow' if out['ks_positive_flow'] else 'inconclusive'}", file=sys.stderr)
    if not out:
        raise ConfigError("nothing to compute: pass --lambda/--beta/--kernel (and --q)")
    _write(args.out, _dump(out))
    return 0


def cmd_dps_check(args) -> int:
    seed = seed_from(args)
    k = normalize_markov(parse_kernel(args.kernel, args.d))
    lam = compute_spectrum(k).lambda_phi
    w = basis_vector(args.d, 0)
    if args.grid:
        h = band_halfwidth(lam, args.d)
        aligns = np.linspace(-h, h, args.grid)
    else:
        aligns = np.array([args.align])
    if np.any(np.abs(aligns) > 1):
        raise ConfigError("alignment must lie in [-1, 1]")
    reports = []
    for i, a in enumerate(aligns):
        y = a * w + math.sqrt(max(0.0, 1.0 - a * a)) * basis_vector(args.d, 1)
        rep = dps_epsilon(k, y, w, method=args.method, samples=args.samples, rng=RngStream(seed, 3).child(i))
        row = rep.to_dict()
        row["alignment"] = float(a)
        reports.append(row)
    out = {"kernel": k.describe(), "lambda_phi": lam, "lemma_gate": (1.0 - lam) / 35.0, "points": reports}
    _write(args.out, _dump(out))
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geoperc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="key = value file; explicit flags win")
        sp.add_argument("--out", help="output path (default stdout)")
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        return sp

    s = common(sub.add_parser("spectrum", help="Funk-Hecke eigenvalues and gap constants"), seed=False)
    s.add_argument("--kernel", required=True, help="e.g. linear:5,3  exponential:2  gaussian:1.0")
    s.add_argument("--d", type=int, default=3)
    s.add_argument("--L", type=int, default=None, help="max degree (default: adaptive)")
    s.add_argument("--svg")
    s.set_defaults(func=cmd_spectrum)

    g = common(sub.add_parser("generate", help="sample latents and a sparse graph"))
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, default=3)
    g.add_argument("--kernel", required=True)
    g.add_argument("--positions", help="also write latent positions CSV")
    g.add_argument("--dense", action="store_true", help="use the O(n^2) reference sampler")
    g.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    g.set_defaults(func=cmd_generate)

    r = common(sub.add_parser("reconstruct", help="spectral Gram reconstruction"))
    r.add_argument("--n", type=int, default=5000)
    r.add_argument("--d", type=int, default=3)
    r.add_argument("--kernel")
    r.add_argument("--load", help="graph CSV to read instead of generating")
    r.add_argument("--positions", help="true positions CSV for --load (enables mse)")
    r.add_argument("--sweep", help="n=<n1>,<n2>,... ; runs --seeds seeds per n")
    r.add_argument("--seeds", type=int, default=5)
    r.add_argument("--select", choices=["rank", "nearest"], default="rank")
    r.add_argument("--trim-threshold", type=float, default=None)
    r.add_argument("--no-trim", action="store_true")
    r.add_argument("--scale", choices=["unit", "literal"], default="unit")
    r.add_argument("--dense-oracle", action="store_true", help="cross-check against a dense eigendecomposition")
    r.add_argument("--factor-csv")
    r.add_argument("--svg")
    r.add_argument("--timing", action="store_true", help="record runtime_ms (breaks byte-determinism)")
    r.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    r.set_defaults(func=cmd_reconstruct)

    t = common(sub.add_parser("treeflow", help="information flow on the discretised circle"))
    t.add_argument("--q", type=float, default=2.0)
    t.add_argument("--beta", type=float)
    t.add_argument("--lambda", dest="lam", type=float)
    t.add_argument("--kernel", help="d = 2 kernel, normalised to a Markov kernel")
    t.add_argument("--depth", type=int, default=10)
    t.add_argument("--min-depth", type=int, default=0)
    t.add_argument("--m", type=int, default=180)
    t.add_argument("--reps", type=int, default=200)
    t.add_argument("--svg")
    t.set_defaults(func=cmd_treeflow)

    h = common(sub.add_parser("thresholds", help="flow threshold calculators"), seed=False)
    h.add_argument("--q", type=float)
    h.add_argument("--lambda", dest="lam", type=float)
    h.add_argument("--beta", type=float)
    h.add_argument("--f1", type=float, help="f(1) of the Markov kernel")
    h.add_argument("--kernel")
    h.add_argument("--d", type=int, default=2)
    h.set_defaults(func=cmd_thresholds)

    c = common(sub.add_parser("dps-check", help="reflection-symmetric mass epsilon"))
    c.add_argument("--kernel", default="exponential:2")
    c.add_argument("--d", type=int, default=3)
    c.add_argument("--align", type=float, default=0.0, help="<w, y>")
    c.add_argument("--grid", type=int, default=0, help="scan this many alignments across the lemma band")
    c.add_argument("--method", choices=["auto", "quadrature", "monte-carlo"], default="auto")
    c.add_argument("--samples", type=int, default=1_000_000)
    c.set_defaults(func=cmd_dps_check)
    return p


def _config_path(argv) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    path = _config_path(argv)
    command = next((tok for tok in argv if not tok.startswith("-")), None)
    subparsers = parser._subparsers._group_actions[0].choices
    if path and command in subparsers:
        sp = subparsers[command]
        cfg = read_config(path)
        known = {a.dest: a for a in sp._actions}
        for key, val in cfg.items():
            if key not in known or key in ("config", "help"):
                raise ConfigError(f"unknown config key {key!r} for {command}")
            act = known[key]
            if isinstance(act, argparse._StoreTrueAction):
                cfg[key] = val.lower() in ("1", "true", "yes", "on")
            elif act.type is not None:
                cfg[key] = act.type(val)
            act.required = False
        sp.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (ResourceCapError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ArithmeticError, np.linalg.LinAlgError, SelectionError, ArpackError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, ModelError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
