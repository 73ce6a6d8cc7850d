"""Latent geometry in sparse random graphs: spectral Gram reconstruction and tree information flow."""

from .graph import LatentSample, SparseGraph, generate_graph, sample_latents, trim_degrees
from .kernels import Kernel, Spectrum, compute_spectrum, funk_hecke_eigenvalues, normalize_markov, parse_kernel
from .reconstruct import estimate_gram
from .sphere import RngStream
from .treeflow import TreeSpec, flow_experiment, sample_tree, z_statistic

__all__ = [
    "Kernel",
    "LatentSample",
    "RngStream",
    "SparseGraph",
    "Spectrum",
    "TreeSpec",
    "compute_spectrum",
    "estimate_gram",
    "flow_experiment",
    "funk_hecke_eigenvalues",
    "generate_graph",
    "normalize_markov",
    "parse_kernel",
    "sample_latents",
    "sample_tree",
    "trim_degrees",
    "z_statistic",
]
