"""Back-calculated frequency profiles of spatial supports.

Any n x n support C has a full profile U^T C U in a given spectral basis;
its diagonal (the standard profile) is the response each eigenvector sees of
itself. Designed supports recover their design exactly; structural supports
(GCN, attention samples) are analyzed against theoretical approximations.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import FLOAT_FMT, save_matrix_csv
from .graphs import Graph, LaplacianKind, build_laplacian
from .kernels import GatSample, gat_sample_kernel
from .spectral import SpectralBasis, decompose


@dataclass(frozen=True)
class FrequencyProfile:
    """Full spectral response U^T C U of one support, with its eigenvalues.

    The standard profile is the diagonal of the full profile, by definition
    and by construction here.
    """

    lam: np.ndarray
    full: np.ndarray
    kernel_tag: object = None

    @property
    def standard(self) -> np.ndarray:
        return np.diagonal(self.full).copy()


def profile(C: np.ndarray, basis: SpectralBasis, kernel_tag=None) -> FrequencyProfile:
    """Back-calculate the frequency profile of a support in the given basis."""
    C = np.asarray(C, dtype=np.float64)
    if C.shape != (basis.n, basis.n):
        raise ValueError(f"support shape {C.shape} does not match basis size {basis.n}")
    U = basis.eigenvectors
    return FrequencyProfile(
        lam=basis.eigenvalues.copy(), full=U.T @ C @ U, kernel_tag=kernel_tag
    )


def profile_deviation(p: FrequencyProfile, oracle: np.ndarray) -> dict:
    """Elementwise deviation of the standard profile from a reference vector."""
    oracle = np.asarray(oracle, dtype=np.float64)
    std = p.standard
    if oracle.shape != std.shape:
        raise ValueError(f"oracle length {oracle.shape} != profile length {std.shape}")
    diff = std - oracle
    return {
        "max_abs": float(np.max(np.abs(diff))),
        "rms": float(np.sqrt(np.mean(diff**2))),
    }


def gat_profile_stats(
    g: Graph,
    trials: int,
    seed: int,
    scale: float = 1.0,
    att_dim: int = 8,
    kind: LaplacianKind = LaplacianKind.SYM_NORMALIZED,
    basis: Optional[SpectralBasis] = None,
) -> dict:
    """Elementwise mean/std of profiles over sampled attention kernels.

    Trial t draws its kernel from seed + t, so runs are deterministic and
    trials could be distributed without changing the result.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if basis is None:
        basis = decompose(build_laplacian(g, kind), kind)
    n = g.n
    sum_full = np.zeros((n, n))
    sumsq_full = np.zeros((n, n))
    for t in range(trials):
        (kernel,) = gat_sample_kernel(g, heads=1, seed=seed + t, scale=scale, att_dim=att_dim)
        full = profile(kernel, basis, kernel_tag=GatSample(seed + t)).full
        sum_full += full
        sumsq_full += full**2
    mean_full = sum_full / trials
    var_full = np.maximum(sumsq_full / trials - mean_full**2, 0.0)
    std_full = np.sqrt(var_full)
    return {
        "lambda": basis.eigenvalues.copy(),
        "mean_standard": np.diagonal(mean_full).copy(),
        "std_standard": np.diagonal(std_full).copy(),
        "mean_full": mean_full,
        "std_full": std_full,
        "trials": trials,
        "seed": seed,
    }


def export_profile(
    p: FrequencyProfile,
    path,
    include_full: bool = False,
    absolute: bool = False,
) -> None:
    """Write a profile as CSV with header ``lambda,standard``.

    Values are written with 17 significant digits and round-trip bitwise
    through the CSV loaders. absolute=True exports |standard| (a plotting
    convention); the stored profile itself is never rectified. With
    include_full set, the full matrix goes to ``<path stem>_full.csv``.
    """
    std = np.abs(p.standard) if absolute else p.standard
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["lambda", "standard"])
        for lam, val in zip(p.lam, std):
            writer.writerow([FLOAT_FMT % lam, FLOAT_FMT % val])
    if include_full:
        stem, ext = os.path.splitext(os.fspath(path))
        full = np.abs(p.full) if absolute else p.full
        save_matrix_csv(stem + "_full" + (ext or ".csv"), full)


def load_profile_csv(path) -> tuple:
    """Read back an exported standard profile as (lambda, standard)."""
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["lambda", "standard"]:
            raise ValueError(f"{path}: not a profile CSV (header {header})")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    lam = np.array([r[0] for r in rows])
    std = np.array([r[1] for r in rows])
    return lam, std
