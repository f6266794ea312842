"""Spatial convolution supports: designed, Chebyshev, GCN and sampled GAT.

A designed support realizes a chosen spectral response F through
C = U diag(F(lambda)) U^T, so applying C in the node domain filters exactly
with F in the frequency domain. Chebyshev and GCN supports are built from
their structural definitions and analyzed elsewhere by back-calculation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .filters import FilterDesign, evaluate
from .graphs import Graph
from .spectral import SpectralBasis

DESIGNED_SYM_TOL = 1e-8


@dataclass(frozen=True)
class Designed:
    design: FilterDesign


@dataclass(frozen=True)
class Chebyshev:
    k: int


@dataclass(frozen=True)
class GCN:
    pass


@dataclass(frozen=True)
class GatSample:
    seed: int


@dataclass(frozen=True)
class KernelSet:
    """Ordered list of dense n x n supports with per-support provenance."""

    supports: tuple
    provenance: tuple
    basis: Optional[SpectralBasis] = None

    def __post_init__(self):
        if len(self.supports) < 1:
            raise ValueError("a kernel set needs at least one support")
        if len(self.provenance) != len(self.supports):
            raise ValueError("one provenance tag per support required")
        n = self.supports[0].shape[0]
        for tag, C in zip(self.provenance, self.supports):
            if C.shape != (n, n):
                raise ValueError(f"support shapes differ: {C.shape} vs ({n}, {n})")
            if isinstance(tag, Designed) and np.max(np.abs(C - C.T)) > DESIGNED_SYM_TOL:
                raise ValueError("designed support is not symmetric within 1e-8")
        object.__setattr__(self, "supports", tuple(self.supports))
        object.__setattr__(self, "provenance", tuple(self.provenance))

    @property
    def n_kernels(self) -> int:
        return len(self.supports)

    @property
    def n(self) -> int:
        return self.supports[0].shape[0]


def design_kernel(basis: SpectralBasis, design: FilterDesign) -> np.ndarray:
    """Support with the designed spectral response: U diag(F(lambda)) U^T."""
    f = evaluate(design, basis)
    U = basis.eigenvectors
    C = (U * f) @ U.T
    return 0.5 * (C + C.T)


def design_kernelset(basis: SpectralBasis, designs: Sequence[FilterDesign]) -> KernelSet:
    supports = tuple(design_kernel(basis, d) for d in designs)
    return KernelSet(supports=supports, provenance=tuple(Designed(d) for d in designs), basis=basis)


def cheb_kernels(L: np.ndarray, lambda_max: float, n_kernels: int) -> KernelSet:
    """First S Chebyshev supports: C1 = I, C2 = 2L/lambda_max - I, then
    C_k = 2 C2 C_{k-1} - C_{k-2}."""
    if n_kernels < 1:
        raise ValueError("need at least one Chebyshev kernel")
    if lambda_max <= 0:
        raise ValueError(f"lambda_max must be positive, got {lambda_max}")
    L = np.asarray(L, dtype=np.float64)
    n = L.shape[0]
    supports = [np.eye(n)]
    if n_kernels >= 2:
        supports.append(2.0 * L / lambda_max - np.eye(n))
    for _ in range(n_kernels - 2):
        supports.append(2.0 * supports[1] @ supports[-1] - supports[-2])
    tags = tuple(Chebyshev(k) for k in range(1, n_kernels + 1))
    return KernelSet(supports=tuple(supports), provenance=tags)


def gcn_kernel(g: Graph) -> np.ndarray:
    """Renormalized single support (A+I with symmetric degree normalization)."""
    A_tilde = g.adjacency + np.eye(g.n)
    d_tilde = A_tilde.sum(axis=1)
    dinv = 1.0 / np.sqrt(d_tilde)
    C = dinv[:, None] * A_tilde * dinv[None, :]
    return 0.5 * (C + C.T)


def gat_sample_kernel(
    g: Graph,
    heads: int,
    seed: int,
    scale: float = 1.0,
    att_dim: int = 8,
) -> list:
    """Sample attention supports with random weights (no training).

    Per head, W (f0 x att_dim) and a (2*att_dim,) are drawn from a seeded
    normal with the given scale. Scores are LeakyReLU (slope 0.2) of
    a . [W h_i || W h_j] over the closed neighborhood of each node, then
    row-softmaxed over that support set; rows sum to 1 exactly where the
    neighborhood is nonempty (always, since it includes the node itself).
    """
    if g.features.size == 0:
        raise ValueError("GAT sampling needs a nonempty feature matrix")
    rng = np.random.default_rng(seed)
    n = g.n
    support = (g.adjacency > 0) | np.eye(n, dtype=bool)
    kernels = []
    for _ in range(heads):
        W = rng.standard_normal((g.features.shape[1], att_dim)) * scale
        a = rng.standard_normal(2 * att_dim) * scale
        WH = g.features @ W
        scores = (WH @ a[:att_dim])[:, None] + (WH @ a[att_dim:])[None, :]
        scores = np.where(scores > 0, scores, 0.2 * scores)
        scores = np.where(support, scores, -np.inf)
        scores -= scores.max(axis=1, keepdims=True)
        expd = np.exp(scores)
        kernels.append(expd / expd.sum(axis=1, keepdims=True))
    return kernels
