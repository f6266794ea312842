"""Deterministic symmetric eigendecomposition of graph Laplacians.

The basis fixes an ascending eigenvalue sort and a sign convention (the
largest-magnitude entry of each eigenvector, smallest index on ties, is made
nonnegative) so that repeated decompositions of the same matrix are
bit-identical and exported frequency profiles are reproducible.
"""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import numpy as np

from .data import load_matrix_csv, save_matrix_csv
from .graphs import LaplacianKind

ORTHO_TOL = 1e-8
SYM_TOL = 1e-10


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Laplacian."""

    eigenvalues: np.ndarray     # (n,)
    eigenvectors: np.ndarray    # (n, n), eigenvector s in column s
    kind: LaplacianKind

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])


def _apply_sign_rule(U: np.ndarray) -> np.ndarray:
    U = U.copy()
    pivot = np.argmax(np.abs(U), axis=0)
    flip = U[pivot, np.arange(U.shape[1])] < 0
    U[:, flip] *= -1.0
    return U


def _validate(basis: SpectralBasis, L: np.ndarray) -> None:
    U, lam = basis.eigenvectors, basis.eigenvalues
    n = L.shape[0]
    gram = U.T @ U - np.eye(n)
    if np.max(np.abs(gram)) > ORTHO_TOL:
        raise ArithmeticError("eigenvector matrix is not orthonormal within 1e-8")
    recon = (U * lam) @ U.T - L
    if np.max(np.abs(recon)) > ORTHO_TOL:
        raise ArithmeticError("eigendecomposition does not reconstruct L within 1e-8")
    if np.any(np.diff(lam) < 0):
        raise ArithmeticError("eigenvalues are not sorted ascending")
    if basis.kind is LaplacianKind.SYM_NORMALIZED:
        if not (-ORTHO_TOL <= lam[0] <= ORTHO_TOL):
            raise ArithmeticError(f"lambda_1 = {lam[0]} outside [-1e-8, 1e-8]")
        if lam[-1] > 2 + ORTHO_TOL:
            raise ArithmeticError(f"lambda_max = {lam[-1]} exceeds 2")


def decompose(L: np.ndarray, kind: LaplacianKind, cache_dir=None) -> SpectralBasis:
    """Eigendecompose a symmetric Laplacian into a validated SpectralBasis.

    L must be symmetric within 1e-10. With cache_dir set, (lambda, U) pairs
    are stored as CSV keyed by a content hash of L; a cache hit that fails
    the basis invariants is discarded and recomputed.
    """
    L = np.asarray(L, dtype=np.float64)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError(f"Laplacian must be square, got shape {L.shape}")
    if np.max(np.abs(L - L.T), initial=0.0) > SYM_TOL:
        raise ValueError("Laplacian is not symmetric within 1e-10")

    if cache_dir is not None:
        cached = _cache_load(cache_dir, L, kind)
        if cached is not None:
            return cached

    lam, U = np.linalg.eigh(0.5 * (L + L.T))
    order = np.argsort(lam, kind="stable")
    lam = np.ascontiguousarray(lam[order])
    U = _apply_sign_rule(U[:, order])
    basis = SpectralBasis(eigenvalues=lam, eigenvectors=U, kind=kind)
    _validate(basis, L)

    if cache_dir is not None:
        _cache_store(cache_dir, L, kind, basis)
    return basis


def fourier(basis: SpectralBasis, x: np.ndarray) -> np.ndarray:
    """Graph Fourier transform U^T x of a length-n signal."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != basis.n:
        raise ValueError(f"signal length {x.shape[0]} != basis size {basis.n}")
    return basis.eigenvectors.T @ x


def inverse_fourier(basis: SpectralBasis, x_ft: np.ndarray) -> np.ndarray:
    """Inverse graph Fourier transform U x_ft."""
    x_ft = np.asarray(x_ft, dtype=np.float64)
    if x_ft.shape[0] != basis.n:
        raise ValueError(f"spectrum length {x_ft.shape[0]} != basis size {basis.n}")
    return basis.eigenvectors @ x_ft


# ---------------------------------------------------------------------------
# on-disk cache
# ---------------------------------------------------------------------------

def _cache_key(L: np.ndarray, kind: LaplacianKind) -> str:
    h = hashlib.sha256()
    h.update(str(L.shape).encode())
    h.update(kind.value.encode())
    h.update(np.ascontiguousarray(L).tobytes())
    return h.hexdigest()[:32]


def _cache_paths(cache_dir, key: str):
    return (
        os.path.join(cache_dir, f"{key}.lambda.csv"),
        os.path.join(cache_dir, f"{key}.U.csv"),
    )


def _cache_load(cache_dir, L, kind):
    lam_path, u_path = _cache_paths(cache_dir, _cache_key(L, kind))
    if not (os.path.exists(lam_path) and os.path.exists(u_path)):
        return None
    try:
        lam = load_matrix_csv(lam_path).ravel()
        U = load_matrix_csv(u_path)
        basis = SpectralBasis(eigenvalues=lam, eigenvectors=U, kind=kind)
        _validate(basis, L)
        return basis
    except (ValueError, ArithmeticError):
        os.remove(lam_path)
        os.remove(u_path)
        return None


def _cache_store(cache_dir, L, kind, basis) -> None:
    os.makedirs(cache_dir, exist_ok=True)
    lam_path, u_path = _cache_paths(cache_dir, _cache_key(L, kind))
    save_matrix_csv(lam_path, basis.eigenvalues)
    save_matrix_csv(u_path, basis.eigenvectors)
