"""Hermitian linear algebra kernel: fractional powers, operator norms, column norms.

Matrices are plain ``numpy`` arrays.  Two conventions realize the domain types:

* ``as_hermitian_pd`` validates/normalizes a positive-definite Hermitian matrix
  (complex input is realified to a real symmetric matrix of twice the size);
* general matrices are any finite real array, validated by ``as_general``.

All operations are pure functions on immutable values.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteError

EIG_FLOOR = 1e-12
SYMMETRY_RTOL = 1e-12


def realify(a: np.ndarray) -> np.ndarray:
    """Embed a complex d x d matrix as a real 2d x 2d matrix.

    The embedding C = A + iB -> [[A, -B], [B, A]] is an algebra homomorphism,
    so matrix norms and Hermitian powers commute with it (eigenvalues and
    singular values appear with doubled multiplicity).
    """
    a = np.asarray(a)
    re, im = np.real(a), np.imag(a)
    return np.block([[re, -im], [im, re]]).astype(float)


def as_general(entries) -> np.ndarray:
    """Validate a general matrix: square, finite; complex input is realified."""
    a = np.asarray(entries)
    if np.iscomplexobj(a):
        a = realify(a)
    a = a.astype(float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("matrix has non-finite entries")
    return a


def as_hermitian_pd(entries, eig_floor: float = EIG_FLOOR) -> np.ndarray:
    """Validate/normalize a positive-definite Hermitian matrix.

    Checks symmetry to relative tolerance 1e-12, symmetrizes exactly, and
    clamps eigenvalues below ``eig_floor`` (reconstructing the matrix when a
    clamp fires, so the result's spectrum is >= eig_floor).
    """
    a = as_general(entries)
    scale = max(float(np.max(np.abs(a))), 1.0)
    if np.max(np.abs(a - a.T)) > SYMMETRY_RTOL * scale:
        raise ValueError("matrix is not symmetric to within 1e-12 relative tolerance")
    a = 0.5 * (a + a.T)
    lam, q = np.linalg.eigh(a)
    if lam[0] < eig_floor:
        lam = np.maximum(lam, eig_floor)
        a = (q * lam) @ q.T
        a = 0.5 * (a + a.T)
    return a


def hermitian_power(a: np.ndarray, s: float, eig_floor: float = EIG_FLOOR) -> np.ndarray:
    """Fractional power of a positive-definite Hermitian matrix.

    Returns V diag(lam_i**s) V* from the eigendecomposition.  Eigenvalues in
    (0, eig_floor) are clamped to eig_floor; a nonpositive eigenvalue combined
    with a negative exponent raises NonFiniteError.
    """
    a = np.asarray(a, dtype=float)
    lam, q = np.linalg.eigh(0.5 * (a + a.T))
    if s < 0 and lam[0] <= 0:
        raise NonFiniteError(
            f"nonpositive eigenvalue {lam[0]:.6g} cannot be raised to power {s}",
            eigenvalue=float(lam[0]),
        )
    lam = np.maximum(lam, eig_floor)
    out = (q * lam**s) @ q.T
    return 0.5 * (out + out.T)


def hermitian_power_batch(mats: np.ndarray, s: float, eig_floor: float = EIG_FLOOR) -> np.ndarray:
    """Cellwise Hermitian power over an array of shape (..., d, d)."""
    mats = np.asarray(mats, dtype=float)
    lam, q = np.linalg.eigh(0.5 * (mats + np.swapaxes(mats, -1, -2)))
    if s < 0 and np.min(lam) <= 0:
        raise NonFiniteError(
            f"nonpositive eigenvalue {np.min(lam):.6g} in batch power {s}",
            eigenvalue=float(np.min(lam)),
        )
    lam = np.maximum(lam, eig_floor)
    out = np.einsum("...ik,...k,...jk->...ij", q, lam**s, q)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def op_norm(a: np.ndarray) -> float:
    """Largest singular value, via the largest eigenvalue of A^T A."""
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("matrix has non-finite entries")
    g = a.T @ a
    lam = np.linalg.eigvalsh(0.5 * (g + g.T))
    return float(np.sqrt(max(lam[-1], 0.0)))


def op_norm_batch(mats: np.ndarray) -> np.ndarray:
    """Largest singular value per matrix over an array of shape (..., d, d).

    d <= 2 uses closed forms; larger d falls back to batched eigvalsh of A^T A.
    """
    mats = np.asarray(mats, dtype=float)
    d = mats.shape[-1]
    if d == 1:
        return np.abs(mats[..., 0, 0])
    if d == 2:
        f = np.einsum("...ij,...ij->...", mats, mats)
        det = mats[..., 0, 0] * mats[..., 1, 1] - mats[..., 0, 1] * mats[..., 1, 0]
        disc = np.sqrt(np.maximum(f * f - 4.0 * det * det, 0.0))
        return np.sqrt(np.maximum(0.5 * (f + disc), 0.0))
    g = np.einsum("...ki,...kj->...ij", mats, mats)
    lam = np.linalg.eigvalsh(0.5 * (g + np.swapaxes(g, -1, -2)))
    return np.sqrt(np.maximum(lam[..., -1], 0.0))


def column_norm_sum(a: np.ndarray) -> float:
    """Sum of Euclidean column norms; within [op_norm, d * op_norm]."""
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("matrix has non-finite entries")
    return float(np.sum(np.sqrt(np.sum(a * a, axis=0))))


def sphere_directions(d: int, count: int, seed: int | None = None) -> np.ndarray:
    """Directions on the unit sphere in R^d, shape (count, d).

    seed None gives a deterministic quasi-uniform net (angles for d=2,
    Fibonacci points for d=3, Gaussian with a fixed seed otherwise); an
    explicit seed gives seeded random directions.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if d == 1:
        return np.ones((max(count, 1), 1))
    if seed is None and d == 2:
        th = np.linspace(0.0, np.pi, count, endpoint=False)
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if seed is None and d == 3:
        # Fibonacci sphere
        i = np.arange(count) + 0.5
        phi = np.arccos(1.0 - 2.0 * i / count)
        golden = np.pi * (1.0 + np.sqrt(5.0))
        th = golden * i
        return np.stack(
            [np.sin(phi) * np.cos(th), np.sin(phi) * np.sin(th), np.cos(phi)], axis=1
        )
    rng = np.random.default_rng(1789 if seed is None else seed)
    v = rng.standard_normal((count, d))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return v / norms
