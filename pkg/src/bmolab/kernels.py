"""Shared numerical kernels: stable power means, pairwise-norm double sums,
and dyadic level-block views used by the characteristic and norm sweeps.

The double-sum pattern here is mean over an outer cell index of a power of a
mean over an inner cell index of operator norms of matrix products; both the
matrix A_p characteristic and the pointwise-oscillation norms are instances.
Power means factor out the per-row maximum before exponentiating, so wide
norm spreads from near-degenerate weights stay finite.
"""

from __future__ import annotations

import itertools

import numpy as np

from .grid import GridSpec
from .linalg import op_norm_batch


def power_mean(values: np.ndarray, q: float, axis=-1) -> np.ndarray:
    """(mean values**q)**(1/q) with max-factoring for numerical stability."""
    values = np.asarray(values, dtype=float)
    m = np.max(values, axis=axis, keepdims=True)
    safe = np.where(m > 0.0, m, 1.0)
    inner = np.mean((values / safe) ** q, axis=axis)
    return np.squeeze(safe, axis=axis) * inner ** (1.0 / q)


def pair_norm_mean(
    a1: np.ndarray,
    b1: np.ndarray,
    a2: np.ndarray | None = None,
    b2: np.ndarray | None = None,
    q: float = 2.0,
    r: float = 1.0,
    left: str = "outer",
    chunk: int = 256,
) -> float:
    """mean_o ( mean_i |A1 B1 - A2 B2|^q )^r over all cell pairs (o, i).

    With left="outer" the product for pair (o, i) is A1[o] @ B1[i] (minus
    A2[o] @ B2[i] when given); with left="inner" the roles of o and i swap in
    the first slot: A1[i] @ B1[o] - A2[i] @ B2[o].
    """
    out = pairwise_double_mean(
        a1[None],
        b1[None],
        q,
        r,
        None if a2 is None else a2[None],
        None if b2 is None else b2[None],
        left,
        chunk,
    )
    return float(out[0])


def level_sides(grid: GridSpec):
    """All per-factor dyadic side combinations (s1, s2) in cells.

    Yields tuples of per-axis sides; one-parameter grids (m = 0) yield only
    the first factor's cube sides.
    """
    n, m = grid.dims
    lev1 = [2**k for k in range(grid.depth + 1)]
    lev2 = [2**k for k in range(grid.depth + 1)] if m > 0 else [None]
    for s1, s2 in itertools.product(lev1, lev2):
        sides = (s1,) * n + ((s2,) * m if m > 0 else ())
        yield sides


def level_blocks(values: np.ndarray, grid: GridSpec, sides) -> np.ndarray:
    """Reshape a cell field into per-rectangle blocks for one dyadic level.

    values has shape grid.shape + trailing; the result has shape
    (n_rectangles, cells_per_rectangle) + trailing, rectangles in C order of
    their block indices.
    """
    n_cells = grid.cells_per_axis
    trailing = values.shape[grid.n_axes :]
    newshape: list[int] = []
    for s in sides:
        newshape.extend([n_cells // s, s])
    arr = values.reshape(tuple(newshape) + trailing)
    block_axes = list(range(0, 2 * grid.n_axes, 2))
    cell_axes = list(range(1, 2 * grid.n_axes, 2))
    arr = np.transpose(
        arr, block_axes + cell_axes + list(range(2 * grid.n_axes, arr.ndim))
    )
    n_rect = int(np.prod([n_cells // s for s in sides]))
    per_rect = int(np.prod(sides))
    return arr.reshape((n_rect, per_rect) + trailing)


def block_index_to_rectangle(grid: GridSpec, sides, flat_index: int, offsets=None):
    """Reconstruct the rectangle of a level block, undoing any grid shift."""
    from .grid import Rectangle

    n_cells = grid.cells_per_axis
    counts = [n_cells // s for s in sides]
    idx = np.unravel_index(flat_index, counts)
    offs = offsets if offsets is not None else (0,) * grid.n_axes
    axes = []
    for ax, (j, s) in enumerate(zip(idx, sides)):
        a = (j * s + offs[ax]) % n_cells
        axes.append((float(a), float(a + s)))
    return Rectangle(tuple(axes), grid.dims[0])


def pairwise_double_mean(
    a1: np.ndarray,
    b1: np.ndarray,
    q: float,
    r: float,
    a2: np.ndarray | None = None,
    b2: np.ndarray | None = None,
    left: str = "outer",
    chunk: int = 256,
) -> np.ndarray:
    """Per-rectangle mean_o (mean_i |A1 B1 - A2 B2|^q)^r for blocked stacks.

    The outer exponent r applies to the plain inner mean of q-th powers (so
    the A_p pattern uses q = p', r = p/p').  All inputs have shape
    (n_rect, cells, d, d); the outer/inner indices run over the cells of each
    rectangle independently.  Returns (n_rect,).

    Pair products are computed as one batched GEMM per chunk:
    (n_rect, c*d, d) @ (n_rect, d, n*d) covers all (outer, inner) pairs at
    once, and the per-pair operator norms are read off the strided view.
    """
    n_rect, n, d = a1.shape[0], a1.shape[1], a1.shape[2]
    if left == "inner":
        # product for (o, i) is a1[i] @ b1[o]: transposing both factors turns
        # it into b1^T[o] @ a1^T[i] with the same operator norms
        a1, b1 = np.swapaxes(b1, -1, -2), np.swapaxes(a1, -1, -2)
        if a2 is not None:
            a2, b2 = np.swapaxes(b2, -1, -2), np.swapaxes(a2, -1, -2)

    if d <= 2:
        # one GEMM per matrix entry: plane[r, c] = A[:, r, :] @ B[:, :, c]^T
        # keeps every intermediate contiguous of shape (n_rect, chunk, n)
        a1c = np.ascontiguousarray(np.moveaxis(a1, 2, 1))  # (R, d, n, d) rows
        b1c = np.ascontiguousarray(np.moveaxis(np.moveaxis(b1, 3, 1), 3, 2))  # (R, d, d, n): [R, c, j, i]
        a2c = b2c = None
        if a2 is not None:
            a2c = np.ascontiguousarray(np.moveaxis(a2, 2, 1))
            b2c = np.ascontiguousarray(np.moveaxis(np.moveaxis(b2, 3, 1), 3, 2))
        out = np.zeros(n_rect)
        for lo in range(0, n, chunk):
            hi = min(lo + chunk, n)
            planes = []
            for row in range(d):
                for col in range(d):
                    x = a1c[:, row, lo:hi, :] @ b1c[:, col]
                    if a2 is not None:
                        x -= a2c[:, row, lo:hi, :] @ b2c[:, col]
                    planes.append(x)
            if d == 1:
                norms = np.abs(planes[0])
            else:
                m00, m01, m10, m11 = planes
                f = m00 * m00
                for m in (m01, m10, m11):
                    f += m * m
                det = m00 * m11 - m01 * m10
                disc = np.sqrt(np.maximum(f * f - 4.0 * det * det, 0.0))
                norms = np.sqrt(np.maximum(0.5 * (f + disc), 0.0))
            inner = power_mean(norms, q, axis=2)
            out += np.sum(inner ** (q * r), axis=1)
        return out / n

    out = np.zeros(n_rect)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        prod = np.einsum("roij,rnjk->ronik", a1[:, lo:hi], b1)
        if a2 is not None:
            prod -= np.einsum("roij,rnjk->ronik", a2[:, lo:hi], b2)
        norms = op_norm_batch(prod)  # (n_rect, chunk, n)
        inner = power_mean(norms, q, axis=2)  # (n_rect, chunk), = (mean n^q)^{1/q}
        out += np.sum(inner ** (q * r), axis=1)
    return out / n
