"""Matrix A_p characteristics: local, dyadic, continuous, duality, slices.

The local characteristic of a weight over a region E is the exact double
cell sum

    avg_x ( avg_y |W(x)^{1/p} W(y)^{-1/p}|^{p'} )^{p/p'},

and the dyadic/continuous variants take the maximum over a rectangle family.
Family sweeps evaluate whole dyadic levels at once through block views;
shifted grids reuse the base-grid path after rolling the field by the shift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec, Rectangle, RectangleFamily, make_family
from .kernels import (
    block_index_to_rectangle,
    level_blocks,
    level_sides,
    pair_norm_mean,
    pairwise_double_mean,
)
from .linalg import op_norm_batch
from .reducing import reduce_with_mode, region_indices
from .weights import WeightField, dual_weight, slice_field


@dataclass
class ApReport:
    value: float
    p: float
    family: str
    argmax: Rectangle | None = None
    mode: str = ""
    table: list | None = None
    extras: dict = field(default_factory=dict)


def ap_local(w: WeightField, region, p: float) -> float:
    """Exact double cell-sum characteristic over one region."""
    pp = p / (p - 1.0)
    idx = region_indices(w.grid, region)
    wp = w.power(1.0 / p).reshape(w.grid.n_cells, w.d, w.d)[idx]
    wm = w.power(-1.0 / p).reshape(w.grid.n_cells, w.d, w.d)[idx]
    return pair_norm_mean(wp, wm, q=pp, r=p / pp)


def _rolled(values: np.ndarray, grid: GridSpec, offsets) -> np.ndarray:
    if all(o == 0 for o in offsets):
        return values
    return np.roll(values, shift=tuple(-o for o in offsets), axis=tuple(range(grid.n_axes)))


def _ap_family_sweep(
    w: WeightField, family: RectangleFamily, p: float, with_table: bool = False
):
    pp = p / (p - 1.0)
    grid = family.grid
    wp_full = w.power(1.0 / p)
    wm_full = w.power(-1.0 / p)
    best, best_rect = -np.inf, None
    table = [] if with_table else None
    seen = set()
    for shift in family.shifts:
        wp_r = _rolled(wp_full, grid, shift.offsets)
        wm_r = _rolled(wm_full, grid, shift.offsets)
        for sides in level_sides(grid):
            wp_b = level_blocks(wp_r, grid, sides)
            wm_b = level_blocks(wm_r, grid, sides)
            vals = pairwise_double_mean(wp_b, wm_b, q=pp, r=p / pp)
            k = int(np.argmax(vals))
            if vals[k] > best:
                best = float(vals[k])
                best_rect = block_index_to_rectangle(grid, sides, k, shift.offsets)
            if with_table:
                for j, v in enumerate(vals):
                    rect = block_index_to_rectangle(grid, sides, j, shift.offsets)
                    key = rect.canonical_key(grid.cells_per_axis)
                    if key not in seen:
                        seen.add(key)
                        table.append((rect, float(v)))
    for rect in family.extras:
        v = ap_local(w, rect, p)
        if v > best:
            best, best_rect = v, rect
        if with_table:
            table.append((rect, float(v)))
    return best, best_rect, table


def ap_dyadic(
    w: WeightField, p: float, grid: GridSpec | None = None, with_table: bool = False
) -> ApReport:
    """Maximum of the local characteristic over base product-dyadic rectangles."""
    family = make_family(grid or w.grid, "dyadic")
    value, argmax, table = _ap_family_sweep(w, family, p, with_table)
    return ApReport(value, p, family.describe(), argmax, table=table)


def ap_continuous(w: WeightField, family: RectangleFamily, p: float) -> ApReport:
    """Maximum over a shifted/sampled family (finite surrogate for all rectangles)."""
    value, argmax, _ = _ap_family_sweep(w, family, p)
    return ApReport(value, p, family.describe(), argmax)


def ap_dual_check(w: WeightField, p: float) -> tuple[float, ApReport, ApReport]:
    """r = [W']_{A_p'}^{1/p'} / [W]_{A_p}^{1/p} over the base dyadic family."""
    pp = p / (p - 1.0)
    rep = ap_dyadic(w, p)
    rep_dual = ap_dyadic(dual_weight(w, p), pp)
    r = rep_dual.value ** (1.0 / pp) / rep.value ** (1.0 / p)
    return float(r), rep, rep_dual


def ap_slices(w: WeightField, p: float) -> tuple[float, float, dict]:
    """One-parameter dyadic characteristics of all grid slices, maximized.

    Returns (max over x2 slices of the x1-characteristic, max over x1 slices
    of the x2-characteristic, details); the finite max realizes the essential
    supremum for piecewise-constant fields.
    """
    import itertools

    n, m = w.grid.dims
    if m == 0:
        raise ValueError("slice characteristics need a biparameter field")
    n_cells = w.grid.cells_per_axis

    def max_over(factor: int) -> float:
        other = 2 if factor == 1 else 1
        coords = itertools.product(
            *[range(n_cells) for _ in w.grid.axes_of_factor(other)]
        )
        best = -np.inf
        for c in coords:
            sl = slice_field(w, other, c if len(c) > 1 else c[0])
            best = max(best, ap_dyadic(sl, p).value)
        return best

    s1 = max_over(1)  # characteristic in x1, sup over x2
    s2 = max_over(2)
    return s1, s2, {"p": p}


def ap_reducing_form(
    w: WeightField, family: RectangleFamily, p: float, mode: str = "auto"
) -> ApReport:
    """sup over the family of |W'_R W_R|^p, the reducing-operator form.

    exact_p2 and proxy modes batch all rectangles per level; john mode loops
    over materialized rectangles (use small families).
    """
    pp = p / (p - 1.0)
    grid = family.grid
    if mode == "auto":
        mode = "exact_p2" if p == 2.0 else "proxy"
    best, best_rect = -np.inf, None
    if mode in ("exact_p2", "proxy"):
        # W'^{1/p'} = W^{-1/p} termwise, so both block averages come from
        # powers of W itself: exact_p2 roots the averages of W and W^{-1},
        # proxy averages W^{1/p} and W^{-1/p} directly.
        from .linalg import hermitian_power_batch

        if mode == "exact_p2":
            w_full, d_full, post = w.values, w.power(-1.0), 0.5
        else:
            w_full, d_full, post = w.power(1.0 / p), w.power(-1.0 / p), None
        for shift in family.shifts:
            w_r = _rolled(w_full, grid, shift.offsets)
            d_r = _rolled(d_full, grid, shift.offsets)
            for sides in level_sides(grid):
                w_mean = level_blocks(w_r, grid, sides).mean(axis=1)
                d_mean = level_blocks(d_r, grid, sides).mean(axis=1)
                if post is not None:
                    w_mean = hermitian_power_batch(w_mean, post)
                    d_mean = hermitian_power_batch(d_mean, post)
                vals = op_norm_batch(d_mean @ w_mean) ** p
                k = int(np.argmax(vals))
                if vals[k] > best:
                    best = float(vals[k])
                    best_rect = block_index_to_rectangle(grid, sides, k, shift.offsets)
        rects = family.extras
    else:
        rects = tuple(family.rectangles())
    for rect in rects:
        op = reduce_with_mode(w, rect, p, mode if mode != "exact_p2" else "exact_p2")
        op_d = reduce_with_mode(dual_weight(w, p), rect, pp, mode if mode != "exact_p2" else "exact_p2")
        v = float(op_norm_batch((op_d.matrix @ op.matrix)[None])[0] ** p)
        if v > best:
            best, best_rect = v, rect
    return ApReport(best, p, family.describe(), best_rect, mode=mode)
