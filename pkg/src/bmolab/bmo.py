"""Two-matrix-weighted little BMO norms and their equivalence harness.

Four variants over a rectangle family, all exact cell sums:

* bmo:    max_R ( avg_R |V(x)^{1/p} (B(x) - <B>_R) U_R^{-1}|^p )^{1/p}
* b~mo:   max_R   avg_R |V_R (B(x) - <B>_R) U_R^{-1}|
* bmo^1:  max_R ( avg_x ( avg_y |V(x)^{1/p} (B(x)-B(y)) U(y)^{-1/p}|^{p'} )^{p/p'} )^{1/p}
* bmo^2:  max_R ( avg_y ( avg_x |V(x)^{1/p} (B(x)-B(y)) U(y)^{-1/p}|^{p} )^{p'/p} )^{1/p'}

U_R, V_R are reducing operators in the selected mode.  Dyadic families are
swept one level at a time through block views; shifted grids roll the fields.
One-parameter (m = 0) grids run through the same code, which realizes the
slice norms.
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
    power_mean,
)
from .linalg import hermitian_power_batch, op_norm_batch
from .reducing import reduce_with_mode, region_indices
from .weights import WeightField, dual_weight, slice_field

DEGENERATE_FLOOR = 1e-10


@dataclass
class BmoReport:
    values: dict
    p: float
    family: str
    mode: str
    argmax: dict = field(default_factory=dict)
    slice_sup: tuple = (None, None)
    ratios: dict = field(default_factory=dict)
    degenerate: list = field(default_factory=list)


def transpose_symbol(b: WeightField) -> WeightField:
    vals = np.ascontiguousarray(np.swapaxes(b.values, -1, -2))
    meta = {"generator": {"kind": "adjoint", "of": b.meta.get("generator", {})}}
    return WeightField(b.grid, vals, b.kind, meta)


def _rolled(values: np.ndarray, grid: GridSpec, offsets) -> np.ndarray:
    if all(o == 0 for o in offsets):
        return values
    return np.roll(values, shift=tuple(-o for o in offsets), axis=tuple(range(grid.n_axes)))


def _reducing_inv_blocks(u: WeightField, grid, sides, offsets, p: float, mode: str):
    """Per-rectangle U_R^{-1} for one dyadic level, batched over rectangles."""
    if mode == "exact_p2":
        mean = level_blocks(_rolled(u.values, grid, offsets), grid, sides).mean(axis=1)
        return hermitian_power_batch(mean, -0.5)
    if mode == "proxy":
        mean = level_blocks(_rolled(u.power(1.0 / p), grid, offsets), grid, sides).mean(axis=1)
        return hermitian_power_batch(mean, -1.0)
    raise ValueError(f"no batched reducing path for mode {mode!r}")


def _reducing_blocks(u: WeightField, grid, sides, offsets, p: float, mode: str):
    if mode == "exact_p2":
        mean = level_blocks(_rolled(u.values, grid, offsets), grid, sides).mean(axis=1)
        return hermitian_power_batch(mean, 0.5)
    if mode == "proxy":
        return level_blocks(_rolled(u.power(1.0 / p), grid, offsets), grid, sides).mean(axis=1)
    raise ValueError(f"no batched reducing path for mode {mode!r}")


def _resolve_mode(p: float, mode: str) -> str:
    if mode == "auto":
        return "exact_p2" if p == 2.0 else "proxy"
    if mode == "exact_p2" and p != 2.0:
        raise ValueError("exact_p2 mode requires p = 2")
    return mode


def _check_fields(b: WeightField, u: WeightField, v: WeightField):
    if b.kind != "symbol":
        raise ValueError("B must be a symbol-kind field")
    if u.kind != "weight" or v.kind != "weight":
        raise ValueError("U, V must be weight-kind fields")
    if not (b.grid == u.grid == v.grid):
        raise ValueError("B, U, V must share one grid")


def _sweep_max(family: RectangleFamily, level_values_fn, extra_value_fn):
    """Shared driver: max and argmax over shifts x levels, then extras."""
    grid = family.grid
    best, best_rect = -np.inf, None
    for shift in family.shifts:
        for sides in level_sides(grid):
            vals = level_values_fn(shift.offsets, sides)
            k = int(np.argmax(vals))
            if vals[k] > best:
                best = float(vals[k])
                best_rect = block_index_to_rectangle(grid, sides, k, shift.offsets)
    for rect in family.extras:
        v = extra_value_fn(rect)
        if v > best:
            best, best_rect = float(v), rect
    return best, best_rect


def bmo_norm(
    b: WeightField,
    u: WeightField,
    v: WeightField,
    p: float,
    family: RectangleFamily | None = None,
    mode: str = "auto",
) -> tuple[float, Rectangle | None]:
    """Two-matrix weighted little BMO norm over a rectangle family."""
    _check_fields(b, u, v)
    family = family or make_family(b.grid, "dyadic")
    grid = family.grid
    md = _resolve_mode(p, mode)
    vp_full = v.power(1.0 / p)

    if md in ("exact_p2", "proxy"):
        def level_values(offsets, sides):
            b_blocks = level_blocks(_rolled(b.values, grid, offsets), grid, sides)
            vp_blocks = level_blocks(_rolled(vp_full, grid, offsets), grid, sides)
            u_inv = _reducing_inv_blocks(u, grid, sides, offsets, p, md)
            diff = b_blocks - b_blocks.mean(axis=1, keepdims=True)
            t = vp_blocks @ diff @ u_inv[:, None]
            return power_mean(op_norm_batch(t), p, axis=1)
    else:
        def level_values(offsets, sides):
            # per-rectangle reducing solves; intended for small families
            n_rect = int(np.prod([grid.cells_per_axis // s for s in sides]))
            out = np.zeros(n_rect)
            for k in range(n_rect):
                rect = block_index_to_rectangle(grid, sides, k, offsets)
                out[k] = rect_value(rect)
            return out

    def rect_value(rect):
        idx = region_indices(grid, rect)
        b_st = b.flat()[idx]
        vp_st = vp_full.reshape(grid.n_cells, v.d, v.d)[idx]
        op = reduce_with_mode(u, rect, p, md)
        u_inv = op.inv()
        diff = b_st - b_st.mean(axis=0)
        t = vp_st @ diff @ u_inv
        return float(power_mean(op_norm_batch(t), p, axis=0))

    return _sweep_max(family, level_values, rect_value)


def bmo_tilde_norm(
    b: WeightField,
    u: WeightField,
    v: WeightField,
    p: float,
    family: RectangleFamily | None = None,
    mode: str = "auto",
) -> tuple[float, Rectangle | None]:
    """One-weight-style variant: avg_R |V_R (B - <B>_R) U_R^{-1}|."""
    _check_fields(b, u, v)
    family = family or make_family(b.grid, "dyadic")
    grid = family.grid
    md = _resolve_mode(p, mode)

    if md in ("exact_p2", "proxy"):
        def level_values(offsets, sides):
            b_blocks = level_blocks(_rolled(b.values, grid, offsets), grid, sides)
            u_inv = _reducing_inv_blocks(u, grid, sides, offsets, p, md)
            v_red = _reducing_blocks(v, grid, sides, offsets, p, md)
            diff = b_blocks - b_blocks.mean(axis=1, keepdims=True)
            t = v_red[:, None] @ diff @ u_inv[:, None]
            return np.mean(op_norm_batch(t), axis=1)
    else:
        def level_values(offsets, sides):
            n_rect = int(np.prod([grid.cells_per_axis // s for s in sides]))
            return np.array(
                [
                    rect_value(block_index_to_rectangle(grid, sides, k, offsets))
                    for k in range(n_rect)
                ]
            )

    def rect_value(rect):
        idx = region_indices(grid, rect)
        b_st = b.flat()[idx]
        op_u = reduce_with_mode(u, rect, p, md)
        op_v = reduce_with_mode(v, rect, p, md)
        diff = b_st - b_st.mean(axis=0)
        t = op_v.matrix @ diff @ op_u.inv()
        return float(np.mean(op_norm_batch(t)))

    return _sweep_max(family, level_values, rect_value)


def _pointwise_stacks(b, u, v, p):
    """Cellwise products for the pointwise variants: V^{1/p}B, U^{-1/p}, V^{1/p}, B U^{-1/p}."""
    vp = v.power(1.0 / p)
    um = u.power(-1.0 / p)
    return vp @ b.values, um, vp, b.values @ um


def bmo1_norm(
    b: WeightField,
    u: WeightField,
    v: WeightField,
    p: float,
    family: RectangleFamily | None = None,
) -> tuple[float, Rectangle | None]:
    """First pointwise variant; no reducing operators involved."""
    _check_fields(b, u, v)
    family = family or make_family(b.grid, "dyadic")
    grid = family.grid
    pp = p / (p - 1.0)
    vpb, um, vp, bum = _pointwise_stacks(b, u, v, p)

    def level_values(offsets, sides):
        blocks = [
            level_blocks(_rolled(x, grid, offsets), grid, sides)
            for x in (vpb, um, vp, bum)
        ]
        vals = pairwise_double_mean(
            blocks[0], blocks[1], q=pp, r=p / pp, a2=blocks[2], b2=blocks[3]
        )
        return vals ** (1.0 / p)

    def rect_value(rect):
        idx = region_indices(grid, rect)
        st = [x.reshape(grid.n_cells, b.d, b.d)[idx] for x in (vpb, um, vp, bum)]
        val = pair_norm_mean(st[0], st[1], st[2], st[3], q=pp, r=p / pp)
        return val ** (1.0 / p)

    return _sweep_max(family, level_values, rect_value)


def bmo1_local(b, u, v, p: float, region) -> float:
    """Local (single-region) first pointwise oscillation, without the sup."""
    _check_fields(b, u, v)
    pp = p / (p - 1.0)
    vpb, um, vp, bum = _pointwise_stacks(b, u, v, p)
    grid = b.grid
    idx = region_indices(grid, region)
    st = [x.reshape(grid.n_cells, b.d, b.d)[idx] for x in (vpb, um, vp, bum)]
    return pair_norm_mean(st[0], st[1], st[2], st[3], q=pp, r=p / pp) ** (1.0 / p)


def bmo2_norm(
    b: WeightField,
    u: WeightField,
    v: WeightField,
    p: float,
    family: RectangleFamily | None = None,
) -> tuple[float, Rectangle | None]:
    """Second pointwise variant: inner mean over x with power p, outer over y."""
    _check_fields(b, u, v)
    family = family or make_family(b.grid, "dyadic")
    grid = family.grid
    pp = p / (p - 1.0)
    vpb, um, vp, bum = _pointwise_stacks(b, u, v, p)

    def level_values(offsets, sides):
        blocks = [
            level_blocks(_rolled(x, grid, offsets), grid, sides)
            for x in (vpb, um, vp, bum)
        ]
        vals = pairwise_double_mean(
            blocks[0], blocks[1], q=p, r=pp / p, a2=blocks[2], b2=blocks[3],
            left="inner",
        )
        return vals ** (1.0 / pp)

    def rect_value(rect):
        idx = region_indices(grid, rect)
        st = [x.reshape(grid.n_cells, b.d, b.d)[idx] for x in (vpb, um, vp, bum)]
        val = pair_norm_mean(st[0], st[1], st[2], st[3], q=p, r=pp / p, left="inner")
        return val ** (1.0 / pp)

    return _sweep_max(family, level_values, rect_value)


def one_param_bmo_norm(
    b: WeightField,
    u: WeightField,
    v: WeightField,
    p: float,
    family: RectangleFamily | None = None,
    mode: str = "auto",
) -> tuple[float, Rectangle | None]:
    """Matrix-weighted BMO over cube families of a one-parameter grid."""
    if b.grid.dims[1] != 0:
        raise ValueError("one-parameter norm expects an (n, 0) grid")
    return bmo_norm(b, u, v, p, family, mode)


def slice_sup_norms(
    b: WeightField,
    u: WeightField,
    v: WeightField,
    p: float,
    mode: str = "auto",
    family_mode: str = "dyadic",
) -> tuple[float, float]:
    """Max over grid slices of the one-parameter norms (finite realization of
    the essential suprema): (sup over x2 of the x1-norm, sup over x1)."""
    import itertools

    _check_fields(b, u, v)
    grid = b.grid
    n, m = grid.dims
    if m == 0:
        raise ValueError("slice norms need a biparameter field")

    def sup_over(other_factor: int) -> float:
        coords = itertools.product(
            *[range(grid.cells_per_axis) for _ in grid.axes_of_factor(other_factor)]
        )
        best = 0.0
        fam = None
        for c in coords:
            cc = c if len(c) > 1 else c[0]
            bs = slice_field(b, other_factor, cc)
            us = slice_field(u, other_factor, cc)
            vs = slice_field(v, other_factor, cc)
            if fam is None:
                fam = make_family(bs.grid, family_mode)
            val, _ = one_param_bmo_norm(bs, us, vs, p, fam, mode)
            best = max(best, val)
        return best

    return sup_over(2), sup_over(1)


def equivalence_report(
    b: WeightField,
    u: WeightField,
    v: WeightField,
    p: float,
    family: RectangleFamily | None = None,
    mode: str = "auto",
    with_slices: bool = True,
) -> BmoReport:
    """All norm variants, the dual-pair norms, slice suprema, and their ratios."""
    _check_fields(b, u, v)
    family = family or make_family(b.grid, "dyadic")
    pp = p / (p - 1.0)
    values: dict = {}
    argmax: dict = {}
    values["bmo"], argmax["bmo"] = bmo_norm(b, u, v, p, family, mode)
    values["bmo_tilde"], argmax["bmo_tilde"] = bmo_tilde_norm(b, u, v, p, family, mode)
    values["bmo1"], argmax["bmo1"] = bmo1_norm(b, u, v, p, family)
    values["bmo2"], argmax["bmo2"] = bmo2_norm(b, u, v, p, family)
    b_adj = transpose_symbol(b)
    u_dual = dual_weight(u, p)
    v_dual = dual_weight(v, p)
    values["bmo_dual"], argmax["bmo_dual"] = bmo_norm(b_adj, v_dual, u_dual, pp, family, mode)
    values["bmo_tilde_dual"], argmax["bmo_tilde_dual"] = bmo_tilde_norm(
        b_adj, v_dual, u_dual, pp, family, mode
    )
    slice_sup = (None, None)
    if with_slices and b.grid.dims[1] > 0:
        slice_sup = slice_sup_norms(b, u, v, p, mode)
        values["slice_sup_1"], values["slice_sup_2"] = slice_sup

    ratios: dict = {}
    degenerate: list = []
    names = list(values)
    for i, a in enumerate(names):
        for c in names[i + 1 :]:
            va, vc = values[a], values[c]
            if va is None or vc is None:
                continue
            if va < DEGENERATE_FLOOR or vc < DEGENERATE_FLOOR:
                degenerate.append(f"{a}/{c}")
            else:
                ratios[f"{a}/{c}"] = va / vc
    return BmoReport(
        values, p, family.describe(), _resolve_mode(p, mode), argmax, slice_sup,
        ratios, degenerate,
    )
