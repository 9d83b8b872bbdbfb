"""Dyadic product grids on the periodic unit torus, rectangles, and coverings.

The domain is the torus [0,1)^(n+m) discretized into N = 2**L cells per axis.
All geometry is expressed in cell units.  A rectangle is a product of two
cubes (one per parameter factor); its per-axis intervals are half-open [a, b)
with 0 <= a < N and a < b <= a + N, where b > N means the interval wraps
around the torus seam.

Shifted grid families realize the 1/3 trick: each axis is rigidly translated
by round(N/3) or round(2*N/3) cells.  A rigid integer translation preserves
dyadic nesting exactly; the snap distance |N/3 - round(N/3)| is recorded and
only perturbs the covering constants, which ``cover`` verifies per call.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ResolutionExceededError, TooLargeError


@dataclass(frozen=True)
class GridSpec:
    """Product grid: dims = (n, m) axes per factor, N = 2**depth cells per axis.

    m = 0 denotes a one-parameter grid (used for slice fields).
    """

    dims: tuple[int, int]
    depth: int

    def __post_init__(self):
        n, m = self.dims
        if n < 1 or m < 0:
            raise ValueError(f"dims must satisfy n >= 1, m >= 0, got {self.dims}")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")

    @property
    def n_axes(self) -> int:
        return self.dims[0] + self.dims[1]

    @property
    def cells_per_axis(self) -> int:
        return 2**self.depth

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells_per_axis,) * self.n_axes

    @property
    def n_cells(self) -> int:
        return self.cells_per_axis**self.n_axes

    @property
    def cell_volume(self) -> float:
        return (1.0 / self.cells_per_axis) ** self.n_axes

    def axes_of_factor(self, factor: int) -> range:
        n, m = self.dims
        if factor == 1:
            return range(0, n)
        if factor == 2:
            return range(n, n + m)
        raise ValueError("factor must be 1 or 2")

    def cell_centers(self, axis: int) -> np.ndarray:
        n = self.cells_per_axis
        return (np.arange(n) + 0.5) / n


def default_depth(n: int, m: int) -> int:
    """Desk-scale default resolution: L=6 for two axes, L=4 for three."""
    return 6 if n + m <= 2 else 4


@dataclass(frozen=True)
class Rectangle:
    """Product rectangle R = R1 x R2 with cube factors, in cell units."""

    axes: tuple[tuple[float, float], ...]
    split: int

    def __post_init__(self):
        for a, b in self.axes:
            if not b > a:
                raise ValueError(f"degenerate interval [{a}, {b})")
        s1 = {round(b - a, 9) for a, b in self.axes[: self.split]}
        s2 = {round(b - a, 9) for a, b in self.axes[self.split :]}
        if len(s1) > 1 or len(s2) > 1:
            raise ValueError("factor sides must be equal (cube factors)")

    @property
    def sides(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in self.axes)

    @property
    def measure_cells(self) -> float:
        out = 1.0
        for a, b in self.axes:
            out *= b - a
        return out

    def measure(self, grid: GridSpec) -> float:
        return self.measure_cells * grid.cell_volume

    def is_cell_aligned(self) -> bool:
        return all(
            abs(a - round(a)) < 1e-9 and abs(b - round(b)) < 1e-9 for a, b in self.axes
        )

    def axis_indices(self, grid: GridSpec, axis: int) -> np.ndarray:
        """Integer cell indices covered along one axis (mod N)."""
        a, b = self.axes[axis]
        n = grid.cells_per_axis
        return np.arange(int(round(a)), int(round(b))) % n

    def contains(self, other: "Rectangle", n_cells: int) -> bool:
        """Torus-arc containment of another rectangle, axis by axis."""
        for (a1, b1), (a2, b2) in zip(other.axes, self.axes):
            if b2 - a2 >= n_cells - 1e-9:
                continue  # full circle contains every arc
            t = (a1 - a2) % n_cells
            if t + (b1 - a1) > (b2 - a2) + 1e-9:
                return False
        return True

    def canonical_key(self, n_cells: int) -> tuple:
        return (
            tuple((round(a % n_cells, 9), round(b - a, 9)) for a, b in self.axes),
            self.split,
        )

    def to_json(self) -> str:
        return json.dumps({"axes": [[a, b] for a, b in self.axes], "split": self.split})

    @staticmethod
    def from_json(text: str) -> "Rectangle":
        obj = json.loads(text)
        return Rectangle(tuple((a, b) for a, b in obj["axes"]), int(obj["split"]))


def full_torus_rectangle(grid: GridSpec) -> Rectangle:
    n = grid.cells_per_axis
    return Rectangle(tuple((0, n) for _ in range(grid.n_axes)), grid.dims[0])


def children(rect: Rectangle, grid: GridSpec, i: tuple[int, int]) -> list[Rectangle]:
    """The 2**(n*i1) * 2**(m*i2) sub-rectangles of the (i1, i2)-fold split.

    Requires cell-aligned input; raises ResolutionExceededError if a factor
    side cannot be halved i_f times without descending below one cell.
    """
    i1, i2 = i
    if i1 < 0 or i2 < 0:
        raise ValueError("split indices must be nonnegative")
    if not rect.is_cell_aligned():
        raise ValueError("children require a cell-aligned rectangle")
    n, m = grid.dims
    steps = [i1] * n + [i2] * m
    per_axis: list[list[tuple[float, float]]] = []
    for (a, b), k in zip(rect.axes, steps):
        side = b - a
        parts = 2**k
        child = side / parts
        if child < 1 - 1e-9:
            raise ResolutionExceededError(
                f"side {side} cells cannot be split {parts}-fold above cell level"
            )
        if abs(child - round(child)) > 1e-9:
            raise ValueError(f"side {side} is not divisible into {parts} aligned parts")
        child = round(child)
        per_axis.append([(a + j * child, a + (j + 1) * child) for j in range(parts)])
    return [
        Rectangle(tuple(combo), rect.split) for combo in itertools.product(*per_axis)
    ]


@dataclass(frozen=True)
class GridShift:
    """Per-axis rigid translation of the base grid, in whole cells."""

    offsets: tuple[int, ...]
    snap: tuple[float, ...]  # |s*N - offset| per axis, cells

    @property
    def is_base(self) -> bool:
        return all(o == 0 for o in self.offsets)


@dataclass(frozen=True)
class ShiftedGridFamily:
    """The 3**(n+m) product dyadic grids of the 1/3 trick."""

    grid: GridSpec
    shifts: tuple[GridShift, ...]

    def __len__(self) -> int:
        return len(self.shifts)

    def index_of(self, offsets: tuple[int, ...]) -> int:
        for k, sh in enumerate(self.shifts):
            if sh.offsets == offsets:
                return k
        raise KeyError(offsets)


def shifted_family(grid: GridSpec) -> ShiftedGridFamily:
    """All per-axis combinations of absolute shifts {0, 1/3, 2/3} (snapped)."""
    n_cells = grid.cells_per_axis
    axis_opts = []
    for frac in (0.0, 1.0 / 3.0, 2.0 / 3.0):
        target = frac * n_cells
        off = int(np.floor(target + 0.5))
        axis_opts.append((off, abs(target - off)))
    combos = itertools.product(axis_opts, repeat=grid.n_axes)
    shifts = tuple(
        GridShift(tuple(c[0] for c in combo), tuple(c[1] for c in combo))
        for combo in combos
    )
    return ShiftedGridFamily(grid, shifts)


def dyadic_rectangles(
    grid: GridSpec, shift: GridShift | None = None
) -> list[Rectangle]:
    """All product-dyadic rectangles of one (possibly shifted) grid."""
    n_cells = grid.cells_per_axis
    n, m = grid.dims
    offs = shift.offsets if shift is not None else (0,) * grid.n_axes
    factor_rects: list[list[tuple[tuple[float, float], ...]]] = []
    for factor, count in ((1, n), (2, m)):
        axes = list(grid.axes_of_factor(factor))
        opts: list[tuple[tuple[float, float], ...]] = []
        if count == 0:
            opts.append(())
        else:
            for lev in range(grid.depth + 1):
                side = 2**lev
                positions = [
                    [
                        ((offs[ax] + j * side) % n_cells, (offs[ax] + j * side) % n_cells + side)
                        for j in range(n_cells // side)
                    ]
                    for ax in axes
                ]
                opts.extend(tuple(c) for c in itertools.product(*positions))
        factor_rects.append(opts)
    return [
        Rectangle(f1 + f2, n) for f1, f2 in itertools.product(*factor_rects)
    ]


def sampled_rectangles(grid: GridSpec, count: int, seed: int) -> list[Rectangle]:
    """Seeded cell-aligned rectangles of arbitrary eccentricity (may wrap)."""
    rng = np.random.default_rng(seed)
    n_cells = grid.cells_per_axis
    n, m = grid.dims
    out = []
    for _ in range(count):
        axes: list[tuple[float, float]] = []
        for count_f in (n, m):
            if count_f == 0:
                continue
            side = int(2 ** (rng.uniform(0.0, grid.depth)))
            side = max(1, min(side, n_cells))
            for _ax in range(count_f):
                a = int(rng.integers(0, n_cells))
                axes.append((a, a + side))
        out.append(Rectangle(tuple(axes), n))
    return out


@dataclass(frozen=True)
class RectangleFamily:
    """A finite rectangle family standing in for a supremum over rectangles."""

    grid: GridSpec
    mode: str  # dyadic | shifted | sampled
    shifts: tuple[GridShift, ...]
    extras: tuple[Rectangle, ...] = field(default=())

    def describe(self) -> str:
        tag = self.mode
        if self.extras:
            tag += f"+{len(self.extras)}"
        return f"{tag}@L{self.grid.depth}"

    def rectangles(self) -> list[Rectangle]:
        seen = {}
        for shift in self.shifts:
            for rect in dyadic_rectangles(self.grid, shift):
                seen.setdefault(rect.canonical_key(self.grid.cells_per_axis), rect)
        for rect in self.extras:
            seen.setdefault(rect.canonical_key(self.grid.cells_per_axis), rect)
        return list(seen.values())


def make_family(
    grid: GridSpec, mode: str = "dyadic", sampled: int = 0, seed: int = 0
) -> RectangleFamily:
    if mode == "dyadic":
        return RectangleFamily(grid, "dyadic", (shifted_family(grid).shifts[0],))
    if mode == "shifted":
        return RectangleFamily(grid, "shifted", shifted_family(grid).shifts)
    if mode == "sampled":
        return RectangleFamily(
            grid,
            "sampled",
            shifted_family(grid).shifts,
            tuple(sampled_rectangles(grid, sampled, seed)),
        )
    raise ValueError(f"unknown family mode {mode!r}")


def rectangle_family(
    grid: GridSpec, mode: str = "dyadic", sampled: int = 0, seed: int = 0
) -> list[Rectangle]:
    """Materialized rectangle list for the requested family mode."""
    return make_family(grid, mode, sampled, seed).rectangles()


def _axis_fit_level(a: float, b: float, offset: int, grid: GridSpec) -> int | None:
    """Smallest dyadic level at which the arc [a, b) fits in one shifted
    interval; the level-L interval is the full circle and fits everything."""
    n_cells = grid.cells_per_axis
    side = b - a
    for lev in range(grid.depth + 1):
        width = 2**lev
        if width < side - 1e-12:
            continue
        if width >= n_cells:
            return lev
        t = (a - offset) % width
        if t + side <= width + 1e-12:
            return lev
    return None


def cover(rect: Rectangle, family: ShiftedGridFamily) -> tuple[int, Rectangle]:
    """Shifted-dyadic rectangle S containing rect with per-axis side <= 6x.

    Success is guaranteed when every side of rect is at least one cell and at
    most one sixth of the torus period; rectangles already belonging to a
    family grid are returned as they are regardless of size.  Returns
    (grid index in the family, S).
    """
    grid = family.grid
    n_cells = grid.cells_per_axis
    for a, b in rect.axes:
        if b - a < 1.0 - 1e-12:
            raise TooLargeError("sides below one cell are not coverable at cell scale")

    axis_offsets = sorted({sh.offsets[0] for sh in family.shifts})
    chosen_offset: list[int] = []
    chosen_level: list[int] = []
    n, m = grid.dims
    for factor, axes in ((1, range(0, n)), (2, range(n, n + m))):
        if not axes:
            continue
        per_axis = []
        for ax in axes:
            a, b = rect.axes[ax]
            best = None
            for off in axis_offsets:
                lev = _axis_fit_level(a, b, off, grid)
                if lev is not None and (best is None or lev < best[0]):
                    best = (lev, off)
            if best is None:
                raise TooLargeError(f"axis {ax}: no shifted dyadic interval contains it")
            per_axis.append(best)
        lev_f = max(lev for lev, _ in per_axis)
        for (lev, off) in per_axis:
            chosen_offset.append(off)
            chosen_level.append(lev_f)

    axes_out = []
    for ax, (off, lev) in enumerate(zip(chosen_offset, chosen_level)):
        a, b = rect.axes[ax]
        width = 2**lev
        if width >= n_cells:
            lo_mod = off % n_cells
        else:
            t = (a - off) % width
            lo_mod = (a - t) % n_cells
        axes_out.append((float(lo_mod), float(lo_mod + width)))
    s_rect = Rectangle(tuple(axes_out), rect.split)
    idx = family.index_of(tuple(chosen_offset))
    if not s_rect.contains(rect, n_cells):
        raise AssertionError("covering rectangle does not contain the input")
    worst = max(
        (sb - sa) / (b - a) for (sa, sb), (a, b) in zip(s_rect.axes, rect.axes)
    )
    if worst > 6.0 + 1e-9:
        raise TooLargeError(
            f"no shifted-dyadic cover within ratio 6 (best ratio {worst:.3g}); "
            f"guaranteed only for sides <= {n_cells}/6 cells"
        )
    return idx, s_rect
