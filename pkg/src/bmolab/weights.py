"""Sampled matrix-weight fields and symbols on product grids, plus file I/O.

Fields are piecewise constant on cells, so every average in the norm
definitions is an exact finite sum.  A field of kind ``weight`` holds one
positive-definite symmetric d x d matrix per cell (eigenvalues clamped below
by ``eig_floor`` at construction, clamp count recorded); a field of kind
``symbol`` holds arbitrary finite matrices.

WFLD file format: one UTF-8 JSON manifest line, a newline, then the cell
values as row-major little-endian float64, cell-major then entry-major.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError
from .grid import GridSpec
from .linalg import EIG_FLOOR, hermitian_power_batch

WFLD_DTYPE = "<f8"


@dataclass
class WeightField:
    grid: GridSpec
    values: np.ndarray  # shape grid.shape + (d, d)
    kind: str  # "weight" | "symbol"
    meta: dict = field(default_factory=dict)
    _powers: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        expected = self.grid.shape + (self.d, self.d)
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field has non-finite entries")
        if self.kind == "weight":
            sym = 0.5 * (self.values + np.swapaxes(self.values, -1, -2))
            lam, q = np.linalg.eigh(sym)
            floor = self.meta.get("eig_floor", EIG_FLOOR)
            n_clamped = int(np.sum(lam < floor))
            if n_clamped:
                lam = np.maximum(lam, floor)
                sym = np.einsum("...ik,...k,...jk->...ij", q, lam, q)
                self.meta["clamped_eigenvalues"] = n_clamped
            self.values = sym
        self.values.setflags(write=False)

    @property
    def d(self) -> int:
        return self.values.shape[-1]

    def flat(self) -> np.ndarray:
        """View of shape (n_cells, d, d) in C cell order."""
        return self.values.reshape(self.grid.n_cells, self.d, self.d)

    def power(self, s: float) -> np.ndarray:
        """Cellwise Hermitian power (weight kind only), cached per exponent."""
        if self.kind != "weight":
            raise ValueError("powers are defined for weight-kind fields only")
        key = float(s)
        if key not in self._powers:
            if key == 1.0:
                self._powers[key] = self.values
            else:
                out = hermitian_power_batch(
                    self.values, key, self.meta.get("eig_floor", EIG_FLOOR)
                )
                out.setflags(write=False)
                self._powers[key] = out
        return self._powers[key]

    def manifest(self) -> dict:
        return {
            "dims": list(self.grid.dims),
            "L": self.grid.depth,
            "d": self.d,
            "kind": self.kind,
            "generator": self.meta.get("generator", {}),
            "endianness": WFLD_DTYPE,
        }

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(self.manifest(), sort_keys=True).encode())
        h.update(np.ascontiguousarray(self.values, dtype=WFLD_DTYPE).tobytes())
        return h.hexdigest()[:16]


def constant_field(grid: GridSpec, matrix, kind: str = "weight") -> WeightField:
    m = np.asarray(matrix, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    vals = np.broadcast_to(m, grid.shape + m.shape).copy()
    return WeightField(grid, vals, kind, {"generator": {"kind": "constant"}})


def _torus_dist(x: np.ndarray) -> np.ndarray:
    return np.minimum(x, 1.0 - x)


def gen_power_weight(
    grid: GridSpec, alpha, p: float, eig_floor: float = EIG_FLOOR
) -> WeightField:
    """Scalar weight prod_axis dist(x_axis, 0)**alpha_axis on the torus.

    Membership in A_p on each axis needs -1 < alpha < p - 1; out-of-range
    exponents still produce a field but flag it non-A_p in the manifest.
    """
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (grid.n_axes,))
    vals = np.ones(grid.shape)
    for ax in range(grid.n_axes):
        profile = _torus_dist(grid.cell_centers(ax)) ** alpha[ax]
        shape = [1] * grid.n_axes
        shape[ax] = grid.cells_per_axis
        vals = vals * profile.reshape(shape)
    vals = np.maximum(vals, eig_floor)
    ap_valid = bool(np.all((-1.0 < alpha) & (alpha < p - 1.0)))
    meta = {
        "generator": {"kind": "power", "alpha": alpha.tolist(), "p": p},
        "ap_valid": ap_valid,
        "eig_floor": eig_floor,
    }
    return WeightField(grid, vals[..., None, None].copy(), "weight", meta)


def winding_theta(grid: GridSpec, windings) -> np.ndarray:
    """Angle field theta(x) = 2*pi * sum_axis k_axis * x_axis (smooth on torus)."""
    windings = np.broadcast_to(np.asarray(windings, dtype=float), (grid.n_axes,))
    theta = np.zeros(grid.shape)
    for ax in range(grid.n_axes):
        shape = [1] * grid.n_axes
        shape[ax] = grid.cells_per_axis
        theta = theta + 2.0 * np.pi * windings[ax] * grid.cell_centers(ax).reshape(shape)
    return theta


def gen_rotating_weight(
    grid: GridSpec, lam, theta, eig_floor: float = EIG_FLOOR
) -> WeightField:
    """d=2 weight Q(theta(x)) diag(lam1(x), lam2(x)) Q(theta(x))^T per cell.

    ``lam`` is a pair of scalars or an array of shape grid.shape + (2,);
    ``theta`` is a scalar or an array of shape grid.shape.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape == (2,):
        lam = np.broadcast_to(lam, grid.shape + (2,))
    theta = np.broadcast_to(np.asarray(theta, dtype=float), grid.shape)
    c, s = np.cos(theta), np.sin(theta)
    q = np.empty(grid.shape + (2, 2))
    q[..., 0, 0], q[..., 0, 1] = c, -s
    q[..., 1, 0], q[..., 1, 1] = s, c
    vals = np.einsum("...ik,...k,...jk->...ij", q, np.maximum(lam, eig_floor), q)
    meta = {"generator": {"kind": "rotating"}, "eig_floor": eig_floor}
    return WeightField(grid, vals, "weight", meta)


def gen_random_pd_weight(
    grid: GridSpec, d: int, seed: int, log_cond: float = 1.5, windings_scale: int = 1
) -> WeightField:
    """Seeded smooth non-commuting PD field of any small dimension.

    Eigenvalues follow smooth log-profiles with spread exp(log_cond); the
    eigenframe rotates through composed Givens rotations with integer torus
    windings, so cells genuinely fail to commute for d >= 2.
    """
    rng = np.random.default_rng(seed)
    n_axes = grid.n_axes
    lam = np.ones(grid.shape + (d,))
    for k in range(d):
        level = rng.uniform(-log_cond / 2.0, log_cond / 2.0)
        phase = winding_theta(grid, rng.integers(0, windings_scale + 1, size=n_axes))
        lam[..., k] = np.exp(level + (log_cond / 2.0) * np.cos(phase + rng.uniform(0, 2 * np.pi)))
    frame = np.broadcast_to(np.eye(d), grid.shape + (d, d)).copy()
    for i in range(d):
        for j in range(i + 1, d):
            theta = winding_theta(
                grid, rng.integers(0, windings_scale + 1, size=n_axes)
            ) + rng.uniform(0, 2 * np.pi)
            c, s = np.cos(theta), np.sin(theta)
            giv = np.broadcast_to(np.eye(d), grid.shape + (d, d)).copy()
            giv[..., i, i], giv[..., j, j] = c, c
            giv[..., i, j], giv[..., j, i] = -s, s
            frame = frame @ giv
    vals = np.einsum("...ik,...k,...jk->...ij", frame, lam, frame)
    meta = {"generator": {"kind": "random_pd", "d": d, "seed": int(seed)}}
    return WeightField(grid, vals, "weight", meta)


def gen_checkerboard_symbol(grid: GridSpec, d: int = 1, block: int = 1) -> WeightField:
    """+-1 checkerboard symbol (times identity for d > 1), block cells wide."""
    parity = np.zeros(grid.shape)
    for ax in range(grid.n_axes):
        idx = np.arange(grid.cells_per_axis) // block
        shape = [1] * grid.n_axes
        shape[ax] = grid.cells_per_axis
        parity = parity + idx.reshape(shape)
    signs = np.where(parity % 2 == 0, 1.0, -1.0)
    vals = signs[..., None, None] * np.eye(d)
    meta = {"generator": {"kind": "checkerboard", "d": d, "block": block}}
    return WeightField(grid, vals, "symbol", meta)


def gen_fourier_symbol(
    grid: GridSpec,
    d: int,
    seed: int,
    n_modes: int = 3,
    amplitude: float = 1.0,
    active_axes: tuple[int, ...] | None = None,
) -> WeightField:
    """Seeded band-limited symbol: each entry a short random cosine series.

    ``active_axes`` restricts the variation to a subset of axes (e.g. a symbol
    depending on the first variable only).
    """
    rng = np.random.default_rng(seed)
    axes = tuple(range(grid.n_axes)) if active_axes is None else tuple(active_axes)
    vals = np.zeros(grid.shape + (d, d))
    for i in range(d):
        for j in range(d):
            entry = np.zeros(grid.shape)
            for _ in range(n_modes):
                windings = np.zeros(grid.n_axes)
                for ax in axes:
                    windings[ax] = rng.integers(0, 3)
                phase = rng.uniform(0, 2 * np.pi)
                coef = amplitude * rng.uniform(-1.0, 1.0)
                entry = entry + coef * np.cos(winding_theta(grid, windings) + phase)
            vals[..., i, j] = entry
    meta = {
        "generator": {
            "kind": "fourier_symbol",
            "d": d,
            "seed": int(seed),
            "n_modes": n_modes,
            "active_axes": list(axes),
        }
    }
    return WeightField(grid, vals, "symbol", meta)


def dual_weight(w: WeightField, p: float) -> WeightField:
    """Muckenhoupt dual weight W' = W**(-1/(p-1)) for exponent p."""
    if w.kind != "weight":
        raise ValueError("dual weight is defined for weight-kind fields")
    if not 1.0 < p < np.inf:
        raise ValueError("need 1 < p < inf")
    vals = hermitian_power_batch(w.values, -1.0 / (p - 1.0))
    meta = {"generator": {"kind": "dual", "p": p, "of": w.meta.get("generator", {})}}
    meta["eig_floor"] = w.meta.get("eig_floor", EIG_FLOOR)
    return WeightField(w.grid, vals, "weight", meta)


def slice_field(f: WeightField, factor: int, coord) -> WeightField:
    """Lower-dimensional field on the complementary factor, f_{x_i}.

    ``coord`` gives the fixed cell index (an int, or a tuple for factors with
    several axes).  The result lives on a one-parameter grid (dims (k, 0)).
    """
    n, m = f.grid.dims
    if factor not in (1, 2):
        raise ValueError("factor must be 1 or 2")
    if factor == 2 and m == 0:
        raise ValueError("field has no second factor")
    coords = (coord,) if np.isscalar(coord) else tuple(coord)
    n_fixed = n if factor == 1 else m
    if len(coords) != n_fixed:
        raise ValueError(f"factor {factor} needs {n_fixed} coordinates")
    for c in coords:
        if not 0 <= c < f.grid.cells_per_axis:
            raise IndexError(f"coordinate {c} outside grid")
    index: list = [slice(None)] * f.grid.n_axes
    axes = f.grid.axes_of_factor(factor)
    for ax, c in zip(axes, coords):
        index[ax] = int(c)
    remaining = (m, 0) if factor == 1 else (n, 0)
    sub = GridSpec(remaining, f.grid.depth)
    vals = np.ascontiguousarray(f.values[tuple(index)])
    meta = {"generator": {"kind": "slice", "factor": factor, "coord": list(coords)}}
    meta.update({k: v for k, v in f.meta.items() if k == "eig_floor"})
    return WeightField(sub, vals, f.kind, meta)


def save_wfld(path, f: WeightField) -> None:
    header = json.dumps(f.manifest(), sort_keys=True).encode("utf-8")
    payload = np.ascontiguousarray(f.values, dtype=WFLD_DTYPE).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(b"\n")
        fh.write(payload)


def load_wfld(path) -> WeightField:
    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.find(b"\n")
    if nl < 0:
        raise FormatError("missing manifest newline", len(raw))
    try:
        manifest = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise FormatError("manifest line is not valid JSON", 0)
    for key in ("dims", "L", "d", "kind", "endianness"):
        if key not in manifest:
            raise FormatError(f"manifest lacks field {key!r}", 0)
    if manifest["endianness"] != WFLD_DTYPE:
        raise FormatError(f"unsupported payload dtype {manifest['endianness']}", 0)
    grid = GridSpec(tuple(manifest["dims"]), manifest["L"])
    d = manifest["d"]
    shape = grid.shape + (d, d)
    expected = int(np.prod(shape)) * 8
    payload = raw[nl + 1 :]
    if len(payload) != expected:
        raise FormatError(
            f"payload has {len(payload)} bytes, expected {expected}", nl + 1 + len(payload)
        )
    vals = np.frombuffer(payload, dtype=WFLD_DTYPE).reshape(shape).astype(float)
    meta = {"generator": manifest.get("generator", {})}
    return WeightField(grid, vals, manifest["kind"], meta)


def gen_from_descriptor(grid: GridSpec, desc: dict) -> WeightField:
    """Build a field from a generator descriptor (campaign reproducibility)."""
    kind = desc.get("kind")
    if kind == "constant":
        return constant_field(grid, desc.get("matrix", [[1.0]]), desc.get("field_kind", "weight"))
    if kind == "power":
        return gen_power_weight(grid, desc["alpha"], desc.get("p", 2.0))
    if kind == "rotating":
        theta = winding_theta(grid, desc.get("windings", [1] * grid.n_axes))
        return gen_rotating_weight(grid, desc.get("lam", (1.0, 10.0)), theta)
    if kind == "random_pd":
        return gen_random_pd_weight(
            grid, desc.get("d", 2), desc["seed"], desc.get("log_cond", 1.5),
            desc.get("windings_scale", 1),
        )
    if kind == "checkerboard":
        return gen_checkerboard_symbol(grid, desc.get("d", 1), desc.get("block", 1))
    if kind == "fourier_symbol":
        return gen_fourier_symbol(
            grid,
            desc.get("d", 1),
            desc["seed"],
            desc.get("n_modes", 3),
            desc.get("amplitude", 1.0),
            tuple(desc["active_axes"]) if "active_axes" in desc else None,
        )
    raise ValueError(f"unknown generator kind {kind!r}")
