"""Reducing operators of matrix weights over cell regions.

A reducing operator of W over E with respect to exponent p is a single
positive-definite matrix M whose induced norm is equivalent to the L^p
average norm rho(e) = (avg_E |W(x)^{1/p} e|^p)^{1/p}:

    rho(e) <= |M e| <= sqrt(d) * rho(e)    for all directions e.

Three modes are provided:

* ``exact_p2``: M = (avg_E W)^{1/2}; for p = 2 the left inequality is an
  identity.
* ``proxy``: M = avg_E W^{1/p}; cheap, not guaranteed to satisfy the sqrt(d)
  sandwich (it is comparable up to a bracket-constant power), residual
  measured and recorded.
* ``john``: M is the maximal-volume ellipsoid inscribed in {rho <= 1},
  computed by cutting-plane constraint generation with an SLSQP subproblem
  solver on Cholesky factors, then certified on a direction net that shares
  no samples with the optimizer.

Regions are rectangles, boolean cell masks, or flat cell-index arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import EmptyRegionError, WrongExponentError
from .grid import GridSpec, Rectangle
from .kernels import pair_norm_mean
from .linalg import hermitian_power, sphere_directions
from .weights import WeightField

JOHN_TOL = 1e-6
_CERT_SEED = 20_250_101  # certification stream, disjoint from the optimizer's
_WORK_SEED = 977


def region_indices(grid: GridSpec, region) -> np.ndarray:
    """Flat cell indices of a region (Rectangle, boolean mask, or index array)."""
    if isinstance(region, Rectangle):
        if not region.is_cell_aligned():
            raise ValueError("region rectangle must be cell aligned")
        axes_idx = [region.axis_indices(grid, ax) for ax in range(grid.n_axes)]
        mesh = np.meshgrid(*axes_idx, indexing="ij")
        flat = np.ravel_multi_index([m.ravel() for m in mesh], grid.shape)
        return flat
    region = np.asarray(region)
    if region.dtype == bool:
        if region.shape != grid.shape:
            raise ValueError("mask shape does not match grid")
        return np.flatnonzero(region.ravel())
    return region.astype(int).ravel()


def _stack(w: WeightField, region, exponent: float) -> np.ndarray:
    idx = region_indices(w.grid, region)
    if idx.size == 0:
        raise EmptyRegionError("region contains no cells")
    return w.power(exponent).reshape(w.grid.n_cells, w.d, w.d)[idx]


def rho_many(wp_stack: np.ndarray, p: float, dirs: np.ndarray) -> np.ndarray:
    """L^p average norms (avg_cells |W^{1/p} e|^p)^{1/p} for directions (k, d)."""
    v = np.einsum("cij,kj->cki", wp_stack, dirs)
    norms = np.sqrt(np.sum(v * v, axis=-1))  # (cells, k)
    m = np.max(norms, axis=0)
    safe = np.where(m > 0.0, m, 1.0)
    out = safe * np.mean((norms / safe) ** p, axis=0) ** (1.0 / p)
    return out


def rho(w: WeightField, region, p: float, e) -> float:
    """The L^p average norm of one direction over a region."""
    e = np.asarray(e, dtype=float).ravel()
    if np.linalg.norm(e) == 0.0:
        raise ValueError("direction must be nonzero")
    return float(rho_many(_stack(w, region, 1.0 / p), p, e[None])[0])


@dataclass
class ReducingOp:
    matrix: np.ndarray
    mode: str
    p: float
    residual_left: float  # max over tested e of rho(e) / |M e|
    residual_right: float  # max over tested e of |M e| / (sqrt(d) rho(e))
    converged: bool = True
    context: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def residual(self) -> float:
        return max(self.residual_left, self.residual_right)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    def inv(self) -> np.ndarray:
        return hermitian_power(self.matrix, -1.0)


def _certification_net(d: int, extra_dirs=None) -> np.ndarray:
    base = 2000 if d <= 3 else (10_000 if d == 4 else 20_000)
    net = sphere_directions(d, base)
    rnd = sphere_directions(d, 1000, seed=_CERT_SEED)
    parts = [net, rnd]
    if extra_dirs is not None and len(extra_dirs):
        e = np.asarray(extra_dirs, dtype=float)
        e = e / np.linalg.norm(e, axis=1, keepdims=True)
        parts.append(e)
    return np.vstack(parts)


def _measure_residuals(matrix: np.ndarray, wp_stack: np.ndarray, p: float):
    d = matrix.shape[0]
    eig_dirs = np.linalg.eigh(matrix)[1].T
    dirs = _certification_net(d, eig_dirs)
    rhos = rho_many(wp_stack, p, dirs)
    mes = np.linalg.norm(dirs @ matrix.T, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        left = np.where(mes > 0, rhos / mes, np.inf)
        right = np.where(rhos > 0, mes / (np.sqrt(d) * rhos), np.inf)
    return float(np.max(left)), float(np.max(right))


def _context(w: WeightField, region, p: float) -> dict:
    if isinstance(region, Rectangle):
        desc = region.to_json()
    elif isinstance(region, str):
        desc = region
    else:
        desc = f"mask[{region_indices(w.grid, region).size} cells]"
    return {"field": w.fingerprint(), "region": desc, "p": float(p)}


def reducing_exact_p2(w: WeightField, region) -> ReducingOp:
    """p = 2 closed form: the square root of the cell average of W."""
    stack = _stack(w, region, 1.0)
    matrix = hermitian_power(np.mean(stack, axis=0), 0.5)
    wp = _stack(w, region, 0.5)
    left, right = _measure_residuals(matrix, wp, 2.0)
    return ReducingOp(matrix, "exact_p2", 2.0, left, right, True, _context(w, region, 2.0))


def reducing_proxy(w: WeightField, region, p: float) -> ReducingOp:
    """Cell average of W^{1/p}; comparable to a true reducing operator only
    up to a bracket-constant power, so the measured residual may exceed the
    sqrt(d) sandwich."""
    if not 1.0 < p < np.inf:
        raise WrongExponentError("need 1 < p < inf")
    wp = _stack(w, region, 1.0 / p)
    matrix = np.mean(wp, axis=0)
    left, right = _measure_residuals(matrix, wp, p)
    op = ReducingOp(matrix, "proxy", p, left, right, True, _context(w, region, p))
    if w.d == 1:
        scalar = float(np.mean(_stack(w, region, 1.0)[:, 0, 0]) ** (1.0 / p))
        op.extra["scalar_convention"] = scalar
    return op


def _phi_and_grad(b_stack: np.ndarray, v: np.ndarray, p: float):
    """phi(v) = (mean_c |B_c v|^p)^{1/p} and its gradient in v."""
    bv = b_stack @ v
    norms = np.linalg.norm(bv, axis=1)
    m = float(np.max(norms))
    if m == 0.0:
        return 0.0, np.zeros_like(v)
    mean_p = float(np.mean((norms / m) ** p))
    phi = m * mean_p ** (1.0 / p)
    # grad phi = phi^{1-p} * mean_c |B_c v|^{p-2} B_c^T B_c v, scaled stably
    scaled = np.where(norms > 0, (norms / m) ** (p - 2.0), 0.0)
    mean_vec = np.einsum("c,cji,cj->i", scaled, b_stack, bv) / len(norms)
    grad = (phi / m) ** (1.0 - p) / m * mean_vec
    return phi, grad


def _worst_direction(b_stack: np.ndarray, p_mat: np.ndarray, p: float, starts: np.ndarray):
    """Maximize phi(P u) over the unit sphere by projected gradient ascent."""
    best_val, best_u = -np.inf, None
    for u0 in starts:
        u = u0 / np.linalg.norm(u0)
        val = None
        step = 0.5
        for _ in range(60):
            v = p_mat @ u
            phi, g_v = _phi_and_grad(b_stack, v, p)
            g_u = p_mat @ g_v
            g_tan = g_u - (g_u @ u) * u
            if val is not None and phi <= val + 1e-14:
                step *= 0.5
                if step < 1e-6:
                    break
            val = phi
            norm_g = np.linalg.norm(g_tan)
            if norm_g < 1e-14:
                break
            u_new = u + step * g_tan / norm_g
            u = u_new / np.linalg.norm(u_new)
        phi, _ = _phi_and_grad(b_stack, p_mat @ u, p)
        if phi > best_val:
            best_val, best_u = phi, u
    return best_val, best_u


def _solve_subproblem(b_stack: np.ndarray, dirs: np.ndarray, p: float, l0: np.ndarray):
    """max log det P subject to phi(P u_i) <= 1 over SPD P = L L^T."""
    d = b_stack.shape[1]
    rows, cols = np.tril_indices(d)

    def unpack(x):
        l_mat = np.zeros((d, d))
        l_mat[rows, cols] = x
        return l_mat

    def fun(x):
        diag = np.abs(x[np.flatnonzero(rows == cols)])
        return -2.0 * float(np.sum(np.log(np.maximum(diag, 1e-300))))

    def jac(x):
        l_mat = unpack(x)
        g = np.zeros((d, d))
        di = np.diag_indices(d)
        dv = l_mat[di]
        dv = np.where(np.abs(dv) < 1e-150, np.where(dv < 0, -1e-150, 1e-150), dv)
        g[di] = -2.0 / dv
        return g[rows, cols]

    def cons_fun(x):
        l_mat = unpack(x)
        p_mat = l_mat @ l_mat.T
        return np.array(
            [1.0 - _phi_and_grad(b_stack, p_mat @ u, p)[0] for u in dirs]
        )

    def cons_jac(x):
        l_mat = unpack(x)
        p_mat = l_mat @ l_mat.T
        out = np.zeros((len(dirs), len(x)))
        for k, u in enumerate(dirs):
            _, g_v = _phi_and_grad(b_stack, p_mat @ u, p)
            lu = l_mat.T @ u
            lg = l_mat.T @ g_v
            g_l = np.outer(g_v, lu) + np.outer(u, lg)
            out[k] = -g_l[rows, cols]
        return out

    res = minimize(
        fun,
        l0[rows, cols],
        jac=jac,
        method="SLSQP",
        constraints=[{"type": "ineq", "fun": cons_fun, "jac": cons_jac}],
        options={"maxiter": 300, "ftol": 1e-14},
    )
    l_mat = unpack(res.x)
    # enforce positive diagonal (sign of L is irrelevant to P)
    return l_mat, bool(res.success)


def reducing_john(
    w: WeightField,
    region,
    p: float,
    max_rounds: int = 500,
    tol: float = JOHN_TOL,
) -> ReducingOp:
    """John-ellipsoid reducing operator: M minimizing log det M subject to
    sup_{|u|=1} rho(M^{-1} u) <= 1, certified a posteriori on a net."""
    if not 1.0 < p < np.inf:
        raise WrongExponentError("need 1 < p < inf")
    d = w.d
    wp = _stack(w, region, 1.0 / p)
    context = _context(w, region, p)
    if d == 1:
        val = float(np.mean(wp[:, 0, 0] ** p) ** (1.0 / p))
        matrix = np.array([[val]])
        left, right = _measure_residuals(matrix, wp, p)
        return ReducingOp(matrix, "john", p, left, right, True, context)

    # normalize by the proxy guess so the subproblem starts near the identity
    guess = np.mean(wp, axis=0)
    c_half_inv = hermitian_power(guess, -0.5)
    b_stack = wp @ c_half_inv  # phi_b(v) = rho(C^{-1/2} v)

    rng = np.random.default_rng(_WORK_SEED)
    work = [np.eye(d)[k] for k in range(d)]
    work += list(sphere_directions(d, 8 * d, seed=_WORK_SEED + 1))
    dirs = np.array(work)

    # feasible start: P = s*I with s = 1/sup phi(u)
    sup0, _ = _worst_direction(b_stack, np.eye(d), p, sphere_directions(d, 4 * d, seed=_WORK_SEED + 2))
    l_mat = np.eye(d) / max(np.sqrt(sup0), 1e-150)

    converged = False
    iterations = 0
    for round_no in range(max_rounds):
        iterations = round_no + 1
        l_mat, _ok = _solve_subproblem(b_stack, dirs, p, l_mat)
        p_mat = l_mat @ l_mat.T
        starts = np.vstack(
            [
                np.linalg.eigh(p_mat)[1].T,
                dirs[np.argsort([-_phi_and_grad(b_stack, p_mat @ u, p)[0] for u in dirs])[:2]],
                sphere_directions(d, 4 * d, seed=_WORK_SEED + 3 + round_no),
            ]
        )
        worst_val, worst_u = _worst_direction(b_stack, p_mat, p, starts)
        if worst_val <= 1.0 + 1e-9:
            converged = True
            break
        dirs = np.vstack([dirs, worst_u[None]])
        # mild pullback keeps the iterate feasible for the enlarged set
        l_mat = l_mat / np.sqrt(worst_val)

    p_mat = l_mat @ l_mat.T
    # the inscribed ellipsoid is the image of the unit ball under C^{-1/2} P;
    # the SPD matrix with {|Me| <= 1} equal to that image is (A A^T)^{-1/2}
    a_mat = c_half_inv @ p_mat
    matrix = hermitian_power(a_mat @ a_mat.T, -0.5)
    left, right = _measure_residuals(matrix, wp, p)
    if max(left, right) > 1.0 + tol:
        converged = False
    op = ReducingOp(
        matrix, "john", p, left, right, converged, context, {"rounds": iterations}
    )
    return op


def reduce_with_mode(w: WeightField, region, p: float, mode: str = "john") -> ReducingOp:
    """Dispatch on reducing mode; mode="auto" takes the exact p=2 form when
    available and the John ellipsoid otherwise."""
    if mode == "auto":
        mode = "exact_p2" if p == 2.0 else "john"
    if mode == "exact_p2":
        if p != 2.0:
            raise WrongExponentError("exact_p2 mode requires p = 2")
        return reducing_exact_p2(w, region)
    if mode == "proxy":
        return reducing_proxy(w, region, p)
    if mode == "john":
        return reducing_john(w, region, p)
    raise ValueError(f"unknown reducing mode {mode!r}")


def _stack_reduce(stack: np.ndarray, p: float, mode: str) -> np.ndarray:
    """Reducing matrix for a bare stack of PD cell matrices (raw W values)."""
    n = stack.shape[0]
    # wrap the stack in a throwaway one-axis field of matching cell count
    depth = max(1, int(np.ceil(np.log2(max(n, 2)))))
    g = GridSpec((1, 0), depth)
    vals = np.zeros(g.shape + stack.shape[1:])
    vals[:n] = stack
    vals[n:] = np.eye(stack.shape[1])
    f = WeightField(g, vals, "weight")
    idx = np.arange(n)
    return reduce_with_mode(f, idx, p, mode).matrix


def iterated_reducing(
    w: WeightField,
    region,
    p: float,
    mode: str = "auto",
    order: str = "factor2_inner",
) -> ReducingOp:
    """Iterate reducing operators over a product region E x F.

    With the default order, the second factor is reduced first: per slice
    coordinate x1 in E the reducing operator over F gives W_F(x1) = M^p, and
    the resulting field on the first factor is reduced over E.
    """
    grid = w.grid
    n, m = grid.dims
    if m == 0:
        raise ValueError("iterated reduction needs a biparameter field")
    if isinstance(region, Rectangle):
        idx1 = [region.axis_indices(grid, ax) for ax in grid.axes_of_factor(1)]
        idx2 = [region.axis_indices(grid, ax) for ax in grid.axes_of_factor(2)]
    else:
        idx1, idx2 = region  # per-factor lists of axis index arrays
        idx1 = [np.asarray(ix) for ix in idx1]
        idx2 = [np.asarray(ix) for ix in idx2]
    inner_first = order == "factor2_inner"
    outer_idx, inner_idx = (idx1, idx2) if inner_first else (idx2, idx1)
    outer_axes = list(grid.axes_of_factor(1 if inner_first else 2))

    import itertools as it

    vals = w.values
    outer_points = list(it.product(*[list(ix) for ix in outer_idx]))
    inner_mesh = np.meshgrid(*inner_idx, indexing="ij") if inner_idx else []
    slabs = []
    for pt in outer_points:
        index: list = [slice(None)] * grid.n_axes
        for ax, c in zip(outer_axes, pt):
            index[ax] = int(c)
        sub = vals[tuple(index)]
        if inner_mesh:
            gathered = sub[tuple(mesh.ravel() for mesh in inner_mesh)]
        else:
            gathered = sub.reshape((-1,) + sub.shape[-2:])
        m_slice = _stack_reduce(gathered, p, mode)
        slabs.append(hermitian_power(m_slice, p))
    outer_field = np.stack(slabs)
    matrix = _stack_reduce(outer_field, p, mode)
    wp = _stack(w, region if isinstance(region, Rectangle) else _product_mask(grid, idx1, idx2), 1.0 / p)
    left, right = _measure_residuals(matrix, wp, p)
    return ReducingOp(
        matrix,
        f"iterated_{mode}",
        p,
        left,
        right,
        True,
        _context(w, region if isinstance(region, Rectangle) else "product-mask", p),
        {"order": order},
    )


def _product_mask(grid: GridSpec, idx1, idx2) -> np.ndarray:
    mask_axes = idx1 + idx2
    mask = np.zeros(grid.shape, dtype=bool)
    mesh = np.meshgrid(*mask_axes, indexing="ij")
    mask[tuple(mesh)] = True
    return mask


@dataclass
class InversePrimeComparison:
    slack_left: float  # max |M^{-1} e| / |M' e|; <= 1 up to certification residuals
    slack_right: float  # max |M' e| / (C_E^{1/p} |M^{-1} e|)
    c_e: float  # the double-average bracket constant of the region
    op: ReducingOp
    op_prime: ReducingOp


def bracket_constant(w: WeightField, region, p: float) -> float:
    """C_E = avg_x ( avg_y |W(x)^{1/p} W(y)^{-1/p}|^{p'} )^{p/p'} over the region."""
    pp = p / (p - 1.0)
    wp = _stack(w, region, 1.0 / p)
    wm = _stack(w, region, -1.0 / p)
    return pair_norm_mean(wp, wm, q=pp, r=p / pp)


def compare_inverse_prime(
    w: WeightField, region, p: float, mode: str = "auto"
) -> InversePrimeComparison:
    """Measure both inequalities relating the inverse reducing operator of W
    to the reducing operator of the dual weight."""
    from .weights import dual_weight

    pp = p / (p - 1.0)
    op = reduce_with_mode(w, region, p, mode)
    op_prime = reduce_with_mode(dual_weight(w, p), region, pp, mode)
    d = w.d
    dirs = _certification_net(d)
    m_inv = op.inv()
    lhs = np.linalg.norm(dirs @ m_inv.T, axis=1)
    rhs = np.linalg.norm(dirs @ op_prime.matrix.T, axis=1)
    c_e = bracket_constant(w, region, p)
    slack_left = float(np.max(lhs / rhs))
    slack_right = float(np.max(rhs / (c_e ** (1.0 / p) * lhs)))
    return InversePrimeComparison(slack_left, slack_right, c_e, op, op_prime)
