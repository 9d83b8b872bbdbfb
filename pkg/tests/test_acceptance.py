"""Acceptance suite: one test per criterion, pinned tolerances, one printed
pass line each.  Run with `pytest tests/test_acceptance.py -v -s`.

Corpora are seeded and resolution-consistent: every generator samples a fixed
continuum field, so refinement sweeps across depths compare like with like.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import pytest

from bmolab.ap import ap_dual_check, ap_dyadic, ap_local, ap_slices
from bmolab.bmo import (
    bmo1_norm,
    bmo2_norm,
    bmo_norm,
    bmo_tilde_norm,
    slice_sup_norms,
    transpose_symbol,
)
from bmolab.commutator import (
    CommutatorOp,
    TensorRiesz,
    VectorField,
    averaging_opnorm,
    riesz_apply,
    tensorization_decomposition,
    weighted_opnorm,
)
from bmolab.grid import (
    GridSpec,
    Rectangle,
    RectangleFamily,
    cover,
    full_torus_rectangle,
    make_family,
    sampled_rectangles,
    shifted_family,
)
from bmolab.kernels import power_mean
from bmolab.linalg import op_norm, op_norm_batch
from bmolab.reducing import (
    reduce_with_mode,
    reducing_exact_p2,
    reducing_john,
    region_indices,
    rho_many,
)
from bmolab.weights import (
    constant_field,
    dual_weight,
    gen_checkerboard_symbol,
    gen_fourier_symbol,
    gen_power_weight,
    gen_random_pd_weight,
    gen_rotating_weight,
    winding_theta,
)

P_SET = (1.5, 2.0, 3.0)


def _report(criterion: int, summary: str):
    print(f"\nACCEPTANCE {criterion}: PASS - {summary}")


# ---------------------------------------------------------------- corpora


@lru_cache(maxsize=None)
def sandwich_corpus():
    """(label, weight, region, p) triples for criteria 1 and 2."""
    g = GridSpec((1, 1), 3)
    regions = [
        full_torus_rectangle(g),
        Rectangle(((0, 4), (2, 6)), 1),
        None,  # placeholder for a random mask
    ]
    triples = []
    idx = 0
    for d in (1, 2, 3):
        for p in P_SET:
            for seed in range(6):
                if d == 1:
                    w = gen_power_weight(g, (0.3 + 0.1 * (seed % 3), -0.2), p)
                else:
                    w = gen_random_pd_weight(g, d, seed=100 * d + seed, log_cond=1.5)
                region = regions[idx % 3]
                if region is None:
                    rng = np.random.default_rng(500 + idx)
                    region = np.sort(rng.choice(g.n_cells, size=12, replace=False))
                triples.append((f"d{d}-p{p}-s{seed}", w, region, p))
                idx += 1
    return tuple(triples)


@lru_cache(maxsize=None)
def john_results():
    return tuple(
        (label, w, region, p, reducing_john(w, region, p))
        for label, w, region, p in sandwich_corpus()
    )


def _weight_pool(depth: int):
    g = GridSpec((1, 1), depth)
    return g, [
        gen_random_pd_weight(g, 2, seed=61, log_cond=1.0),
        gen_random_pd_weight(g, 2, seed=62, log_cond=1.2),
        gen_rotating_weight(g, (1.0, 5.0), winding_theta(g, (1, 1))),
        gen_random_pd_weight(g, 2, seed=63, log_cond=0.8),
        gen_rotating_weight(g, (0.5, 2.0), winding_theta(g, (0, 1))),
        gen_random_pd_weight(g, 2, seed=64, log_cond=1.0),
    ]


def _symbol_pool(depth: int):
    g = GridSpec((1, 1), depth)
    block = max(1, g.cells_per_axis // 8)  # fixed continuum period 1/4
    return [
        gen_fourier_symbol(g, 2, seed=71),
        gen_fourier_symbol(g, 2, seed=72),
        gen_checkerboard_symbol(g, d=2, block=block),
        gen_fourier_symbol(g, 2, seed=73, active_axes=(0,)),
        gen_fourier_symbol(g, 2, seed=74),
    ]


def _equivalence_corpus(depth: int, count: int = 30):
    """(label, b, u, v, p) elements, 10 per exponent."""
    g, weights = _weight_pool(depth)
    symbols = _symbol_pool(depth)
    corpus = []
    k = 0
    for p in P_SET:
        for i in range(count // len(P_SET)):
            b = symbols[k % len(symbols)]
            u = weights[k % len(weights)]
            v = weights[(k + 2) % len(weights)]
            corpus.append((f"e{k}-p{p}", b, u, v, p))
            k += 1
    return g, corpus


def _variant_values(b, u, v, p, family, mode="auto"):
    values = {
        "bmo": bmo_norm(b, u, v, p, family, mode)[0],
        "bmo_tilde": bmo_tilde_norm(b, u, v, p, family, mode)[0],
        "bmo1": bmo1_norm(b, u, v, p, family)[0],
        "bmo2": bmo2_norm(b, u, v, p, family)[0],
    }
    pp = p / (p - 1.0)
    b_adj, u_d, v_d = transpose_symbol(b), dual_weight(u, p), dual_weight(v, p)
    values["bmo_dual"] = bmo_norm(b_adj, v_d, u_d, pp, family, mode)[0]
    values["bmo_tilde_dual"] = bmo_tilde_norm(b_adj, v_d, u_d, pp, family, mode)[0]
    s1, s2 = slice_sup_norms(b, u, v, p, mode)
    values["max_slice"] = max(s1, s2)
    return values


def _max_pairwise_ratio(values: dict) -> float:
    vals = [v for v in values.values() if v > 1e-10]
    if len(vals) < 2:
        return 1.0
    return max(vals) / min(vals)


# ---------------------------------------------------------------- criteria


def test_criterion_01_reducing_sandwich():
    """John mode satisfies rho <= |We| <= sqrt(d) rho with slack <= 1 + 1e-6
    on 1000 random directions per triple, over >= 50 (W, E, p) triples."""
    worst = 0.0
    n_checked = 0
    for label, w, region, p, op in john_results():
        assert op.converged, f"{label}: solver flagged non-convergence"
        d = w.d
        rng = np.random.default_rng(hash(label) % 2**32)
        dirs = rng.standard_normal((1000, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        idx = region_indices(w.grid, region)
        wp = w.power(1.0 / p).reshape(w.grid.n_cells, d, d)[idx]
        rhos = rho_many(wp, p, dirs)
        mes = np.linalg.norm(dirs @ op.matrix.T, axis=1)
        slack_left = float(np.max(rhos / mes))
        slack_right = float(np.max(mes / (np.sqrt(d) * rhos)))
        worst = max(worst, slack_left, slack_right)
        assert slack_left <= 1.0 + 1e-6, f"{label}: left slack {slack_left}"
        assert slack_right <= 1.0 + 1e-6, f"{label}: right slack {slack_right}"
        n_checked += 1
    assert n_checked >= 50
    _report(1, f"{n_checked} triples, worst sandwich slack {worst - 1.0:.3e} above 1")


def test_criterion_02_p2_exactness():
    """exact_p2 matches john to 1e-6 in operator norm and satisfies the left
    sandwich as an identity to 1e-12 on every tested direction."""
    n_checked = 0
    worst_gap, worst_id = 0.0, 0.0
    for label, w, region, p, op_john in john_results():
        if p != 2.0:
            continue
        op_exact = reducing_exact_p2(w, region)
        gap = op_norm(op_john.matrix - op_exact.matrix) / op_norm(op_exact.matrix)
        assert gap <= 1e-6, f"{label}: mode gap {gap}"
        d = w.d
        rng = np.random.default_rng(hash(label) % 2**31)
        dirs = rng.standard_normal((1000, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        idx = region_indices(w.grid, region)
        wp = w.power(0.5).reshape(w.grid.n_cells, d, d)[idx]
        rhos = rho_many(wp, 2.0, dirs)
        mes = np.linalg.norm(dirs @ op_exact.matrix.T, axis=1)
        ident = float(np.max(np.abs(mes / rhos - 1.0)))
        assert ident <= 1e-12, f"{label}: identity defect {ident}"
        worst_gap, worst_id = max(worst_gap, gap), max(worst_id, ident)
        n_checked += 1
    assert n_checked >= 15
    _report(2, f"{n_checked} p=2 triples, mode gap <= {worst_gap:.2e}, identity defect <= {worst_id:.2e}")


def test_criterion_03_ap_laws():
    """Jensen floor, exact constant normalization, scalar duality identity,
    and slice-bound stability across depths 4, 5, 6."""
    # (a) local characteristic >= 1 - 1e-9 everywhere on a full dyadic table
    g4 = GridSpec((1, 1), 4)
    corpus4 = [
        (gen_power_weight(g4, (0.5, 0.0), 2.0), 2.0),
        (gen_power_weight(g4, (0.3, -0.4), 1.5), 1.5),
        (gen_rotating_weight(g4, (1.0, 5.0), winding_theta(g4, (1, 1))), 3.0),
        (gen_random_pd_weight(g4, 2, seed=81, log_cond=1.2), 2.0),
    ]
    table_min = np.inf
    for w, p in corpus4:
        rep = ap_dyadic(w, p, with_table=True)
        table_min = min(table_min, min(v for _, v in rep.table))
    assert table_min >= 1.0 - 1e-9

    # (b) constant weight gives exactly 1
    const = ap_dyadic(constant_field(g4, np.diag([2.0, 5.0])), 2.0).value
    assert abs(const - 1.0) <= 1e-12

    # (c) d=1 duality identity
    r, _, _ = ap_dual_check(gen_power_weight(GridSpec((1, 1), 5), (0.6, -0.3), 3.0), 3.0)
    assert abs(r - 1.0) <= 1e-9

    # (d) slice bound kappa stable (+-20%) across L in {4, 5, 6}
    def corpus_at(depth):
        g = GridSpec((1, 1), depth)
        return [
            (gen_power_weight(g, (0.5, 0.0), 2.0), 2.0),
            (gen_rotating_weight(g, (1.0, 5.0), winding_theta(g, (1, 1))), 2.0),
            (gen_random_pd_weight(g, 2, seed=82, log_cond=1.0), 2.0),
        ]

    kappas = {}
    for depth in (4, 5, 6):
        for i, (w, p) in enumerate(corpus_at(depth)):
            s1, s2, _ = ap_slices(w, p)
            kappas[(i, depth)] = max(s1, s2) / ap_dyadic(w, p).value
    drifts = []
    for i in range(3):
        ref = kappas[(i, 6)]
        for depth in (4, 5):
            drift = kappas[(i, depth)] / ref
            drifts.append(drift)
            assert 0.8 <= drift <= 1.2, f"element {i}: kappa drift {drift} at L={depth}"
    _report(3, f"table min {table_min:.12f}, duality defect {abs(r-1):.1e}, kappa drift within [{min(drifts):.3f}, {max(drifts):.3f}]")


def test_criterion_04_exact_duality_identity():
    """bmo2(B; U, V, p) = bmo1(B*; V', U', p') to 1e-12 on 100 elements."""
    g = GridSpec((1, 1), 3)
    fam = make_family(g, "dyadic")
    worst = 0.0
    k = 0
    for d in (1, 2):
        for p in (1.5, 2.0, 2.5, 3.0, 4.0):
            for seed in range(10):
                b = gen_fourier_symbol(g, d, seed=1000 + 17 * k)
                u = gen_random_pd_weight(g, d, seed=2000 + 13 * k, log_cond=1.5)
                v = gen_random_pd_weight(g, d, seed=3000 + 11 * k, log_cond=1.5)
                pp = p / (p - 1.0)
                lhs, _ = bmo2_norm(b, u, v, p, fam)
                rhs, _ = bmo1_norm(
                    transpose_symbol(b), dual_weight(v, p), dual_weight(u, p), pp, fam
                )
                rel = abs(lhs - rhs) / max(lhs, rhs, 1e-300)
                worst = max(worst, rel)
                assert rel <= 1e-12, f"element {k}: defect {rel}"
                k += 1
    assert k == 100
    _report(4, f"100 elements, worst relative identity defect {worst:.2e}")


def test_criterion_05_equivalence_ratio_corpus():
    """Max pairwise ratio among the norm variants is finite and stable under
    refinement L=5 -> 6 and under the 1/3-trick family swap."""
    g6, corpus6 = _equivalence_corpus(6)
    # weights must satisfy the measured characteristic bound
    measured = {}
    for label, b, u, v, p in corpus6:
        for w in (u, v):
            key = (id(w), p)
            if key not in measured:
                measured[key] = ap_dyadic(w, p).value
            assert measured[key] <= 20.0, f"{label}: characteristic {measured[key]}"

    def corpus_constant(corpus, family_mode, grid):
        fam = make_family(grid, family_mode)
        worst = 1.0
        for label, b, u, v, p in corpus:
            values = _variant_values(b, u, v, p, fam)
            ratio = _max_pairwise_ratio(values)
            assert np.isfinite(ratio), f"{label}: non-finite ratio"
            worst = max(worst, ratio)
        return worst

    c6 = corpus_constant(corpus6, "dyadic", g6)
    g5, corpus5 = _equivalence_corpus(5)
    c5 = corpus_constant(corpus5, "dyadic", g5)
    drift = c5 / c6
    assert 0.8 <= drift <= 1.2, f"refinement drift {drift}"
    sub5 = corpus5[:5] + corpus5[10:15]  # ten elements across exponents
    c5_shift = corpus_constant(sub5, "shifted", g5)
    c5_base = corpus_constant(sub5, "dyadic", g5)
    swap = c5_shift / c5_base
    assert 0.8 <= swap <= 1.2, f"family-swap drift {swap}"
    _report(
        5,
        f"corpus constant {c6:.3f} at L=6; refinement drift {drift:.3f}; family swap drift {swap:.3f}",
    )


def test_criterion_06_covering_reduction():
    """Continuous-family value against the instrumented covering-chain bound:
    bmo_cont <= kappa_RS * (|S|/|R|)^{1/p} * (bmo_grid(g) + Psi), all factors
    measured, with (|S|/|R|)^{1/p} <= 6^{(n+m)/p}."""
    g = GridSpec((1, 1), 4)
    fam_shifted = shifted_family(g)
    sampled = make_family(g, "sampled", sampled=20, seed=9)
    k = 0
    worst_margin = 0.0
    for d in (1, 2):
        for p in P_SET:
            if d == 1:
                b = gen_fourier_symbol(g, 1, seed=600 + k)
                u = gen_power_weight(g, (0.4, 0.0), p)
                v = gen_power_weight(g, (0.0, -0.3), p)
            else:
                b = gen_fourier_symbol(g, 2, seed=700 + k)
                u = gen_random_pd_weight(g, 2, seed=710 + k, log_cond=1.0)
                v = gen_random_pd_weight(g, 2, seed=720 + k, log_cond=1.0)
            mode = "auto"
            md = "exact_p2" if p == 2.0 else "proxy"

            def rect_term(rect):
                idx = region_indices(g, rect)
                b_st = b.flat()[idx]
                vp_st = v.power(1.0 / p).reshape(g.n_cells, v.d, v.d)[idx]
                u_inv = reduce_with_mode(u, rect, p, md).inv()
                t = vp_st @ (b_st - b_st.mean(axis=0)) @ u_inv
                return float(power_mean(op_norm_batch(t), p, axis=0))

            def chain_certificate(rect, term):
                gidx, s_rect = cover(rect, fam_shifted)
                shift = fam_shifted.shifts[gidx]
                fam_g = RectangleFamily(g, f"grid{gidx}", (shift,))
                bmo_g, _ = bmo_norm(b, u, v, p, fam_g, mode)
                op_r = reduce_with_mode(u, rect, p, md)
                op_s = reduce_with_mode(u, s_rect, p, md)
                kappa_rs = op_norm(op_s.matrix @ op_r.inv())
                blow = (s_rect.measure_cells / rect.measure_cells) ** (1.0 / p)
                assert blow <= 6.0 ** (2.0 / p) * (1 + 1e-9)
                idx_s = region_indices(g, s_rect)
                idx_r = region_indices(g, rect)
                b_flat = b.flat()
                delta = b_flat[idx_s].mean(axis=0) - b_flat[idx_r].mean(axis=0)
                vp = v.power(1.0 / p).reshape(g.n_cells, v.d, v.d)[idx_s]
                psi_mat = vp @ delta @ op_s.inv()
                psi = float(power_mean(op_norm_batch(psi_mat), p, axis=0))
                bound = kappa_rs * blow * (bmo_g + psi)
                assert term <= bound * (1 + 1e-9), f"d={d} p={p}: {term} > {bound}"
                return term / bound if bound > 0 else 0.0

            cont, arg = bmo_norm(b, u, v, p, sampled, mode)
            base, _ = bmo_norm(b, u, v, p, make_family(g, "dyadic"), mode)
            assert cont >= base - 1e-12
            worst_margin = max(worst_margin, chain_certificate(arg, cont))
            # also certify the worst genuinely non-dyadic rectangle
            extras = [(rect_term(r), r) for r in sampled.extras]
            term_x, rect_x = max(extras, key=lambda t: t[0])
            margin_x = chain_certificate(rect_x, term_x)
            worst_margin = max(worst_margin, margin_x)
            k += 1
    _report(6, f"{k} elements (argmax + worst sampled each); worst chain-bound margin {worst_margin:.3f}")


def test_criterion_07_averaging_comparison():
    """|W'_R W_R| vs the averaging-operator norm: equality to 1e-9 for d=1,
    within 4*sqrt(d) for d=2, across 50 rectangles at p=2."""
    g = GridSpec((1, 1), 4)
    rects = sampled_rectangles(g, 25, seed=12)
    w1 = gen_power_weight(g, (0.5, -0.3), 2.0)
    w2 = gen_random_pd_weight(g, 2, seed=90, log_cond=1.5)
    worst_d1, worst_d2 = 0.0, 1.0
    for rect in rects:
        cmp1 = averaging_opnorm(rect, w1, 2.0)
        assert abs(cmp1.ratio - 1.0) <= 1e-9, f"d=1 ratio {cmp1.ratio}"
        worst_d1 = max(worst_d1, abs(cmp1.ratio - 1.0))
        cmp2 = averaging_opnorm(rect, w2, 2.0)
        bound = 4.0 * np.sqrt(2.0)
        assert 1.0 / bound <= cmp2.ratio <= bound, f"d=2 ratio {cmp2.ratio}"
        worst_d2 = max(worst_d2, max(cmp2.ratio, 1.0 / cmp2.ratio))
    _report(7, f"50 rectangles; d=1 defect <= {worst_d1:.1e}, d=2 ratio spread <= {worst_d2:.6f}")


def test_criterion_08_tensorization_identity():
    """ap_local of the tensorized weight over the three-term sum lies in the
    pinned bracket [1/3, 3^p] across rectangles and corpus."""
    g = GridSpec((1, 1), 3)
    rects = [full_torus_rectangle(g)] + sampled_rectangles(g, 12, seed=13)
    count = 0
    lo_margin, hi_margin = np.inf, 0.0
    for d in (1, 2):
        for p in P_SET:
            b = gen_fourier_symbol(g, d, seed=800 + count)
            u = gen_random_pd_weight(g, d, seed=810 + count, log_cond=1.2)
            v = gen_random_pd_weight(g, d, seed=820 + count, log_cond=1.2)
            for rect in rects:
                dec = tensorization_decomposition(b, u, v, p, rect)
                ratio = dec["ratio"]
                assert 1.0 / 3.0 * (1 - 1e-9) <= ratio <= 3.0**p * (1 + 1e-9), (
                    f"d={d} p={p}: ratio {ratio}"
                )
                lo_margin = min(lo_margin, ratio)
                hi_margin = max(hi_margin, ratio / 3.0**p)
                count += 1
    _report(8, f"{count} (element, rectangle) pairs; ratios within [{lo_margin:.3f}, 3^p x {hi_margin:.3f}]")


def test_criterion_09_commutator_lower_ratio():
    """bmo / best commutator norm finite on 20 elements at p=2, stable within
    +-30% under refinement L=5 -> 6; degenerate cases excluded and logged."""

    def corpus(depth):
        g = GridSpec((1, 1), depth)
        n = g.cells_per_axis
        one1 = constant_field(g, np.eye(1))
        pw = gen_power_weight(g, (0.3, 0.0), 2.0)
        u2 = gen_random_pd_weight(g, 2, seed=91, log_cond=0.8)
        v2 = gen_random_pd_weight(g, 2, seed=92, log_cond=0.8)
        one2 = constant_field(g, np.eye(2))
        out = []
        for k in range(10):
            b = gen_fourier_symbol(g, 1, seed=900 + k, n_modes=2)
            u, v = (one1, one1) if k % 2 == 0 else (pw, one1)
            out.append((f"d1-{k}", b, u, v))
        for k in range(9):
            b = gen_fourier_symbol(g, 2, seed=950 + k, n_modes=2)
            u, v = (one2, one2) if k % 3 == 0 else (u2, v2)
            out.append((f"d2-{k}", b, u, v))
        out.append(("d2-checker", gen_checkerboard_symbol(g, 2, block=n // 8), one2, one2))
        return g, out

    ratios = {}
    excluded = []
    for depth in (5, 6):
        g, corp = corpus(depth)
        fam = make_family(g, "dyadic")
        for label, b, u, v in corp:
            lhs, _ = bmo_norm(b, u, v, 2.0, fam, "exact_p2")
            est = weighted_opnorm(CommutatorOp(b, 1, 1), u, v, 2.0)
            if lhs < 1e-10 or est.value < 1e-10:
                excluded.append((label, depth))
                continue
            ratios[(label, depth)] = lhs / est.value
    n_elements = 20
    checked = 0
    for label in {lbl for lbl, _ in ratios}:
        if (label, 5) in ratios and (label, 6) in ratios:
            drift = ratios[(label, 5)] / ratios[(label, 6)]
            assert 1.0 / 1.3 <= drift <= 1.3, f"{label}: drift {drift}"
            checked += 1
    if excluded:
        print(f"  excluded degenerate elements: {excluded}")
    assert checked >= n_elements - 2  # allow logged degenerate exclusions
    vals = [ratios[(lbl, 6)] for (lbl, dep) in ratios if dep == 6]
    assert all(np.isfinite(v) for v in vals)
    _report(9, f"{checked} elements stable; ratio range at L=6 [{min(vals):.2f}, {max(vals):.2f}]")


def test_criterion_10_riesz_multiplier_units():
    """sin -> -cos to 1e-10; double transform is minus centering to 1e-10;
    adjoint pairing defect <= 1e-10."""
    g = GridSpec((1, 1), 5)
    x = g.cell_centers(0)
    xx = np.broadcast_to(x[:, None], g.shape)
    f = VectorField(g, np.sin(2 * np.pi * xx)[..., None].copy())
    out = riesz_apply(f, 1, 1)
    sin_defect = float(np.max(np.abs(out.values[..., 0] + np.cos(2 * np.pi * xx))))
    assert sin_defect <= 1e-10

    rng = np.random.default_rng(17)
    vals = np.zeros(g.shape + (1,))
    for freq in range(g.cells_per_axis // 2):  # strictly below Nyquist
        c, s = rng.standard_normal(2)
        vals[..., 0] += c * np.cos(2 * np.pi * freq * xx) + s * np.sin(2 * np.pi * freq * xx)
    f = VectorField(g, vals)
    twice = riesz_apply(riesz_apply(f, 1, 1), 1, 1)
    centered = f.values - f.values.mean(axis=0, keepdims=True)
    square_defect = float(np.max(np.abs(twice.values + centered)))
    assert square_defect <= 1e-10

    t = TensorRiesz(g, 1, 1)
    a = VectorField(g, np.random.default_rng(18).standard_normal(g.shape + (2,)))
    b = VectorField(g, np.random.default_rng(19).standard_normal(g.shape + (2,)))
    lhs = float(np.sum(t.apply(a).values * b.values))
    rhs = float(np.sum(a.values * t.apply_adjoint(b).values))
    adj_defect = abs(lhs - rhs) / max(abs(lhs), 1.0)
    assert adj_defect <= 1e-10
    _report(
        10,
        f"sin defect {sin_defect:.1e}, double-transform defect {square_defect:.1e}, adjoint defect {adj_defect:.1e}",
    )
