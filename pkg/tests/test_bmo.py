"""Tests for the little BMO norm variants and the equivalence harness."""

from __future__ import annotations

import numpy as np
import pytest

from bmolab.bmo import (
    bmo1_norm,
    bmo2_norm,
    bmo_norm,
    bmo_tilde_norm,
    equivalence_report,
    one_param_bmo_norm,
    slice_sup_norms,
    transpose_symbol,
)
from bmolab.grid import GridSpec, make_family
from bmolab.weights import (
    WeightField,
    constant_field,
    dual_weight,
    gen_checkerboard_symbol,
    gen_fourier_symbol,
    gen_random_pd_weight,
    slice_field,
)

G = GridSpec((1, 1), 3)
ONE = constant_field(G, [[1.0]])


def brute_unweighted_bmo(b_vals: np.ndarray, grid: GridSpec, p: float, family) -> float:
    """Independent oracle: direct loops over the materialized rectangle list."""
    best = 0.0
    for rect in family.rectangles():
        import itertools

        axes = [rect.axis_indices(grid, ax) for ax in range(grid.n_axes)]
        cells = np.array(
            [b_vals[idx] for idx in itertools.product(*[list(a) for a in axes])]
        )
        avg = cells.mean()
        best = max(best, float(np.mean(np.abs(cells - avg) ** p) ** (1.0 / p)))
    return best


class TestBmoNorm:
    def test_constant_symbol_is_zero(self):
        b = constant_field(G, [[3.7]], kind="symbol")
        val, _ = bmo_norm(b, ONE, ONE, 2.0)
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_checkerboard_unweighted(self):
        g = GridSpec((1, 1), 1)
        one = constant_field(g, [[1.0]])
        b = gen_checkerboard_symbol(g)
        val, _ = bmo_norm(b, one, one, 2.0)
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_matches_unweighted_oracle(self):
        b = gen_fourier_symbol(G, 1, seed=2)
        fam = make_family(G, "dyadic")
        val, _ = bmo_norm(b, ONE, ONE, 2.0, fam)
        oracle = brute_unweighted_bmo(b.values[..., 0, 0], G, 2.0, fam)
        assert val == pytest.approx(oracle, abs=1e-12)

    def test_john_mode_matches_batched_at_p2(self):
        g = GridSpec((1, 1), 2)
        b = gen_fourier_symbol(g, 2, seed=3)
        u = gen_random_pd_weight(g, 2, seed=4, log_cond=1.0)
        v = gen_random_pd_weight(g, 2, seed=5, log_cond=1.0)
        fam = make_family(g, "dyadic")
        fast, _ = bmo_norm(b, u, v, 2.0, fam, mode="exact_p2")
        slow, _ = bmo_norm(b, u, v, 2.0, fam, mode="john")
        assert slow == pytest.approx(fast, rel=2e-5)

    def test_homogeneity(self):
        b = gen_fourier_symbol(G, 2, seed=8)
        u = gen_random_pd_weight(G, 2, seed=9, log_cond=1.0)
        v = gen_random_pd_weight(G, 2, seed=10, log_cond=1.0)
        val1, _ = bmo_norm(b, u, v, 2.0)
        b3 = WeightField(G, (3.0 * b.values).copy(), "symbol")
        val3, _ = bmo_norm(b3, u, v, 2.0)
        assert val3 == pytest.approx(3.0 * val1, rel=1e-12)


class TestTildeNorm:
    def test_constant_zero(self):
        b = constant_field(G, np.eye(2), kind="symbol")
        u = constant_field(G, np.eye(2))
        val, _ = bmo_tilde_norm(b, u, u, 2.0)
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_checkerboard_matches_l2_oscillation(self):
        g = GridSpec((1, 1), 1)
        one = constant_field(g, [[1.0]])
        b = gen_checkerboard_symbol(g)
        val, _ = bmo_tilde_norm(b, one, one, 2.0)
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_dominated_via_ap_factor(self):
        # one-sided domination: b~mo <= c [V]_{Ap}^{1/p} bmo, measured
        from bmolab.ap import ap_dyadic

        b = gen_fourier_symbol(G, 2, seed=11)
        u = gen_random_pd_weight(G, 2, seed=12, log_cond=1.0)
        v = gen_random_pd_weight(G, 2, seed=13, log_cond=1.0)
        p = 2.0
        tilde, _ = bmo_tilde_norm(b, u, v, p)
        plain, _ = bmo_norm(b, u, v, p)
        bound = ap_dyadic(v, p).value ** (1.0 / p)
        assert tilde <= np.sqrt(2.0) * bound * plain * (1.0 + 1e-9)


class TestPointwiseVariants:
    def test_constant_zero_both(self):
        b = constant_field(G, [[2.0]], kind="symbol")
        assert bmo1_norm(b, ONE, ONE, 2.0)[0] == pytest.approx(0.0, abs=1e-12)
        assert bmo2_norm(b, ONE, ONE, 2.0)[0] == pytest.approx(0.0, abs=1e-12)

    def test_checkerboard_sqrt2(self):
        g = GridSpec((1, 1), 1)
        one = constant_field(g, [[1.0]])
        b = gen_checkerboard_symbol(g)
        val, _ = bmo1_norm(b, one, one, 2.0)
        assert val == pytest.approx(np.sqrt(2.0), rel=1e-12)

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_duality_identity_exact(self, p):
        # bmo2(B; U, V, p) = bmo1(B*; V', U', p'), evaluated independently
        b = gen_fourier_symbol(G, 2, seed=21)
        u = gen_random_pd_weight(G, 2, seed=22, log_cond=1.2)
        v = gen_random_pd_weight(G, 2, seed=23, log_cond=1.2)
        pp = p / (p - 1.0)
        lhs, _ = bmo2_norm(b, u, v, p)
        rhs, _ = bmo1_norm(transpose_symbol(b), dual_weight(v, p), dual_weight(u, p), pp)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_variance_form_oracle(self):
        # d=1 unweighted, p=2: bmo1_R^2 = 2 * variance over the rectangle
        b = gen_fourier_symbol(G, 1, seed=31)
        fam = make_family(G, "dyadic")
        val, arg = bmo1_norm(b, ONE, ONE, 2.0, fam)
        best = 0.0
        for rect in fam.rectangles():
            idx0 = rect.axis_indices(G, 0)
            idx1 = rect.axis_indices(G, 1)
            cells = b.values[np.ix_(idx0, idx1)][..., 0, 0].ravel()
            best = max(best, float(np.sqrt(2.0 * np.mean((cells - cells.mean()) ** 2))))
        assert val == pytest.approx(best, rel=1e-12)


class TestOneParameterAndSlices:
    def test_constant_slice_zero(self):
        b = constant_field(G, [[1.0]], kind="symbol")
        s1, s2 = slice_sup_norms(b, ONE, ONE, 2.0)
        assert s1 == pytest.approx(0.0, abs=1e-12)
        assert s2 == pytest.approx(0.0, abs=1e-12)

    def test_one_variable_symbol_splits(self):
        b = gen_fourier_symbol(G, 1, seed=7, active_axes=(0,))
        s1, s2 = slice_sup_norms(b, ONE, ONE, 2.0)
        assert s2 == pytest.approx(0.0, abs=1e-12)
        g1 = GridSpec((1, 0), G.depth)
        b1 = slice_field(b, 2, 0)
        one1 = constant_field(g1, [[1.0]])
        direct, _ = one_param_bmo_norm(b1, one1, one1, 2.0)
        assert s1 == pytest.approx(direct, rel=1e-12)

    def test_checkerboard_row_slice(self):
        g = GridSpec((1, 1), 1)
        one1 = constant_field(GridSpec((1, 0), 1), [[1.0]])
        b = gen_checkerboard_symbol(g)
        row = slice_field(b, 2, 0)
        val, _ = one_param_bmo_norm(row, one1, one1, 2.0)
        assert val == pytest.approx(1.0, abs=1e-12)


class TestEquivalenceReport:
    def test_constant_symbol_all_zero_and_degenerate(self):
        b = constant_field(G, np.eye(2), kind="symbol")
        u = constant_field(G, np.eye(2))
        rep = equivalence_report(b, u, u, 2.0)
        assert all(val == pytest.approx(0.0, abs=1e-10) for val in rep.values.values())
        assert not rep.ratios
        assert rep.degenerate

    def test_unweighted_ratios_bounded(self):
        b = gen_fourier_symbol(G, 1, seed=41)
        rep = equivalence_report(b, ONE, ONE, 2.0)
        worst = max(max(r, 1.0 / r) for r in rep.ratios.values())
        assert np.isfinite(worst)
        assert worst < 25.0

    def test_matrix_report_finite(self):
        b = gen_fourier_symbol(G, 2, seed=42)
        u = gen_random_pd_weight(G, 2, seed=43, log_cond=1.0)
        v = gen_random_pd_weight(G, 2, seed=44, log_cond=1.0)
        rep = equivalence_report(b, u, v, 3.0)
        assert rep.mode == "proxy"
        worst = max(max(r, 1.0 / r) for r in rep.ratios.values())
        assert np.isfinite(worst)

    def test_monotone_in_family(self):
        b = gen_fourier_symbol(G, 1, seed=45)
        small, _ = bmo_norm(b, ONE, ONE, 2.0, make_family(G, "dyadic"))
        big, _ = bmo_norm(b, ONE, ONE, 2.0, make_family(G, "shifted"))
        assert big >= small - 1e-12

    def test_zero_law_converse(self):
        # a symbol that is not cellwise constant has positive norm in every
        # variant (the full-square rectangle sees the oscillation)
        vals = np.zeros(G.shape + (1, 1))
        vals[0, 0, 0, 0] = 1.0
        b = WeightField(G, vals, "symbol")
        u = gen_random_pd_weight(G, 1, seed=46)
        rep = equivalence_report(b, u, u, 2.0, with_slices=False)
        assert all(val > 1e-10 for val in rep.values.values())
