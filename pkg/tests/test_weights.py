"""Tests for weight/symbol field generators, duals, slices, and WFLD I/O."""

from __future__ import annotations

import hashlib

import numpy as np
import pytest

from bmolab.errors import FormatError
from bmolab.grid import GridSpec
from bmolab.weights import (
    constant_field,
    dual_weight,
    gen_checkerboard_symbol,
    gen_fourier_symbol,
    gen_power_weight,
    gen_random_pd_weight,
    gen_rotating_weight,
    load_wfld,
    save_wfld,
    slice_field,
    winding_theta,
)

G = GridSpec((1, 1), 4)


class TestPowerWeight:
    def test_zero_exponent_is_constant_one(self):
        w = gen_power_weight(G, 0.0, 2.0)
        np.testing.assert_allclose(w.values[..., 0, 0], 1.0, atol=1e-15)
        assert w.meta["ap_valid"]

    def test_boundary_alpha_flagged(self):
        w = gen_power_weight(G, -1.0, 2.0)
        assert not w.meta["ap_valid"]

    def test_positive_everywhere(self):
        w = gen_power_weight(G, (0.9, -0.5), 2.0)
        assert np.min(w.values[..., 0, 0]) > 0


class TestRotatingWeight:
    def test_constant_profile_gives_constant_field(self):
        w = gen_rotating_weight(G, (2.0, 3.0), 0.7)
        assert np.max(np.abs(w.flat() - w.flat()[0])) < 1e-12

    def test_cells_do_not_commute(self):
        w = gen_rotating_weight(G, (1.0, 10.0), winding_theta(G, (1, 0)))
        a, b = w.flat()[0], w.flat()[5 * G.cells_per_axis]
        comm = a @ b - b @ a
        assert np.linalg.norm(comm) > 1e-3

    def test_zero_angle_is_diagonal(self):
        w = gen_rotating_weight(G, (1.0, 10.0), 0.0)
        np.testing.assert_allclose(w.values[..., 0, 1], 0.0, atol=1e-12)
        np.testing.assert_allclose(w.values[..., 1, 0], 0.0, atol=1e-12)

    def test_generated_weights_positive_definite(self):
        for seed in range(3):
            w = gen_random_pd_weight(G, 3, seed)
            lam = np.linalg.eigvalsh(w.values)
            assert np.min(lam) > 0


class TestDualWeight:
    def test_identity_fixed_point(self):
        w = constant_field(G, np.eye(2))
        np.testing.assert_allclose(dual_weight(w, 2.5).values, w.values, atol=1e-12)

    def test_scalar_exponent_arithmetic(self):
        w = constant_field(G, [[8.0]])
        wp = dual_weight(w, 3.0)
        np.testing.assert_allclose(wp.values[..., 0, 0], 8.0 ** (-0.5), rtol=1e-12)

    def test_involution_through_paired_exponents(self):
        p = 3.0
        pp = p / (p - 1.0)
        w = gen_rotating_weight(G, (0.5, 4.0), winding_theta(G, (1, 2)))
        back = dual_weight(dual_weight(w, p), pp)
        np.testing.assert_allclose(back.values, w.values, rtol=1e-8, atol=1e-8)


class TestSlice:
    def test_constant_slice(self):
        w = constant_field(G, [[3.0]])
        s = slice_field(w, 1, 2)
        assert s.grid.dims == (1, 0)
        np.testing.assert_allclose(s.values[..., 0, 0], 3.0)

    def test_product_field_factorizes(self):
        w1 = 1.0 + 0.5 * np.cos(2 * np.pi * G.cell_centers(0))
        w2 = 2.0 + np.sin(2 * np.pi * G.cell_centers(1)) ** 2
        vals = np.outer(w1, w2)[..., None, None].copy()
        from bmolab.weights import WeightField

        w = WeightField(G, vals, "weight")
        i = 5
        s = slice_field(w, 1, i)
        np.testing.assert_allclose(s.values[..., 0, 0], w1[i] * w2, rtol=1e-12)

    def test_slice_order_independence(self):
        b = gen_fourier_symbol(G, 2, seed=9)
        i, j = 3, 11
        s1 = slice_field(b, 1, i)  # function of x2
        s2 = slice_field(b, 2, j)  # function of x1
        np.testing.assert_allclose(s1.values[j], s2.values[i], atol=0)

    def test_out_of_range(self):
        w = constant_field(G, [[1.0]])
        with pytest.raises(IndexError):
            slice_field(w, 1, G.cells_per_axis)


class TestWfldIO:
    def test_round_trip_identity(self, tmp_path):
        w = constant_field(G, np.eye(2))
        path = tmp_path / "id.wfld"
        save_wfld(path, w)
        back = load_wfld(path)
        np.testing.assert_array_equal(back.values, w.values)
        assert back.kind == w.kind and back.grid == w.grid

    def test_payload_hash_stable(self, tmp_path):
        w = gen_rotating_weight(G, (1.0, 10.0), winding_theta(G, (2, 1)))
        p1, p2 = tmp_path / "a.wfld", tmp_path / "b.wfld"
        save_wfld(p1, w)
        save_wfld(p2, load_wfld(p1))
        h1 = hashlib.sha256(p1.read_bytes()).hexdigest()
        h2 = hashlib.sha256(p2.read_bytes()).hexdigest()
        assert h1 == h2
        assert load_wfld(p2).fingerprint() == w.fingerprint()

    def test_truncated_file_reports_offset(self, tmp_path):
        w = constant_field(G, [[1.0]])
        path = tmp_path / "w.wfld"
        save_wfld(path, w)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) - 17])
        with pytest.raises(FormatError) as err:
            load_wfld(path)
        assert err.value.offset > 0


class TestSymbols:
    def test_checkerboard_signs(self):
        b = gen_checkerboard_symbol(GridSpec((1, 1), 1), d=1)
        np.testing.assert_allclose(
            b.values[..., 0, 0], np.array([[1.0, -1.0], [-1.0, 1.0]])
        )

    def test_fourier_symbol_active_axes(self):
        b = gen_fourier_symbol(G, 1, seed=4, active_axes=(0,))
        # constant along axis 1
        assert np.max(np.abs(b.values - b.values[:, :1])) < 1e-12
