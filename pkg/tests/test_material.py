"""Constitutive building blocks: stiffness rotation, slip kinetics, hardening."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcsw.cpfem import (
    MaterialParams,
    N_SLIP,
    harden,
    hardening_matrix,
    hardening_modulus,
    mean_field,
    resolved_shear,
    rotated_stiffness,
    slip_rate,
    slip_systems,
    von_mises,
)
from pcsw.presets import ALUMINUM, COPPER

# frozen from a 50-digit mpmath evaluation of the flow rule at
# tau=110, g=220, g_a=0, p=0.78, q=1.15, gdot0=1.732e6, dF=2.5e-19 J, T=293.15 K
PINNED_AL_RATE_AT_HALF_G = 0.00025736046862759162


class TestMaterialParams:
    def test_table_values(self):
        assert (ALUMINUM.C11, ALUMINUM.C12, ALUMINUM.C44) == (131038.0, 80314.0, 30942.0)
        assert (COPPER.h0, COPPER.g0, COPPER.gmax) == (187.0, 22.0, 153.0)

    def test_invalid_elasticity(self):
        with pytest.raises(ValueError):
            MaterialParams(C11=100.0, C12=200.0, C44=30.0, h0=1.0, g0=1.0, gmax=2.0,
                           gamma_dot0=1.0, delta_f=1e-19)

    def test_invalid_resistances(self):
        with pytest.raises(ValueError):
            MaterialParams(C11=200.0, C12=100.0, C44=30.0, h0=1.0, g0=2.0, gmax=1.0,
                           gamma_dot0=1.0, delta_f=1e-19)

    def test_round_trip_dict(self):
        assert MaterialParams.from_dict(ALUMINUM.to_dict()) == ALUMINUM


class TestSlipSystems:
    def test_geometry(self):
        for theta in (0.0, 37.0, -120.0):
            s = slip_systems(theta)
            np.testing.assert_allclose(np.einsum("ai,ai->a", s.direction, s.normal),
                                       np.zeros(N_SLIP), atol=1e-14)
            np.testing.assert_allclose(np.linalg.norm(s.direction, axis=1), 1.0)
            np.testing.assert_allclose(np.linalg.norm(s.normal, axis=1), 1.0)
            np.testing.assert_allclose(np.trace(s.schmid, axis1=1, axis2=2),
                                       np.zeros(N_SLIP), atol=1e-14)

    def test_count(self):
        assert slip_systems(0.0).schmid.shape == (12, 3, 3)


class TestRotatedStiffness:
    def test_aluminum_voigt_entries(self):
        V = rotated_stiffness(ALUMINUM, 0.0)
        assert V[0, 0] == pytest.approx(131038.0)
        assert V[0, 1] == pytest.approx(80314.0)
        assert V[3, 3] == pytest.approx(30942.0)

    def test_isotropic_degeneracy(self):
        iso = MaterialParams(C11=100000.0, C12=60000.0, C44=20000.0, h0=100.0, g0=50.0,
                             gmax=100.0, gamma_dot0=1e6, delta_f=2.5e-19)
        V0 = rotated_stiffness(iso, 0.0)
        for theta in (13.0, 45.0, 77.5):
            np.testing.assert_allclose(rotated_stiffness(iso, theta), V0,
                                       rtol=1e-9, atol=1e-6)

    def test_four_fold_symmetry(self):
        np.testing.assert_allclose(rotated_stiffness(ALUMINUM, 90.0),
                                   rotated_stiffness(ALUMINUM, 0.0), atol=1e-6)

    def test_symmetric_positive_definite(self):
        for theta in (0.0, 30.0, 62.0):
            V = rotated_stiffness(ALUMINUM, theta)
            np.testing.assert_allclose(V, V.T, atol=1e-8)
            assert np.linalg.eigvalsh(V).min() > 0


class TestResolvedShear:
    def test_hydrostatic_is_zero(self):
        s = slip_systems(25.0)
        tau = resolved_shear(-37.5 * np.eye(3), s)
        np.testing.assert_allclose(tau, np.zeros(N_SLIP), atol=1e-12)

    def test_schmid_factor_fixture(self):
        # uniaxial stress along m: tau = sigma (s.m)(n.m), checked per system
        s = slip_systems(33.0)
        m = np.array([np.cos(0.3), np.sin(0.3), 0.0])
        sigma = 173.0 * np.outer(m, m)
        expected = 173.0 * (s.direction @ m) * (s.normal @ m)
        np.testing.assert_allclose(resolved_shear(sigma, s), expected, atol=1e-10)

    def test_linearity_in_stress(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(3, 3))
        sigma = a + a.T
        s = slip_systems(-71.0)
        np.testing.assert_allclose(resolved_shear(-sigma, s), -resolved_shear(sigma, s))


class TestSlipRate:
    def test_saturation_point(self):
        assert slip_rate(220.0, 220.0, ALUMINUM) == pytest.approx(ALUMINUM.gamma_dot0)
        assert slip_rate(-220.0, 220.0, ALUMINUM) == pytest.approx(-ALUMINUM.gamma_dot0)

    def test_zero_stress(self):
        assert slip_rate(0.0, 220.0, ALUMINUM) == 0.0

    def test_pinned_regression_value(self):
        rate = slip_rate(110.0, 220.0, ALUMINUM)
        assert rate == pytest.approx(PINNED_AL_RATE_AT_HALF_G, rel=1e-12)

    def test_athermal_threshold(self):
        mat = MaterialParams(C11=200.0, C12=100.0, C44=30.0, h0=10.0, g0=50.0, gmax=80.0,
                             gamma_dot0=1e6, delta_f=2.5e-19, g_a=10.0)
        assert slip_rate(9.0, 50.0, mat) == 0.0
        assert slip_rate(10.0, 50.0, mat) == 0.0
        assert slip_rate(11.0, 50.0, mat) > 0.0

    def test_overstress_is_clipped(self):
        assert slip_rate(500.0, 220.0, ALUMINUM) == pytest.approx(ALUMINUM.gamma_dot0)

    def test_non_finite_rejected(self):
        with pytest.raises(FloatingPointError):
            slip_rate(np.nan, 220.0, ALUMINUM)


class TestHardening:
    def test_zero_increments_no_change(self):
        g = np.full(N_SLIP, 250.0)
        np.testing.assert_array_equal(harden(g, np.zeros(N_SLIP), ALUMINUM), g)

    def test_saturated_no_change(self):
        g = np.full(N_SLIP, ALUMINUM.gmax)
        out = harden(g, np.full(N_SLIP, 0.1), ALUMINUM)
        np.testing.assert_allclose(out, g)

    def test_single_active_system_matrix_oracle(self):
        # explicit 12x12 matrix-vector product as reference
        g = np.full(N_SLIP, ALUMINUM.g0)
        dgamma = np.zeros(N_SLIP)
        dgamma[4] = 1e-3
        Q = np.full((N_SLIP, N_SLIP), ALUMINUM.q_latent)
        np.fill_diagonal(Q, ALUMINUM.q_self)
        h = ALUMINUM.h0 * (ALUMINUM.gmax - g) / (ALUMINUM.gmax - ALUMINUM.g0)
        expected = np.clip(g + Q @ (h * np.abs(dgamma)), ALUMINUM.g0, ALUMINUM.gmax)
        np.testing.assert_allclose(harden(g, dgamma, ALUMINUM), expected)

    def test_clamped_to_bounds(self):
        g = np.full(N_SLIP, ALUMINUM.g0)
        out = harden(g, np.full(N_SLIP, 10.0), ALUMINUM)
        assert (out <= ALUMINUM.gmax).all() and (out >= ALUMINUM.g0).all()

    def test_interaction_matrix(self):
        Q = hardening_matrix(ALUMINUM)
        assert Q.shape == (N_SLIP, N_SLIP)
        assert (np.diag(Q) == ALUMINUM.q_self).all()
        off = Q[~np.eye(N_SLIP, dtype=bool)]
        assert (off == ALUMINUM.q_latent).all()

    def test_modulus_endpoints(self):
        assert hardening_modulus(ALUMINUM.g0, ALUMINUM) == pytest.approx(ALUMINUM.h0)
        assert hardening_modulus(ALUMINUM.gmax, ALUMINUM) == pytest.approx(0.0)


class TestVonMises:
    def test_uniaxial(self):
        sigma = np.zeros((3, 3))
        sigma[1, 1] = 137.0
        assert von_mises(sigma) == pytest.approx(137.0)

    def test_hydrostatic(self):
        assert von_mises(42.0 * np.eye(3)) == pytest.approx(0.0, abs=1e-10)

    def test_pure_shear(self):
        sigma = np.zeros((3, 3))
        sigma[0, 1] = sigma[1, 0] = 55.0
        assert von_mises(sigma) == pytest.approx(55.0 * np.sqrt(3.0))

    @given(st.floats(-100, 100), st.floats(-100, 100), st.floats(-100, 100),
           st.floats(-200, 200))
    @settings(max_examples=50, deadline=None)
    def test_pressure_invariance(self, a, b, c, p):
        sigma = np.diag([a, b, c])
        assert von_mises(sigma + p * np.eye(3)) == pytest.approx(von_mises(sigma), abs=1e-8)


class TestMeanField:
    def test_constant(self):
        assert mean_field(np.full(7, 3.25)) == 3.25

    def test_example(self):
        assert mean_field([1.0, 2.0, 3.0, 4.0]) == 2.5

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mean_field([])
