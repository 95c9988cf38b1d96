import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autogcas.airframe import RigidBodyState, SurfaceSet, _derivative, air_data
from autogcas.flight_control import (
    CasGains,
    DegenerateDynamicPressureError,
    Effectivity,
    MomentCoeffs,
    RateBounds,
    RateCommand,
    control_effectivity,
    inca_allocate,
    moment_coefficients,
    ndi_required_moments,
    ndi_virtual_input,
    rotational_affine,
)


class TestVirtualInput:
    def test_zero_error(self):
        out = ndi_virtual_input(RateCommand(0.1, 0.2, 0.3), (0.1, 0.2, 0.3), CasGains())
        np.testing.assert_array_equal(out, 0.0)

    def test_linear_scaling(self):
        out = ndi_virtual_input(RateCommand(0.1, 0.0, 0.0), (0.0, 0.0, 0.0), CasGains(2, 2, 2))
        np.testing.assert_allclose(out, [0.2, 0.0, 0.0])

    def test_random_gains_elementwise(self, rng):
        for _ in range(20):
            K = rng.uniform(0.5, 10, 3)
            cmd, w = rng.normal(size=3), rng.normal(size=3)
            out = ndi_virtual_input(RateCommand(*cmd), w, CasGains(*K))
            np.testing.assert_allclose(out, K * (cmd - w))

    def test_gains_must_be_positive(self):
        with pytest.raises(ValueError):
            CasGains(1.0, 0.0, 1.0)


class TestRequiredMoments:
    def test_equilibrium(self, aircraft):
        tau = ndi_required_moments(np.zeros(3), np.zeros(3), 2e4, aircraft)
        np.testing.assert_array_equal(tau.as_array(), 0.0)

    def test_zero_rate_matrix_oracle(self, aircraft):
        wdot = np.array([0.3, -0.2, 0.1])
        qbar = 1.5e4
        scale = np.diag(qbar * aircraft.wing_area * np.array([aircraft.span, aircraft.chord, aircraft.span]))
        expected = np.linalg.solve(scale, aircraft.inertia @ wdot)
        tau = ndi_required_moments(wdot, np.zeros(3), qbar, aircraft)
        np.testing.assert_allclose(tau.as_array(), expected, rtol=1e-12)

    def test_inverts_rotational_dynamics(self, aircraft, rng):
        for _ in range(10):
            w = rng.normal(scale=0.5, size=3)
            wdot = rng.normal(size=3)
            qbar = rng.uniform(5e3, 5e4)
            tau = ndi_required_moments(wdot, w, qbar, aircraft).as_array()
            f, g = rotational_affine(w, qbar, aircraft)
            np.testing.assert_allclose(f + g @ tau, wdot, atol=1e-10)

    def test_matches_plant_rotational_dynamics(self, aircraft):
        s = RigidBodyState.from_flight(250.0, alpha=0.08, p=0.4, q=0.1, r=-0.2, h=2000)
        surf = SurfaceSet(-0.03, -0.01, 0.05, -0.05, 0.02)
        ad = air_data(s)
        tau = moment_coefficients(s, ad, surf, aircraft).as_array()
        f, g = rotational_affine((s.p, s.q, s.r), ad.qbar, aircraft)
        d = _derivative(s.as_array(), surf.as_array(), aircraft)
        np.testing.assert_allclose(d[3:6], f + g @ tau, rtol=1e-10)

    def test_degenerate_dynamic_pressure(self, aircraft):
        with pytest.raises(DegenerateDynamicPressureError):
            ndi_required_moments(np.zeros(3), np.zeros(3), 0.0, aircraft)


class TestEffectivity:
    def test_analytic_matches_fd(self, aircraft):
        s = RigidBodyState.from_flight(220.0, alpha=0.15, beta=0.02, q=0.1, h=1500)
        surf = SurfaceSet(-0.05, -0.04, 0.02, -0.02, 0.0)
        a = control_effectivity(s, surf, aircraft)
        f = control_effectivity(s, surf, aircraft, method="fd")
        np.testing.assert_allclose(a.matrix, f.matrix, atol=1e-6)
        assert a.full_rank

    def test_unknown_method(self, aircraft):
        with pytest.raises(ValueError):
            control_effectivity(RigidBodyState.from_flight(200.0), SurfaceSet(), aircraft, method="x")


class TestAllocation:
    def test_zero_demand_is_identity(self):
        cur = SurfaceSet(0.1, 0.0, -0.1, 0.2, 0.0)
        out = inca_allocate(np.zeros(3), np.random.default_rng(0).normal(size=(3, 5)), cur)
        np.testing.assert_allclose(out.surfaces.as_array(), cur.as_array())

    def test_orthonormal_rows(self):
        phi = np.hstack([np.eye(3), np.zeros((3, 2))])
        out = inca_allocate(MomentCoeffs(0.1, 0.0, 0.0), phi, SurfaceSet())
        np.testing.assert_allclose(out.surfaces.as_array(), [0.1, 0, 0, 0, 0])
        assert out.residual == pytest.approx(0.0, abs=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_pinv_equivalence_and_exactness(self, seed):
        r = np.random.default_rng(seed)
        phi = r.normal(size=(3, 5))
        dtau = r.normal(scale=0.01, size=3)
        cur = SurfaceSet.from_array(r.normal(scale=0.05, size=5))
        out = inca_allocate(dtau, Effectivity(phi, 3), cur)
        inc = out.surfaces.as_array() - cur.as_array()
        np.testing.assert_allclose(inc, np.linalg.pinv(phi, rcond=1e-8) @ dtau, atol=1e-12)
        assert out.residual <= 1e-9
        assert not out.clamped and not out.rank_deficient

    def test_rank_deficiency_flagged(self):
        phi = np.zeros((3, 5))
        phi[0, 0] = 1.0
        phi[1, 1] = 1.0
        out = inca_allocate([0.1, 0.2, 0.3], phi, SurfaceSet())
        assert out.rank_deficient
        np.testing.assert_allclose(out.surfaces.as_array(), [0.1, 0.2, 0, 0, 0])
        assert out.residual == pytest.approx(0.3)

    def test_clamp_reported(self):
        phi = np.hstack([np.eye(3), np.zeros((3, 2))])
        out = inca_allocate([1.0, 0, 0], phi, SurfaceSet(), pos_min=np.full(5, -0.4), pos_max=np.full(5, 0.4))
        assert out.clamped
        assert out.surfaces.rht == pytest.approx(0.4)


class TestRateBounds:
    def test_clamp_and_contains(self):
        b = RateBounds()
        c = b.clamp(RateCommand(5.0, -5.0, 0.1))
        assert b.contains(c)
        assert c.p_cmd == b.p[1] and c.q_cmd == b.q[0] and c.r_cmd == 0.1

    def test_inverted_bounds(self):
        with pytest.raises(ValueError):
            RateBounds(q=(0.2, -0.2))
