import math

import numpy as np
import pytest

from cr3bp_nav import dynamics as dy

MU = dy.EARTH_MOON_MU


def reference_jacobi(state, mu):
    x, y, z, vx, vy, vz = state
    r1 = math.sqrt((x + mu) ** 2 + y ** 2 + z ** 2)
    r2 = math.sqrt((x - 1.0 + mu) ** 2 + y ** 2 + z ** 2)
    U = 0.5 * (x ** 2 + y ** 2) + (1.0 - mu) / r1 + mu / r2
    return 2.0 * U - (vx ** 2 + vy ** 2 + vz ** 2)


class TestBasics:
    def test_jacobi_against_reference(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            s = rng.uniform(-1.0, 1.0, size=6)
            s[0] += 0.5                    # keep away from the primaries
            assert dy.jacobi_constant(s, MU) == pytest.approx(
                reference_jacobi(s, MU), rel=1e-14)

    def test_derivative_is_hamiltonian_flow(self):
        # d/dt of the Jacobi constant along the vector field is zero
        s = np.array([0.5, 0.2, 0.1, 0.05, -0.3, 0.02])
        eps = 1e-7
        ds = dy.cr3bp_derivative(s, MU)
        c_plus = dy.jacobi_constant(s + eps * ds, MU)
        c_minus = dy.jacobi_constant(s - eps * ds, MU)
        assert abs(c_plus - c_minus) / (2 * eps) < 1e-6

    def test_lagrange_points_are_equilibria(self):
        for idx in (1, 2):
            x = dy.lagrange_collinear(MU, idx)
            s = np.array([x, 0.0, 0.0, 0.0, 0.0, 0.0])
            assert np.abs(dy.cr3bp_derivative(s, MU)).max() < 1e-12

    def test_l1_l2_bracket_moon(self):
        x1 = dy.lagrange_collinear(MU, 1)
        x2 = dy.lagrange_collinear(MU, 2)
        assert x1 < 1.0 - MU < x2

    def test_l1_literature_value(self):
        # Earth-Moon L1 for mu = 0.01215
        assert dy.lagrange_collinear(MU, 1) == pytest.approx(
            0.836918007317, abs=1e-9)

    def test_bad_mu_rejected(self):
        with pytest.raises(ValueError):
            dy.lagrange_collinear(0.7, 1)
        with pytest.raises(ValueError):
            dy.jacobi_constant(np.zeros(6), -0.1)


class TestIntegration:
    def test_jacobi_conserved(self):
        s0 = np.array([0.5, 0.0, 0.0, 0.0, 0.8, 0.0])
        c0 = dy.jacobi_constant(s0, MU)
        t, states = dy.integrate(s0, MU, 2.0, tol=1e-12)
        cs = np.array([dy.jacobi_constant(s, MU) for s in states])
        assert np.abs(cs - c0).max() < 1e-10

    def test_integrate_endpoint_time(self):
        s0 = np.array([0.5, 0.0, 0.0, 0.0, 0.8, 0.0])
        t, states = dy.integrate(s0, MU, 1.5, tol=1e-12)
        assert t[-1] == pytest.approx(1.5)
        assert states.shape[1] == 6

    def test_planar_stays_planar(self):
        s0 = np.array([0.5, 0.1, 0.0, 0.1, 0.6, 0.0])
        _, states = dy.integrate(s0, MU, 2.0, tol=1e-12)
        assert np.abs(states[:, 2]).max() == 0.0
        assert np.abs(states[:, 5]).max() == 0.0


class TestPeriodicOrbits:
    def test_lyapunov_l1_closes(self):
        orb = dy.find_periodic_orbit(MU, "LyapunovL1", amplitude=0.02)
        _, states = dy.integrate(orb.initial_state, MU, orb.period, tol=1e-12)
        assert np.abs(states[-1] - orb.initial_state).max() < 1e-8

    def test_lyapunov_is_planar(self):
        orb = dy.find_periodic_orbit(MU, "LyapunovL1", amplitude=0.02)
        assert orb.initial_state[2] == 0.0
        assert orb.initial_state[5] == 0.0

    def test_halo_l1_closes(self):
        orb = dy.find_periodic_orbit(MU, "HaloL1", amplitude=0.05)
        _, states = dy.integrate(orb.initial_state, MU, orb.period, tol=1e-12)
        assert np.abs(states[-1] - orb.initial_state).max() < 1e-7
        assert abs(orb.initial_state[2]) > 1e-4    # genuinely out of plane

    def test_c_target_continuation(self):
        orb = dy.find_periodic_orbit(MU, "LyapunovL1", amplitude=0.02)
        c_want = orb.jacobi - 0.005
        orb2 = dy.find_periodic_orbit(MU, "LyapunovL1", amplitude=0.02,
                                      C_target=c_want)
        assert orb2.jacobi == pytest.approx(c_want, abs=1e-8)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            dy.find_periodic_orbit(MU, "halo-l1")

    def test_sample_orbit_shape(self):
        orb = dy.find_periodic_orbit(MU, "LyapunovL1", amplitude=0.02)
        pts = dy.sample_orbit(orb, 64)
        assert pts.shape == (64, 3)
        cs = [dy.jacobi_constant(s, MU)
              for s in dy.propagate_orbit(orb, 64)[1]]
        assert np.ptp(cs) < 1e-10


class TestCsv:
    def test_trajectory_round_trip(self):
        s0 = np.array([0.5, 0.0, 0.0, 0.0, 0.8, 0.0])
        t, states = dy.integrate(s0, MU, 1.0, tol=1e-10)
        t2, states2 = dy.trajectory_from_csv(dy.trajectory_to_csv(t, states))
        assert np.allclose(t, t2, rtol=1e-15)
        assert np.allclose(states, states2, rtol=1e-15)

    def test_catalog_round_trip_sorted(self):
        orbits = [dy.find_periodic_orbit(MU, "LyapunovL1", amplitude=a)
                  for a in (0.03, 0.01, 0.02)]
        text = dy.catalog_to_csv(orbits)
        back = dy.catalog_from_csv(text, MU)
        js = [o.jacobi for o in back]
        assert js == sorted(js)
        assert len(back) == 3

    def test_catalog_bad_header(self):
        with pytest.raises(ValueError):
            dy.catalog_from_csv("a,b,c\n1,2,3\n", MU)
