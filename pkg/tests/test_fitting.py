import numpy as np
import pytest

from cr3bp_nav import fitting as fi


def circle_points(n=64, r=2.0):
    th = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def quartic_curve_points(model, n=80, seed=0):
    """Points on g = 1 found by solving for y along random x values."""
    rng = np.random.default_rng(seed)
    exps = fi.g_exponents(model.kind)
    pts = []
    while len(pts) < n:
        x = rng.uniform(-1.5, 1.5)
        coeffs = np.zeros(max(j for _, j in exps) + 1)
        for (i, j), a in zip(exps, model.alpha):
            coeffs[j] += a * x ** i
        coeffs[0] -= 1.0
        dcoeffs = coeffs[1:] * np.arange(1, len(coeffs))
        for r in np.roots(coeffs[::-1]):
            # skip near-tangent roots where membership is ill conditioned
            if abs(r.imag) < 1e-12 and abs(r.real) < 3.0 and abs(
                    np.polyval(dcoeffs[::-1], r.real)) > 1e-2:
                y = r.real
                for _ in range(3):   # polish to machine precision
                    y -= np.polyval(coeffs[::-1], y) / np.polyval(
                        dcoeffs[::-1], y)
                pts.append((x, y))
    return np.array(pts[:n])


class TestBasis:
    def test_quartic_exponents(self):
        assert fi.g_exponents("LyapunovQuartic") == (
            (1, 0), (2, 0), (3, 0), (4, 0), (0, 2), (1, 2), (2, 2), (0, 4))

    def test_sextic_counts(self):
        assert len(fi.g_exponents("LyapunovSextic")) == 15
        assert len(fi.h_exponents("HaloSextic")) == 16

    def test_h_adds_constant(self):
        assert fi.h_exponents("HaloQuartic")[0] == (0, 0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            fi.g_exponents("Cubic")


class TestHaloFrame:
    def test_frame_is_orthonormal_involution(self):
        rng = np.random.default_rng(1)
        p = rng.standard_normal((30, 3))
        back = fi.halo_frame_inverse(fi.halo_frame(p))
        assert np.allclose(back, p, atol=1e-14)

    def test_v_axis_is_y(self):
        assert np.allclose(fi.halo_frame(np.array([0.0, 1.0, 0.0])),
                           [0.0, 1.0, 0.0])


class TestSingleOrbitFit:
    def test_circle_recovered(self):
        pts = circle_points()
        model, report = fi.fit_single_orbit(pts, "LyapunovQuartic")
        # rank-deficient exact data resolves to the lowest-degree
        # representation: x^2/4 + y^2/4 = 1
        want = np.zeros(8)
        want[1] = 0.25
        want[4] = 0.25
        assert np.allclose(model.alpha, want, atol=1e-8)
        assert report.rmse < 1e-12
        assert np.abs(model.g_value(circle_points(37)) - 1.0).max() < 1e-10

    def test_random_quartic_recovered(self):
        rng = np.random.default_rng(7)
        alpha = rng.standard_normal(8)
        truth = fi.OrbitModel("LyapunovQuartic", alpha)
        pts = quartic_curve_points(truth, n=120, seed=3)
        model, report = fi.fit_single_orbit(pts, "LyapunovQuartic")
        assert report.rmse < 1e-9
        assert np.abs(model.g_value(pts) - 1.0).max() < 1e-8

    def test_normal_equation_orthogonality(self):
        pts = quartic_curve_points(
            fi.OrbitModel("LyapunovQuartic",
                          np.random.default_rng(9).standard_normal(8)),
            n=100, seed=4)
        pts += np.random.default_rng(5).normal(0.0, 1e-3, pts.shape)
        model, _ = fi.fit_single_orbit(pts, "LyapunovQuartic")
        A = fi.basis_matrix(fi.g_exponents("LyapunovQuartic"), pts)
        resid = A @ model.alpha - 1.0
        assert np.abs(A.T @ resid).max() < 1e-9

    def test_halo_needs_3d(self):
        with pytest.raises(ValueError):
            fi.fit_single_orbit(circle_points(), "HaloQuartic")


class TestGeometricDistance:
    def test_circle_distance_exact(self):
        model = fi.OrbitModel("LyapunovQuartic",
                              [0.0, 0.25, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0])
        assert fi.geometric_distance(model, (3.0, 0.0)) == pytest.approx(
            1.0, abs=1e-6)
        assert fi.geometric_distance(model, (0.0, 1.0)) == pytest.approx(
            1.0, abs=1e-6)

    def test_on_curve_distance_zero(self):
        model = fi.OrbitModel("LyapunovQuartic",
                              [0.0, 0.25, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0])
        pts = circle_points(16)
        assert fi.mean_geometric_distance(model, pts) < 1e-10

    def test_refine_monotone(self):
        rng = np.random.default_rng(11)
        truth = fi.OrbitModel("LyapunovQuartic",
                              [0.0, 0.25, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0])
        pts = circle_points(48)
        start = fi.OrbitModel(
            "LyapunovQuartic",
            np.asarray(truth.alpha) + rng.normal(0.0, 0.02, 8))
        f0 = fi.mean_geometric_distance(start, pts)
        refined, report = fi.refine_geometric(start, pts, max_iters=25)
        assert report.mean_geometric_distance <= f0 + 1e-15


class TestFamilyFit:
    def synthetic_family(self, seed=0):
        rng = np.random.default_rng(seed)
        alpha_polys = rng.standard_normal((8, 4))
        return fi.FamilyModel("LyapunovQuartic", alpha_polys, None,
                              (-1.0, 1.0))

    def test_two_stage_recovers_cubic_family(self):
        truth = self.synthetic_family(2)
        orbits = []
        for c in np.linspace(-1.0, 1.0, 9):
            m = truth.model_at(c)
            orbits.append((c, quartic_curve_points(m, n=60, seed=int(10 * c) + 20)))
        fit = fi.fit_family_two_stage(orbits, "LyapunovQuartic", c_degree=3)
        assert np.abs(fit.alpha_polys - truth.alpha_polys).max() < 1e-8

    def test_one_stage_recovers_cubic_family(self):
        truth = self.synthetic_family(3)
        pairs = []
        for c in np.linspace(-1.0, 1.0, 9):
            for p in quartic_curve_points(truth.model_at(c), n=40,
                                          seed=int(10 * c) + 50):
                pairs.append((c, p))
        fit = fi.fit_family_one_stage(pairs, "LyapunovQuartic", c_degree=3)
        assert np.abs(fit.alpha_polys - truth.alpha_polys).max() < 1e-8

    def test_two_stage_needs_enough_orbits(self):
        orbits = [(0.0, circle_points()), (0.5, circle_points())]
        with pytest.raises(ValueError):
            fi.fit_family_two_stage(orbits, "LyapunovQuartic", c_degree=3)

    def test_partition_c_range_balanced(self):
        catalog = [(c, None) for c in np.linspace(0.0, 1.0, 10)]
        ranges = fi.partition_c_range(catalog, 3)
        assert len(ranges) == 3
        assert ranges[0][0] == 0.0 and ranges[-1][1] == 1.0
        for (a, b), (c, d) in zip(ranges, ranges[1:]):
            assert b == c


class TestModelJson:
    def test_orbit_model_round_trip(self):
        model = fi.OrbitModel("HaloQuartic", np.arange(8, dtype=float),
                              np.arange(9, dtype=float))
        back = fi.model_from_json(fi.model_to_json(model))
        assert back.kind == model.kind
        assert np.array_equal(back.alpha, model.alpha)
        assert np.array_equal(back.beta, model.beta)

    def test_family_model_round_trip(self):
        rng = np.random.default_rng(4)
        fam = fi.FamilyModel("HaloSextic", rng.standard_normal((15, 4)),
                             rng.standard_normal((16, 4)), (3.0, 3.2))
        back = fi.model_from_json(fi.model_to_json(fam))
        assert isinstance(back, fi.FamilyModel)
        assert np.array_equal(back.alpha_polys, fam.alpha_polys)
        assert np.array_equal(back.beta_polys, fam.beta_polys)
        assert back.c_range == fam.c_range
