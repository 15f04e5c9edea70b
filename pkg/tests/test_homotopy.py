import numpy as np
import pytest

from cr3bp_nav import homotopy as ho
from cr3bp_nav import problems as pr
from cr3bp_nav.polysys import Polynomial, PolynomialSystem
from conftest import plant_friendly_family


def var(name, vs):
    return Polynomial.variable(name, vs)


def univariate(*coeff_pairs):
    """System of one polynomial in x from (exponent, coefficient) pairs."""
    terms = {(e,): c for e, c in coeff_pairs}
    return PolynomialSystem([Polynomial(("x",), terms)], ("x",), ())


def random_dense_system(n_vars, degree, seed):
    rng = np.random.default_rng(seed)
    vs = tuple(f"x{i}" for i in range(n_vars))
    eqs = []
    for _ in range(n_vars):
        terms = {}
        for exps in np.ndindex(*([degree + 1] * n_vars)):
            if sum(exps) <= degree:
                terms[exps] = complex(rng.standard_normal(),
                                      rng.standard_normal())
        eqs.append(Polynomial(vs, terms))
    return PolynomialSystem(eqs, vs, ())


def points_of(solutions):
    return [np.asarray(s.point) for s in solutions]


def match_sets(A, B, tol=1e-8):
    if len(A) != len(B):
        return False
    used = set()
    for a in A:
        hit = None
        for i, b in enumerate(B):
            if i not in used and np.abs(a - b).max() < tol:
                hit = i
                break
        if hit is None:
            return False
        used.add(hit)
    return True


class TestTotalDegreeStart:
    def test_two_quartics(self):
        sys = random_dense_system(2, 4, 0)
        start, pts = ho.total_degree_start(sys)
        assert len(pts) == 16
        for p in pts:
            assert np.abs(start.evaluate(p)).max() < 1e-13

    def test_m2s_degrees(self):
        rng = np.random.default_rng(1)
        fam = pr.random_family_model("LyapunovQuartic", rng)
        spec = pr.build_problem("M2S_SameOrbit", fam)
        inst = pr.random_generic_instance(spec, 0)
        sys = inst.instantiated()
        assert sorted(eq.total_degree() for eq in sys.equations) \
            == [2, 2, 2, 7, 7]
        _, pts = ho.total_degree_start(sys)
        assert len(pts) == 392

    def test_rejects_parametric(self):
        vs = ("x", "p")
        sys = PolynomialSystem([var("x", vs) ** 2 - var("p", vs)],
                               ("x",), ("p",))
        with pytest.raises(ValueError):
            ho.total_degree_start(sys)

    def test_rejects_constant_equation(self):
        sys = univariate((0, 1.0))
        with pytest.raises(ValueError):
            ho.total_degree_start(sys)


class TestSolveTotalDegree:
    def test_univariate_shifted_roots(self):
        result = ho.solve_total_degree(univariate((2, 1.0), (0, -4.0)))
        assert result.count == 2
        roots = sorted(s.point[0].real for s in result.finite_nonsingular())
        assert roots == pytest.approx([-2.0, 2.0], abs=1e-10)
        assert all(s.is_real for s in result.finite_nonsingular())

    def test_linear_target(self):
        result = ho.solve_total_degree(univariate((1, 3.0), (0, 6.0)))
        assert result.count == 1
        assert result.finite_nonsingular()[0].point[0] == pytest.approx(
            -2.0, abs=1e-12)

    def test_generic_quartic_pair_hits_bezout(self):
        for seed in (0, 1):
            sys = random_dense_system(2, 4, seed)
            result = ho.solve_total_degree(sys, seed=seed)
            assert result.count == 16
            for s in result.finite_nonsingular():
                assert np.abs(sys.evaluate(s.point)).max() < 1e-8

    def test_solutions_at_infinity_detected(self):
        # x^2 = 1, x*y = 1: two affine roots, the rest of the Bezout
        # count escapes to infinity
        vs = ("x", "y")
        x, y = var("x", vs), var("y", vs)
        sys = PolynomialSystem([x ** 2 - 1.0, x * y - 1.0], vs, ())
        result = ho.solve_total_degree(sys)
        assert result.count == 2
        pts = sorted(points_of(result.finite_nonsingular()),
                     key=lambda p: p[0].real)
        assert np.allclose(pts[0], [-1.0, -1.0], atol=1e-10)
        assert np.allclose(pts[1], [1.0, 1.0], atol=1e-10)
        # the two remaining Bezout paths leave the affine chart
        assert result.paths_total == 4
        assert result.paths_failed == 0

    def test_conjugation_symmetry(self):
        rng = np.random.default_rng(3)
        vs = ("x", "y")
        eqs = []
        for _ in range(2):
            terms = {e: float(rng.standard_normal())
                     for e in np.ndindex(4, 4) if sum(e) <= 3}
            eqs.append(Polynomial(vs, terms))
        result = ho.solve_total_degree(PolynomialSystem(eqs, vs, ()))
        pts = points_of(result.finite_nonsingular())
        assert match_sets(pts, [np.conj(p) for p in pts])

    def test_seeded_determinism(self):
        sys = random_dense_system(2, 3, 5)
        r1 = ho.solve_total_degree(sys, seed=7)
        r2 = ho.solve_total_degree(sys, seed=7)
        assert r1.count == r2.count
        assert r1.gamma == r2.gamma
        assert match_sets(points_of(r1.finite_nonsingular()),
                          points_of(r2.finite_nonsingular()), tol=1e-10)


class TestNewtonRefine:
    def test_fixed_point(self):
        sys = univariate((2, 1.0), (0, -4.0))
        x, res = ho.newton_refine(sys, np.array([2.0 + 0.0j]))
        assert abs(x[0] - 2.0) < 1e-14
        assert res < 1e-12

    def test_perturbed_recovery(self):
        sys = random_dense_system(2, 3, 11)
        result = ho.solve_total_degree(sys)
        root = result.finite_nonsingular()[0].point
        rng = np.random.default_rng(0)
        noisy = root + 1e-4 * rng.standard_normal(2)
        x, res = ho.newton_refine(sys, noisy)
        assert res < 1e-12
        assert np.abs(x - root).max() < 1e-10

    def test_singular_jacobian(self):
        vs = ("x", "y")
        x, y = var("x", vs), var("y", vs)
        sys = PolynomialSystem([x + y, 2.0 * x + 2.0 * y - 1e-6], vs, ())
        with pytest.raises(ho.SingularJacobianError):
            ho.newton_refine(sys, np.array([0.0 + 0.0j, 0.0 + 0.0j]))


@pytest.fixture(scope="module")
def los_spec():
    return pr.build_problem("TwoS_RangeLOS",
                            plant_friendly_family("LyapunovQuartic", 1))


@pytest.fixture(scope="module")
def los_start(los_spec):
    inst = pr.random_generic_instance(los_spec, 0)
    result = ho.solve_total_degree(inst.instantiated(), seed=0)
    return inst, result


class TestParameterHomotopy:
    def test_identity_deformation(self, los_spec, los_start):
        inst, result = los_start
        moved = ho.parameter_homotopy(los_spec, inst,
                                      result.finite_nonsingular(), inst)
        finite = [s for s in moved
                  if s.classification == ho.FINITE_NONSINGULAR]
        assert match_sets(points_of(finite),
                          points_of(result.finite_nonsingular()), tol=1e-10)

    def test_gamma_invariance(self, los_spec, los_start):
        inst, result = los_start
        target = pr.random_generic_instance(los_spec, 5)
        sets = []
        for gamma in (np.exp(0.7j), np.exp(2.1j)):
            moved = ho.parameter_homotopy(los_spec, inst,
                                          result.finite_nonsingular(),
                                          target, gamma=gamma)
            sets.append([s.point for s in moved
                         if s.classification == ho.FINITE_NONSINGULAR])
        assert match_sets(sets[0], sets[1], tol=1e-8)

    def test_planted_truth_recovered(self, los_spec, los_start):
        inst, result = los_start
        planted = pr.plant_instance(los_spec, np.random.default_rng(2),
                                    x_range=(-0.9, 0.9))
        moved = ho.parameter_homotopy(los_spec, inst,
                                      result.finite_nonsingular(), planted)
        truth = np.array([planted.truth[u]
                          for u in los_spec.system.unknowns], dtype=complex)
        reals = [s.point for s in moved
                 if s.classification == ho.FINITE_NONSINGULAR and s.is_real]
        assert any(np.abs(p - truth).max() < 1e-8 for p in reals)


class TestMonodromy:
    def test_reaches_full_fiber_from_plant(self, los_spec):
        planted = pr.plant_instance(los_spec, np.random.default_rng(4),
                                    x_range=(-0.9, 0.9))
        truth = np.array([planted.truth[u]
                          for u in los_spec.system.unknowns], dtype=complex)
        pool = ho.monodromy_populate(los_spec, planted, [truth],
                                     max_loops=10, seed=0)
        direct = ho.solve_total_degree(planted.instantiated(), seed=0)
        assert len(pool) == direct.count == 16

    def test_bad_seed_solution_dropped(self, los_spec):
        inst = pr.random_generic_instance(los_spec, 8)
        junk = np.array([10.0 + 0j, 10.0 + 0j])
        pool = ho.monodromy_populate(los_spec, inst, [junk],
                                     max_loops=1, seed=0)
        assert pool == []


class TestManifest:
    def test_run_manifest_fields(self):
        result = ho.solve_total_degree(univariate((2, 1.0), (0, -4.0)))
        man = ho.run_manifest("demo", 0, result)
        assert man["count"] == 2
        assert man["paths_total"] == 2
        assert man["paths_failed"] == 0
        assert len(man["gamma"]) == 2

    def test_solutions_to_dicts_real_first(self):
        vs = ("x",)
        x = var("x", vs)
        sys = PolynomialSystem([x ** 2 + 1.0], vs, ())   # roots +-i
        result = ho.solve_total_degree(sys)
        dicts = ho.solutions_to_dicts(result.finite_nonsingular())
        assert len(dicts) == 2
        assert all(not d["is_real"] for d in dicts)
        sys2 = univariate((2, 1.0), (0, -9.0))
        d2 = ho.solutions_to_dicts(
            ho.solve_total_degree(sys2).finite_nonsingular())
        assert all(d["is_real"] for d in d2)
