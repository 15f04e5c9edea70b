import numpy as np
import pytest

from cr3bp_nav.polysys import (CompiledSystem, DimensionError, Polynomial,
                               PolynomialSystem, UnknownVariableError)


VARS = ("x", "y")


def p_of(terms):
    return Polynomial(VARS, terms)


class TestPolynomial:
    def test_zero_coefficients_dropped(self):
        p = p_of({(1, 0): 1.0, (0, 1): 0.0})
        assert (0, 1) not in p.terms
        assert p.total_degree() == 1

    def test_arithmetic_matches_numeric(self):
        rng = np.random.default_rng(0)
        a = p_of({(2, 0): 1.5, (0, 1): -2.0, (0, 0): 0.5})
        b = p_of({(1, 1): 3.0, (0, 0): 1.0})
        for _ in range(10):
            z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            assert (a + b).evaluate(z) == pytest.approx(
                a.evaluate(z) + b.evaluate(z))
            assert (a - b).evaluate(z) == pytest.approx(
                a.evaluate(z) - b.evaluate(z))
            assert (a * b).evaluate(z) == pytest.approx(
                a.evaluate(z) * b.evaluate(z))
            assert (a ** 3).evaluate(z) == pytest.approx(a.evaluate(z) ** 3)

    def test_scalar_operations(self):
        a = p_of({(1, 0): 2.0})
        assert (a * 3.0).evaluate([1.0, 0.0]) == pytest.approx(6.0)
        assert (a - 1.0).evaluate([1.0, 0.0]) == pytest.approx(1.0)
        assert (1.0 - a).evaluate([1.0, 0.0]) == pytest.approx(-1.0)

    def test_differentiate(self):
        p = p_of({(3, 2): 2.0, (1, 0): 5.0})
        dx = p.differentiate("x")
        assert dx.terms == {(2, 2): 6.0, (0, 0): 5.0}
        dy = p.differentiate("y")
        assert dy.terms == {(3, 1): 4.0}
        assert p.differentiate("x").differentiate("y").terms == {(2, 1): 12.0}

    def test_differentiate_unknown_variable(self):
        with pytest.raises(UnknownVariableError):
            p_of({(1, 0): 1.0}).differentiate("z")

    def test_substitute_partial(self):
        p = p_of({(2, 1): 1.0, (0, 2): 1.0})
        q = p.substitute({"x": 2.0})
        assert q.variables == ("y",)
        assert q.evaluate([3.0]) == pytest.approx(4.0 * 3.0 + 9.0)

    def test_variable_and_constant_constructors(self):
        x = Polynomial.variable("x", VARS)
        c = Polynomial.constant(VARS, 4.0)
        assert (x * x + c).evaluate([3.0, 0.0]) == pytest.approx(13.0)

    def test_exponent_length_checked(self):
        with pytest.raises(DimensionError):
            Polynomial(VARS, {(1, 0, 0): 1.0})

    def test_dict_round_trip(self):
        p = p_of({(2, 1): 1.0 + 2.0j, (0, 0): -0.5})
        q = Polynomial.from_dict(p.to_dict())
        assert q == p


class TestPolynomialSystem:
    def make_parametric(self):
        va = ("x", "y", "a")
        x, y, a = (Polynomial.variable(n, va) for n in va)
        return PolynomialSystem([x ** 2 + y ** 2 - a, x - y],
                                ("x", "y"), ("a",))

    def test_square_and_variables(self):
        sysd = self.make_parametric()
        assert sysd.is_square
        assert sysd.variables == ("x", "y", "a")

    def test_substitute_parameters(self):
        inst = self.make_parametric().substitute_parameters({"a": 2.0})
        assert inst.parameters == ()
        r = inst.evaluate([1.0, 1.0])
        assert np.allclose(r, [0.0, 0.0])

    def test_bezout_number(self):
        inst = self.make_parametric().substitute_parameters({"a": 2.0})
        assert inst.bezout_number() == 2
        va = ("x", "y")
        x, y = (Polynomial.variable(n, va) for n in va)
        quartic = PolynomialSystem([x ** 4 + y, y ** 4 + x], va, ())
        assert quartic.bezout_number() == 16

    def test_bezout_requires_instantiation(self):
        with pytest.raises(ValueError):
            self.make_parametric().bezout_number()

    def test_jacobian(self):
        inst = self.make_parametric().substitute_parameters({"a": 1.0})
        J = inst.jacobian([2.0, 3.0])
        assert np.allclose(J, [[4.0, 6.0], [1.0, -1.0]])

    def test_json_round_trip(self):
        sysd = self.make_parametric()
        back = PolynomialSystem.from_json(sysd.to_json())
        assert back.unknowns == sysd.unknowns
        assert back.parameters == sysd.parameters
        assert all(a == b for a, b in zip(back.equations, sysd.equations))


class TestCompiledSystem:
    def setup_method(self):
        va = ("x", "y")
        x, y = (Polynomial.variable(n, va) for n in va)
        self.sysd = PolynomialSystem(
            [x ** 3 * y - 2.0 * y ** 2 + 1.0, x * y + x - 5.0], va, ())
        self.comp = CompiledSystem(self.sysd)

    def test_eval_matches_reference(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((20, 2)) + 1j * rng.standard_normal((20, 2))
        R = self.comp.eval_batch(X)
        for xi, ri in zip(X, R):
            assert np.allclose(ri, self.sysd.evaluate(xi))

    def test_jac_matches_reference(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((10, 2)) + 1j * rng.standard_normal((10, 2))
        J = self.comp.jac_batch(X)
        for xi, Ji in zip(X, J):
            assert np.allclose(Ji, self.sysd.jacobian(xi))

    def test_one_point_wrappers(self):
        x = np.array([0.3 + 0.1j, -1.2j])
        assert np.allclose(self.comp.eval_one(x), self.sysd.evaluate(x))
        assert np.allclose(self.comp.jac_one(x), self.sysd.jacobian(x))

    def test_degrees(self):
        assert list(self.comp.degrees) == [4, 2]

    def test_mag_batch_bounds_residual(self):
        # the term-magnitude sum dominates |F| at every point
        rng = np.random.default_rng(3)
        X = rng.standard_normal((50, 2)) + 1j * rng.standard_normal((50, 2))
        R = np.abs(self.comp.eval_batch(X))
        M = self.comp.mag_batch(X)
        assert (R <= M + 1e-12).all()
