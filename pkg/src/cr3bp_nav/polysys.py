"""Sparse multivariate polynomials with complex coefficients.

Shared representation for the navigation problem builders and the
homotopy continuation solver.  Terms are stored as a map from exponent
tuples to complex coefficients; exponent vectors are dense over an
ordered tuple of variable names.
"""

from __future__ import annotations

import json
from typing import Iterable, Mapping, Sequence

import numpy as np

# Coefficients below this magnitude are treated as exact zeros.
ZERO_COEFF = 1e-300


class DimensionError(ValueError):
    """Point or exponent length does not match the variable count."""


class UnknownVariableError(ValueError):
    """A referenced variable is not among the polynomial's variables."""


class Polynomial:
    """Sparse polynomial over an ordered list of variable names."""

    __slots__ = ("variables", "terms")

    def __init__(self, variables: Sequence[str],
                 terms: Mapping[tuple, complex] | None = None):
        self.variables = tuple(variables)
        nv = len(self.variables)
        clean: dict[tuple, complex] = {}
        if terms:
            for exps, coeff in terms.items():
                exps = tuple(int(e) for e in exps)
                if len(exps) != nv:
                    raise DimensionError(
                        f"exponent tuple {exps} has length {len(exps)}, "
                        f"expected {nv}")
                if any(e < 0 for e in exps):
                    raise ValueError(f"negative exponent in {exps}")
                c = complex(coeff)
                if abs(c) > ZERO_COEFF:
                    clean[exps] = clean.get(exps, 0.0) + c
            clean = {e: c for e, c in clean.items() if abs(c) > ZERO_COEFF}
        self.terms = clean

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, variables: Sequence[str]) -> "Polynomial":
        return cls(variables)

    @classmethod
    def constant(cls, variables: Sequence[str], value: complex) -> "Polynomial":
        return cls(variables, {(0,) * len(variables): value})

    @classmethod
    def variable(cls, name: str, variables: Sequence[str]) -> "Polynomial":
        variables = tuple(variables)
        if name not in variables:
            raise UnknownVariableError(f"variable {name!r} not in {variables}")
        exps = tuple(1 if v == name else 0 for v in variables)
        return cls(variables, {exps: 1.0})

    # -- arithmetic ---------------------------------------------------

    def _check_same(self, other: "Polynomial") -> None:
        if self.variables != other.variables:
            raise DimensionError(
                f"variable mismatch: {self.variables} vs {other.variables}")

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = Polynomial.constant(self.variables, other)
        self._check_same(other)
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, 0.0) + c
        return Polynomial(self.variables, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.variables,
                          {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float, complex)):
            other = Polynomial.constant(self.variables, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return Polynomial(self.variables,
                              {e: c * other for e, c in self.terms.items()})
        self._check_same(other)
        terms: dict[tuple, complex] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0.0) + c1 * c2
        return Polynomial(self.variables, terms)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        out = Polynomial.constant(self.variables, 1.0)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        return (isinstance(other, Polynomial)
                and self.variables == other.variables
                and self.terms == other.terms)

    def __repr__(self):
        if not self.terms:
            return "Polynomial(0)"
        parts = []
        for exps, c in sorted(self.terms.items()):
            mono = "*".join(f"{v}^{e}" for v, e in zip(self.variables, exps)
                            if e)
            parts.append(f"({c:.6g})" + ("*" + mono if mono else ""))
        return "Polynomial(" + " + ".join(parts) + ")"

    # -- queries ------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def total_degree(self) -> int:
        """Max total degree over stored terms (0 for the zero polynomial)."""
        if not self.terms:
            return 0
        return max(sum(e) for e in self.terms)

    def evaluate(self, point: Sequence[complex]) -> complex:
        point = np.asarray(point, dtype=complex)
        if point.shape != (len(self.variables),):
            raise DimensionError(
                f"point length {point.shape} != {len(self.variables)} vars")
        total = 0.0 + 0.0j
        for exps, c in self.terms.items():
            m = c
            for p, e in zip(point, exps):
                if e:
                    m = m * p ** e
            total += m
        return complex(total)

    def differentiate(self, var: str) -> "Polynomial":
        """Formal partial derivative with respect to ``var``."""
        try:
            idx = self.variables.index(var)
        except ValueError:
            raise UnknownVariableError(
                f"variable {var!r} not in {self.variables}") from None
        terms: dict[tuple, complex] = {}
        for exps, c in self.terms.items():
            e = exps[idx]
            if e == 0:
                continue
            new = list(exps)
            new[idx] = e - 1
            terms[tuple(new)] = terms.get(tuple(new), 0.0) + c * e
        return Polynomial(self.variables, terms)

    def substitute(self, assignment: Mapping[str, complex]) -> "Polynomial":
        """Plug in values for a subset of variables.

        Returns a polynomial in the remaining variables (in their
        original order).  Substituting everything yields a constant.
        """
        for name in assignment:
            if name not in self.variables:
                raise UnknownVariableError(
                    f"variable {name!r} not in {self.variables}")
        keep = [i for i, v in enumerate(self.variables)
                if v not in assignment]
        new_vars = tuple(self.variables[i] for i in keep)
        terms: dict[tuple, complex] = {}
        for exps, c in self.terms.items():
            val = c
            for i, v in enumerate(self.variables):
                if v in assignment and exps[i]:
                    val = val * complex(assignment[v]) ** exps[i]
            new_exps = tuple(exps[i] for i in keep)
            terms[new_exps] = terms.get(new_exps, 0.0) + val
        return Polynomial(new_vars, terms)

    def with_variables(self, variables: Sequence[str]) -> "Polynomial":
        """Re-embed into a larger/reordered variable list."""
        variables = tuple(variables)
        index = {}
        for v in self.variables:
            if v not in variables:
                raise UnknownVariableError(
                    f"variable {v!r} missing from target list {variables}")
            index[v] = variables.index(v)
        terms = {}
        for exps, c in self.terms.items():
            new = [0] * len(variables)
            for v, e in zip(self.variables, exps):
                new[index[v]] = e
            terms[tuple(new)] = terms.get(tuple(new), 0.0) + c
        return Polynomial(variables, terms)

    # -- serialization ------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "variables": list(self.variables),
            "terms": [{"exps": list(e), "re": c.real, "im": c.imag}
                      for e, c in sorted(self.terms.items())],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Polynomial":
        terms = {tuple(t["exps"]): complex(t["re"], t["im"])
                 for t in data["terms"]}
        return cls(data["variables"], terms)


class PolynomialSystem:
    """Ordered equations over unknowns and parameters.

    Every equation must live over the ambient variables
    ``unknowns + parameters`` (in that order).
    """

    def __init__(self, equations: Iterable[Polynomial],
                 unknowns: Sequence[str],
                 parameters: Sequence[str] = ()):
        self.unknowns = tuple(unknowns)
        self.parameters = tuple(parameters)
        if set(self.unknowns) & set(self.parameters):
            raise ValueError("unknowns and parameters overlap")
        ambient = self.unknowns + self.parameters
        eqs = []
        for eq in equations:
            if eq.variables != ambient:
                eq = eq.with_variables(ambient)
            eqs.append(eq)
        self.equations = tuple(eqs)

    @property
    def variables(self) -> tuple:
        return self.unknowns + self.parameters

    @property
    def is_square(self) -> bool:
        return len(self.equations) == len(self.unknowns)

    def substitute_parameters(
            self, values: Mapping[str, complex]) -> "PolynomialSystem":
        """Instantiate all parameters, leaving a system in the unknowns."""
        missing = [p for p in self.parameters if p not in values]
        if missing:
            raise ValueError(f"missing parameter values: {missing}")
        assignment = {p: values[p] for p in self.parameters}
        eqs = [eq.substitute(assignment) for eq in self.equations]
        return PolynomialSystem(eqs, self.unknowns, ())

    def evaluate(self, point: Sequence[complex]) -> np.ndarray:
        """Evaluate all equations at a point over the ambient variables."""
        return np.array([eq.evaluate(point) for eq in self.equations],
                        dtype=complex)

    def jacobian(self, point: Sequence[complex]) -> np.ndarray:
        """Jacobian with respect to the unknowns at a full ambient point."""
        J = np.empty((len(self.equations), len(self.unknowns)), dtype=complex)
        for i, eq in enumerate(self.equations):
            for j, u in enumerate(self.unknowns):
                J[i, j] = eq.differentiate(u).evaluate(point)
        return J

    def bezout_number(self) -> int:
        """Product of total degrees; upper bound on isolated root count."""
        if not self.equations:
            raise ValueError("empty system")
        if self.parameters:
            raise ValueError("substitute parameters before computing the "
                             "Bezout number")
        prod = 1
        for eq in self.equations:
            prod *= eq.total_degree()
        return prod

    def to_dict(self) -> dict:
        return {
            "equations": [eq.to_dict() for eq in self.equations],
            "unknowns": list(self.unknowns),
            "parameters": list(self.parameters),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PolynomialSystem":
        eqs = [Polynomial.from_dict(d) for d in data["equations"]]
        return cls(eqs, data["unknowns"], data.get("parameters", ()))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PolynomialSystem":
        return cls.from_dict(json.loads(text))


class CompiledSystem:
    """Array form of a parameter-free square system for batched evaluation.

    Exponents of all equations are concatenated into one matrix so a
    batch of points can be evaluated with a handful of numpy gathers.
    """

    def __init__(self, system: PolynomialSystem):
        if system.parameters:
            raise ValueError("compile only parameter-free systems")
        self.n_vars = len(system.unknowns)
        self.n_eqs = len(system.equations)
        self.unknowns = system.unknowns
        exps = []
        coeffs = []
        slices = []
        start = 0
        for eq in system.equations:
            items = sorted(eq.terms.items())
            if not items:
                items = [((0,) * self.n_vars, 0.0)]
            for e, c in items:
                exps.append(e)
                coeffs.append(c)
            slices.append((start, start + len(items)))
            start += len(items)
        self.exps = np.array(exps, dtype=np.int64)          # (T, nv)
        self.coeffs = np.array(coeffs, dtype=complex)       # (T,)
        self.slices = slices
        self.max_deg = int(self.exps.max(initial=0))
        self.degrees = [eq.total_degree() for eq in system.equations]

    def _powers(self, X: np.ndarray) -> np.ndarray:
        """Powers table, shape (N, nv, max_deg+1)."""
        N = X.shape[0]
        P = np.empty((N, self.n_vars, self.max_deg + 1), dtype=complex)
        P[:, :, 0] = 1.0
        for k in range(1, self.max_deg + 1):
            P[:, :, k] = P[:, :, k - 1] * X
        return P

    def _monomials(self, P: np.ndarray, exps: np.ndarray) -> np.ndarray:
        """Monomial values (N, T) from a powers table."""
        N = P.shape[0]
        M = np.ones((N, exps.shape[0]), dtype=complex)
        for v in range(self.n_vars):
            M *= P[:, v, :][:, exps[:, v]]
        return M

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        """Evaluate at a batch of points.  X: (N, nv) -> (N, n_eqs)."""
        X = np.atleast_2d(np.asarray(X, dtype=complex))
        P = self._powers(X)
        M = self._monomials(P, self.exps)
        out = np.empty((X.shape[0], self.n_eqs), dtype=complex)
        for i, (a, b) in enumerate(self.slices):
            out[:, i] = M[:, a:b] @ self.coeffs[a:b]
        return out

    def jac_batch(self, X: np.ndarray) -> np.ndarray:
        """Batched Jacobians.  X: (N, nv) -> (N, n_eqs, nv)."""
        X = np.atleast_2d(np.asarray(X, dtype=complex))
        N = X.shape[0]
        P = self._powers(X)
        J = np.zeros((N, self.n_eqs, self.n_vars), dtype=complex)
        for v in range(self.n_vars):
            ev = self.exps[:, v]
            mask = ev > 0
            if not mask.any():
                continue
            dexp = self.exps.copy()
            dexp[:, v] = np.maximum(ev - 1, 0)
            M = self._monomials(P, dexp)
            dcoef = self.coeffs * ev
            dcoef[~mask] = 0.0
            for i, (a, b) in enumerate(self.slices):
                J[:, i, v] = M[:, a:b] @ dcoef[a:b]
        return J

    def mag_batch(self, X: np.ndarray) -> np.ndarray:
        """Term-magnitude sums sum_j |c_j| |x|^a_j, the natural residual
        scale for backward-error tests.  X: (N, nv) -> (N, n_eqs)."""
        Xa = np.abs(np.atleast_2d(np.asarray(X, dtype=complex)))
        P = self._powers(Xa.astype(complex))
        M = np.abs(self._monomials(P, self.exps))
        out = np.empty((Xa.shape[0], self.n_eqs))
        ac = np.abs(self.coeffs)
        for i, (a, b) in enumerate(self.slices):
            out[:, i] = M[:, a:b] @ ac[a:b]
        return out

    def eval_one(self, x: np.ndarray) -> np.ndarray:
        return self.eval_batch(x[None, :])[0]

    def jac_one(self, x: np.ndarray) -> np.ndarray:
        return self.jac_batch(x[None, :])[0]
