"""Square parametric polynomial systems for crosslink navigation.

Each builder turns an orbit model (single-orbit or family) into a
square system whose unknowns are spacecraft states / Jacobi constants
and whose parameters are the crosslink measurements (ranges, range
rates, line-of-sight directions, mothership states).  Instances are
either planted from a known truth configuration on the model curves or
drawn generically for degree counting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dynamics import EARTH_MOON_MU
from .fitting import (FamilyModel, OrbitModel, g_exponents, h_exponents,
                      is_halo_kind)
from .polysys import Polynomial, PolynomialSystem

PROBLEM_NAMES = (
    "M2S_SameOrbit",
    "M2S_RangeRate",
    "TwoS_RangeLOS",
    "TwoS_Halo_OneUnknownC",
    "ThreeS_KnownCA_SameBD",
    "ThreeS_AllUnknownC_Halo",
    "SixS_Halo",
    "M2S_LOS_TwoInstances",
    "TwoS_HighDerivRange",
)


class ModelKindError(ValueError):
    """Builder applied to the wrong class of orbit model."""


class PlantError(RuntimeError):
    """Planting failed (degenerate geometry or truth off the model)."""


@dataclass(frozen=True)
class ProblemSpec:
    """A parametric square system plus its provenance metadata."""
    name: str
    kind: str                      # model kind the system was built from
    system: PolynomialSystem
    models: dict                   # name -> OrbitModel / FamilyModel
    mu: float = EARTH_MOON_MU
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.system.is_square:
            raise ValueError(
                f"{self.name}: {len(self.system.equations)} equations for "
                f"{len(self.system.unknowns)} unknowns")


@dataclass(frozen=True)
class ProblemInstance:
    spec: ProblemSpec
    parameter_values: dict
    provenance: dict

    def instantiated(self) -> PolynomialSystem:
        return self.spec.system.substitute_parameters(self.parameter_values)

    @property
    def truth(self) -> dict | None:
        return self.provenance.get("truth")


@dataclass(frozen=True)
class MeasurementGraph:
    """Spacecraft nodes and typed measurement edges."""
    n_nodes: int
    edges: tuple                  # ((i, j), ...) with i < j

    def __post_init__(self):
        for i, j in self.edges:
            if not (0 <= i < j < self.n_nodes):
                raise ValueError(f"bad edge ({i}, {j})")


def octahedron_graph() -> MeasurementGraph:
    """K_{2,2,2}: the 6-node, 12-edge generically isostatic graph in 3D."""
    skip = {(0, 1), (2, 3), (4, 5)}
    edges = tuple((i, j) for i in range(6) for j in range(i + 1, 6)
                  if (i, j) not in skip)
    return MeasurementGraph(6, edges)


def distance_jacobian_rank(graph: MeasurementGraph, rng) -> int:
    """Rank of the edge-length map's Jacobian at a random 3D framework."""
    P = rng.standard_normal((graph.n_nodes, 3))
    J = np.zeros((len(graph.edges), 3 * graph.n_nodes))
    for r, (i, j) in enumerate(graph.edges):
        d = P[i] - P[j]
        J[r, 3 * i:3 * i + 3] = d
        J[r, 3 * j:3 * j + 3] = -d
    return int(np.linalg.matrix_rank(J, tol=1e-9))


# -- polynomial assembly helpers --------------------------------------

def _coeff_polys(model, use_beta: bool):
    """Per-basis-function coefficient rows, constant row for OrbitModel."""
    if isinstance(model, FamilyModel):
        rows = model.beta_polys if use_beta else model.alpha_polys
        return np.asarray(rows)
    vec = model.beta if use_beta else model.alpha
    return np.asarray(vec)[:, None]


def _model_poly(model, exps, px: Polynomial, py: Polynomial,
                pc: Polynomial | None, use_beta: bool = False) -> Polynomial:
    """Sum of coeff_j(C) * px^i * py^j as a Polynomial.

    px, py (and the C polynomial pc) live over the ambient system
    variables, so LOS-style position elimination is plain composition.
    """
    rows = _coeff_polys(model, use_beta)
    if rows.shape[1] > 1 and pc is None:
        raise ModelKindError("family model requires a C variable")
    variables = px.variables
    max_i = max(i for i, _ in exps)
    max_j = max(j for _, j in exps)
    px_pow = [Polynomial.constant(variables, 1.0)]
    for _ in range(max_i):
        px_pow.append(px_pow[-1] * px)
    py_pow = [Polynomial.constant(variables, 1.0)]
    for _ in range(max_j):
        py_pow.append(py_pow[-1] * py)
    c_pow = [Polynomial.constant(variables, 1.0)]
    if pc is not None:
        for _ in range(rows.shape[1] - 1):
            c_pow.append(c_pow[-1] * pc)
    total = Polynomial.zero(variables)
    for (i, j), coeffs in zip(exps, rows):
        mono = px_pow[i] * py_pow[j]
        for k, a in enumerate(coeffs):
            if a != 0:
                total = total + mono * c_pow[min(k, len(c_pow) - 1)] * complex(a)
    return total


def g_equation(model, px, py, pc=None) -> Polynomial:
    """g(px, py, pc) - 1 (the curve constraint)."""
    return _model_poly(model, g_exponents(_kind_of(model)), px, py, pc) - 1.0


def h_equation(model, pu, pv, pw, pc=None) -> Polynomial:
    """h(pu, pv, pc) - pw (the Halo height constraint)."""
    return _model_poly(model, h_exponents(_kind_of(model)), pu, pv, pc,
                       use_beta=True) - pw


def _kind_of(model) -> str:
    return model.kind


def _var(name, variables):
    return Polynomial.variable(name, variables)


def _require_family(model, halo: bool, who: str):
    if not isinstance(model, FamilyModel):
        raise ModelKindError(f"{who} needs a FamilyModel")
    if is_halo_kind(model.kind) != halo:
        want = "Halo" if halo else "Lyapunov"
        raise ModelKindError(f"{who} needs a {want} family, got {model.kind}")


def _sq_dist2(ax, ay, bx, by):
    return (ax - bx) ** 2 + (ay - by) ** 2


# -- builders ---------------------------------------------------------

def build_m2s_same_orbit(family: FamilyModel,
                         mu: float = EARTH_MOON_MU) -> ProblemSpec:
    """Mothership + two spacecraft on one orbit with unknown C.

    Measurements: both mothership ranges and the crosslink range.
    """
    _require_family(family, halo=False, who="M2S_SameOrbit")
    unknowns = ("C", "x_A", "y_A", "x_B", "y_B")
    parameters = ("x_M", "y_M", "d_AM", "d_BM", "d_AB")
    va = unknowns + parameters
    C, xA, yA, xB, yB, xM, yM, dAM, dBM, dAB = (_var(n, va) for n in va)
    eqs = [
        g_equation(family, xA, yA, C),
        g_equation(family, xB, yB, C),
        _sq_dist2(xA, yA, xM, yM) - dAM ** 2,
        _sq_dist2(xB, yB, xM, yM) - dBM ** 2,
        _sq_dist2(xA, yA, xB, yB) - dAB ** 2,
    ]
    return ProblemSpec("M2S_SameOrbit", family.kind,
                       PolynomialSystem(eqs, unknowns, parameters),
                       {"family": family}, mu)


def _inverse_radius_equations(x, y, s1, s2, mu):
    """Defining quadrics of the auxiliary inverse radii s1, s2."""
    return [
        s1 ** 2 * ((x + mu) ** 2 + y ** 2) - 1.0,
        s2 ** 2 * ((x - (1.0 - mu)) ** 2 + y ** 2) - 1.0,
    ]


def _jacobi_equation(x, y, vx, vy, s1, s2, C, mu):
    """Polynomialized Jacobi relation using the inverse radii."""
    return (vx ** 2 + vy ** 2 - x ** 2 - y ** 2
            - 2.0 * (1.0 - mu) * s1 - 2.0 * mu * s2 + C)


def build_m2s_range_rate(family: FamilyModel,
                         mu: float = EARTH_MOON_MU) -> ProblemSpec:
    """Mothership + two spacecraft on distinct orbits; every edge
    carries range and range rate.  Velocity unknowns are tied to C
    through the Jacobi relation, polynomialized with per-spacecraft
    inverse-radius variables."""
    _require_family(family, halo=False, who="M2S_RangeRate")
    unknowns = ("C_A", "x_A", "y_A", "vx_A", "vy_A",
                "C_B", "x_B", "y_B", "vx_B", "vy_B",
                "s1_A", "s2_A", "s1_B", "s2_B")
    parameters = ("x_M", "y_M", "vx_M", "vy_M",
                  "d_MA", "d_MB", "d_AB", "rt_MA", "rt_MB", "rt_AB")
    va = unknowns + parameters
    v = {n: _var(n, va) for n in va}
    eqs = [
        g_equation(family, v["x_A"], v["y_A"], v["C_A"]),
        g_equation(family, v["x_B"], v["y_B"], v["C_B"]),
        _sq_dist2(v["x_A"], v["y_A"], v["x_M"], v["y_M"]) - v["d_MA"] ** 2,
        _sq_dist2(v["x_B"], v["y_B"], v["x_M"], v["y_M"]) - v["d_MB"] ** 2,
        _sq_dist2(v["x_A"], v["y_A"], v["x_B"], v["y_B"]) - v["d_AB"] ** 2,
        ((v["x_A"] - v["x_M"]) * (v["vx_A"] - v["vx_M"])
         + (v["y_A"] - v["y_M"]) * (v["vy_A"] - v["vy_M"])
         - v["d_MA"] * v["rt_MA"]),
        ((v["x_B"] - v["x_M"]) * (v["vx_B"] - v["vx_M"])
         + (v["y_B"] - v["y_M"]) * (v["vy_B"] - v["vy_M"])
         - v["d_MB"] * v["rt_MB"]),
        ((v["x_A"] - v["x_B"]) * (v["vx_A"] - v["vx_B"])
         + (v["y_A"] - v["y_B"]) * (v["vy_A"] - v["vy_B"])
         - v["d_AB"] * v["rt_AB"]),
        _jacobi_equation(v["x_A"], v["y_A"], v["vx_A"], v["vy_A"],
                         v["s1_A"], v["s2_A"], v["C_A"], mu),
        _jacobi_equation(v["x_B"], v["y_B"], v["vx_B"], v["vy_B"],
                         v["s1_B"], v["s2_B"], v["C_B"], mu),
        *_inverse_radius_equations(v["x_A"], v["y_A"],
                                   v["s1_A"], v["s2_A"], mu),
        *_inverse_radius_equations(v["x_B"], v["y_B"],
                                   v["s1_B"], v["s2_B"], mu),
    ]
    return ProblemSpec("M2S_RangeRate", family.kind,
                       PolynomialSystem(eqs, unknowns, parameters),
                       {"family": family}, mu)


def build_2s_range_los(model_A: OrbitModel, model_B: OrbitModel,
                       mu: float = EARTH_MOON_MU) -> ProblemSpec:
    """Two spacecraft with known Jacobi constants; the crosslink range
    and LOS direction pin B's position to A's."""
    for m, who in ((model_A, "A"), (model_B, "B")):
        if not isinstance(m, OrbitModel) or is_halo_kind(m.kind):
            raise ModelKindError(
                f"TwoS_RangeLOS needs Lyapunov OrbitModels, spacecraft {who} "
                f"got {type(m).__name__}")
    unknowns = ("x_A", "y_A")
    parameters = ("d_AB", "cos_AB", "sin_AB")
    va = unknowns + parameters
    xA, yA, dAB, cAB, sAB = (_var(n, va) for n in va)
    xB = xA - dAB * cAB
    yB = yA - dAB * sAB
    eqs = [
        g_equation(model_A, xA, yA),
        g_equation(model_B, xB, yB),
    ]
    return ProblemSpec("TwoS_RangeLOS", model_A.kind,
                       PolynomialSystem(eqs, unknowns, parameters),
                       {"model_A": model_A, "model_B": model_B}, mu)


def known_halo_model_parameters(kind: str):
    """Parameter names carrying the known-C spacecraft's fitted model."""
    g_names = tuple(f"gA_{i}" for i in range(len(g_exponents(kind))))
    h_names = tuple(f"hA_{i}" for i in range(len(h_exponents(kind))))
    return g_names, h_names


def known_halo_model_values(model_A: OrbitModel) -> dict:
    """Parameter values of the known-C model's coefficients."""
    g_names, h_names = known_halo_model_parameters(model_A.kind)
    vals = {n: float(a) for n, a in zip(g_names, model_A.alpha)}
    vals.update({n: float(b) for n, b in zip(h_names, model_A.beta)})
    return vals


def build_2s_halo_one_unknown_c(family: FamilyModel, c_A: float,
                                mu: float = EARTH_MOON_MU) -> ProblemSpec:
    """Two Halo spacecraft, C_A known and C_B unknown; range + 3D LOS
    eliminate B's position.

    The known orbit's fitted model enters as data: its g/h coefficients
    are parameters of the system, defaulting to the family evaluated at
    c_A.  Coefficient specialization to the shared family lowers the
    root count below the generic degree, so degree counting must treat
    the known model generically.
    """
    _require_family(family, halo=True, who="TwoS_Halo_OneUnknownC")
    g_names, h_names = known_halo_model_parameters(family.kind)
    unknowns = ("u_A", "v_A", "w_A", "C_B")
    parameters = ("d_AB", "n_u", "n_v", "n_w") + g_names + h_names
    va = unknowns + parameters
    uA, vA, wA, CB, dAB, nu, nv, nw = (_var(n, va) for n in va[:8])
    uB = uA - dAB * nu
    vB = vA - dAB * nv
    wB = wA - dAB * nw
    gA = sum((_var(n, va) * uA ** i * vA ** j
              for n, (i, j) in zip(g_names, g_exponents(family.kind))),
             Polynomial.zero(va))
    hA = sum((_var(n, va) * uA ** i * vA ** j
              for n, (i, j) in zip(h_names, h_exponents(family.kind))),
             Polynomial.zero(va))
    eqs = [
        gA - 1.0,
        hA - wA,
        g_equation(family, uB, vB, CB),
        h_equation(family, uB, vB, wB, CB),
    ]
    return ProblemSpec("TwoS_Halo_OneUnknownC", family.kind,
                       PolynomialSystem(eqs, unknowns, parameters),
                       {"family": family}, mu,
                       {"c_A": c_A, "model_parameters": g_names + h_names})


def build_3s_known_ca_same_bd(family: FamilyModel, c_A: float,
                              mu: float = EARTH_MOON_MU) -> ProblemSpec:
    """A on a known-C orbit; B and D share one unknown C.  A measures
    range + LOS to both, so only (x_A, y_A, C_BD) remain unknown."""
    _require_family(family, halo=False, who="ThreeS_KnownCA_SameBD")
    unknowns = ("x_A", "y_A", "C_BD")
    parameters = ("d_AB", "d_AD", "cos_AB", "sin_AB", "cos_AD", "sin_AD")
    va = unknowns + parameters
    xA, yA, CBD, dAB, dAD, cAB, sAB, cAD, sAD = (_var(n, va) for n in va)
    model_A = family.model_at(c_A)
    eqs = [
        g_equation(model_A, xA, yA),
        g_equation(family, xA - dAB * cAB, yA - dAB * sAB, CBD),
        g_equation(family, xA - dAD * cAD, yA - dAD * sAD, CBD),
    ]
    return ProblemSpec("ThreeS_KnownCA_SameBD", family.kind,
                       PolynomialSystem(eqs, unknowns, parameters),
                       {"family": family}, mu, {"c_A": c_A})


def build_3s_all_unknown_c_halo(family: FamilyModel,
                                mu: float = EARTH_MOON_MU) -> ProblemSpec:
    """Halo version of the 3S problem with every Jacobi constant
    unknown.  Each spacecraft contributes its g and h constraints, so
    the three unknown constants make the system square (6 x 6)."""
    _require_family(family, halo=True, who="ThreeS_AllUnknownC_Halo")
    unknowns = ("u_A", "v_A", "w_A", "C_A", "C_B", "C_D")
    parameters = ("d_AB", "d_AD",
                  "nAB_u", "nAB_v", "nAB_w", "nAD_u", "nAD_v", "nAD_w")
    va = unknowns + parameters
    v = {n: _var(n, va) for n in va}
    uA, vA, wA = v["u_A"], v["v_A"], v["w_A"]
    pB = (uA - v["d_AB"] * v["nAB_u"], vA - v["d_AB"] * v["nAB_v"],
          wA - v["d_AB"] * v["nAB_w"])
    pD = (uA - v["d_AD"] * v["nAD_u"], vA - v["d_AD"] * v["nAD_v"],
          wA - v["d_AD"] * v["nAD_w"])
    eqs = [
        g_equation(family, uA, vA, v["C_A"]),
        h_equation(family, uA, vA, wA, v["C_A"]),
        g_equation(family, pB[0], pB[1], v["C_B"]),
        h_equation(family, pB[0], pB[1], pB[2], v["C_B"]),
        g_equation(family, pD[0], pD[1], v["C_D"]),
        h_equation(family, pD[0], pD[1], pD[2], v["C_D"]),
    ]
    return ProblemSpec("ThreeS_AllUnknownC_Halo", family.kind,
                       PolynomialSystem(eqs, unknowns, parameters),
                       {"family": family}, mu)


def build_6s_halo(family: FamilyModel,
                  graph: MeasurementGraph | None = None,
                  mu: float = EARTH_MOON_MU,
                  rng=None) -> ProblemSpec:
    """Six Halo spacecraft, all constants unknown, tied together by a
    generically independent set of 12 crosslink ranges."""
    _require_family(family, halo=True, who="SixS_Halo")
    if graph is None:
        graph = octahedron_graph()
    if graph.n_nodes != 6 or len(graph.edges) != 12:
        raise ValueError("SixS_Halo needs a 6-node, 12-edge graph")
    rng = np.random.default_rng(0) if rng is None else rng
    if distance_jacobian_rank(graph, rng) < 12:
        raise ValueError("measurement graph edges are not generically "
                         "independent in 3D")
    unknowns = tuple(f"{c}_{i}" for i in range(6) for c in ("u", "v", "w", "C"))
    parameters = tuple(f"d_{i}{j}" for i, j in graph.edges)
    va = unknowns + parameters
    v = {n: _var(n, va) for n in va}
    eqs = []
    for i in range(6):
        eqs.append(g_equation(family, v[f"u_{i}"], v[f"v_{i}"], v[f"C_{i}"]))
        eqs.append(h_equation(family, v[f"u_{i}"], v[f"v_{i}"],
                              v[f"w_{i}"], v[f"C_{i}"]))
    for i, j in graph.edges:
        eqs.append((v[f"u_{i}"] - v[f"u_{j}"]) ** 2
                   + (v[f"v_{i}"] - v[f"v_{j}"]) ** 2
                   + (v[f"w_{i}"] - v[f"w_{j}"]) ** 2
                   - v[f"d_{i}{j}"] ** 2)
    return ProblemSpec("SixS_Halo", family.kind,
                       PolynomialSystem(eqs, unknowns, parameters),
                       {"family": family}, mu,
                       {"graph": list(graph.edges)})


def build_m2s_los_two_instances(family: FamilyModel,
                                mu: float = EARTH_MOON_MU) -> ProblemSpec:
    """Mothership measures LOS to both spacecraft at two epochs plus
    the crosslink range; the LOS rays leave only the Jacobi constants
    and the four mothership ranges unknown."""
    _require_family(family, halo=False, who="M2S_LOS_TwoInstances")
    unknowns = ("C_A", "C_B", "d1_MA", "d2_MA", "d1_MB", "d2_MB")
    parameters = ("x_M1", "y_M1", "x_M2", "y_M2",
                  "c1_A", "s1_A", "c2_A", "s2_A",
                  "c1_B", "s1_B", "c2_B", "s2_B",
                  "d1_AB", "d2_AB")
    va = unknowns + parameters
    v = {n: _var(n, va) for n in va}
    eqs = []
    pos = {}
    for t in (1, 2):
        for s in ("A", "B"):
            px = v[f"x_M{t}"] + v[f"d{t}_M{s}"] * v[f"c{t}_{s}"]
            py = v[f"y_M{t}"] + v[f"d{t}_M{s}"] * v[f"s{t}_{s}"]
            pos[(t, s)] = (px, py)
            eqs.append(g_equation(family, px, py, v[f"C_{s}"]))
    for t in (1, 2):
        (ax, ay), (bx, by) = pos[(t, "A")], pos[(t, "B")]
        eqs.append(_sq_dist2(ax, ay, bx, by) - v[f"d{t}_AB"] ** 2)
    return ProblemSpec("M2S_LOS_TwoInstances", family.kind,
                       PolynomialSystem(eqs, unknowns, parameters),
                       {"family": family}, mu)


def _flow_derivatives(vars_all, suffix: str, mu: float):
    """Time-derivative polynomials of one spacecraft's state variables.

    Inverse radii stand in for 1/r1, 1/r2 so the vector field stays
    polynomial; their own rates follow from d(1/r)/dt = -(r.v)/r^3.
    """
    x = _var(f"x_{suffix}", vars_all)
    y = _var(f"y_{suffix}", vars_all)
    vx = _var(f"vx_{suffix}", vars_all)
    vy = _var(f"vy_{suffix}", vars_all)
    s1 = _var(f"s1_{suffix}", vars_all)
    s2 = _var(f"s2_{suffix}", vars_all)
    ax = (2.0 * vy + x - (1.0 - mu) * (x + mu) * s1 ** 3
          - mu * (x - (1.0 - mu)) * s2 ** 3)
    ay = (-2.0 * vx + y - (1.0 - mu) * y * s1 ** 3 - mu * y * s2 ** 3)
    ds1 = -((x + mu) * vx + y * vy) * s1 ** 3
    ds2 = -((x - (1.0 - mu)) * vx + y * vy) * s2 ** 3
    return {f"x_{suffix}": vx, f"y_{suffix}": vy,
            f"vx_{suffix}": ax, f"vy_{suffix}": ay,
            f"s1_{suffix}": ds1, f"s2_{suffix}": ds2}


def lie_derivative(p: Polynomial, rates: Mapping[str, Polynomial]) -> Polynomial:
    """Derivative of p along a vector field given per-variable rates."""
    total = Polynomial.zero(p.variables)
    for name, rate in rates.items():
        dp = p.differentiate(name)
        if not dp.is_zero():
            total = total + dp * rate
    return total


def build_2s_highderiv_range(family: FamilyModel,
                             mu: float = EARTH_MOON_MU) -> ProblemSpec:
    """Two spacecraft, range and its first five time derivatives.

    Builder only: planted instances are checked, but solving is not a
    supported target (the algebraic degree is far too high).
    """
    _require_family(family, halo=False, who="TwoS_HighDerivRange")
    unknowns = ("C_A", "x_A", "y_A", "vx_A", "vy_A",
                "C_B", "x_B", "y_B", "vx_B", "vy_B",
                "s1_A", "s2_A", "s1_B", "s2_B")
    parameters = tuple(f"D{k}" for k in range(6))
    va = unknowns + parameters
    v = {n: _var(n, va) for n in va}
    rates = {}
    rates.update(_flow_derivatives(va, "A", mu))
    rates.update(_flow_derivatives(va, "B", mu))
    # f = squared range; f^(k) matches sum_i C(k,i) D_i D_{k-i}
    f = _sq_dist2(v["x_A"], v["y_A"], v["x_B"], v["y_B"])
    eqs = [
        g_equation(family, v["x_A"], v["y_A"], v["C_A"]),
        g_equation(family, v["x_B"], v["y_B"], v["C_B"]),
        _jacobi_equation(v["x_A"], v["y_A"], v["vx_A"], v["vy_A"],
                         v["s1_A"], v["s2_A"], v["C_A"], mu),
        _jacobi_equation(v["x_B"], v["y_B"], v["vx_B"], v["vy_B"],
                         v["s1_B"], v["s2_B"], v["C_B"], mu),
        *_inverse_radius_equations(v["x_A"], v["y_A"],
                                   v["s1_A"], v["s2_A"], mu),
        *_inverse_radius_equations(v["x_B"], v["y_B"],
                                   v["s1_B"], v["s2_B"], mu),
    ]
    fk = f
    for k in range(6):
        rhs = Polynomial.zero(va)
        for i in range(k + 1):
            rhs = rhs + math.comb(k, i) * v[f"D{i}"] * v[f"D{k - i}"]
        eqs.append(fk - rhs)
        if k < 5:
            fk = lie_derivative(fk, rates)
    return ProblemSpec("TwoS_HighDerivRange", family.kind,
                       PolynomialSystem(eqs, unknowns, parameters),
                       {"family": family}, mu)


# -- instance generation ----------------------------------------------

DEFAULT_PLANT_REGION = (0.75, 1.2)   # x-band of the L1/L2 neighborhood


def real_curve_point(model: OrbitModel, rng,
                     x_range=DEFAULT_PLANT_REGION, tries: int = 200):
    """A random real point on g(x, y) = 1 with x inside x_range."""
    exps = g_exponents(model.kind)
    max_j = max(j for _, j in exps)
    for _ in range(tries):
        x = rng.uniform(*x_range)
        coeffs = np.zeros(max_j + 1, dtype=complex)
        for a, (i, j) in zip(model.alpha, exps):
            coeffs[j] += a * x ** i
        coeffs[0] -= 1.0
        roots = np.roots(coeffs[::-1])
        real = roots[np.abs(roots.imag) < 1e-9].real
        real = real[np.abs(real) < 10.0]
        if real.size:
            y = float(rng.choice(real))
            return np.array([x, y])
    raise PlantError("no real curve point found in the plant region")


def halo_curve_point(model: OrbitModel, rng, u_range=(-0.8, 0.8),
                     tries: int = 200):
    """A random real point (u, v, w) on {g = 1, h = w}."""
    p2 = real_curve_point(model, rng, x_range=u_range, tries=tries)
    w = float(model.h_value(p2[None, :])[0])
    return np.array([p2[0], p2[1], w])


def _check_plant(spec: ProblemSpec, params: dict, truth: dict,
                 tol: float) -> None:
    point = [truth[u] for u in spec.system.unknowns] \
        + [params[p] for p in spec.system.parameters]
    res = np.abs(spec.system.evaluate(point))
    if res.max() > tol:
        raise PlantError(
            f"{spec.name}: planted truth violates the equations "
            f"(max residual {res.max():.3e} > {tol:.0e})")


def _unit2(delta):
    d = float(np.linalg.norm(delta))
    if d < 1e-8:
        raise PlantError("degenerate plant: coincident positions")
    return d, delta / d


def _c_in_range(family: FamilyModel, rng, margin=0.15):
    lo, hi = family.c_range
    pad = margin * (hi - lo)
    return float(rng.uniform(lo + pad, hi - pad))


def plant_instance(spec: ProblemSpec, rng, truth_states=None,
                   x_range=DEFAULT_PLANT_REGION,
                   tol: float = 1e-8) -> ProblemInstance:
    """Build an instance from a known truth on the model curves.

    truth_states is only needed for the dynamics-coupled problems
    (M2S_RangeRate, TwoS_HighDerivRange): a pair of 6-state vectors
    from real trajectories, one per spacecraft.
    """
    name = spec.name
    fam = spec.models.get("family")
    if name == "M2S_SameOrbit":
        c = _c_in_range(fam, rng)
        m = fam.model_at(c)
        pA = real_curve_point(m, rng, x_range)
        pB = real_curve_point(m, rng, x_range)
        pM = np.array([rng.uniform(*x_range), rng.uniform(-0.2, 0.2)])
        dAM, _ = _unit2(pA - pM)
        dBM, _ = _unit2(pB - pM)
        dAB, _ = _unit2(pA - pB)
        params = {"x_M": pM[0], "y_M": pM[1],
                  "d_AM": dAM, "d_BM": dBM, "d_AB": dAB}
        truth = {"C": c, "x_A": pA[0], "y_A": pA[1],
                 "x_B": pB[0], "y_B": pB[1]}
    elif name == "TwoS_RangeLOS":
        mA, mB = spec.models["model_A"], spec.models["model_B"]
        pA = real_curve_point(mA, rng, x_range)
        pB = real_curve_point(mB, rng, x_range)
        d, n = _unit2(pA - pB)         # convention: p_B = p_A - d * n
        params = {"d_AB": d, "cos_AB": n[0], "sin_AB": n[1]}
        truth = {"x_A": pA[0], "y_A": pA[1]}
    elif name == "ThreeS_KnownCA_SameBD":
        c_bd = _c_in_range(fam, rng)
        mA = fam.model_at(spec.metadata["c_A"])
        mBD = fam.model_at(c_bd)
        pA = real_curve_point(mA, rng, x_range)
        pB = real_curve_point(mBD, rng, x_range)
        pD = real_curve_point(mBD, rng, x_range)
        dAB, nAB = _unit2(pA - pB)
        dAD, nAD = _unit2(pA - pD)
        params = {"d_AB": dAB, "d_AD": dAD,
                  "cos_AB": nAB[0], "sin_AB": nAB[1],
                  "cos_AD": nAD[0], "sin_AD": nAD[1]}
        truth = {"x_A": pA[0], "y_A": pA[1], "C_BD": c_bd}
    elif name == "TwoS_Halo_OneUnknownC":
        c_b = _c_in_range(fam, rng)
        mA = fam.model_at(spec.metadata["c_A"])
        mB = fam.model_at(c_b)
        pA = halo_curve_point(mA, rng)
        pB = halo_curve_point(mB, rng)
        d = float(np.linalg.norm(pA - pB))
        if d < 1e-8:
            raise PlantError("degenerate plant: coincident positions")
        n = (pA - pB) / d
        params = {"d_AB": d, "n_u": n[0], "n_v": n[1], "n_w": n[2]}
        params.update(known_halo_model_values(mA))
        truth = {"u_A": pA[0], "v_A": pA[1], "w_A": pA[2], "C_B": c_b}
    elif name == "ThreeS_AllUnknownC_Halo":
        cs = [_c_in_range(fam, rng) for _ in range(3)]
        pts = [halo_curve_point(fam.model_at(c), rng) for c in cs]
        pA, pB, pD = pts
        dAB = float(np.linalg.norm(pA - pB))
        dAD = float(np.linalg.norm(pA - pD))
        if min(dAB, dAD) < 1e-8:
            raise PlantError("degenerate plant: coincident positions")
        nAB = (pA - pB) / dAB
        nAD = (pA - pD) / dAD
        params = {"d_AB": dAB, "d_AD": dAD,
                  "nAB_u": nAB[0], "nAB_v": nAB[1], "nAB_w": nAB[2],
                  "nAD_u": nAD[0], "nAD_v": nAD[1], "nAD_w": nAD[2]}
        truth = {"u_A": pA[0], "v_A": pA[1], "w_A": pA[2],
                 "C_A": cs[0], "C_B": cs[1], "C_D": cs[2]}
    elif name == "SixS_Halo":
        edges = [tuple(e) for e in spec.metadata["graph"]]
        cs = [_c_in_range(fam, rng) for _ in range(6)]
        pts = [halo_curve_point(fam.model_at(c), rng) for c in cs]
        params = {}
        for i, j in edges:
            d = float(np.linalg.norm(pts[i] - pts[j]))
            if d < 1e-8:
                raise PlantError("degenerate plant: coincident positions")
            params[f"d_{i}{j}"] = d
        truth = {}
        for i in range(6):
            truth[f"u_{i}"], truth[f"v_{i}"], truth[f"w_{i}"] = pts[i]
            truth[f"C_{i}"] = cs[i]
    elif name == "M2S_LOS_TwoInstances":
        cA = _c_in_range(fam, rng)
        cB = _c_in_range(fam, rng)
        mA, mB = fam.model_at(cA), fam.model_at(cB)
        params = {}
        truth = {"C_A": cA, "C_B": cB}
        for t in (1, 2):
            pM = np.array([rng.uniform(*x_range), rng.uniform(-0.25, 0.25)])
            pA = real_curve_point(mA, rng, x_range)
            pB = real_curve_point(mB, rng, x_range)
            dA, nA = _unit2(pA - pM)   # convention: p_S = p_M + d * dir
            dB, nB = _unit2(pB - pM)
            dAB, _ = _unit2(pA - pB)
            params.update({f"x_M{t}": pM[0], f"y_M{t}": pM[1],
                           f"c{t}_A": nA[0], f"s{t}_A": nA[1],
                           f"c{t}_B": nB[0], f"s{t}_B": nB[1],
                           f"d{t}_AB": dAB})
            truth[f"d{t}_MA"] = dA
            truth[f"d{t}_MB"] = dB
    elif name in ("M2S_RangeRate", "TwoS_HighDerivRange"):
        if truth_states is None or len(truth_states) != 2:
            raise PlantError(f"{name} planting needs two 6-state vectors")
        return _plant_dynamic(spec, rng, truth_states, tol)
    else:
        raise ValueError(f"no planting rule for problem {name!r}")
    _check_plant(spec, params, truth, tol)
    return ProblemInstance(spec, params, {"kind": "planted", "truth": truth})


def _aux_radii(state, mu):
    x, y = state[0], state[1]
    r1 = math.sqrt((x + mu) ** 2 + y ** 2)
    r2 = math.sqrt((x - (1.0 - mu)) ** 2 + y ** 2)
    return 1.0 / r1, 1.0 / r2


def _plant_dynamic(spec, rng, truth_states, tol):
    """Plant the velocity-coupled problems from real trajectory states."""
    from .dynamics import jacobi_constant
    mu = spec.mu
    sA = np.asarray(truth_states[0], dtype=float)
    sB = np.asarray(truth_states[1], dtype=float)
    truth = {}
    for s, tag in ((sA, "A"), (sB, "B")):
        truth[f"C_{tag}"] = jacobi_constant(s, mu)
        truth[f"x_{tag}"], truth[f"y_{tag}"] = s[0], s[1]
        truth[f"vx_{tag}"], truth[f"vy_{tag}"] = s[3], s[4]
        truth[f"s1_{tag}"], truth[f"s2_{tag}"] = _aux_radii(s, mu)
    if spec.name == "M2S_RangeRate":
        pM = np.array([rng.uniform(0.75, 1.2), rng.uniform(-0.2, 0.2)])
        vM = rng.uniform(-0.5, 0.5, size=2)
        params = {"x_M": pM[0], "y_M": pM[1], "vx_M": vM[0], "vy_M": vM[1]}
        for a, b, pa, va_, pb, vb in (
                ("M", "A", pM, vM, sA[:2], sA[3:5]),
                ("M", "B", pM, vM, sB[:2], sB[3:5]),
                ("A", "B", sA[:2], sA[3:5], sB[:2], sB[3:5])):
            dp = np.asarray(pb) - np.asarray(pa)
            dv = np.asarray(vb) - np.asarray(va_)
            d = float(np.linalg.norm(dp))
            if d < 1e-8:
                raise PlantError("degenerate plant: coincident positions")
            params[f"d_{a}{b}"] = d
            params[f"rt_{a}{b}"] = float(dp @ dv) / d
    else:
        # range-derivative parameters from the formal flow derivatives
        point_truth = [truth[u] for u in spec.system.unknowns]
        fvals = []
        va = spec.system.variables
        rates = {}
        rates.update(_flow_derivatives(va, "A", mu))
        rates.update(_flow_derivatives(va, "B", mu))
        f = _sq_dist2(_var("x_A", va), _var("y_A", va),
                      _var("x_B", va), _var("y_B", va))
        fk = f
        pad = point_truth + [0.0] * len(spec.system.parameters)
        for k in range(6):
            fvals.append(fk.evaluate(pad).real)
            if k < 5:
                fk = lie_derivative(fk, rates)
        D = np.zeros(6)
        D[0] = math.sqrt(fvals[0])
        D[1] = fvals[1] / (2.0 * D[0])
        D[2] = (fvals[2] / 2.0 - D[1] ** 2) / D[0]
        D[3] = (fvals[3] / 2.0 - 3.0 * D[1] * D[2]) / D[0]
        D[4] = (fvals[4] / 2.0 - 3.0 * D[2] ** 2 - 4.0 * D[1] * D[3]) / D[0]
        D[5] = (fvals[5] / 2.0 - 10.0 * D[2] * D[3] - 5.0 * D[1] * D[4]) / D[0]
        params = {f"D{k}": float(D[k]) for k in range(6)}
    _check_plant(spec, params, truth, tol)
    return ProblemInstance(spec, params, {"kind": "planted", "truth": truth})


_UNIT_GROUPS = {
    # direction parameters that must satisfy sum-of-squares = 1
    "TwoS_RangeLOS": [("cos_AB", "sin_AB")],
    "ThreeS_KnownCA_SameBD": [("cos_AB", "sin_AB"), ("cos_AD", "sin_AD")],
    "TwoS_Halo_OneUnknownC": [("n_u", "n_v", "n_w")],
    "ThreeS_AllUnknownC_Halo": [("nAB_u", "nAB_v", "nAB_w"),
                                ("nAD_u", "nAD_v", "nAD_w")],
    "M2S_LOS_TwoInstances": [("c1_A", "s1_A"), ("c2_A", "s2_A"),
                             ("c1_B", "s1_B"), ("c2_B", "s2_B")],
}


def random_generic_instance(spec: ProblemSpec, seed: int) -> ProblemInstance:
    """Generic complex parameters: unit-scale complex Gaussians, with
    LOS direction groups normalized to sum-of-squares one."""
    rng = np.random.default_rng(seed)
    params = {}
    for p in spec.system.parameters:
        z = complex(rng.standard_normal(), rng.standard_normal())
        params[p] = z / math.sqrt(2.0)
    for group in _UNIT_GROUPS.get(spec.name, []):
        vec = np.array([params[p] for p in group])
        norm = np.sqrt(np.sum(vec ** 2))   # complex square root
        if abs(norm) < 1e-8:
            vec[0] += 1.0
            norm = np.sqrt(np.sum(vec ** 2))
        for p, val in zip(group, vec / norm):
            params[p] = complex(val)
    return ProblemInstance(spec, params,
                           {"kind": "generic-random", "seed": seed})


# -- generic random models (for degree counting) ----------------------

def random_family_model(kind: str, rng, c_degree: int = 3,
                        complex_coeffs: bool = True) -> FamilyModel:
    """Family model with random coefficients and the standard support."""
    na = len(g_exponents(kind))
    shape = (na, c_degree + 1)
    if complex_coeffs:
        alpha = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    else:
        alpha = rng.standard_normal(shape)
    beta = None
    if is_halo_kind(kind):
        nb = len(h_exponents(kind))
        if complex_coeffs:
            beta = (rng.standard_normal((nb, c_degree + 1))
                    + 1j * rng.standard_normal((nb, c_degree + 1)))
        else:
            beta = rng.standard_normal((nb, c_degree + 1))
    return FamilyModel(kind, alpha, beta, (-1.0, 1.0))


def random_orbit_model(kind: str, rng,
                       complex_coeffs: bool = True) -> OrbitModel:
    fam = random_family_model(kind, rng, c_degree=0,
                              complex_coeffs=complex_coeffs)
    return fam.model_at(0.0)


# -- builder dispatch (CLI / tests) -----------------------------------

def build_problem(name: str, family: FamilyModel,
                  mu: float = EARTH_MOON_MU, c_A: float | None = None,
                  rng=None) -> ProblemSpec:
    """Build any named problem from one family model.

    Problems needing fixed known constants take them from c_A (default:
    midpoint of the family's C range).
    """
    if name not in PROBLEM_NAMES:
        raise ValueError(f"unknown problem {name!r}; "
                         f"choose from {PROBLEM_NAMES}")
    if c_A is None:
        c_A = 0.5 * (family.c_range[0] + family.c_range[1])
    if name == "M2S_SameOrbit":
        return build_m2s_same_orbit(family, mu)
    if name == "M2S_RangeRate":
        return build_m2s_range_rate(family, mu)
    if name == "TwoS_RangeLOS":
        m_A = family.model_at(c_A)
        c_B = c_A + 0.2 * (family.c_range[1] - family.c_range[0])
        m_B = family.model_at(c_B)
        return build_2s_range_los(m_A, m_B, mu)
    if name == "TwoS_Halo_OneUnknownC":
        return build_2s_halo_one_unknown_c(family, c_A, mu)
    if name == "ThreeS_KnownCA_SameBD":
        return build_3s_known_ca_same_bd(family, c_A, mu)
    if name == "ThreeS_AllUnknownC_Halo":
        return build_3s_all_unknown_c_halo(family, mu)
    if name == "SixS_Halo":
        return build_6s_halo(family, mu=mu, rng=rng)
    if name == "M2S_LOS_TwoInstances":
        return build_m2s_los_two_instances(family, mu)
    return build_2s_highderiv_range(family, mu)


# -- JSON interfaces --------------------------------------------------

def spec_to_dict(spec: ProblemSpec) -> dict:
    return {
        "name": spec.name,
        "kind": spec.kind,
        "system": spec.system.to_dict(),
        "mu": spec.mu,
        "metadata": spec.metadata,
    }


def instance_to_dict(inst: ProblemInstance) -> dict:
    params = {k: [complex(v).real, complex(v).imag]
              for k, v in inst.parameter_values.items()}
    prov = dict(inst.provenance)
    if "truth" in prov and prov["truth"] is not None:
        prov["truth"] = {k: float(v) for k, v in prov["truth"].items()}
    return {"problem_ref": inst.spec.name,
            "parameter_values": params,
            "provenance": prov}
