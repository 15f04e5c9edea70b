"""Implicit algebraic curve models for periodic orbit families.

Lyapunov orbits are modeled by a single symmetric plane curve
g(x, y) = 1 with even powers of y only (quartic: 8 coefficients,
sextic: 15).  Halo orbits are first rotated into an (u, v, w) frame and
modeled by g(u, v) = 1 together with a height surface h(u, v) = w.
Families are captured by letting every coefficient be a low-degree
polynomial in the Jacobi constant C.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

# Basis exponents of g, in coefficient order.  No constant term: the
# right-hand side is normalized to 1.
QUARTIC_G_EXPS = ((1, 0), (2, 0), (3, 0), (4, 0),
                  (0, 2), (1, 2), (2, 2), (0, 4))
SEXTIC_G_EXPS = ((1, 0), (2, 0), (3, 0), (4, 0), (5, 0), (6, 0),
                 (0, 2), (1, 2), (2, 2), (3, 2), (4, 2),
                 (0, 4), (1, 4), (2, 4),
                 (0, 6))
# h carries a constant term (its right-hand side is the coordinate w)
QUARTIC_H_EXPS = ((0, 0),) + QUARTIC_G_EXPS
SEXTIC_H_EXPS = ((0, 0),) + SEXTIC_G_EXPS

KINDS = ("LyapunovQuartic", "LyapunovSextic", "HaloQuartic", "HaloSextic")

_HALO_U = np.array([-1.0 / math.sqrt(2.0), 0.0, 1.0 / math.sqrt(2.0)])
_HALO_V = np.array([0.0, 1.0, 0.0])
_HALO_W = np.array([1.0 / math.sqrt(2.0), 0.0, 1.0 / math.sqrt(2.0)])


class RankDeficiencyError(ValueError):
    """Design matrix rank below the number of basis functions."""


def g_exponents(kind: str):
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    return SEXTIC_G_EXPS if "Sextic" in kind else QUARTIC_G_EXPS


def h_exponents(kind: str):
    if not kind.startswith("Halo"):
        raise ValueError(f"{kind} has no height surface h")
    return SEXTIC_H_EXPS if "Sextic" in kind else QUARTIC_H_EXPS


def is_halo_kind(kind: str) -> bool:
    return kind.startswith("Halo")


def basis(kind: str, point) -> np.ndarray:
    """Monomial values of the g basis at a 2D point, in alpha order."""
    x, y = point
    return np.array([x ** i * y ** j for i, j in g_exponents(kind)])


def basis_matrix(exps, pts: np.ndarray) -> np.ndarray:
    """Rows of monomial values for an (n, 2) array of points."""
    pts = np.asarray(pts, dtype=float)
    cols = [pts[:, 0] ** i * pts[:, 1] ** j for i, j in exps]
    return np.column_stack(cols)


def halo_frame(points3) -> np.ndarray:
    """Rotate (x, y, z) into the (u, v, w) basis used for Halo fitting."""
    p = np.asarray(points3, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    out = np.column_stack([p @ _HALO_U, p @ _HALO_V, p @ _HALO_W])
    return out[0] if single else out


def halo_frame_inverse(points_uvw) -> np.ndarray:
    """Map (u, v, w) coordinates back to (x, y, z)."""
    q = np.asarray(points_uvw, dtype=float)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    R = np.vstack([_HALO_U, _HALO_V, _HALO_W])   # orthogonal
    out = q @ R
    return out[0] if single else out


@dataclass(frozen=True)
class FitReport:
    rmse: float
    mean_geometric_distance: float
    n_points: int


@dataclass(frozen=True)
class OrbitModel:
    """Fitted implicit model at one Jacobi constant."""
    kind: str
    alpha: np.ndarray
    beta: np.ndarray | None = None

    def __post_init__(self):
        n = len(g_exponents(self.kind))
        if len(self.alpha) != n:
            raise ValueError(f"{self.kind} expects {n} alpha coefficients, "
                             f"got {len(self.alpha)}")
        if is_halo_kind(self.kind):
            if self.beta is None:
                raise ValueError(f"{self.kind} requires beta coefficients")
            nb = len(h_exponents(self.kind))
            if len(self.beta) != nb:
                raise ValueError(f"{self.kind} expects {nb} beta "
                                 f"coefficients, got {len(self.beta)}")
        elif self.beta is not None:
            raise ValueError("beta only applies to Halo kinds")

    def g_value(self, pts) -> np.ndarray:
        """g(p) for (n, 2) points (note: the curve is g = 1)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return basis_matrix(g_exponents(self.kind), pts) @ self.alpha

    def g_gradient(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        gx = np.zeros(len(pts))
        gy = np.zeros(len(pts))
        for a, (i, j) in zip(self.alpha, g_exponents(self.kind)):
            if i:
                gx += a * i * x ** (i - 1) * y ** j
            if j:
                gy += a * j * x ** i * y ** (j - 1)
        return np.column_stack([gx, gy])

    def g_hessian(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        H = np.zeros((len(pts), 2, 2))
        for a, (i, j) in zip(self.alpha, g_exponents(self.kind)):
            if i >= 2:
                H[:, 0, 0] += a * i * (i - 1) * x ** (i - 2) * y ** j
            if i >= 1 and j >= 1:
                H[:, 0, 1] += a * i * j * x ** (i - 1) * y ** (j - 1)
            if j >= 2:
                H[:, 1, 1] += a * j * (j - 1) * x ** i * y ** (j - 2)
        H[:, 1, 0] = H[:, 0, 1]
        return H

    def h_value(self, pts) -> np.ndarray:
        if self.beta is None:
            raise ValueError(f"{self.kind} has no height surface h")
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return basis_matrix(h_exponents(self.kind), pts) @ self.beta


@dataclass(frozen=True)
class FamilyModel:
    """Orbit model with each coefficient a polynomial in C.

    alpha_polys has shape (n_alpha, c_degree+1), ascending C powers.
    """
    kind: str
    alpha_polys: np.ndarray
    beta_polys: np.ndarray | None
    c_range: tuple
    sub_models: tuple = field(default=())

    @property
    def c_degree(self) -> int:
        return self.alpha_polys.shape[1] - 1

    def model_at(self, c: float) -> OrbitModel:
        powers = np.array([c ** k for k in range(self.alpha_polys.shape[1])])
        alpha = self.alpha_polys @ powers
        beta = None
        if self.beta_polys is not None:
            beta = self.beta_polys @ powers
        return OrbitModel(self.kind, alpha, beta)

    def sub_model_for(self, c: float) -> "FamilyModel":
        """Pick the sub-interval model covering c (self if unpartitioned)."""
        for sm in self.sub_models:
            if sm.c_range[0] <= c <= sm.c_range[1]:
                return sm
        return self


def _lowest_degree_solution(A: np.ndarray, sol: np.ndarray,
                            degrees) -> np.ndarray:
    """Resolve least-squares indeterminacy toward low-degree monomials.

    Within the affine set of least-squares minimizers, minimize the
    coefficient norm of each monomial degree, highest degree first, so
    data on a lower-degree curve yields that curve's coefficients
    (e.g. a circle comes out quadratic, not a quartic multiple).
    """
    degrees = np.asarray(degrees)
    _, s, Vt = np.linalg.svd(A)
    tol = max(A.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    N = Vt[int(np.sum(s > tol)):].conj().T       # null-space basis
    for d in sorted(set(degrees.tolist()), reverse=True):
        if N.shape[1] == 0:
            break
        rows = np.flatnonzero(degrees == d)
        t = np.linalg.lstsq(N[rows], -sol[rows], rcond=1e-8)[0]
        sol = sol + N @ t
        # remaining freedom: directions not affecting this degree level
        _, sn, Vn = np.linalg.svd(N[rows], full_matrices=True)
        toln = 1e-8 * (sn[0] if sn.size else 0.0)
        N = N @ Vn[int(np.sum(sn > toln)):].conj().T
    return sol


def _lstsq_full_rank(A: np.ndarray, b: np.ndarray,
                     degrees=None) -> np.ndarray:
    """Least squares through orthogonal factorization, with a rank check.

    Data lying exactly on a lower-degree curve of the model class makes
    the design matrix structurally rank deficient while still being
    perfectly representable; that case is resolved to the lowest-degree
    representation when monomial degrees are supplied.  A deficiency
    that leaves residual behind is an error.
    """
    sol, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < A.shape[1]:
        res = np.linalg.norm(A @ sol - b)
        scale = max(np.linalg.norm(b), 1.0)
        if res > 1e-8 * scale or len(np.unique(A, axis=0)) < A.shape[1]:
            raise RankDeficiencyError(
                f"design matrix rank {rank} < {A.shape[1]} basis functions")
        if degrees is not None:
            sol = _lowest_degree_solution(A, sol, degrees)
    return sol


def fit_single_orbit(points, kind: str):
    """Least-squares fit of one orbit's sample points.

    points: (n, 2) for Lyapunov kinds, (n, 3) rotating-frame positions
    for Halo kinds (rotated internally).  Returns (OrbitModel, FitReport).
    """
    pts = np.asarray(points, dtype=float)
    if is_halo_kind(kind):
        if pts.shape[1] != 3:
            raise ValueError("Halo kinds need 3D points")
        uvw = halo_frame(pts)
        plane = uvw[:, :2]
        A = basis_matrix(g_exponents(kind), plane)
        alpha = _lstsq_full_rank(A, np.ones(len(plane)),
                                 [i + j for i, j in g_exponents(kind)])
        Ah = basis_matrix(h_exponents(kind), plane)
        beta = _lstsq_full_rank(Ah, uvw[:, 2],
                                [i + j for i, j in h_exponents(kind)])
        model = OrbitModel(kind, alpha, beta)
        res = np.concatenate([A @ alpha - 1.0, Ah @ beta - uvw[:, 2]])
    else:
        if pts.shape[1] != 2:
            raise ValueError("Lyapunov kinds need 2D points")
        A = basis_matrix(g_exponents(kind), pts)
        alpha = _lstsq_full_rank(A, np.ones(len(pts)),
                                 [i + j for i, j in g_exponents(kind)])
        model = OrbitModel(kind, alpha)
        res = A @ alpha - 1.0
    report = FitReport(rmse=float(np.sqrt(np.mean(res ** 2))),
                       mean_geometric_distance=float(
                           np.mean(geometric_distances(model, pts))),
                       n_points=len(pts))
    return model, report


# -- geometric (Euclidean) distance to the fitted curve ---------------

def _sampson(model: OrbitModel, plane: np.ndarray) -> np.ndarray:
    g = model.g_value(plane) - 1.0
    grad = model.g_gradient(plane)
    norm = np.linalg.norm(grad, axis=1)
    norm = np.where(norm < 1e-300, 1.0, norm)
    return np.abs(g) / norm


def _project_batch(model: OrbitModel, plane: np.ndarray,
                   max_iters: int = 50, kkt_tol: float = 1e-12):
    """Closest-point projection onto g = 1 by Newton on the KKT system.

    Unknowns per point: the foot q and the multiplier lam with
    q - p = lam * grad g(q), g(q) = 1.  Returns (distances, ok_mask);
    points where the projection failed carry the Sampson value.
    """
    p = np.asarray(plane, dtype=float)
    q = p.copy()
    lam = np.zeros(len(p))
    ok = np.zeros(len(p), dtype=bool)
    active = np.ones(len(p), dtype=bool)
    for _ in range(max_iters):
        if not active.any():
            break
        qa, pa, la = q[active], p[active], lam[active]
        grad = model.g_gradient(qa)
        hess = model.g_hessian(qa)
        g = model.g_value(qa) - 1.0
        F1 = qa - pa - la[:, None] * grad
        res = np.sqrt(np.sum(F1 ** 2, axis=1) + g ** 2)
        done = res < kkt_tol
        J = np.zeros((len(qa), 3, 3))
        J[:, :2, :2] = np.eye(2)[None] - la[:, None, None] * hess
        J[:, :2, 2] = -grad
        J[:, 2, :2] = grad
        rhs = np.concatenate([F1, g[:, None]], axis=1)
        try:
            step = np.linalg.solve(J, rhs[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            break
        bad = ~np.isfinite(step).all(axis=1)
        step[bad] = 0.0
        qa -= step[:, :2]
        la -= step[:, 2]
        q[active], lam[active] = qa, la
        idx = np.flatnonzero(active)
        ok[idx[done]] = True
        still = ~done & ~bad
        # drop diverged iterates back to Sampson
        still &= np.linalg.norm(qa - pa, axis=1) < 1e3
        active[idx[~still]] = False
    d = np.linalg.norm(q - p, axis=1)
    samp = _sampson(model, p)
    d = np.where(ok, d, samp)
    return d, ok


def geometric_distances(model: OrbitModel, points) -> np.ndarray:
    """Euclidean distances from points to the model curve.

    Halo points are rotated first; the in-plane projection distance and
    the height residual w - h(u, v) combine in quadrature.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if is_halo_kind(model.kind):
        uvw = halo_frame(pts) if pts.shape[1] == 3 else pts
        d_plane, _ = _project_batch(model, uvw[:, :2])
        if uvw.shape[1] == 3:
            dh = uvw[:, 2] - model.h_value(uvw[:, :2])
            return np.sqrt(d_plane ** 2 + dh ** 2)
        return d_plane
    return _project_batch(model, pts)[0]


def geometric_distance(model: OrbitModel, point) -> float:
    """Distance from a single point to the fitted curve."""
    return float(geometric_distances(model, np.atleast_2d(point))[0])


def mean_geometric_distance(model: OrbitModel, points) -> float:
    return float(np.mean(geometric_distances(model, points)))


def refine_geometric(model: OrbitModel, points, max_iters: int = 100,
                     step0: float = 1.0):
    """Gradient descent on the mean squared geometric distance.

    Armijo backtracking (factor 0.5, c = 1e-4); coefficient gradient by
    forward differences with step 1e-7.  Never increases the objective;
    returns the best iterate with its report.
    """
    pts = np.asarray(points, dtype=float)

    def pack(m):
        if m.beta is not None:
            return np.concatenate([m.alpha, m.beta])
        return np.array(m.alpha, dtype=float)

    def unpack(vec):
        na = len(model.alpha)
        if model.beta is not None:
            return OrbitModel(model.kind, vec[:na], vec[na:])
        return OrbitModel(model.kind, vec)

    def objective(vec):
        d = geometric_distances(unpack(vec), pts)
        return float(np.mean(d ** 2))

    theta = pack(model)
    f = objective(theta)
    step = step0
    for _ in range(max_iters):
        grad = np.empty_like(theta)
        h = 1e-7
        for i in range(len(theta)):
            tp = theta.copy()
            tp[i] += h
            grad[i] = (objective(tp) - f) / h
        gnorm2 = float(grad @ grad)
        if gnorm2 == 0.0:
            break
        accepted = False
        while step > 1e-16:
            trial = theta - step * grad
            ft = objective(trial)
            if ft <= f - 1e-4 * step * gnorm2:
                theta, f = trial, ft
                accepted = True
                step *= 2.0
                break
            step *= 0.5
        if not accepted:
            break
        if gnorm2 * step < 1e-10 * max(f, 1e-30):
            break
    refined = unpack(theta)
    if is_halo_kind(model.kind):
        plane = halo_frame(pts)
        res = np.concatenate([refined.g_value(plane[:, :2]) - 1.0,
                              refined.h_value(plane[:, :2]) - plane[:, 2]])
    else:
        res = refined.g_value(pts) - 1.0
    report = FitReport(rmse=float(np.sqrt(np.mean(res ** 2))),
                       mean_geometric_distance=mean_geometric_distance(
                           refined, pts),
                       n_points=len(pts))
    return refined, report


# -- family fitting ---------------------------------------------------

def _c_scaling(cs: np.ndarray):
    """Affine map C -> s = (C - c0)/h onto roughly [-1, 1].

    Raw powers of C are nearly collinear for narrow Jacobi windows far
    from zero; fitting in s and converting back keeps the Vandermonde
    well conditioned without changing the stored representation.
    """
    c0 = 0.5 * (cs.min() + cs.max())
    h = 0.5 * (cs.max() - cs.min())
    if h < 1e-12:
        h = 1.0
    return float(c0), float(h)


def _scaled_polys_to_raw(rows: np.ndarray, c0: float, h: float) -> np.ndarray:
    """Rewrite per-coefficient polynomials in s = (C - c0)/h as raw-C."""
    shift = np.polynomial.Polynomial([-c0 / h, 1.0 / h])
    out = np.zeros_like(rows)
    for r, coef in enumerate(rows):
        cc = np.polynomial.Polynomial(coef)(shift).coef
        out[r, :len(cc)] = cc
    return out


def fit_family_two_stage(orbits, kind: str, c_degree: int = 3) -> FamilyModel:
    """Stage 1: fit each orbit.  Stage 2: fit each coefficient vs C.

    orbits: sequence of (C, points).  Needs at least c_degree+1
    distinct C values.
    """
    orbits = sorted(orbits, key=lambda oc: oc[0])
    cs = np.array([c for c, _ in orbits], dtype=float)
    if len(np.unique(cs)) < c_degree + 1:
        raise ValueError(f"need at least {c_degree + 1} distinct Jacobi "
                         f"constants for a degree-{c_degree} fit, "
                         f"got {len(np.unique(cs))}")
    alphas, betas = [], []
    for _, points in orbits:
        m, _ = fit_single_orbit(points, kind)
        alphas.append(m.alpha)
        if m.beta is not None:
            betas.append(m.beta)
    c0, h = _c_scaling(cs)
    V = np.vander((cs - c0) / h, c_degree + 1, increasing=True)
    alpha_polys = _scaled_polys_to_raw(
        _lstsq_full_rank(V, np.array(alphas)).T, c0, h)
    beta_polys = None
    if betas:
        beta_polys = _scaled_polys_to_raw(
            _lstsq_full_rank(V, np.array(betas)).T, c0, h)
    return FamilyModel(kind, alpha_polys, beta_polys,
                       (float(cs.min()), float(cs.max())))


def fit_family_one_stage(all_points, kind: str, c_degree: int = 3) -> FamilyModel:
    """Single joint least-squares fit over (point, C) pairs.

    all_points: sequence of (C, point).  The joint basis is the tensor
    product of the g monomials with {1, C, ..., C^c_degree}.
    """
    cs = np.array([c for c, _ in all_points], dtype=float)
    pts = np.asarray([p for _, p in all_points], dtype=float)
    c0, h = _c_scaling(cs)
    powers = np.vander((cs - c0) / h, c_degree + 1, increasing=True)
    if is_halo_kind(kind):
        uvw = halo_frame(pts) if pts.shape[1] == 3 else pts
        plane, w = uvw[:, :2], uvw[:, 2]
    else:
        plane, w = pts, None
    def joint_degrees(exps):
        # monomial degree dominates, C power breaks ties
        return [(i + j) * (c_degree + 2) + k
                for i, j in exps for k in range(c_degree + 1)]

    B = basis_matrix(g_exponents(kind), plane)
    A = (B[:, :, None] * powers[:, None, :]).reshape(len(plane), -1)
    alpha_polys = _scaled_polys_to_raw(
        _lstsq_full_rank(
            A, np.ones(len(plane)),
            joint_degrees(g_exponents(kind))).reshape(
                B.shape[1], c_degree + 1), c0, h)
    beta_polys = None
    if w is not None:
        Bh = basis_matrix(h_exponents(kind), plane)
        Ah = (Bh[:, :, None] * powers[:, None, :]).reshape(len(plane), -1)
        beta_polys = _scaled_polys_to_raw(
            _lstsq_full_rank(
                Ah, w, joint_degrees(h_exponents(kind))).reshape(
                    Bh.shape[1], c_degree + 1), c0, h)
    return FamilyModel(kind, alpha_polys, beta_polys,
                       (float(cs.min()), float(cs.max())))


def partition_c_range(catalog, k_intervals: int):
    """Split [Cmin, Cmax] so each part covers about equally many orbits.

    catalog: sequence of (C, points).  Returns k contiguous (lo, hi)
    ranges whose orbit counts differ by at most one.
    """
    if k_intervals < 1:
        raise ValueError("need at least one interval")
    cs = np.sort(np.array([c for c, _ in catalog], dtype=float))
    if len(cs) < k_intervals:
        raise ValueError(f"{len(cs)} orbits cannot fill "
                         f"{k_intervals} intervals")
    groups = np.array_split(cs, k_intervals)
    ranges = []
    for i, grp in enumerate(groups):
        lo = float(cs[0]) if i == 0 else float(
            0.5 * (groups[i - 1][-1] + grp[0]))
        hi = float(cs[-1]) if i == k_intervals - 1 else float(
            0.5 * (grp[-1] + groups[i + 1][0]))
        ranges.append((lo, hi))
    return ranges


# -- JSON model files -------------------------------------------------

def model_to_dict(model, report: FitReport | None = None) -> dict:
    """Serialize an OrbitModel or FamilyModel."""
    if isinstance(model, FamilyModel):
        mid_c = 0.5 * (model.c_range[0] + model.c_range[1])
        at_mid = model.model_at(mid_c)
        out = {
            "kind": model.kind,
            "alpha": list(at_mid.alpha),
            "c_polys": {"alpha": model.alpha_polys.tolist()},
            "c_range": list(model.c_range),
        }
        if at_mid.beta is not None:
            out["beta"] = list(at_mid.beta)
            out["c_polys"]["beta"] = model.beta_polys.tolist()
    else:
        out = {"kind": model.kind, "alpha": list(model.alpha)}
        if model.beta is not None:
            out["beta"] = list(model.beta)
    if report is not None:
        out["report"] = {"rmse": report.rmse,
                         "mean_geometric_distance":
                             report.mean_geometric_distance,
                         "n_points": report.n_points}
    return out


def model_from_dict(data: dict):
    """Inverse of model_to_dict; returns OrbitModel or FamilyModel."""
    kind = data["kind"]
    if "c_polys" in data:
        alpha_polys = np.array(data["c_polys"]["alpha"], dtype=float)
        beta_polys = None
        if "beta" in data["c_polys"]:
            beta_polys = np.array(data["c_polys"]["beta"], dtype=float)
        return FamilyModel(kind, alpha_polys, beta_polys,
                           tuple(data["c_range"]))
    beta = np.array(data["beta"], dtype=float) if "beta" in data else None
    return OrbitModel(kind, np.array(data["alpha"], dtype=float), beta)


def model_to_json(model, report: FitReport | None = None) -> str:
    return json.dumps(model_to_dict(model, report), indent=2)


def model_from_json(text: str):
    return model_from_dict(json.loads(text))
