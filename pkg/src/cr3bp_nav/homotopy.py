"""Homotopy continuation for square polynomial systems.

Total-degree start systems with the gamma trick, a vectorized
Euler-predictor / Newton-corrector path tracker (all paths advance in
lockstep numpy batches with per-path adaptive steps), parameter
homotopy between instances of one problem, numerical degree counting,
and monodromy population for problems whose Bezout count is out of
reach.  The continuation parameter t runs from 1 (start system) to 0
(target).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .polysys import CompiledSystem, Polynomial, PolynomialSystem
from .problems import ProblemInstance, random_generic_instance

FINITE_NONSINGULAR = "finite-nonsingular"
FINITE_SINGULAR = "finite-singular"
AT_INFINITY = "at-infinity"
FAILED = "failed"

# tracker defaults (per-path adaptive stepping)
DT_INIT = 1e-2
DT_MAX = 5e-2
DT_MIN = 1e-12
DT_GROW = 1.5
GROW_AFTER = 4
CORRECTOR_ITERS = 3
CORRECTOR_TOL = 1e-10
INFINITY_THRESHOLD = 1e8
STALL_INFINITY_NORM = 1e4
STALL_INFINITY_T = 1e-6
Z0_INFINITY = 1e-8
DEDUP_TOL = 1e-6
COND_SINGULAR = 1e12
REAL_TOL = 1e-8


class SeedDisagreementError(RuntimeError):
    """Counted degrees differ across seeds (tracking or genericity failure)."""


class AggregatePathFailure(RuntimeError):
    """More than 5% of tracked paths failed outright."""


class SingularJacobianError(RuntimeError):
    """Newton refinement hit a numerically singular Jacobian."""


@dataclass
class TrackedSolution:
    point: np.ndarray
    residual: float
    classification: str
    path_id: int

    @property
    def is_real(self) -> bool:
        return bool(np.max(np.abs(self.point.imag)) < REAL_TOL)


@dataclass
class SolveResult:
    solutions: list          # deduplicated TrackedSolution endpoints
    paths_total: int
    paths_failed: int
    gamma: complex
    wall_time_s: float = 0.0

    def finite_nonsingular(self):
        return [s for s in self.solutions
                if s.classification == FINITE_NONSINGULAR]

    @property
    def count(self) -> int:
        return len(self.finite_nonsingular())


# -- homotopies -------------------------------------------------------

class LinearBlendHomotopy:
    """H(x, t) = gamma * t * G(x) + (1 - t) * F(x)."""

    def __init__(self, start: CompiledSystem, target: CompiledSystem,
                 gamma: complex):
        self.G, self.F, self.gamma = start, target, gamma
        self.n = target.n_vars
        self.max_degree = max(max(start.degrees), max(target.degrees))

    def H(self, X, t):
        return (self.gamma * t[:, None] * self.G.eval_batch(X)
                + (1.0 - t)[:, None] * self.F.eval_batch(X))

    def Hx(self, X, t):
        return (self.gamma * t[:, None, None] * self.G.jac_batch(X)
                + (1.0 - t)[:, None, None] * self.F.jac_batch(X))

    def Ht(self, X, t):
        return self.gamma * self.G.eval_batch(X) - self.F.eval_batch(X)

    def Hmag(self, X, t):
        return (np.abs(self.gamma * t)[:, None] * self.G.mag_batch(X)
                + np.abs(1.0 - t)[:, None] * self.F.mag_batch(X))

    def target_mag(self, X):
        return self.F.mag_batch(X)

    def target_system(self) -> CompiledSystem:
        return self.F


class ParameterPathHomotopy:
    """Straight gamma-weighted segment between two parameter points.

    p(t) = (gamma*t*p0 + (1-t)*p1) / (gamma*t + (1-t)); the system is
    the parametric family compiled over unknowns + parameters.
    """

    def __init__(self, full: CompiledSystem, n_unknowns: int,
                 p_start: np.ndarray, p_target: np.ndarray, gamma: complex):
        self.full = full
        self.n = n_unknowns
        self.p0 = np.asarray(p_start, dtype=complex)
        self.p1 = np.asarray(p_target, dtype=complex)
        self.gamma = gamma
        self.max_degree = max(full.degrees)
        self._target = None

    def _params(self, t):
        den = self.gamma * t + (1.0 - t)
        num = (self.gamma * t)[:, None] * self.p0 + (1.0 - t)[:, None] * self.p1
        p = num / den[:, None]
        dden = self.gamma - 1.0
        dnum = self.gamma * self.p0[None, :] - self.p1[None, :]
        dp = (dnum * den[:, None] - num * dden) / (den ** 2)[:, None]
        return p, dp

    def _points(self, X, t):
        p, dp = self._params(t)
        return np.concatenate([X, p], axis=1), dp

    def H(self, X, t):
        pts, _ = self._points(X, t)
        return self.full.eval_batch(pts)

    def Hx(self, X, t):
        pts, _ = self._points(X, t)
        return self.full.jac_batch(pts)[:, :, :self.n]

    def Ht(self, X, t):
        pts, dp = self._points(X, t)
        Jp = self.full.jac_batch(pts)[:, :, self.n:]
        return np.einsum("nij,nj->ni", Jp, dp)

    def Hmag(self, X, t):
        pts, _ = self._points(X, t)
        return self.full.mag_batch(pts)

    def target_mag(self, X):
        pts = np.concatenate(
            [X, np.broadcast_to(self.p1, (X.shape[0], len(self.p1)))], axis=1)
        return self.full.mag_batch(pts)

    def eval_target(self, X):
        pts = np.concatenate(
            [X, np.broadcast_to(self.p1, (X.shape[0], len(self.p1)))], axis=1)
        return self.full.eval_batch(pts)

    def jac_target(self, X):
        pts = np.concatenate(
            [X, np.broadcast_to(self.p1, (X.shape[0], len(self.p1)))], axis=1)
        return self.full.jac_batch(pts)[:, :, :self.n]


def _compile_full(system: PolynomialSystem) -> CompiledSystem:
    """Compile a parametric system over unknowns followed by parameters."""
    ambient = PolynomialSystem(list(system.equations), system.variables, ())
    return CompiledSystem(ambient)


def _homogenize(system: PolynomialSystem) -> PolynomialSystem:
    """Pad every equation with a fresh last variable up to its degree."""
    hvars = tuple(system.unknowns) + ("_z0",)
    eqs = []
    for eq in system.equations:
        d = eq.total_degree()
        terms = {exps + (d - sum(exps),): c for exps, c in eq.terms.items()}
        eqs.append(Polynomial(hvars, terms))
    return PolynomialSystem(eqs, hvars)


class ProjectiveBlendHomotopy:
    """Gamma-trick blend of homogenized systems on a random affine patch.

    Tracking n+1 homogeneous coordinates with the linear patch c.z = 1
    keeps every path bounded, so branches of the target with no affine
    limit arrive at honest endpoints with |z0| ~ 0 instead of blowing
    up or stalling.
    """

    def __init__(self, start_h: CompiledSystem, target_h: CompiledSystem,
                 gamma: complex, patch: np.ndarray):
        self.G, self.F, self.gamma = start_h, target_h, gamma
        self.patch = np.asarray(patch, dtype=complex)
        self.n = target_h.n_vars            # n+1 coordinates
        self.max_degree = max(target_h.degrees)

    def H(self, X, t):
        top = (self.gamma * t[:, None] * self.G.eval_batch(X)
               + (1.0 - t)[:, None] * self.F.eval_batch(X))
        row = X @ self.patch - 1.0
        return np.concatenate([top, row[:, None]], axis=1)

    def Hx(self, X, t):
        top = (self.gamma * t[:, None, None] * self.G.jac_batch(X)
               + (1.0 - t)[:, None, None] * self.F.jac_batch(X))
        row = np.broadcast_to(self.patch, (X.shape[0], 1, self.n))
        return np.concatenate([top, row], axis=1)

    def Ht(self, X, t):
        top = self.gamma * self.G.eval_batch(X) - self.F.eval_batch(X)
        return np.concatenate([top, np.zeros((X.shape[0], 1))], axis=1)

    def Hmag(self, X, t):
        top = (np.abs(self.gamma * t)[:, None] * self.G.mag_batch(X)
               + np.abs(1.0 - t)[:, None] * self.F.mag_batch(X))
        row = np.abs(X) @ np.abs(self.patch) + 1.0
        return np.concatenate([top, row[:, None]], axis=1)


# -- start systems ----------------------------------------------------

def total_degree_start(system: PolynomialSystem):
    """Classical start system x_i^{d_i} = 1 with all root-of-unity tuples."""
    if system.parameters:
        raise ValueError("substitute parameters before building a start "
                         "system")
    if not system.is_square:
        raise ValueError("start systems require a square target")
    degrees = [eq.total_degree() for eq in system.equations]
    if any(d == 0 for d in degrees):
        raise ValueError("zero-degree (constant) equation in target system")
    n = len(system.unknowns)
    eqs = []
    for i, d in enumerate(degrees):
        exps = [0] * n
        exps[i] = d
        eqs.append(Polynomial(system.unknowns,
                              {tuple(exps): 1.0, (0,) * n: -1.0}))
    start = PolynomialSystem(eqs, system.unknowns)
    roots = [np.exp(2j * np.pi * np.arange(d) / d) for d in degrees]
    grids = np.meshgrid(*roots, indexing="ij")
    points = np.column_stack([g.ravel() for g in grids])
    return start, points


# -- vectorized path tracking -----------------------------------------

def _batch_solve(A, b):
    """Solve per-path linear systems; rows that fail get NaN."""
    try:
        return np.linalg.solve(A, b[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError:
        out = np.full_like(b, np.nan)
        for i in range(A.shape[0]):
            try:
                out[i] = np.linalg.solve(A[i], b[i])
            except np.linalg.LinAlgError:
                pass
        return out


def track_paths(homotopy, start_points: np.ndarray,
                dt_init: float = DT_INIT):
    """Track every start point from t=1 to t=0.

    Returns (endpoints, status) where status holds tracker-level flags:
    0 = reached t=0, 1 = diverged (at infinity), 2 = step underflow.
    """
    X = np.array(start_points, dtype=complex)
    N, n = X.shape
    t = np.ones(N)
    dt = np.full(N, dt_init)
    streak = np.zeros(N, dtype=int)
    status = np.full(N, -1, dtype=int)
    active = np.ones(N, dtype=bool)
    # last-coordinate checkpoint when t first drops below 1e-4, used by
    # the projective endgame test
    z_mid = np.full(N, np.nan, dtype=complex)
    have_mid = np.zeros(N, dtype=bool)

    while active.any():
        idx = np.flatnonzero(active)
        Xa, ta = X[idx], t[idx]
        dta = np.minimum(dt[idx], ta)
        # RK4 predictor along dx/dt = -Hx^{-1} Ht with h = -dta
        def slope(Xs, ts):
            return -_batch_solve(homotopy.Hx(Xs, ts), homotopy.Ht(Xs, ts))

        h = -dta
        k1 = slope(Xa, ta)
        k2 = slope(Xa + 0.5 * h[:, None] * k1, ta + 0.5 * h)
        k3 = slope(Xa + 0.5 * h[:, None] * k2, ta + 0.5 * h)
        k4 = slope(Xa + h[:, None] * k3, ta + h)
        Xp = Xa + (h / 6.0)[:, None] * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        bad_pred = ~np.isfinite(Xp).all(axis=1)
        Xp[bad_pred] = Xa[bad_pred]
        tn = ta - dta
        # Newton corrector at t = tn; backward-error test against the
        # term-magnitude sums keeps tolerance meaningful at any |x|
        ok = np.zeros(len(idx), dtype=bool)
        for _ in range(CORRECTOR_ITERS):
            R = homotopy.H(Xp, tn)
            mag = np.maximum(1.0, homotopy.Hmag(Xp, tn))
            ok |= (np.abs(R) < CORRECTOR_TOL * mag).all(axis=1)
            if ok.all():
                break
            J = homotopy.Hx(Xp, tn)
            step = _batch_solve(J, R)
            upd = ~ok
            Xp[upd] -= step[upd]
        R = homotopy.H(Xp, tn)
        mag = np.maximum(1.0, homotopy.Hmag(Xp, tn))
        ok |= (np.abs(R) < CORRECTOR_TOL * mag).all(axis=1)
        ok &= np.isfinite(Xp).all(axis=1)

        # accept / reject per path
        acc = idx[ok]
        X[acc] = Xp[ok]
        t[acc] = tn[ok]
        streak[acc] += 1
        grow = streak[acc] >= GROW_AFTER
        dt[acc[grow]] = np.minimum(dt[acc[grow]] * DT_GROW, DT_MAX)
        streak[acc[grow]] = 0
        rej = idx[~ok]
        dt[rej] *= 0.5
        streak[rej] = 0
        mark = acc[(t[acc] < 1e-4) & ~have_mid[acc]]
        z_mid[mark] = X[mark, -1]
        have_mid[mark] = True

        # terminal conditions
        big = np.abs(X[idx]).max(axis=1) > INFINITY_THRESHOLD
        status[idx[big]] = 1
        active[idx[big]] = False
        under = dt[idx] < DT_MIN
        status[idx[under & ~big]] = 2
        active[idx[under & ~big]] = False
        done = t[idx] <= 0.0
        fin = done & ~big & ~under
        status[idx[fin]] = 0
        active[idx[fin]] = False
    return X, status, t, z_mid


def _classify_endpoints(homotopy, X, status, t_end=None):
    """Refine endpoints on the target system and classify each path.

    Divergent branches |x| ~ t^(-1/m) cannot reach the hard norm cutoff
    before the step underflows, so stalled paths are also refined: if
    Newton converges the endpoint is a genuine finite root, otherwise a
    large stall norm marks the path as going to infinity.
    """
    if hasattr(homotopy, "eval_target"):
        eval_t = homotopy.eval_target
        jac_t = homotopy.jac_target
        mag_t = homotopy.target_mag
    else:
        F = homotopy.target_system()
        eval_t, jac_t, mag_t = F.eval_batch, F.jac_batch, F.mag_batch
    out = []
    cand = np.flatnonzero((status == 0) | (status == 2))
    Xr = X[cand].copy()
    raw_norm = np.abs(X[cand]).max(axis=1) if len(cand) else np.array([])
    for _ in range(50):
        if not len(Xr):
            break
        R = eval_t(Xr)
        relres = (np.abs(R) / np.maximum(1.0, mag_t(Xr))).max(axis=1)
        if (relres < 1e-14).all():
            break
        J = jac_t(Xr)
        step = _batch_solve(J, R)
        good = (np.isfinite(step).all(axis=1)
                & (np.abs(Xr).max(axis=1) < 10 * INFINITY_THRESHOLD))
        Xr[good] -= step[good]
    if len(Xr):
        mag = np.maximum(1.0, mag_t(Xr))
        res = (np.abs(eval_t(Xr)) / mag).max(axis=1)
    else:
        res = np.array([])
    conds = np.full(len(Xr), np.inf)
    J = jac_t(Xr) if len(Xr) else None
    for i in range(len(Xr)):
        if np.isfinite(J[i]).all():
            # row-equilibrate by term magnitude so mixed equation
            # degrees do not masquerade as singularity
            conds[i] = np.linalg.cond(J[i] / mag[i][:, None])
    for k, pid in enumerate(cand):
        xnorm = max(1.0, float(np.abs(Xr[k]).max()))
        # a stalled path may only claim the refined root if it stalled
        # in the root's own neighbourhood; otherwise Newton just walked
        # in from the far field of a divergent branch
        moved = float(np.abs(Xr[k] - X[pid]).max()) / max(1.0, raw_norm[k])
        near = status[pid] == 0 or moved < 1e-2
        if not np.isfinite(Xr[k]).all() or xnorm > INFINITY_THRESHOLD:
            cls = AT_INFINITY
        elif near and res[k] < 1e-10 and conds[k] < COND_SINGULAR:
            cls = FINITE_NONSINGULAR
        elif near and res[k] < 1e-8:
            cls = FINITE_SINGULAR
        elif raw_norm[k] > STALL_INFINITY_NORM or (
                t_end is not None and t_end[pid] < STALL_INFINITY_T
                and raw_norm[k] > 2.0):
            # stalled at tiny t with a growing norm and no nearby finite
            # root: slow divergent branch (|x| ~ t^(-1/m))
            cls = AT_INFINITY
        else:
            cls = FAILED
        out.append(TrackedSolution(Xr[k], float(res[k]), cls, int(pid)))
    for pid in np.flatnonzero(status == 1):
        out.append(TrackedSolution(X[pid], math.inf, AT_INFINITY, int(pid)))
    out.sort(key=lambda s: s.path_id)
    return out


def deduplicate(solutions, tol: float = DEDUP_TOL):
    """Collapse endpoints closer than tol; canonical order for determinism."""
    finite = [s for s in solutions
              if s.classification in (FINITE_NONSINGULAR, FINITE_SINGULAR)]
    other = [s for s in solutions
             if s.classification not in (FINITE_NONSINGULAR, FINITE_SINGULAR)]
    finite.sort(key=lambda s: tuple(np.round(
        np.concatenate([s.point.real, s.point.imag]), 8)))
    kept: list[TrackedSolution] = []
    for s in finite:
        dup = False
        for j, k in enumerate(kept):
            sep = np.abs(s.point - k.point).max()
            if sep < tol * max(1.0, float(np.abs(k.point).max())):
                dup = True
                # keep the best-conditioned representative of the group
                if (k.classification == FINITE_SINGULAR
                        and s.classification == FINITE_NONSINGULAR) or (
                        s.classification == k.classification
                        and s.residual < k.residual):
                    kept[j] = s
                break
        if not dup:
            kept.append(s)
    return kept, other


def track_path(homotopy, start_point):
    """Track a single start point; returns one TrackedSolution."""
    X, status, t_end, _ = track_paths(homotopy, np.asarray(
        start_point, dtype=complex)[None, :])
    return _classify_endpoints(homotopy, X, status, t_end)[0]


# -- solving and counting ---------------------------------------------

def _gamma_from(rng) -> complex:
    phi = rng.uniform(0.0, 2.0 * np.pi)
    return complex(np.cos(phi), np.sin(phi))


def _classify_projective(affine_F: CompiledSystem, Fh: CompiledSystem,
                         patch: np.ndarray, Z, status,
                         t_end=None, z_mid=None):
    """Polish projective endpoints on [F_h; patch] and classify.

    Polishing happens in patch coordinates where every root, however
    large its affine norm, is O(1); affine Newton from a stalled path
    can escape the tiny affine basin of a large root.
    """
    N = Z.shape[0]
    n = affine_F.n_vars
    Zr = np.array(Z, dtype=complex)
    for _ in range(50):
        R = Fh.eval_batch(Zr)
        row = Zr @ patch - 1.0
        mag_top = np.maximum(1.0, Fh.mag_batch(Zr))
        relres = np.maximum((np.abs(R) / mag_top).max(axis=1), np.abs(row))
        if (relres < 1e-14).all():
            break
        Jtop = Fh.jac_batch(Zr)
        Jrow = np.broadcast_to(patch, (N, 1, n + 1))
        J = np.concatenate([Jtop, Jrow], axis=1)
        rhs = np.concatenate([R, row[:, None]], axis=1)
        step = _batch_solve(J, rhs)
        good = np.isfinite(step).all(axis=1)
        Zr[good] -= step[good]
    moved = np.abs(Zr - Z).max(axis=1) / np.maximum(1.0, np.abs(Z).max(axis=1))
    R = Fh.eval_batch(Zr)
    row = Zr @ patch - 1.0
    relres = np.maximum(
        (np.abs(R) / np.maximum(1.0, Fh.mag_batch(Zr))).max(axis=1),
        np.abs(row))
    zmax = np.maximum(np.abs(Zr).max(axis=1), 1e-300)
    z0rel = np.abs(Zr[:, -1]) / zmax
    polished = np.isfinite(Zr).all(axis=1) & (relres < 1e-10) & (moved < 0.2)
    out: list = [None] * N
    cand = np.flatnonzero(polished & (z0rel > Z0_INFINITY) & (status != 1))
    if len(cand):
        Xr = Zr[cand, :n] / Zr[cand, -1][:, None]
        mag = np.maximum(1.0, affine_F.mag_batch(Xr))
        res = (np.abs(affine_F.eval_batch(Xr)) / mag).max(axis=1)
        J = affine_F.jac_batch(Xr)
        conds = np.full(len(cand), np.inf)
        for i in range(len(cand)):
            if np.isfinite(J[i]).all():
                # row-equilibrate by term magnitude so mixed equation
                # degrees do not masquerade as singularity
                conds[i] = np.linalg.cond(J[i] / mag[i][:, None])
        for k, pid in enumerate(cand):
            xnorm = float(np.abs(Xr[k]).max())
            if not np.isfinite(Xr[k]).all() or xnorm > INFINITY_THRESHOLD:
                cls = AT_INFINITY
            elif res[k] < 1e-8 and conds[k] < COND_SINGULAR:
                cls = FINITE_NONSINGULAR
            elif res[k] < 1e-8:
                cls = FINITE_SINGULAR
            else:
                cls = AT_INFINITY
            out[pid] = TrackedSolution(Xr[k], float(res[k]), cls, int(pid))
    for pid in range(N):
        if out[pid] is not None:
            continue
        if status[pid] == 1:
            cls = FAILED
        elif polished[pid] and z0rel[pid] <= Z0_INFINITY:
            cls = AT_INFINITY
        elif z0rel[pid] < math.sqrt(Z0_INFINITY):
            cls = AT_INFINITY
        elif (z_mid is not None and np.isfinite(z_mid[pid])
              and abs(Z[pid, -1]) < 0.5 * abs(z_mid[pid])):
            # endgame: z0 still decaying over the final decades of t, so
            # the path limit lies on the hyperplane at infinity
            cls = AT_INFINITY
        else:
            cls = FAILED
        out[pid] = TrackedSolution(Z[pid, :n], math.inf, cls, int(pid))
    return out


def solve_total_degree(system: PolynomialSystem, seed: int = 0,
                       max_fail_fraction: float = 0.05) -> SolveResult:
    """Track all Bezout paths of the projective total-degree homotopy."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    gamma = _gamma_from(rng)
    start, points = total_degree_start(system)
    Gh = CompiledSystem(_homogenize(start))
    Fh = CompiledSystem(_homogenize(system))
    n = len(system.unknowns)
    patch = (rng.standard_normal(n + 1)
             + 1j * rng.standard_normal(n + 1)) / math.sqrt(2.0 * (n + 1))
    hom = ProjectiveBlendHomotopy(Gh, Fh, gamma, patch)
    W = np.concatenate([points, np.ones((len(points), 1))], axis=1)
    W /= (W @ patch)[:, None]
    affine_F = CompiledSystem(system)
    Z, status, t_end, z_mid = track_paths(hom, W)
    endpoints = _classify_projective(affine_F, Fh, patch, Z, status,
                                     t_end, z_mid)
    # retry failed paths from scratch with a finer initial step
    bad = [s.path_id for s in endpoints if s.classification == FAILED]
    if bad:
        Zr, sr, tr, zm = track_paths(hom, W[bad], dt_init=DT_INIT / 10.0)
        redone = _classify_projective(affine_F, Fh, patch, Zr, sr, tr, zm)
        for s, pid in zip(redone, bad):
            s.path_id = pid
            endpoints[pid] = s
    n_failed = sum(1 for s in endpoints if s.classification == FAILED)
    kept, _ = deduplicate(endpoints)
    result = SolveResult(kept, len(points), n_failed, gamma,
                         time.perf_counter() - t0)
    if n_failed > max_fail_fraction * len(points):
        raise AggregatePathFailure(
            f"{n_failed}/{len(points)} paths failed "
            f"(> {max_fail_fraction:.0%})")
    return result


def count_degree(spec, seeds, method: str = "total-degree",
                 plant_rng=None) -> int:
    """Consensus finite-nonsingular solution count over generic instances.

    Each seed draws a generic instance and solves it from a total-degree
    start.  When the per-seed counts disagree (a few roots of the halo
    problems are near-singular in every projective chart and their paths
    can stall), each fiber is topped up by monodromy before comparing.
    Raises SeedDisagreementError when the seeds still disagree.
    """
    if method == "monodromy":
        counts = {seed: _monodromy_count(spec, seed, plant_rng)
                  for seed in seeds}
    else:
        runs = {}
        for seed in seeds:
            inst = random_generic_instance(spec, seed)
            result = solve_total_degree(inst.instantiated(), seed=seed)
            runs[seed] = (inst, result)
        counts = {seed: r.count for seed, (inst, r) in runs.items()}
        if len(set(counts.values())) != 1:
            for seed, (inst, result) in runs.items():
                pool = monodromy_populate(spec, inst,
                                          result.finite_nonsingular(),
                                          max_loops=8, seed=seed)
                counts[seed] = len(pool)
    values = set(counts.values())
    if len(values) != 1:
        raise SeedDisagreementError(
            f"degree counts disagree across seeds: {counts}")
    return values.pop()


def parameter_homotopy(spec, start_instance: ProblemInstance,
                       start_solutions, target_instance: ProblemInstance,
                       seed: int = 0, gamma: complex | None = None):
    """Track a solved start instance's fiber to a new parameter point."""
    if gamma is None:
        gamma = _gamma_from(np.random.default_rng(seed))
    full = _compile_full(spec.system)
    p0 = np.array([start_instance.parameter_values[p]
                   for p in spec.system.parameters], dtype=complex)
    p1 = np.array([target_instance.parameter_values[p]
                   for p in spec.system.parameters], dtype=complex)
    hom = ParameterPathHomotopy(full, len(spec.system.unknowns),
                                p0, p1, gamma)
    pts = np.array([np.asarray(s.point if isinstance(s, TrackedSolution)
                               else s, dtype=complex)
                    for s in start_solutions])
    X, status, t_end, _ = track_paths(hom, pts)
    endpoints = _classify_endpoints(hom, X, status, t_end)
    kept, _ = deduplicate(endpoints)
    return kept


def monodromy_populate(spec, instance: ProblemInstance, seed_solutions,
                       max_loops: int = 20, seed: int = 0,
                       batch: int | None = None,
                       loop_cap: int | None = None):
    """Grow a fiber by random loops in parameter space.

    Each loop visits two random complex parameter points and returns to
    the instance; endpoints that are new instance solutions are added.
    Stops after max_loops consecutive loops without growth, or after
    loop_cap loops in total when given (useful on problems whose fiber
    is too large to exhaust).  The count is a lower bound on the
    problem degree.

    Only measurement parameters are moved; coefficient parameters of a
    known orbit model (spec metadata "model_parameters") stay fixed,
    since legs that scramble a model wholesale lose most paths to
    infinity and the measurement deck alone already connects the fiber.
    """
    rng = np.random.default_rng(seed)
    full = _compile_full(spec.system)
    n_unk = len(spec.system.unknowns)
    frozen = set(spec.metadata.get("model_parameters", ()))
    move = np.array([p not in frozen for p in spec.system.parameters])
    p0 = np.array([instance.parameter_values[p]
                   for p in spec.system.parameters], dtype=complex)
    target = CompiledSystem(spec.system.substitute_parameters(
        instance.parameter_values))

    def solset_add(pool, pts):
        added = 0
        for x in pts:
            if not np.isfinite(x).all() or np.abs(x).max() > INFINITY_THRESHOLD:
                continue
            mag = np.maximum(1.0, target.mag_batch(x[None, :])[0])
            if (np.abs(target.eval_one(x)) / mag).max() > 1e-10:
                continue
            J = target.jac_one(x)
            if (not np.isfinite(J).all()
                    or np.linalg.cond(J / mag[:, None]) > COND_SINGULAR):
                continue
            dup = any(np.abs(x - y).max()
                      < DEDUP_TOL * max(1.0, float(np.abs(y).max()))
                      for y in pool)
            if not dup:
                pool.append(x)
                added += 1
        return added

    pool: list[np.ndarray] = []
    seeds_arr = [np.asarray(s.point if isinstance(s, TrackedSolution) else s,
                            dtype=complex) for s in seed_solutions]
    solset_add(pool, seeds_arr)
    if not pool:
        return pool
    stale = 0
    loops = 0
    while stale < max_loops and (loop_cap is None or loops < loop_cap):
        loops += 1
        scale = np.abs(p0[move]).max()
        legs = [p0]
        for _ in range(2):
            q = p0.copy()
            nm = int(move.sum())
            q[move] = (rng.standard_normal(nm)
                       + 1j * rng.standard_normal(nm)) * scale
            legs.append(q)
        legs.append(p0)
        pts = np.array(pool if batch is None else pool[:batch])
        for a, b in zip(legs[:-1], legs[1:]):
            hom = ParameterPathHomotopy(full, n_unk, a, b, _gamma_from(rng))
            pts, status, _, _ = track_paths(hom, pts)
            pts = pts[status == 0]
            if not len(pts):
                break
        if len(pts):
            # refine on the instance before admission
            Xr = pts.copy()
            for _ in range(30):
                R = target.eval_batch(Xr)
                rel = (np.abs(R)
                       / np.maximum(1.0, target.mag_batch(Xr))).max(axis=1)
                if (rel < 1e-14).all():
                    break
                step = _batch_solve(target.jac_batch(Xr), R)
                good = np.isfinite(step).all(axis=1)
                Xr[good] -= step[good]
            added = solset_add(pool, Xr)
        else:
            added = 0
        stale = 0 if added else stale + 1
    return pool


def _monodromy_count(spec, seed, plant_rng):
    """Degree lower bound by monodromy from one planted solution."""
    from .problems import plant_instance
    rng = plant_rng if plant_rng is not None else np.random.default_rng(seed)
    inst = plant_instance(spec, rng)
    truth = np.array([inst.truth[u] for u in spec.system.unknowns],
                     dtype=complex)
    pool = monodromy_populate(spec, inst, [truth], seed=seed)
    return len(pool)


def newton_refine(system: PolynomialSystem | CompiledSystem, point,
                  max_iters: int = 20):
    """Damped Newton to residual < 1e-12 (or the iteration cap).

    Returns (refined_point, residual).
    """
    F = system if isinstance(system, CompiledSystem) else CompiledSystem(system)
    x = np.asarray(point, dtype=complex).copy()
    res = float(np.abs(F.eval_one(x)).max())
    for _ in range(max_iters):
        if res < 1e-12:
            break
        J = F.jac_one(x)
        if not np.isfinite(J).all() or np.linalg.cond(J) > 1e14:
            raise SingularJacobianError("Jacobian numerically singular")
        step = np.linalg.solve(J, F.eval_one(x))
        lam = 1.0
        while lam > 1e-6:
            trial = x - lam * step
            r_trial = float(np.abs(F.eval_one(trial)).max())
            if r_trial < res:
                x, res = trial, r_trial
                break
            lam *= 0.5
        else:
            break
    return x, res


# -- run manifests ----------------------------------------------------

def run_manifest(spec_name: str, seed: int, result: SolveResult) -> dict:
    return {
        "spec": spec_name,
        "seed": seed,
        "gamma": [result.gamma.real, result.gamma.imag],
        "paths_total": result.paths_total,
        "paths_failed": result.paths_failed,
        "count": result.count,
        "wall_time_s": result.wall_time_s,
    }


def solutions_to_dicts(solutions) -> list:
    out = []
    for s in sorted(solutions, key=lambda s: (not s.is_real, s.path_id)):
        out.append({
            "point": [[z.real, z.imag] for z in s.point],
            "residual": s.residual,
            "classification": s.classification,
            "is_real": s.is_real,
        })
    return out
