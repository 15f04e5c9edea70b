"""Circular restricted three-body problem dynamics in the rotating frame.

Nondimensional units throughout: primary separation = 1, frame angular
velocity = 1, total mass = 1.  The primaries sit at (-mu, 0, 0) and
(1-mu, 0, 0).  Provides the equations of motion, the Jacobi constant,
collinear Lagrange points, adaptive propagation, and generation of
Lyapunov/Halo periodic orbits by differential correction, so orbit data
can be produced locally instead of pulling an external catalog.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

EARTH_MOON_MU = 0.01215

FAMILIES = ("LyapunovL1", "LyapunovL2", "HaloL1", "HaloL2")

_SINGULAR_RADIUS = 1e-12
_INTEGRATION_MIN_RADIUS = 1e-6


class SingularStateError(ValueError):
    """State is at (or numerically on top of) one of the primaries."""


class CorrectionDivergenceError(RuntimeError):
    """Differential correction failed to converge."""


@dataclass(frozen=True)
class PeriodicOrbit:
    """A periodic CR3BP orbit: initial state, period, Jacobi constant."""
    initial_state: np.ndarray     # shape (6,)
    period: float
    jacobi: float
    family: str
    mu: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.period <= 0:
            raise ValueError("period must be positive")


def _radii(x, y, z, mu):
    r1 = math.sqrt((x + mu) ** 2 + y * y + z * z)
    r2 = math.sqrt((x - (1.0 - mu)) ** 2 + y * y + z * z)
    return r1, r2


def _check_mu(mu: float) -> None:
    if not (0.0 < mu <= 0.5):
        raise ValueError(f"mass ratio must lie in (0, 1/2], got {mu}")


def cr3bp_derivative(state, mu: float) -> np.ndarray:
    """Time derivative of the rotating-frame state (x,y,z,vx,vy,vz)."""
    _check_mu(mu)
    x, y, z, vx, vy, vz = np.asarray(state, dtype=float)
    r1, r2 = _radii(x, y, z, mu)
    if r1 < _SINGULAR_RADIUS or r2 < _SINGULAR_RADIUS:
        raise SingularStateError(f"state at a primary: r1={r1}, r2={r2}")
    k1 = (1.0 - mu) / r1 ** 3
    k2 = mu / r2 ** 3
    ax = 2.0 * vy + x - k1 * (x + mu) - k2 * (x - (1.0 - mu))
    ay = -2.0 * vx + y - k1 * y - k2 * y
    az = -k1 * z - k2 * z
    return np.array([vx, vy, vz, ax, ay, az])


def effective_potential(x: float, y: float, z: float, mu: float) -> float:
    """Omega = (x^2+y^2)/2 + (1-mu)/r1 + mu/r2."""
    _check_mu(mu)
    r1, r2 = _radii(x, y, z, mu)
    if r1 < _SINGULAR_RADIUS or r2 < _SINGULAR_RADIUS:
        raise SingularStateError(f"point at a primary: r1={r1}, r2={r2}")
    return 0.5 * (x * x + y * y) + (1.0 - mu) / r1 + mu / r2


def jacobi_constant(state, mu: float) -> float:
    """C = 2*Omega - v^2 with the full spatial speed (z-velocity included)."""
    x, y, z, vx, vy, vz = np.asarray(state, dtype=float)
    omega = effective_potential(x, y, z, mu)
    return 2.0 * omega - (vx * vx + vy * vy + vz * vz)


def lagrange_collinear(mu: float, index: int) -> float:
    """x-coordinate of the collinear equilibrium L1, L2 or L3."""
    _check_mu(mu)
    if index not in (1, 2, 3):
        raise ValueError(f"collinear point index must be 1, 2 or 3, got {index}")

    def grad(x):
        r1 = abs(x + mu)
        r2 = abs(x - (1.0 - mu))
        return (x - (1.0 - mu) * (x + mu) / r1 ** 3
                - mu * (x - (1.0 - mu)) / r2 ** 3)

    eps = 1e-7
    if index == 1:
        lo, hi = -mu + eps, 1.0 - mu - eps
    elif index == 2:
        lo, hi = 1.0 - mu + eps, 2.0
    else:
        lo, hi = -2.0, -mu - eps
    x = brentq(grad, lo, hi, xtol=1e-15, rtol=8.9e-16)
    if abs(grad(x)) > 1e-12:
        raise RuntimeError(f"collinear-point root did not converge at L{index}")
    return x


def integrate(state0, mu: float, t_final: float, tol: float = 1e-12,
              t_eval=None, dense: bool = False):
    """Propagate a state with an adaptive 8th-order Runge-Kutta scheme.

    Returns (t, states) with states of shape (n, 6).  With dense=True
    returns (t, states, interpolant).  Raises SingularStateError if the
    trajectory approaches either primary closer than 1e-6.
    """
    if not (1e-14 <= tol <= 1e-6):
        raise ValueError(f"tolerance must lie in [1e-14, 1e-6], got {tol}")
    state0 = np.asarray(state0, dtype=float)
    cr3bp_derivative(state0, mu)  # validates mu and the initial radii
    if t_final == 0.0:
        if dense:
            raise ValueError("dense output needs a nonzero time span")
        return np.array([0.0]), state0[None, :].copy()

    def rhs(t, s):
        x, y, z, vx, vy, vz = s
        r1sq = (x + mu) ** 2 + y * y + z * z
        r2sq = (x - (1.0 - mu)) ** 2 + y * y + z * z
        k1 = (1.0 - mu) * r1sq ** -1.5
        k2 = mu * r2sq ** -1.5
        return (vx, vy, vz,
                2.0 * vy + x - k1 * (x + mu) - k2 * (x - (1.0 - mu)),
                -2.0 * vx + y - k1 * y - k2 * y,
                -(k1 + k2) * z)

    def near_primary(t, s):
        r1, r2 = _radii(s[0], s[1], s[2], mu)
        return min(r1, r2) - _INTEGRATION_MIN_RADIUS
    near_primary.terminal = True

    sol = solve_ivp(rhs, (0.0, t_final), state0, method="DOP853",
                    rtol=tol, atol=tol, t_eval=t_eval,
                    dense_output=dense, events=near_primary)
    if sol.status == 1:
        raise SingularStateError("trajectory approached a primary within 1e-6")
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")
    t, states = sol.t, sol.y.T
    if dense:
        return t, states, sol.sol
    return t, states


def _half_period_crossing(state0, mu, tol, t_max=20.0):
    """Propagate to the next y=0 crossing; return (t_cross, state_cross)."""
    direction = -1.0 if state0[4] > 0 else 1.0

    def rhs(t, s):
        return cr3bp_derivative(s, mu)

    def crossing(t, s):
        return s[1]
    crossing.terminal = True
    crossing.direction = direction

    sol = solve_ivp(rhs, (0.0, t_max), np.asarray(state0, dtype=float),
                    method="DOP853", rtol=tol, atol=tol, events=crossing)
    if not sol.t_events[0].size:
        raise CorrectionDivergenceError("no x-axis crossing found")
    return sol.t_events[0][0], sol.y_events[0][0]


def _linearized_lyapunov_seed(mu, lpoint_index, amplitude):
    """Small-amplitude planar seed from the linearized dynamics at L1/L2."""
    xl = lagrange_collinear(mu, lpoint_index)
    r1, r2 = _radii(xl, 0.0, 0.0, mu)
    c2 = (1.0 - mu) / r1 ** 3 + mu / r2 ** 3
    # in-plane center frequency: lam^4 + (c2-2)lam^2 - (c2-1)(1+2c2) = 0
    lam2 = 0.5 * ((2.0 - c2) + math.sqrt((c2 - 2.0) ** 2
                                         + 4.0 * (c2 - 1.0) * (1.0 + 2.0 * c2)))
    lam = math.sqrt(lam2)
    k = (lam2 + 1.0 + 2.0 * c2) / (2.0 * lam)
    x0 = xl - amplitude
    vy0 = k * amplitude * lam
    return np.array([x0, 0.0, 0.0, 0.0, vy0, 0.0])


def _richardson_halo_seed(mu, lpoint_index, z_amplitude, northern=True):
    """Third-order analytic Halo seed (perpendicular x-axis crossing)."""
    xl = lagrange_collinear(mu, lpoint_index)
    gamma = abs(xl - (1.0 - mu))

    def c_coeff(n):
        if lpoint_index == 1:
            return (mu + (-1.0) ** n * (1.0 - mu) * gamma ** (n + 1)
                    / (1.0 - gamma) ** (n + 1)) / gamma ** 3
        return ((-1.0) ** n * mu + (-1.0) ** n * (1.0 - mu) * gamma ** (n + 1)
                / (1.0 + gamma) ** (n + 1)) / gamma ** 3

    c2, c3, c4 = c_coeff(2), c_coeff(3), c_coeff(4)
    lam2 = 0.5 * ((2.0 - c2) + math.sqrt((c2 - 2.0) ** 2
                                         + 4.0 * (c2 - 1.0) * (1.0 + 2.0 * c2)))
    lam = math.sqrt(lam2)
    k = 2.0 * lam / (lam2 + 1.0 - c2)

    d1 = 3.0 * lam2 / k * (k * (6.0 * lam2 - 1.0) - 2.0 * lam)
    d2 = 8.0 * lam2 / k * (k * (11.0 * lam2 - 1.0) - 2.0 * lam)
    a21 = 3.0 * c3 * (k * k - 2.0) / (4.0 * (1.0 + 2.0 * c2))
    a22 = 3.0 * c3 / (4.0 * (1.0 + 2.0 * c2))
    a23 = -3.0 * c3 * lam / (4.0 * k * d1) * (3.0 * k ** 3 * lam
                                              - 6.0 * k * (k - lam) + 4.0)
    a24 = -3.0 * c3 * lam / (4.0 * k * d1) * (2.0 + 3.0 * k * lam)
    b21 = -3.0 * c3 * lam / (2.0 * d1) * (3.0 * k * lam - 4.0)
    b22 = 3.0 * c3 * lam / d1
    d21 = -c3 / (2.0 * lam2)
    a31 = (-9.0 * lam / (4.0 * d2)
           * (4.0 * c3 * (k * a23 - b21) + k * c4 * (4.0 + k * k))
           + (9.0 * lam2 + 1.0 - c2) / (2.0 * d2)
           * (3.0 * c3 * (2.0 * a23 - k * b21) + c4 * (2.0 + 3.0 * k * k)))
    a32 = (-1.0 / d2 * (9.0 * lam / 4.0
                        * (4.0 * c3 * (k * a24 - b22) + k * c4)
                        + 1.5 * (9.0 * lam2 + 1.0 - c2)
                        * (c3 * (k * b22 + d21 - 2.0 * a24) - c4)))
    b31 = (3.0 / (8.0 * d2)
           * (8.0 * lam * (3.0 * c3 * (k * b21 - 2.0 * a23)
                           - c4 * (2.0 + 3.0 * k * k))
              + (9.0 * lam2 + 1.0 + 2.0 * c2)
              * (4.0 * c3 * (k * a23 - b21) + k * c4 * (4.0 + k * k))))
    b32 = (1.0 / d2 * (9.0 * lam * (c3 * (k * b22 + d21 - 2.0 * a24) - c4)
                       + 0.375 * (9.0 * lam2 + 1.0 + 2.0 * c2)
                       * (4.0 * c3 * (k * a24 - b22) + k * c4)))
    d31 = 3.0 / (64.0 * lam2) * (4.0 * c3 * a24 + c4)
    d32 = 3.0 / (64.0 * lam2) * (4.0 * c3 * (a23 - d21)
                                 + c4 * (4.0 + k * k))
    denom = 2.0 * lam * (lam * (1.0 + k * k) - 2.0 * k)
    s1 = (1.5 * c3 * (2.0 * a21 * (k * k - 2.0) - a23 * (k * k + 2.0)
                      - 2.0 * k * b21)
          - 0.375 * c4 * (3.0 * k ** 4 - 8.0 * k * k + 8.0)) / denom
    s2 = (1.5 * c3 * (2.0 * a22 * (k * k - 2.0) + a24 * (k * k + 2.0)
                      + 2.0 * k * b22 + 5.0 * d21)
          + 0.375 * c4 * (12.0 - k * k)) / denom
    a1 = -1.5 * c3 * (2.0 * a21 + a23 + 5.0 * d21) - 0.375 * c4 * (12.0 - k * k)
    a2 = 1.5 * c3 * (a24 - 2.0 * a22) + 1.125 * c4
    l1 = a1 + 2.0 * lam2 * s1
    l2 = a2 + 2.0 * lam2 * s2
    delta = lam2 - c2

    az = z_amplitude / gamma
    ax2 = (-delta - l2 * az * az) / l1
    if ax2 <= 0:
        raise CorrectionDivergenceError(
            f"z amplitude {z_amplitude} outside the third-order Halo range")
    ax = math.sqrt(ax2)
    dn = 1.0 if northern else -1.0
    freq = 1.0 + s1 * ax2 + s2 * az * az

    # phase tau1 = 0: perpendicular crossing of the y=0 plane
    x_r = a21 * ax2 + a22 * az * az - ax + (a23 * ax2 - a24 * az * az) \
        + (a31 * ax ** 3 - a32 * ax * az * az)
    z_r = dn * (az + d21 * ax * az * (1.0 - 3.0)
                + (d32 * az * ax2 - d31 * az ** 3))
    vy_r = lam * freq * (k * ax + 2.0 * (b21 * ax2 - b22 * az * az)
                         + 3.0 * (b31 * ax ** 3 - b32 * ax * az * az))
    state = np.array([xl + gamma * x_r, 0.0, gamma * z_r,
                      0.0, gamma * vy_r, 0.0])
    period = 2.0 * math.pi / (lam * freq)
    return state, period


def _correct_lyapunov(state0, mu, tol=1e-12, max_iters=50):
    """Adjust vy0 until the half-period crossing is perpendicular."""
    s = np.asarray(state0, dtype=float).copy()
    for _ in range(max_iters):
        t_half, sc = _half_period_crossing(s, mu, tol)
        if abs(sc[3]) < 1e-11:
            return s, 2.0 * t_half
        h = 1e-7 * max(1.0, abs(s[4]))
        sp = s.copy()
        sp[4] += h
        _, scp = _half_period_crossing(sp, mu, tol)
        dvx_dvy = (scp[3] - sc[3]) / h
        if dvx_dvy == 0.0:
            raise CorrectionDivergenceError("zero sensitivity in correction")
        delta = sc[3] / dvx_dvy
        # unstable L1/L2 dynamics: cap the Newton step to stay local
        delta = max(min(delta, 0.02), -0.02)
        s[4] -= delta
    raise CorrectionDivergenceError(
        f"Lyapunov correction did not converge from x0={state0[0]}")


def _correct_halo(state0, mu, tol=1e-12, max_iters=50):
    """Adjust (x0, vy0) at fixed z0 until vx = vz = 0 at the crossing."""
    s = np.asarray(state0, dtype=float).copy()
    for _ in range(max_iters):
        t_half, sc = _half_period_crossing(s, mu, tol)
        err = np.array([sc[3], sc[5]])
        if np.max(np.abs(err)) < 1e-11:
            return s, 2.0 * t_half
        J = np.empty((2, 2))
        for col, idx in enumerate((0, 4)):
            h = 1e-7 * max(1.0, abs(s[idx]))
            sp = s.copy()
            sp[idx] += h
            _, scp = _half_period_crossing(sp, mu, tol)
            J[0, col] = (scp[3] - sc[3]) / h
            J[1, col] = (scp[5] - sc[5]) / h
        try:
            delta = np.linalg.solve(J, err)
        except np.linalg.LinAlgError as exc:
            raise CorrectionDivergenceError(
                "singular correction Jacobian") from exc
        step = np.linalg.norm(delta)
        if step > 0.05:
            delta *= 0.05 / step
        s[0] -= delta[0]
        s[4] -= delta[1]
    raise CorrectionDivergenceError(
        f"Halo correction did not converge from z0={state0[2]}")


def find_periodic_orbit(mu: float, family: str, amplitude: float = 0.01,
                        x0_guess=None, C_target: float | None = None,
                        tol: float = 1e-12,
                        max_iters: int = 50) -> PeriodicOrbit:
    """Generate one periodic orbit by single-shooting differential correction.

    amplitude: x-amplitude of the Lyapunov seed or z-amplitude of the
    Halo seed (nondimensional).  x0_guess, when given, overrides the
    linearized/analytic seed state entirely.  With C_target set, the
    amplitude is continued by a secant iteration until the orbit's
    Jacobi constant matches C_target within 1e-8.
    """
    _check_mu(mu)
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    lpoint = 1 if family.endswith("L1") else 2
    is_halo = family.startswith("Halo")

    # previously corrected orbits seed larger amplitudes (natural
    # parameter continuation; linear seeds only converge when small)
    corrected: dict[float, np.ndarray] = {}

    def correct_from(seed):
        if is_halo:
            s0, period = _correct_halo(seed, mu, tol, max_iters)
        else:
            s0, period = _correct_lyapunov(seed, mu, tol, max_iters)
        return PeriodicOrbit(s0, period, jacobi_constant(s0, mu), family, mu)

    def seed_at(amp):
        if is_halo:
            seed, _ = _richardson_halo_seed(mu, lpoint, amp)
            return seed
        if corrected:
            # rescale the velocity of the nearest corrected amplitude
            a_near = min(corrected, key=lambda a: abs(a - amp))
            if abs(a_near - amp) < 0.6 * max(amp, a_near):
                s = corrected[a_near].copy()
                xl = lagrange_collinear(mu, lpoint)
                s[0] = xl + (s[0] - xl) * amp / a_near
                s[4] = s[4] * amp / a_near
                return s
        return _linearized_lyapunov_seed(mu, lpoint, amp)

    def make(amp):
        if x0_guess is not None:
            return correct_from(np.asarray(x0_guess, dtype=float))
        if not is_halo and amp > 0.006 and not corrected:
            # walk up from a small, linearly seeded orbit
            a = 0.004
            while a < amp:
                orb = correct_from(seed_at(a))
                corrected[a] = orb.initial_state
                a = min(amp, a * 1.6)
        orb = correct_from(seed_at(amp))
        corrected[amp] = orb.initial_state
        return orb

    orbit = make(amplitude)
    if C_target is None:
        return orbit

    # secant continuation of the amplitude to reach the target C
    a0, c0 = amplitude, orbit.jacobi
    a1 = amplitude * 1.05
    orbit1 = make(a1)
    c1 = orbit1.jacobi
    for _ in range(60):
        if abs(c1 - C_target) < 1e-8:
            return orbit1
        if c1 == c0:
            raise CorrectionDivergenceError("flat Jacobi response in "
                                            "amplitude continuation")
        a2 = a1 + (C_target - c1) * (a1 - a0) / (c1 - c0)
        a2 = min(max(a2, 0.2 * a1), 5.0 * a1)  # damp wild secant steps
        a0, c0 = a1, c1
        a1 = a2
        orbit1 = make(a1)
        c1 = orbit1.jacobi
    raise CorrectionDivergenceError(
        f"amplitude continuation did not reach C={C_target}")


def propagate_orbit(orbit: PeriodicOrbit, n: int, tol: float = 1e-12):
    """States at n equally spaced times over one period, shape (n, 6)."""
    if n < 2:
        raise ValueError("need at least 2 samples")
    t_eval = np.linspace(0.0, orbit.period, n, endpoint=False)
    _, states = integrate(orbit.initial_state, orbit.mu, orbit.period,
                          tol=tol, t_eval=t_eval)
    return t_eval, states


def sample_orbit(orbit: PeriodicOrbit, n: int, tol: float = 1e-12) -> np.ndarray:
    """n positions at equal time spacing period/n along the orbit."""
    if n < 8:
        raise ValueError("need at least 8 sample points")
    _, states = propagate_orbit(orbit, n, tol=tol)
    return states[:, :3].copy()


# -- CSV interfaces ---------------------------------------------------

TRAJECTORY_HEADER = ["t", "x", "y", "z", "vx", "vy", "vz"]
CATALOG_HEADER = ["x0", "y0", "z0", "vx0", "vy0", "vz0",
                  "jacobi", "period", "family"]


def trajectory_to_csv(t, states) -> str:
    """Serialize a trajectory: header t,x,...,vz, 17 significant digits."""
    buf = io.StringIO()
    buf.write(",".join(TRAJECTORY_HEADER) + "\n")
    for ti, row in zip(t, states):
        vals = [ti] + list(row)
        buf.write(",".join(f"{v:.16e}" for v in vals) + "\n")
    return buf.getvalue()


def trajectory_from_csv(text: str):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != TRAJECTORY_HEADER:
        raise ValueError(f"expected header {','.join(TRAJECTORY_HEADER)}")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r])
    return data[:, 0], data[:, 1:]


def catalog_to_csv(orbits) -> str:
    """Initial-condition catalog, one orbit per row, sorted by Jacobi C."""
    buf = io.StringIO()
    buf.write(",".join(CATALOG_HEADER) + "\n")
    for orb in sorted(orbits, key=lambda o: o.jacobi):
        s = orb.initial_state
        vals = [f"{v:.16e}" for v in
                [s[0], s[1], s[2], s[3], s[4], s[5], orb.jacobi, orb.period]]
        buf.write(",".join(vals) + f",{orb.family}\n")
    return buf.getvalue()


def catalog_from_csv(text: str, mu: float):
    """Parse an initial-condition catalog into PeriodicOrbit objects."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CATALOG_HEADER:
        raise ValueError(f"expected header {','.join(CATALOG_HEADER)}")
    orbits = []
    for lineno, r in enumerate(rows[1:], start=2):
        if not r:
            continue
        try:
            vals = [float(v) for v in r[:8]]
            family = r[8]
        except (ValueError, IndexError) as exc:
            raise ValueError(f"malformed catalog row at line {lineno}") from exc
        state = np.array(vals[:6])
        orbits.append(PeriodicOrbit(state, vals[7], vals[6], family, mu))
    return orbits
