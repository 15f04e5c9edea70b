"""Command-line pipeline: orbit generation, fitting, degrees, solving.

Exit codes: 0 success, 1 validation error (bad arguments or unparsable
input), 2 numerical failure (divergent correction, path-tracking
failure, seed disagreement).  Machine-readable output goes to stdout
with --json; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dynamics, fitting, homotopy, problems

FAMILY_FLAGS = {
    "lyapunov-l1": "LyapunovL1",
    "lyapunov-l2": "LyapunovL2",
    "halo-l1": "HaloL1",
    "halo-l2": "HaloL2",
}

HALO_PROBLEMS = ("TwoS_Halo_OneUnknownC", "ThreeS_AllUnknownC_Halo",
                 "SixS_Halo")

LONG_RUNNING_PROBLEMS = ("ThreeS_AllUnknownC_Halo",)


class ValidationError(ValueError):
    """Bad command-line input; maps to exit code 1."""


def model_kind(model_flag: str, halo: bool) -> str:
    stem = "Halo" if halo else "Lyapunov"
    return stem + ("Sextic" if model_flag == "sextic" else "Quartic")


def _load_model_file(path: str):
    try:
        return fitting.model_from_json(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"model file not found: {path}")
    except (json.JSONDecodeError, KeyError, ValueError) as e:
        raise ValidationError(f"cannot parse model file {path}: {e}")


def _family_for_problem(args, name: str):
    """Fitted family from --model-file, else a seeded synthetic one."""
    halo = name in HALO_PROBLEMS
    if getattr(args, "model_file", None):
        fam = _load_model_file(args.model_file)
        if not isinstance(fam, fitting.FamilyModel):
            raise ValidationError("problem building needs a family model "
                                  "(fit with --mode two-stage or one-stage)")
        if fitting.is_halo_kind(fam.kind) != halo:
            raise ValidationError(f"{name} needs a "
                                  f"{'Halo' if halo else 'Lyapunov'} family, "
                                  f"model file holds {fam.kind}")
        return fam
    kind = model_kind(args.model, halo)
    return problems.random_family_model(kind, np.random.default_rng(args.seed),
                                        complex_coeffs=False)


def _emit(args, payload: dict, human: str):
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2))
    else:
        print(human)
    out = getattr(args, "out", None)
    if out:
        Path(out).write_text(json.dumps(payload, indent=2) + "\n")


# -- gen-orbits -------------------------------------------------------

def cmd_gen_orbits(args) -> int:
    family = FAMILY_FLAGS[args.family]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    is_halo = family.startswith("Halo")
    if args.amp_min is None:
        args.amp_min = 0.02 if is_halo else 0.01
    if args.amp_max is None:
        args.amp_max = 0.12 if is_halo else 0.05
    orbits = []
    for k, amp in enumerate(np.linspace(args.amp_min, args.amp_max,
                                        args.n_orbits)):
        try:
            if args.c_min is not None and args.c_max is not None:
                c_target = args.c_min + (args.c_max - args.c_min) * (
                    k / max(args.n_orbits - 1, 1))
                orb = dynamics.find_periodic_orbit(
                    args.mu, family, amplitude=amp, C_target=c_target,
                    tol=args.tol)
            else:
                orb = dynamics.find_periodic_orbit(
                    args.mu, family, amplitude=amp, tol=args.tol)
        except dynamics.CorrectionDivergenceError as e:
            raise RuntimeError(f"orbit {k} (amplitude {amp:.4g}) did not "
                               f"converge: {e}")
        orbits.append(orb)
    orbits.sort(key=lambda o: o.jacobi)
    (out_dir / "catalog.csv").write_text(dynamics.catalog_to_csv(orbits))
    for k, orb in enumerate(orbits):
        t, states = dynamics.propagate_orbit(orb, args.samples, tol=args.tol)
        (out_dir / f"orbit_{k:03d}.csv").write_text(
            dynamics.trajectory_to_csv(t, states))
    print(f"wrote {len(orbits)} orbits to {out_dir}", file=sys.stderr)
    return 0


# -- fit --------------------------------------------------------------

def _read_points_csv(path: str) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise ValidationError(f"points file not found: {path}")
    rows = []
    lines = text.splitlines()
    start = 0
    if lines and any(c.isalpha() for c in lines[0]):
        start = 1                      # header row
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError:
            raise ValidationError(f"{path}: cannot parse line {lineno}: "
                                  f"{line!r}")
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValidationError(f"{path}: ragged rows (expected uniform "
                              f"column count)")
    if width == 7:
        # trajectory CSV t,x,y,z,vx,vy,vz: keep positions, drop z if planar
        pos = np.array(rows)[:, 1:4]
        return pos[:, :2] if not np.any(pos[:, 2]) else pos
    if width not in (2, 3):
        raise ValidationError(f"{path}: expected 2, 3, or 7 columns")
    return np.array(rows)


def _catalog_orbit_points(path: str, mu: float, samples: int, tol: float):
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise ValidationError(f"catalog file not found: {path}")
    try:
        orbits = dynamics.catalog_from_csv(text, mu)
    except ValueError as e:
        raise ValidationError(f"cannot parse catalog {path}: {e}")
    halo = orbits[0].family.startswith("Halo")
    pts = [dynamics.sample_orbit(orb, samples, tol=tol) for orb in orbits]
    if not halo:
        pts = [p[:, :2] for p in pts]
    return [(orb.jacobi, p) for orb, p in zip(orbits, pts)], halo


def cmd_fit(args) -> int:
    halo = args.family is not None and args.family.startswith("halo")
    if args.points:
        pts = _read_points_csv(args.points)
        kind = model_kind(args.model, halo or pts.shape[1] == 3)
        if args.mode != "single":
            raise ValidationError("a single points file fits one orbit; "
                                  "use --catalog for family modes")
        model, report = fitting.fit_single_orbit(pts, kind)
    elif args.catalog:
        catalog, halo = _catalog_orbit_points(args.catalog, args.mu,
                                              args.samples, args.tol)
        kind = model_kind(args.model, halo)
        if args.mode == "single":
            raise ValidationError("--mode single needs --points")
        if args.mode == "two-stage":
            model = fitting.fit_family_two_stage(catalog, kind,
                                                 c_degree=args.c_degree)
        else:
            pairs = [(c, p) for c, pts in catalog for p in pts]
            model = fitting.fit_family_one_stage(pairs, kind,
                                                 c_degree=args.c_degree)
        report = None
    else:
        raise ValidationError("fit needs --points or --catalog")
    text = fitting.model_to_json(model, report)
    if args.out:
        Path(args.out).write_text(text + "\n")
    if args.json or not args.out:
        print(text)
    if report is not None:
        print(f"rmse {report.rmse:.3e}  mean geometric distance "
              f"{report.mean_geometric_distance:.3e}  "
              f"({report.n_points} points)", file=sys.stderr)
    return 0


# -- degree -----------------------------------------------------------

def cmd_degree(args) -> int:
    name = args.problem
    if name in LONG_RUNNING_PROBLEMS and not args.long_running:
        raise ValidationError(f"{name} is long-running; pass --long-running")
    fam = _family_for_problem(args, name)
    spec = problems.build_problem(name, fam, mu=args.mu)
    seeds = list(range(args.seed, args.seed + args.seeds))
    method = args.method
    if name in LONG_RUNNING_PROBLEMS and method == "total-degree":
        method = "monodromy"           # Bezout count is out of reach
    degree = homotopy.count_degree(spec, seeds, method=method)
    payload = {"problem": name, "model": args.model, "kind": fam.kind,
               "seeds": seeds, "method": method, "degree": degree}
    _emit(args, payload, f"{name} ({fam.kind}) degree = {degree}")
    return 0


# -- solve ------------------------------------------------------------

def _position_error(spec, truth: dict, solutions) -> float:
    pos = [u for u in spec.system.unknowns
           if u.split("_")[0] in ("x", "y", "u", "v", "w")]
    idx = [spec.system.unknowns.index(u) for u in pos]
    target = np.array([truth[u] for u in pos], dtype=complex)
    best = np.inf
    for s in solutions:
        p = np.asarray(s.point, dtype=complex)[idx]
        best = min(best, float(np.linalg.norm(p - target)))
    return best


def cmd_solve(args) -> int:
    name = args.problem
    fam = _family_for_problem(args, name)
    spec = problems.build_problem(name, fam, mu=args.mu)
    rng = np.random.default_rng(args.seed)
    if args.plant:
        inst = problems.plant_instance(spec, rng)
    elif args.instance:
        try:
            values = json.loads(Path(args.instance).read_text())
        except FileNotFoundError:
            raise ValidationError(f"instance file not found: {args.instance}")
        except json.JSONDecodeError as e:
            raise ValidationError(f"cannot parse {args.instance}: {e}")
        missing = [p for p in spec.system.parameters if p not in values]
        if missing:
            raise ValidationError(f"instance is missing parameter(s): "
                                  f"{', '.join(missing)}")
        inst = problems.ProblemInstance(
            spec, {p: values[p] for p in spec.system.parameters},
            {"kind": "file"})
    else:
        inst = problems.random_generic_instance(spec, args.seed)
    result = homotopy.solve_total_degree(inst.instantiated(), seed=args.seed)
    finite = result.finite_nonsingular()
    real = [s for s in finite if s.is_real]
    payload = {"problem": name, "count": result.count,
               "n_real": len(real),
               "manifest": homotopy.run_manifest(name, args.seed, result),
               "solutions": homotopy.solutions_to_dicts(finite)}
    lines = [f"{name}: {result.count} finite nonsingular solutions, "
             f"{len(real)} real"]
    if inst.truth is not None:
        err = _position_error(spec, inst.truth, finite)
        payload["planted_position_error"] = err
        payload["truth_recovered"] = bool(err < args.tol)
        lines.append(f"planted truth {'recovered' if err < args.tol else 'NOT recovered'}"
                     f" (position error {err:.3e})")
    _emit(args, payload, "\n".join(lines))
    return 0


# -- export-plot ------------------------------------------------------

def _curve_samples(model: fitting.OrbitModel, x_min, x_max, n):
    """Real points of g = 1 by root-finding in y along an x grid."""
    exps = fitting.g_exponents(model.kind)
    max_j = max(j for _, j in exps)
    pts = []
    for x in np.linspace(x_min, x_max, n):
        coeffs = np.zeros(max_j + 1)
        for (i, j), a in zip(exps, model.alpha):
            coeffs[j] += a * x ** i
        coeffs[0] -= 1.0
        roots = np.roots(coeffs[::-1]) if np.any(coeffs[1:]) else []
        for r in roots:
            if abs(r.imag) < 1e-9:
                pts.append((float(x), float(r.real)))
    return pts


def cmd_export_plot(args) -> int:
    model = _load_model_file(args.model_file)
    if isinstance(model, fitting.FamilyModel):
        if args.c is None:
            raise ValidationError("family model needs --c to pick an orbit")
        model = model.model_at(args.c)
    pts = _curve_samples(model, args.x_min, args.x_max, args.n)
    halo = fitting.is_halo_kind(model.kind)
    lines = ["x,y,z" if halo else "x,y"]
    for u, v in pts:
        if halo:
            w = float(np.dot(fitting.basis_matrix(
                fitting.h_exponents(model.kind),
                np.array([[u, v]]))[0], model.beta))
            x, y, z = fitting.halo_frame_inverse(np.array([u, v, w]))
            lines.append(f"{x:.16e},{y:.16e},{z:.16e}")
        else:
            lines.append(f"{u:.16e},{v:.16e}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if not pts:
        print("warning: no real curve points in the sampled range",
              file=sys.stderr)
    return 0


# -- ingest -----------------------------------------------------------

def cmd_ingest(args) -> int:
    try:
        text = Path(args.catalog).read_text()
    except FileNotFoundError:
        raise ValidationError(f"catalog file not found: {args.catalog}")
    try:
        orbits = dynamics.catalog_from_csv(text, args.mu)
    except ValueError as e:
        raise ValidationError(f"cannot parse catalog {args.catalog}: {e}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    orbits.sort(key=lambda o: o.jacobi)
    (out_dir / "catalog.csv").write_text(dynamics.catalog_to_csv(orbits))
    for k, orb in enumerate(orbits):
        t, states = dynamics.propagate_orbit(orb, args.samples, tol=args.tol)
        (out_dir / f"orbit_{k:03d}.csv").write_text(
            dynamics.trajectory_to_csv(t, states))
    print(f"ingested {len(orbits)} orbits into {out_dir}", file=sys.stderr)
    return 0


# -- argument parsing -------------------------------------------------

def _add_common(p, model=True, seed=True):
    p.add_argument("--mu", type=float, default=dynamics.EARTH_MOON_MU)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--json", action="store_true")
    if model:
        p.add_argument("--model", choices=("quartic", "sextic"),
                       default="quartic")
    if seed:
        p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cr3bp-nav",
        description="Algebraic orbit models and crosslink navigation "
                    "problems for the CR3BP")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-orbits", help="generate a periodic orbit catalog")
    _add_common(p)
    p.add_argument("--family", choices=sorted(FAMILY_FLAGS), required=True)
    p.add_argument("--n-orbits", type=int, default=10)
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--amp-min", type=float, default=None)
    p.add_argument("--amp-max", type=float, default=None)
    p.add_argument("--c-min", type=float, default=None)
    p.add_argument("--c-max", type=float, default=None)
    p.add_argument("--out-dir", default="orbits")
    p.set_defaults(func=cmd_gen_orbits)

    p = sub.add_parser("fit", help="fit an implicit model to orbit data")
    _add_common(p)
    p.add_argument("--points", help="CSV of x,y[,z] samples of one orbit")
    p.add_argument("--catalog", help="initial-condition catalog CSV")
    p.add_argument("--family", choices=sorted(FAMILY_FLAGS))
    p.add_argument("--mode", choices=("single", "two-stage", "one-stage"),
                   default="single")
    p.add_argument("--c-degree", type=int, default=3)
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("degree", help="count the degree of a minimal problem")
    _add_common(p)
    p.add_argument("problem", choices=problems.PROBLEM_NAMES)
    p.add_argument("--model-file", help="fitted family model JSON")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--method", choices=("total-degree", "monodromy"),
                   default="total-degree")
    p.add_argument("--long-running", action="store_true")
    p.add_argument("--out", help="write the run manifest JSON here")
    p.set_defaults(func=cmd_degree)

    p = sub.add_parser("solve", help="solve one problem instance")
    _add_common(p)
    p.add_argument("problem", choices=problems.PROBLEM_NAMES)
    p.add_argument("--model-file", help="fitted family model JSON")
    p.add_argument("--instance", help="JSON map parameter -> value")
    p.add_argument("--plant", action="store_true",
                   help="plant a random truth instance instead")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve, tol_default=1e-8)

    p = sub.add_parser("export-plot", help="sample a fitted curve to CSV")
    _add_common(p, model=False, seed=False)
    p.add_argument("model_file")
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--x-min", type=float, default=-2.0)
    p.add_argument("--x-max", type=float, default=2.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_plot)

    p = sub.add_parser("ingest", help="propagate a pre-downloaded catalog")
    _add_common(p, model=False, seed=False)
    p.add_argument("catalog")
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--out-dir", default="ingested")
    p.set_defaults(func=cmd_ingest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "solve" and args.tol == 1e-12:
        args.tol = 1e-8                # recovery tolerance, not integrator
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (dynamics.CorrectionDivergenceError, problems.PlantError,
            fitting.RankDeficiencyError, homotopy.SeedDisagreementError,
            homotopy.AggregatePathFailure, RuntimeError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 2
    except (problems.ModelKindError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
