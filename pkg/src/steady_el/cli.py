"""Command-line driver: construct, verify, scan, energy, export-field.

Exit codes: 0 success, 1 verification failure, 2 usage or validation
error, 3 solver failure, 4 precondition failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import tempfile
from fractions import Fraction

import numpy as np

from . import energy, residual
from .errors import PreconditionError, SolverError, SteadyELError, ValidationError
from .families import (FAMILIES, from_dict, make_case_i, make_case_ii, make_case_iii,
                       make_constant_director, make_custom_profile, make_hedgehog, make_landau)
from .grid import DEFAULT_ANGULAR, GridSpec, annulus_grid, sphere_points, sphere_quadrature
from .profile import SCAN_HEADER, ProfileSolution, ShootingConfig, scan_existence
from .stencil import StencilConfig

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_SOLVER, EXIT_PRECONDITION = 0, 1, 2, 3, 4
QUANTITIES = ("u", "p", "d", "grad_d_norm", "head_pressure")

_PI_RE = re.compile(r"^\s*([+-]?)\s*(\d+(?:\.\d*)?|\.\d+)?\s*\*?\s*pi\s*(?:/\s*(\d+))?\s*$")


def parse_pi_multiple(text):
    """Parse ``"10pi"``, ``"-pi/10"``, ``"3*pi"``; returns the multiple of pi or None."""
    m = _PI_RE.match(text.lower())
    if not m:
        return None
    sign, num, den = m.groups()
    q = Fraction(num) if num else Fraction(1)
    if den:
        if int(den) == 0:
            raise ValueError("zero denominator")
        q /= int(den)
    return -q if sign == "-" else q


def real(text):
    """Real number; accepts multiples of pi and ``inf``."""
    q = parse_pi_multiple(text)
    if q is not None:
        return float(q) * math.pi
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def phi_value(text):
    """Phi as an exact multiple of pi (Fraction) when written with pi, else radians."""
    q = parse_pi_multiple(text)
    if q is not None:
        return q
    return real(text)


def vector(text):
    try:
        return [real(x) for x in text.split(",")]
    except argparse.ArgumentTypeError:
        raise
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated vector: {text!r}") from exc


def radii_list(text):
    vals = vector(text)
    if not vals:
        raise argparse.ArgumentTypeError("empty radius list")
    return vals


# ---------------------------------------------------------------------------
# output

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def write_output(text, path):
    """Write atomically (temp file + rename), or to stdout when ``path`` is None."""
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(doc):
    return json.dumps(_clean(doc), indent=2) + "\n"


def fmt(x):
    return "%.17g" % x


def load_spec(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read spec {path!r}: {exc}") from exc
    if isinstance(doc, dict) and "spec" in doc and "family" not in doc:
        doc = doc["spec"]
    return from_dict(doc)


def _grid_from(args, n):
    na = getattr(args, "na", None)
    res = None
    if na is not None:
        res = {2: (na,), 3: (na, 2 * na), 4: (na, na, 2 * na)}.get(n)
        if res is None:
            raise ValidationError(f"no angular grid for n={n}")
    return GridSpec(args.rmin, args.rmax, args.nr, res)


def _require_format(args, allowed):
    if args.format not in allowed:
        raise ValidationError(f"{args.command} supports --format {' or '.join(allowed)}")


# ---------------------------------------------------------------------------
# commands

_FAMILY_ARGS = {
    "case_i": ("c", "m", "theta0"),
    "case_ii": ("phi", "k", "m", "theta1", "theta2"),
    "case_iii": ("psi", "mu", "theta3"),
    "landau": ("a",),
    "hedgehog": ("n",),
    "constant_director": ("n", "d0"),
    "custom_profile": ("profile", "m"),
}


def build_spec(args):
    fam = args.family
    missing = [name for name in _FAMILY_ARGS[fam] if getattr(args, name) is None]
    if missing:
        raise ValidationError(f"{fam} needs --{' --'.join(missing)}")
    extra = {}
    if args.pressure_scale is not None:
        extra["pressure_scale"] = args.pressure_scale
    if args.velocity_shift is not None:
        extra["velocity_shift"] = args.velocity_shift
    if args.director_shift is not None:
        extra["director_shift"] = args.director_shift
    if args.pressure_form is not None:
        extra["pressure_form"] = args.pressure_form
    if fam == "case_i":
        return make_case_i(args.c, args.m, args.theta0, **extra)
    if fam == "case_ii":
        phi = float(args.phi) * math.pi if isinstance(args.phi, Fraction) else args.phi
        return make_case_ii(phi, args.k, args.m, args.theta1, args.theta2, **extra)
    if fam == "case_iii":
        return make_case_iii(args.psi, args.mu, args.theta3, **extra)
    if fam == "landau":
        if extra:
            raise ValidationError("landau takes no perturbation flags")
        return make_landau(args.a)
    if fam == "hedgehog":
        return make_hedgehog(args.n, **extra)
    if fam == "constant_director":
        return make_constant_director(args.n, args.d0, **extra)
    try:
        with open(args.profile) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read profile {args.profile!r}: {exc}") from exc
    if "C1" not in doc:
        raise ValidationError("profile document needs a C1 entry")
    return make_custom_profile(ProfileSolution.from_dict(doc), doc["C1"], args.m,
                               args.theta1 or 0.0, args.theta2 or 0.0, **extra)


def cmd_construct(args):
    _require_format(args, ("json",))
    spec = build_spec(args)
    write_output(dump_json(spec.to_dict()), args.output)
    return EXIT_OK


def verification_report(spec, grid, stencil, tol=None):
    """Residual records, norms and decay constants; returns (document, passed)."""
    recs, _ = residual.verify(spec, grid, stencil)
    if spec.is_self_similar and recs[-1].sup < residual.SCALING_TOL:
        recs.append(residual.sphere_director_residual(spec, stencil=stencil))
    tol = residual.threshold(stencil) if tol is None else tol
    limits = {"unit_length": residual.UNIT_TOL, "scaling": residual.SCALING_TOL}
    checks = {r.equation: bool(r.sup < limits.get(r.equation, tol)) for r in recs}
    norms = residual.smallness_norms(spec, grid)
    decay = residual.decay_estimate_check(spec, grid=grid)
    doc = {"spec": spec.to_dict(), "reports": [r.to_dict() for r in recs],
           "threshold": tol, "checks": checks, "passed": all(checks.values()),
           "smallness": norms.to_dict(), "decay": decay}
    if spec.certificate is not None:
        doc["pressure_certificate"] = spec.certificate
    return doc, doc["passed"]


def cmd_verify(args):
    spec = load_spec(args.spec)
    grid = _grid_from(args, spec.dim)
    stencil = StencilConfig(args.order, args.eta, "forced-fd" if args.mode == "fd"
                            else "analytic-preferred")
    tol = args.tol
    doc, passed = verification_report(spec, grid, stencil, tol)
    if args.format == "csv":
        lines = ["equation,sup,rms,mode"]
        lines += [f"{r['equation']},{fmt(r['sup'])},{fmt(r['rms'])},{r['mode']}"
                  for r in doc["reports"]]
        write_output("\n".join(lines) + "\n", args.output)
    else:
        write_output(dump_json(doc), args.output)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_scan(args):
    bounds = [args.phi_min, args.phi_max, args.phi_step]
    if not all(isinstance(b, Fraction) for b in bounds):
        bounds = [float(b) * math.pi if isinstance(b, Fraction) else b for b in bounds]
    if args.k_max is None or args.k_max < 1:
        raise ValidationError("--k-max must be a positive integer")
    rows = scan_existence(*bounds, args.k_max, ShootingConfig(), threads=max(1, args.threads))
    if args.format == "json":
        write_output(dump_json({"rows": [r.to_dict() for r in rows]}), args.output)
    else:
        write_output("\n".join([SCAN_HEADER] + [r.csv() for r in rows]) + "\n", args.output)
    return EXIT_OK


def cmd_energy(args):
    _require_format(args, ("json",))
    spec = load_spec(args.spec)
    radii = sorted(args.radii)
    r = args.r if args.r is not None else radii[0]
    R = args.R if args.R is not None else radii[-1]
    res = energy.DEFAULT_QUAD_RES[spec.dim] if args.resolution is None else args.resolution
    q = sphere_quadrature(spec.dim, res)
    rep = energy.energy_balance(spec, r, R, radii, q)
    doc = rep.to_dict()
    doc["spec"] = spec.to_dict()
    write_output(dump_json(doc), args.output)
    return EXIT_OK if rep.passed else EXIT_FAIL


def field_samples(spec, quantity, points):
    if quantity not in QUANTITIES:
        raise ValidationError(f"unknown quantity {quantity!r}; choose from {QUANTITIES}")
    if quantity in ("u", "p", "d"):
        u, p, d = spec.values(points)
        return {"u": u, "p": p[:, None], "d": d}[quantity]
    if quantity == "grad_d_norm":
        _, _, D = spec.jets(points)
        return np.sqrt(np.sum(D.grad ** 2, axis=(-2, -1)))[:, None]
    return energy.head_pressure(spec, points)[:, None]


def cmd_export_field(args):
    spec = load_spec(args.spec)
    n = spec.dim
    if args.quantity not in QUANTITIES:
        raise ValidationError(f"unknown quantity {args.quantity!r}; choose from {QUANTITIES}")
    if args.radius is not None:
        if not args.radius > 0:
            raise ValidationError("--radius must be positive")
        res = DEFAULT_ANGULAR.get(n) if args.na is None else _grid_from(args, n).angles(n)
        pts = args.radius * sphere_points(n, res)
    else:
        pts = annulus_grid(_grid_from(args, n), n)
    vals = field_samples(spec, args.quantity, pts)
    if vals.shape[1] == 1:
        names = ["value"]
    else:
        names = [f"{args.quantity}{i + 1}" for i in range(vals.shape[1])]
    if args.format == "json":
        doc = {"columns": [f"x{i + 1}" for i in range(n)] + names,
               "rows": np.hstack([pts, vals]).tolist()}
        write_output(dump_json(doc), args.output)
        return EXIT_OK
    lines = [",".join([f"x{i + 1}" for i in range(n)] + names)]
    lines += [",".join(fmt(x) for x in row) for row in np.hstack([pts, vals])]
    write_output("\n".join(lines) + "\n", args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _add_globals(p, suppress):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--output", "-o", default=default(None),
                   help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=default(None))
    p.add_argument("--threads", type=int, default=default(1))


def _add_grid(p):
    p.add_argument("--rmin", type=real, default=0.5)
    p.add_argument("--rmax", type=real, default=2.0)
    p.add_argument("--nr", type=int, default=9)
    p.add_argument("--na", type=int, default=None,
                   help="angular nodes: (N,) in 2D, (N, 2N) in 3D, (N, N, 2N) in 4D")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="steady-el",
        description="Self-similar steady Ericksen-Leslie solutions: build, verify, scan.")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="write a SolutionSpec JSON")
    _add_globals(p, suppress=True)
    p.add_argument("--family", required=True, choices=FAMILIES)
    for name in ("c", "theta0", "psi", "mu", "theta3", "theta1", "theta2"):
        p.add_argument(f"--{name}", type=real)
    p.add_argument("--phi", type=phi_value)
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--a", type=real)
    p.add_argument("--d0", type=vector)
    p.add_argument("--profile", help="profile JSON for custom_profile")
    p.add_argument("--pressure-scale", type=real)
    p.add_argument("--velocity-shift", type=vector)
    p.add_argument("--director-shift", type=vector)
    p.add_argument("--pressure-form", choices=("exact", "printed"))
    p.set_defaults(func=cmd_construct, default_format="json")

    p = sub.add_parser("verify", help="residual report for a spec")
    _add_globals(p, suppress=True)
    p.add_argument("spec")
    _add_grid(p)
    p.add_argument("--mode", choices=("analytic", "fd"), default="analytic")
    p.add_argument("--order", type=int, choices=(2, 4), default=4)
    p.add_argument("--eta", type=float, default=1e-4, help="relative FD step")
    p.add_argument("--tol", type=float, default=None,
                   help="sup threshold (default 1e-8 analytic, 1e-6 fd)")
    p.set_defaults(func=cmd_verify, default_format="json")

    p = sub.add_parser("scan", help="existence/solve table for periodic profiles")
    _add_globals(p, suppress=True)
    p.add_argument("--phi-min", type=phi_value, required=True)
    p.add_argument("--phi-max", type=phi_value, required=True)
    p.add_argument("--phi-step", type=phi_value, required=True)
    p.add_argument("--k-max", type=int, required=True)
    p.set_defaults(func=cmd_scan, default_format="csv")

    p = sub.add_parser("energy", help="energy identity and h-ladder")
    _add_globals(p, suppress=True)
    p.add_argument("spec")
    p.add_argument("--radii", type=radii_list, default=[0.5, 1.0, 2.0, 4.0])
    p.add_argument("--r", type=real, default=None)
    p.add_argument("--R", type=real, default=None)
    p.add_argument("--resolution", type=int, default=None)
    p.set_defaults(func=cmd_energy, default_format="json")

    p = sub.add_parser("export-field", help="sample a field quantity as CSV")
    _add_globals(p, suppress=True)
    p.add_argument("spec")
    _add_grid(p)
    p.add_argument("--radius", type=real, default=None, help="single sphere instead of annulus")
    p.add_argument("--quantity", required=True)
    p.set_defaults(func=cmd_export_field, default_format="csv")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = args.default_format
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except SteadyELError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
