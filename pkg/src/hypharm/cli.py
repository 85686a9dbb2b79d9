"""Command-line entry point: ``hypharm <command> [options]``.

Every CSV output opens with ``#`` comment lines holding the tool version, the
resolved configuration and the column schema. JSON outputs embed the same
information under ``"meta"``.

Exit codes: 0 success, 2 usage error, 3 failed precondition, 4 failed check.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings

import numpy as np
from scipy.optimize import brentq

from . import __version__
from .cantor import (
    CantorSpec,
    LevelWarning,
    ProductSpec,
    density_sweep,
    embed_circle,
    measure_rows,
    product_quadrature,
    quadrature,
    regularity_constant,
    widest_gap_center,
)
from .eigenfunctions import (
    CalibrationError,
    HyperballEigenfunction,
    horoball_values,
    indicial_roots,
    lambda1,
    n5_hyperannulus,
    n5_profile,
    n5_zero,
    ode_residual,
    profile_eval_h,
    radial_profile,
)
from .geometry import BoundaryPoint, hyperball_from_cone
from .superposition import (
    SuperpositionField,
    auto_level,
    barrier_sum,
    decay_slope,
    envelope_constants,
    fit_envelopes,
    attach_envelopes,
    positivity_onset,
    positivity_scan,
    ray_profile,
    RayRow,
)
from .verify import H_REPORT, calibrate_constants, residual_sweep, sample_ball

EXIT_OK, EXIT_USAGE, EXIT_PRECONDITION, EXIT_CHECK = 0, 2, 3, 4
DECAY_TOL = 0.05
RESIDUAL_MAX = 1e-5


class CheckFailed(Exception):
    pass


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- output


class Output:
    def __init__(self, args):
        self.args = args
        self.config = {
            k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config", "out")
        }

    def _open(self):
        if self.args.out in (None, "-"):
            return sys.stdout, False
        return open(self.args.out, "w", encoding="utf-8", newline=""), True

    def csv(self, columns, rows, notes=()):
        buf = io.StringIO()
        buf.write(f"# hypharm {__version__}\n")
        buf.write(f"# config: {json.dumps(self.config, sort_keys=True, default=_jsonable)}\n")
        for note in notes:
            buf.write(f"# {note}\n")
        buf.write(f"# columns: {','.join(columns)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])
        self._emit(buf.getvalue())

    def json(self, payload):
        doc = {"meta": {"tool": "hypharm", "version": __version__, "config": self.config}, **payload}
        self._emit(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")

    def _emit(self, text):
        fh, close = self._open()
        try:
            fh.write(text)
        finally:
            if close:
                fh.close()


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _resolve_lambda(args) -> float:
    l1 = lambda1(args.n)
    if args.lam is not None:
        if not 0.0 <= args.lam <= l1:
            raise ValueError(f"lambda={args.lam} outside [0, {l1}] for n={args.n}")
        return float(args.lam)
    if not 0.0 <= args.lambda_frac <= 1.0:
        raise ValueError(f"lambda fraction {args.lambda_frac} outside [0, 1]")
    return args.lambda_frac * l1


def _grid(lo, hi, step):
    if step <= 0 or hi < lo:
        raise UsageError("grid needs step > 0 and max >= min")
    # inclusive of hi when it lies on the grid, never beyond it
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.linspace(lo, lo + (count - 1) * step, count)


def _cantor_spec(args) -> CantorSpec:
    return CantorSpec(args.l, args.m, args.a, level_cap=args.level_cap)


def _measure(args, level):
    spec = _cantor_spec(args)
    if args.k:
        return product_quadrature(ProductSpec(spec, args.k, args.epsilon, args.grid), level, args.n, args.rule)
    return quadrature(spec, level, args.n, args.rule)


# ---------------------------------------------------------------- commands


def cmd_eigen(args, out: Output):
    n = args.n
    if args.form == "n5":
        if n != 5:
            raise UsageError("form n5 is the n = 5 example; pass --n 5")
        if args.report == "zeros":
            d1 = n5_zero()
            check = brentq(lambda d: d * math.tanh(d) - 1.0, 0.5, 2.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            out.json({"d1": d1, "d1_brentq": check, "zeros": [-d1, d1], "agree": abs(d1 - check) < 1e-12})
            return
        d = _grid(args.dmin, args.dmax, args.step)
        out.csv(["d", "value"], zip(d, n5_profile(d)))
        return

    if args.report == "zeros":
        raise UsageError("--report zeros is only defined for --form n5")

    if args.form == "profile":
        lam = _resolve_lambda(args)
        prof = radial_profile(n, lam)
        d = _grid(max(args.dmin, 1e-6), args.dmax, args.step)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            h = profile_eval_h(prof, d)
        out.csv(["d", "value", "in_range"], zip(d, h, d >= prof.d0), notes=[f"d0={prof.d0!r}"])
        return

    # uz
    if args.a1 == 0 and args.a2 == 0:
        raise UsageError("(a1, a2) must not both vanish")
    if args.ray is None:
        d = _grid(args.dmin, args.dmax, args.step)
        vals = np.exp(0.5 * (n - 1) * d) * (args.a1 + args.a2 * d)
        out.csv(["d", "value"], zip(d, vals), notes=["d is the signed distance to the horosphere through the origin"])
        return
    if not 0 <= args.ray < n:
        raise UsageError(f"--ray axis must be in [0, {n})")
    z = BoundaryPoint.axis(n, args.z_axis).coords
    direction = BoundaryPoint.axis(n, args.ray).coords
    r = _grid(0.0, args.rmax, args.step)
    if r[-1] >= 1.0:
        raise ValueError("ray radius must stay below 1")
    xs = r[:, None] * direction
    vals = horoball_values(xs, z, n, args.a1, args.a2)
    cols = [f"x{i + 1}" for i in range(n)] + ["value"]
    out.csv(cols, ([*x, v] for x, v in zip(xs, vals)), notes=[f"z=e{args.z_axis + 1}"])


def cmd_frobenius(args, out: Output):
    lam = _resolve_lambda(args)
    r1, r2 = indicial_roots(args.n, lam)
    prof = radial_profile(args.n, lam, N=args.terms)
    dd = np.linspace(prof.d0, prof.d0 + 5.0, 1001)
    res = np.abs(ode_residual(prof, dd))
    out.json(
        {
            "n": args.n,
            "lambda": lam,
            "lambda1": lambda1(args.n),
            "r1": r1,
            "r2": r2,
            "terms": prof.terms,
            "coefficients": prof.coeffs,
            "a2_over_a0": prof.coeffs[2] / prof.coeffs[0],
            "t0": prof.t0,
            "d0": prof.d0,
            "C3": prof.C3,
            "t_accurate": prof.t_accurate,
            "ode_residual_max": float(res.max()),
            "ode_residual_range": [prof.d0, prof.d0 + 5.0],
        }
    )


def cmd_cantor(args, out: Output):
    spec = _cantor_spec(args)
    if args.check_density:
        rows = density_sweep(spec, args.check_density, seed=args.seed)
        cols = ["index", "measure", "lower", "upper", "ratio", "level", "lower_ok", "upper_ok"]
        table = [[i, c.measure, c.lower, c.upper, c.ratio, c.level, c.lower_ok, c.upper_ok] for i, c in enumerate(rows)]
        passed = sum(c.lower_ok and c.upper_ok for c in rows)
        out.csv(
            cols,
            table,
            notes=[f"s={spec.s!r} K={regularity_constant(spec)!r} passed={passed}/{len(rows)}"],
        )
        if passed != len(rows):
            raise CheckFailed(f"{len(rows) - passed} density checks failed")
        return
    m = _measure(args, args.level)
    cols = ["index", "t", "weight"] + [f"x{i + 1}" for i in range(args.n)]
    out.csv(
        cols,
        measure_rows(m),
        notes=[f"s={m.s!r} total_mass={m.total_mass!r} K={m.regularity_K!r} level={m.level} nodes={len(m)}"],
    )


def _ray_target(args, measure):
    picks = sum(x is not None and x is not False for x in (args.ray_node, args.ray_param, args.ray_antipode or None))
    if picks != 1:
        raise UsageError("choose exactly one of --ray-node, --ray-param, --ray-antipode")
    if args.ray_antipode:
        t = widest_gap_center(measure.spec)
        return embed_circle(t, args.n), False, f"antipode t={t!r}"
    if args.ray_param is not None:
        t = args.ray_param
        return embed_circle(t, args.n), None, f"param t={t!r}"
    k = args.ray_node
    if not 0 <= k < len(measure):
        raise UsageError(f"--ray-node must be in [0, {len(measure)})")
    return measure.points[k], True, f"node {k} t={float(measure.nodes[k])!r}"


def cmd_superpose(args, out: Output):
    spec = _cantor_spec(args)
    if args.scan:
        level = args.level if args.level is not None else auto_level(spec, 1.0 - max(args.scan_radii))
        fld = SuperpositionField(_measure(args, level), args.deterministic)
        scan = positivity_scan(fld, args.scan_radii, args.angles)
        rows = ([r, t, lab] for r, labs in zip(scan.radii, scan.labels) for t, lab in zip(scan.params, labs))
        notes = [f"level={level} " + " ".join(f"{k}={v}" for k, v in scan.counts.items())]
        out.csv(["radius", "t", "label"], rows, notes=notes)
        return

    d = np.linspace(args.dmin, args.dmax, args.rows)
    if np.any(d < 0):
        raise UsageError("ray distances must be non-negative")
    deltas = 2.0 / (1.0 + np.exp(d))
    if args.auto_level or args.level is None:
        level = auto_level(spec, float(deltas.min()))
    else:
        level = args.level
    fld = SuperpositionField(_measure(args, level), args.deterministic)
    x0, on_set, label = _ray_target(args, fld.measure)
    if on_set is None:
        on_set = False
    consts = envelope_constants(args.n, fld.s, fld.measure.regularity_K)
    rows = ray_profile(x0, deltas, fld, on_set=on_set)
    notes = [f"target {label}", f"level={level} nodes={len(fld.measure)} s={fld.s!r} rate={consts.rate!r}"]
    fit_error = None
    try:
        consts = fit_envelopes(rows, consts)
        attach_envelopes(rows, consts)
    except ValueError as e:
        fit_error = str(e)
        notes.append(f"envelope fit failed: {e}")
    notes.append(
        "constants " + json.dumps({k: v for k, v in consts.to_dict().items()}, sort_keys=True, default=_jsonable)
    )
    slope = None
    fit_rows = [r for r in rows if 4.0 <= r.d <= 9.0]
    try:
        slope = decay_slope(fit_rows)
        notes.append(f"decay_slope[4,9]={slope!r} expected={-consts.rate!r}")
    except ValueError:
        pass
    onset = positivity_onset(x0, fld) if on_set else None
    if on_set:
        notes.append(f"delta2={onset!r}")
    out.csv(list(RayRow.COLUMNS), (r.as_list() for r in rows), notes=notes)

    failures = []
    if args.check_decay:
        if not on_set:
            failures.append("decay check needs a ray into the set (--ray-node)")
        elif slope is None or abs(slope + consts.rate) > DECAY_TOL:
            failures.append(f"decay slope {slope} not within {DECAY_TOL} of {-consts.rate}")
    if args.check or args.check_decay:
        if fit_error:
            failures.append(fit_error)
        bad = [r for r in fit_rows if not r.envelope_lo <= r.u <= r.envelope_hi] if on_set and not fit_error else []
        if bad:
            failures.append(f"{len(bad)} rows outside the envelope sandwich")
    if args.check:
        bound = consts.M * consts.K
        over = [r for r in rows if r.abs_integral > bound]
        if over:
            failures.append(f"{len(over)} rows exceed M K = {bound:g}")
        coarse = [r for r in rows if r.warning and "coarse" in r.warning]
        if coarse:
            failures.append(f"{len(coarse)} rows violate the level policy")
    if failures:
        raise CheckFailed("; ".join(failures))


def cmd_verify(args, out: Output):
    n = args.n
    if args.calibrate:
        lam = _resolve_lambda(args)
        rep = calibrate_constants(n, lam)
        out.json({"calibration": rep.to_dict()})
        return

    pts = sample_ball(n, args.points, radius=args.radius, seed=args.seed)
    if args.target == "uz":
        lam = lambda1(n)
        z = BoundaryPoint.axis(n, 0).coords

        def f(x):
            return horoball_values(x, z, n, args.a1, args.a2)

        name = f"u_z A1={args.a1} A2={args.a2} n={n}"
    elif args.target == "n5":
        if n != 5:
            raise UsageError("target n5 needs --n 5")
        lam = 4.0
        hb = hyperball_from_cone(BoundaryPoint.axis(5, 0), args.theta)

        def f(x):
            return n5_hyperannulus(x, hb)

        name = f"n5 hyperannulus theta={args.theta}"
    elif args.target == "hyperball":
        lam = _resolve_lambda(args)
        prof = radial_profile(n, lam)
        w = HyperballEigenfunction(hyperball_from_cone(BoundaryPoint.axis(n, 0), args.theta), prof)
        big = sample_ball(n, 50 * args.points, radius=args.radius, seed=args.seed)
        # keep the stencil clear of d0 by a margin of one step size
        keep = big[w.distance(big) > prof.d0 + 0.01][: args.points]
        if len(keep) < args.points:
            raise ValueError("too few sample points beyond d0; adjust --theta or --radius")
        pts = keep

        def f(x):
            return w(x)

        name = f"w_I theta={args.theta} lambda={lam} n={n}"
    else:  # superpose
        lam = lambda1(n)
        spec = _cantor_spec(args)
        level = args.level if args.level is not None else 10
        fld = SuperpositionField(_measure(args, level), args.deterministic)

        def f(x):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", LevelWarning)
                return fld._sum(np.asarray(x, dtype=float), absolute=False)

        name = f"superposition K_{{{spec.l},{spec.m}}} level={level} n={n}"
    rep = residual_sweep(f, lam, pts, h=args.h, target=name)
    out.json({"residual": rep.to_dict()})
    if args.check and not (rep.max < RESIDUAL_MAX and abs(rep.order - 2.0) <= 0.3):
        raise CheckFailed(f"max residual {rep.max:.3g}, order {rep.order:.3f}")


def cmd_barrier(args, out: Output):
    lam = _resolve_lambda(args)
    rng = np.random.default_rng(args.seed)
    pts = rng.standard_normal((args.points, args.n))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    rep = barrier_sum(pts, args.eps, lam=lam, n=args.n)
    out.json({"barrier": rep.to_dict()})
    if args.check and not (rep.openings_ok and rep.sum_ok and rep.bound < rep.epsilon):
        raise CheckFailed("barrier bounds not satisfied")


# ---------------------------------------------------------------- parser


def _common(p):
    p.add_argument("--config", help="JSON file of option defaults (keys are option names)")
    p.add_argument("--out", "-o", help="output path (default stdout)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deterministic", action="store_true", help="serial, fixed-order reductions")
    p.add_argument("--check", action="store_true", help="exit 4 when acceptance checks fail")


def _lambda_opts(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lambda-frac", type=float, default=1.0, help="lambda as a fraction of (n-1)^2/4")
    g.add_argument("--lambda", dest="lam", type=float, default=None, help="absolute lambda")


def _cantor_opts(p):
    p.add_argument("--l", type=int, default=2)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--level-cap", type=int, default=18)
    p.add_argument("--rule", choices=("barycenter", "midpoint"), default="barycenter")
    p.add_argument("--k", type=int, default=0, help="dimension of the product ball factor")
    p.add_argument("--epsilon", type=float, default=0.1, help="radius of the product ball factor")
    p.add_argument("--grid", type=int, default=8, help="cells per axis of the product factor")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hypharm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"hypharm {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eigen", help="tabulate closed-form eigenfunctions")
    _common(p)
    _lambda_opts(p)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--form", choices=("uz", "n5", "profile"), default="uz")
    p.add_argument("--a1", type=float, default=0.0)
    p.add_argument("--a2", type=float, default=1.0)
    p.add_argument("--dmin", type=float, default=-3.0)
    p.add_argument("--dmax", type=float, default=3.0)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--ray", type=int, default=None, help="tabulate along the ray to axis k")
    p.add_argument("--z-axis", type=int, default=0, help="horoball centre axis for --ray")
    p.add_argument("--rmax", type=float, default=0.99)
    p.add_argument("--report", choices=("table", "zeros"), default="table")
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("frobenius", help="series coefficients and calibration of the radial profile")
    _common(p)
    _lambda_opts(p)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--terms", type=int, default=60)
    p.set_defaults(func=cmd_frobenius)

    p = sub.add_parser("cantor", help="quadrature nodes or density checks of K_{l,m}")
    _common(p)
    _cantor_opts(p)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--level", type=int, default=8)
    p.add_argument("--check-density", type=int, default=0, metavar="COUNT")
    p.set_defaults(func=cmd_cantor)

    p = sub.add_parser("superpose", help="superposition field along a ray or on rings")
    _common(p)
    _cantor_opts(p)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--level", type=int, default=None)
    p.add_argument("--auto-level", action="store_true")
    p.add_argument("--ray-node", type=int, default=None)
    p.add_argument("--ray-param", type=float, default=None)
    p.add_argument("--ray-antipode", action="store_true")
    p.add_argument("--dmin", type=float, default=0.5)
    p.add_argument("--dmax", type=float, default=9.0)
    p.add_argument("--rows", type=int, default=30)
    p.add_argument("--check-decay", action="store_true")
    p.add_argument("--scan", action="store_true", help="sign map on rings instead of a ray")
    p.add_argument("--scan-radii", type=float, nargs="+", default=[0.0, 0.5, 0.9, 0.99])
    p.add_argument("--angles", type=int, default=360)
    p.set_defaults(func=cmd_superpose)

    p = sub.add_parser("verify", help="finite-difference eigen-residuals and constant calibration")
    _common(p)
    _lambda_opts(p)
    _cantor_opts(p)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--target", choices=("uz", "n5", "hyperball", "superpose"), default="uz")
    p.add_argument("--a1", type=float, default=0.0)
    p.add_argument("--a2", type=float, default=1.0)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--radius", type=float, default=0.9)
    p.add_argument("--h", type=float, default=H_REPORT)
    p.add_argument("--level", type=int, default=None)
    p.add_argument("--calibrate", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("barrier", help="hyperball barrier sum at the origin")
    _common(p)
    _lambda_opts(p)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--points", type=int, default=10)
    p.add_argument("--eps", type=float, default=1e-3)
    p.set_defaults(func=cmd_barrier)

    ap._subs = sub.choices
    return ap


def _apply_config(ap, argv):
    """Reparse with defaults taken from ``--config`` so explicit flags win."""
    args = ap.parse_args(argv)
    if not args.config:
        return args
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        ap.error(f"cannot read config: {e}")
    if not isinstance(cfg, dict):
        ap.error("config must be a JSON object")
    sub = ap._subs[args.command]
    known = {a.dest for a in sub._actions}
    cfg = {k.replace("-", "_"): v for k, v in cfg.items() if k != "command"}
    unknown = sorted(set(cfg) - known)
    if unknown:
        ap.error(f"unknown config keys: {', '.join(unknown)}")
    sub.set_defaults(**cfg)
    return ap.parse_args(argv)


def main(argv=None) -> int:
    ap = build_parser()
    args = _apply_config(ap, argv)
    out = Output(args)
    try:
        args.func(args, out)
    except UsageError as e:
        print(f"hypharm {args.command}: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except CheckFailed as e:
        print(f"hypharm {args.command}: check failed: {e}", file=sys.stderr)
        return EXIT_CHECK
    except (ValueError, CalibrationError) as e:
        print(f"hypharm {args.command}: {e}", file=sys.stderr)
        return EXIT_PRECONDITION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
