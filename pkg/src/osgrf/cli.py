"""Command-line front end: ``osgrf pseudonorm|density|field ...``.

Exit codes: 0 success, 1 verification failure (or degenerate level-set
rows), 2 usage or recipe error, 3 inadmissible Hurst index.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, formats
from .linalg import apply_mat_pow, lambda_min, mat_pow
from .pseudonorm import (homogeneity_error, positivity_witness, quasi_triangle_constant,
                         PseudoNorm)
from .recipes import RecipeError, density_from_recipe, load_json, pseudonorm_from_recipe
from .spectral import (InadmissibleError, Quadrature, QuadratureError, SpectralDensity,
                       integrability_check)
from .synthesis import GridSpec, SynthesisError, SynthesisParams, synthesize

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INADMISSIBLE = 0, 1, 2, 3

PSEUDONORM_SUITES = ("homogeneity", "positivity", "quasi-triangle")
FIELD_SUITES = PSEUDONORM_SUITES + ("integrability", "covariance-scaling", "field-scaling",
                                    "stationarity")
DEFAULT_FIELD_SUITES = PSEUDONORM_SUITES + ("integrability", "covariance-scaling")


class UsageError(Exception):
    pass


def fmt(x: float) -> str:
    """Shortest round-trip decimal; integral values print without ``.0``."""
    x = float(x)
    if math.isfinite(x) and x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _emit(text: str, out: str | None) -> None:
    if out and out != "-":
        formats.atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, out: str | None) -> None:
    _emit(json.dumps(obj, indent=2, default=_json_default) + "\n", out)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o).__name__)


def _suites(arg: str | None, allowed, default) -> list[str]:
    if not arg:
        return list(default)
    if arg == "all":
        return list(allowed)
    names = [s.strip() for s in arg.split(",") if s.strip()]
    bad = [s for s in names if s not in allowed]
    if bad:
        raise UsageError(f"unknown suite {bad[0]!r}; choose from {', '.join(allowed)} or 'all'")
    return names


def _read_points(args, dim: int) -> np.ndarray:
    rows = []
    for p in args.point or []:
        rows.append(p)
    if args.points:
        try:
            text = sys.stdin.read() if args.points == "-" else Path(args.points).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {args.points}: {exc.strerror}") from None
        rows += [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows:
        raise UsageError("no points given; use --point X,Y or --points FILE")
    pts = []
    for r in rows:
        try:
            pts.append([float(t) for t in r.replace(",", " ").split()])
        except ValueError:
            raise UsageError(f"cannot parse point {r!r}") from None
        if len(pts[-1]) != dim:
            raise UsageError(f"point {r!r} has {len(pts[-1])} coordinates; expected {dim}")
    return np.array(pts)


# pseudo-norm checks shared by `pseudonorm check` and `field verify`

def _check_homogeneity(rho: PseudoNorm, tol: float, seed: int) -> dict:
    err = homogeneity_error(rho, n=10_000, seed=seed)
    return {"check": "homogeneity", "max_relative_error": err, "tolerance": tol,
            "pass": bool(err <= tol)}


def _check_positivity(rho: PseudoNorm, seed: int) -> dict:
    w = positivity_witness(rho, seed=seed)
    out = {"check": "positivity", "min_on_unit_sphere": w["min"], "median": w["median"],
           "pass": w["positive"]}
    if not w["positive"]:
        out["witness_ray"] = w["witness"]
    return out


def _check_quasi_triangle(rho: PseudoNorm, seed: int) -> dict:
    C = quasi_triangle_constant(rho, 20_000, seed)
    return {"check": "quasi-triangle", "empirical_constant": C, "pass": bool(math.isfinite(C))}


def _pseudonorm_checks(rho: PseudoNorm, suites, tol: float, seed: int) -> list[dict]:
    out = []
    for s in suites:
        if s == "homogeneity":
            out.append(_check_homogeneity(rho, tol, seed))
        elif s == "positivity":
            out.append(_check_positivity(rho, seed))
        elif s == "quasi-triangle":
            out.append(_check_quasi_triangle(rho, seed))
    return out


def levelset(rho: PseudoNorm, level: float, resolution: int, iterations: int = 40,
             bracket=(1e-8, 1e8)) -> list[dict]:
    """Per-ray bisection in ``log r`` for ``rho(r u) = level``."""
    if rho.dim != 2:
        raise UsageError("level sets are traced in dimension 2 only")
    if not level > 0:
        raise UsageError("level must be positive")
    if resolution < 1:
        raise UsageError("resolution must be >= 1")
    theta = 2 * np.pi * np.arange(resolution) / resolution
    u = np.column_stack([np.cos(theta), np.sin(theta)])
    lo = np.full(resolution, math.log(bracket[0]))
    hi = np.full(resolution, math.log(bracket[1]))
    g_lo = np.asarray(rho(np.exp(lo)[:, None] * u)) - level
    g_hi = np.asarray(rho(np.exp(hi)[:, None] * u)) - level
    ok = (g_lo < 0) & (g_hi > 0)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        below = np.asarray(rho(np.exp(mid)[:, None] * u)) < level
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    r = np.exp(0.5 * (lo + hi))
    rows = []
    for k in range(resolution):
        if ok[k]:
            rows.append({"theta": float(theta[k]), "x": float(r[k] * u[k, 0]),
                         "y": float(r[k] * u[k, 1]), "degenerate": False})
        else:
            rows.append({"theta": float(theta[k]), "x": math.nan, "y": math.nan, "degenerate": True})
    return rows


# commands

def cmd_pseudonorm_eval(args) -> int:
    rho = pseudonorm_from_recipe(load_json(args.recipe))
    pts = _read_points(args, rho.dim)
    vals = np.atleast_1d(rho(pts))
    lines = [",".join(fmt(c) for c in p) + "," + fmt(v) for p, v in zip(pts, vals)]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_pseudonorm_check(args) -> int:
    rho = pseudonorm_from_recipe(load_json(args.recipe))
    suites = _suites(args.suite, PSEUDONORM_SUITES, PSEUDONORM_SUITES)
    checks = _pseudonorm_checks(rho, suites, args.tol or 1e-9, args.seed)
    passed = all(c["pass"] for c in checks)
    _emit_json({"recipe": rho.recipe(), "checks": checks, "passed": passed}, args.out)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_pseudonorm_levelset(args) -> int:
    rho = pseudonorm_from_recipe(load_json(args.recipe))
    rows = levelset(rho, args.level, args.resolution)
    body = "theta,x,y\n" + "".join(
        f"{fmt(r['theta'])},{fmt(r['x'])},{fmt(r['y'])}\n" for r in rows)
    _emit(body, args.out)
    bad = sum(r["degenerate"] for r in rows)
    if bad:
        print(f"osgrf: {bad} of {len(rows)} rays did not bracket level {args.level}; "
              "rows marked nan", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _density(args) -> SpectralDensity:
    return density_from_recipe(load_json(args.recipe), hurst=args.hurst)


def cmd_density_check(args) -> int:
    f = _density(args)
    rep = integrability_check(f)
    out = {"H": f.H, "lambda_min": lambda_min(f.E), "trace_E": f.trace_E, "admissible": True,
           "integrability": {"converged": rep.converged, "outer_ratio": rep.ratio,
                             "inner_ratio": rep.inner_ratio,
                             "expected_outer_ratio": rep.expected_outer_ratio}}
    _emit_json(out, args.out)
    return EXIT_OK if rep.converged else EXIT_FAIL


def _grid(args, dim: int) -> GridSpec:
    try:
        return GridSpec(dim=dim, n=args.grid_n, extent=args.grid_extent)
    except SynthesisError as exc:
        raise UsageError(str(exc)) from None


def _params(args) -> SynthesisParams:
    if args.freq_cutoff < 1:
        raise UsageError("--freq-cutoff must be >= 1")
    return SynthesisParams(freq_cutoff=args.freq_cutoff, seed=args.seed)


def _sidecar(f, grid, params, r, fmt_name, extra=None) -> dict:
    out = {"format": fmt_name, "seed": params.seed, "stream": r.stream,
           "grid": {"dim": grid.dim, "n": grid.n, "extent": grid.extent},
           "params": params.to_json(grid), "density": f.recipe(),
           "imag_residue": r.imag_residue, "method": r.method}
    if extra:
        out.update(extra)
    return out


def cmd_field_generate(args) -> int:
    f = _density(args)
    grid, params = _grid(args, f.dim), _params(args)
    if args.format == "csv" and grid.dim > 2:
        raise UsageError("CSV export supports d <= 2")
    if args.format == "pgm" and grid.dim != 2:
        raise UsageError("PGM export needs d = 2")
    r = synthesize(f, grid, params, stream=args.stream)
    extra = None
    if args.format == "bin":
        payload = formats.encode_bin(r.values)
    elif args.format == "csv":
        payload = formats.encode_csv(r.values, grid.step)
    else:
        payload, bounds = formats.encode_pgm(r.values)
        extra = {"rescale": bounds}
    formats.atomic_write(args.out, payload)
    formats.write_json(str(args.out) + ".json", _sidecar(f, grid, params, r, args.format, extra))
    return EXIT_OK


def _scaling_points(f: SpectralDensity, a: float, grid: GridSpec, count: int = 3) -> np.ndarray:
    """Points ``x`` with ``x`` and ``a**E x`` inside the grid box, small against its size."""
    A = mat_pow(f.E.entries, a)
    L = grid.extent
    if f.dim == 1:
        cand = np.array([[1.0]])
    else:
        rng = np.random.default_rng(0)
        cand = np.abs(rng.normal(size=(256, f.dim)))
        cand = np.vstack([np.full((1, f.dim), 1.0), cand])
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
    pts = []
    for u in cand:
        for frac in (0.05, 0.02, 0.01):
            x = u * frac * L / max(1.0, np.linalg.norm(A @ u))
            y = A @ x
            if np.all(x >= 0) and np.all(y >= 0) and np.all(x <= L) and np.all(y <= L) \
                    and min(np.min(x[x > 0]), np.min(y[y > 0])) >= 2 * grid.step:
                pts.append(x)
                break
        if len(pts) == count:
            return np.array(pts)
    raise UsageError("no test points with images inside the grid; adjust --scale or --grid-extent")


def _covariance_pairs(d: int) -> list:
    base = [((0.3, 0.0, 0.1), (0.0, 0.2, 0.15)), ((0.1, 0.2, 0.05), (0.25, 0.05, 0.2)),
            ((0.2, 0.2, 0.2), (0.2, 0.2, 0.2))]
    return [(np.array(x[:d]), np.array(y[:d])) for x, y in base]


def _realization_check(f, path: str, seed_override) -> dict:
    values = formats.read_bin(path)
    side = load_json(path + ".json")
    g = side["grid"]
    grid = GridSpec(dim=g["dim"], n=g["n"], extent=g["extent"])
    p = side["params"]
    params = SynthesisParams(freq_cutoff=p["freq_cutoff"], seed=side["seed"],
                             freq_step=p["freq_step"], allow_direct=p.get("allow_direct", False))
    fresh = synthesize(f, grid, params, stream=side.get("stream", 0)).values
    stats = {}
    for name, v in (("file", values), ("in_process", fresh)):
        stats[name] = [float(np.mean(np.diff(v, axis=ax) ** 2)) for ax in range(v.ndim)]
    same = values.shape == fresh.shape and bool(np.array_equal(values, fresh))
    return {"check": "realization", "input": path, "axis_lag1_mean_square": stats,
            "identical_to_in_process": same, "pass": same}


def cmd_field_verify(args) -> int:
    f = _density(args)
    suites = _suites(args.suite, FIELD_SUITES, DEFAULT_FIELD_SUITES)
    a = args.scale
    if not a > 0:
        raise UsageError("--scale must be positive")
    checks = _pseudonorm_checks(f.rho, [s for s in suites if s in PSEUDONORM_SUITES],
                                args.tol or 1e-9, args.seed)
    for s in suites:
        if s == "integrability":
            rep = integrability_check(f)
            checks.append({"check": s, "outer_ratio": rep.ratio, "inner_ratio": rep.inner_ratio,
                           "expected_outer_ratio": rep.expected_outer_ratio, "pass": rep.converged})
        elif s == "covariance-scaling":
            rep = analysis.covariance_scaling_check(f, a, _covariance_pairs(f.dim), args.tol or 0.01,
                                                    Quadrature())
            checks.append({"check": s, **rep, "pass": rep["passed"]})
        elif s == "field-scaling":
            grid, params = _grid(args, f.dim), _params(args)
            pts = _scaling_points(f, a, grid)
            rep = analysis.scaling_test(f, a, pts, args.realizations or 500, args.seed,
                                        args.tol or 0.15, grid, params)
            checks.append({"check": s, **rep.to_json(), "pass": rep.passed})
        elif s == "stationarity":
            grid, params = _grid(args, f.dim), _params(args)
            n = grid.n
            lag = [max(1, n // 32)] + [0] * (f.dim - 1)
            base = [[n // 8] * f.dim, [n // 2] * f.dim, [n // 2 + n // 8] + [n // 4] * (f.dim - 1)]
            rep = analysis.stationarity_test(f, lag, base, args.realizations or 1000, args.seed,
                                             args.tol or 0.1, grid, params)
            checks.append({"check": s, **rep, "pass": rep["passed"]})
    if args.input:
        checks.append(_realization_check(f, args.input, args.seed))
    passed = all(c["pass"] for c in checks)
    _emit_json({"density": f.recipe(), "checks": checks, "passed": passed}, args.out)
    return EXIT_OK if passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="osgrf", description="Operator scaling Gaussian random fields")
    top = p.add_subparsers(dest="group", required=True)

    def common(sp, recipe=True):
        if recipe:
            sp.add_argument("--recipe", required=True, help="JSON recipe file")
        sp.add_argument("--out", help="output file (default: standard output)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol", type=float)

    def field_flags(sp):
        sp.add_argument("--hurst", type=float, help="override H from the recipe")
        sp.add_argument("--grid-n", type=int, default=256)
        sp.add_argument("--grid-extent", type=float, default=1.0)
        sp.add_argument("--freq-cutoff", type=int, default=512)

    pn = top.add_parser("pseudonorm", help="evaluate, check or trace pseudo-norms")
    pn_sub = pn.add_subparsers(dest="cmd", required=True)
    sp = pn_sub.add_parser("eval", help="CSV of coordinates and rho")
    common(sp)
    sp.add_argument("--point", action="append", help="comma-separated coordinates (repeatable)")
    sp.add_argument("--points", help="file of points, one per line ('-' for stdin)")
    sp.set_defaults(func=cmd_pseudonorm_eval)
    sp = pn_sub.add_parser("check", help="property suite for a pseudo-norm")
    common(sp)
    sp.add_argument("--suite", help=f"comma list of {', '.join(PSEUDONORM_SUITES)} or 'all'")
    sp.set_defaults(func=cmd_pseudonorm_check)
    sp = pn_sub.add_parser("levelset", help="CSV polyline of {rho = level} in 2-D")
    common(sp)
    sp.add_argument("--level", type=float, default=1.0)
    sp.add_argument("--resolution", type=int, default=512)
    sp.set_defaults(func=cmd_pseudonorm_levelset)

    dn = top.add_parser("density", help="spectral density checks")
    dn_sub = dn.add_subparsers(dest="cmd", required=True)
    sp = dn_sub.add_parser("check", help="admissibility and integrability")
    common(sp)
    sp.add_argument("--hurst", type=float, help="override H from the recipe")
    sp.set_defaults(func=cmd_density_check)

    fd = top.add_parser("field", help="synthesize or verify fields")
    fd_sub = fd.add_subparsers(dest="cmd", required=True)
    sp = fd_sub.add_parser("generate", help="write one realization")
    common(sp)
    field_flags(sp)
    sp.add_argument("--format", choices=("bin", "csv", "pgm"), default="bin")
    sp.add_argument("--stream", type=int, default=0, help="realization index for this seed")
    sp.set_defaults(func=cmd_field_generate)
    sp = fd_sub.add_parser("verify", help="run verification suites, JSON report")
    common(sp)
    field_flags(sp)
    sp.add_argument("--suite", help=f"comma list of {', '.join(FIELD_SUITES)} or 'all'")
    sp.add_argument("--scale", type=float, default=2.0, help="scale factor a")
    sp.add_argument("--realizations", type=int, help="Monte Carlo sample size")
    sp.add_argument("--input", help="binary realization to re-check against its sidecar")
    sp.set_defaults(func=cmd_field_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "out", None) and args.out != "-" and not Path(args.out).parent.exists():
        print(f"osgrf: output directory {Path(args.out).parent} does not exist", file=sys.stderr)
        return EXIT_USAGE
    if hasattr(args, "func") and args.func is cmd_field_generate and not args.out:
        print("osgrf: field generate needs --out", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except InadmissibleError as exc:
        print(f"osgrf: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except (RecipeError, UsageError, formats.FormatError, SynthesisError) as exc:
        print(f"osgrf: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except analysis.AnalysisError as exc:
        print(f"osgrf: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QuadratureError as exc:
        print(f"osgrf: quadrature failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
