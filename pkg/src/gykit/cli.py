"""Command-line interface: gykit {psi,kernel,bounds,simulate,price,harnack}.

Grids go out as CSV with 17 significant digits, reports as JSON.  Every
run writes one manifest (parameters, seed, version, wall time, output
digests) to --manifest, next to --out, or to stderr.  Exit codes: 0
success, 1 numeric failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .group import GPoint

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def fmt(v: Any) -> str:
    """Locale-free CSV cell: 17 significant digits, 'inf' for infinities."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    return str(v)


def csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(c) for c in r])
    return buf.getvalue()


def json_text(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def parse_triple(s: str) -> tuple[float, float, float]:
    try:
        parts = [float(p) for p in s.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse point {s!r}") from None
    if len(parts) != 3:
        raise UsageError(f"a point needs three comma-separated numbers, got {s!r}")
    return parts[0], parts[1], parts[2]


def parse_point(s) -> GPoint:
    try:
        return GPoint(*(parse_triple(s) if isinstance(s, str) else s))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def read_grid(path: str, columns: tuple[str, ...]) -> list[dict[str, float]]:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"grid file {path!r} not found")
    with p.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in columns if c not in (reader.fieldnames or [])]
        if missing:
            raise UsageError(f"grid file lacks columns {missing}")
        try:
            return [{k: float(v) for k, v in row.items() if k in columns or k in ("x0", "y0", "t0")}
                    for row in reader]
        except ValueError as exc:
            raise UsageError(f"bad number in grid file: {exc}") from None


def _points_and_poles(args, group: bool = True) -> list[tuple]:
    """(point, pole) pairs; GPoints unless ``group`` is False (plain triples)."""
    make = parse_point if group else tuple
    if args.grid:
        rows = read_grid(args.grid, ("x", "y", "t"))
        default_pole = parse_triple(args.pole) if args.pole else None
        out = []
        for r in rows:
            if "x0" in r:
                pole = (r["x0"], r["y0"], r["t0"])
            elif default_pole is not None:
                pole = default_pole
            else:
                raise UsageError("grid rows need x0,y0,t0 columns or a --pole")
            out.append((make((r["x"], r["y"], r["t"])), make(pole)))
        return out
    if not (args.point and args.pole):
        raise UsageError("give --point and --pole, or --grid")
    return [(make(parse_triple(args.point)), make(parse_triple(args.pole)))]


# ---------------------------------------------------------------------------
# commands: each returns {"stdout": text} or {"files": {path: text}} plus params


def cmd_psi(args) -> dict:
    from .value_function import evaluate, is_unreachable, trajectory_arrays

    pairs = _points_and_poles(args)
    rows = []
    for z, pole in pairs:
        ev = evaluate(z, pole)
        rows.append([*z, *pole, ev.E, ev.psi, "unreachable" if is_unreachable(ev.psi) else ev.branch])
    text = csv_text(["x", "y", "t", "x0", "y0", "t0", "E", "psi", "branch"], rows)
    if args.traj:
        if len(pairs) != 1:
            raise UsageError("--traj needs a single --point/--pole pair")
        z, pole = pairs[0]
        tr = trajectory_arrays(z, pole, args.traj + 1)
        cols = ["s", "x", "y", "t", "omega", "lambda1"]
        text += "\n" + csv_text(cols, zip(*(tr[c] for c in cols)))
    return {"text": text}


def cmd_kernel(args) -> dict:
    from . import kernels as K

    pairs = _points_and_poles(args, group=args.type != "kolmo")
    X = np.array([list(z) for z, _ in pairs])
    P = np.array([list(p) for _, p in pairs])
    cols = (X[:, 0], X[:, 1], X[:, 2], P[:, 0], P[:, 1], P[:, 2])
    if args.type == "gamma0":
        v, e, f = K.gamma0_array(*cols, threads=args.threads)
    elif args.type == "gamma_mu":
        v, e, f = K.gamma_mu_array(args.mu, *cols, threads=args.threads)
    elif args.type == "kolmo":
        v = K.kolmo_kernel_array(*cols)
        e = np.zeros_like(v)
        f = np.full(v.shape, K.F_EXACT)
    else:
        raise UsageError(f"unknown kernel type {args.type!r}")
    rows = [[*X[i], *P[i], v[i], e[i], "|".join(K.flag_names(int(f[i])))] for i in range(len(pairs))]
    return {"text": csv_text(["x", "y", "t", "x0", "y0", "t0", "value", "est_error", "flags"], rows)}


def cmd_bounds(args) -> dict:
    from .bounds import BoundsConfig, calibrate_constants, check_sandwich, lower_admissible
    from .kernels import gamma0_array

    pole = parse_point(args.pole)
    rows = read_grid(args.grid, ("x", "y", "t"))
    grid = [GPoint(r["x"], r["y"], r["t"]) for r in rows]
    if args.config:
        try:
            cfg = BoundsConfig.from_dict(json.loads(Path(args.config).read_text()))
        except (OSError, TypeError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read bounds config: {exc}") from None
    else:
        cfg = BoundsConfig(args.eps)
    if not any(lower_admissible(cfg, z, pole) for z in grid):
        raise UsageError("no admissible grid points for these bounds")
    if rows and "gamma" in rows[0]:
        gam = [r["gamma"] for r in rows]
    else:
        g, _, _ = gamma0_array([z.x for z in grid], [z.y for z in grid], [z.t for z in grid],
                               pole.x, pole.y, pole.t, threads=args.threads)
        gam = g.tolist()
    if args.calibrate:
        cfg = calibrate_constants(cfg.eps, grid, pole, gam, C_minus=cfg.C_minus, c_plus=cfg.c_plus,
                                  T=None if math.isinf(cfg.T) else cfg.T)
    rep = check_sandwich(cfg, grid, pole, gam)
    d = rep.to_dict()
    if not args.records:
        d.pop("records")
    return {"text": json_text({"config": cfg.to_dict(), "pole": list(pole), "report": d})}


def cmd_simulate(args) -> dict:
    from .montecarlo import McConfig, constant_model, density_estimate, l0_model, simulate_paths

    model = l0_model() if args.model == "l0" else constant_model(args.mu, args.sigma)
    cfg = McConfig(args.paths, args.steps, args.horizon, args.seed, args.scheme, args.antithetic)
    res = simulate_paths(model, args.x0, args.y0, cfg, threads=args.threads)
    if args.density:
        gx = np.linspace(*_range(args.density_x), args.density_n)
        gy = np.linspace(*_range(args.density_y), args.density_n)
        surf = density_estimate(res.x, res.y, gx, gy)
        rows = ((gx[i], gy[j], surf.values[i, j]) for i in range(gx.size) for j in range(gy.size))
        return {"text": csv_text(["x", "y", "value"], rows)}
    return {"text": csv_text(["path_id", "x", "y"], zip(range(res.x.size), res.x, res.y))}


def _range(s: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in s.split(","))
    except ValueError:
        raise UsageError(f"range must be lo,hi; got {s!r}") from None
    if not hi > lo:
        raise UsageError("range needs hi > lo")
    return lo, hi


def cmd_price(args) -> dict:
    from . import pricing as P

    pcfg = P.PricingConfig(mc_paths=args.paths, mc_steps=args.steps, seed=args.seed,
                           threads=args.threads)
    if args.benchmark == "k0":
        o, m = P.K0_CASE
        rep = P.price_arithmetic_quadrature(o, m, pcfg)
        exact = P.k0_analytic(m, o.maturity)
        ok = abs(rep.price - exact) <= max(rep.est_error, 1e-12 * exact)
        out = {"benchmark": "k0", "analytic": exact, "report": rep.to_dict(),
               "passed": bool(ok)}
        return {"text": json_text(out), "status_line": f"k0 benchmark: {'PASS' if ok else 'FAIL'}",
                "exit": EXIT_OK if ok else EXIT_NUMERIC}
    if args.benchmark == "set":
        res = {}
        for name, (o, m) in P.BENCHMARKS.items():
            q = P.price(o, m, pcfg)
            mc = P.price_monte_carlo(o, m, pcfg)
            z = abs(q.price - mc.price) / math.hypot(q.est_error, mc.est_error)
            res[name] = {"quadrature": q.to_dict(), "monte_carlo": mc.to_dict(), "z": z,
                         "passed": bool(z <= 3.0)}
        ok = all(r["passed"] for r in res.values())
        return {"text": json_text({"benchmark": "set", "results": res, "passed": ok}),
                "exit": EXIT_OK if ok else EXIT_NUMERIC}
    if not args.spec:
        raise UsageError("give --spec FILE or --benchmark")
    try:
        o, m = P.load_spec(args.spec)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read spec: {exc}") from None
    rep = P.price(o, m, pcfg, "monte_carlo" if args.method == "mc" else "quadrature")
    return {"text": json_text({"spec": P.dump_spec(o, m), "report": rep.to_dict()})}


def cmd_harnack(args) -> dict:
    from .harnack import (ChainConfig, Control, chain_count_bound, chain_points, chain_times,
                          integrate_admissible_path, lower_bound_multiplier)

    cfg = ChainConfig(args.theta, args.M, args.T0)
    d = args.t0 - args.t
    if not d > 0.0:
        raise UsageError("need t < t0")
    if args.omega == "zero":
        ctrl = Control.zero(d)
    else:
        try:
            c = float(args.omega.split(":", 1)[1]) if args.omega.startswith("const:") else None
        except ValueError:
            c = None
        if c is None:
            raise UsageError("--omega must be 'zero' or 'const:VALUE'")
        ctrl = Control(np.array([c]), d)
    times = chain_times(args.t, args.t0, cfg, ctrl if args.omega != "zero" else None)
    phi = ctrl.energy()
    start = GPoint(args.x0, args.y0, args.t0)
    path = integrate_admissible_path(start, ctrl, d, args.steps)
    pts = chain_points(path, times, cfg.theta)
    out = {
        "times": times,
        "steps": len(times) - 1,
        "energy": phi,
        "count_bound": chain_count_bound(phi, args.t, args.t0, cfg),
        "multiplier": lower_bound_multiplier(phi, args.t, args.t0, cfg),
        "points": [list(p) for p in pts.points],
        "links_verified": pts.verified,
        "h": cfg.h,
        "beta": cfg.beta,
    }
    return {"text": json_text(out)}


COMMANDS: dict[str, Callable[[argparse.Namespace], dict]] = {
    "psi": cmd_psi, "kernel": cmd_kernel, "bounds": cmd_bounds, "simulate": cmd_simulate,
    "price": cmd_price, "harnack": cmd_harnack,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gykit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"gykit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="write the result here instead of stdout")
        p.add_argument("--manifest", help="run manifest path (default: OUT.manifest.json or stderr)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $GYKIT_THREADS or 1)")
        return p

    p = common(sub.add_parser("psi", help="value function between a point and a pole"))
    p.add_argument("--point")
    p.add_argument("--pole")
    p.add_argument("--grid", help="CSV with x,y,t (and optionally x0,y0,t0)")
    p.add_argument("--traj", type=int, default=0, metavar="N", help="append N+1 trajectory samples")

    p = common(sub.add_parser("kernel", help="fundamental solutions"))
    p.add_argument("--type", choices=("gamma0", "gamma_mu", "kolmo"), default="gamma0")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--point")
    p.add_argument("--pole")
    p.add_argument("--grid")

    p = common(sub.add_parser("bounds", help="two-sided bound report on a grid"))
    p.add_argument("--grid", required=True, help="CSV with x,y,t (optional gamma column)")
    p.add_argument("--pole", default="1,0,0")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--config", help="JSON bounds configuration")
    p.add_argument("--calibrate", action="store_true")
    p.add_argument("--records", action="store_true", help="include per-point records")

    p = common(sub.add_parser("simulate", help="Monte Carlo terminal samples or density"))
    p.add_argument("--model", choices=("l0", "gbm"), default="l0")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=math.sqrt(2.0))
    p.add_argument("--x0", type=float, default=1.0)
    p.add_argument("--y0", type=float, default=0.0)
    p.add_argument("--paths", type=int, default=10000)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scheme", choices=("exact_lognormal", "euler", "milstein"),
                   default="exact_lognormal")
    p.add_argument("--antithetic", action="store_true")
    p.add_argument("--density", action="store_true", help="emit a KDE grid instead of samples")
    p.add_argument("--density-x", default="0.05,6")
    p.add_argument("--density-y", default="0.01,6")
    p.add_argument("--density-n", type=int, default=40)

    p = common(sub.add_parser("price", help="Asian option prices"))
    p.add_argument("--spec", help='JSON {"option": {...}, "market": {...}}')
    p.add_argument("--method", choices=("quadrature", "mc"), default="quadrature")
    p.add_argument("--benchmark", choices=("k0", "set"))
    p.add_argument("--paths", type=int, default=200_000)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)

    p = common(sub.add_parser("harnack", help="Harnack chain along an admissible path"))
    p.add_argument("--omega", default="zero", help="'zero' or 'const:VALUE'")
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--M", type=float, default=10.0)
    p.add_argument("--t0", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--T0", type=float, required=True)
    p.add_argument("--x0", type=float, default=1.0)
    p.add_argument("--y0", type=float, default=0.0)
    p.add_argument("--steps", type=int, default=1000)
    return ap


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "manifest")}


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)  # exits 2 on bad flags
    if args.threads is not None and args.threads < 1:
        ap.error("--threads must be >= 1")
    t0 = time.perf_counter()
    try:
        res = COMMANDS[args.command](args)
    except (UsageError, ValueError) as exc:
        print(f"gykit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"gykit {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = res["text"]
    digest = hashlib.sha256(text.encode()).hexdigest()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    if "status_line" in res:
        print(res["status_line"], file=sys.stderr if not args.out else sys.stdout)
    manifest = {
        "command": args.command,
        "parameters": _params(args),
        "seeds": [args.seed] if hasattr(args, "seed") else [],
        "version": __version__,
        "wall_time": time.perf_counter() - t0,
        "outputs": {args.out or "<stdout>": digest},
    }
    mtext = json_text(manifest)
    mpath = args.manifest or (args.out + ".manifest.json" if args.out else None)
    if mpath:
        Path(mpath).write_text(mtext, encoding="utf-8")
    else:
        sys.stderr.write(mtext)
    return res.get("exit", EXIT_OK)


if __name__ == "__main__":
    sys.exit(main())
