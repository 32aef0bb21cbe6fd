"""Command line interface.

Subcommands: solve, sweep, bounds, check, corner-demo.  A flat key=value
config file can preload any long flag (dashes may be written as
underscores); explicit flags override the file.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ..bounds import BoundsCertificate, default_mesh_tolerance, sandwich_check
from ..eigensolver import SolverOptions, solve_lambda
from ..geometry.domains import DomainSpec
from ..geometry.mesh import build_mesh
from .checks import SUITES
from .sweep import RunConfig, alpha_sweep, corner_demo, emit, extension_for

__all__ = ["main"]


def _parse_floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x)


def _parse_vertices(text: str) -> list:
    pairs = [seg for seg in text.split(";") if seg]
    return [tuple(float(v) for v in seg.split(",")) for seg in pairs]


def load_config(path: str) -> dict:
    """Flat key = value lines; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line: {raw.rstrip()}")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _add_domain_args(sub):
    sub.add_argument("--domain", required=False,
                     choices=["interval", "disk", "ellipse", "square",
                              "smoothed_square", "smoothed_polygon", "rough_disk"])
    sub.add_argument("--half-length", type=float, help="interval half-length")
    sub.add_argument("--radius", type=float, help="disk / rough disk radius")
    sub.add_argument("--semi-axes", type=_parse_floats, help="ellipse a,b")
    sub.add_argument("--side", type=float, help="square side")
    sub.add_argument("--rounding", type=float, help="corner rounding radius")
    sub.add_argument("--vertices", type=_parse_vertices,
                     help="polygon vertices as x,y;x,y;...")
    sub.add_argument("--amplitude", type=float, help="rough disk amplitude")
    sub.add_argument("--hoelder", type=float, help="rough disk Hoelder exponent")


def build_domain(args) -> DomainSpec:
    kind = args.domain
    if kind is None:
        raise SystemExit("error: --domain is required")
    try:
        if kind == "interval":
            return DomainSpec.interval(_req(args.half_length, "--half-length"))
        if kind == "disk":
            return DomainSpec.disk(_req(args.radius, "--radius"))
        if kind == "ellipse":
            axes = _req(args.semi_axes, "--semi-axes")
            return DomainSpec.ellipse(*axes)
        if kind == "square":
            return DomainSpec.square(_req(args.side, "--side"))
        if kind == "smoothed_square":
            return DomainSpec.smoothed_square(_req(args.side, "--side"),
                                              _req(args.rounding, "--rounding"))
        if kind == "smoothed_polygon":
            return DomainSpec.smoothed_polygon(_req(args.vertices, "--vertices"),
                                               _req(args.rounding, "--rounding"))
        return DomainSpec.rough_disk(_req(args.radius, "--radius"),
                                     _req(args.amplitude, "--amplitude"),
                                     _req(args.hoelder, "--hoelder"))
    except ValueError as exc:
        raise SystemExit(f"error: {exc}")


def _req(value, flag):
    if value is None:
        raise SystemExit(f"error: {flag} is required for this domain")
    return value


def _solver_options(args) -> SolverOptions:
    return SolverOptions(max_iter=args.max_iter, gtol=args.gtol, init=args.init)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="robineig",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="flat key=value file preloading any flag")
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("solve", help="single eigenvalue solve")
    _add_domain_args(sp)
    sp.add_argument("--p", type=float, required=False)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--h", type=float)
    sp.add_argument("--out", help="write the solve record as JSON")
    sp.add_argument("--gtol", type=float, default=1e-6)
    sp.add_argument("--max-iter", type=int, default=5000)
    sp.add_argument("--init", default="exponential_trial",
                    choices=["exponential_trial", "constant"])

    sw = subs.add_parser("sweep", help="alpha sweep with certificate bracket")
    _add_domain_args(sw)
    sw.add_argument("--p", type=float)
    sw.add_argument("--alphas", type=_parse_floats)
    sw.add_argument("--h", type=float)
    sw.add_argument("--csv", help="CSV output path")
    sw.add_argument("--json", help="JSON output path")
    sw.add_argument("--warm", action="store_true", default=True)
    sw.add_argument("--cold", dest="warm", action="store_false")
    sw.add_argument("--sigma", type=float, help="mollification length for chart certificates")
    sw.add_argument("--gtol", type=float, default=1e-6)
    sw.add_argument("--max-iter", type=int, default=5000)
    sw.add_argument("--init", default="exponential_trial",
                    choices=["exponential_trial", "constant"])

    bd = subs.add_parser("bounds", help="print the certificate record for (p, alpha)")
    _add_domain_args(bd)
    bd.add_argument("--p", type=float)
    bd.add_argument("--alpha", type=float)
    bd.add_argument("--sigma", type=float)

    ck = subs.add_parser("check", help="run a property suite; exit 0 iff it passes")
    ck.add_argument("--suite", required=True, choices=sorted(SUITES))
    ck.add_argument("--seed", type=int, default=0)

    cd = subs.add_parser("corner-demo",
                         help="square vs rounded square; exit 0 iff failure demonstrated")
    cd.add_argument("--side", type=float, default=1.0)
    cd.add_argument("--p", type=float, default=2.0)
    cd.add_argument("--alphas", type=_parse_floats)
    cd.add_argument("--h", type=float)
    cd.add_argument("--rounding", type=float)
    cd.add_argument("--gtol", type=float, default=1e-5)
    cd.add_argument("--max-iter", type=int, default=5000)

    args = parser.parse_args(argv)
    if args.config:
        _apply_config(parser, args, argv)

    try:
        return _dispatch(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _apply_config(parser, args, argv):
    """Fill argparse values from the config file without overriding CLI flags."""
    cfg = load_config(args.config)
    explicit = {a.lstrip("-").split("=")[0].replace("-", "_")
                for a in (argv or sys.argv[1:]) if a.startswith("--")}
    converters = {
        "alphas": _parse_floats, "semi_axes": _parse_floats, "vertices": _parse_vertices,
        "p": float, "alpha": float, "h": float, "gtol": float, "sigma": float,
        "half_length": float, "radius": float, "side": float, "rounding": float,
        "amplitude": float, "hoelder": float, "max_iter": int, "seed": int,
        "warm": lambda s: s.lower() in ("1", "true", "yes"),
    }
    for key, raw in cfg.items():
        if key in explicit or not hasattr(args, key):
            continue
        conv = converters.get(key, str)
        setattr(args, key, conv(raw))


def _dispatch(args) -> int:
    if args.command == "solve":
        spec = build_domain(args)
        mesh = build_mesh(spec, _req(args.h, "--h"))
        res = solve_lambda(mesh, _req(args.p, "--p"), _req(args.alpha, "--alpha"),
                           _solver_options(args))
        record = res.record(mesh_h=mesh.h, domain=spec)
        text = json.dumps(record, indent=2)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text + "\n")
        print(text)
        return 0 if res.converged else 1

    if args.command == "sweep":
        spec = build_domain(args)
        config = RunConfig(spec, _req(args.p, "--p"), _req(args.alphas, "--alphas"),
                           _req(args.h, "--h"), _solver_options(args),
                           sigma=args.sigma, warm=args.warm)
        records = alpha_sweep(config)
        if args.csv:
            emit(records, "csv", args.csv)
        if args.json:
            emit(records, "json", args.json)
        if not args.csv and not args.json:
            for r in records:
                print(json.dumps(r.to_dict()))
        return 0 if all(r.converged for r in records) else 1

    if args.command == "bounds":
        spec = build_domain(args)
        ext = extension_for(spec, sigma=args.sigma)
        cert = BoundsCertificate.from_extension(ext, _req(args.p, "--p"),
                                                _req(args.alpha, "--alpha"))
        print(json.dumps(cert.to_record(), indent=2))
        return 0

    if args.command == "check":
        passed, details = SUITES[args.suite](args.seed) if args.suite in ("gradient", "trace") \
            else SUITES[args.suite]()
        print(json.dumps({"suite": args.suite, "passed": passed, "details": details},
                         default=float))
        return 0 if passed else 1

    if args.command == "corner-demo":
        opts = SolverOptions(max_iter=args.max_iter, gtol=args.gtol)
        square_recs, smooth_recs, verdict = corner_demo(
            args.side, args.p, _req(args.alphas, "--alphas"), _req(args.h, "--h"),
            args.rounding, opts)
        out = {
            "square": [r.to_dict() for r in square_recs],
            "smoothed": [r.to_dict() for r in smooth_recs],
            "failure_demonstrated": verdict.failure_demonstrated,
            "fitted_square": verdict.fitted_square,
            "fitted_smoothed": verdict.fitted_smoothed,
        }
        print(json.dumps(out, indent=2))
        return 0 if verdict.failure_demonstrated else 1

    raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())
