"""``capfield`` command-line interface.

Exit codes: 0 ok, 1 suite or inequality failure, 2 usage or unreadable
input, 3 resource refusal (rerun with ``--force``).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io as cio
from .constructions import (
    CoveringSequence, DEFAULT_TRUNCATION, divergence_function, geometric_witness,
    residual_witness, saturating_function,
)
from .exponents import (
    SpectrumConfig, beta_hat_from_values, parse_beta_grid, profile_matrix, spectrum, spectrum_svg,
)
from .poisson import CapFunction
from .slicer import check_domination
from .sphere import Cap, GaugeSpec, ResourceLimitError, as_point, build_net, estimated_net_size, verify_net
from . import suites

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3
RESOURCE_LIMIT = 1e7


class UsageError(Exception):
    pass


class ResourceRefusal(Exception):
    pass


def _guard(count: float, what: str, force: bool) -> None:
    if count > RESOURCE_LIMIT and not force:
        raise ResourceRefusal(f"{what}: estimated {count:.3g} items exceeds {RESOURCE_LIMIT:.0e}; "
                              "rerun with --force to proceed")


def _parse_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError as exc:
        raise UsageError(f"expected a range lo:hi, got {text!r}") from exc
    if lo < 1 or hi < lo:
        raise UsageError(f"bad range {text!r}")
    return lo, hi


def _parse_point(text: str) -> np.ndarray:
    try:
        return as_point([float(x) for x in text.split(",")])
    except ValueError as exc:
        raise UsageError(f"bad point {text!r}: {exc}") from exc


def _load_nets(path):
    try:
        return cio.load_nets(path)
    except (OSError, cio.FormatError, KeyError) as exc:
        raise UsageError(f"cannot read nets from {path}: {exc}") from exc


def _load_function(path):
    try:
        return cio.load_capfunction(path)
    except (OSError, cio.FormatError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read cap function from {path}: {exc}") from exc


def _jobs(args) -> int:
    if getattr(args, "jobs", None):
        return max(1, args.jobs)
    try:
        return max(1, int(os.environ.get("CAPFIELD_JOBS", "1")))
    except ValueError:
        return 1


def _emit(text: str, path) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_nets(args) -> int:
    estimate = estimated_net_size(args.d, args.n)
    if estimate > RESOURCE_LIMIT and not args.force:
        raise ResourceRefusal(f"R_{args.n} on S^{args.d} may hold up to {estimate:.3g} points "
                              f"(~2^{args.n * args.d} scale); rerun with --force")
    nets = build_net(args.d, args.n, args.seed, max_points=np.inf if args.force else RESOURCE_LIMIT)
    reports = [verify_net(net, samples=args.samples, seed=args.seed) for net in nets]
    config = {"command": "nets", "d": args.d, "n": args.n, "seed": args.seed, "samples": args.samples}
    cio.save_nets(nets, args.output, reports, config)
    print("level,cardinality,min_separation,covering_gap,cardinality_ratio,ok")
    for rep in reports:
        print(f"{rep.level},{rep.cardinality},{rep.min_separation:.6g},{rep.covering_gap:.6g},"
              f"{rep.cardinality_ratio:.4f},{str(rep.ok).lower()}")
    return EXIT_OK if all(r.ok for r in reports) else EXIT_FAIL


def _load_covering(path) -> CoveringSequence:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read covering spec {path}: {exc}") from exc
    d = int(doc["d"])
    if "coverings" in doc:
        coverings = [[Cap(np.asarray(c["center"], float), float(c["radius"])) for c in cover]
                     for cover in doc["coverings"]]
    elif "point" in doc:
        p = as_point(doc["point"])
        coverings = [[Cap(p, 2.0 ** (-j))] for j in range(1, int(doc.get("levels", 40)) + 1)]
    else:
        raise UsageError("covering spec needs 'coverings' or 'point'")
    return CoveringSequence(d, coverings)


def cmd_build(args) -> int:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "output", "jobs", "force")}
    config["command"] = "build"
    if args.kind == "divergence":
        if not args.spec:
            raise UsageError("build divergence needs --spec")
        cov = _load_covering(args.spec)
        gamma = args.gamma if args.gamma is not None else cov.d - args.beta
        gauge = GaugeSpec(args.beta, gamma, kind=args.gauge)
        n_max = args.n_max or max(cov.buckets(), default=DEFAULT_TRUNCATION.get(cov.d, 8))
        _guard(sum(len(c) for c in cov.coverings), "divergence caps", args.force)
        try:
            f = divergence_function(cov, gauge, n_max)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    else:
        if not args.nets:
            raise UsageError(f"build {args.kind} needs --nets")
        nets = _load_nets(args.nets)
        d = args.d if args.d is not None else nets[0].d
        levels = {net.level: len(net.points) for net in nets}
        if args.kind == "saturating":
            if args.n is None:
                raise UsageError("build saturating needs --n")
            _guard(sum(levels.get(k, 0) for k in range(1, args.n + 2)), "saturating caps", args.force)
            f = saturating_function(nets, d, args.n)
        elif args.witness == "residual":
            if args.n is None:
                raise UsageError("residual witness needs --n")
            g = _load_function(args.g) if args.g else CapFunction.zero(d)
            f = residual_witness(g, nets, args.n)
        else:
            n_max = args.n_max or DEFAULT_TRUNCATION.get(d, 8)
            lv = [int(x) for x in args.levels.split(",")] if args.levels else None
            _guard(sum(levels.values()) * 2, "witness caps", args.force)
            f = geometric_witness(nets, d, n_max, lv)
    cio.save_capfunction(f, args.output, config)
    print(f"wrote {f.n_terms} caps ({f.mode}) to {args.output}")
    return EXIT_OK


def cmd_profile(args) -> int:
    f = _load_function(args.function)
    lo, hi = _parse_range(args.n)
    trunc = f.meta.get("truncation")
    if trunc is not None and hi > trunc:
        raise UsageError(f"n range reaches {hi} beyond the truncation level {trunc}")
    ys = np.array([_parse_point(y) for y in args.y])
    if ys.shape[1] != f.d + 1:
        raise UsageError("evaluation directions do not match the sphere dimension")
    ns = list(range(lo, hi + 1))
    vals = profile_matrix(f, ys, ns)
    rows = [(n, 1 - 2.0 ** (-n), j, vals[i, j]) for i, n in enumerate(ns) for j in range(len(ys))]
    config = {"command": "profile", "function": cio.config_hash(cio.capfunction_to_dict(f)),
              "y": args.y, "n": args.n}
    _emit(cio.format_csv("profile", ["n", "r", "y_index", "value"], rows, config), args.output)
    if args.verbose:
        tail = min(args.n_tail, len(ns))
        bh = beta_hat_from_values(vals, ns, tail, f.d, clamp=True)
        raw = beta_hat_from_values(vals, ns, tail, f.d, clamp=False)
        for j in range(len(ys)):
            print(f"y[{j}] beta_hat={float(np.atleast_1d(bh)[j]):.4f} "
                  f"unclamped={float(np.atleast_1d(raw)[j]):.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_slicecheck(args) -> int:
    mu = _load_function(args.measure).as_measure()
    nets = _load_nets(args.net)
    net = max(nets, key=lambda n: n.level)
    if not 0 <= args.y_index < len(net.points):
        raise UsageError(f"y-index {args.y_index} out of range for {len(net.points)} net points")
    if not 0 < args.r < 1:
        raise UsageError("r must lie in (0, 1)")
    res = check_domination(mu, net.points[args.y_index], args.r)
    config = {"command": "slicecheck", "r": args.r, "y_index": args.y_index}
    _emit(cio.format_csv("slicecheck", ["lhs", "rhs", "delta_star", "ok"],
                         [(res.lhs, res.rhs, res.delta_star, res.ok)], config), args.output)
    return EXIT_OK if res.ok else EXIT_FAIL


def cmd_spectrum(args) -> int:
    lo, hi = _parse_range(args.n) if args.n else (4, None)
    if args.function:
        f = _load_function(args.function)
        d = f.d
        n_max = hi or f.meta.get("truncation") or DEFAULT_TRUNCATION.get(d, 8)
    else:
        d = args.d
        n_max = hi or DEFAULT_TRUNCATION.get(d, 8)
    need = max(n_max, args.probe_level) + 1
    _guard(estimated_net_size(d, need), "nets for the spectrum run", args.force)
    if args.nets:
        nets = _load_nets(args.nets)
    else:
        nets = list(suites.cached_nets(d, need, args.seed))
    if not args.function:
        f = geometric_witness(nets, d, n_max)
    betas = parse_beta_grid(args.betas)
    conf = SpectrumConfig(probe_level=args.probe_level, n_range=(lo, n_max), n_tail=args.n_tail,
                          tol=args.tol, envelope=args.envelope)
    est = spectrum(f, betas, nets, conf, jobs=_jobs(args))
    config = {"command": "spectrum", "d": d, "seed": args.seed, "betas": betas,
              "function": cio.config_hash(cio.capfunction_to_dict(f)), **est.config}
    cols = ["beta", "dim", "reference", "fit_r2", "n_lo", "n_hi", "count", "degenerate"]
    rows = [[row[c] for c in cols] for row in est.table()]
    _emit(cio.format_csv("spectrum", cols, rows, config), args.output)
    if args.svg:
        spectrum_svg(est, args.svg, cio.config_hash(config))
    ok, info = suites.spectrum_checks(est)
    worst = max(abs(v) for v in info["excess_over_upper"].values())
    print(f"spectrum: {len(rows)} rows, max |dim - (d - beta)| = {worst:.3f}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    results = []
    if args.nets:
        try:
            nets = cio.load_nets(args.nets)
            res = suites.check_nets(nets, samples=args.samples, seed=args.seed, stability=np.inf)
        except (OSError, cio.FormatError, KeyError, ValueError) as exc:
            res = suites.SuiteResult("nets-file", False, f"failing: format ({exc})")
        res.name = "nets-file"
        results.append(res)
    names = args.suite or ([] if args.nets else list(suites.SUITES))
    unknown = [n for n in names if n not in suites.SUITES]
    if unknown:
        raise UsageError(f"unknown suite(s) {unknown}; choose from {sorted(suites.SUITES)}")
    for name in names:
        res = suites.SUITES[name]()
        results.append(res)
        print(res.line(), file=sys.stderr, flush=True)
    if args.nets:
        print(results[0].line(), file=sys.stderr)
    report = {"ok": all(r.ok for r in results), "suites": [r.as_dict() for r in results]}
    text = json.dumps(report, indent=1, sort_keys=True) + "\n"
    _emit(text, args.output)
    return EXIT_OK if report["ok"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    env_jobs = os.environ.get("CAPFIELD_JOBS")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=None,
                        help=f"worker processes (default: CAPFIELD_JOBS={env_jobs or 'unset'} or 1)")
    common.add_argument("--force", action="store_true", help="allow operations above 1e7 items")

    p = argparse.ArgumentParser(prog="capfield", description="Poisson integrals of cap sums on S^d.")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("nets", parents=[common], help="build and verify nested nets")
    q.add_argument("--d", type=int, required=True)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--samples", type=int, default=100_000)
    q.add_argument("-o", "--output", required=True)
    q.set_defaults(func=cmd_nets)

    q = sub.add_parser("build", parents=[common], help="build a cap function")
    q.add_argument("kind", choices=["saturating", "divergence", "witness"])
    q.add_argument("--d", type=int, default=None)
    q.add_argument("--n", type=int, default=None)
    q.add_argument("--nets")
    q.add_argument("--spec", help="covering specification (JSON) for divergence")
    q.add_argument("--beta", type=float, default=0.5)
    q.add_argument("--gamma", type=float, default=None, help="phi exponent (default d - beta)")
    q.add_argument("--gauge", choices=["power", "power-log"], default="power")
    q.add_argument("--n-max", type=int, default=None)
    q.add_argument("--witness", choices=["geometric", "residual"], default="geometric")
    q.add_argument("--levels", help="comma-separated saturating levels for the geometric witness")
    q.add_argument("--g", help="base function g (JSON) for the residual witness")
    q.add_argument("-o", "--output", required=True)
    q.set_defaults(func=cmd_build)

    q = sub.add_parser("profile", parents=[common], help="radial profile CSV")
    q.add_argument("-f", "--function", required=True)
    q.add_argument("--y", action="append", required=True, help="direction, e.g. 0.0,1.0 (repeatable)")
    q.add_argument("--n", default="4:14")
    q.add_argument("--n-tail", type=int, default=6)
    q.add_argument("-v", "--verbose", action="store_true")
    q.add_argument("-o", "--output")
    q.set_defaults(func=cmd_profile)

    q = sub.add_parser("slicecheck", parents=[common], help="domination check at one site")
    q.add_argument("--measure", required=True)
    q.add_argument("--r", type=float, required=True)
    q.add_argument("--y-index", type=int, required=True)
    q.add_argument("--net", required=True)
    q.add_argument("-o", "--output")
    q.set_defaults(func=cmd_slicecheck)

    q = sub.add_parser("spectrum", parents=[common], help="empirical spectrum CSV and SVG")
    q.add_argument("-f", "--function", help="cap function (default: geometric witness)")
    q.add_argument("--d", type=int, default=1)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--nets")
    q.add_argument("--betas", default="0:1:0.125")
    q.add_argument("--probe-level", type=int, default=12)
    q.add_argument("--n", help="profile range lo:hi (default 4:truncation)")
    q.add_argument("--n-tail", type=int, default=6)
    q.add_argument("--tol", type=float, default=None)
    q.add_argument("--envelope", action="store_true")
    q.add_argument("-o", "--output", required=True)
    q.add_argument("--svg")
    q.set_defaults(func=cmd_spectrum)

    q = sub.add_parser("verify", parents=[common], help="run verification suites")
    q.add_argument("--suite", action="append", help=f"one of {', '.join(suites.SUITES)} (repeatable)")
    q.add_argument("--nets", help="check a nets file instead of (or in addition to) the suites")
    q.add_argument("--samples", type=int, default=100_000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("-o", "--output")
    q.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"capfield: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ResourceRefusal, ResourceLimitError) as exc:
        print(f"capfield: refused: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
