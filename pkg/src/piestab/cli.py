"""Command-line front end.

Every command takes a spec file (or ``fixture:NAME``), prints a short
human-readable summary and optionally writes a JSON report that is
validated against the shipped report schema.  Exit codes: 0 on success,
2 for "not admissible" or "no certificate", 1 for any error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import lpi, numeric, sdp
from .convert import PathMismatchError, convert
from .fixtures import FIXTURES, FixtureError
from .model import NotAdmissibleError, ValidationError, check_admissibility
from .pialg import PIOperator
from .polyalg import to_json
from .specfile import (REPORT_SCHEMA, SpecFileError, canonical_hash, fixture_document,
                       finite_tree, load_spec, parse_spec, validate_schema)

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2
STATUS_EXIT = {"ok": EXIT_OK, "not_admissible": EXIT_NEGATIVE,
               "no_certificate": EXIT_NEGATIVE, "error": EXIT_ERROR}

log = logging.getLogger("piestab")


def _version() -> str:
    try:
        return version("piestab")
    except PackageNotFoundError:
        return "0+unknown"


class CommandError(RuntimeError):
    """Error with a user-facing message; reported with exit code 1."""


def operator_to_json(P: PIOperator) -> dict:
    return {"dims": [P.rows, P.cols], "interval": [float(x) for x in P.interval],
            "R0": to_json(P.R0), "R1": to_json(P.R1), "R2": to_json(P.R2)}


def _parse_params(items: list[str] | None) -> dict:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise CommandError(f"parameter override must look like name=value, got {item!r}")
        try:
            out[key] = float(val)
        except ValueError as exc:
            raise CommandError(f"parameter {key!r}: {val!r} is not a number") from exc
    return out


def _load(source: str, overrides: dict):
    """``(spec, document)`` from a file path or ``fixture:NAME``."""
    if source.startswith("fixture:"):
        name = source.split(":", 1)[1]
        if name not in FIXTURES:
            raise CommandError(f"unknown fixture {name!r} (choose from {', '.join(FIXTURES)})")
        params = {k: (int(v) if k == "degree" else v) for k, v in overrides.items()}
        doc = fixture_document(name, **params)
        return parse_spec(doc), doc
    return load_spec(source, overrides)


def _pie_summary(pie) -> dict:
    L = pie.layout
    return {"nx": pie.nx, "layout": [L.n0, L.n1, L.n2], "interval": list(pie.interval),
            "degree_T": pie.T.degree, "degree_A": pie.A.degree,
            "provenance": {k: v for k, v in pie.provenance.items()
                           if isinstance(v, (int, float, str, bool))}}


# ---------------------------------------------------------------------------
# commands; each returns (status, results, message)


def cmd_check(spec, args, timing):
    rep = check_admissibility(spec)
    status = "ok" if rep.admissible else "not_admissible"
    msg = (f"{rep.verdict}: sigma_min(B_T) = {rep.sigma_min:.6g}, "
           f"cond = {rep.condition:.3g}")
    return status, {"admissibility": rep.to_dict()}, msg


def cmd_convert(spec, args, timing):
    t0 = time.perf_counter()
    pie = convert(spec)
    timing["convert"] = time.perf_counter() - t0
    res = {"admissibility": check_admissibility(spec).to_dict(), "pie": _pie_summary(pie)}
    kernels = {"T": operator_to_json(pie.T), "A": operator_to_json(pie.A)}
    if args.out:
        Path(args.out).write_text(json.dumps(kernels, indent=1))
    if args.kernels:
        res["pie"]["kernels"] = kernels
    msg = f"PIE with n_x = {pie.nx}: deg T = {pie.T.degree}, deg A = {pie.A.degree}"
    return "ok", res, msg


def cmd_stability(spec, args, timing):
    t0 = time.perf_counter()
    pie = convert(spec)
    timing["convert"] = time.perf_counter() - t0
    if args.export_sdpa:
        prob = lpi.assemble(pie, args.deg or 1, args.dH, args.alpha, args.delta)
        prob.export(args.export_sdpa)
        ext = sdp.external_solver()
        if ext:
            log.info("external solver %s output:\n%s", ext, sdp.run_external(prob.data))
    t0 = time.perf_counter()
    cert = lpi.certify(pie, d_P=args.deg, d_H=args.dH, alpha=args.alpha, delta=args.delta,
                       max_d_P=args.max_deg)
    timing["lpi"] = time.perf_counter() - t0
    res = {"pie": _pie_summary(pie), "certificate": cert.to_dict(include_gram=args.gram)}
    if cert.certified and args.verify:
        t0 = time.perf_counter()
        rep = lpi.verify_certificate(pie, cert)
        timing["verify"] = time.perf_counter() - t0
        res["certificate"]["verification"] = rep.to_dict()
        if not rep.verified:
            return "error", res, "certificate failed verification: " + "; ".join(rep.failures)
    if cert.verdict == "certified_stable":
        return "ok", res, cert.describe()
    if cert.verdict == "infeasible_at_degree":
        return "no_certificate", res, cert.describe()
    return "error", res, cert.describe()


def cmd_spectrum(spec, args, timing):
    pie = convert(spec)
    t0 = time.perf_counter()
    sp_ = numeric.spectrum(pie, N=args.grid)
    timing["spectrum"] = time.perf_counter() - t0
    if args.csv:
        Path(args.csv).write_text(sp_.to_csv())
    top = [{"re": float(z.real), "im": float(z.imag)} for z in sp_.finite[:args.top]]
    res = {"spectrum": {"N": sp_.N, "rightmost": sp_.rightmost if sp_.finite.size else None,
                        "finite": int(sp_.finite.size), "unresolved": int(sp_.unresolved.size),
                        "infinite": int(sp_.infinite.size), "leading": top,
                        "history": [{"N": n, "rightmost": r} for n, r in sp_.history]}}
    msg = f"rightmost eigenvalue {sp_.rightmost:.8g} (N = {sp_.N})"
    return "ok", res, msg


def cmd_simulate(spec, args, timing):
    pie = convert(spec)
    D = numeric.DiscretizedPIE.build(pie, args.grid or numeric.DEFAULT_N)
    xf0 = np.ones(pie.nx * D.grid.N)
    t0 = time.perf_counter()
    traj = numeric.simulate(D, xf0, args.tmax, args.dt)
    timing["simulate"] = time.perf_counter() - t0
    if args.csv:
        Path(args.csv).write_text(traj.to_csv("x"))
    res = {"simulation": {"N": D.grid.N, "h": args.dt, "tmax": args.tmax,
                          "steps": int(traj.t.size - 1),
                          "x_norm_initial": float(traj.x_norm[0]),
                          "x_norm_final": float(traj.x_norm[-1]),
                          "decay_rate": traj.decay_rate() if traj.t.size > 2 else None,
                          "notes": traj.notes}}
    msg = f"||x(0)|| = {traj.x_norm[0]:.6g}, ||x({traj.t[-1]:g})|| = {traj.x_norm[-1]:.6g}"
    if traj.notes:
        msg += "; " + "; ".join(traj.notes)
    return "ok", res, msg


def cmd_bisect(spec, args, timing, source=None, overrides=None):
    name = args.param
    params = dict(spec.parameters)
    if name is None:
        if len(params) != 1:
            raise CommandError("spec must have exactly one parameter (or pass --param)")
        name = next(iter(params))
    if name not in params:
        raise CommandError(f"unknown parameter {name!r}")

    def family(p):
        return convert(_load(source, {**overrides, name: p})[0])

    def verdict(pie):
        cert = lpi.certify(pie, d_P=args.deg, d_H=args.dH, alpha=args.alpha,
                           delta=args.delta, max_d_P=args.max_deg)
        if cert.verdict == "solver_failure":
            raise CommandError(f"solver failure during bisection: {cert.message}")
        return cert.verdict

    spectral = (lambda pie: numeric.spectrum(pie, N=args.grid).rightmost) if args.spectral else None
    t0 = time.perf_counter()
    res = lpi.bisect_parameter(family, args.lo, args.hi, args.tol, verdict=verdict,
                               spectral=spectral, grid=args.scan)
    timing["bisect"] = time.perf_counter() - t0
    out = {"bisection": res.to_dict() | {"parameter": name}}
    if res.threshold is None:
        msg = f"no verdict change on [{res.lo:g}, {res.hi:g}]"
    else:
        msg = f"LPI threshold {name} = {res.threshold:.6g} (+/- {args.tol / 2:g})"
    if res.spectral_threshold is not None:
        msg += f"; spectral threshold {res.spectral_threshold:.6g}"
    return "ok", out, msg


COMMANDS = {"check": cmd_check, "convert": cmd_convert, "stability": cmd_stability,
            "spectrum": cmd_spectrum, "simulate": cmd_simulate, "bisect": cmd_bisect}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="piestab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("spec", help="spec file (JSON) or fixture:NAME")
        sp.add_argument("-p", "--set", action="append", metavar="NAME=VALUE",
                        help="override a spec parameter (repeatable)")
        sp.add_argument("--json", metavar="PATH", help="write the JSON report ('-' for stdout)")

    def lpi_flags(sp):
        sp.add_argument("--deg", type=int, default=None, help="d_P (default: 1, escalating)")
        sp.add_argument("--max-deg", type=int, default=lpi.MAX_DP, help="escalation cap for d_P")
        sp.add_argument("--dH", type=int, default=None, help="d_H (default: degree heuristic)")
        sp.add_argument("--alpha", type=float, default=lpi.ALPHA)
        sp.add_argument("--delta", type=float, default=lpi.DELTA)

    sp = sub.add_parser("check", help="admissibility of the boundary conditions")
    common(sp)
    sp = sub.add_parser("convert", help="PDE -> PIE conversion")
    common(sp)
    sp.add_argument("--out", metavar="PATH", help="write T and A kernels as JSON")
    sp.add_argument("--kernels", action="store_true", help="include kernels in the report")
    sp = sub.add_parser("stability", help="LPI stability certificate")
    common(sp)
    lpi_flags(sp)
    sp.add_argument("--no-verify", dest="verify", action="store_false",
                    help="skip independent verification of the certificate")
    sp.add_argument("--gram", action="store_true", help="include Gram matrices in the report")
    sp.add_argument("--export-sdpa", metavar="PATH",
                    help="write the SDP (at --deg or 1) in the sparse interchange format")
    sp = sub.add_parser("spectrum", help="collocation spectrum of the PIE pencil")
    common(sp)
    sp.add_argument("--grid", type=int, default=None, help="N (default: refine from 32)")
    sp.add_argument("--csv", metavar="PATH", help="write eigenvalues as CSV")
    sp.add_argument("--top", type=int, default=5, help="leading eigenvalues to report")
    sp = sub.add_parser("simulate", help="trapezoidal time stepping from x_f = 1")
    common(sp)
    sp.add_argument("--grid", type=int, default=numeric.DEFAULT_N)
    sp.add_argument("--tmax", type=float, default=1.0)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--csv", metavar="PATH", help="write the reconstructed trajectory as CSV")
    sp = sub.add_parser("bisect", help="bisect LPI verdicts over one spec parameter")
    common(sp)
    lpi_flags(sp)
    sp.add_argument("--param", default=None, help="parameter name (default: the only one)")
    sp.add_argument("--lo", type=float, required=True)
    sp.add_argument("--hi", type=float, required=True)
    sp.add_argument("--tol", type=float, default=0.01)
    sp.add_argument("--scan", type=int, default=0,
                    help="interior points checked for monotone verdicts first")
    sp.add_argument("--spectral", action="store_true",
                    help="also locate the spectral zero crossing")
    sp.add_argument("--grid", type=int, default=48, help="N for the spectral oracle")
    sp = sub.add_parser("fixture", help="write a shipped fixture as a spec file")
    sp.add_argument("name", choices=FIXTURES)
    sp.add_argument("-p", "--set", action="append", metavar="NAME=VALUE",
                    help="fixture parameter (repeatable)")
    sp.add_argument("-o", "--out", metavar="PATH", help="output file (default: stdout)")
    return p


def _finish(command, spec_hash, status, results, timing, message, args) -> int:
    report = {"tool": "piestab", "version": _version(), "command": command,
              "spec_hash": spec_hash, "status": status, "results": results,
              "timing": {k: float(v) for k, v in timing.items()}, "message": message}
    if not finite_tree(report):
        report = json.loads(json.dumps(report, default=float).replace("NaN", "null")
                            .replace("-Infinity", "null").replace("Infinity", "null"))
    validate_schema(report, REPORT_SCHEMA)
    if getattr(args, "json", None) == "-":
        print(json.dumps(report, indent=1))
    else:
        print(f"{command}: {message}")
        if getattr(args, "json", None):
            Path(args.json).write_text(json.dumps(report, indent=1))
    return STATUS_EXIT[status]


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        overrides = _parse_params(args.set)
        if args.command == "fixture":
            doc = fixture_document(args.name, **{k: (int(v) if k == "degree" else v)
                                                 for k, v in overrides.items()})
            text = json.dumps(doc, indent=1)
            if args.out:
                Path(args.out).write_text(text)
            else:
                print(text)
            return EXIT_OK
        spec, _doc = _load(args.spec, overrides)
    except (CommandError, SpecFileError, FixtureError, ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    timing: dict[str, float] = {}
    spec_hash = canonical_hash(spec)
    t0 = time.perf_counter()
    try:
        fn = COMMANDS[args.command]
        if args.command == "bisect":
            status, results, msg = fn(spec, args, timing, args.spec, overrides)
        else:
            status, results, msg = fn(spec, args, timing)
    except NotAdmissibleError as exc:
        timing["total"] = time.perf_counter() - t0
        return _finish(args.command, spec_hash, "not_admissible",
                       {"admissibility": exc.report.to_dict()}, timing, str(exc), args)
    except (CommandError, ValidationError, PathMismatchError, lpi.BisectionError,
            numeric.PencilError, numeric.StepMatrixError, ValueError) as exc:
        timing["total"] = time.perf_counter() - t0
        print(f"error: {exc}", file=sys.stderr)
        return _finish(args.command, spec_hash, "error", {}, timing, str(exc), args)
    timing["total"] = time.perf_counter() - t0
    return _finish(args.command, spec_hash, status, results, timing, msg, args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
