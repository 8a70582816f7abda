"""Command line: simulate, verify and report.

Exit codes: 0 ok, 1 verification failure, 2 integration abort, 3 I/O error,
4 spec error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings

import numpy as np

from .algebroid import SamplePlan
from .catalog import BadParams, UnknownId, builtin_transition, parse_call
from .dynamics import NonFiniteState, integrate_rk4, synthesize_semispray_ode
from .mechanics import SingularHessian, energy_map
from .smoothfn import ExprError
from .specfile import SpecError, load_spec
from .verify import run_verification

EXIT_OK, EXIT_FAIL, EXIT_ABORT, EXIT_IO, EXIT_SPEC = 0, 1, 2, 3, 4


class FormatError(ValueError):
    pass


def fmt(v: float) -> str:
    """Shortest round-trip text of a float (at most 17 significant digits)."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _err(msg):
    print(f"algmech: {msg}", file=sys.stderr)


def _load(path, strict):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        spec = load_spec(path, strict=strict)
    for w in caught:
        _err(f"warning: {w.message}")
    env = os.environ.get("ALGMECH_SEED")
    if env is not None:
        spec.plan.seed = int(env)
    return spec


def cmd_simulate(args) -> int:
    try:
        spec = _load(args.config, args.strict)
    except OSError as exc:
        _err(f"cannot read {args.config}: {exc}")
        return EXIT_IO
    except (SpecError, ExprError, UnknownId, BadParams) as exc:
        _err(f"spec error: {exc}")
        return EXIT_SPEC
    sysm = spec.system
    missing = [k for k, v in (("payload", sysm.payload), ("initial", spec.x0),
                              ("integrate", spec.dt)) if v is None]
    if missing:
        _err(f"spec error: simulate needs {', '.join(missing)}")
        return EXIT_SPEC
    A = sysm.algebroid
    lag = sysm.lagrangian()
    monitors = {}
    if lag is not None:
        monitors["E_L"] = energy_map(lag, sysm.gh, A)
    monitors.update(spec.monitors)
    field = synthesize_semispray_ode(sysm, sysm.semispray())
    aborted = None
    try:
        traj = integrate_rk4(field, spec.x0, spec.y0, spec.t0, spec.t_end, spec.dt, monitors)
    except (NonFiniteState, SingularHessian, ArithmeticError) as exc:
        traj = getattr(exc, "trajectory", None)
        aborted = str(exc)
        if traj is None:
            _err(f"integration aborted: {aborted}")
            return EXIT_ABORT
    cols = ["t"] + [f"x{i + 1}" for i in range(A.m)] + [f"y{a + 1}" for a in range(A.r)] + ["E_L"]
    cols += list(spec.monitors)
    n = len(traj.times)
    energy_col = traj.monitors["E_L"] if lag is not None else np.full(n, np.nan)
    lines = [",".join(cols)]
    for k in range(n):
        row = [traj.times[k], *traj.states[k], energy_col[k]]
        row += [traj.monitors[name][k] for name in spec.monitors]
        lines.append(",".join(fmt(v) for v in row))
    if aborted is not None:
        lines.append(f"# aborted: {aborted}")
    try:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        _err(f"cannot write {args.out}: {exc}")
        return EXIT_IO
    if aborted is not None:
        _err(f"integration aborted: {aborted}")
        return EXIT_ABORT
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        spec = _load(args.config, False)
    except OSError as exc:
        _err(f"cannot read {args.config}: {exc}")
        return EXIT_IO
    except (SpecError, ExprError, UnknownId, BadParams) as exc:
        _err(f"spec error: {exc}")
        return EXIT_SPEC
    sysm = spec.system
    plan = SamplePlan(seed=spec.plan.seed, count=args.samples or spec.plan.count, box=spec.plan.box)
    transition = None
    if args.transition:
        try:
            tid, params = parse_call(args.transition)
            transition = builtin_transition(tid, sysm.algebroid.m, params)
        except (UnknownId, BadParams) as exc:
            _err(f"bad transition {args.transition!r}: {exc}")
            return EXIT_SPEC
    initial = (spec.x0, spec.y0) if spec.x0 is not None else None
    checks = run_verification(sysm, plan, tol=args.tol, transition=transition, initial=initial)
    rows = [c.as_dict() for c in checks]
    ok = all(r["pass"] is not False for r in rows)
    report = {"system": sysm.name, "seed": plan.seed, "samples": plan.count, "pass": ok, "checks": rows}
    try:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        _err(f"cannot write {args.out}: {exc}")
        return EXIT_IO
    return EXIT_OK if ok else EXIT_FAIL


def render_text(report) -> tuple[str, bool]:
    if isinstance(report, list):
        checks = report
    elif isinstance(report, dict) and isinstance(report.get("checks"), list):
        checks = report["checks"]
    else:
        raise FormatError("expected a list of checks or an object with a 'checks' list")
    ok = True
    lines = []
    for k, c in enumerate(checks):
        if not isinstance(c, dict) or "check" not in c:
            raise FormatError(f"check #{k} has no name")
        passed = c.get("pass")
        res = c.get("max_residual")
        rtxt = "-" if res is None else f"{res:.3e}"
        tol = c.get("tolerance")
        ttxt = "-" if tol is None else f"{tol:.1e}"
        mark = "skip" if passed is None else ("ok" if passed else "FAIL")
        if passed is False:
            ok = False
        lines.append(f"{mark:<5}{c['check']:<36}{rtxt:>12}  tol {ttxt}")
    failed = sum(1 for c in checks if c.get("pass") is False)
    lines.append(f"{len(checks)} checks, {failed} failed")
    return "\n".join(lines), ok


def cmd_report(args) -> int:
    try:
        with open(args.inp, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        _err(f"cannot read {args.inp}: {exc}")
        return EXIT_IO
    try:
        report = json.loads(raw.decode("utf-8"))
        text, ok = render_text(report)
    except (ValueError, UnicodeDecodeError) as exc:
        _err(f"format error: {exc}")
        return EXIT_SPEC
    if args.format == "json":
        sys.stdout.buffer.write(raw)
        sys.stdout.flush()
    else:
        print(text)
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="algmech", description="Mechanical systems on Lie algebroids")
    sub = p.add_subparsers(dest="cmd", required=True)
    s = sub.add_parser("simulate", help="integrate a system and write a CSV trajectory")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--strict", action="store_true")
    s.set_defaults(func=cmd_simulate)
    v = sub.add_parser("verify", help="run the residual checks and write a JSON report")
    v.add_argument("--config", required=True)
    v.add_argument("--out", required=True)
    v.add_argument("--samples", type=int, default=None)
    v.add_argument("--tol", type=float, default=None)
    v.add_argument("--transition", default=None, help="identity | linear_scale(s) | rotation(theta)")
    v.set_defaults(func=cmd_verify)
    r = sub.add_parser("report", help="render a JSON report")
    r.add_argument("--in", dest="inp", required=True)
    r.add_argument("--format", choices=["json", "text"], default="text")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse uses 2, which is reserved for aborts here
        return EXIT_OK if exc.code in (0, None) else EXIT_SPEC
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
