"""Command-line entry point.

Rates on the command line are multiples of the link capacity C.  Exit
status: 0 on success, 2 when inputs or validation checks fail, 3 when the
steady-state solver does not converge.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import (
    build_profile,
    derive_coefficients,
    extreme_utilization,
    solve_steady_state,
    sweep,
)
from .analytic.export import write_rows
from .analytic.steady import log_grid
from .analytic.transient import transient_curve
from .errors import ChokeLabError, DomainError, ScenarioError, SolverError
from .harness import Scenario, Trace, load_scenarios, run_replications
from .harness.compare import transient_comparison

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3

# slack on the simulated extreme above the model's tail probability, on top of
# three standard errors of the replication mean
BOUND_SLACK = 0.03


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _nonneg(text: str) -> float:
    v = float(text)
    if not math.isfinite(v) or v < 0:
        raise argparse.ArgumentTypeError(f"expected a finite value >= 0, got {text}")
    return v


def _pos(text: str) -> float:
    v = float(text)
    if not math.isfinite(v) or v <= 0:
        raise argparse.ArgumentTypeError(f"expected a finite value > 0, got {text}")
    return v


def _prob(text: str) -> float:
    v = float(text)
    if not 0 <= v < 1:
        raise argparse.ArgumentTypeError(f"expected a probability in [0, 1), got {text}")
    return v


def _posint(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return v


def _sweep_spec(text: str):
    parts = text.split(":")
    if len(parts) not in (3, 4) or parts[2] not in ("log", "lin"):
        raise argparse.ArgumentTypeError("sweep must look like lo:hi:log or lo:hi:lin[:n]")
    lo, hi = float(parts[0]), float(parts[1])
    n = int(parts[3]) if len(parts) == 4 else 200
    if not 0 <= lo < hi or n < 2 or (parts[2] == "log" and lo == 0):
        raise argparse.ArgumentTypeError("sweep needs 0 <= lo < hi (lo > 0 for log) and n >= 2")
    return log_grid(lo, hi, n) if parts[2] == "log" else np.linspace(lo, hi, n)


def _emit(args, name: str, header, rows) -> None:
    """Write CSV to ``--out/<name>`` when given, else to stdout."""
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_rows(out / name, header, rows)
    else:
        write_rows(sys.stdout, header, rows)


def _write_json(args, name: str, text: str) -> None:
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n", encoding="utf-8")


def cmd_steady(args) -> int:
    if args.sweep is not None:
        points = sweep(args.sweep, args.r)
        _emit(args, "steady_sweep.csv", ["x0", "r", "mu0", "h0"],
              [[p.x0_norm, p.r, p.mu0, p.h0] for p in points])
        return EXIT_OK
    if args.x0 is None:
        raise DomainError("steady needs --x0 or --sweep")
    p = solve_steady_state(args.x0, r=args.r)
    _emit(args, "steady.csv", ["x0", "r", "mu0", "h0"], [[p.x0_norm, p.r, p.mu0, p.h0]])
    return EXIT_OK


def cmd_profile(args) -> int:
    prof = build_profile(solve_steady_state(args.x0, r=args.r), args.b, args.C, args.samples)
    _emit(args, "profile.csv", ["y", "rho0", "v", "tau"],
          zip(prof.y, prof.rho0, prof.v, prof.tau))
    return EXIT_OK


def cmd_transient(args) -> int:
    ss = solve_steady_state(args.x0, r=args.r)
    coeff = derive_coefficients(ss, args.b, args.C)
    dT, mu = transient_curve(coeff, args.alpha, args.samples)
    _emit(args, "transient.csv", ["dT", "mu0"], zip(dT, mu))
    return EXIT_OK


def cmd_extreme(args) -> int:
    ss = solve_steady_state(args.x0, r=args.r)
    _emit(args, "extreme.csv", ["x0", "alpha", "extreme"],
          [[args.x0, args.alpha, extreme_utilization(ss, None, args.alpha)]])
    return EXIT_OK


def _scenarios(args) -> list[Scenario]:
    scenarios = load_scenarios(args.scenario)
    out = []
    for s in scenarios:
        changes = {}
        if args.seed is not None:
            changes["base_seed"] = args.seed
        if args.replications is not None:
            changes["replications"] = args.replications
        out.append(s.with_(**changes) if changes else s)
    return out


def _label(s: Scenario, i: int) -> str:
    return s.name or f"scenario{i}"


def cmd_simulate(args) -> int:
    summaries = []
    for i, s in enumerate(_scenarios(args)):
        log = None
        if args.log:
            log = open(args.log, "w", encoding="utf-8")
        try:
            trace, runs = run_replications(s, jobs=args.jobs, keep_runs=True, log=log)
        finally:
            if log is not None:
                log.close()
        if args.window:
            trace = Trace.from_runs(runs, args.window)
        header, rows = trace.rows()
        _emit(args, f"{_label(s, i)}_trace.csv", header, rows)
        summaries.append({
            "scenario": _label(s, i),
            "config": s.to_dict(),
            "seeds": [r.seed for r in runs],
            "conservation_ok": all(not any(r.conservation_errors()) for r in runs),
            "fifo_violations": sum(r.fifo_violations for r in runs),
            "max_backlog": max(r.max_backlog for r in runs),
        })
    _write_json(args, "simulate.json", json.dumps(summaries, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_validate(args) -> int:
    reports, ok = [], True
    table = []
    for i, s in enumerate(_scenarios(args)):
        changes = [c for c in s.udp.changes() if c[0] < s.duration and c[1] > 0]
        if not changes:
            raise ScenarioError(f"{_label(s, i)}: schedule has no usable rate change")
        times = [c[0] for c in changes]
        _, runs = run_replications(s, jobs=args.jobs, keep_runs=True, snapshot_times=times)
        exact = all(not any(r.conservation_errors()) and r.fifo_violations == 0 for r in runs)
        groups: dict = {}
        for t, old, new in changes:
            groups.setdefault((old, new), []).append(t)
        for (old, new), ts in groups.items():
            rep = transient_comparison(s, ts, runs=runs)
            k = int(np.argmin(np.abs(rep.sim_mean - rep.sim_extreme)))
            bounded = bool(rep.sim_extreme - 3 * rep.sim_stderr[k] <= rep.rho0_at_zero + BOUND_SLACK)
            passed = bool(exact and bounded)
            ok &= passed
            tag = f"{_label(s, i)}_{old:g}_to_{new:g}"
            header, rows = rep.rows()
            if args.out:
                _emit(args, f"{tag}.csv", header, rows)
                _write_json(args, f"{tag}.json", rep.to_json())
            reports.append({**rep.summary(), "label": tag, "passed": passed,
                            "exact_invariants": exact, "within_bound": bounded})
            table.append([old, new, rep.alpha, rep.model_extreme, rep.sim_extreme,
                          rep.b_snapshot, rep.tau_b, rep.n_transients])
    header = ["x0_old", "x0_new", "alpha", "model_extreme", "sim_extreme", "b", "tau_b", "transients"]
    write_rows(sys.stdout, header, table)
    if args.out:
        write_rows(Path(args.out) / "validate.csv", header, table)
        _write_json(args, "validate.json", json.dumps(reports, indent=2, sort_keys=True))
    return EXIT_OK if ok else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="chokelab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", help="directory for artifacts (default: CSV to stdout)")
        return sp

    def model(sp, b=True):
        sp.add_argument("--x0", type=_nonneg, required=True, help="UDP rate, multiple of C")
        sp.add_argument("--r", type=_prob, default=0.0, help="ambient RED drop probability")
        if b:
            sp.add_argument("--b", type=_pos, default=1000.0, help="backlog in packets")
            sp.add_argument("--C", type=_pos, default=2500.0, help="capacity in packets/s")
            sp.add_argument("--samples", type=_posint, default=201)
        return sp

    sp = common(sub.add_parser("steady", help="steady-state UDP utilization and buffer share"))
    sp.add_argument("--x0", type=_nonneg)
    sp.add_argument("--r", type=_prob, default=0.0)
    sp.add_argument("--sweep", type=_sweep_spec, help="lo:hi:log|lin[:n]")
    sp.set_defaults(func=cmd_steady)

    sp = model(common(sub.add_parser("profile", help="spatial UDP distribution along the queue")))
    sp.set_defaults(func=cmd_profile)

    sp = model(common(sub.add_parser("transient", help="utilization curve after a rate change")))
    sp.add_argument("--alpha", type=_nonneg, required=True, help="new rate / old rate")
    sp.set_defaults(func=cmd_transient)

    sp = model(common(sub.add_parser("extreme", help="extreme transient utilization")), b=False)
    sp.add_argument("--alpha", type=_nonneg, required=True)
    sp.set_defaults(func=cmd_extreme)

    for name, func, text in (("simulate", cmd_simulate, "run scenarios and write traces"),
                             ("validate", cmd_validate, "compare transients with the model")):
        sp = common(sub.add_parser(name, help=text))
        sp.add_argument("--scenario", required=True, help="scenario JSON file")
        sp.add_argument("--seed", type=int, help="override base_seed")
        sp.add_argument("--replications", type=_posint)
        sp.add_argument("--jobs", type=_posint, default=1)
        if name == "simulate":
            sp.add_argument("--window", type=_pos, help="re-aggregate the trace at this window")
            sp.add_argument("--log", help="write a JSON-lines event log here")
        sp.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SolverError as exc:
        print(f"error: {exc} (residual {exc.residual:.3g})", file=sys.stderr)
        return EXIT_SOLVER
    except (ChokeLabError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
