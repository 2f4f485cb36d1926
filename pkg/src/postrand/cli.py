"""Command-line front end.

    postrand certify --model singlet_vacuum --nu 0.5 --strategy b
    postrand scan --figure 4 --output fig4.csv
    postrand noniid --example 1 --runs 1000000 --seed 7
    postrand export-sdp --model singlet_vacuum --nu 1 --strategy a --output p.dat-s

Exit codes: 0 success, 1 bad input or I/O error, 2 solver failure.
``POSTRAND_SOLVER_TOL`` overrides both solver tolerances.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

from . import certify as cert
from . import noniid
from .behaviors import ALICE, PAIR, STRATEGIES, Behavior, alice_detected, validate
from .photonics import singlet_with_vacuum
from .relaxation import OPTIMAL, SolverConfig, build_guessing_sdp, export_sdpa

TOL_ENV = "POSTRAND_SOLVER_TOL"
# diagnostics that vary between identical runs
_VOLATILE = ("solve_time",)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _solver_config(args) -> SolverConfig:
    kw = {}
    env = os.environ.get(TOL_ENV)
    if env:
        try:
            kw["gap_tol"] = kw["feas_tol"] = float(env)
        except ValueError:
            raise UsageError(f"{TOL_ENV} must be a number, got {env!r}")
    if args.tol is not None:
        kw["gap_tol"] = kw["feas_tol"] = args.tol
    if args.max_iters is not None:
        kw["max_iters"] = args.max_iters
    try:
        return SolverConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc))


def _model_values(args):
    fixed = {}
    for k in ("nu", "eta", "theta"):
        v = getattr(args, k, None)
        if v is not None:
            fixed[k] = v
    return fixed


def _model(args, parameter=None) -> cert.ModelConfig:
    fixed = _model_values(args)
    defaults = cert._DEFAULTS[args.model]
    for k in fixed:
        if k not in defaults:
            raise UsageError(f"model {args.model} takes no --{k}")
    parameter = parameter or next(iter(defaults))
    inputs = tuple(args.inputs) if args.inputs else None
    return cert.ModelConfig(args.model, parameter, fixed, inputs)


def _point(args):
    """``(behavior, heralded, heralding probability, inputs)`` from flags."""
    if args.behavior:
        if args.model:
            raise UsageError("give either --model or --behavior")
        try:
            with open(args.behavior, encoding="utf-8") as fh:
                beh = Behavior.from_json(fh.read())
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot read behavior {args.behavior}: {exc}")
        bad = validate(beh)
        if bad:
            raise UsageError(f"behavior violates {bad[0].kind} at {bad[0].where} "
                             f"by {bad[0].magnitude:.3g}")
        return beh, None, None, tuple(args.inputs or (0, 0))
    if not args.model:
        raise UsageError("give --model or --behavior")
    model = _model(args)
    value = model.fixed.get(model.parameter, cert._DEFAULTS[args.model][model.parameter])
    beh, her, prob = model.behaviors(value)
    return beh, her, prob, model.inputs


def _report_json(rep) -> str:
    d = rep.to_dict()
    d["diagnostics"] = {k: v for k, v in d["diagnostics"].items() if k not in _VOLATILE}
    return json.dumps(d, indent=2, sort_keys=True, default=cert._jsonable)


def cmd_certify(args) -> int:
    config = _solver_config(args)
    beh, her, prob, (x, y) = _point(args)
    mode = args.mode
    try:
        if args.strategy == "h":
            if her is None:
                raise UsageError("strategy h needs a --model with a heralded variant")
            rep = cert.heralded_report(her, prob, None, x, y, config, mode)
        else:
            ps = STRATEGIES[args.strategy](beh.scenario, mode)
            rep = cert.randomness_rate(beh, ps, x, y, config, level=args.level)
    except cert.SolverFailure as exc:
        print(json.dumps({"status": "failed", "reason": str(exc)}, indent=2))
        return 2
    print(_report_json(rep))
    if rep.status == "failed":
        return 2
    if rep.status != OPTIMAL:
        print(f"warning: solver status {rep.status}", file=sys.stderr)
    return 0


def _grid(args):
    if args.grid is not None:
        try:
            return [float(v) for v in args.grid.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"bad --grid {args.grid!r}")
    if args.figure is not None:
        return list(cert.FIGURE_PRESETS[args.figure][1])
    raise UsageError("give --grid or --figure")


def cmd_scan(args) -> int:
    config = _solver_config(args)
    if args.figure is not None and args.model is None:
        model = cert.FIGURE_PRESETS[args.figure][0]
    elif args.model is not None:
        if args.parameter is None:
            raise UsageError("--model needs --parameter")
        model = _model(args, args.parameter)
    else:
        raise UsageError("give --figure or --model")
    grid = sorted(set(_grid(args)))
    if not grid:
        raise UsageError("empty grid")
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    bad = [s for s in strategies if s not in cert.STRATEGY_LABELS]
    if bad or not strategies:
        raise UsageError(f"unknown strategies {bad}")
    workers = args.workers or os.cpu_count() or 1
    res = cert.scan(model, grid, strategies, config, args.mode, min(workers, len(grid)))
    text = res.to_csv()
    if args.output:
        try:
            with open(args.output, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {args.output}: {exc}")
    else:
        sys.stdout.write(text)
    if res.failed:
        print(f"warning: {len(res.failed)} point(s) failed: {res.failed}", file=sys.stderr)
    return 0


def cmd_noniid(args) -> int:
    if args.example not in (1, 2):
        raise UsageError(f"unknown example {args.example}; choose 1 or 2")
    if args.runs < 1:
        raise UsageError("--runs must be >= 1")
    config = _solver_config(args)
    if args.example == 1:
        rec = noniid.example1_simulate(args.runs, args.seed)
        emp = noniid.example1_frequencies(rec)
        ref = noniid.example1_reference()
        acc = noniid.example1_accuracy(rec)
    else:
        params = noniid.Example2Params()
        rec = noniid.example2_simulate(params, args.runs, args.seed)
        emp = noniid.example2_frequencies(rec)
        ref = noniid.example2_reference(params)
        acc = noniid.example2_accuracy(rec)
    chi = noniid.camouflage_test(emp, len(rec), ref)
    sc = emp.scenario
    print(f"example {args.example}: {len(rec)} runs, seed {args.seed}")
    print("empirical p(ab|00):")
    print("      " + "".join(f"{b:>9}" for b in sc.bob_outcomes))
    for i, a in enumerate(sc.alice_outcomes):
        print(f"  {a:>3} " + "".join(f"{emp.table[0, 0, i, j]:9.5f}" for j in range(sc.n_b)))
    print(f"camouflage chi2 = {chi.statistic:.3f} (dof {chi.dof}), p-value = {chi.p_value:.4f}")
    print(f"decoder accuracy = {acc:.6f}")
    if args.example == 1:
        beh = singlet_with_vacuum(noniid.EXAMPLE1_NU)
        rep = cert.randomness_rate(beh, STRATEGIES["b"](beh.scenario), config=config)
        print(f"iid certified rate on the imitated behavior = {rep.rate:.6f} bits/run")
    else:
        beh = noniid.example2_expected_frequencies(params)
        ps = alice_detected(beh.scenario)
        try:
            G = cert.guessing_probability(beh, ps, 0, 0, config, level=args.level)
        except cert.SolverFailure as exc:
            print(f"solver failure: {exc}", file=sys.stderr)
            return 2
        print(f"G_iid <= {G:.6f} (level {args.level}), decoder >= {acc:.6f}")
    if args.csv:
        try:
            with open(args.csv, "w", encoding="utf-8", newline="") as fh:
                fh.write(rec.to_csv(reveal=args.reveal))
        except OSError as exc:
            raise UsageError(f"cannot write {args.csv}: {exc}")
    return 0


def cmd_export_sdp(args) -> int:
    beh, _, _, (x, y) = _point(args)
    if args.strategy == "h":
        raise UsageError("export-sdp takes strategy a, b or c")
    ps = STRATEGIES[args.strategy](beh.scenario, args.mode)
    problem = build_guessing_sdp(beh, ps, x, y, level=args.level)
    text = export_sdpa(problem)
    try:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {args.output}: {exc}")
    sizes = problem.block_sizes
    print(f"wrote {args.output}: {problem.n_constraints} constraints, "
          f"{len(sizes)} blocks of size {sorted(set(sizes))}")
    return 0


def _level(text):
    parts = [int(p) for p in text.split(",")]
    if len(parts) == 1:
        return parts[0]
    if len(parts) == 2:
        return tuple(parts)
    raise argparse.ArgumentTypeError("level is N or N,M")


def _add_solver(p):
    g = p.add_argument_group("solver")
    g.add_argument("--tol", type=float, help=f"gap and feasibility tolerance (env {TOL_ENV})")
    g.add_argument("--max-iters", type=int, help="iteration cap")


def _add_model(p, strategies=("a", "b", "c", "h")):
    g = p.add_argument_group("behavior")
    g.add_argument("--model", choices=cert.MODELS, help="behavior family")
    g.add_argument("--behavior", metavar="JSON", help="behavior table file instead of a model")
    g.add_argument("--nu", type=float, help="pair probability or squeezing parameter")
    g.add_argument("--eta", type=float, help="detection efficiency")
    g.add_argument("--theta", type=float, help="state angle (one_pair)")
    g.add_argument("--inputs", type=int, nargs=2, metavar=("X", "Y"), help="generation inputs")
    p.add_argument("--strategy", choices=strategies, default="b", help="post-selection (default b)")
    p.add_argument("--mode", choices=(PAIR, ALICE), default=PAIR, help="guess target")
    p.add_argument("--level", type=_level, default=1, help="relaxation level, N or N,M")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="postrand", description=__doc__.split("\n")[0])
    parser.add_argument("--config", metavar="JSON", help="flag defaults as a JSON object")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("certify", help="certify one behavior")
    _add_model(p)
    _add_solver(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("scan", help="rates over a parameter grid, as CSV")
    p.add_argument("--figure", type=int, choices=sorted(cert.FIGURE_PRESETS), help="preset model and grid")
    p.add_argument("--model", choices=cert.MODELS)
    p.add_argument("--parameter", help="parameter to vary")
    p.add_argument("--grid", help="comma-separated values")
    p.add_argument("--nu", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--inputs", type=int, nargs=2, metavar=("X", "Y"))
    p.add_argument("--strategies", default=",".join(cert.STRATEGY_LABELS), help="e.g. a,b,c,h")
    p.add_argument("--mode", choices=(PAIR, ALICE), default=PAIR)
    p.add_argument("--workers", type=int, default=0, help="processes (default: all cores)")
    p.add_argument("--output", "-o", help="CSV path (default stdout)")
    _add_solver(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("noniid", help="simulate a memory-based source")
    p.add_argument("--example", type=int, required=True, help="1 or 2")
    p.add_argument("--runs", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=_level, default=2, help="relaxation level for the example-2 bound")
    p.add_argument("--csv", help="write run records here")
    p.add_argument("--reveal", action="store_true", help="include hidden-state columns in --csv")
    _add_solver(p)
    p.set_defaults(func=cmd_noniid)

    p = sub.add_parser("export-sdp", help="write the guessing program as sparse SDPA")
    _add_model(p, ("a", "b", "c"))
    p.add_argument("--output", "-o", required=True, help=".dat-s path")
    p.set_defaults(func=cmd_export_sdp)
    return parser


def _apply_config(parser, argv):
    """Re-parse with defaults from ``--config``; unknown keys are fatal."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        with open(args.config, encoding="utf-8") as fh:
            conf = json.load(fh)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}")
    if not isinstance(conf, dict):
        raise UsageError("config must be a JSON object")
    known = set(vars(args)) - {"func", "command", "config"}
    unknown = sorted(set(conf) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {unknown}")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    sub.set_defaults(**conf)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    # inexact solves are reported through the status field
    warnings.filterwarnings("ignore", message="Solution may be inaccurate")
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
