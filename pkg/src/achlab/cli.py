"""Command-line front end.

Exit codes: 0 success, 1 configuration or input error, 2 an experiment
verdict of FAIL.  Every output carries the resolved configuration, so feeding
an output file back through ``--config`` repeats the computation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable

from . import experiments as X
from .branching import SizePmf, StitchAborted, estimate_rho, stitch
from .engine import ConfigError, RunConfig, load_config_payload, run, run_poisson
from .rules import RuleError, RuleSpec, builtin, parse_rule

EXIT_OK, EXIT_CONFIG, EXIT_FAIL = 0, 1, 2


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise CliError(message)


def _grid(text: str | None) -> list[float] | None:
    """``"0.1,0.2"`` or ``"start:stop:step"`` (stop inclusive)."""
    if text is None:
        return None
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        count = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 10) for i in range(count)]
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str | None) -> list[int] | None:
    if text is None:
        return None
    return [int(float(x)) for x in text.split(",") if x.strip()]


def _with_ell(rule: RuleSpec, ell: int | None) -> RuleSpec:
    if ell is None or ell == rule.ell:
        return rule
    params = dict(rule.params)
    if "ell" in params:
        params["ell"] = ell
    elif "r" in params and ell % 2 == 0:
        params["r"] = ell // 2
    else:
        raise ConfigError(f"rule {rule.label} has arity {rule.ell}, not {ell}")
    return builtin(rule.name, **params)


def _rule_arg(args: argparse.Namespace, base: dict) -> str:
    text = args.rule if args.rule is not None else base.get("rule")
    if text is None:
        raise ConfigError("--rule is required")
    return _with_ell(parse_rule(text), getattr(args, "ell", None)).label


def _base_config(args: argparse.Namespace) -> dict[str, Any]:
    if not getattr(args, "config", None):
        return {}
    try:
        data = load_config_payload(args.config)
    except FileNotFoundError:
        raise ConfigError(f"config file {args.config} not found") from None
    if "id" in data and "config" in data:
        data = data["config"]
    return dict(data)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {out}: {exc.strerror}") from None


def _fmt(args: argparse.Namespace) -> str:
    if args.format:
        return args.format
    return "json" if args.out and args.out.endswith(".json") else "csv"


# -- process runs -------------------------------------------------------------

def _run_config(args: argparse.Namespace, poisson: bool) -> RunConfig:
    data = _base_config(args)
    if args.rule is not None or args.ell is not None or "rule" not in data:
        data["rule"] = _rule_arg(args, data)
    overrides = {"n": args.n, "seed": args.seed, "replica": args.replica, "sampling": args.sampling,
                 "duplicates": args.duplicates}
    data.update({k: v for k, v in overrides.items() if v is not None})
    if poisson:
        if args.t is not None:
            data["poisson_t"] = args.t
        data.pop("steps", None)
        data.pop("t_max", None)
    elif args.steps is not None:
        data.update(steps=args.steps, t_max=None, poisson_t=None)
    elif args.t is not None:
        data.update(t_max=args.t, steps=None, poisson_t=None)
    if args.snapshots is not None:
        data["snapshots"] = _ints(args.snapshots)
    if args.t_grid is not None:
        data["t_grid"] = _grid(args.t_grid)
    if args.light:
        data["light"] = True
    return RunConfig.from_dict(data)


def cmd_run(args: argparse.Namespace, poisson: bool = False) -> int:
    cfg = _run_config(args, poisson)
    if poisson and cfg.poisson_t is None:
        raise ConfigError("--t is required")
    if not poisson and cfg.planned_steps() == 0 and cfg.steps is None and cfg.t_max is None:
        raise ConfigError("give --steps, --t, --snapshots or --t-grid")
    series = run(cfg)
    _emit(series.to_json() + "\n" if _fmt(args) == "json" else series.to_csv(), args.out)
    return EXIT_OK


# -- branching process ------------------------------------------------------

def cmd_rho(args: argparse.Namespace) -> int:
    base = _base_config(args)
    rule = _rule_arg(args, base)
    times = _grid(args.t_grid) or ([args.t] if args.t is not None else base.get("t"))
    if times is None:
        raise ConfigError("--t or --t-grid is required")
    times = times if isinstance(times, list) else [times]
    samples = args.samples or base.get("samples", 100_000)
    seed = args.seed if args.seed is not None else base.get("seed", 0)
    cap = args.cap or base.get("cap", 100_000)
    phi_path = args.phi or base.get("phi")
    phi = SizePmf.from_json(Path(phi_path).read_text()) if phi_path else SizePmf.point_mass()
    config = {"rule": rule, "t": times, "samples": samples, "seed": seed, "cap": cap, "phi": phi_path}
    estimates = estimate_rho(rule, phi, times, samples=samples, cap=cap, seed=seed)
    if _fmt(args) == "json":
        body = {"config": config, "estimates": [
            {"t": e.t, "truncated_mass": e.truncated_mass, "degenerate_mass": e.degenerate_mass, "chi": e.chi,
             "chi_se": e.chi_se, **e.pmf.to_dict()} for e in estimates]}
        _emit(json.dumps(body, sort_keys=True) + "\n", args.out)
    else:
        lines = ["# achlab-rho/1 columns=t,k,rho,stderr", "# config: " + json.dumps(config, sort_keys=True),
                 "t,k,rho,stderr"]
        for e in estimates:
            lines.append(f"# t={e.t!r} chi={e.chi!r} chi_se={e.chi_se!r} truncated_mass={e.truncated_mass!r}")
            for k, p in e.pmf.as_dict().items():
                lines.append(f"{e.t!r},{k},{p!r},{e.stderr(k)!r}")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_stitch(args: argparse.Namespace) -> int:
    base = _base_config(args)
    rule = _rule_arg(args, base)
    t = args.t if args.t is not None else base.get("t")
    if t is None:
        raise ConfigError("--t is required")
    config = {"rule": rule, "t": t, "samples": args.samples or base.get("samples", 200_000),
              "seed": args.seed if args.seed is not None else base.get("seed", 0),
              "cap": args.cap or base.get("cap", 100_000),
              "floor": args.floor if args.floor is not None else base.get("floor", 5e-3),
              "gamma": args.gamma if args.gamma is not None else base.get("gamma", 1.0)}
    try:
        result = stitch(config["rule"], config["t"], samples=config["samples"], cap=config["cap"],
                        floor=config["floor"], gamma=config["gamma"], seed=config["seed"])
        status = "complete"
    except StitchAborted as exc:
        result, status = exc.result, f"aborted: {exc}"
    summary = {"t_stop": result.t_stop, "exhausted": result.exhausted, "status": status,
               "exhaustion_point": result.exhaustion_point}
    if _fmt(args) == "json":
        _emit(json.dumps({"config": config, "summary": summary, "stages": result.table()}, sort_keys=True) + "\n",
              args.out)
    else:
        _emit(result.to_csv(header=config) + "# summary: " + json.dumps(summary, sort_keys=True) + "\n", args.out)
    if status != "complete":
        print(status, file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


# -- experiments --------------------------------------------------------------

def _experiment(args: argparse.Namespace, fn: Callable[..., X.ExperimentReport], flags: dict[str, Any],
                needs_rule: bool = True) -> int:
    kwargs = _base_config(args)
    if needs_rule and (args.rule is not None or args.ell is not None or "rule" not in kwargs):
        kwargs["rule"] = _rule_arg(args, kwargs)
    kwargs.update({k: v for k, v in flags.items() if v is not None})
    if getattr(args, "seed", None) is not None:
        kwargs["seed"] = args.seed
    if args.workers is not None and "workers" in fn.__code__.co_varnames:
        kwargs["workers"] = args.workers
    try:
        report = fn(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    _emit(report.to_json() + "\n" if _fmt(args) == "json" else report.to_csv(), args.out)
    print(report.verdict_line)
    return EXIT_FAIL if report.verdict == X.FAIL else EXIT_OK


def cmd_blowup(args):
    return _experiment(args, X.detect_blowup, {"n_grid": _ints(args.n_grid), "t_grid": _grid(args.t_grid),
                                               "reps": args.reps})


def cmd_scan(args):
    return _experiment(args, X.scan_l1, {"n_grid": _ints(args.n_grid), "t_grid": _grid(args.t_grid),
                                         "reps": args.reps, "fraction": args.fraction})


def cmd_concentration(args):
    return _experiment(args, X.concentration_check, {"n_grid": _ints(args.n_grid), "t": args.t, "reps": args.reps,
                                                     "ks": _ints(args.ks)})


def cmd_compare(args):
    return _experiment(args, X.compare_rho, {"n_grid": _ints(args.n_grid), "t": args.t, "reps": args.reps,
                                             "reference": args.reference, "samples": args.samples,
                                             "stitch_samples": args.stitch_samples})


def cmd_delayed(args):
    return _experiment(args, X.delayed_percolation, {"n_grid": _ints(args.n_grid), "r": args.r,
                                                     "delta": args.delta, "reps": args.reps}, needs_rule=False)


def cmd_cycles(args):
    return _experiment(args, X.cycle_check, {"n_grid": _ints(args.n_grid), "t": args.t, "reps": args.reps,
                                             "U": args.U})


def cmd_explore(args):
    return _experiment(args, X.exploration_check, {"n_grid": _ints(args.n_grid), "t": args.t,
                                                   "graphs": args.graphs}, needs_rule=False)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="achlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, rule=True):
        if rule:
            p.add_argument("--rule", help='rule string, e.g. "product" or "r_sum:r=3"')
            p.add_argument("--ell", type=int, help="tuple arity (re-parameterizes the rule)")
        p.add_argument("--seed", type=int)
        p.add_argument("--config", help="JSON config, or a previous output whose header echoes one")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--workers", type=int, help="parallel replicas (default: $ACHLAB_WORKERS or 1)")

    for name, fn, helptext in (("run", cmd_run, "discrete-step run"),
                               ("poisson", lambda a: cmd_run(a, poisson=True), "Poisson(tn) tuples")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--n", type=int)
        horizon = p.add_mutually_exclusive_group()
        horizon.add_argument("--steps", type=int)
        horizon.add_argument("--t", type=float, help="time; steps = floor(t n)")
        p.add_argument("--snapshots", help="comma-separated step indices")
        p.add_argument("--t-grid", help='snapshot times, "0.1,0.2" or "start:stop:step"')
        p.add_argument("--replica", type=int)
        p.add_argument("--sampling", choices=("iid", "distinct"))
        p.add_argument("--duplicates", choices=("multi", "simple"))
        p.add_argument("--light", action="store_true", help="record only S and L1")
        p.set_defaults(func=fn)

    p = sub.add_parser("rho", help="branching-process size law")
    common(p)
    p.add_argument("--t", type=float)
    p.add_argument("--t-grid")
    p.add_argument("--samples", type=int)
    p.add_argument("--cap", type=int)
    p.add_argument("--phi", help="seed law as SizePmf JSON (default: isolated vertices)")
    p.set_defaults(func=cmd_rho)

    p = sub.add_parser("stitch", help="chained branching stages")
    common(p)
    p.add_argument("--t", type=float, help="target time")
    p.add_argument("--samples", type=int, help="samples per stage")
    p.add_argument("--cap", type=int)
    p.add_argument("--floor", type=float)
    p.add_argument("--gamma", type=float)
    p.set_defaults(func=cmd_stitch)

    def experiment(name, fn, helptext, rule=True):
        p = sub.add_parser(name, help=helptext)
        common(p, rule)
        p.add_argument("--n", dest="n_grid", help="comma-separated sizes")
        p.add_argument("--reps", type=int)
        p.set_defaults(func=fn)
        return p

    p = experiment("blowup", cmd_blowup, "susceptibility blow-up point")
    p.add_argument("--t-grid")
    p = experiment("scan", cmd_scan, "giant-component threshold")
    p.add_argument("--t-grid")
    p.add_argument("--fraction", type=float)
    p = experiment("concentration", cmd_concentration, "fluctuation scaling of N_k")
    p.add_argument("--t", type=float)
    p.add_argument("--ks", help="comma-separated sizes k")
    p = experiment("compare", cmd_compare, "simulation against the limiting size law")
    p.add_argument("--t", type=float)
    p.add_argument("--reference", choices=("stitch", "bp", "borel"))
    p.add_argument("--samples", type=int)
    p.add_argument("--stitch-samples", type=int)
    p = experiment("delayed", cmd_delayed, "delayed r-sum percolation", rule=False)
    p.add_argument("--r", type=int)
    p.add_argument("--delta", type=float)
    p = experiment("cycles", cmd_cycles, "cycle census under acyclic rules")
    p.add_argument("--t", type=float)
    p.add_argument("--U", type=int)
    p = experiment("explore", cmd_explore, "exploration trees on finite graphs", rule=False)
    p.add_argument("--t", type=float)
    p.add_argument("--graphs", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (CliError, ConfigError, RuleError, X.FitError) as exc:
        print(f"achlab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, json.JSONDecodeError, OSError) as exc:
        print(f"achlab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
