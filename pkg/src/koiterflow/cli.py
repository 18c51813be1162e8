"""Command line: ``koiterflow run|check|sweep``.

Exit codes: 0 when a run reaches its horizon (or every check passes),
2 when a run stops at contact, 1 on any error or failed check.
The environment variable KOITERFLOW_OUT overrides the output directory
and nothing else.
"""

import argparse
import os
import sys

OUT_ENV = "KOITERFLOW_OUT"
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "VECLIB_MAXIMUM_THREADS", "NUMEXPR_NUM_THREADS")

EXIT_OK, EXIT_ERROR, EXIT_CONTACT = 0, 1, 2


def _common(suppress):
    # subcommands repeat the global flags with suppressed defaults so a flag
    # given before the subcommand is not reset by the subparser
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--strict", action="store_true", default=d(False),
                        help="treat a violated Gronwall envelope as an error")
    common.add_argument("--deterministic", action="store_true", default=d(False),
                        help="single-threaded linear algebra for bit-identical output")
    common.add_argument("--seed", type=int, default=d(None), help="override [run] seed")
    common.add_argument("--out", default=d(None), help="output directory (overrides [output] dir)")
    return common


def _parser():
    common = _common(True)
    p = argparse.ArgumentParser(prog="koiterflow", description=__doc__.splitlines()[0], parents=[_common(False)])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run one configured simulation")
    r.add_argument("config")
    r.add_argument("--restart", default=None, help="checkpoint directory to resume from")
    r.add_argument("--t-max", type=float, default=None, help="override [coupling] t_max")
    c = sub.add_parser("check", parents=[common], help="run a property suite")
    c.add_argument("suite")
    s = sub.add_parser("sweep", parents=[common], help="run one simulation per value of a key")
    s.add_argument("config")
    s.add_argument("--key", required=True, help="eps_reg, dt, resolution or p")
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--workers", type=int, default=None)
    return p


def _pin_threads():
    for var in _THREAD_VARS:
        os.environ[var] = "1"


def _out_dir(args, cfg):
    env = os.environ.get(OUT_ENV)
    if env:
        return env
    if args.out:
        return args.out
    return cfg.get("output", "dir")


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def cmd_run(args):
    from .config import load

    cfg = load(args.config)
    if args.deterministic:
        cfg = cfg.with_value("run", "deterministic", True)
    if args.seed is not None:
        cfg = cfg.with_value("run", "seed", args.seed)
    from .runner import run

    out = _out_dir(args, cfg)
    result, summary = run(cfg, out, restart=args.restart, t_max=args.t_max)
    if args.strict and summary["gronwall_violated"]:
        _err("Gronwall envelope violated")
        return EXIT_ERROR
    print(f"stop_reason={summary['stop_reason']} t_final={summary['t_final']:.6g} "
          f"T_star={summary['T_star']} c_fit={summary['c_fit']:.4g} "
          f"max_residual={summary['energy_residual_max']:.3e} out={out}")
    return EXIT_CONTACT if result.stop_reason == "contact" else EXIT_OK


def cmd_check(args):
    from .checks import SUITES, run_suite

    if args.suite != "all" and args.suite not in SUITES:
        _err(f"unknown suite '{args.suite}'; choose from all, {', '.join(SUITES)}")
        return EXIT_ERROR
    results = run_suite(args.suite, seed=0 if args.seed is None else args.seed)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_ERROR


def cmd_sweep(args):
    from .config import load

    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        _err("empty value list")
        return EXIT_ERROR
    cfg = load(args.config)
    if args.seed is not None:
        cfg = cfg.with_value("run", "seed", args.seed)
    from .runner import sweep

    out = _out_dir(args, cfg)
    comp = sweep(cfg, args.key, values, out, workers=args.workers)
    for run in comp["runs"]:
        if run["ok"]:
            s = run["summary"]
            print(f"{args.key}={run['value']}: stop_reason={s['stop_reason']} residual_max={run['residual_max']:.3e}")
        else:
            print(f"{args.key}={run['value']}: FAILED {run['error']}")
    for pair in comp["pairwise"]:
        print(f"  |eta({pair['a']}) - eta({pair['b']})| = {pair['eta_distance']:.3e}")
    return EXIT_ERROR if comp["failures"] else EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.deterministic:
        _pin_threads()  # before numpy is first imported
    from .errors import ConfigError, KoiterFlowError

    try:
        return {"run": cmd_run, "check": cmd_check, "sweep": cmd_sweep}[args.command](args)
    except ConfigError as exc:
        _err(f"config: {exc}")
    except KoiterFlowError as exc:
        _err(f"{type(exc).__name__}: {exc}")
    except OSError as exc:
        _err(f"io: {exc}")
    except Exception as exc:  # anything unexpected still maps to exit code 1
        _err(f"{type(exc).__name__}: {exc}")
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
