"""Command-line front end.

Subcommands: diagram, scaling, probe, varscan, rescale, evolve. Every
command takes --config (JSON file), --out (output directory, also settable
via NLSBRANCH_OUT), --seed and --budget overrides. Exit codes: 0 success,
2 configuration error, 3 numerical failure (partial artifacts plus a
failure manifest are written).
"""

import argparse
import json
import os
import sys
import traceback

from . import io
from .config import RunConfig, from_dict, load_config, p_is_even_integer
from .errors import ConfigError, ToolkitError
from .pipeline import (
    run_diagram,
    run_evolve_suite,
    run_probe_suite,
    run_rescale_suite,
    run_scaling_suite,
    run_varscan_suite,
)

ENV_OUT = "NLSBRANCH_OUT"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlsbranch",
        description="Bound-state branch tracing and bifurcation analysis for 1D NLS",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("diagram", "trace all branches of the bifurcation diagram"),
        ("scaling", "large-E scaling checkpoints on a traced branch"),
        ("probe", "dynamic stability probes of tagged points"),
        ("varscan", "constrained-minimization scan over the charge"),
        ("rescale", "rescaled limit profiles at large E"),
        ("evolve", "propagate a stationary state and record the trajectory"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="JSON run configuration")
        p.add_argument("--out", metavar="DIR", help=f"output directory (default ${ENV_OUT} or ./out)")
        p.add_argument("--seed", type=int, metavar="N", help="seed for the random probe direction")
        p.add_argument("--budget", type=int, metavar="N", help="maximum number of branches")
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else from_dict({})
    if args.seed is not None:
        cfg.seed = args.seed
    if args.budget is not None:
        if args.budget < 1:
            raise ConfigError("--budget must be at least 1")
        cfg.budget = args.budget
    return cfg


def _resolve_out(args, cfg: RunConfig) -> str:
    out = args.out or cfg.output.get("directory") or os.environ.get(ENV_OUT) or "out"
    os.makedirs(out, exist_ok=True)
    return out


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    out = _resolve_out(args, cfg)

    if not p_is_even_integer(cfg.model["p"]):
        print(
            f"warning: p = {cfg.model['p']} is not an even integer; "
            "analytic-continuation guarantees for the branch structure "
            "assume even integer powers",
            file=sys.stderr,
        )

    try:
        if args.command == "diagram":
            result = run_diagram(cfg, out_dir=out)
            nb = len(result.branches)
            ne = len(result.events)
            print(f"diagram: {nb} branches, {ne} events -> {out}")
            if result.failures:
                print(f"warning: {len(result.failures)} nonfatal failures recorded in summary.json")
        elif args.command == "scaling":
            report = run_scaling_suite(cfg, out)
            print(json.dumps({k: report[k] for k in ("branch", "r_Q_limit", "r_K_limit", "pass")}, indent=2))
        elif args.command == "probe":
            report = run_probe_suite(cfg, out)
            print(f"probes: {len(report['probes'])} run, pass = {report['pass']}")
        elif args.command == "varscan":
            report = run_varscan_suite(cfg, out)
            print(f"varscan: transition = {report['transition']} bracket = {report['mu_star_bracket']}")
        elif args.command == "rescale":
            report = run_rescale_suite(cfg, out)
            for row in report["rows"]:
                print(
                    f"E={row['E']:g}: ev0 residual {row['ev0_residual']:.3e}, "
                    f"H1 distance {row['h1_dist_to_limit']:.3e}, "
                    f"morse {row['morse_plus']} predicted {row['predicted_morse']}"
                )
        elif args.command == "evolve":
            report = run_evolve_suite(cfg, out)
            print(json.dumps(report, indent=2))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"missing prerequisite artifact: {exc}", file=sys.stderr)
        return 2
    except ToolkitError as exc:
        manifest = {
            "command": args.command,
            "error": type(exc).__name__,
            "message": str(exc),
            "traceback": traceback.format_exc(),
        }
        io.write_json(os.path.join(out, "failure_manifest.json"), manifest)
        print(f"numerical failure: {exc} (manifest written to {out})", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
