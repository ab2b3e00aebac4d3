"""Command-line entry point.

Subcommands mirror the experiment kinds; each takes --config (JSON),
--out, --workers, --seed.  Exit codes: 0 success, 2 config error,
3 numerical-stability error, 4 partial failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .experiments import (KINDS, ConfigError, PartialFailure, parse_config,
                          parse_config_dict, run_experiment)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="occufluct",
        description="occupation-time fluctuation laboratory for "
                    "(d, alpha, beta, gamma)-branching particle systems")
    sub = ap.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", help="JSON experiment document")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--workers", type=int,
                        default=int(os.environ.get("OCCUFLUCT_WORKERS", "0"))
                        or None)
        sp.add_argument("--seed", type=int, help="override the config seed")
        if kind == "classify":
            sp.add_argument("--d", type=float)
            sp.add_argument("--alpha", type=float)
            sp.add_argument("--beta", type=float)
            sp.add_argument("--gamma", type=float)
            sp.add_argument("--v-rate", type=float, default=1.0)
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.config:
            spec = parse_config(args.config)
        elif args.kind == "classify" and args.d is not None:
            spec = parse_config_dict({
                "kind": "classify",
                "params": {"d": args.d, "alpha": args.alpha,
                           "beta": args.beta, "gamma": args.gamma,
                           "v_rate": args.v_rate}})
        else:
            print("error: --config is required", file=sys.stderr)
            return 2
        if args.seed is not None:
            spec = type(spec)(spec.kind, spec.params, args.seed, spec.out,
                              spec.extra)
        summary = run_experiment(spec, out_dir=args.out, workers=args.workers)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except PartialFailure as e:
        print(f"partial failure: {e}", file=sys.stderr)
        return 4
    except Exception as e:  # numerical-stability family
        from .limits.dependence import QuadratureInstability
        from .limits.grids import GridInstabilityError
        from .limits.oracle import OracleDisagreement
        from .loglaplace import SolverError
        if isinstance(e, (SolverError, GridInstabilityError,
                          OracleDisagreement, QuadratureInstability)):
            print(f"numerical-stability error: {e}", file=sys.stderr)
            return 3
        raise
    print(json.dumps(summary, indent=2, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
