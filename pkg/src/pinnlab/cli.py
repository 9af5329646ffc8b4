"""Command-line entry point.

Verbs:
    pinnlab run <config.ini>    execute one experiment config
    pinnlab presets             list built-in architecture presets
    pinnlab verify [...]        run the randomized preconditioning suite
    pinnlab version             print the package version

Exit codes: 0 success, 2 configuration error, 3 numeric failure. Numeric
failures also leave a machine-readable error.json next to the artifacts when
the output directory already exists.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .errors import ConfigError, PinnlabError
from .experiments import output_root, parse_config, preset_table, run
from .precond import verify_precond_suite

GUARANTEED_CHECKS = (
    "kappa_le_u", "reduction_identity", "factor_le_one",
    "pair_lower_bound", "global_lower_bound", "global_lower_bound_maxcos",
    "equilibrated_L_le_L", "vds_sqrt_n",
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pinnlab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="verb")
    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config")
    sub.add_parser("presets", help="list built-in presets")
    p_ver = sub.add_parser("verify", help="randomized preconditioning-bound suite")
    p_ver.add_argument("--n-matrices", type=int, default=1000)
    p_ver.add_argument("--n-diagonals", type=int, default=100)
    p_ver.add_argument("--size", type=int, default=6)
    p_ver.add_argument("--seed", type=int, default=2024)
    sub.add_parser("version", help="print version")
    args = parser.parse_args(argv)

    if args.verb == "version":
        print(__version__)
        return 0
    if args.verb == "presets":
        for name, preset in sorted(preset_table().items()):
            flags = []
            if preset.equilibrate:
                flags.append("equilibrated")
            if preset.rff_features:
                flags.append(f"rff({preset.rff_features}, sigma={preset.rff_scale:g})")
            extra = f"  [{', '.join(flags)}]" if flags else ""
            hidden = "x".join(str(h) for h in preset.hidden)
            print(f"{name:24s} hidden {hidden:14s} {preset.activation.label()}{extra}")
        return 0
    if args.verb == "verify":
        report = verify_precond_suite(args.n_matrices, args.n_diagonals, args.size, args.seed)
        print(json.dumps(report, indent=2))
        bad = sum(report["violations"][k] for k in GUARANTEED_CHECKS)
        return 0 if bad == 0 else 3
    if args.verb == "run":
        try:
            manifest = run(args.config)
        except ConfigError as exc:
            print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
            return 2
        except PinnlabError as exc:
            payload = {"error": "numeric", "type": type(exc).__name__, "message": str(exc)}
            print(json.dumps(payload), file=sys.stderr)
            try:
                cfg = parse_config(args.config)
                outdir = os.path.join(output_root(), cfg["experiment"]["output"])
                if os.path.isdir(outdir):
                    with open(os.path.join(outdir, "error.json"), "w") as fh:
                        json.dump(payload, fh, indent=2)
            except Exception:
                pass
            return 3
        print(json.dumps({"output_dir": manifest["output_dir"],
                          "artifacts": manifest["artifacts"]}))
        return 0
    parser.print_help()
    return 2


if __name__ == "__main__":
    sys.exit(main())
