"""Command-line entry point.

Subcommands:
  sweep    run a sweep described by a JSON config file
  preset   run a named figure preset at desk or full scale
  oracles  run the numerical cross-check suite (nonzero exit on failure)
  collapse simulate the softmax weight-field statistics
  dataset  generate or inspect a linear-Gaussian dataset

Exit codes: 0 success, 1 check failure, 2 configuration error. The
VRIWAE_THREADS environment variable sets the sweep worker count.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .collapse import simulate_collapse
from .harness import (
    PRESET_NAMES,
    ConfigError,
    load_sweep_config,
    run_figure_preset,
    run_oracle_suite,
    run_sweep,
)
from .models import LinGaussDataset


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vriwae",
        description="VR-IWAE gradient-estimator experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="run a sweep from a JSON config")
    p_sweep.add_argument("--config", required=True)

    p_preset = sub.add_parser("preset", help="run a figure preset")
    p_preset.add_argument("name", choices=PRESET_NAMES)
    p_preset.add_argument("--scale", default="desk", choices=("desk", "full"))
    p_preset.add_argument("--seed", type=int, default=0)
    p_preset.add_argument("--out", default=".")

    p_oracles = sub.add_parser("oracles", help="run the oracle check suite")
    p_oracles.add_argument("--json", default=None)
    p_oracles.add_argument("--seed", type=int, default=0)

    p_collapse = sub.add_parser("collapse", help="simulate softmax collapse stats")
    p_collapse.add_argument("--N", type=int, required=True)
    p_collapse.add_argument("--beta", type=float, required=True)
    p_collapse.add_argument("--delta", type=float, default=1.0)
    p_collapse.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p_collapse.add_argument("--replicates", type=int, default=2000)
    p_collapse.add_argument("--seed", type=int, default=0)
    p_collapse.add_argument("--out", default=None)

    p_dataset = sub.add_parser("dataset", help="linear-Gaussian dataset tools")
    p_dataset.add_argument("action", choices=("gen", "dump"))
    p_dataset.add_argument("--seed", type=int, default=0)
    p_dataset.add_argument("--d", type=int, default=10)
    p_dataset.add_argument("--out", required=True)

    return parser


def _cmd_sweep(args) -> int:
    cfg = load_sweep_config(args.config)
    result = run_sweep(cfg)
    print(json.dumps({"csv": result["csv"], "json": result["json"],
                      "rows": result["rows"]}))
    return 0


def _cmd_preset(args) -> int:
    result = run_figure_preset(args.name, scale=args.scale, seed=args.seed,
                               out_dir=args.out)
    print(json.dumps({"csv": result["csv"], "json": result["json"],
                      "rows": result["rows"]}))
    return 0


def _cmd_oracles(args) -> int:
    report = run_oracle_suite(seed=args.seed)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    for check in report["checks"]:
        status = "pass" if check["passed"] else "FAIL"
        print(f"{status} {check['name']}")
    print(f"all_passed={report['all_passed']} runtime={report['runtime_s']:.1f}s")
    return 0 if report["all_passed"] else 1


def _cmd_collapse(args) -> int:
    summary = simulate_collapse(args.N, args.beta, args.delta, args.lam,
                                args.replicates, seed=args.seed)
    rows = summary.rows()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("N,beta,delta,lambda,stat,mean,var,stderr\n")
            for row in rows:
                fh.write(",".join(
                    f"{row[c]:.17g}" if isinstance(row[c], float) else str(row[c])
                    for c in ("N", "beta", "delta", "lambda", "stat", "mean",
                              "var", "stderr")) + "\n")
    for row in rows:
        print(f"{row['stat']}: mean={row['mean']:.6g} var={row['var']:.6g} "
              f"stderr={row['stderr']:.3g}")
    return 0


def _cmd_dataset(args) -> int:
    path = Path(args.out)
    if args.action == "gen":
        dataset = LinGaussDataset.generate(args.d, args.seed)
        dataset.save_csv(path)
        print(f"wrote {path} (d={dataset.d}, T={dataset.t}, seed={dataset.seed})")
        return 0
    dataset = LinGaussDataset.load_csv(path)
    theta = dataset.theta_star
    print(f"d={dataset.d} T={dataset.t} seed={dataset.seed}")
    print("theta_star[:5] = " + " ".join(f"{v:.6g}" for v in theta[:5]))
    print("b_star[:5]     = " + " ".join(f"{v:.6g}" for v in dataset.b_star[:5]))
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "sweep": _cmd_sweep,
        "preset": _cmd_preset,
        "oracles": _cmd_oracles,
        "collapse": _cmd_collapse,
        "dataset": _cmd_dataset,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
