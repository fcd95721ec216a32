"""cc-test: command-line entry point."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .domain import DiscreteDistribution, DomainError, MetricSpace, emd_exact, tv_distance
from .random_analysis import ExpectedJoinMatrix, min_eigenvalue

EXIT_OK, EXIT_CONFIG, EXIT_CALIBRATION = 0, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="base seed (trial i uses seed + i)")
    p.add_argument("--trials", type=int, help="trials per grid point")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def _part2(p: argparse.ArgumentParser, n: int, rho: float, eps: float) -> None:
    _common(p)
    p.add_argument("--n", type=int, default=n)
    p.add_argument("--rho", type=float, default=rho)
    p.add_argument("--eps", type=float, default=eps)
    p.add_argument("--kind", choices=("path", "cycle"), default="cycle")
    p.add_argument("--family", action="append", help="distribution family (repeatable); default uniform and zigzag")
    p.add_argument("--calibration", help="calibration YAML (default: bundled)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cc-test", description="Confused-collector testing simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("--config", required=True)
    _common(p)

    p = sub.add_parser("calibrate", help="fit and persist constants for a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="calibration file to write")
    p.add_argument("--force", action="store_true", help="re-run the search even if the file exists")

    p = sub.add_parser("plot-data", help="tidy CSV for plotting from a records CSV")
    p.add_argument("--records", required=True)
    p.add_argument("--kind", required=True, choices=ex.PLOT_KINDS)
    p.add_argument("--out")

    p = sub.add_parser("oracle", help="ad-hoc exact EMD / TV / phi queries")
    osub = p.add_subparsers(dest="what", required=True)
    for name in ("emd", "tv"):
        q = osub.add_parser(name)
        q.add_argument("--n", type=int, required=True)
        q.add_argument("--d", type=int, default=1)
        q.add_argument("--p", type=float, default=1.0)
        q.add_argument("--mu", required=True, help="comma-separated weights")
        q.add_argument("--nu", required=True, help="comma-separated weights")
    q = osub.add_parser("phi")
    q.add_argument("--kind", choices=("path", "cycle"), required=True)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--rho", type=float, required=True)

    _part2(sub.add_parser("part2-zeroq", help="zero-query uniformity tester"), 2000, 0.5, 0.25)
    _part2(sub.add_parser("part2-query", help="query-based singleton tester"), 5000, 0.3, 0.3)
    return ap


def _weights(text: str) -> DiscreteDistribution:
    return DiscreteDistribution.normalized(np.array([float(x) for x in text.split(",")]))


def _oracle(args) -> int:
    if args.what == "phi":
        phi = ExpectedJoinMatrix(args.kind, args.n, args.rho)
        print(json.dumps({"total": phi.total(), "lambda_min": min_eigenvalue(phi), "row0": phi.entries[0].tolist()}))
        return EXIT_OK
    mu, nu = _weights(args.mu), _weights(args.nu)
    if args.what == "tv":
        print(repr(tv_distance(mu, nu)))
        return EXIT_OK
    space = MetricSpace(args.n, args.d, p=args.p)
    value, coupling = emd_exact(mu, nu, space)
    print(json.dumps({"emd": value, "rows": coupling.rows.tolist(), "cols": coupling.cols.tolist(), "flow": coupling.flow.tolist()}))
    return EXIT_OK


def _apply_overrides(cfg: ex.ExperimentConfig, args) -> ex.ExperimentConfig:
    if getattr(args, "seed", None) is not None:
        cfg.base_seed = args.seed
    if getattr(args, "trials", None) is not None:
        cfg.trials = args.trials
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "oracle":
            return _oracle(args)
        if args.cmd == "plot-data":
            text = ex.emit_plot_data(ex.read_records_csv(args.records), args.kind)
            if args.out:
                Path(args.out).write_text(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK
        if args.cmd == "calibrate":
            cfg = ex.ExperimentConfig.load(args.config)
            ex.calibrate(cfg, args.out, force=args.force, log=print)
            return EXIT_OK
        if args.cmd == "run":
            cfg = _apply_overrides(ex.ExperimentConfig.load(args.config), args)
        else:
            fams = args.family or ["uniform", "zigzag"]
            cfg = ex.ExperimentConfig(
                name=args.cmd,
                op=args.cmd,
                grid={"n": [args.n], "rho": [args.rho], "eps": [args.eps], "kind": [args.kind], "family": fams},
                trials=100,
                calibration=args.calibration,
            )
            cfg = _apply_overrides(cfg, args)
        ex.run_experiment(cfg, out=args.out, jobs=args.jobs, log=print)
        return EXIT_OK
    except ex.CalibrationMissing as e:
        print(f"calibration file missing: {e}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (ex.ConfigError, DomainError, KeyError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
