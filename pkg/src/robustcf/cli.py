"""Command line entry point: ``robustcf {sweep,drop,flops}``.

Exit codes: 0 success, 1 config error, 2 runtime/numerical error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .evaluation import METHODS, flop_count
from .harness import ExperimentConfig, emit_csv, load_config, resolve_output, run_drop, run_sweep
from .network import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3


def _overrides(pairs):
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _build_parser():
    parser = argparse.ArgumentParser(prog="robustcf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("-c", "--config", help="flat key=value config file")
        p.add_argument("-s", "--set", action="append", metavar="KEY=VALUE",
                       help="override any config key, e.g. system.L=4 (repeatable)")

    p = sub.add_parser("sweep", help="run the full SNR x alpha Monte Carlo sweep")
    common(p)
    p.add_argument("-o", "--output", help="CSV path (overrides output_path)")
    p.add_argument("-j", "--workers", type=int, default=1)

    p = sub.add_parser("drop", help="run one seeded drop and print diagnostics")
    common(p)
    p.add_argument("--snr-index", type=int, default=0)
    p.add_argument("--alpha-index", type=int, default=0)
    p.add_argument("--trial", type=int, default=0)

    p = sub.add_parser("flops", help="print the analytic complexity table")
    common(p)
    p.add_argument("--n", type=int, nargs="*", help="scheduled-user counts (default: system.n)")
    return parser


def _sweep(cfg: ExperimentConfig, args) -> int:
    result = run_sweep(cfg, workers=args.workers)
    path = resolve_output(args.output or cfg.output_path)
    try:
        emit_csv(result, path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {len(result.rows)} rows to {path}")
    return EXIT_OK


def _drop(cfg: ExperimentConfig, args) -> int:
    gp = (args.snr_index, args.alpha_index)
    if not (0 <= gp[0] < len(cfg.snr_grid_db) and 0 <= gp[1] < len(cfg.alpha_grid)):
        raise ConfigError(f"grid point {gp} outside the configured grids")
    snr, alpha = cfg.snr_grid_db[gp[0]], cfg.alpha_grid[gp[1]]
    print(f"snr_db={snr} alpha={alpha} trial={args.trial} seed={cfg.master_seed}")
    for name, res in run_drop(cfg, gp, args.trial).items():
        if res.skipped:
            print(f"  {name:6s} skipped: {res.skipped}")
            continue
        extra = " ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in res.diagnostics.items())
        print(f"  {name:6s} sum_rate={res.sum_rate:.6f} iterations={res.iterations} {extra}")
    return EXIT_OK


def _flops(cfg: ExperimentConfig, args) -> int:
    M = cfg.system.M
    ns = args.n or [cfg.system.n]
    print(f"# M={M} i_max={cfg.robust.i_max}")
    print("n," + ",".join(METHODS))
    for n in ns:
        counts = [flop_count(m, M, n, cfg.robust.i_max).flops for m in METHODS]
        print(f"{n}," + ",".join(f"{c:.0f}" for c in counts))
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args.set))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    handler = {"sweep": _sweep, "drop": _drop, "flops": _flops}[args.command]
    try:
        return handler(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
