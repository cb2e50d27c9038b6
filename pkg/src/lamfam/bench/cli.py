"""Command-line entry point: ``lamfam-bench {run,table,validate,fig1}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import FULL_ITERS, FULL_REPLICATES, ConfigError, ExperimentConfig, load_configs
from .fig1 import write_fig1
from .runner import _write_json, rejected_summary, run_config
from .table import table
from .validate import validate


def _cmd_run(args) -> int:
    try:
        configs = load_configs(args.config)
    except (OSError, ValueError) as exc:
        print(f"error: cannot load config: {exc}", file=sys.stderr)
        return 2
    overrides = {}
    if args.full_scale:
        overrides.update(n_replicates=FULL_REPLICATES, n_iters=FULL_ITERS)
    overrides.update(seed=args.seed, n_replicates=args.replicates or overrides.get("n_replicates"),
                     n_iters=args.iters if args.iters is not None else overrides.get("n_iters"))
    configs = [c.with_overrides(**overrides) for c in configs]
    single = len(configs) == 1
    n_rejected = 0
    for cfg in configs:
        out = Path(args.out or cfg.output_path or "out")
        if not single:
            out = out / cfg.label
        try:
            cfg.check()
        except ConfigError as exc:
            print(f"rejected: {exc}", file=sys.stderr)
            n_rejected += 1
            if single:
                return 2
            out.mkdir(parents=True, exist_ok=True)
            _write_json(out / "summary.json", rejected_summary(cfg, str(exc)))
            continue
        summary = run_config(cfg, out, workers=args.workers, timing=args.timing)
        final = summary.get("final", {}).get("median")
        n_abort = len(summary.get("aborted", []))
        msg = f"{cfg.label}: final median {final}" if final is not None else f"{cfg.label}: done"
        if n_abort:
            msg += f" ({n_abort} replicate(s) aborted)"
        print(f"{msg} -> {out}")
    if n_rejected:
        print(f"{n_rejected} configuration(s) rejected as incompatible", file=sys.stderr)
    return 0


def _cmd_table(args) -> int:
    try:
        print(table(args.glob))
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _cmd_validate(args) -> int:
    results = validate(phi_offset=args.perturb_phi)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def _cmd_fig1(args) -> int:
    cs = write_fig1(args.out or "out/fig1")
    for c in cs:
        status = "ok" if c.ok else f"not normalizable: {c.diagnostic}"
        print(f"lambda={c.lam:+g} alpha={c.alpha:g}: {status}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lamfam-bench", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log solver diagnostics")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run experiment configuration(s)")
    r.add_argument("--config", required=True, help="JSON config (object, list, or grid)")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--replicates", type=int, help="number of replicates")
    r.add_argument("--iters", type=int, help="iterations per replicate")
    r.add_argument("--full-scale", action="store_true",
                   help=f"{FULL_REPLICATES} replicates x {FULL_ITERS} iterations")
    r.add_argument("--out", help="output directory (one subdirectory per config for lists)")
    r.add_argument("--workers", type=int, default=1, help="worker processes for replicates")
    r.add_argument("--timing", action="store_true", help="record wall-clock nanoseconds (breaks byte-identical output)")
    r.set_defaults(func=_cmd_run)

    t = sub.add_parser("table", help="table of final medians from summary files")
    t.add_argument("glob", help="glob for summary.json files, e.g. 'out/**/summary.json'")
    t.set_defaults(func=_cmd_table)

    v = sub.add_parser("validate", help="run the oracle suite")
    v.add_argument("--perturb-phi", type=float, default=0.0, help=argparse.SUPPRESS)
    v.set_defaults(func=_cmd_validate)

    f = sub.add_parser("fig1", help="write the 1-D lambda-family density curves")
    f.add_argument("--out", help="output directory")
    f.set_defaults(func=_cmd_fig1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
