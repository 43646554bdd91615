"""Command-line interface: ``sacsim run|sweep|validate``.

Exit codes: 0 on success, 2 on configuration errors, 1 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ParseError, RunConfig, ValidationError, load_config
from .runner import load_sweep_spec, run, sweep, write_results


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sacsim", description="Directional-WLAN beam management simulator")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="execute a single simulation")
    pr.add_argument("--config", required=True, help="run config YAML")
    pr.add_argument("--seed", type=int, default=None, help="override master seed")
    pr.add_argument("--out", default=None, help="output directory (default: print to stdout)")

    ps = sub.add_parser("sweep", help="execute a parameter sweep")
    ps.add_argument("--spec", required=True, help="sweep spec YAML")
    ps.add_argument("--out", required=True, help="output directory for results.csv/json + manifest")
    ps.add_argument("--workers", type=int, default=1, help="parallel worker processes")

    pv = sub.add_parser("validate", help="check a run config without simulating")
    pv.add_argument("--config", required=True, help="run config YAML")
    return p


def _record_to_row(cfg: RunConfig, seed, rec) -> dict:
    return {
        "scenario": cfg.scenario.kind,
        "scheme": cfg.scheme_label,
        "axis": "",
        "axis_value": "",
        "seed": cfg.master_seed if seed is None else seed,
        "throughput_mbps": rec.throughput_mbps,
        "mean_delay_ms": rec.mean_delay_ms,
        "drop_rate": rec.drop_rate,
        "arrived": rec.counts["arrived"],
        "delivered": rec.counts["delivered"],
        "dropped": rec.counts["dropped"],
        "retx": rec.counts["retx"],
        "preamble_fails": rec.counts["preamble_fails"],
        "retrains": rec.counts["retrains"],
    }


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            load_config(args.config)
            print(f"OK: {args.config}")
            return 0
        if args.command == "run":
            cfg = load_config(args.config)
            rec = run(cfg, seed=args.seed)
            row = _record_to_row(cfg, args.seed, rec)
            if args.out:
                write_results([row], args.out)
                print(f"wrote {Path(args.out) / 'results.csv'}")
            else:
                print(json.dumps(row, indent=2, sort_keys=True))
            return 0
        if args.command == "sweep":
            spec = load_sweep_spec(args.spec)
            rows = sweep(spec, workers=max(1, args.workers))
            write_results(rows, args.out, spec=spec)
            print(f"wrote {len(rows)} rows to {Path(args.out) / 'results.csv'}")
            return 0
    except (ValidationError, ParseError, FileNotFoundError, ValueError) as e:
        if isinstance(e, ValidationError):
            for err in e.errors:
                print(f"config error: {err}", file=sys.stderr)
        else:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 -- CLI boundary
        print(f"runtime error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
