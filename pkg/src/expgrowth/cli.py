"""Command line front-end.

Exit codes: 0 success, 2 blow-up detected, 1 error.  The output root defaults
to ``./expgrowth_output`` and can be moved with ``EXPGROWTH_OUTPUT``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import apply_overrides, load_config, parse_config
from .runner import analyze_log, cmd_constants, run_config, run_preset, run_sweep
from .stepping import STATUS_BLOWUP

EXIT_OK, EXIT_ERROR, EXIT_BLOWUP = 0, 1, 2


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _pairs(text):
    return [tuple(float(v) for v in item.split(":")) for item in text.split(",") if item.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog="expgrowth", description="Simulate h_t = Lap exp(-Lap h) on periodic domains.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config key (repeatable)")
        sp.add_argument("-o", "--out", help="output directory (default: $EXPGROWTH_OUTPUT/<name>)")

    sp = sub.add_parser("run", help="run a config file")
    sp.add_argument("config")
    add_common(sp)

    sp = sub.add_parser("preset", help="run a named amplitude preset")
    sp.add_argument("name", choices=["fig1", "fig2", "fig3"])
    add_common(sp)

    sp = sub.add_parser("sweep", help="amplitude sweep over A sin(x)")
    sp.add_argument("--amplitudes", type=_floats, required=True, help="comma separated, sorted")
    sp.add_argument("--config", help="base config (default: built-in defaults)")
    sp.add_argument("--workers", type=int)
    add_common(sp)

    sp = sub.add_parser("constants", help="print y* and the sigma table as JSON")
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--pairs", type=_pairs, default=[(2.0, 1.0), (0.0, 2.0), (2.0, 2.0)], metavar="S:P,...")
    sp.add_argument("--h0", type=_floats, default=[0.05, 0.1], metavar="Y,...")

    sp = sub.add_parser("analyze", help="analysis report from a time-series CSV")
    sp.add_argument("log")
    sp.add_argument("--sigma", type=float)
    sp.add_argument("-o", "--out", help="write the JSON report here as well")
    return p


def _summary(res):
    rep = res.report
    keys = ("status", "t_end", "norm2_max_increase", "lyapunov_max_violation", "mean_drift", "blowup_reason",
            "blowup_time_lower_bound")
    out = {k: rep[k] for k in keys if k in rep}
    out["directory"] = res.directory
    return out


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "constants":
            print(json.dumps(cmd_constants(args.tol, args.pairs, args.h0), indent=2))
            return EXIT_OK
        if args.command == "analyze":
            print(json.dumps(analyze_log(args.log, args.sigma, args.out), indent=2, default=float))
            return EXIT_OK
        if args.command == "preset":
            res = run_preset(args.name, args.out, args.overrides)
        elif args.command == "run":
            cfg = apply_overrides(load_config(args.config), args.overrides)
            res = run_config(cfg, args.out)
        else:
            base = load_config(args.config) if args.config else parse_config("")
            base = apply_overrides(base, args.overrides)
            rows = run_sweep(args.amplitudes, base, args.out, args.workers)
            print(json.dumps(rows, indent=2))
            bad = [r for r in rows if r["status"] == "error"]
            if bad:
                return EXIT_ERROR
            return EXIT_BLOWUP if any(r["status"] == STATUS_BLOWUP for r in rows) else EXIT_OK
        print(json.dumps(_summary(res), indent=2, default=float))
        return EXIT_BLOWUP if res.status == STATUS_BLOWUP else EXIT_OK
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
