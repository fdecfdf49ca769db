"""Experiment execution for single runs and amplitude sweeps, plus the constants report."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .analysis import TimeSeriesLog, analysis_report, write_report
from .config import apply_overrides, build_initial, parse_config, preset_config, serialize_config
from .field import mean
from .output import config_hash, write_checkpoint, write_sidecar, write_snapshot
from .series import eval_f2_closed, eval_f_s, sigma_constant, solve_y_star
from .stepping import STATUS_BLOWUP, integrate

__all__ = [
    "RunOutcome",
    "output_root",
    "run_config",
    "run_preset",
    "run_sweep",
    "cmd_constants",
    "analyze_log",
    "OUTPUT_ENV",
]

log = logging.getLogger(__name__)

OUTPUT_ENV = "EXPGROWTH_OUTPUT"
PRESET_NOTE = "preset grid and horizon are package defaults"


def output_root(default="expgrowth_output"):
    return os.environ.get(OUTPUT_ENV, default)


@dataclass
class RunOutcome:
    status: str
    log: TimeSeriesLog
    report: dict
    directory: str
    files: list = field(default_factory=list)


def run_config(cfg, out_dir=None, extra_meta=None):
    """Integrate ``cfg`` and write every artifact into ``out_dir``.

    Artifacts: ``config.ini``, ``timeseries.csv`` (streamed per step when
    ``cfg.stream``), profile/spectrum CSVs at the geometric snapshot times,
    ``analysis.json``, ``final.npz`` and, on blow-up, ``blowup.npz``.  Each CSV
    gets a ``.meta.json`` sidecar with the config hash.
    """
    out_dir = out_dir or os.path.join(output_root(), cfg.name)
    os.makedirs(out_dir, exist_ok=True)
    text = serialize_config(cfg)
    with open(os.path.join(out_dir, "config.ini"), "w") as fh:
        fh.write(text)
    meta = {"config_name": cfg.name, **(extra_meta or {})}

    h0, t0 = build_initial(cfg)
    ts_path = os.path.join(out_dir, "timeseries.csv")
    log.info("run %s: scheme=%s n=%d t_end=%g", cfg.name, cfg.scheme.scheme, cfg.grid.n, cfg.t_end)
    run_log = integrate(
        h0,
        cfg.t_end,
        cfg.scheme,
        norms=cfg.norms,
        snapshot_times=cfg.snapshot_times(t0),
        t0=t0,
        checkpoint_path=os.path.join(out_dir, "blowup.npz"),
        stream_path=ts_path if cfg.stream else None,
    )
    if not cfg.stream:
        run_log.to_csv(ts_path)
    files = [ts_path]
    write_sidecar(ts_path, text, {"status": run_log.status, **meta})

    snap_rows = []
    for i, (t, f) in enumerate(run_log.snapshots):
        for p in write_snapshot(out_dir, f, t, i):
            write_sidecar(p, text, {"t": t, **meta})
            files.append(p)
        snap_rows.append({"index": i, "t": t})

    final = run_log.final
    t_last = float(run_log.t[-1])
    write_checkpoint(os.path.join(out_dir, "final.npz"), final, t_last, float(run_log.column("dt")[-1]),
                     {"config_sha256": config_hash(text), "status": run_log.status})

    report = _report(cfg, run_log, h0, final)
    report.update(meta)
    report["config_sha256"] = config_hash(text)
    report["snapshots"] = snap_rows
    write_report(report, os.path.join(out_dir, "analysis.json"))
    return RunOutcome(run_log.status, run_log, report, out_dir, files)


def _report(cfg, run_log, h0, final):
    fsp = cfg.norms.sp_pairs if "fsp" in cfg.monitors else ()
    rep = analysis_report(run_log, fsp_pairs=fsp)
    if "lyapunov" not in cfg.monitors:
        rep.pop("lyapunov_max_violation", None)
    if "radius" not in cfg.monitors:
        rep.pop("radius_model", None)
        rep.pop("radius_series", None)
    if "decay" not in cfg.monitors:
        rep.pop("decay_fit", None)
    rep["scheme"] = cfg.scheme.scheme
    rep["h0_norm2"] = run_log.meta["h0_norm2"]
    rep["mean_drift"] = abs(mean(final) - mean(h0))
    for key in ("blowup_reason", "blowup_time_lower_bound"):
        if key in run_log.meta:
            rep[key] = run_log.meta[key]
    return rep


def run_preset(name, out_dir=None, overrides=()):
    """Run one of the three amplitude regimes (fig1, fig2, fig3)."""
    cfg = apply_overrides(preset_config(name), overrides)
    return run_config(cfg, out_dir, {"preset": name, "preset_note": PRESET_NOTE})


def _sweep_row(args):
    amplitude, base_text, out_dir = args
    row = {"A": amplitude, "status": "", "norm2_min": math.nan, "norm2_max": math.nan,
           "blowup_time_lower_bound": math.nan, "error": ""}
    try:
        base = parse_config(base_text)
        cfg = dataclasses.replace(
            base,
            name=f"{base.name}_A{amplitude!r}",
            initial=dataclasses.replace(base.initial, kind="sine", amplitude=float(amplitude)),
        )
        res = run_config(cfg, os.path.join(out_dir, cfg.name))
        n2 = res.log.column("s_norm[2]")
        row.update(status=res.status, norm2_min=float(n2.min()), norm2_max=float(n2.max()))
        if res.status == STATUS_BLOWUP:
            row["blowup_time_lower_bound"] = res.log.meta["blowup_time_lower_bound"]
    except Exception as exc:  # one failed row must not stop the sweep
        row.update(status="error", error=f"{type(exc).__name__}: {exc}")
    return row


def run_sweep(amplitudes, base, out_dir=None, workers=None):
    """One run per amplitude; returns the summary rows and writes sweep.csv."""
    amplitudes = [float(a) for a in amplitudes]
    if any(a <= 0 for a in amplitudes):
        raise ValueError("amplitudes must be positive")
    if amplitudes != sorted(amplitudes):
        raise ValueError("amplitudes must be sorted")
    out_dir = out_dir or os.path.join(output_root(), f"{base.name}_sweep")
    os.makedirs(out_dir, exist_ok=True)
    text = serialize_config(base)
    jobs = [(a, text, out_dir) for a in amplitudes]
    workers = workers or base.workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    path = os.path.join(out_dir, "sweep.csv")
    cols = ["A", "status", "norm2_min", "norm2_max", "blowup_time_lower_bound", "error"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        w.writerows(rows)
    write_sidecar(path, text, {"amplitudes": amplitudes})
    return rows


def cmd_constants(tol=1e-12, pairs=((2.0, 1.0), (0.0, 2.0), (2.0, 2.0)), h0_values=(0.05, 0.1)):
    """Threshold constant y*, the f_2 bracket check and a sigma table."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    y = solve_y_star(2.0, tol)
    table = []
    for s, p in pairs:
        for h0 in h0_values:
            try:
                sig = sigma_constant(s, p, h0)
            except OverflowError:
                sig = -math.inf
            table.append({"s": s, "p": p, "h0_norm2": h0, "sigma": sig, "small": sig > 0})
    return {
        "y_star": y,
        "y_star_bracket": [0.104, 0.105],
        "y_star_in_bracket": 0.104 < y < 0.105,
        "f2_at_y_star": eval_f_s(2.0, y, tol=min(tol, 1e-15))[0],
        "f2_closed": {"0.104": eval_f2_closed(0.104), "0.105": eval_f2_closed(0.105)},
        "bracket_holds": eval_f2_closed(0.104) < 1.0 < eval_f2_closed(0.105),
        "tol": tol,
        "sigma": table,
    }


def analyze_log(path, sigma=None, out_path=None):
    """Rebuild the analysis report from a time-series CSV."""
    meta = {}
    side = f"{path}.meta.json"
    if os.path.exists(side):
        with open(side) as fh:
            meta = json.load(fh)
    run_log = TimeSeriesLog.from_csv(path, meta)
    if sigma is None and "s_norm[2]" in run_log:
        n2_0 = float(run_log.column("s_norm[2]")[0])
        try:
            sigma = 1.0 - eval_f_s(2.0, n2_0, tol=1e-15)[0]
        except OverflowError:
            sigma = None
    rep = analysis_report(run_log, sigma=sigma)
    if out_path:
        write_report(rep, out_path)
    return rep
