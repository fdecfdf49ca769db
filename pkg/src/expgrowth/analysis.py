"""Run logs, Lyapunov/dissipation monitors and post-hoc estimators."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .field import _fmt

__all__ = [
    "TimeSeriesLog",
    "DecayFit",
    "RadiusFit",
    "trapezoid_integral",
    "lyapunov_monitor",
    "fsp_decrease_monitor",
    "fit_decay",
    "radius_fit",
    "estimate_radius",
    "fit_radius_model",
    "analysis_report",
]


class TimeSeriesLog:
    """Column-oriented per-step record of a run.

    Every row carries ``t``, ``dt``, ``status`` and whatever scalar columns the
    producer adds (flattened :class:`~expgrowth.field.NormReport` entries,
    ``lyapunov``, ``dissipation``, ``radius``).  The integrator also attaches
    ``final`` (last finite state), ``status`` and ``snapshots``.
    """

    def __init__(self, meta=None):
        self.columns = {"t": [], "dt": [], "status": []}
        self.meta = dict(meta or {})
        self.final = None
        self.status = "ok"
        self.snapshots = []

    def append(self, row):
        n = len(self)
        for key in row:
            if key not in self.columns:
                self.columns[key] = [math.nan] * n
        for key, col in self.columns.items():
            col.append(row.get(key, "" if key == "status" else math.nan))

    def __len__(self):
        return len(self.columns["t"])

    @property
    def names(self):
        return list(self.columns)

    def __contains__(self, name):
        return name in self.columns

    def column(self, name):
        if name not in self.columns:
            raise KeyError(f"column {name!r} not in log (have {', '.join(self.columns)})")
        if name == "status":
            return list(self.columns[name])
        return np.asarray(self.columns[name], dtype=float)

    @property
    def t(self):
        return self.column("t")

    def validate(self):
        t = self.t
        if np.any(np.diff(t) <= 0):
            raise ValueError("t is not strictly increasing")
        if "dissipation" in self.columns and np.any(np.diff(self.column("dissipation")) < 0):
            raise ValueError("dissipation integral decreased")

    def subsample(self, every):
        out = TimeSeriesLog(self.meta)
        for key, col in self.columns.items():
            out.columns[key] = col[::every]
        if len(self) and (len(self) - 1) % every:
            for key, col in self.columns.items():
                out.columns[key].append(col[-1])
        out.final, out.status = self.final, self.status
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.names)
            for i in range(len(self)):
                w.writerow([_cell(self.columns[k][i]) for k in self.names])

    @classmethod
    def from_csv(cls, path, meta=None):
        log = cls(meta)
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            log.columns = {k: [] for k in header}
            for row in r:
                for k, v in zip(header, row):
                    log.columns[k].append(v if k == "status" else float(v))
        if log.columns.get("status"):
            log.status = log.columns["status"][-1]
        return log


def _cell(v):
    return v if isinstance(v, str) else repr(float(v))


def trapezoid_integral(t, y):
    """Cumulative trapezoid integral starting from 0."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(t)
    if t.size > 1:
        out[1:] = np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))
    return out


def lyapunov_monitor(log, sigma):
    """max_t [ ||h||_2(t) + sigma int_0^t ||h||_6 - ||h0||_2 ].

    Non-positive when the Lyapunov inequality holds on the sampled times.
    """
    if len(log) == 0:
        return 0.0
    n2 = log.column("s_norm[2]")
    n6 = log.column("s_norm[6]")
    lyap = n2 + sigma * trapezoid_integral(log.t, n6)
    return float(np.max(lyap - n2[0]))


def fsp_decrease_monitor(log, s, p):
    """Largest increase of ||h||_{F^{s,p}} between consecutive samples (>= 0)."""
    col = log.column(f"fsp[{_fmt(s)},{_fmt(p)}]")
    if col.size < 2:
        return 0.0
    return float(max(0.0, np.max(np.diff(col))))


@dataclass
class DecayFit:
    s: float
    window: tuple
    fitted_rate: float
    model: str
    residual: float
    alternative: dict = field(default_factory=dict)

    def predict(self, t, amplitude=1.0):
        t = np.asarray(t, dtype=float)
        if self.model == "exponential":
            return amplitude * np.exp(-self.fitted_rate * t)
        return amplitude * (1.0 + t) ** (-self.fitted_rate)


def _linfit(x, y):
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    resid = y - np.polyval(coef, x)
    return coef, float(np.sqrt(np.mean(resid**2)))


def fit_decay(log, s, window=None):
    """Fit ||h||_s on ``window`` by (1+t)^-r and by exp(-lambda t).

    Both fits are least squares on log ||h||_s.  The model with the smaller
    RMS log-residual is returned; the other is kept in ``alternative``.
    """
    t = log.t
    y = log.column(f"s_norm[{_fmt(s)}]")
    lo, hi = window if window is not None else (t[0], t[-1])
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < 10:
        raise ValueError(f"degenerate window [{lo}, {hi}]: {int(sel.sum())} samples, need >= 10")
    if np.any(y[sel] <= 0):
        raise ValueError("norms must be positive inside the window")
    ly = np.log(y[sel])
    c_alg, r_alg = _linfit(np.log1p(t[sel]), ly)
    c_exp, r_exp = _linfit(t[sel], ly)
    fits = {
        "algebraic": (-c_alg[0], r_alg),
        "exponential": (-c_exp[0], r_exp),
    }
    best = min(fits, key=lambda m: fits[m][1])
    other = "exponential" if best == "algebraic" else "algebraic"
    return DecayFit(
        s=float(s),
        window=(float(lo), float(hi)),
        fitted_rate=float(fits[best][0]),
        model=best,
        residual=fits[best][1],
        alternative={"model": other, "rate": float(fits[other][0]), "residual": fits[other][1]},
    )


@dataclass
class RadiusFit:
    nu: float
    n_modes: int
    degenerate: bool


def radius_fit(field, floor=1e-14, band=1e-3):
    """Slope of -log|hhat_k| against |k| over modes in (floor, band * max)."""
    g = field.grid
    a = np.abs(field.spectral[g.nonzero])
    k = g.kmag[g.nonzero]
    if a.size == 0 or a.max() == 0:
        return RadiusFit(0.0, 0, True)
    sel = (a > floor) & (a < band * a.max())
    # a line through fewer than three distinct |k| says nothing about the decay
    if np.unique(np.round(k[sel], 9)).size < 3:
        return RadiusFit(0.0, int(sel.sum()), True)
    slope = np.polyfit(k[sel], np.log(a[sel]), 1)[0]
    return RadiusFit(float(-slope), int(sel.sum()), False)


def estimate_radius(field, floor=1e-14):
    """Analyticity-strip width from the exponential decay of the spectrum.

    Returns 0.0 when fewer than three modes fall inside the fitting band.
    """
    return radius_fit(field, floor).nu


def fit_radius_model(t, nu):
    """Fit nu(t) = (c0 + a t)^(1/4) by linear least squares on nu^4.

    Returns ``{"c0": .., "a": .., "residual": ..}``; c0 plays the role of
    (b t0)^4 and only the combination is identifiable.
    """
    t = np.asarray(t, dtype=float)
    nu = np.asarray(nu, dtype=float)
    ok = np.isfinite(nu) & (nu > 0)
    if ok.sum() < 2:
        return {"c0": math.nan, "a": math.nan, "residual": math.nan}
    (a, c0), _ = _linfit(t[ok], nu[ok] ** 4)
    model = np.clip(c0 + a * t[ok], 0.0, None) ** 0.25
    return {"c0": float(c0), "a": float(a), "residual": float(np.sqrt(np.mean((model - nu[ok]) ** 2)))}


def analysis_report(log, sigma=None, decay_s=2.0, late_fraction=0.5, fsp_pairs=None):
    """JSON-ready summary: fits, violations and radius series of one run."""
    rep = {"samples": len(log), "status": log.status}
    if len(log) == 0:
        return rep
    t = log.t
    rep["t_end"] = float(t[-1])
    if sigma is None:
        sigma = log.meta.get("sigma_2_1")
    if sigma is not None and "s_norm[6]" in log:
        rep["sigma_2_1"] = float(sigma)
        rep["lyapunov_max_violation"] = lyapunov_monitor(log, sigma)
    n2 = log.column("s_norm[2]")
    rep["norm2_min"] = float(np.min(n2))
    rep["norm2_max"] = float(np.max(n2))
    rep["norm2_max_increase"] = float(max(0.0, np.max(np.diff(n2)))) if n2.size > 1 else 0.0
    if fsp_pairs is None:
        fsp_pairs = [tuple(float(x) for x in k[4:-1].split(",")) for k in log.names if k.startswith("fsp[")]
    rep["fsp_max_increase"] = {f"{_fmt(s)},{_fmt(p)}": fsp_decrease_monitor(log, s, p) for s, p in fsp_pairs}
    try:
        fit = fit_decay(log, decay_s, (t[0] + late_fraction * (t[-1] - t[0]), t[-1]))
        rep["decay_fit"] = asdict(fit)
    except (ValueError, KeyError) as exc:
        rep["decay_fit"] = {"error": str(exc)}
    if "radius" in log:
        r = log.column("radius")
        rep["radius_model"] = fit_radius_model(t, r)
        idx = np.unique(np.geomspace(1, len(log), num=min(len(log), 50)).astype(int) - 1)
        rep["radius_series"] = [[float(t[i]), float(r[i])] for i in idx]
    if "sup_lap" in log:
        rep["sup_lap_max"] = float(np.max(log.column("sup_lap")))
    return rep


def write_report(report, path):
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=float)
