"""Time stepping: spectral IMEX and fully implicit finite differences."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .analysis import TimeSeriesLog, radius_fit
from .field import SpectralField, norm_report, s_norm
from .nonlinearity import EXP_OVERFLOW_THRESHOLD, BlowUpSignal, rhs_direct
from .output import write_checkpoint
from .series import eval_f_s

__all__ = [
    "SchemeConfig",
    "NormRequest",
    "StepResult",
    "step_spectral_imex",
    "step_fd_backward_euler",
    "fd_laplacian",
    "integrate",
    "detect_blowup",
    "blowup_reason",
    "STATUS_OK",
    "STATUS_DT_REDUCED",
    "STATUS_BLOWUP",
]

STATUS_OK = "ok"
STATUS_DT_REDUCED = "dt_reduced"
STATUS_BLOWUP = "blow_up_detected"

SCHEMES = ("spectral_imex", "fd_backward_euler")
GROWTH_FACTOR = 1e6
# a strip narrower than this many grid spacings is not resolved
RESOLUTION_FACTOR = 2.0


@dataclass
class SchemeConfig:
    """Stepping controls.

    ``linear`` selects how the stiff -C Delta^2 part is propagated in the
    spectral scheme: ``"exponential"`` (exact) or ``"implicit"`` (backward
    Euler factor 1/(1 + dt C k^4)).  ``stabilize`` raises C above 1 only when
    max exp(-Delta h) > 2 * safety_factor, which is where the explicit remainder
    would otherwise be unstable for large dt.
    """

    scheme: str = "spectral_imex"
    dt_init: float = 1e-4
    dt_min: float = 1e-10
    dt_max: float = 0.05
    adapt: bool = True
    target_change: float = 1e-3
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    safety_factor: float = 0.9
    corrector: bool = False
    linear: str = "exponential"
    dealias: bool = True
    stabilize: bool = True
    nonlinear: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.linear not in ("exponential", "implicit"):
            raise ValueError("linear must be 'exponential' or 'implicit'")
        if not (0 < self.dt_min <= self.dt_init):
            raise ValueError("need 0 < dt_min <= dt_init")
        if self.dt_max < self.dt_init:
            raise ValueError("need dt_init <= dt_max")
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")
        if not 0 < self.safety_factor < 1:
            raise ValueError("safety_factor must lie in (0, 1)")
        if self.target_change <= 0:
            raise ValueError("target_change must be positive")


@dataclass
class NormRequest:
    s_values: tuple = (-1.0, 0.0, 2.0, 4.0, 6.0)
    besov_s: tuple = (-1.0, 2.0)
    sp_pairs: tuple = ((0.0, 2.0), (2.0, 1.0), (2.0, 1.5))
    analytic: tuple = ((2.0, 0.5),)

    def __post_init__(self):
        # the Lyapunov functional needs both of these
        vals = tuple(float(s) for s in self.s_values)
        for s in (2.0, 6.0):
            if s not in vals:
                vals += (s,)
        self.s_values = vals

    def report(self, field):
        return norm_report(field, self.s_values, self.besov_s, self.sp_pairs, self.analytic)


@dataclass
class StepResult:
    field: SpectralField
    dt_used: float
    newton_iters: int = 0
    status: str = STATUS_OK
    info: str = ""
    extra: dict = dc_field(default_factory=dict)


def _phi1(z):
    out = np.ones_like(z)
    big = z > 1e-8
    out[big] = -np.expm1(-z[big]) / z[big]
    out[~big] = 1.0 - 0.5 * z[~big]
    return out


def _phi2(z):
    out = np.empty_like(z)
    big = z > 1e-2
    zb = z[big]
    out[big] = (np.expm1(-zb) + zb) / zb**2
    zs = z[~big]
    out[~big] = 0.5 - zs / 6.0 + zs**2 / 24.0 - zs**3 / 120.0 + zs**4 / 720.0
    return out


def _remainder(h, c, cfg):
    """N = Delta exp(-Delta h) + C Delta^2 h, plus max exp(-Delta h)."""
    k4 = h.grid.k2**2
    if not cfg.nonlinear:
        return (c - 1.0) * k4 * h.spectral, 1.0
    ev = rhs_direct(h, cfg.dealias)
    return ev.rhs.spectral + c * k4 * h.spectral, ev.exp_max


def step_spectral_imex(h, dt, cfg, stab=None):
    """One IMEX step of h_t = -C Delta^2 h + [Delta exp(-Delta h) + C Delta^2 h].

    First order by default; ``cfg.corrector`` adds one corrector pass
    (ETD2RK for ``linear='exponential'``, Crank-Nicolson/Heun for
    ``linear='implicit'``) for second order.  The k = 0 mode is never touched.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    g = h.grid
    try:
        if cfg.nonlinear:
            ev = rhs_direct(h, cfg.dealias)
            emax = ev.exp_max
            c = 1.0
            if stab is not None:
                c = stab
            elif cfg.stabilize:
                c = max(1.0, emax / (2.0 * cfg.safety_factor))
            n0 = ev.rhs.spectral + c * g.k2**2 * h.spectral
        else:
            c = 1.0
            n0 = np.zeros_like(h.spectral)
        z = dt * c * g.k2**2
        hh = h.spectral
        if cfg.linear == "exponential":
            new = np.exp(-z) * hh + dt * _phi1(z) * n0
        else:
            new = (hh + dt * n0) / (1.0 + z)
        if cfg.corrector:
            pred = SpectralField(g, spectral=new)
            n1 = _remainder(pred, c, cfg)[0]
            if cfg.linear == "exponential":
                new = new + dt * _phi2(z) * (n1 - n0)
            else:
                new = ((1.0 - 0.5 * z) * hh + 0.5 * dt * (n0 + n1)) / (1.0 + 0.5 * z)
    except BlowUpSignal as exc:
        return StepResult(h, dt, 0, STATUS_BLOWUP, str(exc))
    if not np.all(np.isfinite(new)):
        return StepResult(h, dt, 0, STATUS_BLOWUP, "non-finite spectral update")
    new[(0,) * g.dim] = hh[(0,) * g.dim]
    return StepResult(SpectralField(g, spectral=new), dt, 0, STATUS_OK, extra={"C": c})


@lru_cache(maxsize=16)
def fd_laplacian(n, length):
    """Second-order 3-point periodic Laplacian as a CSC matrix."""
    dx = length / n
    main = -2.0 * np.ones(n)
    off = np.ones(n - 1)
    lap = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    lap[0, n - 1] = 1.0
    lap[n - 1, 0] = 1.0
    return (lap / dx**2).tocsc()


def _newton_be(h_old, dt, lap, cfg, forcing):
    """Solve g - dt L exp(-L g) - dt f = h_old.  Returns (g, iterations) or (None, it)."""
    n = h_old.size
    eye = sp.identity(n, format="csc")
    g = h_old.copy()
    rhs0 = h_old if forcing is None else h_old + dt * forcing
    for it in range(1, cfg.newton_max_iter + 1):
        u = lap @ g
        if not np.all(np.isfinite(u)) or np.max(-u) > EXP_OVERFLOW_THRESHOLD:
            return None, it
        e = np.exp(-u)
        res = g - dt * (lap @ e) - rhs0
        if np.max(np.abs(res)) < cfg.newton_tol:
            return g, it
        jac = eye + dt * (lap @ sp.diags(e) @ lap)
        g = g - spla.spsolve(jac.tocsc(), res)
    return None, cfg.newton_max_iter


def step_fd_backward_euler(h, dt, cfg, forcing=None):
    """Backward Euler with Newton iteration on the 3-point periodic stencil.

    Solves g - dt L exp(-L g) = h^n (+ dt f) for the new level g, where L is
    :func:`fd_laplacian`.  ``forcing``, if given, maps the trial step size to
    the source samples at the new time level.  On Newton failure dt is halved
    and the step retried, down to ``cfg.dt_min``.
    """
    g = h.grid
    if g.dim != 1:
        raise ValueError("finite-difference scheme is 1D only")
    if dt <= 0:
        raise ValueError("dt must be positive")
    lap = fd_laplacian(g.n, g.length)
    h_old = h.physical
    status = STATUS_OK
    total = 0
    while True:
        f = None if forcing is None else np.asarray(forcing(dt), dtype=float)
        new, iters = _newton_be(h_old, dt, lap, cfg, f)
        total += iters
        if new is not None:
            return StepResult(SpectralField.from_physical(g, new), dt, total, status)
        dt *= 0.5
        status = STATUS_DT_REDUCED
        if dt < cfg.dt_min:
            return StepResult(h, dt, total, STATUS_BLOWUP, "Newton failed with dt below dt_min")


def blowup_reason(state, history=None, dt=None, dt_min=None):
    """Name of the first blow-up criterion met, or None."""
    g = state.grid
    lap = -g.k2 * state.spectral
    lap_phys = np.fft.ifftn(lap).real * g.size
    if not np.all(np.isfinite(lap_phys)):
        return "non-finite state"
    if np.max(-lap_phys) > EXP_OVERFLOW_THRESHOLD:
        return f"sup(-Delta h) > {EXP_OVERFLOW_THRESHOLD}"
    if history is not None and len(history) and "sup_lap" in history:
        w0 = max(history.columns["sup_h"][0], history.columns["sup_lap"][0])
        w = max(np.max(np.abs(state.physical)), np.max(np.abs(lap_phys)))
        if w0 > 0 and w >= GROWTH_FACTOR * w0:
            return "W^{2,inf} growth >= 1e6"
    if dt is not None and dt_min is not None and dt < dt_min:
        return "dt forced below dt_min"
    fit = radius_fit(state)
    if not fit.degenerate and fit.nu < RESOLUTION_FACTOR * g.spacing:
        return f"analyticity radius below {RESOLUTION_FACTOR:g} grid spacings"
    return None


def detect_blowup(state, history=None, dt=None, dt_min=None):
    """True when the state has blown up or lost resolution on its grid."""
    return blowup_reason(state, history, dt, dt_min) is not None


def _step(h, dt, cfg, forcing, t_new):
    if cfg.scheme == "spectral_imex":
        return step_spectral_imex(h, dt, cfg)
    f = None if forcing is None else (lambda dt_try: forcing(h.grid.coords[0], t_new - dt + dt_try))
    return step_fd_backward_euler(h, dt, cfg, f)


def integrate(
    h0,
    t_end,
    cfg,
    monitors=(),
    norms=None,
    snapshot_times=(),
    t0=0.0,
    checkpoint_path=None,
    stream_path=None,
    forcing=None,
    max_steps=10_000_000,
):
    """Advance ``h0`` from ``t0`` to ``t_end`` and return the per-step log.

    ``monitors`` are callables ``m(t, field, log)`` invoked after each accepted
    step.  ``forcing(x, t)`` (1D FD only) adds a source term.  The run stops
    early with ``log.status == 'blow_up_detected'``; ``log.final`` is then the
    last finite state and ``log.meta['blowup_time_lower_bound']`` its time.
    """
    if t_end <= t0:
        raise ValueError("t_end must exceed the start time")
    if forcing is not None and cfg.scheme != "fd_backward_euler":
        raise ValueError("forcing is supported by the finite-difference scheme only")
    norms = norms or NormRequest()
    n2_0 = s_norm(h0, 2.0)
    try:
        sigma = 1.0 - eval_f_s(2.0, n2_0, tol=1e-15)[0]
    except OverflowError:
        sigma = -math.inf
    log = TimeSeriesLog(
        meta={"sigma_2_1": sigma, "h0_norm2": n2_0, "scheme": cfg.scheme, "t0": t0, "t_end": t_end}
    )
    stops = sorted({float(s) for s in snapshot_times if t0 <= s <= t_end})

    state = h0
    t = float(t0)
    dissipation = 0.0
    prev_n6 = s_norm(h0, 6.0)
    writer = None
    stream = None

    def record(field, t, dt, status):
        nonlocal writer
        row = {"t": t, "dt": dt, "status": status}
        row.update(norms.report(field).flat())
        row["dissipation"] = dissipation
        row["lyapunov"] = row["s_norm[2]"] + sigma * dissipation if math.isfinite(sigma) else math.nan
        row["radius"] = radius_fit(field).nu
        log.append(row)
        if stream is not None:
            if writer is None:
                writer = csv.writer(stream)
                writer.writerow(list(log.columns))
            writer.writerow([log.columns[k][-1] if k == "status" else repr(float(log.columns[k][-1])) for k in log.columns])

    if stream_path is not None:
        stream = open(stream_path, "w", newline="")
    try:
        record(state, t, 0.0, STATUS_OK)
        if stops and stops[0] == t:
            log.snapshots.append((t, state))
            stops.pop(0)
        dt = cfg.dt_init
        r_prev = cfg.target_change
        steps = 0
        status = STATUS_OK
        while t < t_end * (1 - 1e-14) and steps < max_steps:
            next_stop = stops[0] if stops else t_end
            dt_try = min(dt, cfg.dt_max)
            # stretch the step onto the stop rather than leave a sliver behind
            hit_stop = dt_try >= (next_stop - t) * (1.0 - 1e-3)
            if hit_stop:
                dt_try = next_stop - t
            res = _step(state, dt_try, cfg, forcing, t + dt_try)
            if res.status == STATUS_BLOWUP:
                status = STATUS_BLOWUP
                log.meta["blowup_reason"] = res.info or "step failure"
                break
            dt_used = res.dt_used
            if dt_used < dt_try:
                hit_stop = False
            new = res.field
            base = s_norm(state, 2.0)
            change = s_norm(new - state, 2.0) / base if base > 0 else 0.0
            if cfg.adapt and change > 2.0 * cfg.target_change:
                dt = dt_used * max(0.2, cfg.safety_factor * cfg.target_change / change)
                if dt < cfg.dt_min:
                    status = STATUS_BLOWUP
                    log.meta["blowup_reason"] = "dt forced below dt_min"
                    break
                continue
            n6 = s_norm(new, 6.0)
            dissipation += 0.5 * dt_used * (n6 + prev_n6)
            prev_n6 = n6
            t = next_stop if hit_stop else t + dt_used
            state = new
            steps += 1
            if hit_stop and stops:
                stops.pop(0)
                log.snapshots.append((t, state))
            reason = blowup_reason(state, log, dt, cfg.dt_min)
            record(state, t, dt_used, res.status if reason is None else STATUS_BLOWUP)
            for m in monitors:
                m(t, state, log)
            if reason is not None:
                status = STATUS_BLOWUP
                log.meta["blowup_reason"] = reason
                break
            if cfg.adapt:
                if change > 0:
                    fac = cfg.safety_factor * (cfg.target_change / change) ** 0.6 * (r_prev / change) ** 0.2
                    r_prev = change
                else:
                    fac = 2.0
                dt = min(cfg.dt_max, dt_used * min(2.0, max(0.2, fac)))
            else:
                dt = cfg.dt_init
    finally:
        if stream is not None:
            stream.close()

    log.status = status
    log.final = state
    if status == STATUS_BLOWUP:
        log.meta["blowup_time_lower_bound"] = t
        if checkpoint_path is not None:
            write_checkpoint(checkpoint_path, state, t, dt, {"status": status, **log.meta})
    return log
