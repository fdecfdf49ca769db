import math

import numpy as np
import pytest

from expgrowth.analysis import TimeSeriesLog
from expgrowth.field import Grid, SpectralField, mean, random_field, s_norm
from expgrowth.output import read_checkpoint
from expgrowth.stepping import (
    STATUS_BLOWUP,
    STATUS_DT_REDUCED,
    STATUS_OK,
    NormRequest,
    SchemeConfig,
    detect_blowup,
    fd_laplacian,
    integrate,
    step_fd_backward_euler,
    step_spectral_imex,
)

SMALL_NORMS = NormRequest(s_values=(2.0, 6.0), besov_s=(), sp_pairs=(), analytic=())


def sine(grid, A, mode=1):
    return SpectralField.from_function(grid, lambda x, *_: A * np.sin(mode * x))


def test_scheme_config_validation():
    with pytest.raises(ValueError):
        SchemeConfig(scheme="rk4")
    with pytest.raises(ValueError):
        SchemeConfig(dt_init=1e-4, dt_min=1e-3)
    with pytest.raises(ValueError):
        SchemeConfig(newton_tol=0)
    with pytest.raises(ValueError):
        SchemeConfig(safety_factor=1.0)
    with pytest.raises(ValueError):
        SchemeConfig(linear="crank")
    with pytest.raises(ValueError):
        SchemeConfig(dt_init=1.0, dt_max=0.5)


def test_norm_request_always_has_lyapunov_pair():
    assert {2.0, 6.0} <= set(NormRequest(s_values=(0.0,)).s_values)


def test_zero_is_fixed_point():
    g = Grid(1, 32)
    z = SpectralField.zeros(g)
    for cfg in (SchemeConfig(), SchemeConfig(corrector=True), SchemeConfig(linear="implicit")):
        res = step_spectral_imex(z, 1e-2, cfg)
        assert res.status == STATUS_OK
        assert np.max(np.abs(res.field.spectral)) == 0.0
    res = step_fd_backward_euler(z, 1e-2, SchemeConfig(scheme="fd_backward_euler"))
    assert res.newton_iters == 1
    assert np.max(np.abs(res.field.physical)) == 0.0


def test_constant_unchanged():
    g = Grid(1, 32)
    c = SpectralField.from_physical(g, np.full(32, 1.7))
    res = step_fd_backward_euler(c, 1e-2, SchemeConfig(scheme="fd_backward_euler"))
    assert np.allclose(res.field.physical, 1.7, atol=1e-14)
    assert np.allclose(step_spectral_imex(c, 1e-2, SchemeConfig()).field.physical, 1.7, atol=1e-14)


def test_implicit_linear_factor():
    g = Grid(1, 32)
    h = random_field(g, np.random.default_rng(0), band=10)
    dt = 3e-3
    cfg = SchemeConfig(nonlinear=False, linear="implicit")
    res = step_spectral_imex(h, dt, cfg)
    assert np.allclose(res.field.spectral, h.spectral / (1 + dt * g.k2**2), rtol=1e-14, atol=1e-18)
    # A-stable per mode for any dt
    for big in (1.0, 1e3):
        out = step_spectral_imex(h, big, cfg).field.spectral
        assert np.all(np.abs(out) <= np.abs(h.spectral) + 1e-18)


def test_exponential_linear_factor():
    g = Grid(2, 16)
    h = random_field(g, np.random.default_rng(1), band=5)
    res = step_spectral_imex(h, 1e-2, SchemeConfig(nonlinear=False))
    assert np.allclose(res.field.spectral, np.exp(-1e-2 * g.k2**2) * h.spectral, rtol=1e-14, atol=1e-18)


def test_implicit_linear_converges_first_order():
    g = Grid(1, 16)
    h = sine(g, 0.1, 2)
    exact = math.exp(-16 * 0.1) * 0.05
    errs = []
    for steps in (100, 200, 400):
        f = h
        for _ in range(steps):
            f = step_spectral_imex(f, 0.1 / steps, SchemeConfig(nonlinear=False, linear="implicit", dt_init=1e-5)).field
        errs.append(abs(abs(f.spectral[2]) - exact))
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(np.abs(rates - 1) < 0.05)


def test_single_step_decreases_norm_and_matches_fd():
    g = Grid(1, 128)
    h = sine(g, 0.1)
    dt = 1e-3
    sp = step_spectral_imex(h, dt, SchemeConfig())
    fd = step_fd_backward_euler(h, dt, SchemeConfig(scheme="fd_backward_euler"))
    assert s_norm(sp.field, 2) < s_norm(h, 2)
    assert s_norm(fd.field, 2) < s_norm(h, 2)
    # O(dt) from the schemes plus O(dx^2) from the stencil, relative to the change
    change = np.max(np.abs(sp.field.physical - h.physical))
    assert np.max(np.abs(sp.field.physical - fd.field.physical)) < 0.05 * change


def test_spectral_mean_exact():
    g = Grid(2, 16)
    h = random_field(g, np.random.default_rng(2), band=6, norm2=0.2) + SpectralField.from_physical(g, np.full(g.shape, 0.3))
    m0 = h.spectral[0, 0]
    for cfg in (SchemeConfig(), SchemeConfig(corrector=True), SchemeConfig(linear="implicit", corrector=True)):
        f = h
        for _ in range(10):
            f = step_spectral_imex(f, 1e-3, cfg).field
        assert f.spectral[0, 0] == m0


def test_fd_laplacian_stencil():
    lap = fd_laplacian(8, 2 * math.pi).toarray()
    dx = 2 * math.pi / 8
    assert np.allclose(lap.sum(axis=1), 0.0)
    assert lap[0, 7] == pytest.approx(1 / dx**2)
    assert lap[3, 3] == pytest.approx(-2 / dx**2)
    x = dx * np.arange(8)
    # sin is an eigenvector with eigenvalue -(2 - 2 cos dx)/dx^2
    assert np.allclose(lap @ np.sin(x), -(2 - 2 * math.cos(dx)) / dx**2 * np.sin(x))


def test_fd_rejects_2d_and_bad_dt():
    with pytest.raises(ValueError):
        step_fd_backward_euler(SpectralField.zeros(Grid(2, 8)), 1e-3, SchemeConfig(scheme="fd_backward_euler"))
    with pytest.raises(ValueError):
        step_fd_backward_euler(SpectralField.zeros(Grid(1, 8)), 0.0, SchemeConfig(scheme="fd_backward_euler"))
    with pytest.raises(ValueError):
        step_spectral_imex(SpectralField.zeros(Grid(1, 8)), -1.0, SchemeConfig())


def test_fd_newton_failure_halves_dt():
    g = Grid(1, 64)
    h = sine(g, 3.0)
    cfg = SchemeConfig(scheme="fd_backward_euler", newton_max_iter=2, dt_min=1e-9, dt_init=1e-3)
    res = step_fd_backward_euler(h, 1e-1, cfg)
    assert res.status in (STATUS_DT_REDUCED, STATUS_BLOWUP)
    assert res.dt_used < 1e-1
    hopeless = SchemeConfig(scheme="fd_backward_euler", newton_max_iter=1, dt_min=1e-2, dt_init=1e-2)
    res = step_fd_backward_euler(h, 5e-2, hopeless)
    assert res.status == STATUS_BLOWUP
    assert res.field is h


def mms_forcing(x, t):
    # h* = e^{-t} sin x solves h_t = Lap exp(-Lap h) + f with this f
    a = math.exp(-t)
    return -a * np.sin(x) - np.exp(a * np.sin(x)) * (a**2 * np.cos(x) ** 2 - a * np.sin(x))


def fd_mms_error(n, dt=1e-5, t_end=0.01):
    g = Grid(1, n)
    h0 = sine(g, 1.0)
    cfg = SchemeConfig(scheme="fd_backward_euler", adapt=False, dt_init=dt, dt_min=dt / 4, newton_tol=1e-12)
    log = integrate(h0, t_end, cfg, norms=SMALL_NORMS, forcing=mms_forcing)
    return np.max(np.abs(log.final.physical - math.exp(-t_end) * np.sin(g.axis)))


def test_fd_manufactured_solution_second_order():
    errs = [fd_mms_error(n) for n in (16, 32, 64)]
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(np.abs(rates - 2.0) < 0.2), rates


def test_forcing_requires_fd():
    with pytest.raises(ValueError):
        integrate(sine(Grid(1, 16), 0.1), 0.1, SchemeConfig(), forcing=mms_forcing)


def test_integrate_zero_field():
    log = integrate(SpectralField.zeros(Grid(1, 32)), 0.5, SchemeConfig())
    assert log.status == STATUS_OK
    assert np.all(log.column("s_norm[2]") == 0.0)
    assert np.all(log.column("sup_lap") == 0.0)
    assert log.t[-1] == 0.5


def test_integrate_validation():
    with pytest.raises(ValueError):
        integrate(SpectralField.zeros(Grid(1, 16)), 0.0, SchemeConfig())


def test_integrate_log_invariants_and_snapshots(tmp_path):
    g = Grid(1, 64)
    stream = tmp_path / "ts.csv"
    stops = [0.01, 0.05, 0.2]
    log = integrate(sine(g, 0.1), 0.2, SchemeConfig(), snapshot_times=stops, stream_path=stream)
    log.validate()
    assert [t for t, _ in log.snapshots] == stops
    assert log.t[-1] == 0.2
    assert np.all(np.diff(log.column("dissipation")) >= 0)
    assert np.all(np.diff(log.column("s_norm[2]")) < 0)
    streamed = TimeSeriesLog.from_csv(stream)
    assert streamed.names == log.names
    assert np.array_equal(streamed.column("s_norm[2]"), log.column("s_norm[2]"))


def test_integrate_restart_continues(tmp_path):
    g = Grid(1, 32)
    cfg = SchemeConfig(adapt=False, dt_init=1e-3)
    full = integrate(sine(g, 0.1), 0.02, cfg, norms=SMALL_NORMS)
    half = integrate(sine(g, 0.1), 0.01, cfg, norms=SMALL_NORMS)
    rest = integrate(half.final, 0.02, cfg, norms=SMALL_NORMS, t0=0.01)
    assert rest.t[0] == 0.01
    assert np.allclose(rest.final.spectral, full.final.spectral, atol=1e-15)


def test_blowup_run_stops_and_checkpoints(tmp_path):
    g = Grid(1, 128)
    ck = tmp_path / "blow.npz"
    log = integrate(sine(g, 3.0), 1.0, SchemeConfig(scheme="fd_backward_euler"), norms=SMALL_NORMS, checkpoint_path=ck)
    assert log.status == STATUS_BLOWUP
    assert log.t[-1] < 1.0
    assert log.meta["blowup_time_lower_bound"] == log.t[-1]
    assert "blowup_reason" in log.meta
    assert np.all(np.isfinite(log.final.physical))
    field, t, dt, meta = read_checkpoint(ck)
    assert t == log.t[-1]
    assert np.array_equal(field.physical, log.final.physical)
    assert meta["status"] == STATUS_BLOWUP


def test_detect_blowup_criteria():
    g = Grid(1, 64)
    assert not detect_blowup(SpectralField.zeros(g))
    assert not detect_blowup(sine(g, 0.1))
    assert detect_blowup(sine(g, 800.0))
    assert detect_blowup(sine(g, 0.1), dt=1e-12, dt_min=1e-10)
    # growth of the W^{2,inf} proxy by 1e6
    hist = TimeSeriesLog()
    hist.append({"t": 0.0, "dt": 0.0, "status": "ok", "sup_h": 1e-6, "sup_lap": 1e-6})
    assert detect_blowup(sine(g, 2.0), hist)
    # one dominant mode over a tail decaying like exp(-nu |k|), nu below two grid spacings
    k = np.abs(np.fft.fftfreq(64, 1 / 64))
    c = 1e-4 * np.exp(-0.05 * k)
    c[0] = 0
    c[[1, -1]] = 1.0
    assert detect_blowup(SpectralField.from_spectral(g, c))


def test_stabilized_and_plain_agree_on_smooth_data():
    g = Grid(1, 64)
    h = sine(g, 0.1)
    a = integrate(h, 0.05, SchemeConfig(stabilize=False), norms=SMALL_NORMS)
    b = integrate(h, 0.05, SchemeConfig(stabilize=True), norms=SMALL_NORMS)
    assert np.allclose(a.final.physical, b.final.physical, atol=1e-14)


def test_imex_temporal_orders():
    g = Grid(1, 32)
    h = sine(g, 0.1)
    t_end = 0.05

    def run(dt, corrector):
        cfg = SchemeConfig(adapt=False, dt_init=dt, dt_min=dt / 4, corrector=corrector)
        return integrate(h, t_end, cfg, norms=SMALL_NORMS).final

    ref = run(1e-5, True)
    for corrector, expected in ((False, 1.0), (True, 2.0)):
        errs = [s_norm(run(dt, corrector) - ref, 0) for dt in (2e-3, 1e-3, 5e-4)]
        rates = np.log2(np.array(errs[:-1]) / errs[1:])
        assert np.all(rates >= expected - 0.1), (corrector, rates)


def test_fd_mean_conservation():
    g = Grid(1, 64)
    h = sine(g, 1.0) + SpectralField.from_physical(g, np.full(64, 0.5))
    log = integrate(h, 0.05, SchemeConfig(scheme="fd_backward_euler"), norms=SMALL_NORMS)
    assert abs(mean(log.final) - mean(h)) <= 1e-8 * 0.05
