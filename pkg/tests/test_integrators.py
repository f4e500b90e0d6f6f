import math

import numpy as np
import pytest

from ncdiff.analysis import energy_arrays
from ncdiff.dynamics import Additive, Cubic, GalerkinState, Linear, LinearMult, drift
from ncdiff.integrators import (
    BlowUpError,
    Scheme,
    SimConfig,
    Trajectory,
    simulate,
    simulate_batch,
    step,
    strong_order,
)
from ncdiff.spectral import SpectralField, eigenvalue
from ncdiff.stochastic import BrownianPath, sample_path

PI2 = math.pi**2


def quiet(**kw):
    return SimConfig(noise=Additive([1.0], 0.0), **kw)


def e1(n, scale=1.0):
    return SpectralField.basis(1, n, scale)


def test_semi_implicit_backward_euler_step():
    s = step(GalerkinState(e1(3).coeffs, 0.0, 0.0), 0.0, 0.1, Scheme.SemiImplicitEM, Linear(), Additive([1.0], 0.0))
    assert s.c[0] == pytest.approx(1 / (1 + 0.1 * PI2), abs=1e-12)
    assert s.t == pytest.approx(0.1)


def test_tamed_step_from_rest_is_pure_noise():
    eps = 0.2
    s = step(GalerkinState(np.zeros(3), 0.0, eps), 0.05, 0.01, Scheme.TamedEM, Linear(), Additive([1.0], 1.0))
    assert s.c[0] == pytest.approx(0.05 / (1 + eps * PI2), abs=1e-14)
    assert np.array_equal(s.c[1:], [0.0, 0.0])


@pytest.mark.parametrize("scheme", list(Scheme))
def test_step_consistent_with_drift(scheme):
    c = np.array([0.6, -0.2, 0.1])
    state = GalerkinState(c, 0.0, 0.1)
    a = drift(state, Cubic())
    defects = []
    for dt in (1e-3, 5e-4):
        s = step(state, 0.0, dt, scheme, Cubic(), Additive([1.0], 0.0))
        defects.append(np.max(np.abs((s.c - c) / dt - a)))
    assert defects[1] < 0.6 * defects[0]
    assert defects[0] < 1e-3 * np.max(np.abs(a)) * 100


def test_step_blowup_is_diagnosed():
    state = GalerkinState(np.array([1e120]), 0.3, 0.0)
    with pytest.raises(BlowUpError, match="t=0.31"):
        step(state, 0.0, 0.01, Scheme.SemiImplicitEM, Cubic(), Additive([1.0], 0.0))


def test_simulate_linear_decay_converges_at_first_order():
    defects = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        cfg = quiet(eps=0.0, n_modes=2, dt=dt, T=0.5, mode=Linear(), u0=e1(2))
        path = BrownianPath(dt, np.zeros(cfg.n_steps), 0)
        tr = simulate(cfg, path)
        defects.append(abs(tr.coeffs[-1, 0] - math.exp(-PI2 * 0.5)))
    assert defects[0] / defects[1] == pytest.approx(2, rel=0.1)
    assert defects[1] / defects[2] == pytest.approx(2, rel=0.1)


def test_zero_horizon_gives_initial_state():
    cfg = SimConfig(T=0.0)
    tr = simulate(cfg, BrownianPath(cfg.dt, [], 0))
    assert len(tr) == 1 and np.array_equal(tr.coeffs[0], cfg.u0.coeffs)


def test_simulate_is_deterministic():
    cfg = SimConfig(n_modes=8, T=0.2, save_stride=10)
    path = sample_path(0.2, 1e-3, 8)
    a, b = simulate(cfg, path), simulate(cfg, path)
    assert np.array_equal(a.coeffs, b.coeffs) and np.array_equal(a.times, b.times)
    assert a.times[0] == 0.0 and np.array_equal(a.coeffs[0], cfg.u0.coeffs)
    assert np.allclose(np.diff(a.times), 10 * cfg.dt)
    assert len(a) == 21


def test_simulate_rejects_mismatched_path():
    with pytest.raises(ValueError):
        simulate(SimConfig(T=0.1), sample_path(0.1, 5e-4, 0))


def test_config_validation():
    with pytest.raises(ValueError, match="1/2"):
        SimConfig(eps=0.9)
    with pytest.raises(ValueError):
        SimConfig(T=1.0, dt=0.3)
    cfg = SimConfig(n_modes=4, u0=[0.1, 0.2])
    assert cfg.u0.n_modes == 4
    assert cfg.u0.coeffs[0] == 0.1
    assert SimConfig().u0.coeffs[0] == pytest.approx(1 / math.sqrt(2))


def test_default_config_hash_is_stable():
    assert SimConfig().config_hash() == SimConfig().config_hash()
    assert SimConfig().config_hash() != SimConfig(seed=1).config_hash()


@pytest.mark.parametrize("eps", [0.0, 0.1, 0.25, 0.5])
def test_discrete_energy_growth_bound(eps):
    cfg = quiet(eps=eps, dt=1e-3, T=1.0)
    tr = simulate(cfg, BrownianPath(cfg.dt, np.zeros(cfg.n_steps), 0))
    E = energy_arrays(tr.coeffs, eps)
    l2sq = np.sum(tr.coeffs**2, axis=-1)
    assert np.all(np.diff(E) <= 2 * l2sq[:-1] * cfg.dt)


def test_eps_zero_helmholtz_is_identity():
    path = sample_path(0.1, 1e-3, 3)
    a = simulate(SimConfig(eps=0.0, T=0.1), path)
    b = simulate(SimConfig(eps=0.0, T=0.1, scheme=Scheme.TamedEM), path)
    assert np.all(np.isfinite(a.coeffs)) and np.all(np.isfinite(b.coeffs))


def test_continuity_in_initial_data():
    path = sample_path(1.0, 1e-3, 21)
    cfg = SimConfig(n_modes=16)
    base = simulate(cfg, path).coeffs[-1]
    gaps = []
    deltas = [1e-2, 1e-3, 1e-4]
    for d in deltas:
        u0 = cfg.u0.coeffs + d * np.linspace(1, 0.1, 16) / np.linalg.norm(np.linspace(1, 0.1, 16))
        gaps.append(np.linalg.norm(simulate(cfg.with_(u0=u0), path).coeffs[-1] - base))
    slope = np.polyfit(np.log(deltas), np.log(gaps), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.1)


def test_batch_isolates_blown_samples():
    cfg = SimConfig(n_modes=4, dt=0.05, T=0.5, scheme=Scheme.SemiImplicitEM, noise=LinearMult(1.0), u0=[1.0])
    inc = np.zeros((2, cfg.n_steps))
    inc[1, 0] = 1e60
    res = simulate_batch(cfg, inc)
    assert res.blown.tolist() == [False, True]
    assert np.all(np.isfinite(res.coeffs[0]))
    assert res.blowup_times[1] == pytest.approx(0.1)
    with pytest.raises(BlowUpError):
        simulate(cfg, BrownianPath(cfg.dt, inc[1], 0))


def test_trajectory_persistence(tmp_path):
    cfg = SimConfig(n_modes=5, T=0.05)
    tr = simulate(cfg, sample_path(0.05, 1e-3, 2))
    tr.save(tmp_path / "t.csv")
    back = Trajectory.load(tmp_path / "t.csv")
    assert np.array_equal(back.coeffs, tr.coeffs) and np.array_equal(back.times, tr.times)
    tr.save(tmp_path / "t.bin", fmt="bin")
    raw = (tmp_path / "t.bin").read_bytes()
    assert raw[:8] == b"NCDTRAJ\x00" and raw[8] == 1
    back = Trajectory.load(tmp_path / "t.bin")
    assert np.array_equal(back.coeffs, tr.coeffs)
    header = (tmp_path / "t.csv").read_text().splitlines()[0]
    assert header == "t,c_1,c_2,c_3,c_4,c_5"


def test_strong_order_requires_three_levels():
    with pytest.raises(ValueError):
        strong_order(SimConfig(), 2, 4)


def test_strong_order_deterministic():
    cfg = quiet(n_modes=16, dt=2**-6)
    res = strong_order(cfg, 3, 2)
    assert res.order == pytest.approx(1.0, abs=0.1)
    assert res.excluded == 0
