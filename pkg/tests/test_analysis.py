import math

import numpy as np
import pytest

from ncdiff.analysis import (
    bochner_norm,
    energy_ledger,
    energy_residual,
    modulus_report,
    shift_modulus,
    sup_energy,
)
from ncdiff.dynamics import Additive, Linear
from ncdiff.integrators import SimConfig, Trajectory, simulate
from ncdiff.spectral import eigenvalue
from ncdiff.stochastic import BrownianPath, derive_seed, sample_path


def traj_from(fn, N=1000, n=3, T=1.0):
    t = np.linspace(0.0, T, N + 1)
    c = np.zeros((N + 1, n))
    c[:, 0] = fn(t)
    return Trajectory(t, c, SimConfig(n_modes=n, dt=T / N, T=T))


def test_bochner_examples():
    assert bochner_norm(traj_from(np.ones_like), "L2") == pytest.approx(1.0, abs=1e-14)
    assert bochner_norm(traj_from(np.zeros_like), "H1") == 0.0
    assert bochner_norm(traj_from(lambda t: t), "L2") == pytest.approx(0.5773502692, abs=1e-6)


def test_bochner_dominance():
    tr = simulate(SimConfig(n_modes=8, T=0.2), sample_path(0.2, 1e-3, 4))
    assert bochner_norm(tr, "Hneg1") <= bochner_norm(tr, "L2") / math.sqrt(eigenvalue(1)) + 1e-15


def test_sup_energy_examples():
    tr = traj_from(np.ones_like, N=10)
    assert sup_energy(tr, 2, 0.0) == pytest.approx(1.0)
    assert sup_energy(tr, 2, 0.5) == pytest.approx(5.9348022005, abs=1e-9)
    assert sup_energy(tr, 4, 0.5) == pytest.approx(sup_energy(tr, 2, 0.5) ** 2)
    with pytest.raises(ValueError):
        sup_energy(tr, 0.5, 0.0)


def test_shift_modulus_constant_interior_is_zero():
    assert shift_modulus(traj_from(np.ones_like), 0.1, "L2", extend="interior") == 0.0


@pytest.mark.parametrize("theta", [0.05, 0.1, 0.2])
def test_shift_modulus_linear_ramp(theta):
    tr = traj_from(lambda t: t)
    assert shift_modulus(tr, theta, "L2", extend="interior") == pytest.approx(theta**2 * (1 - theta), rel=1e-9)


def test_shift_modulus_monotone_and_domain():
    tr = simulate(SimConfig(n_modes=8), sample_path(1.0, 1e-3, 17))
    rep = modulus_report(tr, [0.01, 0.02, 0.05, 0.1, 0.3], "Hneg1")
    assert all(b >= a for a, b in zip(rep.values, rep.values[1:]))
    with pytest.raises(ValueError):
        shift_modulus(tr, 1e-4, "L2")
    with pytest.raises(ValueError):
        shift_modulus(tr, 1.5, "L2")


def deterministic_residual(dt, eps=0.1):
    cfg = SimConfig(eps=eps, n_modes=8, dt=dt, T=0.5, mode=Linear(), noise=Additive([1.0], 0.0))
    path = BrownianPath(dt, np.zeros(cfg.n_steps), 0)
    return energy_residual(simulate(cfg, path), path, cfg)


def test_energy_residual_deterministic_second_order():
    r = [deterministic_residual(dt) for dt in (2e-3, 1e-3, 5e-4)]
    assert 3.5 <= r[0] / r[1] <= 4.5
    assert 3.5 <= r[1] / r[2] <= 4.5


def test_energy_residual_zero_data_is_zero():
    cfg = SimConfig(n_modes=4, T=0.1, u0=np.zeros(4), noise=Additive([1.0], 0.0))
    path = sample_path(0.1, 1e-3, 1)
    worst, series = energy_residual(simulate(cfg, path), path, cfg, full=True)
    assert worst == 0.0 and series.shape == (100,)


def test_energy_residual_additive_cumulative_shrinks():
    def cumulative_rms(dt):
        cfg = SimConfig(n_modes=8, dt=dt, T=0.2)
        totals = []
        for i in range(40):
            path = sample_path(cfg.T, dt, derive_seed(3, i))
            totals.append(energy_ledger(simulate(cfg, path), path, cfg).residuals().sum())
        return math.sqrt(np.mean(np.square(totals)))

    assert cumulative_rms(4e-3) > 1.3 * cumulative_rms(1e-3)


def test_energy_residual_needs_every_step():
    cfg = SimConfig(n_modes=4, T=0.1, save_stride=10)
    path = sample_path(0.1, 1e-3, 1)
    with pytest.raises(ValueError, match="save_stride"):
        energy_residual(simulate(cfg, path), path, cfg)
