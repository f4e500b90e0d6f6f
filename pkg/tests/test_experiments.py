import json
import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from ncdiff.dynamics import Additive, Linear, LinearMult
from ncdiff.experiments import (
    ExclusionBudgetError,
    convergence_study,
    inviscid_gap,
    mc_moments,
    modulus_scaling,
    ou_config,
    ou_exact,
    ou_oracle_check,
    report_csv,
    report_json,
    run_chunks,
    truncation_check,
    write_report,
)
from ncdiff.integrators import Scheme, SimConfig
from ncdiff.spectral import SpectralField
from ncdiff.stochastic import derive_seed

PI2 = math.pi**2


def test_ou_exact_examples():
    m, v = ou_exact(0.0, 1, 1.0, 1.0)
    assert m == 0.0
    assert v == pytest.approx((1 - math.exp(-2 * PI2)) / (2 * PI2), abs=1e-12)
    # the quoted 10-digit value omits the exp(-2 pi^2) ~ 2.7e-9 correction
    assert v == pytest.approx(0.0506605918, abs=1e-9)
    m0, _ = ou_exact(0.0, 1, 0.0, 1.0, c0=1.0)
    m1, _ = ou_exact(0.1, 1, 0.0, 1.0, c0=1.0)
    assert m1 > m0
    # mu at eps = 0.1 from the damped rate pi^2 / (1 + 0.1 pi^2)
    assert -math.log(m1) == pytest.approx(4.967187168, abs=1e-8)


def test_ou_check_standard_case():
    rep = ou_oracle_check(0.0, 1, 1.0, 1.0, 1e-3, 4000, seed=3)
    assert rep.passed
    assert abs(rep.variance - 0.0506605918) <= 3 * rep.se_variance + 0.02 * 0.0506605918


def test_ou_check_deterministic_mean():
    rep = ou_oracle_check(0.0, 1, 0.0, 1.0, 1e-3, 16, c0=1.0)
    assert rep.variance == 0.0
    assert rep.mean == pytest.approx(math.exp(-PI2), rel=10 * PI2 * 1e-3)


def test_ou_eps_slows_decay():
    slow = ou_oracle_check(0.1, 1, 0.0, 0.5, 1e-3, 2, c0=1.0)
    fast = ou_oracle_check(0.0, 1, 0.0, 0.5, 1e-3, 2, c0=1.0)
    assert slow.mean > fast.mean


def test_ou_check_rejects_wrong_mode():
    bad = SimConfig(n_modes=1, T=1.0, save_stride=1000)
    with pytest.raises(ValueError, match="linear mode"):
        ou_oracle_check(0.0, 1, 1.0, 1.0, 1e-3, 10, config=bad)
    bad = ou_config(0.0, 2, 1.0, 1.0, 1e-3).with_(noise=Additive([1.0], 1.0))
    with pytest.raises(ValueError, match="profile"):
        ou_oracle_check(0.0, 2, 1.0, 1.0, 1e-3, 10, config=bad)


def test_run_chunks_order_independent_of_workers():
    a = run_chunks(_indices_squared, 50, workers=1, chunk=7)
    b = run_chunks(_indices_squared, 50, workers=3, chunk=7)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert np.array_equal(np.concatenate(a), np.arange(50) ** 2)


def _indices_squared(idx):
    return idx**2


def small_config(**kw):
    return SimConfig(n_modes=8, T=0.25, **kw)


def test_moments_deterministic_has_zero_errors():
    rep = mc_moments(small_config(noise=Additive([1.0], 0.0)), [0.0, 0.1], [2, 4], 16)
    for by_p in rep.standard_errors.values():
        for errs in by_p.values():
            assert all(e == 0.0 for e in errs)
    assert rep.jensen_ok and rep.excluded == [0, 0]


def test_moments_jensen_and_shape():
    rep = mc_moments(small_config(), [0.0, 0.5], [2, 4], 16)
    for q in ("sup_l2", "sup_energy", "dissipation"):
        for i in range(2):
            assert rep.estimates[q]["p=4"][i] >= rep.estimates[q]["p=2"][i] ** 2
    assert rep.jensen_ok
    assert len(rep.csv_rows()) == 3 * 2 * 2 + 2
    with pytest.raises(ValueError):
        mc_moments(small_config(), [0.0], [2], 8)


def test_exclusion_budget_enforced():
    cfg = SimConfig(n_modes=4, dt=0.05, T=1.0, scheme=Scheme.SemiImplicitEM, noise=LinearMult(40.0), u0=[1.0])
    with pytest.raises(ExclusionBudgetError, match="exclusion budget"):
        mc_moments(cfg, [0.0], [2], 16)


def test_inviscid_gap_examples():
    cfg = small_config()
    assert inviscid_gap(cfg, 0.0, 5) == 0.0
    quiet = SimConfig(n_modes=4, T=0.5, mode=Linear(), noise=Additive([1.0], 0.0), u0=SpectralField.basis(1, 4))
    gaps = [inviscid_gap(quiet, e, 0) for e in (0.2, 0.1, 0.05)]
    assert gaps[0] > gaps[1] > gaps[2] > 0


def test_inviscid_gap_linear_closed_form():
    # mode 1 only: u^eps(t) = exp(-t mu_eps), z(t) = exp(-t pi^2); gap in H1 norm
    cfg = SimConfig(n_modes=1, dt=1e-4, T=0.5, mode=Linear(), noise=Additive([1.0], 0.0), u0=[1.0])
    mu = PI2 / (1 + 0.1 * PI2)
    t = np.linspace(0, 0.5, 200_001)
    diff2 = (np.exp(-mu * t) - np.exp(-PI2 * t)) ** 2 * (1 + PI2)
    exact = math.sqrt(trapezoid(diff2, t))
    assert inviscid_gap(cfg, 0.1, 0) == pytest.approx(exact, rel=0.01)


def test_inviscid_gap_decreases_per_seed():
    cfg = SimConfig(n_modes=16)
    wins = sum(inviscid_gap(cfg, 0.1, derive_seed(1, i)) < inviscid_gap(cfg, 0.2, derive_seed(1, i)) for i in range(64))
    assert wins >= 0.9 * 64


def test_convergence_degenerate_grid():
    rep = convergence_study(small_config(), [0.2], samples=64)
    assert len(rep.csv_rows()) == 1
    assert set(rep.checks) == {"final_exceedance_below_threshold"}


def test_convergence_deterministic_exceedance_is_zero_or_one():
    rep = convergence_study(small_config(noise=Additive([1.0], 0.0)), [0.2, 0.1], samples=64)
    assert all(x in (0.0, 1.0) for x in rep.exceedance)
    assert len(set(rep.path_checksums)) == 64


def test_convergence_validates_grid():
    with pytest.raises(ValueError):
        convergence_study(small_config(), [0.1, 0.2], samples=64)
    with pytest.raises(ValueError):
        convergence_study(small_config(), [0.2, 0.1], samples=10)


def test_modulus_scaling_validates():
    with pytest.raises(ValueError):
        modulus_scaling(small_config(), [0.02, 0.04], "L2", 32)
    with pytest.raises(ValueError):
        modulus_scaling(small_config(), [0.02, 0.04, 0.08], "L2", 8)


def test_report_serialization_is_worker_independent(tmp_path):
    cfg = small_config()
    a = convergence_study(cfg, [0.2, 0.1], samples=64, workers=1)
    b = convergence_study(cfg, [0.2, 0.1], samples=64, workers=4)
    assert report_json(a) == report_json(b)
    assert report_csv(a) == report_csv(b)
    d = json.loads(report_json(a))
    assert set(d) == {"quantity", "parameters", "value", "series"}
    j, c = write_report(a, tmp_path, "converge", cfg)
    assert j.name == f"converge_{cfg.config_hash()}_seed0.json" and c.suffix == ".csv"


def test_truncation_check_identical():
    out = truncation_check(small_config(), samples=16)
    assert out["identical"] and out["R"] > 0


def test_modulus_slope_noise_driven_regime():
    # started at rest so the smooth deterministic transient does not add a delta^2 component
    cfg = SimConfig(eps=0.1, u0=np.zeros(32))
    for space in ("Hneg1", "L2"):
        rep = modulus_scaling(cfg, [0.02, 0.04, 0.08, 0.16], space, 32)
        assert 0.8 <= rep.slope <= 1.2
        assert len(rep.sup_of_mean) == 4 and rep.sup_of_mean_slope > 0
