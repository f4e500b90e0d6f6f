"""Monte Carlo harnesses: moment bounds, modulus scaling, OU validation, inviscid limit.

Samples are processed in chunks of fixed size.  A chunk is the unit of work
handed to a worker, and its composition never depends on the worker count,
so every report is bit-identical for any ``workers`` value.  Sample ``i``
always draws its Brownian path from ``derive_seed(config.seed, i, stream)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from .analysis import (
    ModulusReport,
    bochner_norm_arrays,
    energy_arrays,
    energy_ledger_arrays,
    loglog_slope,
    modulus_arrays,
    shift_integrals,
    trapezoid_weights,
    _shift_count,
)
from .dynamics import Additive, Cubic, Linear, Truncated
from .integrators import BlowUpError, SimConfig, simulate, simulate_batch, strong_order
from .spectral import SobolevSpace, SpectralField, eigenvalue, norm
from .stochastic import derive_seed, refine, sample_path

EXCLUSION_BUDGET = 0.05
DEFAULT_CHUNK = 16


class ExclusionBudgetError(RuntimeError):
    """Too many Monte Carlo samples blew up."""

    def __init__(self, excluded: int, samples: int, first_time: float | None = None):
        self.excluded = excluded
        self.samples = samples
        self.first_time = first_time
        when = "" if first_time is None else f", first blow-up at t={first_time:.6g}"
        super().__init__(
            f"{excluded} of {samples} samples blew up, over the {EXCLUSION_BUDGET:.0%} exclusion budget{when}"
        )


# ---------------------------------------------------------------- plumbing


def sample_increments(config: SimConfig, indices, stream: int = 0):
    """Stacked increments and path checksums for the given sample indices."""
    paths = [sample_path(config.T, config.dt, derive_seed(config.seed, int(i), stream)) for i in indices]
    return np.stack([p.increments for p in paths]), [p.checksum() for p in paths]


def run_chunks(func, samples: int, workers: int = 1, chunk: int = DEFAULT_CHUNK, **kwargs) -> list:
    """Apply ``func(indices, **kwargs)`` to consecutive chunks of sample indices.

    Results come back in chunk order whatever the worker count.
    """
    bounds = [(a, min(a + chunk, samples)) for a in range(0, samples, chunk)]
    tasks = [np.arange(a, b) for a, b in bounds]
    job = partial(func, **kwargs)
    if workers <= 1 or len(tasks) == 1:
        return [job(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, tasks))


def _check_budget(blown: np.ndarray, blowup_times=None):
    excluded = int(np.sum(blown))
    if excluded > EXCLUSION_BUDGET * blown.size:
        first = None
        if blowup_times is not None and excluded:
            first = float(np.nanmin(blowup_times))
        raise ExclusionBudgetError(excluded, blown.size, first)
    return excluded


def _mean_se(x: np.ndarray):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), float("nan")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _clean(obj):
    """Make a report JSON-safe: NaN/inf become None, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def report_json(report) -> str:
    return json.dumps(_clean(report.to_dict()), sort_keys=True, indent=2) + "\n"


def report_csv(report) -> str:
    rows = report.csv_rows()
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in _clean(row).items()})
    return buf.getvalue()


def write_report(report, outdir, name: str, config: SimConfig) -> tuple[Path, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = f"{name}_{config.config_hash()}_seed{config.seed}"
    jpath, cpath = outdir / f"{stem}.json", outdir / f"{stem}.csv"
    jpath.write_text(report_json(report))
    cpath.write_text(report_csv(report))
    return jpath, cpath


def _provenance(config: SimConfig) -> dict:
    return {"master_seed": config.seed, "config_hash": config.config_hash(), "config": config.to_dict()}


# ---------------------------------------------------------------- moments


MOMENT_QUANTITIES = ("sup_l2", "sup_energy", "dissipation")


def _moments_chunk(indices, config, eps_grid):
    inc, _ = sample_increments(config, indices)
    out = {}
    for eps in eps_grid:
        cfg = config.with_(eps=eps)
        res = simulate_batch(cfg, inc)
        c = res.coeffs
        w_times = res.times
        w = trapezoid_weights(w_times)
        with np.errstate(over="ignore", invalid="ignore"):
            l2sq = np.sum(c**2, axis=-1)
            h1s = np.asarray(norm(c, SobolevSpace.H1semi)) ** 2
            l4 = np.asarray(norm(c, SobolevSpace.L4)) ** 4
            h2 = np.asarray(norm(c, SobolevSpace.H2)) ** 2
            out[eps] = {
                "sup_l2": np.max(l2sq, axis=-1),
                "sup_energy": np.max(energy_arrays(c, eps), axis=-1),
                "dissipation": (h1s + l4) @ w,
                "h2_integral": h2 @ w,
                "blowup_times": res.blowup_times,
            }
    return out


@dataclass
class MomentReport:
    """Monte Carlo moments per eps.

    ``estimates[q][p]`` lists ``E[X_q^(p/2)]`` over the eps grid, where
    ``X_sup_l2 = sup_t ||u||^2``, ``X_sup_energy = sup_t (||u||^2 + eps ||u_x||^2)``
    and ``X_dissipation = int_0^T (||u_x||^2 + ||u||_L4^4) dt``.  The
    ``h2_integral`` entry is ``E int_0^T ||u_xx||^2 dt`` (no power).
    """

    eps_grid: list
    p_list: list
    estimates: dict
    standard_errors: dict
    samples: int
    excluded: list
    uniformity: dict
    upward_trend: dict
    jensen_ok: bool
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "quantity": "moments",
            "parameters": {"eps_grid": self.eps_grid, "p": self.p_list, "samples": self.samples, **self.provenance},
            "value": self.uniformity,
            "series": {
                "estimates": self.estimates,
                "standard_errors": self.standard_errors,
                "excluded": self.excluded,
                "upward_trend": self.upward_trend,
                "jensen_ok": self.jensen_ok,
            },
        }

    def csv_rows(self):
        rows = []
        for q, by_p in self.estimates.items():
            for p, vals in by_p.items():
                for i, eps in enumerate(self.eps_grid):
                    rows.append(
                        {
                            "quantity": q,
                            "p": p,
                            "eps": eps,
                            "estimate": vals[i],
                            "standard_error": self.standard_errors[q][p][i],
                            "samples": self.samples - self.excluded[i],
                        }
                    )
        return rows

    @property
    def checks(self) -> dict:
        return {"jensen": self.jensen_ok, "no_upward_trend": not any(self.upward_trend.values())}


def _upward_trend(eps_grid, est, se) -> bool:
    """True when the estimate rises by more than 2 SE at every step of decreasing eps."""
    order = np.argsort(eps_grid)[::-1]
    e = np.asarray(est)[order]
    s = np.nan_to_num(np.asarray(se, dtype=float)[order])
    if e.size < 2:
        return False
    return bool(np.all(np.diff(e) > 2 * np.hypot(s[1:], s[:-1])))


def mc_moments(config: SimConfig, eps_grid, p_list, samples: int, workers: int = 1) -> MomentReport:
    if samples < 16:
        raise ValueError("mc_moments needs at least 16 samples")
    if any(p < 1 for p in p_list):
        raise ValueError("moment orders p must be >= 1")
    eps_grid = [float(e) for e in eps_grid]
    chunks = run_chunks(_moments_chunk, samples, workers, config=config, eps_grid=eps_grid)
    merged = {eps: {k: np.concatenate([ch[eps][k] for ch in chunks]) for k in chunks[0][eps]} for eps in eps_grid}
    estimates = {q: {} for q in (*MOMENT_QUANTITIES, "h2_integral")}
    errors = {q: {} for q in estimates}
    excluded = []
    jensen_ok = True
    keeps = {}
    for eps in eps_grid:
        blown = np.isfinite(merged[eps]["blowup_times"])
        excluded.append(_check_budget(blown, merged[eps]["blowup_times"]))
        keeps[eps] = ~blown
    for q in MOMENT_QUANTITIES:
        for p in p_list:
            key = f"p={p:g}"
            stats = [_mean_se(merged[eps][q][keeps[eps]] ** (p / 2)) for eps in eps_grid]
            estimates[q][key] = [m for m, _ in stats]
            errors[q][key] = [s for _, s in stats]
        for eps in eps_grid:
            x = merged[eps][q][keeps[eps]]
            jensen_ok &= bool(np.mean(x**2) >= np.mean(x) ** 2)
    stats = [_mean_se(merged[eps]["h2_integral"][keeps[eps]]) for eps in eps_grid]
    estimates["h2_integral"]["p=2"] = [m for m, _ in stats]
    errors["h2_integral"]["p=2"] = [s for _, s in stats]
    uniformity, trend = {}, {}
    for q, by_p in estimates.items():
        for key, vals in by_p.items():
            name = f"{q}[{key}]"
            lo, hi = min(vals), max(vals)
            uniformity[name] = hi / lo if lo > 0 else (1.0 if hi == 0 else float("inf"))
            trend[name] = _upward_trend(eps_grid, vals, errors[q][key])
    return MomentReport(
        eps_grid, list(p_list), estimates, errors, samples, excluded, uniformity, trend, jensen_ok, _provenance(config)
    )


# ---------------------------------------------------------------- OU oracle


@dataclass
class OUCheck:
    eps: float
    k: int
    gamma: float
    T: float
    dt: float
    samples: int
    c0: float
    mean: float
    variance: float
    exact_mean: float
    exact_variance: float
    se_mean: float
    se_variance: float
    max_rel_deviation: float
    bias_allowance: float = 0.02
    provenance: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok_mean = abs(self.mean - self.exact_mean) <= 3 * self.se_mean + self.bias_allowance * abs(self.exact_mean)
        ok_var = abs(self.variance - self.exact_variance) <= (
            3 * self.se_variance + self.bias_allowance * self.exact_variance
        )
        return ok_mean and ok_var

    @property
    def checks(self) -> dict:
        return {"within_tolerance": self.passed}

    def to_dict(self):
        d = asdict(self)
        prov = d.pop("provenance")
        return {
            "quantity": "ou_oracle",
            "parameters": {k: d[k] for k in ("eps", "k", "gamma", "T", "dt", "samples", "c0")} | prov,
            "value": self.max_rel_deviation,
            "series": {k: d[k] for k in d if k not in ("eps", "k", "gamma", "T", "dt", "samples", "c0")}
            | {"passed": self.passed},
        }

    def csv_rows(self):
        return [
            {"statistic": "mean", "estimate": self.mean, "exact": self.exact_mean, "standard_error": self.se_mean},
            {
                "statistic": "variance",
                "estimate": self.variance,
                "exact": self.exact_variance,
                "standard_error": self.se_variance,
            },
        ]


def ou_exact(eps: float, k: int, gamma: float, T: float, c0: float = 0.0):
    """Closed-form mean and variance of mode ``k`` at time ``T``."""
    lam = eigenvalue(k)
    mu = lam / (1 + eps * lam)
    sigma = gamma / (1 + eps * lam)
    return c0 * math.exp(-mu * T), sigma**2 * (1 - math.exp(-2 * mu * T)) / (2 * mu)


def ou_config(eps, k, gamma, T, dt, c0=0.0, seed=0) -> SimConfig:
    profile = np.zeros(k)
    profile[k - 1] = 1.0
    return SimConfig(
        eps=eps,
        n_modes=k,
        dt=dt,
        T=T,
        mode=Linear(),
        noise=Additive(profile, gamma),
        u0=SpectralField.basis(k, k, c0),
        save_stride=max(int(round(T / dt)), 1),
        seed=seed,
    )


def _endpoint_chunk(indices, config, k):
    inc, _ = sample_increments(config, indices)
    res = simulate_batch(config, inc)
    return res.coeffs[:, -1, k - 1]


def ou_oracle_check(
    eps, k, gamma, T, dt, samples, c0: float = 0.0, seed: int = 0, workers: int = 1, config: SimConfig | None = None
) -> OUCheck:
    """Compare Monte Carlo mean and variance of mode ``k`` with the OU closed form.

    With the linear mode, zero forcing and additive noise on ``e_k`` alone,
    mode ``k`` solves ``dc = -mu c dt + sigma dB`` with
    ``mu = lam_k / (1 + eps lam_k)`` and ``sigma = gamma / (1 + eps lam_k)``.
    """
    if config is None:
        config = ou_config(eps, k, gamma, T, dt, c0, seed)
    else:
        if not isinstance(config.mode, Linear) or config.mode.forcing is not None:
            raise ValueError("the OU check needs the linear mode with zero forcing")
        prof = config.noise.profile if isinstance(config.noise, Additive) else None
        expected = np.zeros(config.n_modes)
        expected[k - 1] = 1.0
        if prof is None or not np.array_equal(np.pad(prof, (0, config.n_modes - prof.size)), expected):
            raise ValueError(f"the OU check needs additive noise with profile e_{k}")
    if samples < 2:
        raise ValueError("need at least two samples")
    ends = np.concatenate(run_chunks(_endpoint_chunk, samples, workers, chunk=1024, config=config, k=k))
    m, v = float(ends.mean()), float(ends.var(ddof=1))
    em, ev = ou_exact(eps, k, gamma, T, c0)
    se_m = math.sqrt(v / samples)
    se_v = v * math.sqrt(2.0 / (samples - 1))
    dev_m = abs(m - em) / abs(em) if em else abs(m - em) / math.sqrt(ev) if ev else abs(m - em)
    dev_v = abs(v - ev) / ev if ev else v
    return OUCheck(eps, k, gamma, T, dt, samples, c0, m, v, em, ev, se_m, se_v, max(dev_m, dev_v),
                   provenance=_provenance(config))


# ---------------------------------------------------------------- modulus


def _modulus_chunk(indices, config, deltas, space, extend):
    inc, _ = sample_increments(config, indices)
    res = simulate_batch(config, inc)
    mod = modulus_arrays(res.times, res.coeffs, deltas, space, extend)
    m_max = max(_shift_count(res.times, d) for d in deltas)
    ints = shift_integrals(res.times, res.coeffs, m_max, space, extend)
    return mod, ints, res.blowup_times


def modulus_scaling(
    config: SimConfig, deltas, space, samples: int, workers: int = 1, extend: str = "zero"
) -> ModulusReport:
    """Monte Carlo mean of the time-shift modulus and its log-log slope in delta.

    The primary series is ``E sup_theta`` (supremum inside the expectation);
    ``sup_of_mean`` holds ``sup_theta E`` for comparison.
    """
    deltas = [float(d) for d in deltas]
    if len(deltas) < 3 or not all(0 < d <= 1 for d in deltas):
        raise ValueError("delta grid needs at least 3 points in (0, 1]")
    if samples < 32:
        raise ValueError("modulus_scaling needs at least 32 samples")
    space = SobolevSpace(space)
    chunks = run_chunks(_modulus_chunk, samples, workers, config=config, deltas=deltas, space=space, extend=extend)
    mod = np.concatenate([c[0] for c in chunks])
    ints = np.concatenate([c[1] for c in chunks])
    tb = np.concatenate([c[2] for c in chunks])
    blown = np.isfinite(tb)
    _check_budget(blown, tb)
    mod, ints = mod[~blown], ints[~blown]
    means = mod.mean(axis=0)
    ses = mod.std(axis=0, ddof=1) / math.sqrt(mod.shape[0])
    h = config.dt * config.save_stride
    running = np.maximum.accumulate(ints.mean(axis=0))
    som = [float(running[int(np.floor(d / h + 1e-9)) - 1]) for d in deltas]
    slope = loglog_slope(deltas, means) if np.all(means > 0) else float("nan")
    som_slope = loglog_slope(deltas, som) if all(v > 0 for v in som) else float("nan")
    return ModulusReport(
        deltas, means.tolist(), space.value, slope, "E sup", int(mod.shape[0]), ses.tolist(), som, som_slope,
        _provenance(config),
    )


# ---------------------------------------------------------------- inviscid limit


def inviscid_gap(config: SimConfig, eps: float, seed: int, space=SobolevSpace.H1) -> float:
    """``||u^eps - z||_{L2(0,T;H1)}`` with ``z`` the eps = 0 solution on the same path."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    path = sample_path(config.T, config.dt, seed)
    u = simulate(config.with_(eps=eps), path)
    z = simulate(config.with_(eps=0.0), path)
    return float(bochner_norm_arrays(u.times, u.coeffs - z.coeffs, space))


def _gap_chunk(indices, config, eps_grid, space):
    inc, sums = sample_increments(config, indices)
    z = simulate_batch(config.with_(eps=0.0), inc)
    gaps, blown = [], z.blown.copy()
    for eps in eps_grid:
        u = simulate_batch(config.with_(eps=eps), inc)
        blown |= u.blown
        with np.errstate(invalid="ignore"):
            gaps.append(bochner_norm_arrays(u.times, u.coeffs - z.coeffs, space))
    return np.stack(gaps, axis=1), blown, sums


@dataclass
class ConvergenceReport:
    eps_grid: list
    medians: list
    means: list
    exceedance: list
    delta: float
    samples: int
    excluded: int
    pairwise_decrease: list
    space: str
    threshold: float
    path_checksums: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def checks(self) -> dict:
        out = {"final_exceedance_below_threshold": self.exceedance[-1] <= self.threshold}
        if len(self.eps_grid) > 1:
            out["exceedance_nonincreasing"] = all(b <= a for a, b in zip(self.exceedance, self.exceedance[1:]))
            out["median_strictly_decreasing"] = all(b < a for a, b in zip(self.medians, self.medians[1:]))
            out["pairwise_decrease_at_least_90pct"] = all(f >= 0.9 for f in self.pairwise_decrease)
        return out

    def to_dict(self):
        return {
            "quantity": "inviscid_gap",
            "parameters": {
                "eps_grid": self.eps_grid,
                "delta": self.delta,
                "samples": self.samples,
                "space": self.space,
                "threshold": self.threshold,
                **self.provenance,
            },
            "value": self.exceedance[-1],
            "series": {
                "median": self.medians,
                "mean": self.means,
                "exceedance": self.exceedance,
                "pairwise_decrease": self.pairwise_decrease,
                "excluded": self.excluded,
                "path_checksums": self.path_checksums,
                "checks": self.checks,
            },
        }

    def csv_rows(self):
        return [
            {"eps": e, "median_gap": m, "mean_gap": a, "exceedance": x, "samples": self.samples - self.excluded}
            for e, m, a, x in zip(self.eps_grid, self.medians, self.means, self.exceedance)
        ]


def convergence_study(
    config: SimConfig,
    eps_grid,
    delta: float | None = None,
    samples: int = 64,
    threshold: float = 0.05,
    space=SobolevSpace.H1,
    workers: int = 1,
) -> ConvergenceReport:
    """Gap statistics ``||u^eps - z||`` over shared paths for a decreasing eps grid.

    Every eps and the limit ``z`` (eps = 0) consume the same increments for a
    given sample.  If ``delta`` is omitted it is half the median gap at the
    largest eps.
    """
    eps_grid = [float(e) for e in eps_grid]
    if not eps_grid or any(e <= 0 for e in eps_grid):
        raise ValueError("eps grid must be nonempty and positive")
    if any(b >= a for a, b in zip(eps_grid, eps_grid[1:])):
        raise ValueError("eps grid must be strictly decreasing")
    if samples < 64:
        raise ValueError("convergence_study needs at least 64 samples")
    space = SobolevSpace(space)
    chunks = run_chunks(_gap_chunk, samples, workers, config=config, eps_grid=eps_grid, space=space)
    gaps = np.concatenate([c[0] for c in chunks])
    blown = np.concatenate([c[1] for c in chunks])
    sums = [s for c in chunks for s in c[2]]
    excluded = _check_budget(blown)
    gaps = gaps[~blown]
    medians = np.median(gaps, axis=0)
    if delta is None:
        delta = 0.5 * float(medians[0])
    exceed = (gaps > delta).mean(axis=0)
    pairwise = [float(np.mean(gaps[:, i + 1] < gaps[:, i])) for i in range(len(eps_grid) - 1)]
    return ConvergenceReport(
        eps_grid,
        medians.tolist(),
        gaps.mean(axis=0).tolist(),
        exceed.tolist(),
        float(delta),
        samples,
        excluded,
        pairwise,
        space.value,
        threshold,
        sums,
        _provenance(config),
    )


# ---------------------------------------------------------------- scheme checks


@dataclass
class EnergyCheckReport:
    dts: list
    deterministic_max_residual: list
    stochastic_rms_cumulative: list
    samples: int
    provenance: dict = field(default_factory=dict)

    @staticmethod
    def _ratios(vals):
        return [a / b if b else float("inf") for a, b in zip(vals, vals[1:])]

    @property
    def deterministic_ratios(self):
        return self._ratios(self.deterministic_max_residual)

    @property
    def stochastic_ratios(self):
        return self._ratios(self.stochastic_rms_cumulative)

    @property
    def checks(self) -> dict:
        return {
            "deterministic_ratio_in_[3.5,4.5]": all(3.5 <= r <= 4.5 for r in self.deterministic_ratios),
            "stochastic_ratio_at_least_1.3": all(r >= 1.3 for r in self.stochastic_ratios),
        }

    def to_dict(self):
        return {
            "quantity": "energy_residual",
            "parameters": {"dts": self.dts, "samples": self.samples, **self.provenance},
            "value": {"deterministic": self.deterministic_ratios, "stochastic": self.stochastic_ratios},
            "series": {
                "deterministic_max_residual": self.deterministic_max_residual,
                "stochastic_rms_cumulative": self.stochastic_rms_cumulative,
                "checks": self.checks,
            },
        }

    def csv_rows(self):
        return [
            {"dt": dt, "deterministic_max_residual": d, "stochastic_rms_cumulative": s}
            for dt, d, s in zip(self.dts, self.deterministic_max_residual, self.stochastic_rms_cumulative)
        ]


def _zero_noise(noise):
    if isinstance(noise, Additive):
        return Additive(noise.profile, 0.0)
    return type(noise)(0.0)


def energy_check(config: SimConfig, samples: int = 100, levels: int = 3) -> EnergyCheckReport:
    """Energy-balance defects under successive halving of ``dt``.

    The deterministic run switches the noise off and tracks the largest
    per-step defect; the stochastic run refines each sample's path by Brownian
    bridges and tracks the RMS over samples of the cumulative defect.
    """
    config = config.with_(save_stride=1)
    det_cfg = config.with_(noise=_zero_noise(config.noise))
    paths = [sample_path(config.T, config.dt, derive_seed(config.seed, i)) for i in range(samples)]
    dts, det, sto = [], [], []
    for level in range(levels):
        if level:
            paths = [refine(p) for p in paths]
        dt = paths[0].dt
        inc = np.stack([p.increments for p in paths])
        res = simulate_batch(det_cfg.with_(dt=dt), inc[:1] * 0.0)
        led = energy_ledger_arrays(res.times, res.coeffs[0], inc[0] * 0.0, det_cfg)
        det.append(float(np.max(np.abs(led.residuals()))))
        cfg = config.with_(dt=dt)
        res = simulate_batch(cfg, inc)
        if np.any(res.blown):
            raise BlowUpError(float(np.nanmin(res.blowup_times)), float("nan"))
        cum = energy_ledger_arrays(res.times, res.coeffs, inc, cfg).residuals().sum(axis=-1)
        sto.append(float(np.sqrt(np.mean(cum**2))))
        dts.append(dt)
    return EnergyCheckReport(dts, det, sto, samples, _provenance(config))


@dataclass
class StrongOrderReport:
    order: float
    target: float
    tolerance: float
    result: dict
    provenance: dict = field(default_factory=dict)

    @property
    def checks(self) -> dict:
        return {"order_within_tolerance": abs(self.order - self.target) <= self.tolerance}

    def to_dict(self):
        return {
            "quantity": "strong_order",
            "parameters": {"target": self.target, "tolerance": self.tolerance, **self.provenance},
            "value": self.order,
            "series": {**self.result, "checks": self.checks},
        }

    def csv_rows(self):
        return [{"dt": dt, "mean_gap": g} for dt, g in zip(self.result["dts"], self.result["mean_gaps"])]


def strong_order_report(config, levels=4, samples=32, target=1.0, tolerance=0.2) -> StrongOrderReport:
    res = strong_order(config, levels, samples)
    if res.excluded > EXCLUSION_BUDGET * samples:
        raise ExclusionBudgetError(res.excluded, samples)
    return StrongOrderReport(res.order, target, tolerance, res.to_dict(), _provenance(config))


# ---------------------------------------------------------------- truncation


def truncation_check(config: SimConfig, samples: int = 16, factor: float = 10.0) -> dict:
    """Run Cubic and Truncated(R) on the same paths with R = factor x observed max H1 norm.

    Returns the radius used and whether the trajectories agree bit for bit.
    """
    inc, _ = sample_increments(config, range(samples))
    cubic = simulate_batch(config.with_(mode=Cubic()), inc)
    R = factor * float(np.max(norm(cubic.coeffs, SobolevSpace.H1)))
    trunc = simulate_batch(config.with_(mode=Truncated(R)), inc)
    return {"R": R, "identical": bool(np.array_equal(cubic.coeffs, trunc.coeffs))}
