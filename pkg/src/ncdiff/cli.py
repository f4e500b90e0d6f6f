"""Batch command line front end.

Usage::

    ncdiff SUBCOMMAND [CONFIG.toml] [--workers N] [--seed S] [--out DIR] [--binary]
                      [--section.key=value ...]

Exit status: 0 success, 1 invalid configuration, 2 numerical blow-up beyond
the exclusion budget, 3 a report's built-in property check failed.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import experiments as ex
from .dynamics import Additive, Cubic, Linear, LinearMult, SineMult, Truncated
from .integrators import BlowUpError, Scheme, SimConfig, simulate
from .spectral import SobolevSpace
from .stochastic import derive_seed, sample_path

log = logging.getLogger("ncdiff")

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_CHECK = 0, 1, 2, 3

SUBCOMMANDS = ("simulate", "moments", "modulus", "converge", "ou-check", "energy-check", "strong-order")

DEFAULTS = {
    "sim": {
        "epsilon": 0.1,
        "n_modes": 32,
        "dt": 1e-3,
        "T": 1.0,
        "scheme": "semi_implicit_em",
        "save_stride": 1,
        "seed": 0,
        "u0": None,
        "mode": {"kind": "cubic", "R": None, "forcing": None},
        "noise": {"kind": "additive", "gamma": 0.3, "profile": [1.0]},
    },
    "moments": {"eps_grid": [0.0, 0.01, 0.1, 0.5], "p": [2, 4], "samples": 64},
    "modulus": {"deltas": [0.02, 0.04, 0.08, 0.16], "space": "Hneg1", "samples": 32, "extend": "zero"},
    "converge": {
        "eps_grid": [0.2, 0.1, 0.05, 0.025],
        "samples": 64,
        "delta": None,
        "threshold": 0.05,
        "space": "H1",
    },
    "ou-check": {"eps": 0.0, "k": 1, "gamma": 1.0, "T": 1.0, "dt": 1e-3, "samples": 10000, "c0": 0.0},
    "energy-check": {"samples": 100, "levels": 3},
    "strong-order": {"levels": 4, "samples": 32, "target": 1.0, "tolerance": 0.2},
    "output": {"dir": "results", "binary": False},
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, update: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in update.items():
        name = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"unknown configuration key {name!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{name!r} must be a table")
            out[key] = _merge(base[key], val, name + ".")
        else:
            out[key] = val
    return out


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(cfg: dict, dotted: str, value) -> dict:
    keys = dotted.split(".")
    nested = value
    for key in reversed(keys):
        nested = {key: nested}
    return _merge(cfg, nested)


def load_config(path=None, overrides=()) -> dict:
    """Defaults, then the TOML file, then ``(dotted_key, value)`` overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            data = tomllib.loads(Path(path).read_text())
        except tomllib.TOMLDecodeError as err:
            raise ConfigError(f"{path}: {err}") from None
        cfg = _merge(cfg, data)
    for key, val in overrides:
        cfg = apply_override(cfg, key, val)
    return cfg


def _mode(table: dict):
    kind = table["kind"]
    if kind == "cubic":
        return Cubic()
    if kind == "truncated":
        if table["R"] is None:
            raise ConfigError("sim.mode.R is required for the truncated mode")
        return Truncated(float(table["R"]))
    if kind == "linear":
        return Linear(None if table["forcing"] is None else np.asarray(table["forcing"], dtype=float))
    raise ConfigError(f"sim.mode.kind: unknown nonlinearity {kind!r}")


def _noise(table: dict):
    kind = table["kind"]
    gamma = float(table["gamma"])
    if kind == "additive":
        return Additive(table["profile"], gamma)
    if kind == "linear_mult":
        return LinearMult(gamma)
    if kind == "sine_mult":
        return SineMult(gamma)
    raise ConfigError(f"sim.noise.kind: unknown noise model {kind!r}")


def sim_config(cfg: dict) -> SimConfig:
    s = cfg["sim"]
    eps = float(s["epsilon"])
    if not 0.0 <= eps <= 0.5:
        raise ConfigError(f"sim.epsilon={eps}: the model requires eps in [0, 1/2]")
    try:
        scheme = Scheme(s["scheme"])
    except ValueError:
        raise ConfigError(f"sim.scheme: unknown scheme {s['scheme']!r}") from None
    try:
        return SimConfig(
            eps=eps,
            n_modes=int(s["n_modes"]),
            dt=float(s["dt"]),
            T=float(s["T"]),
            scheme=scheme,
            mode=_mode(s["mode"]),
            noise=_noise(s["noise"]),
            u0=None if s["u0"] is None else np.asarray(s["u0"], dtype=float),
            save_stride=int(s["save_stride"]),
            seed=int(s["seed"]),
        )
    except ValueError as err:
        raise ConfigError(f"sim: {err}") from None


def _space(name, key):
    try:
        return SobolevSpace(name)
    except ValueError:
        raise ConfigError(f"{key}: unknown space {name!r}") from None


def run(subcommand: str, cfg: dict, workers: int = 1) -> tuple[int, list[Path]]:
    """Run one subcommand on a merged configuration; returns exit status and written files."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    sim = sim_config(cfg)
    out = Path(cfg["output"]["dir"])
    block = cfg.get(subcommand, {})
    echo = {"experiment": subcommand, "settings": block}
    if subcommand == "simulate":
        path = sample_path(sim.T, sim.dt, derive_seed(sim.seed, 0))
        traj = simulate(sim, path)
        out.mkdir(parents=True, exist_ok=True)
        stem = out / f"simulate_{sim.config_hash()}_seed{sim.seed}"
        traj.save(stem.with_suffix(".csv"), "csv")
        files = [stem.with_suffix(".csv")]
        if cfg["output"]["binary"]:
            traj.save(stem.with_suffix(".bin"), "bin")
            files.append(stem.with_suffix(".bin"))
        return EXIT_OK, files
    if subcommand == "moments":
        report = ex.mc_moments(sim, block["eps_grid"], block["p"], int(block["samples"]), workers)
    elif subcommand == "modulus":
        report = ex.modulus_scaling(
            sim, block["deltas"], _space(block["space"], "modulus.space"), int(block["samples"]), workers, block["extend"]
        )
    elif subcommand == "converge":
        report = ex.convergence_study(
            sim,
            block["eps_grid"],
            block["delta"],
            int(block["samples"]),
            float(block["threshold"]),
            _space(block["space"], "converge.space"),
            workers,
        )
    elif subcommand == "ou-check":
        report = ex.ou_oracle_check(
            float(block["eps"]),
            int(block["k"]),
            float(block["gamma"]),
            float(block["T"]),
            float(block["dt"]),
            int(block["samples"]),
            float(block["c0"]),
            sim.seed,
            workers,
        )
    elif subcommand == "energy-check":
        report = ex.energy_check(sim, int(block["samples"]), int(block["levels"]))
    else:
        report = ex.strong_order_report(
            sim, int(block["levels"]), int(block["samples"]), float(block["target"]), float(block["tolerance"])
        )
    report.provenance = {**getattr(report, "provenance", {}), "settings": echo}
    files = list(ex.write_report(report, out, subcommand, sim))
    failed = [name for name, ok in report.checks.items() if not ok]
    if failed:
        log.error("%s: property checks failed: %s", subcommand, ", ".join(failed))
        return EXIT_CHECK, files
    return EXIT_OK, files


def _split_overrides(argv: list[str]) -> tuple[list[str], list[tuple[str, object]]]:
    """Separate ``--section.key=value`` (or ``--section.key value``) overrides from other arguments."""
    rest, pairs = [], []
    it = iter(argv)
    for arg in it:
        key, sep, val = arg[2:].partition("=")
        if not (arg.startswith("--") and "." in key):
            rest.append(arg)
            continue
        if not sep:
            try:
                val = next(it)
            except StopIteration:
                raise ConfigError(f"override {arg!r} needs a value") from None
        pairs.append((key, _parse_value(val)))
    return rest, pairs


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ncdiff", description="Stochastic nonclassical diffusion experiments")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("config", nargs="?", help="TOML configuration file")
    p.add_argument("--workers", type=int, default=1, help="parallel Monte Carlo workers")
    p.add_argument("--seed", type=int, help="override sim.seed")
    p.add_argument("--out", help="override output.dir")
    p.add_argument("--binary", action="store_true", help="also dump binary trajectories")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        argv, overrides = _split_overrides(argv)
    except ConfigError as err:
        print(f"ncdiff: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors; 2 is reserved for blow-up here
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.seed is not None:
            overrides.append(("sim.seed", args.seed))
        if args.out is not None:
            overrides.append(("output.dir", args.out))
        if args.binary:
            overrides.append(("output.binary", True))
        cfg = load_config(args.config, overrides)
        status, files = run(args.subcommand, cfg, args.workers)
    except (ConfigError, OSError) as err:
        print(f"ncdiff: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ex.ExclusionBudgetError, BlowUpError) as err:
        print(f"ncdiff: {err}", file=sys.stderr)
        return EXIT_BLOWUP
    except ValueError as err:
        print(f"ncdiff: invalid settings: {err}", file=sys.stderr)
        return EXIT_CONFIG
    for f in files:
        print(f)
    return status


if __name__ == "__main__":
    sys.exit(main())
