"""Command-line entry point: ``mbtorus <subcommand> [--config FILE] [--override key=value ...]``.

Each run writes ``manifest.json`` (before any series), ``series.csv``
(columns ``t`` then named quantities) and ``report.json`` into the output
directory.  Exit status: 0 success, 1 a check failed, 2 bad configuration,
3 blow-up or numerical breakdown.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXPERIMENTS, ConfigError, RunConfig, parse_config, parse_modes
from .diophantine import classify_alpha, near_resonance_scan, resonant_modes
from .dynamics import BlowUpError, SimParams, evolve
from .experiments import (absorbing_set_experiment, growth_tracking, make_forcing, smoothing_experiment,
                          StationaryDivergence, stationary_solve, trivial_attractor_experiment, _seed_pair)
from .normal_form import NormalFormOps, RecoveryError, identity_residual
from .spectral import SpectralField, embedding_constant, sobolev_norm

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3


def _clean(obj):
    """JSON-safe copy: Fractions as "a/b", NaN/inf as null, numpy scalars as Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path: Path, data) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_clean(data), fh, indent=2, sort_keys=False)
        fh.write("\n")


def write_csv(path: Path, times, columns: dict, index_name: str = "t") -> None:
    names = list(columns)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([index_name] + names)
        for i, t in enumerate(times):
            w.writerow([format(float(t), ".17g")] + [format(float(columns[n][i]), ".17g") for n in names])


# --- helpers -------------------------------------------------------------------

def _forcing(cfg: RunConfig, grid, which: str):
    spec = parse_modes(getattr(cfg, which), which)
    if spec is None:
        return None
    offset = 0 if which == "forcing" else 1
    return make_forcing(grid, None if spec == "seed" else spec, cfg.seed + offset, cfg.forcing_amplitude)


def _data(cfg: RunConfig, grid, s: float):
    if cfg.amplitude == 0:
        return SpectralField.zeros(grid), SpectralField.zeros(grid)
    u, v = _seed_pair(grid, s, cfg.seed)
    return u * (cfg.amplitude / sobolev_norm(u, cfg.s)), v * (cfg.amplitude / sobolev_norm(v, cfg.s))


def _params(cfg: RunConfig, grid, **extra):
    kw = dict(t_end=cfg.t_end, dt=cfg.resolved_dt, gamma=cfg.gamma, delta=cfg.resolved_delta,
              f=_forcing(cfg, grid, "forcing"), g=_forcing(cfg, grid, "g_forcing"), nonlinear=cfg.nonlinear,
              blowup_threshold=cfg.blowup_threshold, scheme=cfg.resolved_scheme, nf_theta=cfg.nf_theta)
    kw.update(extra)
    return SimParams(cfg.alpha_value(), grid, **kw)


def _stride(cfg: RunConfig, params) -> int:
    h = params.t_end / max(params.n_steps(), 1)
    return max(1, int(round(cfg.sample_interval / h)))


# --- subcommands -------------------------------------------------------------------
# each returns (report, (times, columns) or None, passed)

def cmd_classify_alpha(cfg: RunConfig):
    cls = classify_alpha(cfg.alpha_value(), q_max=cfg.q_max)
    modes = resonant_modes(cls, cfg.resonance_K)
    near = near_resonance_scan(cls, cfg.resonance_K, cfg.near_eps)
    report = {
        "classification": cls.to_dict(),
        "resonant_modes": [{"family": m.family, "root": m.root, "k": m.k, "partners": list(m.partners)}
                           for m in modes],
        "near_resonances": [{"root": h.root, "k": h.k, "n": h.n, "distance": h.distance} for h in near],
    }
    return report, None, True


def cmd_simulate(cfg: RunConfig):
    grid = cfg.grid()
    params = _params(cfg, grid)
    u0, v0 = _data(cfg, grid, cfg.s)
    rec = evolve(params, u0, v0, sample_every=_stride(cfg, params), norm_indices=cfg.norm_indices)
    s = rec.series
    drift = {}
    for key in ("E1", "E2", "E3", "E4"):
        change = abs(s[key][-1] - s[key][0])
        scale = {"E1": 1.0, "E2": 1.0, "E3": abs(s[key][0]) or 1.0, "E4": abs(s[key][0]) + 1.0}[key]
        drift[key] = float(change / scale)
    report = {"t_final": float(rec.times[-1]), "steps": params.n_steps(), "dt": params.t_end / max(params.n_steps(), 1),
              "initial": {k: float(v[0]) for k, v in s.items()},
              "final": {k: float(v[-1]) for k, v in s.items()},
              "drift": drift, "annotations": rec.annotations}
    return report, (rec.times, s), True


def cmd_check_identities(cfg: RunConfig):
    grid = cfg.grid()
    params = _params(cfg, grid, gamma=0.0, delta=0.0, f=None, g=None)
    u0, v0 = _data(cfg, grid, cfg.s)
    if abs(u0.mean) > 0:
        raise ConfigError("amplitude", "identities need mean-zero u")
    n = params.n_steps()
    stride = cfg.snapshot_stride or max(1, n // 100)
    rec = evolve(params, u0, v0, sample_every=stride, snapshot_every=stride, norm_indices=())
    res = identity_residual(rec, include_rho=cfg.include_rho)
    worst = max(res.max_u, res.max_v)
    passed = worst < cfg.identity_tol
    report = {"max_residual_u": res.max_u, "max_residual_v": res.max_v, "rule": res.rule,
              "snapshot_stride": stride, "include_rho": cfg.include_rho, "tolerance": cfg.identity_tol,
              "passed": passed, "annotations": res.annotations}
    return report, (res.times, {"residual_u": res.res_u, "residual_v": res.res_v}), passed


def cmd_smoothing(cfg: RunConfig):
    rep = smoothing_experiment(cfg.alpha_value(), s=cfg.s, s1_grid=cfg.s1_grid, N=cfg.N, t_end=cfg.t_end,
                               seeds=cfg.resolved_seeds, dt=cfg.resolved_dt, scheme=cfg.resolved_scheme,
                               nf_theta=cfg.nf_theta, sample_interval=cfg.sample_interval,
                               t_fit_start=cfg.t_fit_start, nonlinear=cfg.nonlinear,
                               subtract_rho=cfg.subtract_rho, grid=cfg.grid())
    report = rep.to_dict()
    gap = rep.slope_gap
    passed = True
    if cfg.expect_gap_min is not None:
        passed &= math.isfinite(gap) and gap >= cfg.expect_gap_min
    if cfg.expect_gap_max is not None:
        passed &= math.isfinite(gap) and gap < cfg.expect_gap_max
    report["passed"] = passed
    return report, rep.series(), passed


def cmd_attractor(cfg: RunConfig):
    f_spec = parse_modes(cfg.forcing, "forcing")
    g_spec = parse_modes(cfg.g_forcing, "g_forcing")
    common = dict(alpha=cfg.alpha_value(), N=cfg.N, t_end=cfg.t_end, gamma=cfg.gamma, delta=cfg.resolved_delta,
                  forcing=None if f_spec in (None, "seed") else f_spec,
                  g_forcing=None if g_spec in (None, "seed") else g_spec,
                  forcing_amplitude=cfg.forcing_amplitude, dt=cfg.resolved_dt, sample_interval=cfg.sample_interval,
                  scheme=cfg.resolved_scheme)
    if cfg.mode == "absorbing":
        rep = absorbing_set_experiment(n_members=cfg.n_members, norm_range=(cfg.norm_min, cfg.norm_max),
                                       seed=cfg.seed, s=cfg.s, **common)
        passed = rep.spread <= cfg.spread_max and rep.horizon_change <= cfg.horizon_tol
    else:
        rep = trivial_attractor_experiment(seeds=cfg.resolved_seeds, data_norm=cfg.data_norm,
                                           transient=cfg.transient, tol=cfg.attractor_tol,
                                           stationary_tol=cfg.tol, **common)
        passed = rep.converged
    report = rep.to_dict()
    report["mode"] = cfg.mode
    report["passed"] = bool(passed)
    return report, rep.series(), bool(passed)


def cmd_stationary(cfg: RunConfig):
    grid = cfg.grid()
    f = _forcing(cfg, grid, "forcing") or SpectralField.zeros(grid)
    g = _forcing(cfg, grid, "g_forcing") or SpectralField.zeros(grid)
    pair = stationary_solve(f, g, cfg.gamma, cfg.resolved_delta, cfg.alpha_value(), tol=cfg.tol,
                            max_iter=cfg.max_iter)
    report = pair.to_dict()
    report["p_half"] = [[c.real, c.imag] for c in pair.p.half]
    report["q_half"] = [[c.real, c.imag] for c in pair.q.half]
    it = np.arange(1, len(pair.differences) + 1)
    cols = {"difference_H2": np.array(pair.differences), "q_norm_H2": np.array(pair.iterate_norms[1:])}
    return report, (it, cols, "iteration"), pair.converged


def cmd_growth(cfg: RunConfig):
    rep = growth_tracking(cfg.alpha_value(), s=cfg.s, N=cfg.N, t_end=cfg.t_end, seed=cfg.seed, dt=cfg.resolved_dt,
                          data_s=cfg.data_s, amplitude=cfg.amplitude, sample_interval=cfg.sample_interval,
                          nonlinear=cfg.nonlinear, scheme=cfg.resolved_scheme)
    return rep.to_dict(), rep.series(), True


COMMANDS = {
    "classify-alpha": cmd_classify_alpha,
    "simulate": cmd_simulate,
    "check-identities": cmd_check_identities,
    "smoothing": cmd_smoothing,
    "attractor": cmd_attractor,
    "stationary": cmd_stationary,
    "growth": cmd_growth,
}


def _manifest(cfg: RunConfig, name: str) -> dict:
    grid = cfg.grid()
    resolved = cfg.to_dict()
    resolved.update({"experiment": name, "M": grid.M, "dt": cfg.resolved_dt, "scheme": cfg.resolved_scheme,
                     "delta": cfg.resolved_delta,
                     "seeds": cfg.resolved_seeds})
    man = {"program": "mbtorus", "version": __version__, "subcommand": name, "config": resolved,
           "alpha": cfg.alpha, "embedding_constant": embedding_constant(grid), "status": "running",
           "partial": True}
    if grid.dealiased:
        man["min_divisor"] = NormalFormOps(cfg.alpha_value(), grid).min_divisor()
    return man


def run_subcommand(name: str, cfg: RunConfig, out: Path | None = None, echo=print) -> int:
    """Run ``name`` with ``cfg``; write manifest, series and report under ``out``."""
    if name not in COMMANDS:
        raise ConfigError("experiment", f"unknown subcommand {name!r}")
    cfg = dataclasses.replace(cfg, experiment=name)
    out = Path(cfg.output_dir if out is None else out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _manifest(cfg, name)
    write_json(out / "manifest.json", manifest)
    t0 = time.perf_counter()
    code = EXIT_OK
    report, series = None, None
    try:
        report, series, passed = COMMANDS[name](cfg)
        code = EXIT_OK if passed else EXIT_FAILED
        manifest["status"] = "ok" if passed else "failed"
    except (BlowUpError, RecoveryError) as exc:
        code = EXIT_BLOWUP
        manifest["status"] = "blow-up"
        manifest["error"] = str(exc)
    except StationaryDivergence as exc:
        code = EXIT_FAILED
        manifest["status"] = "failed"
        manifest["error"] = str(exc)
        report = exc.pair.to_dict()
    outputs = []
    if series is not None:
        times, cols, *idx = series
        write_csv(out / "series.csv", times, cols, *idx)
        outputs.append("series.csv")
    if report is not None:
        write_json(out / "report.json", report)
        outputs.append("report.json")
    manifest["outputs"] = outputs
    manifest["partial"] = code == EXIT_BLOWUP
    manifest["wall_time_s"] = time.perf_counter() - t0
    write_json(out / "manifest.json", manifest)
    _summary(name, manifest, report, echo)
    return code


def _summary(name, manifest, report, echo):
    echo(f"{'subcommand':<22}{name}")
    echo(f"{'status':<22}{manifest['status']}")
    if report:
        for key, val in report.items():
            if isinstance(val, (bool, int, float, str)) or val is None:
                echo(f"{key:<22}{val}")
    if "error" in manifest:
        echo(f"{'error':<22}{manifest['error']}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mbtorus", description="Majda-Biello system on the torus")
    ap.add_argument("--version", action="version", version=f"mbtorus {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="key=value config file")
        sp.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
        sp.add_argument("--seed", type=int, help="base seed (overrides seed)")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="set one config key; repeatable")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text, overrides)
        if args.out is not None:
            cfg = dataclasses.replace(cfg, output_dir=str(args.out))
        return run_subcommand(args.subcommand, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
