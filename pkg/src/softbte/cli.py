"""Command-line entry point: simulate | verify | sweep.

Artifacts are deterministic: identical config + seed produce byte-identical
CSV and JSON, and SVG plots are reproducible when timestamp metadata is
disabled with --no-timestamp.

Exit codes: 0 ok, 1 config error, 2 instability abort, 3 certificate
failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (ConfigError, RunConfig, load_config, resolved_dict,
                     validate_cross)
from .dynamics import (COLUMNS, FitDegenerateError, SimulationState, Stepper,
                       TimeSeriesRecord, decay_fit, radial_bump_field,
                       shifted_maxwellian_field, simulate)
from .grid import VelocityGrid
from .kernel import SphereRule
from .params import ModelParams, ParameterError, WeightParams
from .verify import run_suite
from .weights import decay_exponent

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INSTABILITY = 2
EXIT_CERTIFICATE = 3


def _apply_thread_cap():
    cap = os.environ.get("SOFTBTE_THREADS")
    if cap:
        import numba
        n = max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS))
        numba.set_num_threads(n)


def _fmt(x) -> str:
    return "%.17g" % float(x)


def write_csv(path: Path, columns, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) if isinstance(row[c], (int, float))
                              else str(row[c]) for c in columns) + "\n")


def write_json(path: Path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _setup_matplotlib(no_timestamp: bool):
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "softbte"
    import matplotlib.pyplot as plt
    metadata = {"Date": None} if no_timestamp else None
    return plt, metadata


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------

def _initial_field(cfg: RunConfig, grid: VelocityGrid) -> np.ndarray:
    if cfg.initial_kind == "equilibrium":
        F = grid.mu.copy()
    elif cfg.initial_kind == "bump":
        F = radial_bump_field(grid, cfg.amplitude, cfg.mode)
    else:
        F = shifted_maxwellian_field(grid, cfg.temperature)
    if cfg.layout == "homogeneous":
        return F
    x = (np.arange(cfg.n_x) + 0.5) / cfg.n_x * cfg.period
    modulation = np.cos(2.0 * np.pi * cfg.mode * x / cfg.period)
    return grid.mu[None, :] + modulation[:, None] * (F - grid.mu)[None, :]


def run_simulation(cfg: RunConfig) -> TimeSeriesRecord:
    grid = VelocityGrid(radius=cfg.grid_radius, n_per_dim=cfg.grid_n)
    stepper = Stepper(grid, cfg.model, sphere=SphereRule.build(),
                      project=cfg.conservation_project,
                      inner_iterations=cfg.inner_iterations)
    state = SimulationState(
        t=0.0, values=_initial_field(cfg, grid), grid=grid, model=cfg.model,
        weights=cfg.weights, layout=cfg.layout, period=cfg.period)
    return simulate(state, dt=cfg.dt, t_end=cfg.t_end, stepper=stepper,
                    method=cfg.method)


def cmd_simulate(cfg: RunConfig, out: Path, no_timestamp: bool) -> int:
    record = run_simulation(cfg)
    write_csv(out / "timeseries.csv", COLUMNS, record.rows)

    fit_payload = None
    fit = None
    if cfg.initial_kind != "equilibrium" and len(record.rows) >= 20:
        try:
            rho_theory = decay_exponent(cfg.model.gamma, cfg.weights.vartheta)
            fit = decay_fit(record, rho_hint=rho_theory,
                            fit_window=cfg.fit_window)
            fit_payload = {
                "rho_theory": rho_theory, "rho_est": fit.rho_est,
                "lam": fit.lam, "r2": fit.r2,
                "lam_constrained": fit.lam_constrained,
                "r2_constrained": fit.r2_constrained,
            }
        except (FitDegenerateError, ParameterError):
            fit_payload = None
    write_json(out / "summary.json", {
        "version": __version__,
        "config": resolved_dict(cfg),
        "n_rows": len(record.rows),
        "unstable": record.unstable,
        "final": {c: record.rows[-1][c] for c in COLUMNS},
        "decay_fit": fit_payload,
    })

    plt, metadata = _setup_matplotlib(no_timestamp)
    t = record.column("t")

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(t, np.maximum(record.column("h_sup"), 1e-300), label="sup|h|")
    ax.semilogy(t, np.maximum(record.column("f_l2"), 1e-300), label="||f||_2")
    ax.set_xlabel("t"), ax.set_ylabel("norm"), ax.legend()
    fig.tight_layout()
    fig.savefig(out / "norms.svg", metadata=metadata)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(t, record.column("rel_entropy"))
    ax.set_xlabel("t"), ax.set_ylabel("relative entropy")
    fig.tight_layout()
    fig.savefig(out / "entropy.svg", metadata=metadata)
    plt.close(fig)

    if fit is not None:
        y = np.log(record.column("h_sup"))
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(t, y, label="ln sup|h|")
        mask = t > 0
        a_free = y[mask][-1] + fit.lam * t[mask][-1] ** fit.rho_est
        ax.plot(t[mask], a_free - fit.lam * t[mask] ** fit.rho_est, "--",
                label=f"free fit rho={fit.rho_est:.3f}")
        rho_c = fit_payload["rho_theory"]
        a_c = y[mask][-1] + fit.lam_constrained * t[mask][-1] ** rho_c
        ax.plot(t[mask], a_c - fit.lam_constrained * t[mask] ** rho_c, ":",
                label=f"constrained rho={rho_c:.3f}")
        ax.set_xlabel("t"), ax.set_ylabel("ln sup|h|"), ax.legend()
        fig.tight_layout()
        fig.savefig(out / "decay_fit.svg", metadata=metadata)
        plt.close(fig)

    return EXIT_INSTABILITY if record.unstable else EXIT_OK


# --------------------------------------------------------------------------
# verify
# --------------------------------------------------------------------------

def cmd_verify(cfg: RunConfig | None, suite: str, seed: int, out: Path) -> int:
    try:
        certificates = run_suite(suite, seed=seed)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return EXIT_CONFIG
    payload = {
        "version": __version__,
        "suite": suite,
        "seed": seed,
        "config": resolved_dict(cfg) if cfg is not None else None,
        "certificates": [c.to_dict() for c in certificates],
    }
    write_json(out / "verify_report.json", payload)
    for c in certificates:
        print(f"[{c.verdict:>10s}] {c.lemma_id}: {c.claim}")
    if all(c.verdict == "pass" for c in certificates):
        return EXIT_OK
    return EXIT_CERTIFICATE


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

SWEEP_COLUMNS = ("gamma", "vartheta", "rho_theory", "rho_est", "lam", "r2",
                 "status")


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    rows = []
    for gamma, vartheta in itertools.product(cfg.sweep_gammas,
                                             cfg.sweep_varthetas):
        row = {"gamma": gamma, "vartheta": vartheta, "rho_theory": "",
               "rho_est": "", "lam": "", "r2": "", "status": "ok"}
        try:
            model = ModelParams(gamma=gamma, eps_cutoff=cfg.model.eps_cutoff)
            weights = WeightParams(q=cfg.weights.q, vartheta=vartheta,
                                   beta=cfg.weights.beta, s0=cfg.weights.s0)
            validate_cross(model, weights, cfg.p)
        except (ParameterError, ConfigError) as exc:
            row["status"] = f"skipped: {exc}"
            rows.append(row)
            continue
        row["rho_theory"] = decay_exponent(gamma, vartheta)
        from dataclasses import replace
        sub = replace(cfg, model=model, weights=weights, sweep_gammas=(),
                      sweep_varthetas=())
        record = run_simulation(sub)
        try:
            fit = decay_fit(record, rho_hint=row["rho_theory"],
                            fit_window=cfg.fit_window)
            row.update(rho_est=fit.rho_est, lam=fit.lam, r2=fit.r2)
        except FitDegenerateError as exc:
            row["status"] = f"fit degenerate: {exc}"
        if record.unstable:
            row["status"] = "unstable"
        rows.append(row)
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softbte",
        description="Velocity-grid laboratory for the cutoff soft-potential "
                    "Boltzmann equation near equilibrium.")
    parser.add_argument("command", choices=("simulate", "verify", "sweep"))
    parser.add_argument("--config", type=Path, default=None,
                        help="run configuration (flat key=value or JSON)")
    parser.add_argument("--out", type=Path, default=Path("."),
                        help="output directory for artifacts")
    parser.add_argument("--suite", default="all",
                        help="certificate suite name for 'verify'")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--no-timestamp", action="store_true",
                        help="omit timestamp metadata from SVG output")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _apply_thread_cap()
    cfg = None
    try:
        if args.config is not None:
            cfg = load_config(args.config)
        elif args.command != "verify":
            print("--config is required for this command", file=sys.stderr)
            return EXIT_CONFIG
        if args.seed is not None and cfg is not None:
            from dataclasses import replace
            cfg = replace(cfg, seed=args.seed)
    except (ConfigError, ParameterError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    args.out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, args.no_timestamp)
        if args.command == "verify":
            seed = args.seed if args.seed is not None else (
                cfg.seed if cfg is not None else 0)
            return cmd_verify(cfg, args.suite, seed, args.out)
        return cmd_sweep(cfg, args.out)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
