"""Acceptance gate: twelve quantitative criteria, one per test.

Each test records a single PASS/FAIL line; the conftest terminal-summary
hook replays them after capture ends so they survive in piped output.
Heavy fine-grid computations are shared
through session fixtures.  Stated runtime budgets assume an 8-core
laptop; this suite runs single-threaded, so wall-clock checks compare
against 8x the budget and record the measured time in the printed line.
"""

import json
import math
import sys
import time

import numpy as np
import pytest
from scipy.integrate import quad

from softbte.cli import main as cli_main
from softbte.collision import (MomentVector, collision_Q, q_loss,
                               relative_entropy)
from softbte.dynamics import (SimulationState, Stepper, decay_fit,
                              picard_step, radial_bump_field,
                              random_bump_field, simulate)
from softbte.grid import VelocityGrid
from softbte.kernel import SphereRule, apply_K1, apply_K2, nu_on_grid
from softbte.params import ModelParams, WeightParams
from softbte.verify import (certify_decay, certify_entropy,
                            certify_gamma_bounds, certify_klowcut_scaling,
                            certify_nu_bounds)
from softbte.weights import nu_tilde, semigroup_G

MP = ModelParams(gamma=-1.0)
WP = WeightParams(q=0.5, vartheta=1.0, beta=3.5)
CORE_FACTOR = 8.0            # budget multiplier for the single-core runner

# collected lines are replayed by the conftest terminal-summary hook
REPORT_LINES = []


def _report(num, desc, ok, detail=""):
    line = f"criterion {num:02d} {'PASS' if ok else 'FAIL'} - {desc}"
    if detail:
        line += f" ({detail})"
    REPORT_LINES.append(line)
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line


# --------------------------------------------------------------------------
# shared fine-grid computations (criteria 1-2)
# --------------------------------------------------------------------------

@pytest.fixture(scope="session")
def fine():
    grid = VelocityGrid(radius=8.0, n_per_dim=24)
    sphere = SphereRule.build()
    nu = nu_on_grid(grid, MP)
    out = {"grid": grid, "nu": nu}
    t0 = time.time()
    k2 = apply_K2(grid.sqrt_mu, grid, MP, sphere=sphere)
    k1 = apply_K1(grid.sqrt_mu, grid, MP)
    f1 = grid.nodes[:, 0] * grid.sqrt_mu
    k2v = apply_K2(f1, grid, MP, sphere=sphere)
    k1v = apply_K1(f1, grid, MP)
    Q = collision_Q(grid.mu, grid, MP, sphere=sphere)
    out.update(k2_sqmu=k2.values, k1_sqmu=k1, f1=f1, k2_v1=k2v.values,
               k1_v1=k1v, Q=Q.values, seconds=time.time() - t0)
    return out


@pytest.fixture(scope="session")
def coarse_grid():
    return VelocityGrid(radius=6.0, n_per_dim=8)


@pytest.fixture(scope="session")
def coarse_stepper(coarse_grid):
    return Stepper(coarse_grid, MP, sphere=SphereRule.build(3, 4))


def _hom_state(grid, F):
    return SimulationState(t=0.0, values=F, grid=grid, model=MP, weights=WP)


@pytest.fixture(scope="session")
def bump_runs(coarse_grid, coarse_stepper):
    """Five short random-bump relaxation runs (criteria 4 and 5)."""
    records = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        F0 = random_bump_field(coarse_grid, rng, amplitude=0.5)
        records.append(simulate(_hom_state(coarse_grid, F0), dt=0.05,
                                t_end=1.0, stepper=coarse_stepper))
    return records


@pytest.fixture(scope="session")
def entropy_floor(coarse_grid, coarse_stepper):
    """Discretization floor: entropy jitter of an equilibrium run."""
    rec = simulate(_hom_state(coarse_grid, coarse_grid.mu.copy()), dt=0.05,
                   t_end=1.0, stepper=coarse_stepper)
    E = rec.column("rel_entropy")
    return float(np.abs(np.diff(E)).max())


# --------------------------------------------------------------------------
# criteria
# --------------------------------------------------------------------------

def test_criterion_01_equilibrium_fidelity(fine):
    grid, nu = fine["grid"], fine["nu"]
    q_rel = np.abs(fine["Q"]).max() / (nu * grid.mu).max()
    L_sqmu = nu * grid.sqrt_mu - (fine["k2_sqmu"] - fine["k1_sqmu"])
    r_sqmu = np.abs(L_sqmu).max() / (nu * grid.sqrt_mu).max()
    L_v1 = nu * fine["f1"] - (fine["k2_v1"] - fine["k1_v1"])
    r_v1 = np.abs(L_v1).max() / np.abs(nu * fine["f1"]).max()
    budget = 120.0 * CORE_FACTOR
    ok = (q_rel <= 0.02 and r_sqmu <= 0.03 and r_v1 <= 0.05
          and fine["seconds"] <= budget)
    _report(1, "equilibrium fidelity at N=24", ok,
            f"Q {q_rel:.4f}<=0.02, sqrt-mu {r_sqmu:.4f}<=0.03, "
            f"v1 {r_v1:.4f}<=0.05, {fine['seconds']:.0f}s<={budget:.0f}s")


def test_criterion_02_k2_identity(fine):
    grid, nu = fine["grid"], fine["nu"]
    mask = grid.speed_sq <= (grid.radius / 2.0) ** 2
    target = 2.0 * nu * grid.sqrt_mu
    rel = (np.abs(fine["k2_sqmu"] - target)[mask] / target[mask]).max()
    _report(2, "gain-part doubling identity on sqrt-mu", rel <= 0.03,
            f"max rel err {rel:.4f} <= 0.03 on |v| <= R/2")


def test_criterion_03_conservation(coarse_grid, coarse_stepper):
    state = _hom_state(coarse_grid, radial_bump_field(coarse_grid, 0.3))
    m0 = MomentVector.of(state.values, coarse_grid)
    worst = 0.0
    prev = m0
    for _ in range(1000):
        state = picard_step(state, 0.05, coarse_stepper)
        m = MomentVector.of(state.values, coarse_grid)
        worst = max(worst,
                    abs(m.mass - prev.mass) / m0.mass,
                    np.abs(m.momentum - prev.momentum).max() / m0.energy,
                    abs(m.energy - prev.energy) / m0.energy)
        prev = m
    _report(3, "mass/momentum/energy drift over 1000 steps", worst <= 1e-10,
            f"worst per-step relative drift {worst:.2e} <= 1e-10")


def test_criterion_04_entropy_monotone(bump_runs, entropy_floor):
    certs = [certify_entropy(rec, floor=entropy_floor) for rec in bump_runs]
    ok = all(c.verdict == "pass" for c in certs)
    # negative control: an injected entropy increase must be caught
    import copy
    bad = copy.deepcopy(bump_runs[0])
    bad.rows[10]["rel_entropy"] = 2.0 * bad.rows[0]["rel_entropy"]
    bad.rows[10]["split_A"] = 0.0
    bad.rows[10]["split_B"] = 0.0
    control = certify_entropy(bad, floor=entropy_floor)
    ok = ok and control.verdict == "fail"
    _report(4, "relative entropy non-increasing on 5 random runs", ok,
            f"floor {entropy_floor:.2e}, negative control {control.verdict}")


def test_criterion_05_split_inequality(bump_runs):
    violations = 0
    for rec in bump_runs:
        gap = (rec.column("split_A") + rec.column("split_B")
               - rec.column("rel_entropy"))
        violations += int(np.sum(gap > 1e-12 * (1.0 +
                                                rec.column("rel_entropy"))))
    _report(5, "quadratic/linear split below entropy at every step",
            violations == 0, f"{violations} violations")


def test_criterion_06_nu_bounds():
    certs = [certify_nu_bounds(ModelParams(gamma=g))
             for g in (-0.5, -1.0, -2.0, -2.5)]
    ok = all(c.verdict == "pass" and c.fitted_constants["c1"] > 0.0
             for c in certs)
    bands = ", ".join(f"g={g}: [{c.fitted_constants['c1']:.3g}, "
                      f"{c.fitted_constants['c2']:.3g}]"
                      for g, c in zip((-0.5, -1.0, -2.0, -2.5), certs))
    _report(6, "two-sided collision-frequency bands", ok, bands)


def test_criterion_07_near_singular_scaling():
    t0 = time.time()
    certs = [certify_klowcut_scaling(g) for g in (-1.0, -2.0)]
    elapsed = time.time() - t0
    budget = 300.0 * CORE_FACTOR
    ok = all(c.verdict == "pass" for c in certs) and elapsed <= budget
    slopes = ", ".join(f"g={g}: slope {c.fitted_constants['slope']:.3f} "
                       f"(expect {g + 3.0:g})"
                       for g, c in zip((-1.0, -2.0), certs))
    _report(7, "near-singular part scales like eps^(gamma+3)", ok,
            f"{slopes}; {elapsed:.0f}s <= {budget:.0f}s")


def test_criterion_08_nonlinearity_bounds():
    certs = [certify_gamma_bounds(MP, WP, p=2.5, which=which,
                                  n_train=50, n_holdout=50, seed=0)
             for which in ("loss", "gain")]
    ok = all(c.verdict == "pass" and c.pass_fraction == 1.0 for c in certs)
    detail = ", ".join(f"{c.lemma_id}: C={c.fitted_constants['C']:.3g}, "
                       f"0/{c.n_holdout} holdout violations" for c in certs)
    _report(8, "weighted nonlinearity bounds at 1.05 slack", ok, detail)


def test_criterion_09_stretched_decay():
    t0 = time.time()
    grid = VelocityGrid(radius=6.0, n_per_dim=10)
    stepper = Stepper(grid, MP, sphere=SphereRule.build(3, 4))
    F0 = radial_bump_field(grid, 0.1)
    rec = simulate(_hom_state(grid, F0), dt=0.1, t_end=12.0, stepper=stepper,
                   method="h-form")
    elapsed = time.time() - t0
    budget = 600.0 * CORE_FACTOR
    h = rec.column("h_sup")
    transient = max(2, int(0.2 * len(h)))
    monotone = bool(np.all(np.diff(h[transient:]) <= 0.0))
    cert = certify_decay(rec, gamma=MP.gamma, vartheta=WP.vartheta)
    fc = cert.fitted_constants
    ok = (monotone and cert.verdict == "pass"
          and fc["r2_constrained"] >= 0.95
          and fc["rho_est"] >= fc["rho_theory"] * 0.8
          and elapsed <= budget)
    flagged = any("over-decay" in f for f in cert.flags)
    _report(9, "weighted sup-norm stretched-exponential decay", ok,
            f"monotone={monotone}, rho_est {fc['rho_est']:.3f} vs "
            f"theory {fc['rho_theory']:.3f}"
            + (" [over-decay flag]" if flagged else "")
            + f", constrained R2 {fc['r2_constrained']:.3f} >= 0.95, "
            f"{elapsed:.0f}s <= {budget:.0f}s")


# recorded empirically: frozen-time iterates halve per sweep at this step
PICARD_DT_THRESHOLD = 0.1


def test_criterion_10_picard_contraction(coarse_grid, coarse_stepper):
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10):
        F = random_bump_field(coarse_grid, rng, amplitude=0.5)
        iterates = coarse_stepper.picard_iterates(
            F, dt=PICARD_DT_THRESHOLD, n_iter=4)
        diffs = [np.abs(b - a).max() for a, b in zip(iterates, iterates[1:])]
        ratios = [b / a for a, b in zip(diffs, diffs[1:]) if a > 0.0]
        worst = max(worst, max(ratios))
    _report(10, "frozen-time iteration contracts", worst <= 0.5,
            f"worst ratio {worst:.3f} <= 0.5 at dt = {PICARD_DT_THRESHOLD}")


def test_criterion_11_semigroup_exactness():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(100):
        v = rng.uniform(-4.0, 4.0, size=3)
        s = rng.uniform(0.0, 5.0)
        t = s + rng.uniform(0.0, 5.0)
        nu = rng.uniform(0.3, 3.0)
        integral, _ = quad(lambda tau: nu_tilde(v, tau, WP, nu), s, t,
                           epsabs=1e-13, epsrel=1e-13)
        oracle = math.exp(-integral)
        value = float(semigroup_G(nu, v, s, t, WP))
        worst = max(worst, abs(value - oracle) / max(abs(oracle), 1e-300))
    # cocycle identity to round-off
    v = np.array([1.0, -0.5, 2.0])
    cocycle = abs(semigroup_G(0.9, v, 0.3, 4.1, WP)
                  - semigroup_G(0.9, v, 0.3, 2.0, WP)
                  * semigroup_G(0.9, v, 2.0, 4.1, WP))
    ok = worst <= 1e-10 and cocycle <= 1e-14
    _report(11, "closed-form semigroup matches quadrature oracle", ok,
            f"worst rel err {worst:.2e} <= 1e-10, cocycle defect "
            f"{cocycle:.1e}")


def test_criterion_12_determinism(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "model.gamma = -1.0\n"
        "grid.radius = 6.0\n"
        "grid.n_per_dim = 8\n"
        "initial.amplitude = 0.1\n"
        "run.dt = 0.1\n"
        "run.t_end = 0.5\n"
        "run.method = picard\n")
    outs = (tmp_path / "a", tmp_path / "b")
    for out in outs:
        code = cli_main(["simulate", "--config", str(cfg), "--out", str(out),
                         "--no-timestamp"])
        assert code == 0
    same_csv = ((outs[0] / "timeseries.csv").read_bytes()
                == (outs[1] / "timeseries.csv").read_bytes())
    same_json = ((outs[0] / "summary.json").read_bytes()
                 == (outs[1] / "summary.json").read_bytes())
    _report(12, "identical config and seed give byte-identical artifacts",
            same_csv and same_json,
            f"csv identical={same_csv}, json identical={same_json}")
