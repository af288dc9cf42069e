"""Time evolution and decay-rate measurement.

The production stepper composes periodic transport with a semi-implicit
collision update whose gain is explicit and loss implicit,

    F <- [F + dt (Q+(F,F) - D)] / [1 + dt I_F],
    I_F(v) = int int B(v-u, w) F(u) dw du,

which preserves nonnegativity by construction.  D is an optional
well-balancing defect (the discrete residual of the gain/loss balance at
the global Maxwellian) making mu an exact fixed point of the scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .collision import (MomentVector, conservation_project, boltzmann_H,
                        entropy_l2_split, perturbation_from_absolute, q_gain,
                        relative_entropy, weighted_from_perturbation)
from .grid import VelocityGrid
from .kernel import SphereRule, loss_frequency, nu_on_grid
from .params import ModelParams, WeightParams


class SimulationError(RuntimeError):
    pass


class FitDegenerateError(RuntimeError):
    """Decay fit requested on non-decaying data."""


# --------------------------------------------------------------------------
# transport
# --------------------------------------------------------------------------

def transport_step(values: np.ndarray, grid: VelocityGrid, dt: float,
                   layout: str = "homogeneous", period: float = 1.0) -> np.ndarray:
    """Free transport x -> x - v_x dt on the periodic slab by spectral shift.

    Homogeneous fields are returned unchanged.  Mass per velocity slice is
    conserved to round-off (the k = 0 Fourier mode is untouched).
    """
    if layout == "homogeneous":
        return values
    n_x = values.shape[0]
    k = np.fft.rfftfreq(n_x, d=period / n_x) * 2.0 * math.pi
    vx = grid.nodes[:, 0]
    phase = np.exp(-1j * np.outer(k, vx) * dt)
    spec = np.fft.rfft(values, axis=0) * phase
    if n_x % 2 == 0:
        # The Nyquist mode has no phase consistent with a real shifted
        # field; filtering it keeps step composition exact.
        spec[-1] = 0.0
    return np.fft.irfft(spec, n=n_x, axis=0)


# --------------------------------------------------------------------------
# stepper
# --------------------------------------------------------------------------

@dataclass
class Stepper:
    """Shared immutable context for the semi-implicit collision stepper."""
    grid: VelocityGrid
    model: ModelParams
    sphere: SphereRule | None = None
    well_balanced: bool = True
    project: bool = True
    inner_iterations: int = 1
    _defect: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 1 <= self.inner_iterations <= 5:
            raise SimulationError("inner_iterations must be in [1, 5]")
        if self.sphere is None:
            self.sphere = SphereRule.build()

    @property
    def defect(self) -> np.ndarray:
        """Discrete residual Q+(mu,mu) - mu I_mu of the equilibrium balance."""
        if self._defect is None:
            gain = q_gain(self.grid.mu, self.grid.mu, self.grid, self.model,
                          sphere=self.sphere)
            self._defect = gain.values - self.grid.mu * loss_frequency(
                self.grid.mu, self.grid, self.model)
        return self._defect

    def collision_update(self, F: np.ndarray, dt: float):
        """One semi-implicit collision update of a velocity slice.

        Returns (F_new, leakage, clipped_mass).
        """
        if dt <= 0.0:
            raise SimulationError(f"dt must be positive, got {dt}")
        F0 = F
        Fn = F
        leak = 0.0
        for _ in range(self.inner_iterations):
            gain = q_gain(Fn, Fn, self.grid, self.model, sphere=self.sphere)
            leak += gain.leakage
            gv = gain.values
            if self.well_balanced:
                gv = gv - self.defect
            I = loss_frequency(Fn, self.grid, self.model)
            Fn = (F0 + dt * np.maximum(gv, 0.0)) / (1.0 + dt * I)
        clipped = 0.0
        if self.project:
            dF = conservation_project(Fn - F0, self.grid)
            Fn = F0 + dF
            neg = Fn < 0.0
            if np.any(neg):
                clipped = -float(self.grid.weight * Fn[neg].sum())
                Fn = np.maximum(Fn, 0.0)
        return Fn, leak, clipped

    def picard_iterates(self, F: np.ndarray, dt: float, n_iter: int):
        """Frozen-time iterates F^(n+1) = [F + dt Q+(F^n,F^n)]/[1 + dt I_n].

        Returns the list [F^0=F, F^1, ..., F^n]; used to measure the
        contraction of the local-existence iteration.
        """
        iterates = [F]
        Fn = F
        for _ in range(n_iter):
            gain = q_gain(Fn, Fn, self.grid, self.model, sphere=self.sphere)
            I = loss_frequency(Fn, self.grid, self.model)
            Fn = (F + dt * gain.values) / (1.0 + dt * I)
            iterates.append(Fn)
        return iterates


# --------------------------------------------------------------------------
# state and record
# --------------------------------------------------------------------------

@dataclass
class SimulationState:
    t: float
    values: np.ndarray            # F-absolute, (M,) or (n_x, M)
    grid: VelocityGrid
    model: ModelParams
    weights: WeightParams
    layout: str = "homogeneous"
    period: float = 1.0
    nu: np.ndarray | None = None
    steps: int = 0
    leakage: float = 0.0
    clipped_mass: float = 0.0

    def __post_init__(self):
        if self.nu is None:
            self.nu = nu_on_grid(self.grid, self.model)

    def perturbation(self) -> np.ndarray:
        return perturbation_from_absolute(self.values, self.grid)

    def weighted(self) -> np.ndarray:
        return weighted_from_perturbation(self.perturbation(), self.grid,
                                          self.t, self.weights)


COLUMNS = ("t", "h_sup", "f_l2", "mass", "mom_x", "mom_y", "mom_z",
           "energy", "H", "rel_entropy", "leakage")


@dataclass
class TimeSeriesRecord:
    rows: list = field(default_factory=list)
    unstable: bool = False

    def append(self, state: SimulationState):
        f = state.perturbation()
        h = state.weighted()
        F2 = np.atleast_2d(state.values)
        mom = MomentVector.of(F2.mean(axis=0), state.grid)
        f_l2 = math.sqrt(state.grid.weight * float(np.mean(
            np.sum(np.atleast_2d(f) ** 2, axis=1))))
        if np.all(F2 >= 0.0) and np.all(np.isfinite(F2)):
            split_A, split_B = entropy_l2_split(f, state.grid)
            H = boltzmann_H(state.values, state.grid)
            rel_ent = relative_entropy(state.values, state.grid)
        else:
            # diverging states fall outside the entropy domain; keep the
            # row so the driver can flag the run instead of crashing
            split_A = split_B = H = rel_ent = math.nan
        self.rows.append({
            "t": state.t,
            "h_sup": float(np.max(np.abs(h))),
            "f_l2": f_l2,
            "mass": mom.mass,
            "mom_x": float(mom.momentum[0]),
            "mom_y": float(mom.momentum[1]),
            "mom_z": float(mom.momentum[2]),
            "energy": mom.energy,
            "H": H,
            "rel_entropy": rel_ent,
            "leakage": state.leakage,
            "split_A": split_A,
            "split_B": split_B,
        })

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def __len__(self):
        return len(self.rows)


# --------------------------------------------------------------------------
# steps
# --------------------------------------------------------------------------

def picard_step(state: SimulationState, dt: float, stepper: Stepper
                ) -> SimulationState:
    """Transport over dt followed by the semi-implicit collision update."""
    values = transport_step(state.values, state.grid, dt, state.layout,
                            state.period)
    if state.layout == "homogeneous":
        values, leak, clip = stepper.collision_update(values, dt)
    else:
        out = np.empty_like(values)
        leak = clip = 0.0
        for ix in range(values.shape[0]):
            out[ix], lk, cl = stepper.collision_update(values[ix], dt)
            leak += lk
            clip += cl
        values = out
    if np.any(values < 0.0):
        raise SimulationError("stepper produced a negative value")
    return SimulationState(
        t=state.t + dt, values=values, grid=state.grid, model=state.model,
        weights=state.weights, layout=state.layout, period=state.period,
        nu=state.nu, steps=state.steps + 1,
        leakage=state.leakage + leak, clipped_mass=state.clipped_mass + clip)


def evolve_h_form(state: SimulationState, dt: float, stepper: Stepper,
                  linear_only: bool = False) -> SimulationState:
    """Alternative stepper in the weighted variable h = w f.

    The stiff nu-tilde relaxation uses the exact closed-form semigroup;
    K_w h and w Gamma(f, f) are explicit.  With ``linear_only`` both are
    switched off and the step is the pure closed-form decay (used as an
    exactness oracle).
    """
    from .kernel import apply_K
    from .collision import conservation_project, gamma_nl
    from .weights import semigroup_G, weight_speed_sq

    if dt <= 0.0:
        raise SimulationError(f"dt must be positive, got {dt}")
    grid = state.grid
    wvals = weight_speed_sq(grid.speed_sq, state.t, state.weights)
    G = semigroup_G(state.nu, grid.nodes, state.t, state.t + dt, state.weights)

    f2 = np.atleast_2d(state.perturbation())
    h2 = wvals * f2
    h2 = np.atleast_2d(transport_step(h2 if state.layout == "slab-1d" else h2,
                                      grid, dt, state.layout, state.period))
    out = np.empty_like(h2)
    leak = 0.0
    for ix in range(h2.shape[0]):
        h = h2[ix]
        if linear_only:
            out[ix] = G * h
            continue
        f = h / wvals
        K = apply_K(f, grid, state.model, sphere=stepper.sphere)
        Gm = gamma_nl(f, f, grid, state.model, sphere=stepper.sphere)
        leak += K.leakage + Gm.leakage
        rhs = wvals * (K.values + Gm.values)
        out[ix] = G * (h + dt * rhs)
    # the propagator G advances h = w f, so recover f with the weight at
    # the *new* time; dividing by the old weight would add spurious
    # large-speed damping
    wnew = weight_speed_sq(grid.speed_sq, state.t + dt, state.weights)
    fnew = out / wnew
    if stepper.project:
        # Hold the discrete invariant moments of F = mu + sqrt(mu) f at
        # zero perturbation; the discrete collision operator does not
        # annihilate them exactly, and the residual modes do not decay.
        for ix in range(fnew.shape[0]):
            fnew[ix] = conservation_project(grid.sqrt_mu * fnew[ix],
                                            grid) / grid.sqrt_mu
    Fnew = grid.mu + grid.sqrt_mu * (fnew[0] if state.layout == "homogeneous"
                                     else fnew)
    return SimulationState(
        t=state.t + dt, values=Fnew, grid=grid, model=state.model,
        weights=state.weights, layout=state.layout, period=state.period,
        nu=state.nu, steps=state.steps + 1, leakage=state.leakage + leak,
        clipped_mass=state.clipped_mass)


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------

def simulate(initial: SimulationState, dt: float, t_end: float,
             stepper: Stepper, method: str = "picard",
             instability_factor: float = 1e3,
             record_every: int = 1) -> TimeSeriesRecord:
    """Run the stepper to t_end, recording diagnostics each step.

    Deterministic given the initial state and options.  Aborts with a
    partially filled record flagged unstable when the weighted sup-norm
    grows beyond instability_factor times its initial value.
    """
    record = TimeSeriesRecord()
    record.append(initial)
    # equilibrium starts have h ~ roundoff; suppress the relative growth
    # check below an absolute floor (non-finite values still abort)
    h0 = max(record.rows[0]["h_sup"], 1e-8)
    state = initial
    n_steps = int(round(t_end / dt)) if t_end > 0 else 0
    step_fn = picard_step if method == "picard" else evolve_h_form
    for k in range(n_steps):
        state = step_fn(state, dt, stepper)
        if (k + 1) % record_every == 0 or k == n_steps - 1:
            record.append(state)
        h_now = record.rows[-1]["h_sup"]
        if not math.isfinite(h_now) or h_now > instability_factor * h0:
            record.unstable = True
            break
    return record


# --------------------------------------------------------------------------
# initial data
# --------------------------------------------------------------------------

def match_moments_to_mu(F: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """Correct F so its discrete invariant moments equal those of the grid
    Maxwellian, then clip at zero."""
    delta = F - grid.mu
    delta = conservation_project(delta, grid)
    return np.maximum(grid.mu + delta, 0.0)


def radial_bump_field(grid: VelocityGrid, amplitude: float, mode: int = 1,
                      match: bool = True) -> np.ndarray:
    """F = mu (1 + a cos(m pi |v| / R)), optionally moment-matched."""
    r = np.sqrt(grid.speed_sq)
    F = grid.mu * (1.0 + amplitude * np.cos(mode * math.pi * r / grid.radius))
    F = np.maximum(F, 0.0)
    return match_moments_to_mu(F, grid) if match else F


def random_bump_field(grid: VelocityGrid, rng: np.random.Generator,
                      amplitude: float = 0.5, n_bumps: int = 3,
                      match: bool = True) -> np.ndarray:
    """mu times (1 + sum of random Gaussian bumps), clipped and matched."""
    g = np.zeros(grid.n_nodes)
    for _ in range(n_bumps):
        center = rng.uniform(-2.0, 2.0, size=3)
        width = rng.uniform(0.6, 1.6)
        amp = amplitude * rng.uniform(-1.0, 1.0)
        d2 = np.sum((grid.nodes - center) ** 2, axis=1)
        g += amp * np.exp(-d2 / (2.0 * width * width))
    F = np.maximum(grid.mu * (1.0 + g), 0.0)
    return match_moments_to_mu(F, grid) if match else F


def shifted_maxwellian_field(grid: VelocityGrid, temperature: float
                             ) -> np.ndarray:
    if temperature <= 0:
        raise SimulationError("temperature must be positive")
    s2 = grid.speed_sq
    return (2.0 * math.pi * temperature) ** -1.5 * np.exp(-0.5 * s2 / temperature)


# --------------------------------------------------------------------------
# decay fit
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    lam: float
    rho_est: float
    r2: float
    lam_constrained: float
    r2_constrained: float
    n_points: int


def _stretched_exp_lsq(t: np.ndarray, y: np.ndarray, p: float):
    """Least squares of y = a - lam * t^p; returns (a, lam, ss_res)."""
    X = np.column_stack([np.ones_like(t), -t ** p])
    coef, res, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    return coef[0], coef[1], float(resid @ resid)


def decay_fit(record: TimeSeriesRecord, rho_hint: float,
              fit_window: float = 0.2) -> DecayFit:
    """Fit ln ||h||_inf = a - lam t^rho over the tail of the record.

    The first ``fit_window`` fraction of rows is discarded as transient.
    Returns both the free fit (rho optimized) and the fit constrained to
    rho = rho_hint.
    """
    t = record.column("t")
    y = np.log(record.column("h_sup"))
    if len(t) < 20:
        raise FitDegenerateError(f"need >= 20 rows, got {len(t)}")
    start = int(len(t) * fit_window)
    t, y = t[start:], y[start:]
    keep = t > 0
    t, y = t[keep], y[keep]
    if y[-1] >= y[0]:
        raise FitDegenerateError("record does not decay over the fit window")
    ss_tot = float(np.sum((y - y.mean()) ** 2))

    def objective(p):
        return _stretched_exp_lsq(t, y, p)[2]

    opt = optimize.minimize_scalar(objective, bounds=(0.05, 2.5),
                                   method="bounded",
                                   options={"xatol": 1e-12})
    _, lam_free, ss_free = _stretched_exp_lsq(t, y, float(opt.x))
    _, lam_c, ss_c = _stretched_exp_lsq(t, y, rho_hint)
    return DecayFit(
        lam=float(lam_free), rho_est=float(opt.x),
        r2=1.0 - ss_free / ss_tot if ss_tot > 0 else 1.0,
        lam_constrained=float(lam_c),
        r2_constrained=1.0 - ss_c / ss_tot if ss_tot > 0 else 1.0,
        n_points=len(t))
