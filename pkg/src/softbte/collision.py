"""Bilinear collision operator, perturbative nonlinearity, moments and
entropy functionals.

Field conventions: a velocity field is a flat (M,) array over the grid
nodes; a slab-1d field is (n_x, M) with the spatial torus of volume 1.
F = mu + sqrt(mu) f relates the absolute and perturbation representations,
h = w f the weighted one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import VelocityGrid
from .kernel import FieldResult, gain_bilinear, loss_frequency
from .params import ModelParams
from .weights import WeightParams, weight_speed_sq


class FieldDomainError(ValueError):
    """Field violates a representation invariant (e.g. negative F)."""


@dataclass
class DistributionField:
    """State container: values over (space x) velocity nodes.

    representation is one of 'F' (absolute), 'f' (perturbation),
    'h' (weighted perturbation); layout 'homogeneous' or 'slab-1d'.
    """
    values: np.ndarray
    grid: VelocityGrid
    representation: str = "F"
    layout: str = "homogeneous"
    period: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.layout == "homogeneous":
            if self.values.shape != (self.grid.n_nodes,):
                raise FieldDomainError(
                    f"homogeneous field must have shape ({self.grid.n_nodes},)")
        elif self.layout == "slab-1d":
            if self.values.ndim != 2 or self.values.shape[1] != self.grid.n_nodes:
                raise FieldDomainError(
                    "slab-1d field must have shape (n_x, n_nodes)")
        else:
            raise FieldDomainError(f"unknown layout {self.layout!r}")
        if self.representation not in ("F", "f", "h"):
            raise FieldDomainError(
                f"unknown representation {self.representation!r}")

    @property
    def n_x(self) -> int:
        return 1 if self.layout == "homogeneous" else self.values.shape[0]

    def slices(self):
        """Iterate homogeneous velocity slices (2d view for slab)."""
        if self.layout == "homogeneous":
            yield self.values
        else:
            yield from self.values


def perturbation_from_absolute(F: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    return (F - grid.mu) / grid.sqrt_mu


def absolute_from_perturbation(f: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    return grid.mu + grid.sqrt_mu * f


def weighted_from_perturbation(f: np.ndarray, grid: VelocityGrid, t: float,
                               wp: WeightParams) -> np.ndarray:
    return weight_speed_sq(grid.speed_sq, t, wp) * f


def perturbation_from_weighted(h: np.ndarray, grid: VelocityGrid, t: float,
                               wp: WeightParams) -> np.ndarray:
    return h / weight_speed_sq(grid.speed_sq, t, wp)


# --------------------------------------------------------------------------
# bilinear collision operator
# --------------------------------------------------------------------------

def q_loss(G: np.ndarray, F: np.ndarray, grid: VelocityGrid,
           params: ModelParams) -> np.ndarray:
    """Q-(G, F)(v) = F(v) int int B(v-u, w) G(u) dw du."""
    return np.asarray(F, dtype=float) * loss_frequency(G, grid, params)


def q_gain(G: np.ndarray, F: np.ndarray, grid: VelocityGrid,
           params: ModelParams, **kw) -> FieldResult:
    """Q+(G, F)(v) = int int B(v-u, w) G(u') F(v') dw du."""
    return gain_bilinear(G, F, grid, params, **kw)


def collision_Q(F: np.ndarray, grid: VelocityGrid, params: ModelParams,
                **kw) -> FieldResult:
    """Q(F, F) = Q+ - Q-."""
    gain = q_gain(F, F, grid, params, **kw)
    return FieldResult(gain.values - q_loss(F, F, grid, params), gain.leakage)


def gamma_nl(g: np.ndarray, f: np.ndarray, grid: VelocityGrid,
             params: ModelParams, **kw) -> FieldResult:
    """Quadratic nonlinearity Gamma(g, f) = Q(sqrt(mu) g, sqrt(mu) f)/sqrt(mu)."""
    plus = gamma_plus(g, f, grid, params, **kw)
    return FieldResult(plus.values - gamma_minus(g, f, grid, params),
                       plus.leakage)


def gamma_plus(g: np.ndarray, f: np.ndarray, grid: VelocityGrid,
               params: ModelParams, **kw) -> FieldResult:
    G = grid.sqrt_mu * np.asarray(g, dtype=float)
    F = grid.sqrt_mu * np.asarray(f, dtype=float)
    gain = q_gain(G, F, grid, params, **kw)
    return FieldResult(gain.values / grid.sqrt_mu, gain.leakage)


def gamma_minus(g: np.ndarray, f: np.ndarray, grid: VelocityGrid,
                params: ModelParams) -> np.ndarray:
    G = grid.sqrt_mu * np.asarray(g, dtype=float)
    return np.asarray(f, dtype=float) * loss_frequency(G, grid, params)


# --------------------------------------------------------------------------
# moments and conservation projection
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentVector:
    mass: float
    momentum: np.ndarray
    energy: float

    @classmethod
    def of(cls, F: np.ndarray, grid: VelocityGrid) -> "MomentVector":
        F = np.asarray(F, dtype=float)
        w = grid.weight
        return cls(mass=float(w * F.sum()),
                   momentum=w * F @ grid.nodes,
                   energy=float(w * F @ grid.speed_sq) * 0.5)


def _invariant_basis(grid: VelocityGrid) -> np.ndarray:
    return np.column_stack([np.ones(grid.n_nodes), grid.nodes,
                            grid.speed_sq])


def conservation_project(Q_field: np.ndarray, grid: VelocityGrid,
                         mode: str = "mu-weighted") -> np.ndarray:
    """Zero the five discrete collision moments <psi, Q> for
    psi in {1, v, |v|^2}.

    mode 'mu-weighted' (default) is an oblique projection whose correction
    lies along the Maxwellian-weighted directions mu psi: the correction is
    exponentially localized, so weighted perturbation norms stay bounded.
    mode 'orthogonal' is the plain least-squares projection onto span(psi)
    in the quadrature inner product; it never increases the quadratic mean
    but injects polynomial tails.  Both are idempotent.
    """
    Q_field = np.asarray(Q_field, dtype=float)
    psi = _invariant_basis(grid)
    if mode == "mu-weighted":
        phi = grid.mu[:, None] * psi
    elif mode == "orthogonal":
        phi = psi
    else:
        raise ValueError(f"unknown projection mode {mode!r}")
    gram = psi.T @ phi * grid.weight
    rhs = psi.T @ Q_field * grid.weight
    try:
        coef = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as exc:
        raise FieldDomainError(f"degenerate grid: singular Gram matrix ({exc})")
    return Q_field - phi @ coef


# --------------------------------------------------------------------------
# entropy functionals
# --------------------------------------------------------------------------

def _x_average(values_2d) -> float:
    """Spatial torus integral with volume normalized to 1."""
    return float(np.mean(values_2d))


def relative_entropy(F, grid: VelocityGrid) -> float:
    """E(F) = int int (F/mu ln(F/mu) - F/mu + 1) mu, >= 0.

    The integrand extends continuously by mu at F = 0 nodes
    (a ln a - a + 1 -> 1 as a -> 0+).
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if np.any(F < 0.0):
        raise FieldDomainError("relative entropy requires F >= 0")
    a = F / grid.mu
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(a > 0.0, a * np.log(np.where(a > 0, a, 1.0))
                             - a + 1.0, 1.0)
    per_x = grid.weight * (integrand * grid.mu).sum(axis=1)
    return _x_average(per_x)


def boltzmann_H(F, grid: VelocityGrid) -> float:
    """H(F) = int int F ln F with the 0 ln 0 = 0 convention."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if np.any(F < 0.0):
        raise FieldDomainError("H functional requires F >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(F > 0.0, F * np.log(np.where(F > 0, F, 1.0)), 0.0)
    per_x = grid.weight * integrand.sum(axis=1)
    return _x_average(per_x)


def entropy_l2_split(f, grid: VelocityGrid) -> tuple[float, float]:
    """(A, B) with A = int (1/4)|f|^2 on {|f| <= sqrt(mu)} and
    B = int (sqrt(mu)/4)|f| on {|f| > sqrt(mu)}; A + B <= E(mu + sqrt(mu) f).

    Boundary case |f| = sqrt(mu) goes to the quadratic branch.
    """
    f = np.atleast_2d(np.asarray(f, dtype=float))
    F = grid.mu + grid.sqrt_mu * f
    if np.any(F < -1e-12 * grid.mu.max()):
        raise FieldDomainError("perturbation makes F negative")
    small = np.abs(f) <= grid.sqrt_mu
    A_per_x = grid.weight * np.where(small, 0.25 * f * f, 0.0).sum(axis=1)
    B_per_x = grid.weight * np.where(~small, 0.25 * grid.sqrt_mu * np.abs(f),
                                     0.0).sum(axis=1)
    return _x_average(A_per_x), _x_average(B_per_x)
