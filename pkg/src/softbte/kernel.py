"""Collision frequency, linearized kernels and operators K1/K2/K.

The collision kernel is B(v-u, w) = |v-u|^gamma |cos theta| with
-3 < gamma < 0.  The |v-u|^gamma singularity is integrable; on the grid
the self-cell contribution uses the exact radial integral of the kernel
over the ball of the cell's volume times the integrand's center value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from . import _quad
from .params import ModelParams

_MU_NORM = (2.0 * math.pi) ** -1.5
_MU_NORM34 = (2.0 * math.pi) ** -0.75

# default hemisphere product rule (Gauss in cos theta x uniform azimuth)
DEFAULT_N_POLAR = 4
DEFAULT_N_AZIMUTH = 6


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge; carries the residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class SingularPairError(ValueError):
    """Pointwise kernel requested at u = v."""


class FieldResult(NamedTuple):
    values: np.ndarray
    leakage: float


def maxwellian_speed_sq(speed_sq):
    """Global Maxwellian as a function of |v|^2."""
    return _MU_NORM * np.exp(-0.5 * np.asarray(speed_sq))


def maxwellian(v):
    """mu(v) = (2 pi)^(-3/2) exp(-|v|^2 / 2), vectorized over (..., 3)."""
    v = np.asarray(v, dtype=float)
    return maxwellian_speed_sq(np.sum(v * v, axis=-1))


def sqrt_maxwellian(v):
    return np.sqrt(maxwellian(v))


def cutoff_chi(r, params: ModelParams):
    """Smooth cutoff: 0 for r <= eps, 1 for r >= 2 eps, cubic ramp between."""
    r = np.asarray(r, dtype=float)
    eps = params.eps_cutoff
    x = np.clip((r - eps) / eps, 0.0, 1.0)
    out = x * x * (3.0 - 2.0 * x)
    if out.ndim == 0:
        return float(out)
    return out


def kernel_k1(v, u, params: ModelParams):
    """Pointwise symmetric kernel k1(v,u) = 2 pi |v-u|^g sqrt(mu(u) mu(v))."""
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    d = np.linalg.norm(v - u, axis=-1)
    if np.any(d == 0.0):
        raise SingularPairError(
            "k1 is singular at u = v; use the near-diagonal cell-average path")
    return (params.angular_constant * d ** params.gamma
            * np.sqrt(maxwellian(u) * maxwellian(v)))


# --------------------------------------------------------------------------
# collision frequency by exact radial reduction
# --------------------------------------------------------------------------

def _nu_radial_integrand(gamma: float) -> Callable[[float, float], float]:
    """Radial profile of int |v-u|^g mu(u) du about speed s = |v|."""
    if abs(gamma + 2.0) < 1e-12:
        def angular(s, r):
            return math.log((s + r) / abs(s - r)) / (s * r)
    else:
        def angular(s, r):
            g2 = gamma + 2.0
            return ((s + r) ** g2 - abs(s - r) ** g2) / (g2 * s * r)
    return angular


def collision_frequency_speed(speed: float, params: ModelParams,
                              rtol: float = 1e-10) -> float:
    """nu as a function of |v| via the exact angular average of |v-u|^g.

    nu(v) = 2 pi * int |v-u|^g mu(u) du; the inner sphere average is closed
    form, leaving one adaptive radial integral.
    """
    s = float(speed)
    gamma = params.gamma
    upper = s + 45.0
    if s == 0.0:
        val, err = integrate.quad(
            lambda r: r ** (gamma + 2.0) * math.exp(-0.5 * r * r),
            0.0, upper, epsrel=rtol, limit=200)
        nu = params.angular_constant * 4.0 * math.pi * _MU_NORM * val
    else:
        angular = _nu_radial_integrand(gamma)
        val, err = integrate.quad(
            lambda r: r * r * math.exp(-0.5 * r * r) * angular(s, r),
            0.0, upper, epsrel=rtol, limit=400, points=[s] if s < upper else None)
        nu = params.angular_constant * 2.0 * math.pi * _MU_NORM * val
    if not math.isfinite(nu) or err > 1e-6 * max(abs(val), 1.0):
        raise QuadratureError("collision frequency quadrature did not converge",
                              err)
    return nu


def collision_frequency(v, params: ModelParams) -> float:
    """nu(v); rotation invariant, strictly positive."""
    v = np.asarray(v, dtype=float)
    return collision_frequency_speed(float(np.linalg.norm(v)), params)


def nu_on_grid(grid, params: ModelParams) -> np.ndarray:
    """nu at every grid node, deduplicated over the distinct speeds."""
    speeds = np.sqrt(grid.speed_sq)
    uniq, inv = np.unique(np.round(speeds, 12), return_inverse=True)
    table = np.array([collision_frequency_speed(s, params) for s in uniq])
    return table[inv]


# --------------------------------------------------------------------------
# sphere rule and self-cell radial coefficients
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SphereRule:
    """Hemisphere product rule with the |cos theta| factor folded in.

    Exact for the angular constant: sum(weights) = 2 pi.
    """
    cos_nodes: np.ndarray
    weights: np.ndarray      # per cos-node, includes 2 * 2pi/n_azimuth * c * w
    cos_phi: np.ndarray
    sin_phi: np.ndarray

    @staticmethod
    @lru_cache(maxsize=8)
    def build(n_polar: int = DEFAULT_N_POLAR,
              n_azimuth: int = DEFAULT_N_AZIMUTH) -> "SphereRule":
        x, w = np.polynomial.legendre.leggauss(n_polar)
        c = 0.5 * (x + 1.0)          # map to [0, 1]
        w = 0.5 * w
        phi = 2.0 * math.pi * (np.arange(n_azimuth) + 0.5) / n_azimuth
        weights = 2.0 * (2.0 * math.pi / n_azimuth) * w * c
        return SphereRule(c.copy(), weights, np.cos(phi), np.sin(phi))


@lru_cache(maxsize=64)
def _self_cell_coef(gamma: float, h: float, eps: float, chi_mode: int) -> float:
    """int over the equal-volume ball of chi_w(|eta|) |eta|^gamma d eta."""
    rb = (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0) * h
    if chi_mode == _quad.CHI_NONE:
        return 4.0 * math.pi * rb ** (gamma + 3.0) / (gamma + 3.0)

    def w(r):
        x = min(max((r - eps) / eps, 0.0), 1.0)
        chi = x * x * (3.0 - 2.0 * x)
        return chi if chi_mode == _quad.CHI_FAR else 1.0 - chi

    val, _ = integrate.quad(lambda r: w(r) * r ** (gamma + 2.0), 0.0, rb,
                            points=[min(eps, rb), min(2.0 * eps, rb)],
                            limit=200)
    return 4.0 * math.pi * val


_CHI_MODES = {"full": _quad.CHI_NONE, "chi": _quad.CHI_FAR,
              "one-minus-chi": _quad.CHI_NEAR}


def _n_threads() -> int:
    import numba
    return numba.get_num_threads()


# --------------------------------------------------------------------------
# operator applications
# --------------------------------------------------------------------------

def pairwise_convolution(g: np.ndarray, grid, params: ModelParams,
                         chi_mode: str = "full") -> np.ndarray:
    """v -> int chi_w(|v-u|) |v-u|^gamma g(u) du by grid quadrature.

    Angular constant not included; the |v-u|^gamma singularity at the
    diagonal uses the cell-ball radial average.
    """
    mode = _CHI_MODES[chi_mode]
    g = np.ascontiguousarray(np.asarray(g, dtype=float))
    self_coef = _self_cell_coef(params.gamma, grid.h, params.eps_cutoff, mode)
    buf = np.zeros((_n_threads(), grid.n_nodes))
    _quad.pairwise_gamma_sum(g, grid.nodes, grid.weight, params.gamma,
                             params.eps_cutoff, mode, self_coef, buf)
    return buf.sum(axis=0)


def apply_K1(f: np.ndarray, grid, params: ModelParams,
             chi_mode: str = "full") -> np.ndarray:
    """K1 f(v) = sqrt(mu(v)) * 2 pi * int chi_w |v-u|^g sqrt(mu(u)) f(u) du."""
    g = grid.sqrt_mu * np.asarray(f, dtype=float)
    conv = pairwise_convolution(g, grid, params, chi_mode=chi_mode)
    return params.angular_constant * grid.sqrt_mu * conv


def apply_K2(f: np.ndarray, grid, params: ModelParams,
             chi_mode: str = "full", sphere: SphereRule | None = None,
             interp_order: int = 3, prune_tol: float = 1e-13) -> FieldResult:
    """Gain part K2 of the linearized operator, by (u, omega) quadrature."""
    mode = _CHI_MODES[chi_mode]
    if sphere is None:
        sphere = SphereRule.build()
    f_flat = np.ascontiguousarray(np.asarray(f, dtype=float))
    f3 = np.ascontiguousarray(grid.field3d(f_flat))
    nt = _n_threads()
    out_buf = np.zeros((nt, grid.n_nodes))
    leak_buf = np.zeros((nt, grid.n_nodes))
    self_coef = _self_cell_coef(params.gamma, grid.h, params.eps_cutoff, mode)
    _quad.k2_apply(f_flat, f3, grid.nodes, grid.speed_sq, grid.sqrt_mu,
                   grid.weight, params.gamma, params.eps_cutoff, mode,
                   prune_tol, self_coef, _MU_NORM34, sphere.weights,
                   sphere.cos_nodes, sphere.cos_phi, sphere.sin_phi,
                   grid.n_per_dim, grid.radius, grid.h, interp_order,
                   out_buf, leak_buf)
    return FieldResult(out_buf.sum(axis=0), float(leak_buf.sum()))


def gain_bilinear(G: np.ndarray, F: np.ndarray, grid, params: ModelParams,
                  sphere: SphereRule | None = None, interp_order: int = 3,
                  prune_rel: float = 1e-14) -> FieldResult:
    """Q+(G, F)(v) = int int B(v-u, w) G(u') F(v') dw du."""
    if sphere is None:
        sphere = SphereRule.build()
    G_flat = np.ascontiguousarray(np.asarray(G, dtype=float))
    F_flat = np.ascontiguousarray(np.asarray(F, dtype=float))
    same = G_flat is F_flat or np.array_equal(G_flat, F_flat)
    G3 = np.ascontiguousarray(grid.field3d(G_flat))
    F3 = G3 if same else np.ascontiguousarray(grid.field3d(F_flat))
    prune_g = prune_rel * float(np.max(np.abs(G_flat)))
    prune_f = prune_rel * float(np.max(np.abs(F_flat)))
    nt = _n_threads()
    out_buf = np.zeros((nt, grid.n_nodes))
    leak_buf = np.zeros((nt, grid.n_nodes))
    self_coef = _self_cell_coef(params.gamma, grid.h, params.eps_cutoff,
                                _quad.CHI_NONE)
    _quad.gain_apply(G3, F3, G_flat, F_flat, grid.nodes, grid.weight,
                     params.gamma, prune_g, prune_f, same, self_coef,
                     sphere.weights, sphere.cos_nodes, sphere.cos_phi,
                     sphere.sin_phi, grid.n_per_dim, grid.radius, grid.h,
                     interp_order, out_buf, leak_buf)
    return FieldResult(out_buf.sum(axis=0), float(leak_buf.sum()))


def loss_frequency(G: np.ndarray, grid, params: ModelParams) -> np.ndarray:
    """I_G(v) = int int B(v-u, w) G(u) dw du = 2 pi int |v-u|^g G(u) du."""
    conv = pairwise_convolution(np.asarray(G, dtype=float), grid, params)
    return params.angular_constant * conv


def apply_K(f: np.ndarray, grid, params: ModelParams,
            chi_mode: str = "full", **kw) -> FieldResult:
    """K f = K2 f - K1 f; annihilates the collision invariants times sqrt(mu)
    together with the multiplication by nu, up to discretization."""
    k2 = apply_K2(f, grid, params, chi_mode=chi_mode, **kw)
    k1 = apply_K1(f, grid, params, chi_mode=chi_mode)
    return FieldResult(k2.values - k1, k2.leakage)


def apply_K_splits(f: np.ndarray, grid, params: ModelParams,
                   **kw) -> tuple[FieldResult, FieldResult]:
    """(K^chi f, K^(1-chi) f); the two parts sum to K f by construction."""
    far = apply_K(f, grid, params, chi_mode="chi", **kw)
    near = apply_K(f, grid, params, chi_mode="one-minus-chi", **kw)
    return far, near


# --------------------------------------------------------------------------
# kernel table
# --------------------------------------------------------------------------

@dataclass
class KernelTable:
    """Precomputed k1 and chi over node pairs of a (small) grid.

    k2 has no closed pointwise form here; it is realized as the operator
    apply_K2 and its bounds are checked at operator level on bump inputs.
    The diagonal entry of k1 stores the near-diagonal cell-averaged value
    of the |v-u|^gamma factor instead of the (infinite) pointwise one.
    """
    k1: np.ndarray
    chi: np.ndarray
    diag_correction: float

    MAX_NODES = 4096

    @classmethod
    def build(cls, grid, params: ModelParams) -> "KernelTable":
        if grid.n_nodes > cls.MAX_NODES:
            raise MemoryError(
                f"KernelTable is dense; grid has {grid.n_nodes} nodes "
                f"(limit {cls.MAX_NODES})")
        d = np.linalg.norm(grid.nodes[:, None, :] - grid.nodes[None, :, :],
                           axis=-1)
        chi = cutoff_chi(d, params)
        rg = np.where(d > 0.0, d, 1.0) ** params.gamma
        diag = _self_cell_coef(params.gamma, grid.h, params.eps_cutoff,
                               _quad.CHI_NONE) / grid.weight
        np.fill_diagonal(rg, diag)
        k1 = (params.angular_constant * rg
              * np.sqrt(np.outer(grid.mu, grid.mu)))
        return cls(k1=k1, chi=np.asarray(chi), diag_correction=diag)
