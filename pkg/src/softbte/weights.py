"""Time-involved velocity weight, modified frequency and decay exponent."""

from __future__ import annotations

import numpy as np

from .params import ParameterError, WeightParams


def weight(v, t: float, wp: WeightParams):
    """w(v,t) = (1+|v|^2)^beta exp{(q/8)(1 + (1+t)^(-vartheta)) |v|^2}.

    >= 1 everywhere and non-increasing in t (strictly for vartheta > 0,
    v != 0).
    """
    v = np.asarray(v, dtype=float)
    s2 = np.sum(v * v, axis=-1)
    return weight_speed_sq(s2, t, wp)


def weight_speed_sq(speed_sq, t: float, wp: WeightParams):
    s2 = np.asarray(speed_sq, dtype=float)
    expo = (wp.q / 8.0) * (1.0 + (1.0 + t) ** -wp.vartheta) * s2
    return (1.0 + s2) ** wp.beta * np.exp(expo)


def nu_tilde(v, t: float, wp: WeightParams, nu_of_v):
    """Modified collision frequency nu(v) + vartheta q |v|^2 / (8 (1+t)^(vartheta+1))."""
    v = np.asarray(v, dtype=float)
    s2 = np.sum(v * v, axis=-1)
    return (np.asarray(nu_of_v)
            + wp.vartheta * wp.q * s2 / (8.0 * (1.0 + t) ** (wp.vartheta + 1.0)))


def decay_exponent(gamma: float, vartheta: float) -> float:
    """Sub-exponential exponent rho = 1 + (1+vartheta) gamma / (2-gamma).

    On the admissible domain -3 < gamma < 0, 0 <= vartheta < -2/gamma the
    value lies in (0, 1).
    """
    if not -3.0 < gamma < 0.0:
        raise ParameterError(f"gamma must lie in (-3, 0), got {gamma}")
    if not 0.0 <= vartheta < -2.0 / gamma:
        raise ParameterError(
            f"vartheta must lie in [0, -2/gamma) = [0, {-2.0 / gamma}), "
            f"got {vartheta}")
    return 1.0 + (1.0 + vartheta) * gamma / (2.0 - gamma)


def semigroup_G(nu_of_v, v, s: float, t: float, wp: WeightParams):
    """Solution operator G_v(t,s) = exp(-int_s^t nu_tilde(v, tau) d tau).

    The time integral is closed form:
        nu(v)(t-s) + (q|v|^2/8) [(1+s)^(-vartheta) - (1+t)^(-vartheta)],
    which reduces to nu(v)(t-s) when vartheta = 0.
    """
    if s > t:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    v = np.asarray(v, dtype=float)
    s2 = np.sum(v * v, axis=-1)
    if wp.vartheta == 0.0:
        extra = 0.0
    else:
        extra = (wp.q * s2 / 8.0) * ((1.0 + s) ** -wp.vartheta
                                     - (1.0 + t) ** -wp.vartheta)
    return np.exp(-(np.asarray(nu_of_v) * (t - s) + extra))
