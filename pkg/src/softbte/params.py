"""Model and weight parameter containers with domain validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class ParameterError(ValueError):
    """A parameter falls outside its admissible domain."""


@dataclass(frozen=True)
class ModelParams:
    """Collision-kernel parameters.

    The kernel is B(v-u, w) = |v-u|^gamma * q0(theta) with soft-potential
    exponent -3 < gamma < 0 and the bounded angular factor q0(theta) =
    |cos theta|, whose sphere integral is 2*pi.  ``eps_cutoff`` controls
    the smooth near-diagonal cutoff chi(|v-u|), which vanishes for
    |v-u| <= eps and equals one for |v-u| >= 2*eps.
    """

    gamma: float
    angular_model: str = "abs-cos"
    eps_cutoff: float = 0.1
    cutoff_shape: str = "cubic-smoothstep"

    def __post_init__(self):
        if not -3.0 < self.gamma < 0.0:
            raise ParameterError(
                f"gamma must satisfy -3 < gamma < 0, got {self.gamma}")
        if self.angular_model != "abs-cos":
            raise ParameterError(
                f"unknown angular_model {self.angular_model!r} (only 'abs-cos')")
        if not 0.0 < self.eps_cutoff < 1.0:
            raise ParameterError(
                f"eps_cutoff must lie in (0, 1), got {self.eps_cutoff}")
        if self.cutoff_shape != "cubic-smoothstep":
            raise ParameterError(
                f"unknown cutoff_shape {self.cutoff_shape!r} (only 'cubic-smoothstep')")

    @property
    def angular_constant(self) -> float:
        """Integral of q0 over the unit sphere; 2*pi for q0 = |cos theta|."""
        return 2.0 * math.pi


@dataclass(frozen=True)
class WeightParams:
    """Parameters of the time-involved velocity weight.

    w(v, t) = (1+|v|^2)^beta * exp{(q/8) * (1 + (1+t)^(-vartheta)) * |v|^2}

    ``s0`` is only used when certifying kernel bounds; it must satisfy
    q < s0 < 1.  ``vartheta`` is validated against gamma when a companion
    ModelParams is supplied: 0 <= vartheta < -2/gamma.
    """

    q: float
    vartheta: float
    beta: float = 3.5
    s0: float | None = None

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ParameterError(f"q must lie in (0, 1), got {self.q}")
        if self.vartheta < 0.0:
            raise ParameterError(f"vartheta must be >= 0, got {self.vartheta}")
        if self.beta < 3.5:
            raise ParameterError(f"beta must be >= 7/2, got {self.beta}")
        if self.s0 is None:
            object.__setattr__(self, "s0", 0.5 * (1.0 + self.q))
        if not self.q < self.s0 < 1.0:
            raise ParameterError(
                f"s0 must satisfy q < s0 < 1, got q={self.q}, s0={self.s0}")

    def validate_against(self, model: ModelParams) -> None:
        """Check the coupling condition vartheta < -2/gamma."""
        limit = -2.0 / model.gamma
        if not self.vartheta < limit:
            raise ParameterError(
                f"vartheta must satisfy vartheta < -2/gamma = {limit}, "
                f"got vartheta={self.vartheta}")
