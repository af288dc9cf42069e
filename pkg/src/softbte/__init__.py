"""softbte: velocity-grid laboratory for the cutoff soft-potential
Boltzmann equation in the near-Maxwellian perturbation framework."""

from .params import ModelParams, WeightParams, ParameterError
from .grid import VelocityGrid
from .kernel import (maxwellian, collision_frequency, kernel_k1, cutoff_chi,
                     apply_K1, apply_K2, apply_K, apply_K_splits, SphereRule,
                     KernelTable)
from .weights import weight, nu_tilde, decay_exponent, semigroup_G
from .collision import (DistributionField, MomentVector, collision_Q,
                        conservation_project, entropy_l2_split, gamma_nl,
                        q_gain, q_loss, relative_entropy, boltzmann_H)
from .dynamics import (SimulationState, Stepper, TimeSeriesRecord, decay_fit,
                       picard_step, simulate, transport_step)
from .verify import Certificate, run_suite

__version__ = "0.1.0"

__all__ = [
    "ModelParams", "WeightParams", "ParameterError", "VelocityGrid",
    "maxwellian", "collision_frequency", "kernel_k1", "cutoff_chi",
    "apply_K1", "apply_K2", "apply_K", "apply_K_splits", "SphereRule",
    "KernelTable", "weight", "nu_tilde", "decay_exponent", "semigroup_G",
    "DistributionField", "MomentVector", "collision_Q",
    "conservation_project", "entropy_l2_split", "gamma_nl", "q_gain",
    "q_loss", "relative_entropy", "boltzmann_H", "SimulationState",
    "Stepper", "TimeSeriesRecord", "decay_fit", "picard_step", "simulate",
    "transport_step", "Certificate", "run_suite", "__version__",
]
