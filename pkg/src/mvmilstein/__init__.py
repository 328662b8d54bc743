"""Taming Milstein schemes for mean-field interacting particle systems.

Simulates N-particle approximations of McKean-Vlasov SDEs whose drift and
diffusion grow superlinearly, using a family of Milstein-type schemes whose
coefficients are modified by bounded taming operators.  Includes the noise
machinery for iterated stochastic integrals, a model zoo, convergence-order
experiments and a JSON-configured CLI.
"""

__version__ = "0.1.0"

from ._kernels import KERNEL
from .brownian import NoiseBlock, chen_aggregate, sample_step_noise
from .engine import (ParticleEnsemble, SchemeConfig, SimulationRecord,
                     interaction_functionals, run_simulation, step_particles)
from .errors import ConfigError, Error, ShapeError
from .experiments import (ConvergenceRecord, divergence_probe, eta_d,
                          fit_order, moment_monitor, run_convergence_study)
from .models import (MeasureView, Model, check_derivatives_fd,
                     check_dissipativity, drift_eval, diffusion_eval,
                     l_rho_eval, l_y_eval, make_model, model_from_preset)
from .taming import (TamingSpec, TamingSlot, gamma_apply, resolve_taming,
                     verify_taming_assumptions)

__all__ = [
    "__version__", "KERNEL",
    "NoiseBlock", "chen_aggregate", "sample_step_noise",
    "ParticleEnsemble", "SchemeConfig", "SimulationRecord",
    "interaction_functionals", "run_simulation", "step_particles",
    "ConfigError", "Error", "ShapeError",
    "ConvergenceRecord", "divergence_probe", "eta_d", "fit_order",
    "moment_monitor", "run_convergence_study",
    "MeasureView", "Model", "check_derivatives_fd", "check_dissipativity",
    "drift_eval", "diffusion_eval", "l_rho_eval", "l_y_eval",
    "make_model", "model_from_preset",
    "TamingSpec", "TamingSlot", "gamma_apply", "resolve_taming",
    "verify_taming_assumptions",
]
