"""Radiation-reaction models of a charged harmonic oscillator.

Two polarizabilities are provided: the point-charge model with the
third-derivative reaction force, and the finite-size model whose
Lorentzian form factor at the critical cutoff gives a causal response.
"""

__version__ = "0.1.0"

from .causality import crossing_audit, find_poles, kk_reconstruct, kk_sum_rule
from .errors import RadReactError
from .params import FrequencyGrid, PhysicalParams, make_params, preset
from .response import FormFactor, ResponseModel, alpha_ald, alpha_fo, alpha_general, ald_model, fo_model, general_model
from .scattering import optical_theorem_residual, optical_theorem_sweep
from .timedomain import ForceProfile, Trajectory, integrate_ald, integrate_fo, stability_verdict

__all__ = [
    "FormFactor",
    "ForceProfile",
    "FrequencyGrid",
    "PhysicalParams",
    "RadReactError",
    "ResponseModel",
    "Trajectory",
    "__version__",
    "ald_model",
    "alpha_ald",
    "alpha_fo",
    "alpha_general",
    "crossing_audit",
    "find_poles",
    "fo_model",
    "general_model",
    "integrate_ald",
    "integrate_fo",
    "kk_reconstruct",
    "kk_sum_rule",
    "make_params",
    "optical_theorem_residual",
    "optical_theorem_sweep",
    "preset",
    "stability_verdict",
]
