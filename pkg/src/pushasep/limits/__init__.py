"""KPZ scaling limits: Airy functions and kernels, scaling maps, rescaled finite-T kernels."""
from .airy import (airy1_block, airy1_kernel, airy2_block, airy2_kernel, airy_ai_and_derivative,
                   airy_deriv, airy_fn, airy_kernel)
from .rescaled import (ConvergenceRow, convergence_study, flat_limit, flat_window_point,
                       rescaled_flat_kernel, rescaled_step_kernel, step_limit, step_window_point)
from .scaling import (PathGerm, ScalingMap, ScalingParamsFlat, ScalingParamsStep, alpha_of_mu,
                      beta_of_mu, flat_scaling, lattice_floor, solve_mu, step_scaling)

__all__ = [
    "ConvergenceRow", "PathGerm", "ScalingMap", "ScalingParamsFlat", "ScalingParamsStep",
    "airy1_block", "airy1_kernel", "airy2_block", "airy2_kernel", "airy_ai_and_derivative",
    "airy_deriv", "airy_fn", "airy_kernel", "alpha_of_mu", "beta_of_mu", "convergence_study",
    "flat_limit", "flat_scaling", "flat_window_point", "lattice_floor", "rescaled_flat_kernel",
    "rescaled_step_kernel", "solve_mu", "step_limit", "step_scaling", "step_window_point",
]
