"""Correlation kernels along space-like paths."""
from .flat import (FlatKernel, correction_decay_rate, finite_flat_kernel, flat_correction, flat_correction_majorant,
                   flat_kappa, kernel_flat, phi_flat, psi_flat)
from .general import GeneralKernel, KernelSpec, kernel_general
from .step import StepKernel, kernel_step, phi_step, psi_step

__all__ = [
    "FlatKernel", "GeneralKernel", "KernelSpec", "StepKernel", "correction_decay_rate", "finite_flat_kernel",
    "flat_correction", "flat_correction_majorant", "flat_kappa", "kernel_flat",
    "kernel_general", "kernel_step", "phi_flat", "phi_step", "psi_flat", "psi_step",
]
