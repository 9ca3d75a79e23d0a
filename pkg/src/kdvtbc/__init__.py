"""Linearized KdV-BBM on a finite interval with discrete transparent boundaries."""
from .asymptotic import assemble_general_kernels, assemble_lkdv_kernels, asymptotic_kernels
from .diagnostics import RunReport, convergence_table, decay_fit, discrete_energy, relative_l2_error
from .kernels import Kernels, exact_kernels, extend_kernels, kernels_from_csv, kernels_to_csv
from .model import Grid, ModelParams, ParameterError, derive_ratios, sample_initial
from .reference import SpectralConfig, reference_airy, reference_spectral, spectral_propagator
from .scheme import assemble, run, step

__all__ = [
    "Grid", "ModelParams", "ParameterError", "derive_ratios", "sample_initial",
    "Kernels", "exact_kernels", "extend_kernels", "kernels_from_csv", "kernels_to_csv",
    "assemble_general_kernels", "assemble_lkdv_kernels", "asymptotic_kernels",
    "assemble", "run", "step",
    "SpectralConfig", "reference_airy", "reference_spectral", "spectral_propagator",
    "RunReport", "convergence_table", "decay_fit", "discrete_energy", "relative_l2_error",
]
