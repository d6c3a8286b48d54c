"""Bound states, antibound states and resonances of finitely supported
perturbations of periodic Jacobi operators, and the inverse problem."""

from .background import Background, SheetPoint, build_background
from .instances import random_instance, worked_instance
from .inverse import glm_reconstruct, reconstruct_interpolation, spectral_reconstruct
from .jost import Perturbation, jost_polys, validate_perturbation
from .poly import Poly, roots
from .states import State, all_states, direct_problem

__all__ = [
    "Background",
    "Perturbation",
    "Poly",
    "SheetPoint",
    "State",
    "all_states",
    "build_background",
    "direct_problem",
    "glm_reconstruct",
    "jost_polys",
    "random_instance",
    "reconstruct_interpolation",
    "roots",
    "spectral_reconstruct",
    "validate_perturbation",
    "worked_instance",
]
