"""Immersed Crouzeix-Raviart finite elements for planar elasticity eigenproblems with interfaces."""

from .driver import CaseConfig, convergence_study, example_case, load_config, run_eigen_case
from .geometry import LevelSet, build_uniform_mesh
from .material import LameField

__all__ = ["CaseConfig", "LameField", "LevelSet", "build_uniform_mesh", "convergence_study",
           "example_case", "load_config", "run_eigen_case"]
