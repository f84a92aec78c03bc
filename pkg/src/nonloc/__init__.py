"""Conforming DG finite elements for nonlocal diffusion with approximate balls."""
from .kernels import Kernel, make_kernel, moment_functions, lambda_order
from .geometry import NeighborhoodPolicy, clip_ball_triangle
from .mesh import build_consistent_mesh, build_nonconsistent_mesh, build_grid_1d, classify_nodes
from .assembly import ProblemSpec, assemble_cdg_2d, assemble_cdg_1d
from .analysis import (cg_solve, error_energy, error_energy_interp, error_l2, error_max_nodes,
                       sigma_moments)

__version__ = "0.1.0"
