"""Adaptive lowest-order virtual elements on triangular meshes with hanging nodes."""
from .adapt import (AdaptConfig, AdaptRecord, AdaptResult, contraction_monitor, fem_mode,
                    galerkin_loop, h1_like_error)
from .estimator import (DetailVectors, InvariantError, LocalIndicators, estimate, global_estimator,
                        hierarchical_details, internal_residual, jump_residual, local_estimator,
                        oscillation, stab_ratio, stabilization_total)
from .kellogg import KELLOGG, KelloggParams, kellogg_exact, kellogg_grad
from .kernels import BACKEND
from .linsolve import SolverError, SparseSystem, cg_solve
from .mesh import Element, ElementBoundary, Mesh, MeshError, Node, build_initial_mesh
from .problems import ProblemSpec, problem_kellogg, problem_lshape
from .refine import MarkSet, RefineError, RefineReport, dorfler_mark, make_admissible, refine
from .vem import (DofMap, LinearPoly, LocalMatrices, assemble, interpolate_conforming,
                  local_matrices, pi_nabla)

__version__ = "0.1.0"
