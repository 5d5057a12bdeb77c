"""Benchmark problem definitions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .kellogg import KELLOGG, kellogg_grad, kellogg_grad_norm, kellogg_u
from .mesh import Mesh, build_initial_mesh

__all__ = ["ProblemSpec", "problem_lshape", "problem_kellogg", "get_problem", "PROBLEMS"]


@dataclass
class ProblemSpec:
    """Initial mesh factory plus optional exact solution.

    ``make_mesh`` returns a fresh mesh every call so runs never share state.
    ``exact_u`` also provides the Dirichlet trace; None means homogeneous data.
    """

    name: str
    make_mesh: Callable[[], Mesh]
    domain_area: float
    exact_u: Optional[Callable] = None
    exact_grad: Optional[Callable] = None
    grad_norm: Optional[float] = None
    info: dict = field(default_factory=dict)


def _lshape_mesh() -> Mesh:
    V = [(-1, -1), (0, -1), (-1, 0), (0, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]
    T = [(0, 1, 3), (0, 3, 2), (2, 3, 6), (2, 6, 5), (3, 4, 7), (3, 7, 6)]
    data = [((1.0, 0.0, 1.0), 0.0, 1.0)] * len(T)
    return build_initial_mesh(V, T, "longest_edge", data)


def problem_lshape() -> ProblemSpec:
    """(-1,1)^2 minus [0,1]x[-1,0]; A = I, c = 0, f = 1, homogeneous Dirichlet data."""
    return ProblemSpec("lshape", _lshape_mesh, 3.0)


def _kellogg_mesh() -> Mesh:
    V = [(0, 0), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]
    # one triangle per octant, all sharing the origin
    T = [(0, k, k % 8 + 1) for k in range(1, 9)]
    data = []
    for t in T:
        cx = sum(V[i][0] for i in t) / 3
        cy = sum(V[i][1] for i in t) / 3
        a = KELLOGG.a if cx * cy > 0 else 1.0
        data.append(((a, 0.0, a), 0.0, 0.0))
    return build_initial_mesh(V, T, "longest_edge", data)


def problem_kellogg() -> ProblemSpec:
    """Checkerboard coefficients on (-1,1)^2 with the exact singular solution as boundary data."""
    return ProblemSpec("kellogg", _kellogg_mesh, 4.0, kellogg_u, kellogg_grad,
                       kellogg_grad_norm(), {"singular_point": (0.0, 0.0)})


PROBLEMS = {"lshape": problem_lshape, "kellogg": problem_kellogg}


def get_problem(name: str) -> ProblemSpec:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
