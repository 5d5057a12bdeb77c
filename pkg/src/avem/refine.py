"""Doerfler marking and Lambda-admissible refinement by newest-vertex bisection."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping

from .mesh import Mesh, MeshError

logger = logging.getLogger(__name__)

__all__ = ["MarkSet", "RefineReport", "RefineError", "dorfler_mark", "make_admissible", "refine"]


class RefineError(RuntimeError):
    """The completion loop exceeded its iteration cap."""


@dataclass
class MarkSet:
    elements: set[int]
    theta: float


@dataclass
class RefineReport:
    n_marked: int
    n_bisections_marked: int
    n_bisections_completion: int
    lambda_max_after: int


def dorfler_mark(local_indicators: Mapping[int, float], theta: float) -> MarkSet:
    """Greedy Doerfler marking.

    Elements are sorted by indicator (descending, ties by ascending id) and
    the shortest prefix whose sum reaches ``theta`` times the total is kept.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    if not local_indicators:
        raise ValueError("empty indicator map")
    items = sorted(local_indicators.items(), key=lambda kv: (-kv[1], kv[0]))
    if items[-1][1] < 0:
        raise ValueError("indicators must be non-negative")
    total = sum(v for _, v in items)
    target = theta * total
    acc = 0.0
    marked = set()
    for eid, val in items:
        marked.add(eid)
        acc += val
        if acc >= target:
            break
    return MarkSet(marked, theta)


def _select_worst(mesh: Mesh) -> tuple[int, int, tuple[int, int]]:
    lam = mesh.max_index()
    x = min(mesh.nodes_at_index(lam))
    hosts = mesh.hosts(x)
    if not hosts:
        raise MeshError(f"node {x} has index {lam} but no host element")
    eid, side = hosts[0]
    return x, eid, side


def _host_side(mesh: Mesh, eid: int, node: int) -> tuple[int, int]:
    for e, side in mesh.hosts(node):
        if e == eid:
            return side
    raise MeshError(f"node {node} is not a hanging node of element {eid}")


def make_admissible(mesh: Mesh, eid: int, node: int) -> int:
    """Lower the index of ``node`` by bisecting its host element ``eid``.

    Case A (node on the refinement edge) needs one bisection; case B (node on
    a side touching the newest vertex) bisects again the child that still
    carries the node. Returns the number of bisections performed.
    """
    side = _host_side(mesh, eid, node)
    elem = mesh.elements[eid]
    p, q = elem.refinement_edge
    if side == (min(p, q), max(p, q)):
        mesh.bisect(eid)
        return 1
    c1, c2 = mesh.bisect(eid)
    # c1 = (m, nv, p) owns side (nv, p); c2 = (m, q, nv) owns (q, nv)
    nv = elem.newest_vertex
    child = c1 if side == (min(nv, p), max(nv, p)) else c2
    mesh.bisect(child)
    return 2


def refine(mesh: Mesh, marks: MarkSet | set[int], Lambda: int) -> RefineReport:
    """Bisect every marked element once, then restore Lambda-admissibility."""
    if Lambda < 0:
        raise ValueError("Lambda must be non-negative")
    elements = marks.elements if isinstance(marks, MarkSet) else set(marks)
    n_marked = 0
    for eid in sorted(elements):
        # an element can only have been refined earlier in this same call
        if mesh.elements[eid].is_active:
            mesh.bisect(eid)
            n_marked += 1
    n_completion = 0
    cap = 64 * max(mesh.n_active, 1)
    calls = 0
    while mesh.max_index() > Lambda:
        x, eid, _ = _select_worst(mesh)
        n_completion += make_admissible(mesh, eid, x)
        calls += 1
        if calls > cap:
            raise RefineError(f"completion did not terminate after {calls} calls")
    lam = mesh.max_index()
    logger.debug("refine: %d marked, %d completion bisections, Lambda_T=%d",
                 n_marked, n_completion, lam)
    return RefineReport(len(elements), n_marked, n_completion, lam)
