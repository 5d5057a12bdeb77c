"""The adaptive SOLVE -> ESTIMATE -> MARK -> REFINE loop and its monitors."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .estimator import InvariantError, estimate, stab_ratio
from .linsolve import cg_solve
from .mesh import Mesh
from .quadrature import map_rule, red_refine
from .refine import dorfler_mark, refine
from .vem import assemble, assemble_full

logger = logging.getLogger(__name__)

__all__ = [
    "AdaptConfig",
    "AdaptRecord",
    "AdaptResult",
    "galerkin_loop",
    "h1_like_error",
    "contraction_monitor",
    "fem_mode",
    "prolong",
]


@dataclass(frozen=True)
class AdaptConfig:
    theta: float = 0.5
    Lambda: int = 10
    gamma: float = 1.0
    eps: Optional[float] = None
    nmax: Optional[int] = None
    cg_tol: float = 1e-10
    problem: str = ""
    max_iter: int = 10_000
    # empirical guard on gamma^2 S / eta^2
    ratio_guard: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.Lambda < 0:
            raise ValueError("Lambda must be non-negative")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.eps is None and self.nmax is None:
            raise ValueError("configure at least one stopping rule (eps or nmax)")
        if self.eps is not None and not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.nmax is not None and self.nmax < 1:
            raise ValueError("nmax must be positive")


@dataclass
class AdaptRecord:
    iter: int
    n_dofs: int
    n_elements: int
    n_vertices: int
    lambda_max: int
    eta2: float
    S_T: float
    ratio: float
    h1_like_error: Optional[float] = None
    contraction: Optional[float] = None
    cg_iterations: int = 0


@dataclass
class AdaptResult:
    mesh: Mesh
    u: np.ndarray
    records: list[AdaptRecord]
    beta: Optional[float] = None
    audits: list[dict] = field(default_factory=list)


def fem_mode(config: AdaptConfig) -> AdaptConfig:
    """Same loop with Lambda = 0, i.e. conforming P1 finite elements."""
    return replace(config, Lambda=0)


def prolong(mesh: Mesh, u_old, n_old: int, trace: Callable | None = None) -> np.ndarray:
    """Extend nodal values to nodes created since the old mesh had ``n_old`` nodes.

    New nodes are midpoints of old skeleton segments (or of newer nodes, which
    have smaller ids than their children), so linear evaluation is the mean of
    the parents. Boundary nodes take the exact trace when one is given.
    """
    u = np.empty(mesh.n_nodes)
    u[:n_old] = u_old[:n_old]
    for x in range(n_old, mesh.n_nodes):
        a, b = mesh.nodes[x].parents
        u[x] = 0.5 * (u[a] + u[b])
    if trace is not None:
        bnd = np.nonzero(mesh.boundary_mask()[n_old:])[0] + n_old
        if len(bnd):
            X = mesh.coords_array()[bnd]
            u[bnd] = trace(X[:, 0], X[:, 1])
    return u


def _dirichlet_values(mesh: Mesh, trace: Callable | None) -> np.ndarray | None:
    if trace is None:
        return None
    g = np.zeros(mesh.n_nodes)
    bnd = np.nonzero(mesh.boundary_mask())[0]
    X = mesh.coords_array()[bnd]
    g[bnd] = trace(X[:, 0], X[:, 1])
    return g


def h1_like_error(mesh: Mesh, u, grad_exact: Callable, norm_exact: float, disc=None,
                  singular_point=None, fan=None) -> float:
    """(sum_E ||grad u_ex - grad Pi u_T||^2)^(1/2) / ||grad u_ex||.

    Elements with a vertex at ``singular_point`` are integrated with
    ``fan(b, c, g)``, which must return the exact integral of
    |grad u_ex - g|^2 over the triangles (singular_point, b, c). Elements
    close to it (relative to their size) use a red-refined composite
    degree-5 rule; all others a single degree-5 rule.
    """
    u = np.asarray(u, dtype=float)
    disc = disc if disc is not None else assemble_full(mesh, 1.0)
    ea = disc.arrays
    nE = len(ea.eids)
    slot_el = ea.element_of_slot()
    uu = u[ea.nodes]
    g = np.stack([np.bincount(slot_el, weights=disc.gx * uu, minlength=nE),
                  np.bincount(slot_el, weights=disc.gy * uu, minlength=nE)], axis=1)
    X = mesh.coords_array()
    tri = np.array([[X[v] for v in mesh.elements[int(e)].vertices] for e in ea.eids]).reshape(nE, 3, 2)
    err = np.zeros(nE)
    todo = np.ones(nE, dtype=bool)
    if singular_point is not None:
        s = np.asarray(singular_point, dtype=float)
        at = np.all(tri == s, axis=2)                  # (nE, 3)
        touch = at.any(axis=1)
        if fan is not None and touch.any():
            idx = np.nonzero(touch)[0]
            k = np.argmax(at[idx], axis=1)
            # the two other vertices in counterclockwise order
            b = tri[idx, (k + 1) % 3] - s
            c = tri[idx, (k + 2) % 3] - s
            err[idx] = fan(b, c, g[idx])
            todo[idx] = False
        diam = np.max(np.linalg.norm(tri - np.roll(tri, 1, axis=1), axis=2), axis=1)
        dist = np.linalg.norm(tri.mean(axis=1) - s, axis=1)
        near = todo & (dist < 4 * diam)
        for levels, sel in ((3, near), (0, todo & ~near)):
            idx = np.nonzero(sel)[0]
            if len(idx):
                err[idx] = _quad_error(tri[idx], g[idx], grad_exact, levels)
    else:
        err[:] = _quad_error(tri, g, grad_exact, 0)
    return math.sqrt(float(err.sum())) / norm_exact


def _quad_error(tri, g, grad_exact, levels):
    sub = red_refine(tri, levels) if levels else tri[:, None]
    n, ns = sub.shape[:2]
    pts, w = map_rule(sub.reshape(n * ns, 3, 2), 5)
    gx, gy = grad_exact(pts[..., 0], pts[..., 1])
    gg = np.repeat(g, ns, axis=0)
    val = np.sum(w * ((gx - gg[:, 0:1]) ** 2 + (gy - gg[:, 1:2]) ** 2), axis=1)
    return val.reshape(n, ns).sum(axis=1)


def contraction_monitor(records, beta: float):
    """Per-step factors (e_{k+1}^2 + beta eta_{k+1}^2) / (e_k^2 + beta eta_k^2).

    Returns ``(factors, max_factor, fraction_below_one)``. Reported only: the
    contraction theorem has no computable constants.
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    q = []
    for r in records:
        if r.h1_like_error is None:
            raise ValueError("records lack the error quantity")
        q.append(r.h1_like_error**2 + beta * r.eta2)
    q = np.array(q)
    factors = q[1:] / q[:-1] if len(q) > 1 else np.zeros(0)
    if len(factors) == 0:
        return factors, float("nan"), float("nan")
    return factors, float(factors.max()), float(np.mean(factors < 1.0))


def galerkin_loop(mesh: Mesh, config: AdaptConfig, exact_u: Callable | None = None,
                  exact_grad: Callable | None = None, grad_norm: float | None = None,
                  audit: bool = False, domain_area: float | None = None,
                  on_iteration: Callable | None = None, singular_point=None, fan=None,
                  beta: float | None = None) -> AdaptResult:
    """Run the adaptive loop on ``mesh`` (modified in place).

    ``exact_u`` doubles as the Dirichlet trace. When ``exact_grad`` and
    ``grad_norm`` are given, the H1-like error and the contraction quantity
    are recorded. ``on_iteration(record, mesh, u, indicators)`` is called once
    per iteration before marking. With ``audit`` every refined mesh is checked
    from scratch and the audit summaries are returned.
    """
    records: list[AdaptRecord] = []
    audits: list[dict] = []
    u_guess = None
    for it in range(1, config.max_iter + 1):
        disc = assemble_full(mesh, config.gamma)
        g = _dirichlet_values(mesh, exact_u)
        system, dm = assemble(mesh, config.gamma, dirichlet=g, disc=disc)
        x0 = None if u_guess is None else u_guess[dm.free]
        x, cg_it, _ = cg_solve(system, config.cg_tol, x0=x0)
        u = np.zeros(mesh.n_nodes) if g is None else g.copy()
        u[dm.free] = x

        ind = estimate(mesh, u, disc, config.gamma)
        eta2 = float(ind.eta2.sum())
        S = float(ind.stab.sum())
        ratio = stab_ratio(S, config.gamma, eta2)
        if ratio > config.ratio_guard:
            raise InvariantError(f"gamma^2 S / eta^2 = {ratio:.3g} exceeds the guard {config.ratio_guard}")
        lam = mesh.max_index()
        if lam > config.Lambda:
            raise InvariantError(f"mesh index {lam} exceeds Lambda = {config.Lambda}")
        rec = AdaptRecord(it, dm.n_free, mesh.n_active, mesh.n_nodes, lam, eta2, S, ratio,
                          cg_iterations=cg_it)
        if exact_grad is not None and grad_norm is not None:
            rec.h1_like_error = h1_like_error(mesh, u, exact_grad, grad_norm, disc,
                                              singular_point, fan)
            if beta is None and eta2 > 0:
                beta = 1e-2 * rec.h1_like_error**2 / eta2
            if beta is not None:
                rec.contraction = rec.h1_like_error**2 + beta * eta2
        records.append(rec)
        logger.info("iter %d: ndofs=%d eta=%.4e ratio=%.3e", it, rec.n_dofs, math.sqrt(eta2), ratio)
        if on_iteration is not None:
            on_iteration(rec, mesh, u, ind)

        if config.eps is not None and math.sqrt(eta2) <= config.eps:
            break
        if config.nmax is not None and rec.n_dofs >= config.nmax:
            break
        if eta2 == 0.0:
            break
        marks = dorfler_mark(ind.as_dict(), config.theta)
        n_old = mesh.n_nodes
        refine(mesh, marks, config.Lambda)
        if audit:
            try:
                audits.append(mesh.audit(config.Lambda, domain_area))
            except Exception as exc:
                raise InvariantError(f"audit failed after iteration {it}: {exc}") from exc
        u_guess = prolong(mesh, u, n_old, exact_u)
    return AdaptResult(mesh, u, records, beta, audits)
