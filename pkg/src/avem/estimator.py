"""Residual error estimator, stabilization functional and hierarchical details."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, MeshError
from .quadrature import map_rule
from .vem import Discretization, LinearPoly, assemble_full, interpolate_conforming, pi_nabla

__all__ = [
    "LocalIndicators",
    "DetailVectors",
    "InvariantError",
    "internal_residual",
    "jump_residual",
    "local_estimator",
    "estimate",
    "global_estimator",
    "stabilization_total",
    "stab_ratio",
    "hierarchical_details",
    "oscillation",
    "write_indicators_csv",
]


class InvariantError(RuntimeError):
    """A monitored property of the discrete solution was violated."""


@dataclass
class LocalIndicators:
    eids: np.ndarray
    h: np.ndarray
    resid2: np.ndarray
    jump2: np.ndarray
    eta2: np.ndarray
    stab: np.ndarray

    def as_dict(self) -> dict[int, float]:
        return {int(e): float(v) for e, v in zip(self.eids, self.eta2)}

    def __len__(self) -> int:
        return len(self.eids)


@dataclass
class DetailVectors:
    nodes: np.ndarray
    d: np.ndarray
    delta: np.ndarray
    norm_d: float
    norm_delta: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.norm_delta <= self.bound * (1 + 1e-12) + 1e-300


def _residual_norm2(area, J, f, c, a_cen, gx, gy):
    """||f - c p||^2 over a triangle, p = a_cen + g . (x - centroid), exactly."""
    r0 = f - c * a_cen
    return area * r0**2 + c**2 * (J[..., 0] * gx**2 + 2 * J[..., 1] * gx * gy + J[..., 2] * gy**2)


def internal_residual(mesh: Mesh, eid: int, u_poly: LinearPoly) -> tuple[LinearPoly, float]:
    """r = f_E - c_E * u_poly and its squared L2 norm over E."""
    el = mesh.elements[eid]
    r = LinearPoly(el.f - el.c * u_poly.p0, -el.c * u_poly.p1, -el.c * u_poly.p2)
    V = mesh.element_coords(eid)
    cen = V.mean(axis=0)
    area = mesh.element_area(eid)
    dv = V - cen
    J = area / 12.0 * np.array([dv[:, 0] @ dv[:, 0], dv[:, 0] @ dv[:, 1], dv[:, 1] @ dv[:, 1]])
    # ||r||^2 = |E| r(cen)^2 + grad r^T J grad r
    n2 = area * r(*cen) ** 2 + J[0] * r.p1**2 + 2 * J[1] * r.p1 * r.p2 + J[2] * r.p2**2
    return r, float(n2)


def _element_grad(mesh: Mesh, eid: int, u) -> np.ndarray:
    eb = mesh.element_boundary(eid)
    p = pi_nabla(mesh, eid, np.asarray(u)[eb.nodes])
    return np.array(p.grad)


def jump_residual(mesh: Mesh, eid: int, edge: tuple[int, int], u) -> float:
    """Conormal flux jump of the projected gradients across a skeleton edge.

    Zero on edges lying on the domain boundary.
    """
    nb = mesh.edge_neighbor(eid, edge)
    if nb is None:
        if not mesh.is_boundary_segment(*edge) and not _on_boundary_chain(mesh, edge):
            raise MeshError(f"edge {edge} has no neighbor but is not on the boundary")
        return 0.0
    other, _ = nb
    a, b = edge
    P, Q = mesh.nodes[a], mesh.nodes[b]
    ell = math.hypot(Q.x - P.x, Q.y - P.y)
    n1 = np.array([Q.y - P.y, -(Q.x - P.x)]) / ell
    out = 0.0
    for e, n in ((eid, n1), (other, -n1)):
        a11, a12, a22 = mesh.elements[e].A
        g = _element_grad(mesh, e, u)
        out += (a11 * g[0] + a12 * g[1]) * n[0] + (a12 * g[0] + a22 * g[1]) * n[1]
    return float(out)


def _on_boundary_chain(mesh: Mesh, edge) -> bool:
    seg = (min(edge), max(edge))
    while seg is not None:
        if mesh.is_boundary_segment(*seg):
            return True
        seg = mesh.parent_segment(seg)
    return False


def local_estimator(mesh: Mesh, eid: int, u) -> tuple[float, float, float]:
    """(eta2, resid2, jump2) of one element, evaluated edge by edge.

    The edge term is weighted by the element size h_E, and the squared jump
    norm over an edge is j^2 |e| since j is constant there.
    """
    u = np.asarray(u, dtype=float)
    eb = mesh.element_boundary(eid)
    h = mesh.element_size(eid)
    p = pi_nabla(mesh, eid, u[eb.nodes])
    _, r2 = internal_residual(mesh, eid, p)
    resid2 = h * h * r2
    jump2 = 0.0
    for a, b in eb.edges:
        j = jump_residual(mesh, eid, (a, b), u)
        P, Q = mesh.nodes[a], mesh.nodes[b]
        jump2 += 0.5 * h * j * j * math.hypot(Q.x - P.x, Q.y - P.y)
    return resid2 + jump2, resid2, jump2


def estimate(mesh: Mesh, u, disc: Discretization | None = None, gamma: float = 1.0) -> LocalIndicators:
    """All local indicators and stabilization values, vectorized over elements."""
    u = np.asarray(u, dtype=float)
    disc = disc if disc is not None else assemble_full(mesh, gamma)
    ea = disc.arrays
    nE = len(ea.eids)
    slot_el = ea.element_of_slot()
    uu = u[ea.nodes]
    gxu = np.bincount(slot_el, weights=disc.gx * uu, minlength=nE)
    gyu = np.bincount(slot_el, weights=disc.gy * uu, minlength=nE)
    acu = np.bincount(slot_el, weights=disc.pc * uu, minlength=nE)
    h2 = disc.area
    resid2 = h2 * _residual_norm2(disc.area, disc.J, ea.f, ea.c, acu, gxu, gyu)

    # edges: slot k joins node k and the next node of the same element
    X = mesh.coords_array()
    nxt = np.arange(len(ea.nodes)) + 1
    last = ea.ptr[1:] - 1
    nxt[last] = ea.ptr[:-1]
    na, nb = ea.nodes, ea.nodes[nxt]
    d = X[nb] - X[na]
    ell = np.hypot(d[:, 0], d[:, 1])
    nx, ny = d[:, 1] / ell, -d[:, 0] / ell
    A = ea.coefA[slot_el]
    gx, gy = gxu[slot_el], gyu[slot_el]
    flux = (A[:, 0] * gx + A[:, 1] * gy) * nx + (A[:, 1] * gx + A[:, 2] * gy) * ny
    lo, hi = np.minimum(na, nb), np.maximum(na, nb)
    order = np.lexsort((hi, lo))
    slo, shi = lo[order], hi[order]
    same = (slo[1:] == slo[:-1]) & (shi[1:] == shi[:-1])
    jump = np.zeros(len(na))
    i1 = order[:-1][same]
    i2 = order[1:][same]
    jv = flux[i1] + flux[i2]
    jump[i1] = jv
    jump[i2] = jv
    paired = np.zeros(len(na), dtype=bool)
    paired[i1] = True
    paired[i2] = True
    for k in np.nonzero(~paired)[0]:
        if not _on_boundary_chain(mesh, (int(na[k]), int(nb[k]))):
            raise MeshError(f"unmatched interior edge ({na[k]}, {nb[k]})")
    h = np.sqrt(disc.area)
    jump2 = 0.5 * h * np.bincount(slot_el, weights=jump**2 * ell, minlength=nE)

    # stabilization: (v - I_E v) at every boundary node
    base = ea.ptr[slot_el]
    Iv = (1.0 - ea.t) * uu[base + ea.ia] + ea.t * uu[base + ea.ib]
    stab = np.bincount(slot_el, weights=(uu - Iv) ** 2, minlength=nE)
    return LocalIndicators(ea.eids.copy(), h, resid2, jump2, resid2 + jump2, stab)


def global_estimator(indicators: LocalIndicators | np.ndarray | dict) -> float:
    if isinstance(indicators, LocalIndicators):
        vals = indicators.eta2
    elif isinstance(indicators, dict):
        vals = np.fromiter(indicators.values(), dtype=float)
    else:
        vals = np.asarray(indicators, dtype=float)
    return float(np.sum(vals)) if len(vals) else 0.0


def stabilization_total(mesh: Mesh, u) -> float:
    """S_T(u, u): sum over elements of the squared deviation from the vertex interpolant."""
    u = np.asarray(u, dtype=float)
    total = 0.0
    for eid in mesh.active_elements():
        eb = mesh.element_boundary(eid)
        uu = u[eb.nodes]
        for k, (a, b, t) in enumerate(eb.interp):
            dev = uu[k] - ((1.0 - t) * uu[a] + t * uu[b])
            total += dev * dev
    return total


def stab_ratio(stab: float, gamma: float, eta2: float) -> float:
    """gamma^2 S_T / eta^2 (0 when both vanish)."""
    if eta2 <= 0.0:
        if stab > 0.0:
            raise InvariantError("stabilization is positive while the estimator vanishes")
        return 0.0
    return gamma * gamma * stab / eta2


def hierarchical_details(mesh: Mesh, v) -> DetailVectors:
    """Details d (deviation from the parents' mean) and delta = v - I0_T v on hanging nodes.

    Also reports the norm bound ||delta|| <= 7^((Lambda_T - 1)/2) ||d||.
    """
    v = np.asarray(v, dtype=float)
    H = np.array(mesh.hanging_nodes(), dtype=np.int64)
    par = np.array([mesh.nodes[x].parents for x in H], dtype=np.int64).reshape(-1, 2)
    d = v[H] - 0.5 * (v[par[:, 0]] + v[par[:, 1]]) if len(H) else np.zeros(0)
    delta = (v - interpolate_conforming(mesh, v))[H]
    lam = mesh.max_index()
    nd = float(np.linalg.norm(d))
    bound = 7.0 ** ((lam - 1) / 2.0) * nd
    return DetailVectors(H, d, delta, nd, float(np.linalg.norm(delta)), bound)


def _as_matrix_field(A, n):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1 or A.shape == (n,):
        out = np.zeros((n, 2, 2))
        out[:, 0, 0] = A
        out[:, 1, 1] = A
        return out
    return A.reshape(n, 2, 2)


def oscillation(mesh: Mesh, u, A_fn=None, c_fn=None, f_fn=None, order: int = 5,
                disc: Discretization | None = None) -> tuple[float, dict[int, float]]:
    """Data oscillation between the true data and the per-element constants.

    ``A_fn(x, y)`` returns either a scalar field (A = a I) or (n, 2, 2)
    matrices; ``c_fn``/``f_fn`` return scalars. Missing callables mean the
    true data equals the element constants. Returns (total, per element).
    """
    u = np.asarray(u, dtype=float)
    disc = disc if disc is not None else assemble_full(mesh, 1.0)
    ea = disc.arrays
    nE = len(ea.eids)
    slot_el = ea.element_of_slot()
    uu = u[ea.nodes]
    gxu = np.bincount(slot_el, weights=disc.gx * uu, minlength=nE)
    gyu = np.bincount(slot_el, weights=disc.gy * uu, minlength=nE)
    acu = np.bincount(slot_el, weights=disc.pc * uu, minlength=nE)
    tri = np.array([mesh.element_coords(int(e)) for e in ea.eids]).reshape(nE, 3, 2)
    pts, w = map_rule(tri, order)
    nq = pts.shape[1]
    x, y = pts[..., 0].ravel(), pts[..., 1].ravel()
    out = np.zeros(nE)
    if f_fn is not None:
        fv = np.asarray(f_fn(x, y), dtype=float).reshape(nE, nq)
        out += disc.area * np.sum(w * (fv - ea.f[:, None]) ** 2, axis=1)
    if A_fn is not None:
        Av = _as_matrix_field(A_fn(x, y), nE * nq).reshape(nE, nq, 2, 2)
        Ah = np.zeros((nE, 2, 2))
        Ah[:, 0, 0], Ah[:, 0, 1], Ah[:, 1, 0], Ah[:, 1, 1] = (
            ea.coefA[:, 0], ea.coefA[:, 1], ea.coefA[:, 1], ea.coefA[:, 2])
        dA = Av - Ah[:, None]
        g = np.stack([gxu, gyu], axis=1)
        vec = np.einsum("eqij,ej->eqi", dA, g)
        out += np.sum(w * np.sum(vec**2, axis=2), axis=1)
    if c_fn is not None:
        cv = np.asarray(c_fn(x, y), dtype=float).reshape(nE, nq)
        pu = acu[:, None] + gxu[:, None] * (pts[..., 0] - disc.centroid[:, 0:1]) \
            + gyu[:, None] * (pts[..., 1] - disc.centroid[:, 1:2])
        out += np.sum(w * ((cv - ea.c[:, None]) * pu) ** 2, axis=1)
    return float(out.sum()), {int(e): float(v) for e, v in zip(ea.eids, out)}


def write_indicators_csv(indicators: LocalIndicators, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["element", "h_E", "resid2", "jump2", "eta2", "stab"])
        for row in zip(indicators.eids, indicators.h, indicators.resid2, indicators.jump2,
                       indicators.eta2, indicators.stab):
            wr.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])
