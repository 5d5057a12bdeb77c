"""Lowest-order virtual element discretization on meshes with hanging nodes.

Everything is computed from nodal values on the element boundaries: the
gradient projector, the stiffness/mass/load built on it and the dofi-dofi
stabilization of ``v - I_E v``. No interior lifting is ever formed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .kernels import element_kernels
from .linsolve import SparseSystem
from .mesh import Mesh, MeshError

__all__ = [
    "LinearPoly",
    "LocalMatrices",
    "DofMap",
    "ElementArrays",
    "element_arrays",
    "pi_nabla",
    "local_matrices",
    "assemble",
    "assemble_full",
    "interpolate_conforming",
    "write_matrix_market",
]


@dataclass(frozen=True)
class LinearPoly:
    """p(x, y) = p0 + p1 x + p2 y."""

    p0: float
    p1: float
    p2: float

    @property
    def grad(self) -> tuple[float, float]:
        return (self.p1, self.p2)

    def __call__(self, x, y):
        return self.p0 + self.p1 * x + self.p2 * y


@dataclass
class LocalMatrices:
    K: np.ndarray
    M: np.ndarray
    S: np.ndarray
    F: np.ndarray
    # rows are the coefficients (p0, p1, p2) of the projection of each basis vector
    pi_nabla: np.ndarray


@dataclass
class DofMap:
    """Global numbering of the free (interior) nodes; -1 marks constrained nodes."""

    index: np.ndarray
    free: np.ndarray
    constrained: np.ndarray

    @property
    def n_free(self) -> int:
        return len(self.free)


@dataclass
class ElementArrays:
    """Flattened boundary data of all active elements (ids ascending).

    Node ``k`` of element ``e`` sits at position ``ptr[e] + k`` of the flat
    arrays; ``ia``/``ib`` are local positions of the side endpoints and ``t``
    the node's parameter along that side.
    """

    eids: np.ndarray
    ptr: np.ndarray
    nodes: np.ndarray
    vpos: np.ndarray
    ia: np.ndarray
    ib: np.ndarray
    t: np.ndarray
    coefA: np.ndarray
    c: np.ndarray
    f: np.ndarray

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.ptr)

    def element_of_slot(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.eids)), self.sizes)


def element_arrays(mesh: Mesh) -> ElementArrays:
    eids = mesh.active_elements()
    ptr = [0]
    nodes: list[int] = []
    vpos = []
    ia: list[int] = []
    ib: list[int] = []
    tt: list[float] = []
    coefA = np.empty((len(eids), 3))
    c = np.empty(len(eids))
    f = np.empty(len(eids))
    for j, eid in enumerate(eids):
        eb = mesh.element_boundary(eid)
        nodes.extend(eb.nodes)
        for a, b, t in eb.interp:
            ia.append(a)
            ib.append(b)
            tt.append(t)
        vpos.append(eb.vertex_pos)
        ptr.append(len(nodes))
        el = mesh.elements[eid]
        coefA[j] = el.A
        c[j] = el.c
        f[j] = el.f
    return ElementArrays(
        np.array(eids, dtype=np.int64), np.array(ptr, dtype=np.int64),
        np.array(nodes, dtype=np.int64), np.array(vpos, dtype=np.int64).reshape(-1, 3),
        np.array(ia, dtype=np.int64), np.array(ib, dtype=np.int64), np.array(tt),
        coefA, c, f,
    )


def _check_data(A, c) -> None:
    a11, a12, a22 = A
    if not (a11 > 0 and a11 * a22 - a12 * a12 > 0):
        raise ValueError(f"diffusion matrix {A} is not positive definite")
    if c < 0:
        raise ValueError(f"reaction coefficient {c} is negative")


def pi_nabla(mesh: Mesh, eid: int, values) -> LinearPoly:
    """Gradient projection of the boundary trace given by ``values`` on N_E.

    The gradient solves |E| grad p = contour integral of v n and the constant
    makes the boundary mean of v - p vanish; both integrals are exact
    trapezoidal sums since v is affine on each edge.
    """
    eb = mesh.element_boundary(eid)
    v = np.asarray(values, dtype=float)
    if v.shape != (len(eb),):
        raise ValueError(f"expected {len(eb)} boundary values, got {v.shape}")
    X = np.array([mesh.nodes[n].coords for n in eb.nodes])
    area = mesh.element_area(eid)
    if not area > 0:
        raise MeshError(f"degenerate element {eid}")
    Xn = np.roll(X, -1, axis=0)
    vn = np.roll(v, -1)
    vm = 0.5 * (v + vn)
    d = Xn - X
    gx = np.sum(vm * d[:, 1]) / area
    gy = -np.sum(vm * d[:, 0]) / area
    ell = np.hypot(d[:, 0], d[:, 1])
    per = ell.sum()
    mean_v = np.sum(vm * ell)
    mx = 0.5 * (X + Xn)
    mean_x = np.sum(mx[:, 0] * ell)
    mean_y = np.sum(mx[:, 1] * ell)
    p0 = (mean_v - gx * mean_x - gy * mean_y) / per
    return LinearPoly(float(p0), float(gx), float(gy))


def local_matrices(mesh: Mesh, eid: int) -> LocalMatrices:
    """Reference per-element matrices, computed basis vector by basis vector."""
    el = mesh.elements[eid]
    _check_data(el.A, el.c)
    eb = mesh.element_boundary(eid)
    m = len(eb)
    area = mesh.element_area(eid)
    V = mesh.element_coords(eid)
    polys = [pi_nabla(mesh, eid, row) for row in np.eye(m)]
    coeffs = np.array([[p.p0, p.p1, p.p2] for p in polys])
    G = coeffs[:, 1:]
    a11, a12, a22 = el.A
    Amat = np.array([[a11, a12], [a12, a22]])
    K = area * G @ Amat @ G.T
    # exact integrals of products of linear functions: mean and second moments
    cen = V.mean(axis=0)
    vals_c = coeffs[:, 0] + G @ cen
    dv = V - cen
    Jm = area / 12.0 * dv.T @ dv
    M = el.c * (area * np.outer(vals_c, vals_c) + G @ Jm @ G.T)
    D = np.eye(m)
    for k, (a, b, t) in enumerate(eb.interp):
        D[k, a] -= 1.0 - t
        D[k, b] -= t
    S = D.T @ D
    F = el.f * area * vals_c
    return LocalMatrices(K, M, S, F, coeffs)


def _dofmap(mesh: Mesh) -> DofMap:
    bnd = mesh.boundary_mask()
    free = np.nonzero(~bnd)[0]
    index = np.full(mesh.n_nodes, -1, dtype=np.int64)
    index[free] = np.arange(len(free))
    return DofMap(index, free, np.nonzero(bnd)[0])


@dataclass
class Discretization:
    """Full (unconstrained) operator plus the kernel outputs reused downstream."""

    arrays: ElementArrays
    matrix: sp.csr_matrix
    load: np.ndarray
    area: np.ndarray
    centroid: np.ndarray
    J: np.ndarray
    gx: np.ndarray
    gy: np.ndarray
    pc: np.ndarray


def assemble_full(mesh: Mesh, gamma: float, arrays: ElementArrays | None = None) -> Discretization:
    """B_T over all nodes (no boundary conditions) and the load vector F_T."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    ea = arrays if arrays is not None else element_arrays(mesh)
    if np.any(ea.c < 0):
        raise ValueError("negative reaction coefficient")
    det = ea.coefA[:, 0] * ea.coefA[:, 2] - ea.coefA[:, 1] ** 2
    if np.any(ea.coefA[:, 0] <= 0) or np.any(det <= 0):
        raise ValueError("diffusion matrix is not positive definite")
    X = mesh.coords_array()[ea.nodes]
    area, cen, J, gx, gy, pc, blocks, load = element_kernels(
        X, ea.ptr, ea.vpos, ea.ia, ea.ib, ea.t, ea.coefA, ea.c, ea.f, float(gamma))
    sizes = ea.sizes
    # row/col node ids of each block entry, element after element, row-major
    bsz = sizes * sizes
    eidx = np.repeat(np.arange(len(sizes)), bsz)
    within = np.arange(int(bsz.sum())) - np.repeat(np.cumsum(bsz) - bsz, bsz)
    msz = sizes[eidx]
    rows = ea.nodes[ea.ptr[eidx] + within // msz]
    cols = ea.nodes[ea.ptr[eidx] + within % msz]
    n = mesh.n_nodes
    Afull = sp.coo_matrix((blocks, (rows, cols)), shape=(n, n)).tocsr()
    Afull.sum_duplicates()
    F = np.bincount(ea.nodes, weights=load, minlength=n)
    return Discretization(ea, Afull, F, area, cen, J, gx, gy, pc)


def assemble(mesh: Mesh, gamma: float, dirichlet=None, disc: Discretization | None = None):
    """Assemble the Galerkin system on the free nodes.

    ``dirichlet`` gives nodal values on constrained nodes (array over all
    nodes, or None for homogeneous data); they are eliminated, not penalized.
    Returns ``(SparseSystem, DofMap)``.
    """
    disc = disc if disc is not None else assemble_full(mesh, gamma)
    dm = _dofmap(mesh)
    A = disc.matrix
    Aff = A[dm.free][:, dm.free].tocsr()
    rhs = disc.load[dm.free].copy()
    if dirichlet is not None:
        g = np.asarray(dirichlet, dtype=float)[dm.constrained]
        if np.any(g != 0):
            rhs -= A[dm.free][:, dm.constrained] @ g
    Aff.sort_indices()
    system = SparseSystem(Aff.shape[0], Aff.indptr.astype(np.int64), Aff.indices.astype(np.int64),
                          Aff.data.copy(), rhs)
    return system, dm


def interpolate_conforming(mesh: Mesh, values) -> np.ndarray:
    """Nodal values of the conforming piecewise-linear interpolant I0_T v.

    Proper nodes keep their value; hanging nodes take the mean of their two
    parents, processed in increasing global index so parents are final first.
    """
    v = np.array(values, dtype=float, copy=True)
    lam = mesh.global_indices()
    hanging = np.nonzero(lam > 0)[0]
    order = hanging[np.argsort(lam[hanging], kind="stable")]
    for x in order:
        par = mesh.nodes[x].parents
        if par is None:
            raise MeshError(f"hanging node {x} has no parents")
        if lam[par[0]] >= lam[x] or lam[par[1]] >= lam[x]:
            raise MeshError(f"cyclic parent structure at node {x}")
        v[x] = 0.5 * (v[par[0]] + v[par[1]])
    return v


def write_matrix_market(system: SparseSystem, path) -> None:
    from scipy.io import mmwrite

    mmwrite(str(path), system.to_scipy(), symmetry="symmetric")
