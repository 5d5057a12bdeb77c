"""Newest-vertex bisection forest with hanging-node bookkeeping.

Nodes and elements are addressed by dense integer ids that are never reused.
Every node created by bisection remembers the endpoints of the segment it
halves, which makes node identity, side incidence and boundary flags exact:
no floating point comparison is used on the refinement path.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Node",
    "Element",
    "ElementBoundary",
    "Mesh",
    "MeshError",
    "build_initial_mesh",
]


class MeshError(ValueError):
    """Raised for invalid input triangulations and corrupt mesh states."""


def _key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass
class Node:
    x: float
    y: float
    parents: tuple[int, int] | None = None
    on_boundary: bool = False

    @property
    def coords(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass
class Element:
    # vertices are counterclockwise; the refinement edge is opposite vertices[newest]
    vertices: tuple[int, int, int]
    newest: int = 0
    parent: int | None = None
    children: tuple[int, int] | None = None
    generation: int = 0
    A: tuple[float, float, float] = (1.0, 0.0, 1.0)
    c: float = 0.0
    f: float = 0.0

    @property
    def is_active(self) -> bool:
        return self.children is None

    @property
    def newest_vertex(self) -> int:
        return self.vertices[self.newest]

    @property
    def refinement_edge(self) -> tuple[int, int]:
        k = self.newest
        return (self.vertices[(k + 1) % 3], self.vertices[(k + 2) % 3])


@dataclass
class ElementBoundary:
    """Counterclockwise node cycle of an element seen as a polygon.

    ``interp[k] = (ia, ib, t)`` gives the position of node ``k`` on the side
    joining local vertices ``ia`` and ``ib`` (``t`` measured from ``ia``); for
    the three vertices ``ia == ib == k`` and ``t == 0``.
    """

    nodes: list[int]
    interp: list[tuple[int, int, float]]
    vertex_pos: tuple[int, int, int]

    @property
    def edges(self) -> list[tuple[int, int]]:
        n = self.nodes
        return [(n[k], n[(k + 1) % len(n)]) for k in range(len(n))]

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass
class Mesh:
    nodes: list[Node] = field(default_factory=list)
    elements: list[Element] = field(default_factory=list)
    epsilon_geom: float = 1e-12

    def __post_init__(self):
        self.active: set[int] = set()
        # segment (sorted node pair) -> node id of its midpoint
        self._midpoint: dict[tuple[int, int], int] = {}
        # segment -> active elements having it as one of their three sides
        self._sides: dict[tuple[int, int], list[int]] = {}
        self._boundary_segments: set[tuple[int, int]] = set()
        self._node_children: list[list[int]] = []
        self._lam: list[int] = []
        # lambda >= 1 buckets, kept in sync with _lam
        self._level: dict[int, set[int]] = {}
        self.version = 0
        self._bcache: dict[int, ElementBoundary] = {}
        self._bcache_version = -1

    # ------------------------------------------------------------------
    # construction helpers
    def _add_node(self, x: float, y: float, parents=None, on_boundary=False) -> int:
        nid = len(self.nodes)
        self.nodes.append(Node(x, y, parents, on_boundary))
        self._node_children.append([])
        self._lam.append(-1)
        if parents is not None:
            self._midpoint[_key(*parents)] = nid
            for p in parents:
                self._node_children[p].append(nid)
        return nid

    def _add_element(self, elem: Element) -> int:
        eid = len(self.elements)
        self.elements.append(elem)
        self.active.add(eid)
        v = elem.vertices
        for k in range(3):
            self._sides.setdefault(_key(v[k], v[(k + 1) % 3]), []).append(eid)
        return eid

    def _deactivate(self, eid: int) -> None:
        self.active.discard(eid)
        v = self.elements[eid].vertices
        for k in range(3):
            key = _key(v[k], v[(k + 1) % 3])
            lst = self._sides[key]
            lst.remove(eid)
            if not lst:
                del self._sides[key]

    # ------------------------------------------------------------------
    # basic queries
    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_active(self) -> int:
        return len(self.active)

    def active_elements(self) -> list[int]:
        return sorted(self.active)

    def coords_array(self) -> np.ndarray:
        return np.array([(n.x, n.y) for n in self.nodes], dtype=float)

    def boundary_mask(self) -> np.ndarray:
        return np.array([n.on_boundary for n in self.nodes], dtype=bool)

    def midpoint_of(self, a: int, b: int) -> int | None:
        return self._midpoint.get(_key(a, b))

    def is_boundary_segment(self, a: int, b: int) -> bool:
        return _key(a, b) in self._boundary_segments

    def parent_segment(self, seg: tuple[int, int]) -> tuple[int, int] | None:
        """The segment that ``seg`` is a half of, or None for root segments."""
        p, q = seg
        bp = self.nodes[p].parents
        if bp is not None and q in bp:
            return _key(*bp)
        bq = self.nodes[q].parents
        if bq is not None and p in bq:
            return _key(*bq)
        return None

    def hosts(self, node: int) -> list[tuple[int, tuple[int, int]]]:
        """Active elements having ``node`` strictly inside one of their sides.

        Returns ``(element, side)`` pairs sorted by element id.
        """
        par = self.nodes[node].parents
        out = []
        seg = _key(*par) if par is not None else None
        while seg is not None:
            for eid in self._sides.get(seg, ()):
                out.append((eid, seg))
            seg = self.parent_segment(seg)
        out.sort()
        return out

    def is_hanging(self, node: int) -> bool:
        par = self.nodes[node].parents
        seg = _key(*par) if par is not None else None
        while seg is not None:
            if seg in self._sides:
                return True
            seg = self.parent_segment(seg)
        return False

    def is_proper(self, node: int) -> bool:
        return not self.is_hanging(node)

    def global_index(self, node: int) -> int:
        return self._lam[node]

    def global_indices(self) -> np.ndarray:
        return np.array(self._lam, dtype=int)

    def max_index(self) -> int:
        for lev in sorted(self._level, reverse=True):
            if self._level[lev]:
                return lev
        return 0

    def nodes_at_index(self, lam: int) -> set[int]:
        return self._level.get(lam, set())

    def hanging_nodes(self) -> list[int]:
        return sorted(i for lev, s in self._level.items() if lev > 0 for i in s)

    # ------------------------------------------------------------------
    # global index maintenance
    def _set_lam(self, node: int, value: int) -> None:
        old = self._lam[node]
        if old > 0:
            self._level[old].discard(node)
        if value > 0:
            self._level.setdefault(value, set()).add(node)
        self._lam[node] = value

    def _compute_lam(self, node: int) -> int:
        if not self.is_hanging(node):
            return 0
        par = self.nodes[node].parents
        if par is None:
            raise MeshError(f"hanging node {node} has no parents")
        return max(self._lam[par[0]], self._lam[par[1]]) + 1

    def _propagate_lam(self, start: int) -> None:
        stack = [start]
        while stack:
            x = stack.pop()
            new = self._compute_lam(x)
            if new != self._lam[x]:
                self._set_lam(x, new)
                stack.extend(self._node_children[x])

    def recompute_indices(self) -> np.ndarray:
        """From-scratch evaluation of the global index of every node.

        Parents are always created before their children, so a single pass in
        id order resolves the recursion.
        """
        lam = np.zeros(self.n_nodes, dtype=int)
        for i, nd in enumerate(self.nodes):
            if nd.parents is not None and self.is_hanging(i):
                a, b = nd.parents
                lam[i] = max(lam[a], lam[b]) + 1
        return lam

    # ------------------------------------------------------------------
    # element geometry
    def element_coords(self, eid: int) -> np.ndarray:
        return np.array([self.nodes[v].coords for v in self.elements[eid].vertices])

    def element_area(self, eid: int) -> float:
        (x0, y0), (x1, y1), (x2, y2) = self.element_coords(eid)
        return 0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))

    def element_size(self, eid: int) -> float:
        """h_E = |E|^(1/2)."""
        return math.sqrt(self.element_area(eid))

    def _expand(self, a: int, b: int, ta: float, tb: float, out: list) -> None:
        m = self._midpoint.get(_key(a, b))
        if m is None:
            return
        tm = 0.5 * (ta + tb)
        self._expand(a, m, ta, tm, out)
        out.append((m, tm))
        self._expand(m, b, tm, tb, out)

    def side_nodes(self, a: int, b: int) -> list[int]:
        """Nodes strictly inside segment (a, b), ordered from a to b."""
        out: list = []
        self._expand(a, b, 0.0, 1.0, out)
        return [n for n, _ in out]

    def element_boundary(self, eid: int) -> ElementBoundary:
        if self._bcache_version != self.version:
            self._bcache.clear()
            self._bcache_version = self.version
        hit = self._bcache.get(eid)
        if hit is not None:
            return hit
        elem = self.elements[eid]
        if not elem.is_active:
            raise MeshError(f"element {eid} is not active")
        v = elem.vertices
        nodes: list[int] = []
        interp: list[tuple[int, int, float]] = []
        vpos = []
        for k in range(3):
            a, b = v[k], v[(k + 1) % 3]
            ia = len(nodes)
            vpos.append(ia)
            nodes.append(a)
            interp.append((ia, ia, 0.0))
            side: list = []
            self._expand(a, b, 0.0, 1.0, side)
            # local index of b is not known yet for k == 2; patched below
            for n, t in side:
                interp.append((ia, -1 - k, t))
                nodes.append(n)
        nb = [vpos[1], vpos[2], vpos[0]]
        interp = [(ia, nb[-1 - ib] if ib < 0 else ib, t) for ia, ib, t in interp]
        eb = ElementBoundary(nodes, interp, tuple(vpos))
        self._bcache[eid] = eb
        return eb

    def edge_neighbor(self, eid: int, edge: tuple[int, int]) -> tuple[int, int] | None:
        """Active element sharing ``edge`` with ``eid`` and the edge's local index there."""
        eb = self.element_boundary(eid)
        a, b = edge
        if edge not in eb.edges:
            raise MeshError(f"{edge} is not an edge of element {eid}")
        found = []
        seg: tuple[int, int] | None = _key(a, b)
        while seg is not None:
            for other in self._sides.get(seg, ()):
                if other != eid:
                    found.append(other)
            seg = self.parent_segment(seg)
        if not found:
            return None
        if len(found) > 1:
            raise MeshError(f"edge {edge} of element {eid} has neighbors {found}")
        other = found[0]
        oedges = self.element_boundary(other).edges
        return other, oedges.index((b, a))

    # ------------------------------------------------------------------
    # refinement primitive
    def bisect(self, eid: int) -> tuple[int, int]:
        """Newest-vertex bisection of an active element."""
        elem = self.elements[eid]
        if not elem.is_active:
            raise MeshError(f"element {eid} is already refined")
        k = elem.newest
        nv = elem.vertices[k]
        p = elem.vertices[(k + 1) % 3]
        q = elem.vertices[(k + 2) % 3]
        key = _key(p, q)
        m = self._midpoint.get(key)
        if m is None:
            P, Q = self.nodes[p], self.nodes[q]
            onb = key in self._boundary_segments
            m = self._add_node(0.5 * (P.x + Q.x), 0.5 * (P.y + Q.y), (p, q), onb)
            if onb:
                self._boundary_segments.add(_key(p, m))
                self._boundary_segments.add(_key(m, q))
        self._deactivate(eid)
        g = elem.generation + 1
        c1 = Element((m, nv, p), 0, eid, None, g, elem.A, elem.c, elem.f)
        c2 = Element((m, q, nv), 0, eid, None, g, elem.A, elem.c, elem.f)
        i1 = self._add_element(c1)
        i2 = self._add_element(c2)
        elem.children = (i1, i2)
        self.version += 1
        self._propagate_lam(m)
        return i1, i2

    # ------------------------------------------------------------------
    # independent audit
    def audit(self, Lambda: int | None = None, domain_area: float | None = None) -> dict:
        """Geometric from-scratch check of the mesh state.

        Hanging status is detected by point-on-segment tests (KD-tree
        candidates) rather than by the segment bookkeeping, indices are
        re-derived from it, and tiling/side-count/size bounds are checked.
        Raises MeshError on the first violation; returns summary numbers.
        """
        from scipy.spatial import cKDTree

        X = self.coords_array()
        tree = cKDTree(X)
        act = self.active_elements()
        hanging = np.zeros(self.n_nodes, dtype=bool)
        max_side = 0
        total_area = 0.0
        for eid in act:
            v = self.elements[eid].vertices
            area = self.element_area(eid)
            if not area > 0:
                raise MeshError(f"element {eid} has non-positive area {area}")
            total_area += area
            counts = []
            for k in range(3):
                a, b = X[v[k]], X[v[(k + 1) % 3]]
                L = float(np.hypot(*(b - a)))
                cand = tree.query_ball_point(0.5 * (a + b), 0.5 * L * (1 + 1e-9))
                cnt = 0
                for i in cand:
                    if i in v:
                        continue
                    d = X[i] - a
                    t = float(np.dot(d, b - a)) / (L * L)
                    dist = abs(d[0] * (b - a)[1] - d[1] * (b - a)[0]) / L
                    if 0.0 < t < 1.0 and dist <= self.epsilon_geom * max(L, 1e-300) * 1e3:
                        hanging[i] = True
                        cnt += 1
                counts.append(cnt)
            max_side = max(max_side, max(counts))
            if Lambda is not None:
                if max(counts) > 2**Lambda - 1:
                    raise MeshError(f"element {eid} side carries {max(counts)} hanging nodes")
                for k in range(3):
                    a, b = v[k], v[(k + 1) % 3]
                    pts = [a, *self.side_nodes(a, b), b]
                    L = float(np.hypot(*(X[b] - X[a])))
                    for s0, s1 in zip(pts[:-1], pts[1:]):
                        he = float(np.hypot(*(X[s1] - X[s0])))
                        if he < 2.0 ** (-Lambda) * L * (1 - 1e-12):
                            raise MeshError(f"edge {(s0, s1)} of element {eid} too short")
        lam = np.zeros(self.n_nodes, dtype=int)
        for i, nd in enumerate(self.nodes):
            if hanging[i]:
                if nd.parents is None:
                    raise MeshError(f"hanging node {i} has no parents")
                lam[i] = max(lam[nd.parents[0]], lam[nd.parents[1]]) + 1
        if not np.array_equal(lam, self.global_indices()):
            bad = np.nonzero(lam != self.global_indices())[0][:10]
            raise MeshError(f"cached global indices disagree with audit at nodes {bad.tolist()}")
        lam_max = int(lam.max()) if lam.size else 0
        if Lambda is not None and lam_max > Lambda:
            raise MeshError(f"mesh max index {lam_max} exceeds Lambda={Lambda}")
        for i, nd in enumerate(self.nodes):
            if nd.parents is not None:
                a, b = self.nodes[nd.parents[0]], self.nodes[nd.parents[1]]
                if nd.x != 0.5 * (a.x + b.x) or nd.y != 0.5 * (a.y + b.y):
                    raise MeshError(f"node {i} is not the midpoint of its parents")
        if domain_area is not None and abs(total_area - domain_area) > 1e-12 * domain_area:
            raise MeshError(f"active area {total_area} != domain area {domain_area}")
        return {"lambda_max": lam_max, "max_side_hanging": max_side, "area": total_area}

    # ------------------------------------------------------------------
    # serialization
    def to_dict(self) -> dict:
        return {
            "header": {"lambda_max_observed": self.max_index(), "n_active": self.n_active},
            "nodes": [
                {
                    "id": i,
                    "x": nd.x.hex(),
                    "y": nd.y.hex(),
                    "parents": list(nd.parents) if nd.parents else None,
                    "boundary": nd.on_boundary,
                }
                for i, nd in enumerate(self.nodes)
            ],
            "elements": [
                {
                    "id": i,
                    "vertices": list(el.vertices),
                    "newest": el.newest,
                    "parent": el.parent,
                    "children": list(el.children) if el.children else None,
                    "data": {"A": list(el.A), "c": el.c, "f": el.f},
                }
                for i, el in enumerate(self.elements)
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "Mesh":
        mesh = cls()
        for nd in doc["nodes"]:
            par = tuple(nd["parents"]) if nd["parents"] else None
            mesh._add_node(float.fromhex(nd["x"]), float.fromhex(nd["y"]), par, nd["boundary"])
        gen: list[int] = []
        for el in doc["elements"]:
            A = tuple(float(a) for a in el["data"]["A"])
            g = 0 if el["parent"] is None else gen[el["parent"]] + 1
            gen.append(g)
            elem = Element(
                tuple(el["vertices"]), el["newest"], el["parent"],
                tuple(el["children"]) if el["children"] else None, g,
                A, float(el["data"]["c"]), float(el["data"]["f"]),
            )
            mesh.elements.append(elem)
            if elem.children is None:
                mesh.active.add(len(mesh.elements) - 1)
                v = elem.vertices
                for k in range(3):
                    mesh._sides.setdefault(_key(v[k], v[(k + 1) % 3]), []).append(
                        len(mesh.elements) - 1)
        # boundary segments: root boundary edges and their dyadic descendants
        roots = [el for el in mesh.elements if el.parent is None]
        mesh._boundary_segments = _root_boundary_edges(r.vertices for r in roots)
        for i, nd in enumerate(mesh.nodes):
            if nd.parents and _key(*nd.parents) in mesh._boundary_segments:
                mesh._boundary_segments.add(_key(nd.parents[0], i))
                mesh._boundary_segments.add(_key(i, nd.parents[1]))
        lam = mesh.recompute_indices()
        for i, v in enumerate(lam):
            mesh._set_lam(i, int(v))
        return mesh

    @classmethod
    def loads(cls, text: str) -> "Mesh":
        return cls.from_dict(json.loads(text))


def _root_boundary_edges(triangles: Iterable[Sequence[int]]) -> set[tuple[int, int]]:
    count: dict[tuple[int, int], int] = {}
    for t in triangles:
        for k in range(3):
            key = _key(t[k], t[(k + 1) % 3])
            count[key] = count.get(key, 0) + 1
    return {k for k, c in count.items() if c == 1}


def build_initial_mesh(
    vertices: Sequence[Sequence[float]],
    triangles: Sequence[Sequence[int]],
    newest_vertex_rule: str = "longest_edge",
    data: Sequence[tuple] | None = None,
) -> Mesh:
    """Create a conforming mesh of generation-0 elements.

    ``newest_vertex_rule`` is ``"longest_edge"`` (vertex opposite the longest
    edge, ties to the lowest node id) or ``"first"`` (the first listed vertex).
    ``data`` optionally gives ``(A, c, f)`` per triangle with ``A`` as
    ``(a11, a12, a22)``.
    """
    X = np.asarray(vertices, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2:
        raise MeshError("vertices must be an (n, 2) array")
    mesh = Mesh()
    tris = [tuple(int(i) for i in t) for t in triangles]
    count: dict[tuple[int, int], int] = {}
    for t in tris:
        if len(t) != 3 or len(set(t)) != 3:
            raise MeshError(f"bad triangle {t}")
        if min(t) < 0 or max(t) >= len(X):
            raise MeshError(f"triangle {t} references a missing vertex")
        for k in range(3):
            key = _key(t[k], t[(k + 1) % 3])
            count[key] = count.get(key, 0) + 1
    if any(c > 2 for c in count.values()):
        raise MeshError("an edge is shared by more than two triangles")
    bedges = {k for k, c in count.items() if c == 1}
    onb = set(i for e in bedges for i in e)
    for i, (x, y) in enumerate(X):
        mesh._add_node(float(x), float(y), None, i in onb)
    mesh._boundary_segments = set(bedges)
    for j, t in enumerate(tris):
        P = X[list(t)]
        area2 = (P[1, 0] - P[0, 0]) * (P[2, 1] - P[0, 1]) - (P[2, 0] - P[0, 0]) * (P[1, 1] - P[0, 1])
        if area2 == 0:
            raise MeshError(f"triangle {j} is degenerate")
        if area2 < 0:
            raise MeshError(f"triangle {j} is clockwise")
    # hanging vertices in the input make it non-conforming
    for key in count:
        a, b = X[key[0]], X[key[1]]
        L2 = float(np.dot(b - a, b - a))
        for i in range(len(X)):
            if i in key:
                continue
            d = X[i] - a
            t = float(np.dot(d, b - a)) / L2
            cross = d[0] * (b - a)[1] - d[1] * (b - a)[0]
            if 0 < t < 1 and abs(cross) <= 1e-12 * L2:
                raise MeshError(f"vertex {i} lies inside edge {key}: non-conforming input")
    for j, t in enumerate(tris):
        P = X[list(t)]
        if newest_vertex_rule == "longest_edge":
            best, nvi = -1.0, 0
            for k in range(3):
                a, b = P[(k + 1) % 3], P[(k + 2) % 3]
                L = float(np.dot(b - a, b - a))
                if L > best or (L == best and t[k] < t[nvi]):
                    best, nvi = L, k
        elif newest_vertex_rule == "first":
            nvi = 0
        else:
            raise MeshError(f"unknown newest vertex rule {newest_vertex_rule!r}")
        verts = (t[nvi], t[(nvi + 1) % 3], t[(nvi + 2) % 3])
        A, c, f = data[j] if data is not None else ((1.0, 0.0, 1.0), 0.0, 0.0)
        mesh._add_element(Element(verts, 0, None, None, 0, tuple(float(a) for a in A), float(c), float(f)))
    for i in range(mesh.n_nodes):
        mesh._set_lam(i, 0)
    return mesh
