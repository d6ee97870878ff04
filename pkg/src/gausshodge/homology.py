"""Homology generators, cut-cocycles for handles and ends, and the cup product.

Every cocycle here is an integer 1-cochain.  Loop cocycles come from closed
dual cycles of a tree-cotree decomposition, end cocycles from dual paths
between two end boundaries, and separating cocycles from ``d`` of the
indicator of an end region.  A dual path crossing edge ``e`` out of face
``f`` puts the incidence sign of ``e`` in ``f`` on ``e``, which makes the
cochain closed on every face.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from scipy.cluster.hierarchy import DisjointSet
from scipy.sparse import csgraph

from .errors import AmbiguousEnd, GeometryError, MeshMismatch, NoPath
from .mesh import topology
from .weighted_dec import wedge_matrix


@dataclass(frozen=True)
class CurveOnMesh:
    """An oriented curve on a mesh.

    ``kind='primal'``: ``vertices`` is the closed vertex cycle and ``edges``,
    ``signs`` the traversed edges with +1 when walked low to high.
    ``kind='dual'``: ``faces`` is the visited face sequence and ``edges``,
    ``signs`` the crossed edges with the cochain value of each crossing.
    """

    kind: str
    edges: np.ndarray
    signs: np.ndarray
    vertices: np.ndarray | None = None
    faces: np.ndarray | None = None
    closed: bool = True

    def cochain(self, n_edges):
        c = np.zeros(n_edges, dtype=np.int64)
        np.add.at(c, self.edges, self.signs)
        return c

    def integrate(self, omega):
        """Line integral of a 1-cochain along a primal curve."""
        if self.kind != "primal":
            raise ValueError("only primal curves can be integrated along")
        return float(np.dot(np.asarray(omega)[self.edges], self.signs))


# -- cup product --------------------------------------------------------------

_WEDGE_CACHE: dict = {}


def _wedge(mesh):
    key = id(mesh)
    hit = _WEDGE_CACHE.get(key)
    if hit is None or hit[0] is not mesh:
        _WEDGE_CACHE.clear()
        hit = (mesh, wedge_matrix(mesh))
        _WEDGE_CACHE[key] = hit
    return hit[1]


def _is_integral(x):
    x = np.asarray(x)
    if x.dtype.kind in "iu":
        return True
    return bool(np.all(np.isfinite(x)) and np.all(x == np.round(x)) and np.max(np.abs(x), initial=0) < 2 ** 40)


def cup_product(mesh, a, b):
    """Integral of the wedge of the Whitney interpolants of ``a`` and ``b``.

    Integer cochains give an exact result (an ``int`` when integral,
    otherwise a ``Fraction``); real cochains give a float.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != (mesh.n_edges,) or b.shape != (mesh.n_edges,):
        raise MeshMismatch("cochain length does not match the mesh edge count")
    C = _wedge(mesh)
    if _is_integral(a) and _is_integral(b):
        ai = np.round(a).astype(np.int64)
        bi = np.round(b).astype(np.int64)
        six = int(ai @ (C @ bi))
        q = Fraction(six, 6)
        return q.numerator if q.denominator == 1 else q
    return float(a.astype(float) @ (C @ b.astype(float))) / 6.0


def cup_matrix(mesh, rows, cols):
    """Matrix of cup products; exact entries when all cochains are integral."""
    return [[cup_product(mesh, a, b) for b in cols] for a in rows]


# -- tree-cotree --------------------------------------------------------------

def _face_edge_sign(mesh, f, e):
    row = mesh.tri_edges[f]
    return int(mesh.tri_edge_signs[f][np.flatnonzero(row == e)[0]])


def _primal_tree(mesh):
    """Spanning tree containing every boundary edge except one per loop.

    Remaining edges are added nearest-to-origin first, ties by edge index.
    """
    E = mesh.edges
    V = mesh.vertices
    ds = DisjointSet(range(mesh.n_vertices))
    in_tree = np.zeros(mesh.n_edges, bool)
    bnd = np.flatnonzero(mesh.is_boundary_edge)
    radius = np.maximum(np.linalg.norm(V[E[:, 0]], axis=1), np.linalg.norm(V[E[:, 1]], axis=1))
    inner = np.flatnonzero(~mesh.is_boundary_edge)
    inner = inner[np.lexsort((inner, radius[inner]))]
    for e in np.concatenate([bnd, inner]):
        u, v = int(E[e, 0]), int(E[e, 1])
        if not ds.connected(u, v):
            ds.merge(u, v)
            in_tree[e] = True
    return in_tree


def _central_face(mesh):
    c = mesh.vertices[mesh.triangles].mean(axis=1)
    return int(np.argmin(np.linalg.norm(c, axis=1)))


def tree_cotree(mesh):
    """Tree-cotree split.  Returns ``(tree_mask, dual_parent, dual_parent_edge, leftover)``.

    ``dual_parent[f]`` is the parent face in the dual BFS tree (-1 at the
    root) and ``dual_parent_edge[f]`` the edge crossed to reach it.
    ``leftover`` lists the 2g edges in neither tree.
    """
    if mesh.n_components() != 1:
        raise GeometryError("tree-cotree needs a connected mesh")
    tree = _primal_tree(mesh)
    ef = mesh.edge_faces
    cand = np.flatnonzero(~tree & ~mesh.is_boundary_edge)
    n = mesh.n_faces
    # face graph over the candidate dual edges; store edge id + 1 as data
    A = sp.coo_matrix((cand + 1, (ef[cand, 0], ef[cand, 1])), shape=(n, n)).tocsr()
    A = (A + A.T).tocsr()
    root = _central_face(mesh)
    order, pred = csgraph.breadth_first_order(A, root, directed=False, return_predecessors=True)
    if len(order) != n:
        raise GeometryError("dual graph is disconnected; mesh is not a valid surface")
    parent = np.where(pred < 0, -1, pred)
    parent[root] = -1
    parent_edge = -np.ones(n, dtype=np.int64)
    for f in order[1:]:
        parent_edge[f] = A[f, parent[f]] - 1
    in_dual = np.zeros(mesh.n_edges, bool)
    in_dual[parent_edge[parent_edge >= 0]] = True
    leftover = np.flatnonzero(~tree & ~in_dual & ~mesh.is_boundary_edge)
    _, g, _ = topology(mesh)
    if len(leftover) != 2 * g:
        raise GeometryError(f"tree-cotree left {len(leftover)} edges, expected {2 * g}")
    return tree, parent, parent_edge, leftover


def _root_path(parent, f):
    path = [f]
    while parent[path[-1]] >= 0:
        path.append(int(parent[path[-1]]))
    return path


def _dual_cycle(mesh, parent, parent_edge, e):
    """Closed dual cycle: across ``e`` from its left face, then back through the tree."""
    f1, f2 = (int(x) for x in mesh.edge_faces[e])
    p1 = _root_path(parent, f1)
    p2 = _root_path(parent, f2)
    while len(p1) > 1 and len(p2) > 1 and p1[-2] == p2[-2]:
        p1.pop()
        p2.pop()
    seq = [f1] + p2 + p1[-2::-1]
    edges, signs = [], []
    for step, (fa, fb) in enumerate(zip(seq[:-1], seq[1:])):
        if step == 0:
            x = e
        elif parent[fa] == fb:
            x = int(parent_edge[fa])
        else:
            x = int(parent_edge[fb])
        edges.append(x)
        signs.append(_face_edge_sign(mesh, fa, x))
    return CurveOnMesh("dual", np.array(edges, np.int64), np.array(signs, np.int64), faces=np.array(seq[:-1]))


def _primal_loop(mesh, tree, e):
    """Closed primal loop: the tree path from one end of ``e`` to the other, closed by ``e``."""
    E = mesh.edges
    idx = np.flatnonzero(tree)
    n = mesh.n_vertices
    T = sp.coo_matrix((idx + 1, (E[idx, 0], E[idx, 1])), shape=(n, n)).tocsr()
    T = (T + T.T).tocsr()
    u, v = int(E[e, 0]), int(E[e, 1])
    _, pred = csgraph.breadth_first_order(T, v, directed=False, return_predecessors=True)
    verts = [u]
    while verts[-1] != v:
        verts.append(int(pred[verts[-1]]))
    edges = [int(T[a, b]) - 1 for a, b in zip(verts[:-1], verts[1:])] + [int(e)]
    cyc = verts + [u]
    signs = [1 if a < b else -1 for a, b in zip(cyc[:-1], cyc[1:])]
    return CurveOnMesh("primal", np.array(edges, np.int64), np.array(signs, np.int64), vertices=np.array(verts))


def tree_cotree_generators(mesh):
    """The 2g primal homology loops closed by the leftover edges."""
    tree, _, _, leftover = tree_cotree(mesh)
    return [_primal_loop(mesh, tree, int(e)) for e in leftover]


def _symplectic_reduce(J):
    """Integer change of basis ``X`` with ``X J X^T`` standard symplectic.

    Returns X (rows = new generators as integer combinations) ordered
    a_1..a_g, b_1..b_g with ``cup(a_i, b_i) = 1``.
    """
    J = np.array(J, dtype=object)
    n = J.shape[0]
    X = [np.eye(n, dtype=object)[i] for i in range(n)]
    pool = list(range(n))
    vecs = {i: X[i] for i in pool}
    A, B = [], []

    def form(x, y):
        return int(x @ J @ y)

    remaining = [vecs[i] for i in pool]
    while remaining:
        a = remaining.pop(0)
        j = next((k for k, y in enumerate(remaining) if abs(form(a, y)) == 1), None)
        if j is None:
            raise GeometryError("intersection form is not reducible by unit pivots")
        b = remaining.pop(j)
        if form(a, b) == -1:
            b = -b
        A.append(a)
        B.append(b)
        remaining = [x - form(x, b) * a + form(x, a) * b for x in remaining]
    return np.array(A + B, dtype=object)


def loop_cocycles(mesh):
    """2g compactly supported integer cocycles in symplectic order.

    ``cup(nu[i], nu[g + i]) = 1`` and all other pairs have cup product 0;
    the first g form a Lagrangian half.
    """
    tree, parent, parent_edge, leftover = tree_cotree(mesh)
    raw = [_dual_cycle(mesh, parent, parent_edge, int(e)).cochain(mesh.n_edges) for e in leftover]
    if not raw:
        return []
    J = cup_matrix(mesh, raw, raw)
    X = _symplectic_reduce(J)
    R = np.array(raw, dtype=np.int64)
    return [np.asarray(row.astype(np.int64) @ R, dtype=np.int64) for row in X]


# -- ends -----------------------------------------------------------------------

def _label_key(label):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", label)]


def distinguished_end(ends):
    """The end with the largest label (natural ordering)."""
    return max(ends, key=lambda e: _label_key(e.label))


def _check_end(mesh, end):
    if not 0 <= end.boundary_loop_index < len(mesh.boundary_loops):
        raise AmbiguousEnd(f"end {end.label} refers to a missing boundary loop")


def end_cut_cocycle(mesh, ends, k, r=None, edge_cost=None):
    """Dual path from end ``r`` to end ``k`` and its cut-cocycle.

    ``ends`` is the list of EndMark; ``k`` and ``r`` are labels or indices into
    it (``r`` defaults to the distinguished end).  The path minimizes the
    summed ``edge_cost`` of crossed edges (hop count when omitted).  The
    returned cochain takes values in {-1, 0, 1} and is closed on every face.
    """
    if len(ends) < 2:
        raise AmbiguousEnd("need at least two marked ends")

    def pick(x):
        if isinstance(x, str):
            hits = [e for e in ends if e.label == x]
            if len(hits) != 1:
                raise AmbiguousEnd(f"no unique end labelled {x!r}")
            return hits[0]
        return ends[x]

    ek = pick(k)
    er = distinguished_end(ends) if r is None else pick(r)
    if ek.boundary_loop_index == er.boundary_loop_index:
        raise AmbiguousEnd("source and target ends coincide")
    for e in (ek, er):
        _check_end(mesh, e)
    cost = np.ones(mesh.n_edges) if edge_cost is None else np.asarray(edge_cost, float)
    nf = mesh.n_faces
    src, snk = nf, nf + 1
    ef = mesh.edge_faces
    inner = np.flatnonzero(~mesh.is_boundary_edge)
    best = {}

    def add(a, b, c, e):
        key = (min(a, b), max(a, b))
        if key not in best or c < best[key][0]:
            best[key] = (c, e)

    for e in inner:
        add(int(ef[e, 0]), int(ef[e, 1]), cost[e], int(e))
    src_edges = mesh.boundary_loop_edges(er.boundary_loop_index)[0]
    snk_edges = mesh.boundary_loop_edges(ek.boundary_loop_index)[0]
    for e in src_edges:
        add(src, int(ef[e].max()), cost[e], int(e))
    for e in snk_edges:
        add(int(ef[e].max()), snk, cost[e], int(e))
    keys = np.array(list(best.keys()))
    vals = np.array([best[tuple(kk)][0] for kk in keys])
    # zero weights would vanish from the sparse graph
    vals = np.maximum(vals, 1e-300)
    G = sp.coo_matrix((vals, (keys[:, 0], keys[:, 1])), shape=(nf + 2, nf + 2)).tocsr()
    dist, pred = csgraph.dijkstra(G, directed=False, indices=src, return_predecessors=True)
    if not np.isfinite(dist[snk]):
        raise NoPath(f"no dual path between ends {er.label} and {ek.label}")
    nodes = [snk]
    while nodes[-1] != src:
        nodes.append(int(pred[nodes[-1]]))
    nodes = nodes[::-1]
    edges, signs = [], []
    for a, b in zip(nodes[:-1], nodes[1:]):
        e = best[(min(a, b), max(a, b))][1]
        if a == src:
            s = -_face_edge_sign(mesh, b, e)
        else:
            s = _face_edge_sign(mesh, a, e)
        edges.append(e)
        signs.append(s)
    alpha = CurveOnMesh("dual", np.array(edges, np.int64), np.array(signs, np.int64),
                        faces=np.array(nodes[1:-1]), closed=False)
    return alpha, alpha.cochain(mesh.n_edges)


def end_region(mesh, end, R_beta):
    """Vertices joined to the end's boundary loop through vertices with ``|x| >= R_beta``."""
    _check_end(mesh, end)
    far = np.linalg.norm(mesh.vertices, axis=1) >= R_beta
    loop = mesh.boundary_loop_vertices(end.boundary_loop_index)
    if not np.all(far[loop]):
        raise AmbiguousEnd(f"end {end.label} boundary is not outside radius {R_beta}")
    adj = mesh.vertex_adjacency().tocoo()
    keep = far[adj.row] & far[adj.col]
    n = mesh.n_vertices
    A = sp.csr_matrix((np.ones(keep.sum()), (adj.row[keep], adj.col[keep])), shape=(n, n))
    _, labels = csgraph.connected_components(A, directed=False)
    region = far & (labels == labels[loop[0]])
    for other in range(len(mesh.boundary_loops)):
        if other != end.boundary_loop_index and np.any(region[mesh.boundary_loop_vertices(other)]):
            raise AmbiguousEnd(f"radius {R_beta} does not separate end {end.label} from loop {other}")
    return region


def separating_loop_cocycle(mesh, end, R_beta):
    """Loop ``beta`` around the end near radius ``R_beta`` and its dual cocycle.

    ``gamma = d(1_U)`` with U the end region beyond ``R_beta``: an integer
    closed cochain supported on the edges leaving U.  ``beta`` is the inner
    boundary of the faces inside U, oriented as the boundary of U.
    """
    region = end_region(mesh, end, R_beta)
    gamma = (mesh.d0() @ region.astype(np.int64)).astype(np.int64)
    faces = np.all(region[mesh.triangles], axis=1)
    sub, keep = mesh.submesh(faces)
    outer = frozenset(mesh.boundary_loop_vertices(end.boundary_loop_index).tolist())
    beta = None
    for i in range(len(sub.boundary_loops)):
        verts = keep[sub.boundary_loop_vertices(i)]
        if frozenset(verts.tolist()) != outer:
            if beta is not None:
                raise AmbiguousEnd(f"end region of {end.label} has several inner boundaries")
            beta = _loop_from_vertices(mesh, verts)
    if beta is None:
        raise AmbiguousEnd(f"no inner boundary found for end {end.label}")
    return beta, gamma


def _loop_from_vertices(mesh, verts):
    n = mesh.n_vertices
    E = mesh.edges
    key = {int(a) * n + int(b): i for i, (a, b) in enumerate(E)}
    edges, signs = [], []
    cyc = list(verts) + [verts[0]]
    for a, b in zip(cyc[:-1], cyc[1:]):
        lo, hi = min(a, b), max(a, b)
        edges.append(key[int(lo) * n + int(hi)])
        signs.append(1 if a < b else -1)
    return CurveOnMesh("primal", np.array(edges, np.int64), np.array(signs, np.int64), vertices=np.asarray(verts))


# -- basis ------------------------------------------------------------------------

@dataclass
class CohomologyBasis:
    """Closed cochains realizing the independence argument.

    ``nu``: 2g loop cocycles (symplectic order); ``tau``: their duals with
    ``cup(tau_j, nu_i) = delta_ij`` and ``cup(tau_j, eta_k) = 0``;
    ``eta``: r-1 end cocycles; ``gammaf``: separating cocycles with
    ``cup(gamma_m, eta_k) = delta_mk``.  ``pairing`` is the exact cup matrix
    of ``tau + gammaf`` against ``nu + eta``.
    """

    nu: list
    tau: list
    eta: list
    gammaf: list
    alpha: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    end_labels: list = field(default_factory=list)
    pairing: list = field(default_factory=list)
    nu_star: list = field(default_factory=list)

    @property
    def genus(self):
        return len(self.nu) // 2

    @property
    def lagrangian(self):
        return self.nu[: self.genus]


def _int_inverse(J):
    J = np.array(J, dtype=np.int64)
    X = np.round(np.linalg.inv(J.astype(float))).astype(np.int64)
    if not np.array_equal(X @ J, np.eye(len(J), dtype=np.int64)):
        raise GeometryError("intersection matrix is not unimodular")
    return X


def cohomology_basis(mesh, ends=(), edge_cost=None, R_beta=None):
    """Assemble nu, tau, eta, gamma and their exact pairing matrix."""
    nu = loop_cocycles(mesh)
    ends = list(ends)
    eta, gam, alphas, betas, labels = [], [], [], [], []
    if len(ends) >= 2:
        dist = distinguished_end(ends)
        others = sorted([e for e in ends if e is not dist], key=lambda e: _label_key(e.label))
        if R_beta is None:
            R_beta = 0.5 * min(e.cone_radius for e in ends)
        for e in others:
            alpha, eta_k = end_cut_cocycle(mesh, ends, e.label, dist.label, edge_cost)
            beta, gamma_k = separating_loop_cocycle(mesh, e, R_beta)
            s = cup_product(mesh, gamma_k, eta_k)
            if s not in (1, -1):
                raise GeometryError(f"end path crosses the separating loop of {e.label} {s} times")
            if s == -1:
                eta_k = -eta_k
                alpha = CurveOnMesh("dual", alpha.edges, -alpha.signs, faces=alpha.faces, closed=False)
            if beta.integrate(eta_k) < 0:
                beta = CurveOnMesh("primal", beta.edges[::-1], -beta.signs[::-1], vertices=beta.vertices[::-1])
            eta.append(eta_k)
            gam.append(gamma_k)
            alphas.append(alpha)
            betas.append(beta)
            labels.append(e.label)
    tau = []
    if nu:
        J = cup_matrix(mesh, nu, nu)
        X = _int_inverse(J)
        R = np.array(nu, dtype=np.int64)
        for j in range(len(nu)):
            t = X[j] @ R
            for k, (eta_k, gamma_k) in enumerate(zip(eta, gam)):
                c = cup_product(mesh, t, eta_k)
                t = t - int(c) * gamma_k
            tau.append(np.asarray(t, dtype=np.int64))
    pairing = cup_matrix(mesh, tau + gam, nu + eta)
    return CohomologyBasis(nu, tau, eta, gam, alphas, betas, labels, pairing)


def integer_rank(M):
    """Rank over the rationals of a small integer or Fraction matrix."""
    rows = [[Fraction(x) for x in r] for r in M]
    if not rows:
        return 0
    rank, ncol = 0, len(rows[0])
    for c in range(ncol):
        piv = next((i for i in range(rank, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i][c] != 0:
                f = rows[i][c] / rows[rank][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[rank])]
        rank += 1
    return rank


def is_closed(mesh, omega, tol=0.0):
    r = mesh.d1() @ np.asarray(omega)
    return bool(np.max(np.abs(r), initial=0) <= tol)


__all__ = [
    "CurveOnMesh", "CohomologyBasis", "cup_product", "cup_matrix", "tree_cotree", "tree_cotree_generators",
    "loop_cocycles", "end_cut_cocycle", "separating_loop_cocycle", "cohomology_basis", "distinguished_end",
    "end_region", "integer_rank", "is_closed",
]
