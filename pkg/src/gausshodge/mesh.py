"""Oriented manifold triangle meshes immersed in R^3.

A :class:`SurfaceMesh` is immutable after construction.  Construction
validates the input (index range, degenerate triangles, manifold edges and
vertices, orientability), makes the triangle orientation consistent and
builds halfedge connectivity plus the ordered boundary loops.

Edges are oriented from the lower to the higher vertex index.  Halfedge
``3*t + k`` runs from ``triangles[t, k]`` to ``triangles[t, (k+1) % 3]``.
"""

from __future__ import annotations

import hashlib
import io
import logging
import os
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .errors import (
    DegenerateTriangle,
    EmptyResult,
    NonManifold,
    NonOrientable,
    ParseError,
    TopologyError,
)

logger = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-14


@dataclass(frozen=True)
class EndMark:
    """A boundary loop marked as the truncation of an asymptotically conical end."""

    boundary_loop_index: int
    cone_radius: float
    label: str

    def to_dict(self):
        return {
            "boundary_loop_index": int(self.boundary_loop_index),
            "cone_radius": float(self.cone_radius),
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["boundary_loop_index"]), float(d["cone_radius"]), str(d["label"]))


def _orient_consistently(triangles):
    """Flip triangles so that every interior edge is traversed in opposite directions.

    Raises NonManifold for edges with more than two incident triangles and
    NonOrientable when no consistent orientation exists.
    """
    m = len(triangles)
    heads = triangles.reshape(-1)
    tails = np.roll(triangles, -1, axis=1).reshape(-1)
    lo = np.minimum(heads, tails)
    hi = np.maximum(heads, tails)
    order = np.lexsort((hi, lo))
    lo_s, hi_s = lo[order], hi[order]
    new_group = np.ones(len(order), dtype=bool)
    new_group[1:] = (lo_s[1:] != lo_s[:-1]) | (hi_s[1:] != hi_s[:-1])
    group_id = np.cumsum(new_group) - 1
    counts = np.bincount(group_id)
    if counts.max(initial=0) > 2:
        bad = np.flatnonzero(counts > 2)[0]
        first = order[np.flatnonzero(group_id == bad)[0]]
        raise NonManifold(f"edge ({lo[first]}, {hi[first]}) has {counts[bad]} incident triangles")

    # pairs of halfedges sharing an edge
    pair_start = np.flatnonzero(new_group)
    pair_start = pair_start[counts == 2]
    h1 = order[pair_start]
    h2 = order[pair_start + 1]
    t1, t2 = h1 // 3, h2 // 3
    same_dir = heads[h1] == heads[h2]
    if np.any(t1 == t2):
        raise NonManifold("triangle uses the same edge twice")

    adj = [[] for _ in range(m)]
    for a, b, s in zip(t1.tolist(), t2.tolist(), same_dir.tolist()):
        adj[a].append((b, s))
        adj[b].append((a, s))

    flip = np.full(m, -1, dtype=np.int8)
    for seed in range(m):
        if flip[seed] >= 0:
            continue
        flip[seed] = 0
        queue = deque([seed])
        while queue:
            t = queue.popleft()
            for u, s in adj[t]:
                want = flip[t] ^ int(s)
                if flip[u] < 0:
                    flip[u] = want
                    queue.append(u)
                elif flip[u] != want:
                    raise NonOrientable("no consistent orientation exists")
    out = triangles.copy()
    f = flip.astype(bool)
    out[f] = out[f][:, ::-1]
    return out, int(f.sum())


class SurfaceMesh:
    """Oriented manifold triangle mesh with halfedge connectivity.

    Parameters
    ----------
    vertices : (n, 3) array_like
        Vertex positions.
    triangles : (m, 3) array_like of int
        Vertex index triples.  Orientation is made consistent (the
        orientation of the lowest-index triangle in each component wins).

    Attributes
    ----------
    edges : (E, 2) int array, sorted so that ``edges[:, 0] < edges[:, 1]``.
    tri_edges : (m, 3) edge index of halfedge ``3*t + k``.
    tri_edge_signs : (m, 3) +1 when the halfedge agrees with the edge orientation.
    edge_faces : (E, 2) the triangle left of the edge (containing halfedge
        lo->hi) and the one right of it; -1 marks a missing side.
    he_twin : (3m,) opposite halfedge or -1 on the boundary.
    boundary_loops : list of int arrays of boundary halfedges in traversal order.
    """

    def __init__(self, vertices, triangles):
        v = np.asarray(vertices, dtype=float)
        t = np.asarray(triangles)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ParseError("vertices must have shape (n, 3)")
        if t.size == 0:
            raise EmptyResult("mesh has no triangles")
        if t.ndim != 2 or t.shape[1] != 3:
            raise ParseError("triangles must have shape (m, 3)")
        if not np.all(np.isfinite(v)):
            raise ParseError("non-finite vertex coordinate")
        t = t.astype(np.int64)
        if t.min() < 0 or t.max() >= len(v):
            raise ParseError("triangle references a vertex index out of range")
        if np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
            raise DegenerateTriangle("triangle with repeated vertex")
        used = np.zeros(len(v), dtype=bool)
        used[t.ravel()] = True
        if not used.all():
            raise ParseError(f"{int((~used).sum())} unreferenced vertices")

        t, nflip = _orient_consistently(t)
        if nflip:
            logger.debug("flipped %d triangles for consistent orientation", nflip)

        self.vertices = v
        self.triangles = t
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)

        e0 = v[t[:, 1]] - v[t[:, 0]]
        e1 = v[t[:, 2]] - v[t[:, 0]]
        cr = np.cross(e0, e1)
        self.face_areas = 0.5 * np.linalg.norm(cr, axis=1)
        if np.any(self.face_areas <= DEGENERATE_AREA):
            bad = int(np.argmin(self.face_areas))
            raise DegenerateTriangle(f"triangle {bad} has area {self.face_areas[bad]:.3e}")
        self.face_normals = cr / (2.0 * self.face_areas[:, None])

        self._build_connectivity()
        self._check_vertex_manifold()
        self._build_boundary_loops()

    # -- construction helpers -------------------------------------------------
    def _build_connectivity(self):
        t = self.triangles
        m = len(t)
        heads = t.reshape(-1)
        tails = np.roll(t, -1, axis=1).reshape(-1)
        lo = np.minimum(heads, tails)
        hi = np.maximum(heads, tails)
        key = lo * len(self.vertices) + hi
        uniq, inverse = np.unique(key, return_inverse=True)
        n = len(self.vertices)
        self.edges = np.stack([uniq // n, uniq % n], axis=1)
        self.tri_edges = inverse.reshape(m, 3)
        self.tri_edge_signs = np.where(heads < tails, 1, -1).reshape(m, 3)
        self.he_origin = heads
        self.he_dest = tails

        E = len(self.edges)
        edge_faces = -np.ones((E, 2), dtype=np.int64)
        face_of_he = np.arange(3 * m) // 3
        pos = self.tri_edge_signs.reshape(-1) > 0
        edge_faces[inverse[pos], 0] = face_of_he[pos]
        edge_faces[inverse[~pos], 1] = face_of_he[~pos]
        self.edge_faces = edge_faces
        self.edge_halfedges = -np.ones((E, 2), dtype=np.int64)
        hid = np.arange(3 * m)
        self.edge_halfedges[inverse[pos], 0] = hid[pos]
        self.edge_halfedges[inverse[~pos], 1] = hid[~pos]

        twin = -np.ones(3 * m, dtype=np.int64)
        both = (self.edge_halfedges >= 0).all(axis=1)
        a, b = self.edge_halfedges[both, 0], self.edge_halfedges[both, 1]
        twin[a] = b
        twin[b] = a
        self.he_twin = twin
        self.is_boundary_edge = ~both
        for arr in (self.edges, self.tri_edges, self.tri_edge_signs, self.edge_faces, self.he_twin):
            arr.setflags(write=False)

    def _check_vertex_manifold(self):
        # corners joined across interior edges; one fan per vertex
        t = self.triangles
        m = len(t)
        E = self.edges
        inner = ~self.is_boundary_edge
        f0, f1 = self.edge_faces[inner, 0], self.edge_faces[inner, 1]
        rows, cols = [], []
        for end in (0, 1):
            vert = E[inner, end]
            k0 = np.argmax(t[f0] == vert[:, None], axis=1)
            k1 = np.argmax(t[f1] == vert[:, None], axis=1)
            rows.append(3 * f0 + k0)
            cols.append(3 * f1 + k1)
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        g = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(3 * m, 3 * m))
        ncomp, labels = connected_components(g, directed=False)
        fans = np.zeros(len(self.vertices), dtype=np.int64)
        comp_vertex = np.zeros(ncomp, dtype=np.int64)
        comp_vertex[labels] = t.reshape(-1)
        np.add.at(fans, comp_vertex, 1)
        if np.any(fans > 1):
            bad = int(np.flatnonzero(fans > 1)[0])
            raise NonManifold(f"vertex {bad} has {fans[bad]} disconnected triangle fans")

    def _build_boundary_loops(self):
        bhe = np.flatnonzero(self.he_twin < 0)
        start_of = {}
        for h in bhe.tolist():
            o = int(self.he_origin[h])
            if o in start_of:
                raise NonManifold(f"boundary vertex {o} is pinched")
            start_of[o] = h
        seen = set()
        loops = []
        for h0 in sorted(bhe.tolist()):
            if h0 in seen:
                continue
            loop = []
            h = h0
            while h not in seen:
                seen.add(h)
                loop.append(h)
                h = start_of[int(self.he_dest[h])]
            if h != h0:
                raise NonManifold("boundary halfedges do not close into loops")
            loops.append(np.array(loop, dtype=np.int64))
        self.boundary_loops = loops
        self.is_boundary_vertex = np.zeros(len(self.vertices), dtype=bool)
        self.is_boundary_vertex[self.he_origin[bhe]] = True

    # -- basic queries ----------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_faces(self):
        return len(self.triangles)

    def he_next(self, h):
        return 3 * (h // 3) + (h % 3 + 1) % 3

    def he_prev(self, h):
        return 3 * (h // 3) + (h % 3 + 2) % 3

    def he_edge(self, h):
        return self.tri_edges.reshape(-1)[h]

    def he_sign(self, h):
        return self.tri_edge_signs.reshape(-1)[h]

    def boundary_loop_vertices(self, i):
        return self.he_origin[self.boundary_loops[i]]

    def boundary_loop_edges(self, i):
        """Edge ids and signs (+1 when the edge orientation follows the loop)."""
        h = self.boundary_loops[i]
        return self.he_edge(h), self.he_sign(h)

    def edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.linalg.norm(d, axis=1)

    def d0(self):
        """Signed vertex-to-edge incidence (discrete d on 0-cochains), shape (E, V)."""
        E = self.n_edges
        rows = np.repeat(np.arange(E), 2)
        cols = self.edges.reshape(-1)
        vals = np.tile([-1, 1], E)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(E, self.n_vertices), dtype=np.int64)

    def d1(self):
        """Signed edge-to-face incidence (discrete d on 1-cochains), shape (F, E)."""
        m = self.n_faces
        rows = np.repeat(np.arange(m), 3)
        return sparse.csr_matrix(
            (self.tri_edge_signs.reshape(-1), (rows, self.tri_edges.reshape(-1))),
            shape=(m, self.n_edges),
            dtype=np.int64,
        )

    def vertex_adjacency(self):
        E = self.edges
        n = self.n_vertices
        a = sparse.coo_matrix((np.ones(len(E)), (E[:, 0], E[:, 1])), shape=(n, n))
        return (a + a.T).tocsr()

    def n_components(self):
        return connected_components(self.vertex_adjacency(), directed=False)[0]

    def submesh(self, tri_mask):
        """Mesh made of the selected triangles, plus the old indices of its vertices."""
        tri_mask = np.asarray(tri_mask, dtype=bool)
        if not tri_mask.any():
            raise EmptyResult("no triangle selected")
        t = self.triangles[tri_mask]
        keep = np.unique(t)
        remap = -np.ones(self.n_vertices, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        return SurfaceMesh(self.vertices[keep], remap[t]), keep

    def content_hash(self):
        return hashlib.sha256(format_off(self).encode()).hexdigest()

    def __repr__(self):
        return f"SurfaceMesh(V={self.n_vertices}, E={self.n_edges}, F={self.n_faces}, loops={len(self.boundary_loops)})"


def topology(mesh):
    """Return ``(chi, genus, boundary_loops)`` of a connected mesh."""
    chi = mesh.n_vertices - mesh.n_edges + mesh.n_faces
    b = len(mesh.boundary_loops)
    twice_g = 2 - chi - b
    if twice_g < 0 or twice_g % 2:
        raise TopologyError(f"inconsistent topology: chi={chi}, boundary loops={b}")
    return chi, twice_g // 2, b


def truncate(mesh, R, return_vertex_map=False):
    """Keep the triangles whose three vertices satisfy ``|x| <= R``.

    Whole triangles are kept; no triangle is split.  A relative slack of
    1e-12 absorbs round-off for vertices placed exactly on the sphere |x| = R.
    """
    if R <= 0:
        raise ValueError("truncation radius must be positive")
    inside = np.linalg.norm(mesh.vertices, axis=1) <= R * (1 + 1e-12)
    mask = inside[mesh.triangles].all(axis=1)
    if not mask.any():
        raise EmptyResult(f"no triangle inside the ball of radius {R}")
    if mask.all():
        out = (mesh, np.arange(mesh.n_vertices))
    else:
        out = mesh.submesh(mask)
    return out if return_vertex_map else out[0]


# -- file I/O ------------------------------------------------------------------

def _fmt(x):
    return format(float(x), ".17g")


def format_off(mesh):
    buf = io.StringIO()
    buf.write("OFF\n")
    buf.write(f"{mesh.n_vertices} {mesh.n_faces} {mesh.n_edges}\n")
    for p in mesh.vertices:
        buf.write(" ".join(_fmt(c) for c in p) + "\n")
    for tri in mesh.triangles:
        buf.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n")
    return buf.getvalue()


def format_obj(mesh):
    buf = io.StringIO()
    for p in mesh.vertices:
        buf.write("v " + " ".join(_fmt(c) for c in p) + "\n")
    for tri in mesh.triangles:
        buf.write(f"f {tri[0] + 1} {tri[1] + 1} {tri[2] + 1}\n")
    return buf.getvalue()


def _parse_off(text):
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise ParseError("missing OFF header")
    try:
        nv, nf = int(tokens[1]), int(tokens[2])
        pos = 4
        verts = np.array(tokens[pos:pos + 3 * nv], dtype=float).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for _ in range(nf):
            k = int(tokens[pos])
            idx = [int(s) for s in tokens[pos + 1:pos + 1 + k]]
            if len(idx) != k:
                raise ParseError("truncated face record")
            pos += 1 + k
            faces.extend(_fan(idx))
    except (IndexError, ValueError) as exc:
        raise ParseError(f"malformed OFF: {exc}") from exc
    return verts, faces


def _fan(idx):
    if len(idx) < 3:
        raise ParseError("face with fewer than three vertices")
    return [(idx[0], idx[i], idx[i + 1]) for i in range(1, len(idx) - 1)]


def _parse_obj(text):
    verts, faces = [], []
    try:
        for line in text.splitlines():
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(s) for s in parts[1:4]])
            elif parts[0] == "f":
                idx = []
                for s in parts[1:]:
                    i = int(s.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                faces.extend(_fan(idx))
    except ValueError as exc:
        raise ParseError(f"malformed OBJ: {exc}") from exc
    return np.array(verts, dtype=float).reshape(-1, 3), faces


def load_mesh(path, format=None):
    """Read an OFF or OBJ triangle file (format inferred from the suffix)."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).upper()
    text = path.read_text()
    if fmt == "OFF":
        verts, faces = _parse_off(text)
    elif fmt == "OBJ":
        verts, faces = _parse_obj(text)
    else:
        raise ParseError(f"unsupported mesh format {fmt!r}")
    faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
    if faces.size and (faces.min() < 0 or faces.max() >= len(verts)):
        raise ParseError("triangle references a vertex index out of range")
    return SurfaceMesh(verts, faces)


def atomic_write_text(path, text):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_mesh(mesh, path, format=None):
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).upper()
    if fmt == "OFF":
        text = format_off(mesh)
    elif fmt == "OBJ":
        text = format_obj(mesh)
    else:
        raise ParseError(f"unsupported mesh format {fmt!r}")
    atomic_write_text(path, text)
