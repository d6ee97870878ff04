"""Differential geometry over a SurfaceMesh and the simple model surfaces.

Conventions: the shape operator is ``S = dN`` (the differential of the
stored unit normal), ``H = trace S = kappa1 + kappa2`` and the shrinker
residual is ``H - <x/2, N>``.  With outward normals the round sphere of
radius 2 and the cylinder of radius sqrt(2) have zero residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateRing, GeometryError, MissingCurvature
from .mesh import EndMark, SurfaceMesh, truncate
from .shapes import grid_triangles, icosphere, zip_rings

FOUR_PI = 4.0 * math.pi


def gaussian_weight(x):
    """Gaussian density ``exp(-|x|^2/4) / (4 pi)`` at points ``x`` (..., 3)."""
    x = np.asarray(x, dtype=float)
    return np.exp(-np.einsum("...i,...i->...", x, x) / 4.0) / FOUR_PI


def vertex_normals(mesh):
    """Area-weighted average of incident face normals."""
    n = np.zeros((mesh.n_vertices, 3))
    fn = mesh.face_normals * mesh.face_areas[:, None]
    for k in range(3):
        np.add.at(n, mesh.triangles[:, k], fn)
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def tangent_frames(normals):
    """Orthonormal tangent pairs ``(t1, t2)`` with ``t1 x t2 = N``; shape (n, 2, 3)."""
    N = np.asarray(normals, dtype=float)
    helper = np.where(np.abs(N[:, [0]]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    t1 = np.cross(N, helper)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(N, t1)
    return np.stack([t1, t2], axis=1)


@dataclass
class ImmersedGeometry:
    """Per-vertex geometry of an immersed mesh.

    ``frames[v]`` holds an orthonormal tangent basis; ``shape_operator[v]``
    is the symmetric 2x2 matrix of dN in that basis (units 1/length).
    ``weight`` is the Gaussian density at the vertices.  ``meta`` carries
    generator bookkeeping (parameters, end grids, shooting logs).
    """

    mesh: SurfaceMesh
    normals: np.ndarray
    frames: np.ndarray
    shape_operator: np.ndarray | None = None
    kappa1: np.ndarray | None = None
    kappa2: np.ndarray | None = None
    ends: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weight = gaussian_weight(self.mesh.vertices)
        if self.shape_operator is not None and self.kappa1 is None:
            self.kappa1, self.kappa2 = principal_curvatures(self.shape_operator)

    @property
    def has_curvature(self):
        return self.shape_operator is not None

    def _need_curvature(self):
        if not self.has_curvature:
            raise MissingCurvature("curvature data not available; call shape_and_curvature first")

    @property
    def A2(self):
        """|A|^2 = kappa1^2 + kappa2^2 per vertex."""
        self._need_curvature()
        return self.kappa1 ** 2 + self.kappa2 ** 2

    @property
    def mean_curvature(self):
        self._need_curvature()
        return self.kappa1 + self.kappa2

    def shape_operator_ambient(self):
        """Shape operator as a (n, 3, 3) tangent tensor in ambient coordinates."""
        self._need_curvature()
        return np.einsum("nai,nab,nbj->nij", self.frames, self.shape_operator, self.frames)

    def pinch_constant(self):
        """``max |kappa1^2 - kappa2^2|`` over the vertices."""
        self._need_curvature()
        return float(np.max(np.abs(self.kappa1 ** 2 - self.kappa2 ** 2)))

    def restrict(self, mesh, vertex_map, ends=None):
        """Geometry of a submesh whose vertex ``i`` is old vertex ``vertex_map[i]``."""
        sel = lambda a: None if a is None else a[vertex_map]  # noqa: E731
        return ImmersedGeometry(
            mesh=mesh,
            normals=self.normals[vertex_map],
            frames=self.frames[vertex_map],
            shape_operator=sel(self.shape_operator),
            kappa1=sel(self.kappa1),
            kappa2=sel(self.kappa2),
            ends=list(ends or []),
            meta=dict(self.meta),
        )


def principal_curvatures(shape_operator):
    ev = np.linalg.eigvalsh(shape_operator)
    return ev[:, 1].copy(), ev[:, 0].copy()


def shape_and_curvature(mesh, normals, frames=None):
    """Least-squares fit of dN over each vertex 1-ring.

    For every vertex the tangential parts of ``x_u - x_v`` and ``N_u - N_v``
    over the neighbours ``u`` are related by a 2x2 matrix fitted in the
    least-squares sense, then symmetrized.  Returns ``(frames, S, k1, k2)``.
    """
    N = np.asarray(normals, dtype=float)
    if frames is None:
        frames = tangent_frames(N)
    V = mesh.vertices
    E = mesh.edges
    src = np.concatenate([E[:, 0], E[:, 1]])
    dst = np.concatenate([E[:, 1], E[:, 0]])
    dx = V[dst] - V[src]
    dn = N[dst] - N[src]
    a = np.einsum("kij,kj->ki", frames[src], dx)
    b = np.einsum("kij,kj->ki", frames[src], dn)
    n = mesh.n_vertices
    AA = np.zeros((n, 2, 2))
    BA = np.zeros((n, 2, 2))
    np.add.at(AA, src, a[:, :, None] * a[:, None, :])
    np.add.at(BA, src, b[:, :, None] * a[:, None, :])
    det = np.linalg.det(AA)
    scale = np.einsum("nii->n", AA) ** 2
    bad = det <= 1e-10 * scale
    if np.any(bad):
        raise DegenerateRing(f"vertex {int(np.flatnonzero(bad)[0])} has a rank-deficient 1-ring")
    S = BA @ np.linalg.inv(AA)
    S = 0.5 * (S + np.transpose(S, (0, 2, 1)))
    k1, k2 = principal_curvatures(S)
    return frames, S, k1, k2


def geometry_from_mesh(mesh, normals=None, ends=None, meta=None):
    """Discrete geometry: area-weighted normals (unless given) and fitted curvature."""
    if normals is None:
        normals = vertex_normals(mesh)
    frames, S, k1, k2 = shape_and_curvature(mesh, normals)
    return ImmersedGeometry(mesh, np.asarray(normals, float), frames, S, k1, k2,
                            ends=list(ends or []), meta=dict(meta or {}))


def shrinker_residual(g):
    """Per-vertex ``H - <x/2, N>``; zero where the shrinker equation holds."""
    return g.mean_curvature - 0.5 * np.einsum("ij,ij->i", g.mesh.vertices, g.normals)


def F_functional(g):
    """Gaussian area ``(1/4pi) int exp(-|x|^2/4)`` by the centroid rule."""
    mesh = g.mesh if isinstance(g, ImmersedGeometry) else g
    c = mesh.vertices[mesh.triangles].mean(axis=1)
    return math.fsum((mesh.face_areas * gaussian_weight(c)).tolist())


def truncate_geometry(g, R):
    """Restrict a geometry to ``Sigma cap B_R``; marked ends survive only if untouched."""
    mesh, vmap = truncate(g.mesh, R, return_vertex_map=True)
    if mesh is g.mesh:
        return g
    ends = []
    if g.ends:
        old_loops = [frozenset(g.mesh.boundary_loop_vertices(e.boundary_loop_index).tolist()) for e in g.ends]
        for i in range(len(mesh.boundary_loops)):
            loop = frozenset(vmap[mesh.boundary_loop_vertices(i)].tolist())
            for e, ol in zip(g.ends, old_loops):
                if loop == ol:
                    ends.append(replace(e, boundary_loop_index=i))
    return g.restrict(mesh, vmap, ends)


def _oriented_mesh(vertices, triangles, normals):
    """Build a mesh whose triangle orientation agrees with the given vertex normals."""
    mesh = SurfaceMesh(vertices, triangles)
    fn = normals[mesh.triangles].mean(axis=1)
    if np.einsum("ij,ij->", fn, mesh.face_normals) < 0:
        mesh = SurfaceMesh(vertices, mesh.triangles[:, ::-1])
    return mesh


# -- model surfaces ---------------------------------------------------------------

def gen_sphere(radius=2.0, subdivisions=4):
    """Icosphere of the given radius with exact normals and curvatures."""
    if subdivisions < 1:
        raise GeometryError("subdivisions must be >= 1")
    v, t = icosphere(subdivisions)
    N = v.copy()
    mesh = _oriented_mesh(radius * v, t, N)
    frames = tangent_frames(N)
    S = np.broadcast_to(np.eye(2) / radius, (len(v), 2, 2)).copy()
    return ImmersedGeometry(mesh, N, frames, S,
                            meta={"surface": "sphere", "radius": radius, "subdivisions": subdivisions})


def disk_rings(R, target_edge):
    """Concentric rings ``(radius, angles)`` covering a disk of radius R.

    Neighbouring rings are staggered by half a step and the arc spacing is
    ``2/sqrt(3)`` times the radial spacing, so triangles are close to
    equilateral.  The radial spacing ``0.55*target_edge`` keeps every edge,
    including the fans near the center, below ``target_edge``.
    """
    if not 0 < target_edge < R:
        raise GeometryError("need 0 < target_edge < R")
    nr = int(math.ceil(R / (0.55 * target_edge)))
    dr = R / nr
    arc = 2 * dr / math.sqrt(3)
    rings = []
    for k in range(nr):
        r = dr * (k + 1)
        n = max(6, int(round(2 * math.pi * r / arc)))
        rings.append((r, 2 * math.pi * (np.arange(n) + 0.5 * (k % 2)) / n))
    return rings


def gen_plane_disk(R=8.0, target_edge=0.2):
    """Flat disk of radius R in the plane z = 0 (a cone over the equator)."""
    rings = disk_rings(R, target_edge)
    pts = [np.zeros(3)]
    tris = []
    prev_ids = None
    prev_ang = None
    for r, ang in rings:
        start = len(pts)
        ids = np.arange(start, start + len(ang))
        pts.extend(np.stack([r * np.cos(ang), r * np.sin(ang), np.zeros(len(ang))], 1))
        if prev_ids is None:
            n = len(ids)
            tris.extend((0, ids[i], ids[(i + 1) % n]) for i in range(n))
        else:
            tris.extend(zip_rings(prev_ids, prev_ang, ids, ang).tolist())
        prev_ids, prev_ang = ids, ang
    v = np.array(pts)
    N = np.tile([0.0, 0.0, 1.0], (len(v), 1))
    mesh = _oriented_mesh(v, np.array(tris), N)
    frames = np.broadcast_to(np.array([[1.0, 0, 0], [0, 1.0, 0]]), (len(v), 2, 3)).copy()
    S = np.zeros((len(v), 2, 2))
    ends = [EndMark(0, R, "E1")]
    return ImmersedGeometry(mesh, N, frames, S, ends=ends,
                            meta={"surface": "plane", "R": R, "target_edge": target_edge})


def gen_cylinder(radius=math.sqrt(2.0), half_length=8.0, target_edge=0.2):
    """Cylinder about the z-axis, ``|z| <= half_length``, with exact curvature."""
    if radius <= 0 or half_length <= 0:
        raise GeometryError("radius and half_length must be positive")
    h = 0.85 * target_edge
    nu = max(8, int(math.ceil(2 * math.pi * radius / h)))
    nz = int(math.ceil(2 * half_length / h)) + 1
    phi = 2 * math.pi * np.arange(nu) / nu
    z = np.linspace(-half_length, half_length, nz)
    P, Z = np.meshgrid(phi, z, indexing="ij")
    P, Z = P.ravel(), Z.ravel()
    v = np.stack([radius * np.cos(P), radius * np.sin(P), Z], 1)
    N = np.stack([np.cos(P), np.sin(P), np.zeros_like(P)], 1)
    mesh = _oriented_mesh(v, grid_triangles(nu, nz, wrap_u=True), N)
    t1 = np.stack([-np.sin(P), np.cos(P), np.zeros_like(P)], 1)
    t2 = np.tile([0.0, 0.0, 1.0], (len(v), 1))
    frames = np.stack([t1, t2], 1)
    S = np.zeros((len(v), 2, 2))
    S[:, 0, 0] = 1.0 / radius
    return ImmersedGeometry(mesh, N, frames, S,
                            meta={"surface": "cylinder", "radius": radius, "half_length": half_length,
                                  "target_edge": target_edge, "ends_conical": False})


# -- sidecar ---------------------------------------------------------------------

def geometry_sidecar(g):
    """Sidecar record for ``g``: per-vertex data keyed by the mesh content hash."""
    rec = {
        "mesh_sha256": g.mesh.content_hash(),
        "normals": g.normals,
        "frames": g.frames,
        "weights": g.weight,
        "ends": [e.to_dict() for e in g.ends],
    }
    if g.has_curvature:
        rec["shape_operator"] = g.shape_operator
        rec["kappa1"] = g.kappa1
        rec["kappa2"] = g.kappa2
    return rec


def geometry_from_sidecar(mesh, rec):
    """Rebuild an ImmersedGeometry; the mesh must hash to the recorded value."""
    h = mesh.content_hash()
    if rec["mesh_sha256"] != h:
        raise GeometryError(f"sidecar belongs to mesh {rec['mesh_sha256'][:12]}, not {h[:12]}")
    S = rec.get("shape_operator")
    arr = lambda k: None if rec.get(k) is None else np.asarray(rec[k], dtype=float)  # noqa: E731
    return ImmersedGeometry(
        mesh,
        np.asarray(rec["normals"], dtype=float),
        np.asarray(rec["frames"], dtype=float),
        None if S is None else np.asarray(S, dtype=float),
        arr("kappa1"),
        arr("kappa2"),
        ends=[EndMark.from_dict(e) for e in rec.get("ends", [])],
    )
