"""Synthetic surfaces with exact conical ends and optional handles.

The core is a round sphere of radius ``core_radius``.  Each end removes a
cap and continues with the exact cone over the cap circle out to
``R_outer``; each handle removes two small caps and joins them with a tube
along a cubic Bezier arch.  These surfaces are not shrinkers; they exist to
exercise topology and end forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from .errors import GeometryError
from .geometry import geometry_from_mesh
from .mesh import EndMark, SurfaceMesh, topology
from .shapes import grid_triangles, icosphere

DEFAULT_DIRECTIONS = [(0, 0, 1), (0, 0, -1), (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)]
HANDLE_DIRECTIONS = [(0, 1, 0), (0, -1, 0)]


def _orthonormal_pair(a):
    a = np.asarray(a, float) / np.linalg.norm(a)
    helper = np.array([1.0, 0, 0]) if abs(a[0]) < 0.9 else np.array([0, 1.0, 0])
    u = np.cross(a, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(a, u)


@dataclass
class ConeSpec:
    """Closed curve ``gamma`` on the unit sphere; the end is the cone over it."""

    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim != 2 or g.shape[1] != 3 or len(g) < 3:
            raise GeometryError("gamma must be an (n, 3) array with n >= 3")
        if np.max(np.abs(np.linalg.norm(g, axis=1) - 1.0)) > 1e-12:
            raise GeometryError("gamma samples must have unit norm")
        d = np.linalg.norm(g - np.roll(g, -1, axis=0), axis=1)
        if np.min(d) < 1e-9:
            raise GeometryError("gamma has repeated samples")
        self.gamma = g

    @property
    def samples(self):
        return len(self.gamma)

    @property
    def axis(self):
        c = self.gamma.mean(axis=0)
        return c / np.linalg.norm(c)

    @property
    def angular_radius(self):
        """Largest angle between the axis and a sample."""
        return float(np.max(np.arccos(np.clip(self.gamma @ self.axis, -1, 1))))

    @classmethod
    def circle(cls, axis, half_angle, samples):
        u, v = _orthonormal_pair(axis)
        a = np.asarray(axis, float) / np.linalg.norm(axis)
        psi = 2 * math.pi * np.arange(samples) / samples
        g = (math.cos(half_angle) * a[None, :]
             + math.sin(half_angle) * (np.cos(psi)[:, None] * u + np.sin(psi)[:, None] * v))
        return cls(g / np.linalg.norm(g, axis=1, keepdims=True))


def _bezier(P, t):
    t = np.asarray(t)[:, None]
    return ((1 - t) ** 3 * P[0] + 3 * (1 - t) ** 2 * t * P[1]
            + 3 * (1 - t) * t ** 2 * P[2] + t ** 3 * P[3])


def _bezier_tangent(P, t):
    t = np.asarray(t)[:, None]
    d = (3 * (1 - t) ** 2 * (P[1] - P[0]) + 6 * (1 - t) * t * (P[2] - P[1])
         + 3 * t ** 2 * (P[3] - P[2]))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _tube(cA, cB, core_radius, cap_angle, n_ring, target_edge, lift):
    """Rings of a tube leaving the sphere at cap ``cA`` and re-entering at ``cB``."""
    P0 = core_radius * math.cos(cap_angle) * cA
    P3 = core_radius * math.cos(cap_angle) * cB
    P = np.array([P0, P0 + lift * cA, P3 + lift * cB, P3])
    tt = np.linspace(0, 1, 2001)
    length = float(np.sum(np.linalg.norm(np.diff(_bezier(P, tt), axis=0), axis=1)))
    m = max(6, int(math.ceil(length / target_edge)))
    t = np.linspace(0, 1, m + 1)
    C = _bezier(P, t)
    T = _bezier_tangent(P, t)
    # parallel transport of a normal frame along the arch
    u, _ = _orthonormal_pair(T[0])
    frames = []
    for k in range(m + 1):
        u = u - np.dot(u, T[k]) * T[k]
        u /= np.linalg.norm(u)
        frames.append((u, np.cross(T[k], u)))
    rho = core_radius * math.sin(cap_angle)
    psi = 2 * math.pi * np.arange(n_ring) / n_ring
    rings = np.array([C[k] + rho * (np.cos(psi)[:, None] * fu + np.sin(psi)[:, None] * fv)
                      for k, (fu, fv) in enumerate(frames)])
    # end rings sit on the core sphere up to rounding
    for k in (0, m):
        rings[k] *= core_radius / np.linalg.norm(rings[k], axis=1, keepdims=True)
    inner = np.linalg.norm(rings[1:-1], axis=2)
    if inner.size and inner.min() < core_radius * (1 - 1e-9):
        raise GeometryError("handle tube dips into the core sphere; increase lift")
    return rings


def _ring_radii(r0, r1, log_step):
    """Geometric ring radii from r0 to r1 passing through every integer in between.

    Truncations at integer radii then cut exactly along a ring.
    """
    knots = [r0] + [float(k) for k in range(math.floor(r0) + 1, math.ceil(r1)) if r0 < k < r1] + [r1]
    radii = [r0]
    for a, b in zip(knots[:-1], knots[1:]):
        m = max(1, int(math.ceil(math.log(b / a) / log_step)))
        radii.extend(a * (b / a) ** (np.arange(1, m + 1) / m))
        radii[-1] = b
    return np.array(radii)


def gen_cone_ended(genus=0, cones=None, n_ends=None, R_outer=10.0, target_edge=0.3,
                   core_radius=2.0, cone_half_angle=0.45, handle_cap_angle=0.12,
                   handle_separation=0.35, handle_lift=1.0, radial_aspect=0.5):
    """Sphere core with ``genus`` handles and exact cone ends, truncated at ``R_outer``.

    ``cones`` is a list of ConeSpec; when omitted, ``n_ends`` circular cones
    of half-angle ``cone_half_angle`` are placed along default axes.  Cone
    rings are geometric in the radius with the radial step at most
    ``radial_aspect`` times the circumferential step, and every integer
    radius is a ring.  Returns ``(geometry, ends)``.
    """
    if genus < 0:
        raise GeometryError("genus must be >= 0")
    if genus > len(HANDLE_DIRECTIONS):
        raise GeometryError(f"at most {len(HANDLE_DIRECTIONS)} handles supported")
    if cones is None:
        r = 1 if n_ends is None else int(n_ends)
        avail = DEFAULT_DIRECTIONS if genus == 0 else DEFAULT_DIRECTIONS[:4]
        if not 1 <= r <= len(avail):
            raise GeometryError(f"n_ends must be in [1, {len(avail)}] for genus {genus}")
        n_s = max(12, int(math.ceil(2 * math.pi * core_radius * math.sin(cone_half_angle) / target_edge)))
        cones = [ConeSpec.circle(d, cone_half_angle, n_s) for d in avail[:r]]
    if not cones:
        raise GeometryError("need at least one cone")
    if R_outer <= core_radius:
        raise GeometryError("R_outer must exceed the core radius")

    caps = []  # (axis, angular radius, ring points on the sphere, kind, index)
    for k, c in enumerate(cones):
        caps.append((c.axis, c.angular_radius, core_radius * c.gamma, "cone", k))
    tubes = []
    for hidx in range(genus):
        d = np.array(HANDLE_DIRECTIONS[hidx], float)
        w = np.array([1.0, 0, 1.0]) / math.sqrt(2)
        cA = math.cos(handle_separation) * d + math.sin(handle_separation) * w
        cB = math.cos(handle_separation) * d - math.sin(handle_separation) * w
        n_ring = max(8, int(math.ceil(2 * math.pi * core_radius * math.sin(handle_cap_angle) / target_edge)))
        rings = _tube(cA, cB, core_radius, handle_cap_angle, n_ring, target_edge, handle_lift)
        tubes.append(rings)
        caps.append((cA, handle_cap_angle, rings[0], "handle", hidx))
        caps.append((cB, handle_cap_angle, rings[-1], "handle", hidx))

    for i in range(len(caps)):
        for j in range(i + 1, len(caps)):
            ang = math.acos(np.clip(np.dot(caps[i][0], caps[j][0]), -1, 1))
            if ang <= caps[i][1] + caps[j][1] + 1.5 * target_edge / core_radius:
                raise GeometryError(f"caps {i} and {j} overlap at this resolution")

    subdiv = max(2, int(math.ceil(math.log2(2.1 * core_radius / 2 / target_edge))))
    sv, _ = icosphere(subdiv)
    keep = np.ones(len(sv), bool)
    margin = 0.5 * target_edge / core_radius
    for axis, ang, _, _, _ in caps:
        keep &= np.arccos(np.clip(sv @ axis, -1, 1)) > ang + margin
    core_pts = core_radius * sv[keep]
    ring_ids = []
    pts = [core_pts]
    nxt = len(core_pts)
    for _, _, ring, _, _ in caps:
        ring_ids.append(np.arange(nxt, nxt + len(ring)))
        pts.append(ring)
        nxt += len(ring)
    sphere_pts = np.vstack(pts)
    hull = ConvexHull(sphere_pts)
    tri = hull.simplices
    ring_of = -np.ones(len(sphere_pts), int)
    for k, ids in enumerate(ring_ids):
        ring_of[ids] = k
    rt = ring_of[tri]
    cap_face = (rt[:, 0] >= 0) & (rt[:, 0] == rt[:, 1]) & (rt[:, 1] == rt[:, 2])
    tri = tri[~cap_face]
    edge_set = set()
    for a, b, c in tri:
        edge_set.update({(min(a, b), max(a, b)), (min(b, c), max(b, c)), (min(a, c), max(a, c))})
    for ids in ring_ids:
        for a, b in zip(ids, np.roll(ids, -1)):
            if (min(a, b), max(a, b)) not in edge_set:
                raise GeometryError("cap ring is not resolved by the core triangulation; refine")

    vertices = [sphere_pts]
    triangles = [tri]
    nv = len(sphere_pts)
    cone_meta = []
    for k, c in enumerate(cones):
        n = c.samples
        dphi = float(np.max(np.linalg.norm(c.gamma - np.roll(c.gamma, -1, axis=0), axis=1)))
        radii = _ring_radii(core_radius, R_outer, math.log1p(radial_aspect * dphi))
        m = len(radii) - 1
        ids = np.empty((m + 1, n), dtype=np.int64)
        ids[0] = ring_ids[k]
        ids[1:] = nv + np.arange(m * n).reshape(m, n)
        vertices.append((radii[1:, None, None] * c.gamma[None, :, :]).reshape(-1, 3))
        nv += m * n
        g = grid_triangles(m + 1, n, wrap_v=True)
        triangles.append(ids.ravel()[g])
        cone_meta.append({"axis": c.axis, "ring_ids": ids, "radii": radii, "gamma": c.gamma})
    for hidx, rings in enumerate(tubes):
        a_ids = ring_ids[len(cones) + 2 * hidx]
        b_ids = ring_ids[len(cones) + 2 * hidx + 1]
        m1, n = rings.shape[0], rings.shape[1]
        ids = np.empty((m1, n), dtype=np.int64)
        ids[0], ids[-1] = a_ids, b_ids
        ids[1:-1] = nv + np.arange((m1 - 2) * n).reshape(m1 - 2, n)
        vertices.append(rings[1:-1].reshape(-1, 3))
        nv += (m1 - 2) * n
        triangles.append(ids.ravel()[grid_triangles(m1, n, wrap_v=True)])

    V = np.vstack(vertices)
    T = np.vstack(triangles)
    mesh = SurfaceMesh(V, T)
    core_faces = np.all(mesh.triangles < len(sphere_pts), axis=1)
    cent = V[mesh.triangles[core_faces]].mean(axis=1)
    if np.einsum("ij,ij->", cent, mesh.face_normals[core_faces]) < 0:
        mesh = SurfaceMesh(V, mesh.triangles[:, ::-1])

    chi, g_found, b = topology(mesh)
    if g_found != genus or b != len(cones) or mesh.n_components() != 1:
        raise GeometryError(f"construction produced (g, b) = ({g_found}, {b}), expected ({genus}, {len(cones)})")

    ends = []
    loop_sets = [frozenset(mesh.boundary_loop_vertices(i).tolist()) for i in range(b)]
    for k, cm in enumerate(cone_meta):
        outer = frozenset(cm["ring_ids"][-1].tolist())
        ends.append(EndMark(loop_sets.index(outer), float(R_outer), f"E{k + 1}"))
    meta = {
        "surface": "cone-ended",
        "genus": genus,
        "n_ends": len(cones),
        "R_outer": R_outer,
        "core_radius": core_radius,
        "target_edge": target_edge,
        "cones": cone_meta,
    }
    geo = geometry_from_mesh(mesh, ends=ends, meta=meta)
    return geo, ends


def cone_metric_audit(geo):
    """Metric ratios of the exact-cone grids.

    For each cone returns the extreme values of ``|dPhi/dr|^2`` from radial
    edges and of ``|dPhi/ds|^2 / (r^2 |dgamma|^2)`` from circumferential
    edges.  An exact cone gives 1 for both.
    """
    V = geo.mesh.vertices
    out = []
    for cm in geo.meta["cones"]:
        ids, radii, gam = cm["ring_ids"], cm["radii"], cm["gamma"]
        dr = np.diff(radii)[:, None]
        radial = np.linalg.norm(V[ids[1:]] - V[ids[:-1]], axis=2) ** 2 / dr ** 2
        ds = np.linalg.norm(gam - np.roll(gam, -1, axis=0), axis=1)
        circ = (np.linalg.norm(V[ids] - V[np.roll(ids, -1, axis=1)], axis=2) ** 2
                / (radii[:, None] ** 2 * ds[None, :] ** 2))
        out.append({"radial_min": float(radial.min()), "radial_max": float(radial.max()),
                    "angular_min": float(circ.min()), "angular_max": float(circ.max())})
    return out
