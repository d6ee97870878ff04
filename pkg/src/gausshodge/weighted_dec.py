"""Gaussian-weighted discrete exterior calculus on triangle meshes.

Cochains live on vertices, edges (oriented low to high vertex index) and
faces.  Mass matrices realize the weighted L2 products; stiffness matrices
are built from them so the drift term of the weighted Laplacian is never
assembled on its own.

Two mass variants exist.  ``diagonal`` uses barycentric dual cells with the
weight sampled at each simplex barycenter.  ``galerkin`` uses P1 and Whitney
element mass matrices with the weight integrated by a degree-6 triangle
rule (or frozen at centroids); its 0-form stiffness ``D0^T M1 D0`` is the
weighted P1 Laplacian.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.io import mmwrite

from .errors import MeshMismatch, MissingCurvature, NonPositiveMass, SolveFailed, UnboundedSupport
from .geometry import FOUR_PI, ImmersedGeometry, gaussian_weight
from .mesh import SurfaceMesh, atomic_write_text

VARIANTS = ("diagonal", "galerkin")
WEIGHTS = ("gaussian", "unit")
# local oriented edges (0,1), (1,2), (2,0)
_LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


def _weight_fn(kind):
    if kind == "gaussian":
        return gaussian_weight
    if kind == "unit":
        return lambda x: np.ones(np.asarray(x).shape[:-1])
    raise ValueError(f"unknown weight {kind!r}; choose from {WEIGHTS}")


@dataclass
class WeightedOperators:
    mesh: SurfaceMesh
    variant: str
    weight: str
    M0: sp.csr_matrix
    M1: sp.csr_matrix
    M2: sp.csr_matrix
    D0: sp.csr_matrix
    D1: sp.csr_matrix
    K0: sp.csr_matrix
    M0_lumped: np.ndarray
    potential: np.ndarray | None = None
    quadrature: str = "gauss"

    @property
    def star_scale(self):
        """Constant factor of the weight (1/4pi for the Gaussian, 1 for unit)."""
        return 1.0 / FOUR_PI if self.weight == "gaussian" else 1.0

    @property
    def M1_is_diagonal(self):
        return self.variant == "diagonal"

    def M0_solve(self, b):
        if self.variant == "diagonal":
            return b / self.M0.diagonal() if b.ndim == 1 else b / self.M0.diagonal()[:, None]
        if not hasattr(self, "_m0_lu"):
            try:
                self._m0_lu = spla.splu(self.M0.tocsc())
            except RuntimeError as exc:
                raise SolveFailed(f"M0 factorization failed: {exc}") from exc
        return self._m0_lu.solve(b)


def triangle_rule(n=4):
    """Collapsed Gauss rule on a triangle: barycentric points (m, 3) and weights summing to 1.

    Exact for polynomials of degree ``2n - 2``.
    """
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1)
    w = 0.5 * w
    U, Vv = np.meshgrid(x, x, indexing="ij")
    WU, WV = np.meshgrid(w, w, indexing="ij")
    a = U.ravel()
    b = (Vv * (1 - U)).ravel()
    q = 2 * (WU * WV * (1 - U)).ravel()
    return np.stack([1 - a - b, a, b], 1), q


def _weighted_moments(P, A, wfn, quadrature, density=None):
    """Per triangle ``int_T w * density * lambda_a lambda_b`` (t, 3, 3) and ``int_T w`` (t,).

    ``density`` is an optional per-vertex field interpolated linearly.
    """
    if quadrature == "centroid":
        wc = wfn(P.mean(axis=1))
        if density is not None:
            wc = wc * density.mean(axis=1)
        I = (np.ones((3, 3)) + np.eye(3)) / 12.0
        return (wc * A)[:, None, None] * I[None], wc * A
    if quadrature != "gauss":
        raise ValueError(f"unknown quadrature {quadrature!r}")
    lam, q = triangle_rule()
    X = np.einsum("qa,tai->tqi", lam, P)
    wq = wfn(X) * q[None, :]
    if density is not None:
        wq = wq * (density @ lam.T)
    mom = np.einsum("tq,qa,qb->tab", wq, lam, lam) * A[:, None, None]
    return mom, wq.sum(axis=1) * A


def _triangle_data(mesh):
    V = mesh.vertices
    T = mesh.triangles
    P = V[T]
    n = mesh.face_normals
    A = mesh.face_areas
    # gradient of barycentric coordinate i is rot90 of the opposite edge / 2A
    grads = np.empty((len(T), 3, 3))
    for i in range(3):
        e = P[:, (i + 2) % 3] - P[:, (i + 1) % 3]
        grads[:, i] = np.cross(n, e) / (2 * A[:, None])
    G = np.einsum("tia,tja->tij", grads, grads)
    return P, A, G


def _edge_ids(mesh):
    """Per triangle, global edge ids and signs for the local edges (0,1),(1,2),(2,0)."""
    T = mesh.triangles
    n = mesh.n_vertices
    keys = mesh.edges[:, 0] * n + mesh.edges[:, 1]
    order = np.argsort(keys)
    ids = np.empty((len(T), 3), dtype=np.int64)
    signs = np.empty((len(T), 3), dtype=np.int64)
    for k, (a, b) in enumerate(_LOCAL_EDGES):
        va, vb = T[:, a], T[:, b]
        lo, hi = np.minimum(va, vb), np.maximum(va, vb)
        pos = np.searchsorted(keys[order], lo * n + hi)
        ids[:, k] = order[pos]
        signs[:, k] = np.where(va < vb, 1, -1)
    return ids, signs


def assemble(geom, variant="diagonal", weight="gaussian", quadrature="gauss"):
    """Mass and stiffness matrices for a mesh or ImmersedGeometry.

    ``quadrature`` applies to the Galerkin variant: ``'gauss'`` integrates the
    weight against the element basis with a degree-6 rule, ``'centroid'``
    freezes the weight at the centroid.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    wfn = _weight_fn(weight)
    mesh = geom.mesh if isinstance(geom, ImmersedGeometry) else geom
    V, T, E = mesh.vertices, mesh.triangles, mesh.edges
    nv, ne = mesh.n_vertices, mesh.n_edges
    P, A, G = _triangle_data(mesh)
    cent = P.mean(axis=1)
    wc = wfn(cent)
    eid, esign = _edge_ids(mesh)

    D0 = mesh.d0().astype(float)
    D1 = mesh.d1().astype(float)

    # barycentric vertex areas, used by both variants for lumping
    vert_area = np.zeros(nv)
    for k in range(3):
        np.add.at(vert_area, T[:, k], A / 3.0)

    if variant == "diagonal":
        m0 = wfn(V) * vert_area
        mids = 0.5 * (V[E[:, 0]] + V[E[:, 1]])
        dual = np.zeros(ne)
        for k, (a, b) in enumerate(_LOCAL_EDGES):
            m = 0.5 * (P[:, a] + P[:, b])
            np.add.at(dual, eid[:, k], np.linalg.norm(cent - m, axis=1))
        m1 = wfn(mids) * dual / mesh.edge_lengths()
        if np.any(m0 <= 0) or np.any(m1 <= 0) or not np.all(np.isfinite(m1)):
            raise NonPositiveMass("diagonal mass has a non-positive entry; refine the mesh")
        M0 = sp.diags(m0).tocsr()
        M1 = sp.diags(m1).tocsr()
        M2 = sp.diags(wc / A).tocsr()
        lumped = m0
    else:
        I, wint = _weighted_moments(P, A, wfn, quadrature)
        M2 = sp.diags(wint / A ** 2).tocsr()
        loc0 = I
        rows = np.repeat(T, 3, axis=1).ravel()
        cols = np.tile(T, (1, 3)).ravel()
        M0 = sp.csr_matrix((loc0.ravel(), (rows, cols)), shape=(nv, nv))
        loc1 = np.empty((len(T), 3, 3))
        for p, (i, j) in enumerate(_LOCAL_EDGES):
            for q, (k, l) in enumerate(_LOCAL_EDGES):
                loc1[:, p, q] = (I[:, i, k] * G[:, j, l] - I[:, i, l] * G[:, j, k]
                                 - I[:, j, k] * G[:, i, l] + I[:, j, l] * G[:, i, k])
        loc1 *= esign[:, :, None] * esign[:, None, :]
        rows = np.repeat(eid, 3, axis=1).ravel()
        cols = np.tile(eid, (1, 3)).ravel()
        M1 = sp.csr_matrix((loc1.ravel(), (rows, cols)), shape=(ne, ne))
        M1 = (0.5 * (M1 + M1.T)).tocsr()
        lumped = np.asarray(M0.sum(axis=1)).ravel()
        if np.any(lumped <= 0):
            raise NonPositiveMass("Galerkin vertex mass has a non-positive row sum")
    K0 = (D0.T @ M1 @ D0).tocsr()
    K0 = (0.5 * (K0 + K0.T)).tocsr()

    potential = None
    if isinstance(geom, ImmersedGeometry) and geom.has_curvature:
        potential = geom.A2 + 0.5
    return WeightedOperators(mesh, variant, weight, M0, M1, M2, D0, D1, K0, lumped, potential, quadrature)


def _check_len(ops, x, n, what):
    x = np.asarray(x, dtype=float)
    if x.shape[0] != n:
        raise MeshMismatch(f"{what} has length {x.shape[0]}, mesh needs {n}")
    return x


def codifferential_w(ops, omega):
    """Weak weighted codifferential ``M0^-1 D0^T M1 omega`` (a 0-cochain)."""
    omega = _check_len(ops, omega, ops.mesh.n_edges, "1-cochain")
    return ops.M0_solve(ops.D0.T @ (ops.M1 @ omega))


def weighted_laplacian0(ops, f):
    """``M0^-1 K0 f``: the positive weighted Laplacian of a 0-cochain."""
    f = _check_len(ops, f, ops.mesh.n_vertices, "0-cochain")
    return ops.M0_solve(ops.K0 @ f)


def hodge_laplacian1_w(ops, bc="absolute"):
    """The 1-form pencil ``(K1, M1)``.

    ``K1 = D1^T M2 D1 + M1 D0 M0^-1 D0^T M1``; the Galerkin variant uses the
    lumped vertex mass in the inverse so K1 stays sparse.  With
    ``bc='dirichlet'`` rows and columns of boundary edges are removed and the
    kept edge ids are returned as the third element.
    """
    inv_m0 = sp.diags(1.0 / ops.M0_lumped)
    B = ops.M1 @ ops.D0
    K1 = ops.D1.T @ ops.M2 @ ops.D1 + B @ inv_m0 @ B.T
    K1 = (0.5 * (K1 + K1.T)).tocsr()
    keep = np.arange(ops.mesh.n_edges)
    M1 = ops.M1
    if bc == "dirichlet":
        keep = np.flatnonzero(~ops.mesh.is_boundary_edge)
        K1 = K1[keep][:, keep].tocsr()
        M1 = M1[keep][:, keep].tocsr()
    elif bc not in ("absolute", "none"):
        raise ValueError(f"unknown boundary condition {bc!r}")
    return K1, M1, keep


def _solve_pinned(K, rhs, pin):
    """Solve a singular SPD system with the listed unknowns fixed to zero."""
    n = K.shape[0]
    free = np.setdiff1d(np.arange(n), np.asarray(pin, dtype=np.int64))
    x = np.zeros(n)
    Kf = K[free][:, free].tocsc()
    try:
        x[free] = spla.spsolve(Kf, rhs[free])
    except RuntimeError as exc:
        raise SolveFailed(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SolveFailed("non-finite solution")
    return x


def _component_pins(mesh):
    """One vertex per connected component (lowest index)."""
    n, labels = sp.csgraph.connected_components(mesh.vertex_adjacency(), directed=False)
    return [int(np.flatnonzero(labels == c)[0]) for c in range(n)]


def exact_potential(ops, omega):
    """``f`` with ``D0 f`` the M1-orthogonal projection of ``omega`` onto exact cochains."""
    rhs = ops.D0.T @ (ops.M1 @ omega)
    f = _solve_pinned(ops.K0, rhs, _component_pins(ops.mesh))
    return f


def hodge_decomposition(ops, omega):
    """Split a 1-cochain into exact, coexact and harmonic parts (M1-orthogonal).

    Returns ``(exact, coexact, harmonic, f)`` with ``exact = D0 f``.
    """
    omega = _check_len(ops, omega, ops.mesh.n_edges, "1-cochain")
    f = exact_potential(ops, omega)
    exact = ops.D0 @ f
    target = ops.D1 @ omega
    nf = ops.mesh.n_faces
    ne = ops.mesh.n_edges
    S = sp.bmat([[ops.M1, ops.D1.T], [ops.D1, None]]).tocsc()
    rhs = np.concatenate([np.zeros(ne), target])
    pins = []
    if len(ops.mesh.boundary_loops) == 0:
        # on a closed mesh D1^T kills the constant 2-form of each component
        n, labels = sp.csgraph.connected_components(_face_adjacency(ops.mesh), directed=False)
        pins = [ne + int(np.flatnonzero(labels == c)[0]) for c in range(n)]
    sol = _solve_pinned_indefinite(S, rhs, pins)
    coexact = sol[:ne]
    harmonic = omega - exact - coexact
    return exact, coexact, harmonic, f


def _face_adjacency(mesh):
    ef = mesh.edge_faces
    inner = ef[:, 1] >= 0
    a, b = ef[inner, 0], ef[inner, 1]
    n = mesh.n_faces
    return sp.csr_matrix((np.ones(len(a)), (a, b)), shape=(n, n))


def _solve_pinned_indefinite(S, rhs, pins):
    n = S.shape[0]
    free = np.setdiff1d(np.arange(n), np.asarray(pins, dtype=np.int64))
    x = np.zeros(n)
    try:
        x[free] = spla.spsolve(S[free][:, free].tocsc(), rhs[free])
    except RuntimeError as exc:
        raise SolveFailed(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SolveFailed("non-finite saddle-point solution")
    return x


def jacobi_form(ops, interior=None):
    """Dirichlet Jacobi pencil ``(K_J, M0)`` on interior vertices.

    ``K_J = K0 - M_pot`` where ``M_pot`` is the weighted mass with density
    ``|A|^2 + 1/2``.  Returns ``(K_J, M0, vertex_ids)``.
    """
    if ops.potential is None:
        raise MissingCurvature("operators were assembled without curvature data")
    mesh = ops.mesh
    if interior is None:
        interior = np.flatnonzero(~mesh.is_boundary_vertex)
    if ops.variant == "diagonal":
        Mpot = sp.diags(ops.M0.diagonal() * ops.potential)
    else:
        T = mesh.triangles
        P, A, _ = _triangle_data(mesh)
        loc, _ = _weighted_moments(P, A, _weight_fn(ops.weight), ops.quadrature, ops.potential[T])
        rows = np.repeat(T, 3, axis=1).ravel()
        cols = np.tile(T, (1, 3)).ravel()
        n = mesh.n_vertices
        Mpot = sp.csr_matrix((loc.ravel(), (rows, cols)), shape=(n, n))
    KJ = (ops.K0 - Mpot).tocsr()
    KJ = (0.5 * (KJ + KJ.T)).tocsr()
    KJ = KJ[interior][:, interior].tocsr()
    M0 = ops.M0[interior][:, interior].tocsr()
    return KJ, M0, np.asarray(interior)


def wedge_matrix(mesh):
    """Integer matrix ``C6`` with ``cup(a, b) = a^T C6 b / 6``.

    Per triangle the product is the integral of the wedge of the Whitney
    interpolants; ``C6`` is antisymmetric.
    """
    eid, esign = _edge_ids(mesh)
    rows, cols, vals = [], [], []
    for p in range(3):
        q = (p + 1) % 3
        # a_p b_q - a_q b_p for consecutive local edges, cyclically
        rows += [eid[:, p], eid[:, q]]
        cols += [eid[:, q], eid[:, p]]
        s = esign[:, p] * esign[:, q]
        vals += [s, -s]
    ne = mesh.n_edges
    C = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(ne, ne), dtype=np.int64)
    C.sum_duplicates()
    return C


def star_w(ops, omega, support_radius=None):
    """Weighted Hodge rotation of a 1-cochain: ``-s M1^-1 C omega``.

    ``C = C6/6`` integrates the wedge of Whitney interpolants and ``s`` is
    the constant factor of the weight.  The result satisfies
    ``<star_w a, b>_M1 = s * cup(a, b)``, hence ``<star_w a, a>_M1 = 0``.
    With the Galerkin mass this is the L2 projection of the pointwise
    rotation onto Whitney forms, so applying it twice tends to ``-1`` under
    refinement; the diagonal mass keeps the support local but is only a
    rough rotation.  ``support_radius`` rejects input with support outside
    that ball.
    """
    omega = _check_len(ops, omega, ops.mesh.n_edges, "1-cochain")
    if support_radius is not None:
        E = ops.mesh.edges
        V = ops.mesh.vertices
        far = np.maximum(np.linalg.norm(V[E[:, 0]], axis=1), np.linalg.norm(V[E[:, 1]], axis=1)) > support_radius
        if np.any(omega[far] != 0):
            raise UnboundedSupport(f"1-cochain has support beyond radius {support_radius}")
    rhs = -ops.star_scale * (_wedge_cached(ops) @ omega) / 6.0
    if ops.M1_is_diagonal:
        return rhs / ops.M1.diagonal()
    if not hasattr(ops, "_m1_lu"):
        try:
            ops._m1_lu = spla.splu(ops.M1.tocsc())
        except RuntimeError as exc:
            raise SolveFailed(f"M1 factorization failed: {exc}") from exc
    return ops._m1_lu.solve(rhs)


def _wedge_cached(ops):
    if not hasattr(ops, "_wedge"):
        ops._wedge = wedge_matrix(ops.mesh)
    return ops._wedge


def export_operators(ops, directory, prefix="ops"):
    """Write every operator as MatrixMarket ``<prefix>_<name>.mtx``; returns the paths."""
    import os

    os.makedirs(directory, exist_ok=True)
    paths = []
    for name in ("M0", "M1", "M2", "D0", "D1", "K0"):
        buf = io.BytesIO()
        mmwrite(buf, getattr(ops, name), precision=17)
        path = os.path.join(directory, f"{prefix}_{name}.mtx")
        atomic_write_text(path, buf.getvalue().decode())
        paths.append(path)
    return paths


def cochain_csv(values):
    """CSV text with one ``simplex_id,value`` row per entry."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["simplex_id", "value"])
    for i, v in enumerate(np.asarray(values).tolist()):
        w.writerow([i, repr(float(v)) if isinstance(v, float) else v])
    return buf.getvalue()


def weighted_area(ops):
    return math.fsum(ops.M0.diagonal().tolist()) if ops.variant == "diagonal" else float(ops.M0.sum())
