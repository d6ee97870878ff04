"""Spectral computations on shrinker meshes.

Harmonic projection and kernel counting for the weighted 1-form pencil,
Morse index by inertia over expanding truncations, the bound check against
the index estimate, and two pointwise tests of harmonic forms: the Bochner
residual and the cut-off quadratic form summed over coordinate components.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .errors import EigenFailed, EmptyKernel, FactorizationBreakdown, NotClosed, NotHarmonic, SolveFailed, Unstabilized
from .geometry import shrinker_residual, truncate_geometry
from .linalg import DENSE_LIMIT, dense_pencil_eigenvalues, inertia, smallest_eigenpairs
from .weighted_dec import assemble, exact_potential, hodge_laplacian1_w, jacobi_form

R_SCHEDULE = (4.0, 5.0, 6.0, 7.0, 8.0, 10.0)
TOL_KERNEL = 1e-6
GAP_RESOLVED = 100.0
RESIDUAL_GATE = 0.05
STABLE_RUN = 3


# -- harmonic projection ----------------------------------------------------------

def harmonic_projection(ops, eta, gammas=(), tol=1e-9):
    """Weighted-harmonic representative ``eta - D0 f`` of a closed 1-cochain.

    ``f`` solves ``K0 f = D0^T M1 eta`` with one vertex pinned per component.
    ``gammas`` are closed cochains whose cup products with ``eta`` must be
    preserved; a violation raises SolveFailed.
    """
    from .homology import cup_product

    eta = np.asarray(eta, dtype=float)
    scale = max(np.max(np.abs(eta), initial=0.0), 1.0)
    if np.max(np.abs(ops.D1 @ eta), initial=0.0) > tol * scale:
        raise NotClosed("cochain is not closed")
    f = exact_potential(ops, eta)
    omega = eta - ops.D0 @ f
    # orthogonality to exact cochains, relative to the input
    ref = np.linalg.norm(ops.D0.T @ (ops.M1 @ eta)) + np.linalg.norm(ops.M1 @ eta) * 1e-300
    res = np.linalg.norm(ops.D0.T @ (ops.M1 @ omega))
    if ref > 0 and res > 1e-8 * ref and res > 1e-14:
        raise SolveFailed(f"projection residual {res:.3e} relative to {ref:.3e}")
    for g in gammas:
        a, b = float(cup_product(ops.mesh, g, eta)), float(cup_product(ops.mesh, g, omega))
        if abs(a - b) > 1e-8 * max(1.0, abs(a)):
            raise SolveFailed(f"cohomology class changed: {a} vs {b}")
    return omega


def m1_norm2(ops, omega):
    omega = np.asarray(omega, dtype=float)
    return float(omega @ (ops.M1 @ omega))


def gram_matrix(ops, forms):
    F = np.array(forms, dtype=float)
    return F @ (ops.M1 @ F.T)


def harmonic_partner(ops, omega):
    """Harmonic part of the weighted star of ``omega``."""
    from .weighted_dec import hodge_decomposition, star_w

    return hodge_decomposition(ops, star_w(ops, omega))[2]


# -- harmonic dimension --------------------------------------------------------------

@dataclass
class HarmonicReport:
    R_values: list
    eigenvalues: list
    dim_estimate: list
    gap_ratio: list
    n_edges: list = field(default_factory=list)
    methods: list = field(default_factory=list)
    expected: int | None = None

    @property
    def resolved(self):
        return [g >= GAP_RESOLVED for g in self.gap_ratio]

    @property
    def final_dim(self):
        return self.dim_estimate[-1] if self.dim_estimate else None

    @property
    def stabilized(self):
        d = self.dim_estimate
        return len(d) >= STABLE_RUN and len(set(d[-STABLE_RUN:])) == 1

    def to_dict(self):
        return {
            "R_values": list(self.R_values),
            "eigenvalues": [list(map(float, e)) for e in self.eigenvalues],
            "dim_estimate": list(self.dim_estimate),
            "gap_ratio": [float(g) for g in self.gap_ratio],
            "resolved": self.resolved,
            "stabilized": self.stabilized,
            "n_edges": list(self.n_edges),
            "methods": list(self.methods),
            "expected": self.expected,
        }


def count_kernel(eigenvalues, tol_kernel=TOL_KERNEL):
    """``(dim, gap_ratio)`` for an ascending list of pencil eigenvalues.

    The reference scale is the median of the eigenvalues that are clearly
    nonzero (above ``sqrt(eps)`` times the largest computed one).
    """
    ev = np.asarray(eigenvalues, dtype=float)
    top = np.max(np.abs(ev))
    if top == 0:
        return len(ev), 1.0
    nonzero = ev[ev > 1.5e-8 * top]
    ref = float(np.median(nonzero)) if nonzero.size else top
    dim = int(np.sum(ev < tol_kernel * ref))
    if dim >= len(ev):
        return dim, 1.0
    floor = np.finfo(float).eps * ref
    below = max(float(ev[dim - 1]), floor) if dim > 0 else floor
    return dim, float(ev[dim]) / below


def one_form_spectrum(ops, k, bc="absolute", dense_limit=DENSE_LIMIT):
    """Smallest ``k`` eigenvalues of the 1-form pencil; returns ``(values, vectors, method)``."""
    K1, M1, _ = hodge_laplacian1_w(ops, bc=bc)
    n = K1.shape[0]
    method = "dense" if n <= dense_limit else "shift-invert"
    # shift below zero so K1 - sigma M1 is definite
    sigma = -1e-3 * float(np.median(K1.diagonal() / M1.diagonal()))
    w, v = smallest_eigenpairs(K1, M1, k, sigma=sigma, dense_limit=dense_limit)
    return w, v, method


def harmonic_dimension(geom, R_schedule=R_SCHEDULE, tol_kernel=TOL_KERNEL, variant="diagonal",
                       n_eig=None, expected=None):
    """Kernel dimension of the absolute 1-form pencil on each truncation."""
    if list(R_schedule) != sorted(set(R_schedule)):
        raise ValueError("R_schedule must be strictly increasing")
    rep = HarmonicReport([], [], [], [], expected=expected)
    for R in R_schedule:
        sub = truncate_geometry(geom, R)
        ops = assemble(sub, variant=variant)
        k = n_eig or 10
        while True:
            w, _, method = one_form_spectrum(ops, k)
            dim, gap = count_kernel(w, tol_kernel)
            if dim + 4 <= len(w) or len(w) >= sub.mesh.n_edges:
                break
            k *= 2
        if np.min(w) < -1e-8 * np.max(np.abs(w)):
            raise EigenFailed(f"negative eigenvalue {np.min(w):.3e} of a semidefinite pencil at R={R}")
        rep.R_values.append(float(R))
        rep.eigenvalues.append(w.tolist())
        rep.dim_estimate.append(dim)
        rep.gap_ratio.append(gap)
        rep.n_edges.append(sub.mesh.n_edges)
        rep.methods.append(method)
    return rep


def harmonic_basis(ops, tol_kernel=TOL_KERNEL, k=10):
    """M1-orthonormal kernel vectors of the absolute 1-form pencil."""
    while True:
        w, v, _ = one_form_spectrum(ops, k)
        dim, gap = count_kernel(w, tol_kernel)
        if dim + 4 <= len(w) or len(w) >= ops.mesh.n_edges:
            break
        k *= 2
    if gap < GAP_RESOLVED:
        raise EigenFailed(f"kernel not resolved, gap ratio {gap:.3g}")
    return v[:, :dim].T.copy(), w


# -- Morse index --------------------------------------------------------------------

@dataclass
class IndexSweep:
    R_values: list
    neg_counts: list
    n_vertices: list = field(default_factory=list)
    methods: list = field(default_factory=list)
    dense_counts: list = field(default_factory=list)
    unresolved: list = field(default_factory=list)
    residual_max: float = 0.0
    flagged: bool = False

    @property
    def stabilized(self):
        c = self.neg_counts
        return len(c) >= STABLE_RUN and None not in c[-STABLE_RUN:] and len(set(c[-STABLE_RUN:])) == 1

    @property
    def index_estimate(self):
        known = [c for c in self.neg_counts if c is not None]
        return known[-1] if known else None

    @property
    def monotone(self):
        c = [x for x in self.neg_counts if x is not None]
        return all(a <= b for a, b in zip(c, c[1:]))

    @property
    def dense_agrees(self):
        return all(d is None or d == c for c, d in zip(self.neg_counts, self.dense_counts))

    def to_dict(self):
        return {
            "R_values": list(self.R_values),
            "neg_counts": list(self.neg_counts),
            "stabilized": self.stabilized,
            "index_estimate": self.index_estimate,
            "monotone": self.monotone,
            "n_vertices": list(self.n_vertices),
            "methods": list(self.methods),
            "dense_counts": list(self.dense_counts),
            "dense_agrees": self.dense_agrees,
            "unresolved": list(self.unresolved),
            "residual_max": float(self.residual_max),
            "flagged": self.flagged,
        }


def negative_count(ops, dense_check=True):
    """``(count, method, dense_count)`` for the Dirichlet Jacobi pencil of ``ops``."""
    KJ, M0, _ = jacobi_form(ops)
    n = KJ.shape[0]
    if n == 0:
        return 0, "empty", 0
    res = inertia(KJ)
    dense = None
    if dense_check and n < DENSE_LIMIT:
        ev = dense_pencil_eigenvalues(KJ, M0)
        dense = int(np.sum(ev < 0))
    return res.negative, res.method, dense


def morse_index(geom, R_schedule=R_SCHEDULE, variant="galerkin", dense_check=True):
    """Negative inertia of the Dirichlet Jacobi form over ``Sigma cap B_R``.

    Surfaces whose shrinker residual exceeds the gate are still processed
    but the sweep is flagged and a warning is issued.
    """
    if list(R_schedule) != sorted(set(R_schedule)):
        raise ValueError("R_schedule must be strictly increasing")
    resid = shrinker_residual(geom)
    inner = ~geom.mesh.is_boundary_vertex
    rmax = float(np.max(np.abs(resid[inner]), initial=0.0))
    sweep = IndexSweep([], [], residual_max=rmax, flagged=rmax > RESIDUAL_GATE)
    if sweep.flagged:
        warnings.warn(f"shrinker residual {rmax:.3g} exceeds {RESIDUAL_GATE}; index of a non-shrinker",
                      stacklevel=2)
    cache = {}
    for R in R_schedule:
        sub = truncate_geometry(geom, R)
        key = sub.mesh.content_hash()
        if key not in cache:
            ops = assemble(sub, variant=variant)
            try:
                cache[key] = negative_count(ops, dense_check)
            except FactorizationBreakdown as exc:
                cache[key] = (None, f"unresolved: {exc}", None)
        count, method, dense = cache[key]
        sweep.R_values.append(float(R))
        sweep.neg_counts.append(count)
        sweep.methods.append(method)
        sweep.dense_counts.append(dense)
        sweep.n_vertices.append(sub.mesh.n_vertices)
        if count is None:
            sweep.unresolved.append(float(R))
    return sweep


def index_ladder(make_geometry, levels, R_schedule=R_SCHEDULE, variant="galerkin"):
    """Sweeps over a refinement ladder; ``make_geometry(level)`` builds each surface."""
    return [morse_index(make_geometry(lv), R_schedule, variant) for lv in levels]


def ladder_index(sweeps):
    """The common stabilized index of a refinement ladder, or raise Unstabilized."""
    vals = []
    for s in sweeps:
        if not s.stabilized:
            raise Unstabilized(f"sweep did not stabilize: {s.neg_counts}")
        vals.append(s.index_estimate)
    if len(set(vals)) != 1:
        raise Unstabilized(f"index differs across refinement: {vals}")
    return vals[0]


def verify_index_bound(index, genus, n_ends, pinch=None, harmonic_dim=None):
    """Compare an index with ``ceil((2g+r-1)/3)`` and the ``+1`` corollary.

    ``index`` is an IndexSweep (must be stabilized) or an integer.
    """
    if isinstance(index, IndexSweep):
        if not index.stabilized:
            raise Unstabilized(f"sweep did not stabilize: {index.neg_counts}")
        index = index.index_estimate
    b = 2 * genus + n_ends - 1
    bound = math.ceil(b / 3)
    corollary = b / 3 + 1
    report = {
        "genus": genus,
        "ends": n_ends,
        "index": int(index),
        "bound": max(bound, 0),
        "corollary_bound": corollary,
        "corollary_pass": index >= corollary,
        "status": "PASS" if index >= bound else "FAIL",
        "pinch_constant": None if pinch is None else float(pinch),
        "hypothesis": None if pinch is None else ("hypothesis unmet" if pinch >= 1 else "hypothesis met"),
    }
    if harmonic_dim is not None:
        report["harmonic_dim"] = int(harmonic_dim)
        report["harmonic_pass"] = harmonic_dim >= b
        if harmonic_dim < b:
            report["status"] = "FAIL"
    return report


# -- pointwise identities -----------------------------------------------------------

def sharp_vectors(geom, omega):
    """Per-vertex tangent vectors fitted to the edge values around each vertex.

    Least squares of ``<V, x_u - x_v> = omega(v -> u)`` over the 1-ring in
    the tangent frame; returns an (n, 3) ambient array.
    """
    mesh = geom.mesh
    E = mesh.edges
    V = mesh.vertices
    omega = np.asarray(omega, dtype=float)
    src = np.concatenate([E[:, 0], E[:, 1]])
    dst = np.concatenate([E[:, 1], E[:, 0]])
    val = np.concatenate([omega, -omega])
    a = np.einsum("kij,kj->ki", geom.frames[src], V[dst] - V[src])
    n = mesh.n_vertices
    AA = np.zeros((n, 2, 2))
    Ab = np.zeros((n, 2))
    np.add.at(AA, src, a[:, :, None] * a[:, None, :])
    np.add.at(Ab, src, a * val[:, None])
    c = np.linalg.solve(AA, Ab[:, :, None])[:, :, 0]
    return np.einsum("ni,nij->nj", c, geom.frames)


def _check_harmonic(ops, omega, tol):
    K1, M1, _ = hodge_laplacian1_w(ops)
    nrm = float(omega @ (M1 @ omega))
    if nrm == 0:
        raise NotHarmonic("zero form")
    rq = float(omega @ (K1 @ omega)) / nrm
    if rq > tol:
        raise NotHarmonic(f"Rayleigh quotient {rq:.3e} of the 1-form pencil exceeds {tol:g}")
    return rq


def _edge_pairing(mesh, W):
    """Edge cochain ``<W_mid, x_b - x_a>`` of a vertex vector field."""
    E = mesh.edges
    mid = 0.5 * (W[E[:, 0]] + W[E[:, 1]])
    return np.einsum("ij,ij->i", mid, mesh.vertices[E[:, 1]] - mesh.vertices[E[:, 0]])


def bochner_terms(ops, geom, omega):
    """Vertex fields ``(lhs, rhs)`` with lhs the rough weighted Laplacian of omega#.

    The rough Laplacian of a tangent field is the tangential part of the
    componentwise weighted Laplacian plus ``S^2 V``; the right side is
    ``V/2 - S^2 V``.
    """
    Vf = sharp_vectors(geom, omega)
    N = geom.normals
    S = geom.shape_operator_ambient()
    S2V = np.einsum("nij,njk,nk->ni", S, S, Vf)
    lap = -ops.M0_solve(ops.K0 @ Vf) if ops.variant == "diagonal" else -(ops.K0 @ Vf) / ops.M0_lumped[:, None]
    lap_t = lap - np.einsum("ni,ni->n", lap, N)[:, None] * N
    return lap_t + S2V, 0.5 * Vf - S2V


def _tangential(W, N):
    return W - np.einsum("ni,ni->n", W, N)[:, None] * N


def bochner_residual(ops, geom, omega=None, norm="weak", tol_harmonic=1e-8):
    """Relative size of ``Delta_w omega - (omega/2 - A^2(omega#, .))``.

    ``norm='weak'`` (default) tests the identity against tangent P1 fields
    ``Z``: the residual functional is
    ``-sum_j a_w(V^j, Z^j) + <(2 S^2 - 1/2) V, Z>_w`` and both it and the
    right side are measured in the dual norm of ``K0 + M0``.
    ``norm='strong'`` evaluates both sides at vertices with the lumped
    Laplacian and pairs them with edges in the M1 norm; it needs
    near-symmetric vertex stars to converge.

    Without ``omega`` the first kernel vector is used; an empty kernel
    raises EmptyKernel.
    """
    if omega is None:
        basis, _ = harmonic_basis(ops)
        if len(basis) == 0:
            raise EmptyKernel("the 1-form pencil has no kernel")
        omega = basis[0]
    omega = np.asarray(omega, dtype=float)
    _check_harmonic(ops, omega, tol_harmonic)
    if norm == "strong":
        lhs, rhs = bochner_terms(ops, geom, omega)
        bv = ops.mesh.is_boundary_vertex
        E = ops.mesh.edges
        keep = ~(bv[E[:, 0]] | bv[E[:, 1]])
        r = _edge_pairing(ops.mesh, lhs - rhs) * keep
        b = _edge_pairing(ops.mesh, rhs) * keep
        return math.sqrt(float(r @ (ops.M1 @ r)) / float(b @ (ops.M1 @ b)))
    if norm != "weak":
        raise ValueError(f"unknown norm {norm!r}")
    N = geom.normals
    Vf = sharp_vectors(geom, omega)
    S = geom.shape_operator_ambient()
    S2V = np.einsum("nij,njk,nk->ni", S, S, Vf)
    rho = _tangential(-(ops.K0 @ Vf) + ops.M0 @ (2.0 * S2V - 0.5 * Vf), N)
    rhs = _tangential(ops.M0 @ (0.5 * Vf - S2V), N)
    lu = spla.splu((ops.K0 + ops.M0).tocsc())
    dual = lambda F: float(np.einsum("ij,ij->", F, lu.solve(F)))  # noqa: E731
    return math.sqrt(dual(rho) / dual(rhs))


def cutoff(geom, R):
    """``phi = clamp(2 - |x|/R, 0, 1)`` and ``|grad phi|^2`` at the vertices."""
    x = geom.mesh.vertices
    rad = np.linalg.norm(x, axis=1)
    phi = np.clip(2.0 - rad / R, 0.0, 1.0)
    ramp = (rad > R) & (rad < 2 * R)
    u = x / np.maximum(rad, 1e-300)[:, None]
    ut = u - np.einsum("ni,ni->n", u, geom.normals)[:, None] * geom.normals
    grad2 = np.where(ramp, np.einsum("ni,ni->n", ut, ut) / R ** 2, 0.0)
    return phi, grad2


@dataclass
class CutoffFormResult:
    Q_total: float
    bound: float
    identity: float
    slack: float
    norm2: float
    pinch: float
    R: float

    @property
    def holds(self):
        return self.Q_total <= self.bound + self.slack

    def to_dict(self):
        return {k: float(getattr(self, k)) for k in ("Q_total", "bound", "identity", "slack", "norm2", "pinch", "R")} | {
            "holds": self.holds}


def _jacobi_full(ops):
    KJ, _, _ = jacobi_form(ops, interior=np.arange(ops.mesh.n_vertices))
    return KJ


def mcgonagle_test(ops, geom, omega, R, pinch=None, tol_harmonic=1e-8):
    """Cut-off quadratic form summed over the coordinate components of omega.

    ``Q_total = sum_j Q(phi w^j, phi w^j)`` with ``w^j`` the ambient
    components of omega# at the vertices.  ``identity`` evaluates the same
    quantity through the pointwise curvature identity and ``slack`` is the
    gap between the two, a discretization error.
    """
    omega = np.asarray(omega, dtype=float)
    c = geom.pinch_constant() if pinch is None else float(pinch)
    if not np.any(omega):
        return CutoffFormResult(0.0, 0.0, 0.0, 0.0, 0.0, c, float(R))
    _check_harmonic(ops, omega, tol_harmonic)
    Vf = sharp_vectors(geom, omega)
    phi, grad2 = cutoff(geom, R)
    U = phi[:, None] * Vf
    KJ = _jacobi_full(ops)
    Q = float(np.einsum("ij,ij->", U, KJ @ U))
    # principal-frame components for the curvature term
    S = geom.shape_operator
    _, evec = np.linalg.eigh(S)
    tang = np.einsum("nai,ni->na", geom.frames, Vf)
    comp = np.einsum("nab,na->nb", evec, tang)
    k1, k2 = geom.kappa1, geom.kappa2
    # eigh sorts ascending, so comp[:, 1] pairs with kappa1 and comp[:, 0] with kappa2
    dens = grad2 * np.sum(Vf ** 2, 1) - phi ** 2 * np.sum(Vf ** 2, 1) + phi ** 2 * (k1 ** 2 - k2 ** 2) * (
        comp[:, 1] ** 2 - comp[:, 0] ** 2)
    ident = float(ops.M0_lumped @ dens)
    norm2 = m1_norm2(ops, omega)
    bound = (2.0 / R ** 2 - (1.0 - c)) * norm2
    return CutoffFormResult(Q, bound, ident, abs(Q - ident), norm2, c, float(R))


# -- end forms ----------------------------------------------------------------------

def eta_norm_sweep(ops, eta, R_values):
    """``||eta||^2`` restricted to edges inside each ball (diagonal mass)."""
    if not ops.M1_is_diagonal:
        raise ValueError("eta_norm_sweep needs the diagonal variant")
    E = ops.mesh.edges
    V = ops.mesh.vertices
    rad = np.maximum(np.linalg.norm(V[E[:, 0]], axis=1), np.linalg.norm(V[E[:, 1]], axis=1))
    contrib = ops.M1.diagonal() * np.asarray(eta, dtype=float) ** 2
    return [math.fsum(contrib[rad <= R].tolist()) for R in R_values]


def increments(values):
    return [b - a for a, b in zip(values, values[1:])]


__all__ = [
    "HarmonicReport", "IndexSweep", "CutoffFormResult", "R_SCHEDULE", "TOL_KERNEL", "GAP_RESOLVED",
    "harmonic_projection", "harmonic_dimension", "harmonic_basis", "count_kernel", "one_form_spectrum",
    "morse_index", "negative_count", "index_ladder", "ladder_index", "verify_index_bound",
    "bochner_residual", "bochner_terms", "sharp_vectors", "mcgonagle_test", "cutoff",
    "eta_norm_sweep", "increments", "gram_matrix", "harmonic_partner", "m1_norm2",
]
