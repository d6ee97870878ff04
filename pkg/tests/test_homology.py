import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gausshodge.cones import gen_cone_ended
from gausshodge.errors import MeshMismatch
from gausshodge.homology import (cohomology_basis, cup_matrix, cup_product, integer_rank, is_closed,
                                 loop_cocycles)
from gausshodge.mesh import SurfaceMesh
from gausshodge.shapes import icosphere, torus_grid


@pytest.fixture(scope="module")
def torus():
    return SurfaceMesh(*torus_grid(14, 9))


@pytest.fixture(scope="module", params=[(0, 3), (1, 2), (2, 1)], ids=lambda p: f"g{p[0]}r{p[1]}")
def cone_basis(request):
    genus, ends = request.param
    geo, marks = gen_cone_ended(genus=genus, n_ends=ends, target_edge=0.4)
    return genus, ends, geo.mesh, cohomology_basis(geo.mesh, marks)


def test_sphere_has_no_loops():
    assert loop_cocycles(SurfaceMesh(*icosphere(2))) == []


def test_torus_loops_symplectic(torus):
    nu = loop_cocycles(torus)
    assert len(nu) == 2
    assert cup_matrix(torus, nu, nu) == [[0, 1], [-1, 0]]
    assert all(is_closed(torus, c) for c in nu)


def test_cup_is_exact_and_antisymmetric(torus):
    rng = np.random.default_rng(0)
    a, b = rng.integers(-5, 6, (2, torus.n_edges))
    ab = cup_product(torus, a, b)
    assert ab == -cup_product(torus, b, a)
    assert cup_product(torus, a.astype(float) + 0.5, b) == pytest.approx(
        float(cup_product(torus, a, b)) + 0.5 * float(cup_product(torus, np.ones(torus.n_edges), b)))


def test_cup_length_check(torus):
    with pytest.raises(MeshMismatch):
        cup_product(torus, np.zeros(3), np.zeros(torus.n_edges))


def test_basis_sizes_and_pairing(cone_basis):
    genus, ends, mesh, b = cone_basis
    assert len(b.nu) == 2 * genus and len(b.eta) == ends - 1
    n = 2 * genus + ends - 1
    assert b.pairing == np.eye(n, dtype=int).tolist()
    for c in b.nu + b.tau + b.eta + b.gammaf:
        assert is_closed(mesh, c)
    assert integer_rank(cup_matrix(mesh, b.tau + b.gammaf, b.nu + b.eta)) == n


def test_lagrangian_is_isotropic(cone_basis):
    _, _, mesh, b = cone_basis
    lag = b.lagrangian
    assert all(x == 0 for row in cup_matrix(mesh, lag, lag) for x in row)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_cup_invariant_under_exact_shift(seed):
    mesh = _torus_mesh()
    nu = _torus_loops()
    rng = np.random.default_rng(seed)
    f = rng.integers(-4, 5, mesh.n_vertices)
    a = nu[0] + mesh.d0() @ f
    assert cup_product(mesh, a, nu[1]) == cup_product(mesh, nu[0], nu[1])


_MEMO = {}


def _torus_mesh():
    if "m" not in _MEMO:
        _MEMO["m"] = SurfaceMesh(*torus_grid(10, 7))
    return _MEMO["m"]


def _torus_loops():
    if "nu" not in _MEMO:
        _MEMO["nu"] = loop_cocycles(_torus_mesh())
    return _MEMO["nu"]
