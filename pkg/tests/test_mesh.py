import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gausshodge.errors import DegenerateTriangle, EmptyResult, NonManifold, ParseError
from gausshodge.mesh import (SurfaceMesh, format_obj, format_off, load_mesh, save_mesh, topology,
                             truncate)
from gausshodge.shapes import icosphere, square_grid, torus_grid


def test_icosphere_topology():
    m = SurfaceMesh(*icosphere(2))
    assert topology(m) == (2, 0, 0)
    assert m.n_vertices - m.n_edges + m.n_faces == 2


def test_torus_and_disk_topology():
    assert topology(SurfaceMesh(*torus_grid(12, 8))) == (0, 1, 0)
    assert topology(SurfaceMesh(*square_grid(5))) == (1, 0, 1)


@pytest.mark.parametrize("build", [lambda: icosphere(2), lambda: torus_grid(10, 6), lambda: square_grid(6)])
def test_d1_d0_vanishes(build):
    m = SurfaceMesh(*build())
    assert (m.d1() @ m.d0()).count_nonzero() == 0


def test_parse_errors():
    V = np.zeros((3, 3))
    with pytest.raises(ParseError):
        SurfaceMesh(V, np.array([[0, 1, 5]]))
    with pytest.raises(ParseError):
        SurfaceMesh(np.array([[0, 0, np.nan], [1, 0, 0], [0, 1, 0]]), np.array([[0, 1, 2]]))
    with pytest.raises(EmptyResult):
        SurfaceMesh(V, np.zeros((0, 3), dtype=int))


def test_degenerate_triangle():
    V = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], float)
    with pytest.raises(DegenerateTriangle):
        SurfaceMesh(V, np.array([[0, 1, 2]]))
    with pytest.raises(DegenerateTriangle):
        SurfaceMesh(V, np.array([[0, 1, 1]]))


def test_non_manifold_edge():
    V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1]], float)
    T = np.array([[0, 1, 2], [1, 0, 3], [0, 1, 4]])
    with pytest.raises(NonManifold):
        SurfaceMesh(V, T)


@pytest.mark.parametrize("fmt, writer", [("off", format_off), ("obj", format_obj)])
def test_roundtrip(tmp_path, fmt, writer):
    m = SurfaceMesh(*torus_grid(9, 7))
    path = tmp_path / f"t.{fmt}"
    save_mesh(m, path)
    back = load_mesh(path)
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.triangles, m.triangles)
    assert back.content_hash() == m.content_hash()
    assert writer(back) == writer(m)


def test_hash_changes_with_vertices():
    V, T = square_grid(4)
    a = SurfaceMesh(V, T)
    V2 = V.copy()
    V2[0, 2] += 1e-9
    assert SurfaceMesh(V2, T).content_hash() != a.content_hash()


def test_truncate():
    m = SurfaceMesh(*square_grid(10, size=4.0))
    assert truncate(m, 100.0) is m
    sub = truncate(m, 1.0)
    assert np.linalg.norm(sub.vertices, axis=1).max() <= 1.0 + 1e-12
    with pytest.raises(EmptyResult):
        truncate(m, 1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 14), st.integers(3, 10))
def test_torus_grid_euler(nu, nv):
    m = SurfaceMesh(*torus_grid(nu, nv))
    assert m.n_vertices - m.n_edges + m.n_faces == 0
    assert (m.d1() @ m.d0()).count_nonzero() == 0
