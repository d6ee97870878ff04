import math

import numpy as np
import pytest

import oracles
from gausshodge.angenent import gen_angenent_torus, period_cochains
from gausshodge.cones import cone_metric_audit, gen_cone_ended
from gausshodge.errors import GeometryError, MissingCurvature
from gausshodge.geometry import (F_functional, gen_plane_disk, gen_sphere, geometry_from_mesh,
                                 geometry_from_sidecar, geometry_sidecar, shrinker_residual,
                                 truncate_geometry)
from gausshodge.homology import is_closed
from gausshodge.mesh import SurfaceMesh, topology
from gausshodge.shapes import icosphere


def test_sphere_residual_by_radius():
    # H - <x/2, N> is 1/r + ... : 1.5 at radius 1, zero on the shrinker of radius 2
    assert np.allclose(shrinker_residual(gen_sphere(1.0, 2)), 1.5)
    assert np.allclose(shrinker_residual(gen_sphere(2.0, 2)), 0.0, atol=1e-12)


def test_plane_and_cylinder_residual(plane_small, cylinder_coarse):
    assert np.abs(shrinker_residual(plane_small)).max() < 1e-14
    assert np.abs(shrinker_residual(cylinder_coarse)).max() < 1e-12


def test_sphere_F_converges():
    errs = [abs(F_functional(gen_sphere(2.0, s)) - oracles.sphere_F(2.0)) for s in (2, 3, 4)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 2e-3


def test_plane_F(plane_small):
    # the Gaussian mass outside |x| = 4 is exp(-4)
    assert F_functional(plane_small) == pytest.approx(1 - math.exp(-4), abs=5e-3)


def test_angenent_profile_constants(angenent_coarse):
    r0, half, r_in = oracles.angenent_profile()
    meta = angenent_coarse.meta
    assert meta["r0"] == pytest.approx(r0, abs=1e-9)
    assert meta["half_length"] == pytest.approx(half, abs=1e-9)
    assert meta["r_inner"] == pytest.approx(r_in, abs=1e-9)
    assert meta["r0"] == pytest.approx(oracles.FROZEN["angenent_r0"], abs=1e-10)
    assert meta["half_length"] == pytest.approx(oracles.FROZEN["angenent_half_length"], abs=1e-10)


def test_angenent_surface(angenent_coarse):
    assert topology(angenent_coarse.mesh) == (0, 1, 0)
    assert np.abs(shrinker_residual(angenent_coarse)).max() < 1e-8
    assert angenent_coarse.pinch_constant() > 1


def test_angenent_F_converges():
    ref = oracles.angenent_F()
    assert ref == pytest.approx(oracles.FROZEN["angenent_F"], abs=1e-4)
    errs = [abs(F_functional(gen_angenent_torus(h)) - ref) for h in (0.3, 0.2)]
    assert errs[1] < errs[0] < 0.02


def test_period_cochains_closed(angenent_coarse):
    for c in period_cochains(angenent_coarse):
        assert is_closed(angenent_coarse.mesh, c, tol=1e-12)


def test_fitted_curvature_on_sphere():
    g = geometry_from_mesh(SurfaceMesh(2.0 * icosphere(4)[0], icosphere(4)[1]))
    assert np.median(np.abs(g.kappa1 - 0.5)) < 0.01
    assert np.median(np.abs(g.kappa2 - 0.5)) < 0.01


def test_missing_curvature():
    g = gen_sphere(2.0, 2)
    bare = type(g)(g.mesh, g.normals, g.frames, None)
    with pytest.raises(MissingCurvature):
        bare.pinch_constant()


def test_sidecar_roundtrip(sphere3):
    rec = geometry_sidecar(sphere3)
    g = geometry_from_sidecar(sphere3.mesh, rec)
    assert np.array_equal(g.kappa1, sphere3.kappa1)
    assert np.array_equal(g.normals, sphere3.normals)
    rec["mesh_sha256"] = "0" * 64
    with pytest.raises(GeometryError):
        geometry_from_sidecar(sphere3.mesh, rec)


def test_truncation_keeps_inside():
    g = gen_plane_disk(6.0, 0.5)
    sub = truncate_geometry(g, 3.0)
    assert np.linalg.norm(sub.mesh.vertices, axis=1).max() <= 3.0 + 1e-12
    assert truncate_geometry(g, 100.0) is g


@pytest.mark.parametrize("genus, ends", [(0, 2), (1, 1), (1, 2)])
def test_cone_ended_topology_and_cones(genus, ends):
    geo, marks = gen_cone_ended(genus=genus, n_ends=ends, target_edge=0.4)
    _, g, b = topology(geo.mesh)
    assert (g, b) == (genus, ends)
    assert len(marks) == ends
    for audit in cone_metric_audit(geo):
        for v in audit.values():
            assert v == pytest.approx(1.0, abs=1e-12)
