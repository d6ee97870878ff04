import math

import numpy as np
import pytest

import oracles
from gausshodge.angenent import period_cochains
from gausshodge.errors import EmptyKernel, NotClosed, NotHarmonic, Unstabilized
from gausshodge.geometry import gen_sphere
from gausshodge.homology import cup_product
from gausshodge.spectra import (IndexSweep, bochner_residual, count_kernel, gram_matrix,
                                harmonic_dimension, harmonic_partner, harmonic_projection,
                                ladder_index, m1_norm2, mcgonagle_test, morse_index,
                                verify_index_bound)
from gausshodge.weighted_dec import assemble


def test_projection_idempotent(angenent_ops, angenent_coarse):
    for c in period_cochains(angenent_coarse):
        w = harmonic_projection(angenent_ops, c)
        w2 = harmonic_projection(angenent_ops, w)
        assert np.abs(w2 - w).max() < 1e-10 * np.abs(w).max()


def test_projection_preserves_periods(angenent_ops, angenent_coarse):
    a, b = period_cochains(angenent_coarse)
    w = harmonic_projection(angenent_ops, a, gammas=[b])
    m = angenent_coarse.mesh
    assert cup_product(m, b, w) == pytest.approx(cup_product(m, b, a), abs=1e-10)


def test_plane_closed_cochain_projects_to_zero(plane_small):
    ops = assemble(plane_small, "galerkin")
    rng = np.random.default_rng(2)
    eta = ops.D0 @ rng.standard_normal(ops.mesh.n_vertices)
    w = harmonic_projection(ops, eta)
    assert math.sqrt(m1_norm2(ops, w) / m1_norm2(ops, eta)) < 1e-10


def test_projection_rejects_open_cochain(angenent_ops):
    w = np.zeros(angenent_ops.mesh.n_edges)
    w[0] = 1.0
    with pytest.raises(NotClosed):
        harmonic_projection(angenent_ops, w)


def test_harmonic_partner_is_orthogonal(angenent_ops, angenent_coarse):
    for c in period_cochains(angenent_coarse):
        w = harmonic_projection(angenent_ops, c)
        G = gram_matrix(angenent_ops, [w, harmonic_partner(angenent_ops, w)])
        assert abs(G[0, 1]) < 1e-8 * math.sqrt(G[0, 0] * G[1, 1])


def test_count_kernel():
    dim, gap = count_kernel(np.array([1e-14, 2e-14, 0.3, 0.5, 0.9, 1.2]))
    assert dim == 2 and gap > 1e10


@pytest.mark.parametrize("fixture, expected", [("sphere3", 0), ("angenent_coarse", 2), ("plane_small", 0)])
def test_harmonic_dimension_closed_and_plane(request, fixture, expected):
    rep = harmonic_dimension(request.getfixturevalue(fixture), R_schedule=(4.0, 8.0))
    assert rep.final_dim == expected
    assert rep.resolved


def test_morse_index_matches_oracles(sphere3, cylinder_coarse, angenent_coarse):
    assert morse_index(sphere3).index_estimate == oracles.sphere_jacobi_index(2.0)
    assert morse_index(cylinder_coarse).index_estimate == oracles.cylinder_jacobi_index()
    sweep = morse_index(angenent_coarse)
    assert sweep.index_estimate == oracles.angenent_index() == oracles.FROZEN["angenent_index"]
    assert sweep.dense_agrees and sweep.stabilized


def test_oracle_mode_eigenvalues():
    for m, frozen in oracles.FROZEN["angenent_modes"].items():
        ev = oracles.angenent_mode_eigenvalues(m)[: len(frozen)]
        assert np.allclose(ev, frozen, atol=1e-3)


def test_non_shrinker_is_flagged():
    with pytest.warns(UserWarning):
        s = morse_index(gen_sphere(1.0, 2), R_schedule=(4.0,))
    assert s.flagged


def test_schedule_must_increase(sphere3):
    with pytest.raises(ValueError):
        morse_index(sphere3, R_schedule=(5.0, 4.0))


def test_verify_semantics():
    rep = verify_index_bound(1, 0, 1)
    assert rep["status"] == "PASS" and rep["bound"] == 0
    rep = verify_index_bound(1, 2, 3)  # b = 6 needs index >= 2
    assert rep["status"] == "FAIL" and rep["bound"] == 2
    rep = verify_index_bound(9, 1, 0, pinch=1.75)
    assert rep["status"] == "PASS" and rep["hypothesis"] == "hypothesis unmet"
    assert verify_index_bound(3, 1, 1, pinch=0.5)["hypothesis"] == "hypothesis met"
    assert verify_index_bound(5, 1, 2, harmonic_dim=1)["status"] == "FAIL"


def test_unstabilized():
    sweep = IndexSweep([4.0, 5.0, 6.0], [1, 2, 3])
    with pytest.raises(Unstabilized):
        verify_index_bound(sweep, 0, 1)
    with pytest.raises(Unstabilized):
        ladder_index([IndexSweep([4, 5, 6], [2, 2, 2]), IndexSweep([4, 5, 6], [3, 3, 3])])
    assert ladder_index([IndexSweep([4, 5, 6], [2, 2, 2])] * 2) == 2


def test_bochner_needs_kernel(sphere3):
    ops = assemble(sphere3, "galerkin")
    with pytest.raises(EmptyKernel):
        bochner_residual(ops, sphere3)


def test_non_harmonic_rejected(angenent_ops, angenent_coarse):
    a, _ = period_cochains(angenent_coarse)
    with pytest.raises(NotHarmonic):
        bochner_residual(angenent_ops, angenent_coarse, a)
    with pytest.raises(NotHarmonic):
        mcgonagle_test(angenent_ops, angenent_coarse, a, 4.0)


def test_cutoff_form_zero(angenent_ops, angenent_coarse):
    res = mcgonagle_test(angenent_ops, angenent_coarse, np.zeros(angenent_ops.mesh.n_edges), 4.0)
    assert res.Q_total == 0 and res.holds
