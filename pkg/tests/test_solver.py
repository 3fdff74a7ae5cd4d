import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hurwitz_wp.combinatorics import MonodromyDatum
from hurwitz_wp.mesh import BranchConfiguration, build_cover
from hurwitz_wp.solver import (BOX_SCALE, MetricField, SolverError, apply_box, assemble_operators,
                               liouville_jacobian, screened_poisson, solve_liouville,
                               spd_certificate)


def test_area_is_gauss_bonnet(hex_r2_solved):
    surf, ops, metric = hex_r2_solved
    assert metric.converged
    assert abs(metric.area - 4 * np.pi) < 1e-9


def test_quadratic_convergence(hex_r2_solved):
    hist = np.array(hex_r2_solved[2].residual_history)
    terminal = [(a, b) for a, b in zip(hist, hist[1:]) if 1e-9 < a < 1e-2]
    assert len(terminal) >= 2
    for a, b in terminal:
        assert b <= 1e3 * a * a
    a, b, c = hist[-4], hist[-3], hist[-2]
    assert np.log(c / b) / np.log(b / a) > 1.8


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(-3.0, 3.0))
def test_initialization_independence(hex_r2_solved, seed, offset):
    surf, ops, metric = hex_r2_solved
    u0 = offset + np.random.default_rng(seed).normal(size=surf.num_vertices)
    other = solve_liouville(surf, ops, tol=1e-12, u0=u0)
    assert np.abs(other.u - metric.u).max() < 1e-8


def test_laplacian_consistency(hex_r2):
    # the height function is a Laplace eigenfunction, -Delta x3 = 2 x3
    ops = assemble_operators(hex_r2, quadratic=False)
    x3 = hex_r2.positions()[:, 2]
    err = ops.L @ x3 / ops.area - 2 * x3
    assert np.sqrt(np.sum(ops.area * err ** 2) / np.sum(ops.area * 4 * x3 ** 2)) < 0.02


def test_jacobian_spd(hex_r2_solved):
    surf, ops, metric = hex_r2_solved
    assert spd_certificate(liouville_jacobian(ops, metric.u))
    assert not spd_certificate(-liouville_jacobian(ops, metric.u))


def test_box_kills_constants(hex_r2_solved):
    surf, ops, metric = hex_r2_solved
    assert np.abs(apply_box(ops, metric, np.ones(surf.num_vertices))).max() < 1e-10
    phi = screened_poisson(ops, metric, np.full(surf.num_vertices, 2.5))
    assert np.allclose(phi, 2.5, atol=1e-10)


def test_screened_poisson_inverts_box(hex_r2_solved):
    surf, ops, metric = hex_r2_solved
    f = np.sin(3 * surf.positions()[:, 0])
    phi = screened_poisson(ops, metric, f)
    assert np.allclose(apply_box(ops, metric, phi) + phi, f, atol=1e-9)
    assert BOX_SCALE == 0.5


def test_maximum_principle(hex_r2_solved):
    surf, ops, metric = hex_r2_solved
    rhs = np.abs(surf.positions()[:, 1]) + 0.01
    assert screened_poisson(ops, metric, rhs).min() > 0


def test_genus_zero_rejected():
    cfg = BranchConfiguration((0j, 1 + 0j), MonodromyDatum.from_pairs(2, [(1, 2)] * 2))
    with pytest.raises(ValueError):
        solve_liouville(build_cover(cfg, 0))


def test_iteration_budget(hex_r2_solved):
    surf, ops, _ = hex_r2_solved
    with pytest.raises(SolverError) as info:
        solve_liouville(surf, ops, tol=1e-14, max_iter=2)
    assert len(info.value.history) == 3


def test_field_csv(hex_r2_solved, tmp_path):
    surf, ops, metric = hex_r2_solved
    path = tmp_path / "u.csv"
    metric.write_csv(path, {"w": surf.plane_coords()})
    lines = path.read_text().splitlines()
    assert lines[0] == "vertex,u,mass,w"
    assert len(lines) == surf.num_vertices + 1
    assert isinstance(metric, MetricField)
