import json

import numpy as np
import pytest

from hurwitz_wp.combinatorics import MonodromyDatum
from hurwitz_wp.mesh import (CHART_DISK, BranchConfiguration, MeshError, MeshParams,
                             build_cover, euler_characteristic, monodromy_around, smoothstep)
from hurwitz_wp.solver import assemble_operators


def test_euler_characteristic(hex_r1, hex_r2):
    assert euler_characteristic(hex_r1) == -2
    assert euler_characteristic(hex_r2) == -2


def test_trigonal_cover(trigonal):
    surf = build_cover(trigonal, 1)
    assert surf.genus == 2
    assert euler_characteristic(surf) == -2


def test_gauss_bonnet_exact(hex_r2):
    ops = assemble_operators(hex_r2, quadratic=False)
    assert abs(ops.defect.sum() - 2 * np.pi * euler_characteristic(hex_r2)) < 1e-9


def test_cone_angles(hex_r2):
    ops = assemble_operators(hex_r2, quadratic=False)
    cones = ops.angle_sum[hex_r2.ram_vertices]
    assert np.allclose(cones, 4 * np.pi, rtol=1e-2)
    others = np.delete(ops.angle_sum, hex_r2.ram_vertices)
    assert np.all(np.abs(others - 2 * np.pi) < 0.2)


def test_background_area(hex_r2):
    ops = assemble_operators(hex_r2, quadratic=False)
    # chordal triangles underestimate the sphere by O(h^2)
    assert 0.99 < ops.total_area / (2 * 4 * np.pi) < 1.0
    assert abs(ops.area.sum() - ops.face_area.sum()) < 1e-9


def test_monodromy_matches_datum(hexagon, hex_r1):
    for j in range(hexagon.b):
        perm = monodromy_around(hex_r1, j)
        assert sorted(perm) == [0, 1] and perm != (0, 1)


def test_disk_vertices_have_disk_charts(hex_r1):
    assert np.all(hex_r1.chart_kind[hex_r1.ram_vertices] == CHART_DISK)
    assert len(hex_r1.ram_vertices) == 6


def test_chart_independence_of_disk_radius(hexagon):
    default = build_cover(hexagon, 1)
    small = build_cover(hexagon, 1, MeshParams(disk_radius=0.12))
    assert euler_characteristic(small) == euler_characteristic(default)
    assert small.base.disk_radius == 0.12


def test_deformation_moves_only_one_disk(hex_r1):
    moved = hex_r1.deformed(0, 1e-3)
    x0, x1 = hex_r1.positions(), moved.positions()
    changed = np.linalg.norm(x1 - x0, axis=1) > 0
    assert changed.any()
    assert not changed[hex_r1.ram_vertices[1:]].any()
    assert abs(moved.branch_point(0) - hex_r1.branch_point(0)) > 0


def test_mesh_json(hex_r1, tmp_path):
    path = tmp_path / "mesh.json"
    hex_r1.write_json(path)
    data = json.loads(path.read_text())
    assert len(data["vertices"]) == hex_r1.num_vertices
    assert len(data["faces"]) == len(hex_r1.faces)
    assert len(data["cones"]) == 6
    assert BranchConfiguration.from_json(data["config"]).points == hex_r1.config.points


def test_configuration_validation():
    with pytest.raises(ValueError):
        BranchConfiguration((0j, 1 + 0j), MonodromyDatum.from_pairs(2, [(1, 2)] * 3))
    with pytest.raises(MeshError):
        BranchConfiguration((0j, 0j), MonodromyDatum.from_pairs(2, [(1, 2)] * 2))


def test_smoothstep():
    x = np.linspace(-0.5, 1.5, 201)
    y = smoothstep(x)
    assert y[0] == 0 and y[-1] == 1
    assert np.all(np.diff(y) >= 0)
    assert np.isclose(smoothstep(np.array([0.5]))[0], 0.5)
