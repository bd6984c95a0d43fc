import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smfv.mesh import (Mesh, dump_csv, uniform_interval, uniform_rectangle,
                       validate)


class TestUniformInterval:
    def test_four_cells(self):
        mesh = uniform_interval(4)
        assert [c.measure for c in mesh.cells] == pytest.approx([0.25] * 4, rel=1e-15)
        assert mesh.num_interior_edges == 3
        for e in mesh.interior_edges:
            assert e.measure == 1.0
            assert e.distance == pytest.approx(0.25, rel=1e-14)
            assert e.transmissibility == pytest.approx(4.0, rel=1e-14)
            assert e.diamond_measure == pytest.approx(0.25, rel=1e-14)
        assert mesh.regularity == pytest.approx(0.5, rel=1e-14)
        assert mesh.mesh_size == pytest.approx(0.25, rel=1e-15)

    def test_single_cell(self):
        mesh = uniform_interval(1)
        assert len(mesh.cells) == 1
        assert mesh.num_interior_edges == 0
        assert len(mesh.boundary_edges) == 2

    def test_two_cells(self):
        mesh = uniform_interval(2)
        (edge,) = mesh.interior_edges
        assert edge.distance == pytest.approx(0.5, rel=1e-15)
        assert edge.transmissibility == pytest.approx(2.0, rel=1e-15)
        midpoint = 0.5 * (mesh.cell_centers[0, 0] + mesh.cell_centers[1, 0])
        assert midpoint == pytest.approx(0.5, rel=1e-15)

    def test_rejects_zero_cells(self):
        with pytest.raises(ValueError):
            uniform_interval(0)


class TestUniformRectangle:
    def test_two_by_two(self):
        mesh = uniform_rectangle(2, 2)
        assert len(mesh.cells) == 4
        assert all(c.measure == pytest.approx(0.25, rel=1e-15) for c in mesh.cells)
        assert mesh.num_interior_edges == 4
        for e in mesh.interior_edges:
            assert e.measure == pytest.approx(0.5, rel=1e-15)
            assert e.distance == pytest.approx(0.5, rel=1e-15)
            assert e.transmissibility == pytest.approx(1.0, rel=1e-15)
            assert e.diamond_measure == pytest.approx(0.125, rel=1e-15)

    def test_single_cell(self):
        mesh = uniform_rectangle(1, 1)
        assert len(mesh.cells) == 1
        assert mesh.num_interior_edges == 0
        assert len(mesh.boundary_edges) == 4

    def test_paper_scale_counts(self):
        mesh = uniform_rectangle(70, 70)
        assert len(mesh.cells) == 4900
        assert mesh.num_interior_edges == 2 * 70 * 69
        assert len(mesh.boundary_edges) == 4 * 70

    def test_rejects_zero_subdivisions(self):
        with pytest.raises(ValueError):
            uniform_rectangle(0, 3)
        with pytest.raises(ValueError):
            uniform_rectangle(3, 0)

    def test_orthogonality_exact(self):
        mesh = uniform_rectangle(3, 5)
        for e in mesh.interior_edges:
            dx = mesh.cell_centers[e.cell_l] - mesh.cell_centers[e.cell_k]
            assert float(np.dot(e.normal_k_to_l, dx)) == pytest.approx(
                e.distance, rel=1e-14)
            assert np.linalg.norm(e.normal_k_to_l) == 1.0


class TestValidate:
    def test_constructed_meshes_pass(self):
        assert validate(uniform_interval(8)) == []
        assert validate(uniform_rectangle(3, 5)) == []

    def test_perturbed_diamond_reported_once(self):
        mesh = uniform_interval(5)
        edges = list(mesh.interior_edges)
        bad = dataclasses.replace(edges[2],
                                  diamond_measure=edges[2].diamond_measure * (1 + 1e-6))
        edges[2] = bad
        broken = Mesh(1, mesh.cells, edges, mesh.boundary_edges, mesh.mesh_size)
        violations = validate(broken)
        assert len(violations) == 1
        assert "diamond" in violations[0]
        assert "interior edge 2" in violations[0]


@given(n=st.integers(min_value=1, max_value=200))
@settings(max_examples=40, deadline=None)
def test_interval_invariants(n):
    mesh = uniform_interval(n)
    assert mesh.cell_measures.sum() == pytest.approx(mesh.total_measure, rel=1e-12)
    assert mesh.total_measure == pytest.approx(1.0, rel=1e-12)
    assert validate(mesh) == []


@given(nx=st.integers(min_value=1, max_value=12), ny=st.integers(min_value=1, max_value=12))
@settings(max_examples=30, deadline=None)
def test_rectangle_invariants(nx, ny):
    mesh = uniform_rectangle(nx, ny)
    assert mesh.total_measure == pytest.approx(1.0, rel=1e-12)
    # half-diamond partition of each cell
    acc = np.zeros(mesh.num_cells)
    for e in mesh.interior_edges:
        acc[e.cell_k] += e.measure * e.dist_k / 2.0
        acc[e.cell_l] += e.measure * e.dist_l / 2.0
    for b in mesh.boundary_edges:
        acc[b.cell_k] += b.measure * b.distance / 2.0
    assert acc == pytest.approx(mesh.cell_measures, rel=1e-12)
    assert validate(mesh) == []


def test_edge_ordering_is_deterministic():
    mesh = uniform_rectangle(3, 2)
    # x-direction edges first, ordered by K, then y-direction edges
    ks = [e.cell_k for e in mesh.interior_edges]
    x_dir = [tuple(e.normal_k_to_l) for e in mesh.interior_edges[:4]]
    assert x_dir == [(1.0, 0.0)] * 4
    assert ks[:4] == sorted(ks[:4])
    assert ks[4:] == sorted(ks[4:])


def test_dump_csv(tmp_path):
    mesh = uniform_rectangle(2, 2)
    path = tmp_path / "mesh.csv"
    dump_csv(mesh, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("kind,")
    n_rows = len(lines) - 1
    assert n_rows == len(mesh.cells) + mesh.num_interior_edges + len(mesh.boundary_edges)
    assert lines[1].startswith("cell,0,")
