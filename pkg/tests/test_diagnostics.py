import math

import numpy as np
import pytest

from smfv.diagnostics import (DiagnosticsRecord, SampledRun, dissipation,
                              entropy, equilibrium_composition,
                              l1_space_time_error, reconstruct_flux_field,
                              reconstruct_gradient, relative_entropy)
from smfv.mesh import (BoundaryEdge, Cell, InteriorEdge, Mesh,
                       uniform_interval, uniform_rectangle, validate)
from smfv.model import build_system
from smfv.scheme import FluxField, StateField


def two_unit_cells():
    """Hand-built admissible mesh on (0, 2): two unit cells, tau_sigma = 1."""
    cells = [Cell(0, np.array([0.5]), 1.0), Cell(1, np.array([1.5]), 1.0)]
    interior = [InteriorEdge(0, 1, measure=1.0, distance=1.0, dist_k=0.5,
                             dist_l=0.5, transmissibility=1.0,
                             normal_k_to_l=np.array([1.0]), diamond_measure=1.0)]
    boundary = [BoundaryEdge(0, 1.0, 0.5, np.array([-1.0])),
                BoundaryEdge(1, 1.0, 0.5, np.array([1.0]))]
    return Mesh(1, cells, interior, boundary, mesh_size=1.0)


class TestEntropy:
    def test_uniform_state_saturates_lower_bound(self):
        for n in (2, 3, 5):
            mesh = uniform_interval(8)
            state = StateField(mesh, np.full((n, 8), 1.0 / n))
            assert entropy(mesh, state) == pytest.approx(-math.log(n), rel=1e-12)

    def test_pure_state_is_zero(self):
        mesh = uniform_interval(4)
        vals = np.zeros((3, 4))
        vals[0] = 1.0
        assert entropy(mesh, StateField(mesh, vals)) == 0.0

    def test_single_cell_value(self):
        mesh = uniform_interval(1)
        state = StateField(mesh, np.array([[0.25], [0.75]]))
        expected = 0.25 * math.log(0.25) + 0.75 * math.log(0.75)
        assert entropy(mesh, state) == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(-0.562335, abs=1e-6)

    def test_rejects_negative(self):
        mesh = uniform_interval(2)
        with pytest.raises(ValueError):
            entropy(mesh, StateField(mesh, np.array([[-0.1, 0.5], [1.1, 0.5]])))

    def test_bounds_on_random_states(self):
        rng = np.random.default_rng(0)
        mesh = uniform_interval(11)
        for n in (2, 4):
            vals = rng.dirichlet(np.ones(n), size=11).T
            e = entropy(mesh, StateField(mesh, vals))
            assert -mesh.total_measure * math.log(n) - 1e-12 <= e <= 1e-12


class TestDissipation:
    def test_constant_state_zero_flux(self, system_1d):
        mesh = uniform_interval(5)
        state = StateField(mesh, np.full((3, 5), 1.0 / 3.0))
        fluxes = FluxField(mesh, np.zeros((3, 4)))
        assert dissipation(system_1d, mesh, state, fluxes) == 0.0

    def test_single_edge_jump_value(self):
        mesh = two_unit_cells()
        assert validate(mesh) == []
        system = build_system([[0.0, 1.0], [1.0, 0.0]])  # alpha = 4
        assert system.alpha == 4.0
        state = StateField(mesh, np.array([[0.25, 0.75], [0.75, 0.25]]))
        fluxes = FluxField(mesh, np.zeros((2, 1)))
        jump = math.sqrt(0.75) - math.sqrt(0.25)
        expected = (system.alpha / 2.0) * 1.0 * 2.0 * jump**2
        value = dissipation(system, mesh, state, fluxes)
        assert value == pytest.approx(expected, rel=1e-14)
        assert value == pytest.approx(0.535898, abs=1e-6)

    def test_nonnegative_on_random_data(self, system_1d):
        rng = np.random.default_rng(1)
        mesh = uniform_interval(9)
        for _ in range(50):
            state = StateField(mesh, rng.dirichlet(np.ones(3), size=9).T)
            fluxes = FluxField(mesh, rng.normal(size=(3, 8)))
            assert dissipation(system_1d, mesh, state, fluxes) >= 0.0


class TestRelativeEntropy:
    def test_zero_at_equilibrium(self):
        mesh = uniform_interval(6)
        m = np.array([0.2, 0.3, 0.5])
        state = StateField(mesh, np.repeat(m[:, None], 6, axis=1))
        assert relative_entropy(mesh, state, m) == pytest.approx(0.0, abs=1e-15)

    def test_nonnegative_for_matched_equilibrium(self):
        rng = np.random.default_rng(2)
        mesh = uniform_interval(10)
        for _ in range(100):
            state = StateField(mesh, rng.dirichlet(np.ones(3), size=10).T)
            m = equilibrium_composition(state)
            assert relative_entropy(mesh, state, m) >= -1e-12

    def test_equals_entropy_difference(self):
        rng = np.random.default_rng(3)
        mesh = uniform_interval(7)
        state = StateField(mesh, rng.dirichlet(np.ones(3), size=7).T)
        m = equilibrium_composition(state)
        equilibrium = StateField(mesh, np.repeat(m[:, None], 7, axis=1))
        h = relative_entropy(mesh, state, m)
        assert h == pytest.approx(entropy(mesh, state) - entropy(mesh, equilibrium),
                                  abs=1e-12)

    def test_rejects_zero_mass_species(self):
        mesh = uniform_interval(3)
        state = StateField(mesh, np.full((2, 3), 0.5))
        with pytest.raises(ValueError):
            relative_entropy(mesh, state, np.array([1.0, 0.0]))


class TestReconstructGradient:
    def test_constant_field_is_zero(self):
        mesh = uniform_rectangle(3, 3)
        grads = reconstruct_gradient(mesh, np.full(9, 0.7))
        assert np.abs(grads).max() == 0.0

    def test_linear_field_1d(self):
        mesh = uniform_interval(8)
        grads = reconstruct_gradient(mesh, mesh.cell_centers[:, 0])
        interior = grads[:mesh.num_interior_edges]
        assert interior == pytest.approx(np.ones((7, 1)), rel=1e-12)
        # boundary diamonds carry the mirror-value convention: zero jump
        assert np.abs(grads[mesh.num_interior_edges:]).max() == 0.0

    def test_linear_field_2d_energy(self):
        # sum_sigma m_diamond |grad|^2 = 2 (Nx - 1)/Nx for v = x on the unit square
        nx = ny = 4
        mesh = uniform_rectangle(nx, ny)
        grads = reconstruct_gradient(mesh, mesh.cell_centers[:, 0])
        m_diamond = np.concatenate([mesh.edge_diamond,
                                    np.zeros(len(mesh.boundary_edges))])
        energy = float((m_diamond * (grads**2).sum(axis=1)).sum())
        assert energy == pytest.approx(2.0 * (nx - 1) / nx, rel=1e-12)


class TestReconstructFluxField:
    def test_zero_fluxes(self):
        mesh = uniform_interval(5)
        field, norm = reconstruct_flux_field(mesh, FluxField(mesh, np.zeros((3, 4))))
        assert norm == 0.0
        assert np.abs(field).max() == 0.0

    def test_single_edge_norm(self):
        mesh = uniform_interval(4)  # every edge has m_sigma * d_sigma = 0.25
        values = np.zeros((1, 3))
        values[0, 1] = 1.0
        field, norm = reconstruct_flux_field(mesh, FluxField(mesh, values))
        assert norm == pytest.approx(0.25, rel=1e-14)
        assert field[0, 1, 0] == pytest.approx(1.0, rel=1e-14)

    def test_flux_part_of_dissipation_1d(self, system_1d):
        # in 1D: (c*/2) * squared norm equals the flux part of the dissipation
        rng = np.random.default_rng(4)
        mesh = uniform_interval(6)
        fluxes = FluxField(mesh, rng.normal(size=(3, 5)))
        state = StateField(mesh, np.full((3, 6), 1.0 / 3.0))  # zero jump part
        _, norm = reconstruct_flux_field(mesh, fluxes)
        assert 0.5 * system_1d.c_star * norm == pytest.approx(
            dissipation(system_1d, mesh, state, fluxes), rel=1e-12)


class TestL1SpaceTimeError:
    def test_identical_runs(self):
        mesh = uniform_interval(4)
        states = [np.full((2, 4), 0.5), np.full((2, 4), 0.5)]
        a = SampledRun(mesh, [0.5, 0.5], states)
        assert l1_space_time_error(a, a) == 0.0

    def test_constant_fields(self):
        coarse = SampledRun(uniform_interval(1), [1.0], [np.full((1, 1), 1.0)])
        ref = SampledRun(uniform_interval(4), [1.0], [np.full((1, 4), 0.5)])
        assert l1_space_time_error(coarse, ref) == pytest.approx(0.5, rel=1e-14)

    def test_nested_step_fields(self):
        coarse = SampledRun(uniform_interval(2), [1.0],
                            [np.array([[0.0, 1.0]])])
        ref = SampledRun(uniform_interval(4), [1.0],
                         [np.array([[0.0, 0.5, 0.5, 1.0]])])
        assert l1_space_time_error(coarse, ref) == pytest.approx(0.25, rel=1e-14)

    def test_symmetric_on_shared_grid(self):
        rng = np.random.default_rng(5)
        mesh = uniform_interval(6)
        a = SampledRun(mesh, [0.1], [rng.uniform(size=(2, 6))])
        b = SampledRun(mesh, [0.1], [rng.uniform(size=(2, 6))])
        assert l1_space_time_error(a, b) == pytest.approx(
            l1_space_time_error(b, a), rel=1e-15)

    def test_rejects_non_nested(self):
        coarse = SampledRun(uniform_interval(4), [1.0], [np.zeros((1, 4))])
        ref = SampledRun(uniform_interval(6), [1.0], [np.zeros((1, 6))])
        with pytest.raises(ValueError):
            l1_space_time_error(coarse, ref)

    def test_rejects_mismatched_times(self):
        coarse = SampledRun(uniform_interval(2), [1.0], [np.zeros((1, 2))])
        ref = SampledRun(uniform_interval(4), [0.5], [np.zeros((1, 4))])
        with pytest.raises(ValueError):
            l1_space_time_error(coarse, ref)

    def test_2d_restriction(self):
        coarse = SampledRun(uniform_rectangle(1, 1), [1.0], [np.array([[0.0]])])
        vals = np.arange(4.0)[None, :]  # 2x2 fine grid, mean 1.5
        ref = SampledRun(uniform_rectangle(2, 2), [1.0], [vals])
        assert l1_space_time_error(coarse, ref) == pytest.approx(1.5, rel=1e-14)


class TestDiagnosticsRecord:
    def test_from_step_and_violations(self, system_1d):
        mesh = uniform_interval(4)
        state = StateField(mesh, np.full((3, 4), 1.0 / 3.0))
        fluxes = FluxField(mesh, np.zeros((3, 3)))
        m = equilibrium_composition(state)
        rec = DiagnosticsRecord.from_step(system_1d, mesh, state, fluxes, m, 0.5)
        assert rec.violations(mesh, 3) == []
        assert rec.dissipation == 0.0
        assert rec.relative_entropy == pytest.approx(0.0, abs=1e-14)
        assert rec.masses == pytest.approx(state.mass_vector)

    def test_violations_detected(self):
        mesh = uniform_interval(2)
        rec = DiagnosticsRecord(time=0.0, entropy=1.0, dissipation=-1.0,
                                relative_entropy=-1.0, masses=np.ones(2),
                                min_fraction=0.5, max_sum_deviation=0.0,
                                max_flux_sum_deviation=0.0, newton_iterations=1)
        assert len(rec.violations(mesh, 2)) == 3
