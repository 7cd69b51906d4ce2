import numpy as np
import pytest

from netsde.assembly import assemble_form
from netsde.errors import DecayTooSlow
from netsde.fields import build_edge_fields
from netsde.graph import VertexMatrix, build_graph
from netsde.mesh import build_mesh
from netsde.noise import (
    IncrementSampler,
    colored_noise_operator,
    coupled_sampler,
    sample_noise_increment,
    white_noise_model,
)


def small_system(n_int=3, n_edges=1):
    if n_edges == 1:
        graph = build_graph(2, [(1, 2)])
    else:
        graph = build_graph(n_edges + 1, [(1, j + 2) for j in range(n_edges)])
    fields = build_edge_fields(graph.n_edges)
    return assemble_form(build_mesh(graph, n_int), fields, VertexMatrix(-np.eye(graph.n_vertices)))


class TestWhiteNoise:
    def test_bitwise_determinism(self):
        noise = white_noise_model(small_system(), seed=7)
        a = sample_noise_increment(noise, 3, 11, 0.01)
        b = sample_noise_increment(noise, 3, 11, 0.01)
        assert np.array_equal(a, b)

    def test_streams_differ_across_ids(self):
        noise = white_noise_model(small_system(), seed=7)
        base = sample_noise_increment(noise, 3, 11, 0.01)
        assert not np.array_equal(base, sample_noise_increment(noise, 4, 11, 0.01))
        assert not np.array_equal(base, sample_noise_increment(noise, 3, 12, 0.01))
        assert not np.array_equal(base, sample_noise_increment(noise.with_seed(8), 3, 11, 0.01))

    def test_fast_sampler_is_bitwise_identical(self):
        noise = white_noise_model(small_system(), seed=5)
        sampler = IncrementSampler(noise, trajectory_id=2)
        for step in (0, 1, 5, 1000):
            assert np.array_equal(sampler(step, 0.25),
                                  sample_noise_increment(noise, 2, step, 0.25))

    def test_zero_dt_gives_zero_vector(self):
        noise = white_noise_model(small_system(), seed=1)
        assert np.all(sample_noise_increment(noise, 0, 0, 0.0) == 0.0)

    def test_scaling_with_dt(self):
        noise = white_noise_model(small_system(), seed=1)
        a = sample_noise_increment(noise, 0, 0, 0.01)
        b = sample_noise_increment(noise, 0, 0, 0.04)
        np.testing.assert_allclose(b, 2.0 * a, atol=1e-15)

    def test_covariance_matches_mass(self):
        sys = small_system(n_int=4)
        noise = white_noise_model(sys, seed=3)
        dt = 0.2
        n_draw = 30000
        incs = np.array([sample_noise_increment(noise, 0, s, dt) for s in range(n_draw)])
        emp = incs.T @ incs / n_draw
        target = dt * sys.mass.toarray()
        se = dt * np.sqrt((np.outer(np.diag(sys.mass.toarray()), np.diag(sys.mass.toarray()))
                           + sys.mass.toarray() ** 2) / n_draw)
        assert np.all(np.abs(emp - target) <= 4.0 * se)

    def test_coupled_sampler_sums_fine_increments(self):
        noise = white_noise_model(small_system(), seed=9)
        fine = IncrementSampler(noise, trajectory_id=1)
        coarse = coupled_sampler(noise, trajectory_id=1, ratio=4)
        dt_fine = 0.01
        expected = sum(fine(8 + i, dt_fine) for i in range(4))
        np.testing.assert_allclose(coarse(2, 4 * dt_fine), expected, atol=1e-15)


class TestColoredNoise:
    def test_slow_decay_rejected(self):
        with pytest.raises(DecayTooSlow):
            colored_noise_operator(small_system(), decay=0.4)

    def test_trace_grows_with_modes_but_converges(self):
        sys = small_system(n_int=31)
        traces = [colored_noise_operator(sys, decay=1.0, n_modes=k).covariance_trace
                  for k in (4, 8, 16, 32)]
        assert np.all(np.diff(traces) > 0.0)
        increments = np.diff(traces)
        assert np.all(np.diff(increments) < 0.0)
        assert traces[-1] < np.inf

    def test_trace_is_frobenius_of_factor(self):
        sys = small_system(n_int=5)
        model = colored_noise_operator(sys, decay=2.0, n_modes=4)
        cov = model.factor @ model.factor.T
        assert model.covariance_trace == pytest.approx(np.trace(cov))

    def test_single_mode_gives_rank_one_noise_per_edge(self):
        sys = small_system(n_int=6)
        model = colored_noise_operator(sys, decay=3.0, n_modes=1)
        draws = np.array([sample_noise_increment(model, 0, s, 1.0) for s in range(40)])
        rank = np.linalg.matrix_rank(draws, tol=1e-10)
        assert rank == 1

    def test_mode_loads_match_quadrature_oracle(self):
        from scipy.integrate import quad
        sys = small_system(n_int=3)
        mesh = sys.mesh
        model = colored_noise_operator(sys, decay=2.0, n_modes=2)
        h = mesh.h
        # interior hat function centered at x = h on edge 1, mode k = 2
        mu = sys.fields.weights[0]
        hat = lambda x: np.maximum(0.0, 1.0 - np.abs(x - h) / h)
        oracle = np.sqrt(2.0 * mu) * 2.0 ** -2.0 * quad(
            lambda x: hat(x) * np.sin(2 * np.pi * x), 0.0, 1.0)[0]
        dof = mesh.edge_dofs[0, 1]
        assert model.factor[dof, 1] == pytest.approx(oracle, abs=1e-12)

    def test_covariance_positive_semidefinite(self):
        sys = small_system(n_int=4, n_edges=3)
        model = colored_noise_operator(sys, decay=1.5)
        cov = model.factor @ model.factor.T
        eigs = np.linalg.eigvalsh(cov)
        assert eigs.min() >= -1e-12
