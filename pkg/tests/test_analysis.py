import numpy as np
import pytest

from netsde.analysis import (
    ExponentEstimate,
    allen_cahn_energy,
    e2_norm_rows,
    estimate_holder_exponent,
    estimate_strong_order,
    holder_exponent_from_paths,
    monte_carlo,
    run_trajectories,
    vertex_residual,
)
from netsde.assembly import assemble_form
from netsde.errors import ConfigurationError, InsufficientResolution, LadderTooShort
from netsde.fields import build_diffusion, build_edge_fields, polynomial_drift
from netsde.graph import VertexMatrix, build_graph
from netsde.mesh import build_mesh, interpolate
from netsde.noise import white_noise_model
from netsde.sde import Problem, SolverConfig, simulate_path
from netsde.trajectory import TrajectorySet
from netsde.semigroup import semigroup_apply, solve_heat

from _oracles import robin_eigenfunction, robin_eigenvalues


def heat_noise_problem(n_int=6, dt=1e-3, t_end=0.25, seed=0, stride=1, drift=None):
    graph = build_graph(2, [(1, 2)])
    fields = build_edge_fields(1)
    system = assemble_form(build_mesh(graph, n_int), fields, VertexMatrix(-np.eye(2)))
    diffusion = build_diffusion(1, 1.0)
    noise = white_noise_model(system, seed=seed)
    u0 = interpolate(system.mesh, lambda x: np.sin(np.pi * x))
    cfg = SolverConfig(dt=dt, t_end=t_end, snapshot_stride=stride)
    return Problem(system, cfg, u0, drift, diffusion, noise)


class TestHolderCalibration:
    def brownian_paths(self, n_paths=200, n_snap=401, spacing=1e-3, seed=99):
        rng = np.random.default_rng(seed)
        increments = rng.standard_normal((n_paths, n_snap - 1, 1)) * np.sqrt(spacing)
        paths = np.concatenate([np.zeros((n_paths, 1, 1)), np.cumsum(increments, axis=1)],
                               axis=1)
        times = spacing * np.arange(n_snap)
        return times, list(paths)

    def test_brownian_exponent_half(self):
        times, paths = self.brownian_paths()
        lags = np.array([2, 4, 8, 16, 32]) * 1e-3
        est = estimate = holder_exponent_from_paths(times, paths, lags)
        assert est.estimate == pytest.approx(0.5, abs=0.05)

    def test_lipschitz_exponent_one(self):
        times = 1e-3 * np.arange(501)
        path = np.sin(2 * np.pi * times)[:, None]
        lags = np.array([2, 4, 8, 16]) * 1e-3
        est = holder_exponent_from_paths(times, [path], lags)
        assert est.estimate == pytest.approx(1.0, abs=0.05)

    def test_lag_validation(self):
        times, paths = self.brownian_paths(n_paths=2, n_snap=64)
        with pytest.raises(LadderTooShort):
            holder_exponent_from_paths(times, paths, [1e-3, 2e-3, 4e-3])
        with pytest.raises(ConfigurationError):
            holder_exponent_from_paths(times, paths, [4e-3, 2e-3, 8e-3, 16e-3])
        with pytest.raises(InsufficientResolution):
            holder_exponent_from_paths(times, paths, [1.5e-3, 2e-3, 4e-3, 8e-3])

    def test_driver_rejects_coarse_dt(self):
        problem = heat_noise_problem(dt=1e-3)
        with pytest.raises(InsufficientResolution):
            estimate_holder_exponent(problem, [2e-3, 4e-3, 8e-3, 16e-3], n_trajectories=2)

    def test_estimator_deterministic_given_seed(self):
        problem = heat_noise_problem(dt=1e-3, t_end=0.2, seed=5)
        lags = np.array([4, 8, 16, 32]) * 1e-3
        a = estimate_holder_exponent(problem, lags, n_trajectories=8)
        b = estimate_holder_exponent(problem, lags, n_trajectories=8)
        assert a.estimate == b.estimate
        np.testing.assert_array_equal(a.values, b.values)

    def test_white_noise_spde_exponent_near_quarter(self):
        problem = heat_noise_problem(n_int=24, dt=2e-4, t_end=0.2, seed=2)
        lags = np.array([4, 8, 20, 40, 80]) * 2e-4
        est = estimate_holder_exponent(problem, lags, n_trajectories=24, burn_fraction=0.3)
        assert 0.15 <= est.estimate <= 0.35
        assert est.r_squared > 0.9


class TestMonteCarlo:
    def test_zero_noise_ensemble_collapses(self):
        problem = heat_noise_problem()
        deterministic = Problem(problem.system, problem.config, problem.initial)
        stats = monte_carlo(deterministic, n_trajectories=3)
        # identical paths; the variance only carries the mean's last-ulp noise
        assert np.max(stats.variance) < 1e-30
        reference = solve_heat(problem.system, problem.initial, 0.25, 1e-3)
        np.testing.assert_allclose(stats.mean[-1], reference.final_state(), atol=1e-12)

    def test_additive_mean_matches_semigroup(self):
        # exponential scheme: the ensemble mean is exactly the semigroup image,
        # so the gap is pure Monte Carlo error
        problem = heat_noise_problem(n_int=5, dt=1e-3, t_end=0.2, seed=8)
        problem = problem.with_config(scheme="exponential_euler")
        stats = monte_carlo(problem, n_trajectories=400, threads=1)
        exact_mean = semigroup_apply(problem.system, 0.2, problem.initial)
        err = problem.system.e2_norm(stats.mean[-1] - exact_mean)
        decay_gap = problem.system.e2_norm(problem.initial - exact_mean)
        assert err < 0.05
        assert err < 0.1 * decay_gap

    def test_standard_error_shrinks_with_doubling(self):
        problem = heat_noise_problem(n_int=4, dt=2e-3, t_end=0.2, seed=3)
        trajs = run_trajectories(problem, range(128), threads=1)
        sups = np.array([t.sup_norm ** 4 for t in trajs])
        se_64 = sups[:64].std() / np.sqrt(64)
        se_128 = sups.std() / np.sqrt(128)
        assert 1.1 <= se_64 / se_128 <= 1.8

    def test_requires_two_trajectories(self):
        with pytest.raises(ConfigurationError):
            monte_carlo(heat_noise_problem(), n_trajectories=1)

    def test_threaded_run_is_bitwise_identical(self):
        problem = heat_noise_problem(t_end=0.05, seed=13)
        serial = run_trajectories(problem, range(6), threads=1)
        threaded = run_trajectories(problem, range(6), threads=3)
        for a, b in zip(serial, threaded):
            assert np.array_equal(a.states, b.states)


class TestStrongOrder:
    def test_deterministic_linear_drift_first_order(self):
        # explicit linear reaction, no noise: global order 1 in dt
        graph = build_graph(2, [(1, 2)])
        fields = build_edge_fields(1)
        system = assemble_form(build_mesh(graph, 5), fields, VertexMatrix(-np.eye(2)))
        drift = polynomial_drift(0, [0.0, 1.0], n_edges=1, lower_bound=0.5, upper_bound=2.0)
        u0 = interpolate(system.mesh, lambda x: 1.0 + np.sin(np.pi * x))
        cfg = SolverConfig(dt=1e-3, t_end=0.25)
        problem = Problem(system, cfg, u0, drift)
        ladder = 0.25 / np.array([4096.0, 128.0, 64.0, 32.0, 16.0])
        est = estimate_strong_order(problem, ladder, n_trajectories=1)
        assert est.estimate == pytest.approx(1.0, abs=0.1)

    def test_ladder_too_short(self):
        problem = heat_noise_problem()
        with pytest.raises(LadderTooShort):
            estimate_strong_order(problem, [1e-3, 2e-3, 4e-3], n_trajectories=2)

    def test_non_nested_ladder_rejected(self):
        problem = heat_noise_problem()
        with pytest.raises(ConfigurationError):
            estimate_strong_order(problem, [1e-3, 2.5e-3, 5e-3, 1e-2], n_trajectories=2)

    def test_additive_noise_quarter_order(self):
        # the delta_t^(1/4) regime needs the mesh mode cutoff well above 1/dt
        problem = heat_noise_problem(n_int=24, t_end=0.128, seed=17)
        ladder = 0.128 / np.array([4096.0, 128.0, 64.0, 32.0, 16.0])
        est = estimate_strong_order(problem, ladder, n_trajectories=32)
        assert 0.15 <= est.estimate <= 0.40
        assert est.r_squared > 0.9

    def test_exponential_euler_no_worse_than_semi_implicit(self):
        ladder = 0.125 / np.array([1024.0, 32.0, 16.0, 8.0])
        problem = heat_noise_problem(n_int=6, t_end=0.125, seed=21)
        semi = estimate_strong_order(problem, ladder, n_trajectories=16)
        exp_problem = problem.with_config(scheme="exponential_euler")
        expo = estimate_strong_order(exp_problem, ladder, n_trajectories=16)
        assert expo.estimate >= semi.estimate - 0.05


class TestVertexResidual:
    def test_constant_conserved_state_has_zero_residual(self):
        graph = build_graph(3, [(1, 2), (2, 3)])
        fields = build_edge_fields(2, weights=[2.0, 1.0])
        M = np.array([[-1.0, 1.0, 0.0], [1.0, -2.0, 1.0], [0.0, 1.0, -1.0]])
        system = assemble_form(build_mesh(graph, 4), fields, VertexMatrix(M))
        u = np.full(system.ndof, 2.0)
        traj = TrajectorySet(np.array([0.0]), u[None, :], "static", 2.0)
        assert np.all(vertex_residual(traj, system) == 0.0)

    def test_robin_eigenmode_residual_first_order(self):
        _, omegas = robin_eigenvalues(1)
        mode = robin_eigenfunction(omegas[0])
        graph = build_graph(2, [(1, 2)])
        residuals = []
        for n_int in (15, 31, 63):
            system = assemble_form(build_mesh(graph, n_int), build_edge_fields(1),
                                   VertexMatrix(-np.eye(2)))
            u = interpolate(system.mesh, mode)
            traj = solve_heat(system, u, horizon=0.01, dt=0.01)
            residuals.append(vertex_residual(traj, system)[0])
        rates = np.diff(np.log(residuals)) / np.log(0.5)
        assert np.all(rates > 0.9)

    def test_stochastic_residual_is_finite_but_not_small(self):
        problem = heat_noise_problem(t_end=0.05)
        traj = simulate_path(problem)
        series = vertex_residual(traj, problem.system)
        assert np.all(np.isfinite(series))


def test_energy_functional_value():
    # single edge, u == 0, beta = 1: energy is mu * int H(0) = mu * beta^4/4
    graph = build_graph(2, [(1, 2)])
    fields = build_edge_fields(1, weights=2.0)
    system = assemble_form(build_mesh(graph, 4), fields, VertexMatrix(-np.eye(2)))
    value = allen_cahn_energy(system, 1.0, np.zeros(system.ndof))
    assert value == pytest.approx(2.0 * 0.25)


def test_e2_norm_rows_matches_system_norm():
    problem = heat_noise_problem(n_int=3)
    rng = np.random.default_rng(2)
    rows = rng.standard_normal((4, problem.system.ndof))
    fn = e2_norm_rows(problem.system)
    np.testing.assert_allclose(fn(rows), [problem.system.e2_norm(r) for r in rows],
                               atol=1e-12)
