import numpy as np
import pytest

from netsde.assembly import assemble_form
from netsde.fields import build_edge_fields
from netsde.graph import VertexMatrix, build_graph
from netsde.mesh import build_mesh, interpolate
from netsde.semigroup import (
    check_contraction,
    check_positivity,
    generalized_eigs,
    propagator,
    semigroup_apply,
    solve_heat,
)

from _oracles import dense_expm_propagator, ols_slope, robin_eigenvalues


def robin_system(n_int):
    graph = build_graph(2, [(1, 2)])
    fields = build_edge_fields(1)
    return assemble_form(build_mesh(graph, n_int), fields, VertexMatrix(-np.eye(2)))


def conserved_system(n_int=6):
    graph = build_graph(3, [(1, 2), (2, 3)])
    fields = build_edge_fields(2, weights=[2.0, 1.0])
    M = np.array([[-1.0, 1.0, 0.0], [1.0, -2.0, 1.0], [0.0, 1.0, -1.0]])
    return assemble_form(build_mesh(graph, n_int), fields, VertexMatrix(M))


class TestGeneralizedEigs:
    def test_eigenvalues_real_descending_nonpositive(self):
        sys = robin_system(15)
        spec = generalized_eigs(sys)
        assert np.all(np.diff(spec.eigenvalues) <= 1e-12)
        assert spec.eigenvalues[0] <= 1e-10

    def test_g_orthonormal(self):
        sys = conserved_system()
        spec = generalized_eigs(sys)
        gram = spec.eigenvectors.T @ sys.mass.toarray() @ spec.eigenvectors
        assert np.max(np.abs(gram - np.eye(sys.ndof))) <= 1e-10

    def test_robin_spectrum_matches_bisection_oracle(self):
        oracle, _ = robin_eigenvalues(3)
        spec = generalized_eigs(robin_system(127), count=3)
        np.testing.assert_allclose(spec.eigenvalues, oracle, rtol=5e-4)

    def test_conserved_case_has_constant_kernel(self):
        sys = conserved_system()
        spec = generalized_eigs(sys, count=1)
        assert abs(spec.eigenvalues[0]) < 1e-10
        v = spec.eigenvectors[:, 0]
        assert np.max(np.abs(v - v[0])) < 1e-8

    def test_constant_potential_shifts_spectrum_exactly(self):
        graph = build_graph(2, [(1, 2)])
        mesh = build_mesh(graph, 9)
        M = VertexMatrix(-np.eye(2))
        rho = 0.7
        base = generalized_eigs(assemble_form(mesh, build_edge_fields(1), M))
        shifted = generalized_eigs(assemble_form(
            mesh, build_edge_fields(1, potential=rho), M))
        np.testing.assert_allclose(shifted.eigenvalues, base.eigenvalues - rho, atol=1e-11)

    def test_spectral_decay_trend(self):
        # Weyl-type growth: |lambda_k| increases superlinearly in k
        spec = generalized_eigs(robin_system(63))
        lam = -spec.eigenvalues
        ks = np.arange(5, 25)
        slope, _, _ = ols_slope(np.log(ks), np.log(lam[ks - 1]))
        assert 1.5 <= slope <= 2.5
        assert np.all(np.diff(lam) > 0)


class TestSemigroupApply:
    def test_identity_at_zero(self):
        sys = robin_system(7)
        u = np.sin(np.arange(sys.ndof, dtype=float))
        np.testing.assert_allclose(semigroup_apply(sys, 0.0, u), u, atol=1e-12)

    def test_constants_invariant_in_conserved_case(self):
        sys = conserved_system()
        ones = np.ones(sys.ndof)
        np.testing.assert_allclose(semigroup_apply(sys, 2.0, ones), ones, atol=1e-10)

    def test_eigenvector_decay(self):
        sys = robin_system(11)
        spec = generalized_eigs(sys)
        k = 2
        out = semigroup_apply(sys, 0.3, spec.eigenvectors[:, k], spec)
        expected = np.exp(spec.eigenvalues[k] * 0.3) * spec.eigenvectors[:, k]
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_semigroup_law(self):
        sys = conserved_system()
        rng = np.random.default_rng(8)
        u = rng.standard_normal(sys.ndof)
        both = semigroup_apply(sys, 0.7, u)
        chained = semigroup_apply(sys, 0.3, semigroup_apply(sys, 0.4, u))
        assert np.max(np.abs(both - chained)) <= 1e-10 * (1 + np.max(np.abs(both)))

    def test_matches_dense_expm_oracle(self):
        sys = robin_system(9)
        rng = np.random.default_rng(9)
        u = rng.standard_normal(sys.ndof)
        ours = semigroup_apply(sys, 0.25, u)
        oracle = dense_expm_propagator(sys, 0.25) @ u
        np.testing.assert_allclose(ours, oracle, atol=1e-10)

    def test_monotone_norm_decay(self):
        sys = robin_system(9)
        rng = np.random.default_rng(10)
        u = rng.standard_normal(sys.ndof)
        norms = [sys.e2_norm(semigroup_apply(sys, t, u)) for t in np.linspace(0, 2, 9)]
        assert np.all(np.diff(norms) <= 1e-12)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            semigroup_apply(robin_system(3), -0.1, np.zeros(5))


class TestContraction:
    def test_e2_passes_for_valid_matrix(self):
        report = check_contraction(conserved_system(), [0.1, 1.0], norm="E2")
        assert report.passed

    def test_einf_passes_under_strict_profile(self):
        report = check_contraction(robin_system(7), [0.01, 0.1, 1.0], norm="Einf")
        assert report.passed
        assert report.context["propagator"] == "lumped"

    def test_einf_lumped_matches_dense_oracle(self):
        sys = robin_system(7)
        t = 0.05
        ours = check_contraction(sys, [t], norm="Einf").check(f"einf_operator_norm_t_{t:g}")
        oracle = np.abs(dense_expm_propagator(sys, t, lumped=True)).sum(axis=1).max()
        assert ours.measured == pytest.approx(oracle, rel=1e-10)

    def test_einf_fails_for_large_negative_offdiagonal(self):
        # NSD but row 1 violates b_ii + sum |b_ik| <= 0
        graph = build_graph(2, [(1, 2)])
        sys = assemble_form(build_mesh(graph, 7), build_edge_fields(1),
                            VertexMatrix(np.array([[-1.0, -2.0], [-2.0, -5.0]])))
        e2 = check_contraction(sys, [0.02], norm="E2")
        assert e2.passed
        einf = check_contraction(sys, [0.02], norm="Einf")
        assert not einf.passed


class TestPositivity:
    def test_nonnegative_offdiagonal_passes(self):
        report = check_positivity(conserved_system(), [0.01, 0.1, 1.0])
        assert report.passed

    def test_time_zero_is_identity(self):
        sys = robin_system(5)
        np.testing.assert_allclose(propagator(sys, 0.0), np.eye(sys.ndof), atol=1e-14)

    def test_negative_offdiagonal_witness(self):
        graph = build_graph(2, [(1, 2)])
        sys = assemble_form(build_mesh(graph, 7), build_edge_fields(1),
                            VertexMatrix(np.array([[-2.0, -1.0], [-1.0, -2.0]])))
        report = check_positivity(sys, [0.01])
        assert not report.passed

    def test_positivity_propagates_initial_sign(self):
        sys = conserved_system()
        rng = np.random.default_rng(21)
        u0 = rng.uniform(0.0, 1.0, sys.ndof)
        for t in (0.05, 0.5):
            out = propagator(sys, t, lumped=True) @ u0
            assert out.min() >= -1e-8


class TestSolveHeat:
    def test_mass_conserved(self):
        sys = conserved_system()
        u0 = interpolate(sys.mesh, [lambda x: x, lambda x: 1.0 + np.sin(np.pi * x)])
        traj = solve_heat(sys, u0, horizon=1.0, dt=0.01)
        masses = np.array([sys.total_mass(s) for s in traj.states])
        assert np.max(np.abs(masses - masses[0])) <= 1e-10 * abs(masses[0])

    def test_e2_norm_nonincreasing(self):
        sys = robin_system(9)
        rng = np.random.default_rng(4)
        traj = solve_heat(sys, rng.standard_normal(sys.ndof), horizon=0.5, dt=0.005)
        norms = [sys.e2_norm(s) for s in traj.states]
        assert np.all(np.diff(norms) <= 1e-12)

    def test_backward_euler_first_order_against_spectral(self):
        sys = robin_system(15)
        u0 = interpolate(sys.mesh, lambda x: np.sin(np.pi * x) + 1.0)
        exact = solve_heat(sys, u0, horizon=0.5, dt=0.5, method="spectral").final_state()
        errors = []
        for dt in (0.05, 0.025, 0.0125):
            approx = solve_heat(sys, u0, horizon=0.5, dt=dt).final_state()
            errors.append(sys.e2_norm(approx - exact))
        rate, _, _ = ols_slope(np.log([0.05, 0.025, 0.0125]), np.log(errors))
        assert rate == pytest.approx(1.0, abs=0.15)

    def test_spectral_solver_matches_refined_backward_euler(self):
        sys = robin_system(7)
        u0 = interpolate(sys.mesh, lambda x: x * (1 - x))
        spectral = solve_heat(sys, u0, horizon=0.2, dt=0.2, method="spectral").final_state()
        euler = solve_heat(sys, u0, horizon=0.2, dt=1e-4).final_state()
        assert sys.e2_norm(spectral - euler) < 5e-4
