import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dcpl.analytic import get_map
from dcpl.errors import InfeasibleScaleField, LineSearchFailure, MaxIterations, NotAcute
from dcpl.geometry import angle_sum_at
from dcpl.lattice import Disc, LatticeSpec, build_lattice_patch
from dcpl.solver import (
    SolverOptions,
    feasibility,
    gradient,
    gradient_jacobian,
    harmonic_extension,
    hessian,
    solve_dirichlet,
)

from .oracles import finite_difference_jacobian, law_of_cosines_angle

DEG = math.pi / 180


def small_random_field(sub, rng, scale=0.1):
    return rng.uniform(-scale, scale, sub.n_vertices)


class TestGradient:
    def test_flat_lattice(self, skew_patch):
        np.testing.assert_allclose(gradient(skew_patch, np.zeros(skew_patch.n_vertices)), 0, atol=1e-12)

    @given(st.floats(-3, 3))
    def test_constant_field(self, c):
        sub = build_lattice_patch(LatticeSpec.from_angles(80 * DEG, 60 * DEG, 0.25), Disc(0, 0.8))
        np.testing.assert_allclose(gradient(sub, np.full(sub.n_vertices, c)), 0, atol=1e-12)

    def test_star_bump(self, star_patch):
        u = np.zeros(star_patch.n_vertices)
        u[star_patch.origin] = 0.1
        g = gradient(star_patch, u)
        oracle = 2 * math.pi - 6 * law_of_cosines_angle(1.0, math.exp(0.05), math.exp(0.05))
        assert g[0] == pytest.approx(oracle, abs=1e-13)
        assert g[0] == pytest.approx(0.33523276983177, abs=1e-12)

    def test_matches_per_vertex_angle_sums(self, equilateral_patch, rng):
        u = small_random_field(equilateral_patch, rng)
        g = gradient(equilateral_patch, u)
        direct = [2 * math.pi - angle_sum_at(equilateral_patch, u, v) for v in equilateral_patch.interior[::7]]
        np.testing.assert_allclose(g[::7], direct, atol=1e-12)

    def test_infeasible(self, star_patch):
        u = np.zeros(star_patch.n_vertices)
        u[0] = 50
        with pytest.raises(InfeasibleScaleField):
            gradient(star_patch, u)


class TestHessian:
    @pytest.mark.parametrize("fixture", ["equilateral_patch", "skew_patch"])
    def test_finite_differences(self, fixture, request, rng):
        sub = request.getfixturevalue(fixture)
        u = small_random_field(sub, rng)
        H = hessian(sub, u).toarray()
        cols = rng.choice(len(sub.interior), 25, replace=False)

        def g_of_interior(vals):
            return gradient(sub, vals)

        fd = finite_difference_jacobian(g_of_interior, u, sub.interior[cols])
        np.testing.assert_allclose(H[:, cols], fd, atol=1e-6)

    def test_symmetric_and_psd(self, skew_patch, rng):
        H = hessian(skew_patch, small_random_field(skew_patch, rng)).toarray()
        assert np.max(np.abs(H - H.T)) <= 1e-10
        assert np.linalg.eigvalsh(H).min() >= -1e-10

    def test_star_center_entry(self, star_patch):
        H = hessian(star_patch, np.zeros(star_patch.n_vertices)).toarray()
        # six edges at the center, each with cotangent weight 2 * cot(60 deg) / 2
        assert H[0, 0] == pytest.approx(6 / math.sqrt(3), rel=1e-13)

    def test_rows_vanish_with_boundary_columns(self, equilateral_patch, rng):
        u = small_random_field(equilateral_patch, rng)
        J = gradient_jacobian(equilateral_patch, u)
        np.testing.assert_allclose(np.asarray(J.sum(axis=1)).ravel(), 0, atol=1e-12)
        cols = equilateral_patch.boundary[:10]
        fd = finite_difference_jacobian(lambda vals: gradient(equilateral_patch, vals), u, cols)
        np.testing.assert_allclose(J[:, cols].toarray(), fd, atol=1e-6)


class TestFeasibility:
    def test_flat(self, equilateral_patch):
        assert feasibility(equilateral_patch, np.zeros(equilateral_patch.n_vertices))

    def test_spike(self, equilateral_patch):
        u = np.zeros(equilateral_patch.n_vertices)
        u[5] = 50
        assert not feasibility(equilateral_patch, u)

    def test_small_oscillation(self, equilateral_patch, rng):
        assert feasibility(equilateral_patch, small_random_field(equilateral_patch, rng, 5e-4))

    def test_wrong_shape_or_nan(self, equilateral_patch):
        assert not feasibility(equilateral_patch, np.zeros(3))
        assert not feasibility(equilateral_patch, np.full(equilateral_patch.n_vertices, np.nan))


class TestSolve:
    def test_constant_boundary(self, skew_patch):
        res = solve_dirichlet(skew_patch, 0.7)
        assert res.converged
        assert res.iterations <= 1
        np.testing.assert_allclose(res.u, 0.7, atol=1e-12)

    def test_affine_map(self, equilateral_patch):
        f = get_map("affine", c=1 + 2j, d=3)
        ub = f.log_abs_fprime(equilateral_patch.positions[equilateral_patch.boundary])
        res = solve_dirichlet(equilateral_patch, ub)
        np.testing.assert_allclose(res.u, 0.5 * math.log(5), atol=1e-10)

    def test_exp_close_to_real_part(self):
        sub = build_lattice_patch(LatticeSpec.equilateral(0.05), Disc(0, 0.8))
        res = solve_dirichlet(sub, sub.positions.real)
        assert res.converged
        assert np.max(np.abs(res.u - sub.positions.real)) <= 1e-12

    @pytest.mark.parametrize("angles", [(60, 60, 60), (80, 60, 40), (70, 50, 60)])
    def test_linear_field_has_exact_angle_sums(self, angles):
        # every up (and every down) triangle is rescaled to the same shape, so u = Re z
        # (the scale field of exp) solves the discrete problem to rounding error
        sub = build_lattice_patch(LatticeSpec(*(a * DEG for a in angles), 0.1), Disc(0, 0.8))
        assert np.max(np.abs(gradient(sub, sub.positions.real))) <= 1e-13
        assert np.max(np.abs(gradient(sub, 0.3 * sub.positions.real - 0.7 * sub.positions.imag))) <= 1e-13

    def test_converged_result_properties(self, skew_patch):
        f = get_map("cubic_perturbation", mu=0.1)
        res = solve_dirichlet(skew_patch, f.log_abs_fprime(skew_patch.positions), SolverOptions(gradient_tolerance=1e-11))
        assert res.converged and res.final_gradient_norm <= 1e-11
        assert np.max(np.abs(gradient(skew_patch, res.u))) <= 1e-11
        np.testing.assert_array_equal(res.u[skew_patch.boundary], f.log_abs_fprime(skew_patch.positions[skew_patch.boundary]))
        assert feasibility(skew_patch, res.u)
        # max-norm of the gradient decreases at every accepted step
        assert all(b < a for a, b in zip(res.history, res.history[1:]))

    @given(st.floats(-2, 2))
    def test_shift_invariance(self, c):
        sub = build_lattice_patch(LatticeSpec.equilateral(0.2), Disc(0, 0.8))
        ub = np.sin(3 * sub.positions.real[sub.boundary]) * 0.2
        a = solve_dirichlet(sub, ub)
        b = solve_dirichlet(sub, ub + c)
        np.testing.assert_allclose(b.u, a.u + c, atol=1e-10)

    def test_unique_from_different_starts(self, skew_patch):
        f = get_map("moebius", a=1, b=0, c=0.3, d=1)
        ub = f.log_abs_fprime(skew_patch.positions)
        a = solve_dirichlet(skew_patch, ub)
        guess = harmonic_extension(skew_patch, ub[skew_patch.boundary]) + 0.02 * np.cos(7 * skew_patch.positions.imag)
        b = solve_dirichlet(skew_patch, ub, SolverOptions(initial_guess=guess))
        np.testing.assert_allclose(a.u, b.u, atol=1e-9)

    def test_obtuse_rejected(self):
        sub = build_lattice_patch(LatticeSpec.from_angles(100 * DEG, 40 * DEG, 0.1), Disc(0, 0.8))
        with pytest.raises(NotAcute, match="alpha = 100"):
            solve_dirichlet(sub, 0.0)

    def test_max_iterations(self, skew_patch):
        f = get_map("cubic_perturbation", mu=0.1)
        with pytest.raises(MaxIterations) as info:
            solve_dirichlet(skew_patch, f.log_abs_fprime(skew_patch.positions), SolverOptions(max_iterations=1, gradient_tolerance=1e-14))
        assert info.value.result is not None and not info.value.result.converged

    def test_line_search_failure(self, skew_patch):
        f = get_map("cubic_perturbation", mu=0.1)
        opts = SolverOptions(gradient_tolerance=1e-300, max_line_search_steps=3, max_iterations=500)
        with pytest.raises((LineSearchFailure, MaxIterations)) as info:
            solve_dirichlet(skew_patch, f.log_abs_fprime(skew_patch.positions), opts)
        assert info.value.result.final_gradient_norm < 1e-10

    def test_boundary_length_checked(self, skew_patch):
        with pytest.raises(ValueError):
            solve_dirichlet(skew_patch, np.zeros(3))

    def test_options_validated(self):
        with pytest.raises(ValueError):
            SolverOptions(gradient_tolerance=0)
        with pytest.raises(ValueError):
            SolverOptions(line_search_shrink=1.0)
