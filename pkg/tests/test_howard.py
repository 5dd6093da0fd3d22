import numpy as np
import pytest

import hjbfem as h
from hjbfem import assembly, fespace, howard
from hjbfem.howard import HowardError


def random_pair(mesh, k, seed=0):
    su = h.build_space(mesh, k, 1)
    sg = h.build_space(mesh, k, 2)
    rng = np.random.default_rng(seed)
    return (su, sg), assembly.PairField(
        fespace.DiscreteFunction(su, rng.standard_normal(su.ndof)),
        fespace.DiscreteFunction(sg, rng.standard_normal(sg.ndof)))


class TestOptimizeControl:
    def test_singleton_shortcut(self):
        p = h.make_poisson()
        mesh = h.unit_square_mesh(2)
        spaces, pair = random_pair(mesh, 1)
        q = h.optimize_control(p, mesh, spaces, pair)
        assert np.all(q.values == p.control_set.value)

    def test_beats_brute_force(self):
        # the chosen control's objective dominates a dense sample grid
        p = h.make_square_hjb()
        mesh = h.unit_square_mesh(3)
        spaces, pair = random_pair(mesh, 1, seed=4)
        quad = fespace.triangle_rule(6)
        q = h.optimize_control(p, mesh, spaces, pair, quad=quad)
        obj = howard._CellObjective(p, spaces[0], quad, pair)
        chosen = obj(q.values)
        grid = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
        best = np.full(mesh.num_cells, -np.inf)
        for a in grid:
            best = np.maximum(best, obj(float(a)))
        scale = np.maximum(np.abs(best), 1.0)
        assert np.all(best - chosen <= 1e-9 * scale)

    def test_deterministic(self):
        p = h.make_square_hjb()
        mesh = h.unit_square_mesh(2)
        spaces, pair = random_pair(mesh, 2, seed=9)
        q1 = h.optimize_control(p, mesh, spaces, pair)
        q2 = h.optimize_control(p, mesh, spaces, pair)
        assert np.array_equal(q1.values, q2.values)

    def test_keep_previous_freezes(self):
        # feeding the optimizer its own output back leaves it unchanged
        p = h.make_square_hjb()
        mesh = h.unit_square_mesh(2)
        spaces, pair = random_pair(mesh, 1, seed=2)
        q = h.optimize_control(p, mesh, spaces, pair)
        q2 = h.optimize_control(p, mesh, spaces, pair, q_prev=q)
        assert np.array_equal(q.values, q2.values)

    def test_control_objective_scalar(self):
        p = h.make_square_hjb()
        mesh = h.unit_square_mesh(2)
        spaces, pair = random_pair(mesh, 1, seed=3)
        quad = fespace.triangle_rule(6)
        obj = howard._CellObjective(p, spaces[0], quad, pair)
        val = h.control_objective(p, mesh, spaces, 3, 0.8, pair, quad=quad)
        assert abs(val - obj(0.8)[3]) < 1e-13

    def test_objective_scalar_vs_vector_alpha(self):
        p = h.make_square_hjb()
        mesh = h.unit_square_mesh(2)
        spaces, pair = random_pair(mesh, 1, seed=5)
        quad = fespace.triangle_rule(6)
        obj = howard._CellObjective(p, spaces[0], quad, pair)
        alphas = np.full(mesh.num_cells, 1.3)
        assert np.allclose(obj(1.3), obj(alphas), atol=1e-13)


class TestHowardSolve:
    def test_poisson_fixed_point_in_two_iterations(self):
        p = h.make_poisson()
        mesh = h.unit_square_mesh(8)
        pair, q, hist = h.howard_solve(p, mesh, 1, use_direct=True)
        assert hist.converged
        assert len(hist) == 2
        assert hist.residuals[1] <= 1e-9

    def test_square_converges_p2(self):
        p = h.make_square_hjb()
        mesh = h.unit_square_mesh(8)
        pair, q, hist = h.howard_solve(p, mesh, 2, use_direct=True)
        assert len(hist) <= 8
        res = hist.residuals
        assert res[-1] < 1e-1 * res[0]
        # the discrete solution is close to the exact one
        err = fespace.norms(pair.u, exact=p.exact, exact_grad=p.grad_exact)
        assert err["H1"] < 1.0

    def test_controls_track_analytic_maximizer(self):
        # continuous-level argmax: 2 alpha = pi (x1 + x2) mod 2 pi
        p = h.make_square_hjb()
        mesh = h.unit_square_mesh(8)
        pair, q, hist = h.howard_solve(p, mesh, 2, use_direct=True)
        cent = mesh.vertices[mesh.cells].mean(axis=1)
        astar = 0.5 * np.pi * (cent[:, 0] + cent[:, 1])
        d = np.abs((q.values - astar + np.pi / 2) % np.pi - np.pi / 2)
        assert np.median(d) < 0.1

    def test_argument_validation(self):
        p = h.make_poisson()
        mesh = h.unit_square_mesh(2)
        with pytest.raises(HowardError):
            h.howard_solve(p, mesh, 1, tol=0.0)
        with pytest.raises(HowardError):
            h.howard_solve(p, mesh, 1, maxiter=0)

    def test_history_dict(self):
        p = h.make_poisson()
        mesh = h.unit_square_mesh(4)
        _, _, hist = h.howard_solve(p, mesh, 1, use_direct=True)
        d = hist.as_dict()
        assert set(d) == {"residuals", "control_change", "inner_iterations",
                          "converged"}
        assert len(d["residuals"]) == len(hist)

    def test_deterministic_end_to_end(self):
        p = h.make_square_hjb()
        mesh = h.unit_square_mesh(4)
        out1 = h.howard_solve(p, mesh, 1, use_direct=True)
        out2 = h.howard_solve(p, mesh, 1, use_direct=True)
        assert np.array_equal(out1[0].u.coeffs, out2[0].u.coeffs)
        assert np.array_equal(out1[1].values, out2[1].values)
        assert out1[2].residuals == out2[2].residuals

    def test_init_pair_used(self):
        p = h.make_square_hjb()
        mesh = h.unit_square_mesh(4)
        su = h.build_space(mesh, 1, 1)
        sg = h.build_space(mesh, 1, 2)
        init = assembly.PairField(
            fespace.interpolate(su, p.exact),
            fespace.interpolate(sg, p.grad_exact))
        _, _, hist = h.howard_solve(p, mesh, 1, init=init, maxiter=2,
                                    use_direct=True)
        _, _, hist0 = h.howard_solve(p, mesh, 1, maxiter=2, use_direct=True)
        # starting near the solution shrinks the first correction
        assert hist.residuals[0] < 0.8 * hist0.residuals[0]
