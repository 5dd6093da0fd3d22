import numpy as np
import pytest

import hjbfem as h
from hjbfem import assembly, fespace


def random_pair(mesh, k, seed=0):
    su = h.build_space(mesh, k, 1)
    sg = h.build_space(mesh, k, 2)
    rng = np.random.default_rng(seed)
    return (su, sg), assembly.PairField(
        fespace.DiscreteFunction(su, rng.standard_normal(su.ndof)),
        fespace.DiscreteFunction(sg, rng.standard_normal(sg.ndof)))


class TestIndicators:
    @pytest.mark.parametrize("name,maker", [
        ("square", h.make_square_hjb), ("disk", h.make_disk_hjb)])
    def test_sum_equals_functional(self, name, maker):
        p = maker()
        mesh = (h.unit_square_mesh(4) if name == "square"
                else h.unit_disk_mesh(12))
        spaces, pair = random_pair(mesh, 2, seed=1)
        q = h.ControlField.constant(0.7, mesh.num_cells)
        ind = h.compute_indicators(p, mesh, spaces, pair, q)
        E = h.residual_functional(p, mesh, spaces, pair, q)
        assert abs(ind.total - E) <= 1e-10 * E
        assert abs(ind.global_eta - np.sqrt(E)) <= 1e-10 * np.sqrt(E)

    def test_nonnegative(self):
        p = h.make_square_hjb()
        mesh = h.unit_square_mesh(3)
        spaces, pair = random_pair(mesh, 1, seed=2)
        q = h.ControlField.constant(0.0, mesh.num_cells)
        ind = h.compute_indicators(p, mesh, spaces, pair, q)
        assert np.all(ind.per_cell >= 0)
        assert len(ind.per_cell) == mesh.num_cells

    def test_zero_for_exact_linear_solution(self):
        # quadratic exact solution in P2 spaces: functional is zero
        def A(x, alpha):
            return np.broadcast_to(np.eye(2),
                                   (len(np.atleast_2d(x)), 2, 2)).copy()
        exact = lambda x: (np.atleast_2d(x)[:, 0] ** 2
                           + np.atleast_2d(x)[:, 1] ** 2)
        grad = lambda x: 2 * np.atleast_2d(x)
        f = lambda x, alpha: np.full(len(np.atleast_2d(x)), 4.0)
        p = h.make_linear_nondiv(A, None, None, f, r=exact, grad_r=grad,
                                 lam=0.0)
        mesh = h.unit_square_mesh(2)
        su = h.build_space(mesh, 2, 1)
        sg = h.build_space(mesh, 2, 2)
        pair = assembly.PairField(fespace.interpolate(su, exact),
                                  fespace.interpolate(sg, grad))
        q = h.ControlField.constant(0.0, mesh.num_cells)
        ind = h.compute_indicators(p, mesh, (su, sg), pair, q)
        assert ind.global_eta < 1e-12

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            h.Indicators([1.0, -0.5])


class TestMarking:
    def test_fraction_oracle(self):
        per_cell = np.array([0.1, 5.0, 0.2, 4.0, 3.0, 0.3, 2.0, 0.4,
                             1.0, 0.5])
        ind = h.Indicators(per_cell)
        marked = h.mark_fraction(ind, 0.3)
        assert sorted(marked.indices.tolist()) == [1, 3, 4]

    def test_ceil_count(self):
        ind = h.Indicators(np.arange(1.0, 8.0))
        marked = h.mark_fraction(ind, 0.3)  # ceil(0.3 * 7) = 3
        assert len(marked.indices) == 3

    def test_tie_break_smallest_index(self):
        ind = h.Indicators(np.ones(6))
        marked = h.mark_fraction(ind, 0.5)
        assert sorted(marked.indices.tolist()) == [0, 1, 2]

    def test_beta_validation(self):
        ind = h.Indicators(np.ones(4))
        for beta in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                h.mark_fraction(ind, beta)


class TestAdaptiveLoop:
    def test_poisson_eta_decreases(self):
        p = h.make_poisson()
        levels = h.adaptive_solve(p, h.unit_square_mesh(4), 1, beta=0.3,
                                  maxiter_a=3, use_direct=True)
        assert len(levels) == 4
        etas = [lv.eta for lv in levels]
        assert all(b < a for a, b in zip(etas, etas[1:]))
        ndofs = [lv.ndof for lv in levels]
        assert all(b > a for a, b in zip(ndofs, ndofs[1:]))
        assert [lv.level for lv in levels] == [0, 1, 2, 3]

    def test_disk_refines_near_origin(self):
        # the exact solution's r^{5/3} singularity sits at the origin, so
        # adaptive refinement concentrates cells there
        p = h.make_disk_hjb()
        levels = h.adaptive_solve(p, h.unit_disk_mesh(16), 2, beta=0.3,
                                  maxiter_a=2, use_direct=True)
        first = levels[0].mesh
        last = levels[-1].mesh

        def min_area_near_origin(mesh):
            cent = mesh.vertices[mesh.cells].mean(axis=1)
            near = np.hypot(cent[:, 0], cent[:, 1]) < 0.25
            return mesh.cell_areas()[near].min()

        assert min_area_near_origin(last) < 0.5 * min_area_near_origin(first)
        assert levels[-1].eta < levels[0].eta

    def test_stops_at_tolerance(self):
        # an exactly representable solution: eta is ~0 on the first level
        def A(x, alpha):
            return np.broadcast_to(np.eye(2),
                                   (len(np.atleast_2d(x)), 2, 2)).copy()
        exact = lambda x: np.atleast_2d(x)[:, 0]
        grad = lambda x: np.column_stack(
            [np.ones(len(np.atleast_2d(x))),
             np.zeros(len(np.atleast_2d(x)))])
        f = lambda x, alpha: np.zeros(len(np.atleast_2d(x)))
        p = h.make_linear_nondiv(A, None, None, f, r=exact, grad_r=grad,
                                 lam=0.0)
        levels = h.adaptive_solve(p, h.unit_square_mesh(2), 1, beta=0.3,
                                  tol_a=1e-7, maxiter_a=5, use_direct=True)
        assert len(levels) == 1
        assert levels[0].eta <= 1e-7
