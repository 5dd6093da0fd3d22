import numpy as np
import pytest
import scipy.sparse as sparse

import hjbfem as h
from hjbfem.linsolve import SolveError, IndefiniteError


class FakeSystem:
    def __init__(self, matrix, rhs):
        self.matrix = sparse.csr_matrix(matrix)
        self.rhs = np.asarray(rhs, dtype=float)


def random_spd(n, seed, cond=1e3):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    d = np.logspace(0, np.log10(cond), n)
    return Q @ np.diag(d) @ Q.T


class TestPcg:
    def test_matches_direct(self):
        n = 60
        A = random_spd(n, 1)
        b = np.sin(np.arange(n, dtype=float))
        sys_ = FakeSystem(A, b)
        x, rep = h.solve_spd(sys_, tol=1e-12)
        xd, _ = h.solve_direct(sys_)
        assert np.linalg.norm(x - xd) < 1e-8 * np.linalg.norm(xd)
        assert rep.relative_residual < 1e-10
        assert rep.method == "pcg"

    def test_zero_rhs(self):
        sys_ = FakeSystem(np.eye(4), np.zeros(4))
        x, rep = h.solve_spd(sys_)
        assert np.all(x == 0.0)
        assert rep.iterations == 0

    def test_identity_one_iteration(self):
        sys_ = FakeSystem(np.eye(5), np.arange(1.0, 6.0))
        x, rep = h.solve_spd(sys_)
        assert np.allclose(x, sys_.rhs)
        assert rep.iterations == 1

    def test_deterministic(self):
        A = random_spd(40, 7)
        b = np.cos(np.arange(40, dtype=float))
        x1, _ = h.solve_spd(FakeSystem(A, b), tol=1e-12)
        x2, _ = h.solve_spd(FakeSystem(A, b), tol=1e-12)
        assert np.array_equal(x1, x2)

    def test_indefinite_detected(self):
        A = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(IndefiniteError):
            h.solve_spd(FakeSystem(A, np.array([0.0, 0.0, 1.0])))

    def test_nonpositive_diagonal_detected(self):
        A = np.array([[0.0, 1.0], [1.0, 1.0]])
        with pytest.raises(IndefiniteError):
            h.solve_spd(FakeSystem(A, np.ones(2)))

    def test_maxiter_exhausted(self):
        A = random_spd(50, 3, cond=1e8)
        with pytest.raises(SolveError):
            h.solve_spd(FakeSystem(A, np.ones(50)), tol=1e-14, maxiter=3)

    def test_report_dict(self):
        sys_ = FakeSystem(np.eye(3), np.ones(3))
        _, rep = h.solve_spd(sys_)
        d = rep.as_dict()
        assert set(d) == {"iterations", "relative_residual", "wall_time",
                          "method"}


class TestDirect:
    def test_exact_on_small_system(self):
        A = np.array([[4.0, 1.0], [1.0, 3.0]])
        b = np.array([1.0, 2.0])
        x, rep = h.solve_direct(FakeSystem(A, b))
        assert np.allclose(A @ x, b, atol=1e-14)
        assert rep.method == "direct"


class TestOnAssembledSystem:
    def test_pcg_agrees_with_direct(self):
        p = h.make_poisson()
        mesh = h.unit_square_mesh(4)
        su = h.build_space(mesh, 1, 1)
        sg = h.build_space(mesh, 1, 2)
        q = h.ControlField.constant(0.0, mesh.num_cells)
        system = h.assemble(p, mesh, (su, sg), q)
        x_it, rep = h.solve_spd(system, tol=1e-12)
        x_d, _ = h.solve_direct(system)
        assert np.linalg.norm(x_it - x_d) <= 1e-8 * np.linalg.norm(x_d)
        assert rep.iterations < 20 * system.matrix.shape[0]
