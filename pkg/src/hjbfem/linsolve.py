"""Reproducible solvers for the assembled SPD systems.

The default path is Jacobi-preconditioned conjugate gradients written
directly on the CSR matrix, so iterates are bit-reproducible for a fixed
matrix and right-hand side.  A sparse direct factorization is available
as an oracle for small systems.
"""

import time

import numpy as np
import scipy.sparse.linalg as spla


class SolveError(Exception):
    pass


class IndefiniteError(SolveError):
    """Negative curvature encountered: the system is not SPD, which for
    certified-Cordes problems signals an assembly bug."""


class SolveReport:
    def __init__(self, iterations, relative_residual, wall_time, method="pcg"):
        self.iterations = iterations
        self.relative_residual = relative_residual
        self.wall_time = wall_time
        self.method = method

    def as_dict(self):
        return {"iterations": self.iterations,
                "relative_residual": self.relative_residual,
                "wall_time": self.wall_time,
                "method": self.method}


def solve_spd(system, tol=1e-11, maxiter=None):
    """Solve system.matrix x = system.rhs by Jacobi-preconditioned CG.

    Stops when ||A x - b|| / ||b|| <= tol.  Raises IndefiniteError on a
    negative-curvature direction and SolveError on non-convergence.
    """
    A = system.matrix
    b = system.rhs
    n = A.shape[0]
    if maxiter is None:
        maxiter = 20 * n
    t0 = time.perf_counter()

    bnorm = np.sqrt(b @ b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, time.perf_counter() - t0)

    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise IndefiniteError("nonpositive diagonal entry")
    dinv = 1.0 / diag

    x = np.zeros(n)
    r = b.copy()
    z = dinv * r
    p = z.copy()
    rz = r @ z
    it = 0
    while it < maxiter:
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0.0:
            raise IndefiniteError("negative curvature direction at "
                                  "iteration %d" % it)
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        it += 1
        if np.sqrt(r @ r) <= tol * bnorm:
            break
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    else:
        raise SolveError("PCG did not converge in %d iterations "
                         "(relative residual %.3e)"
                         % (maxiter, float(np.sqrt(r @ r) / bnorm)))

    # recompute the true residual; CG recursion can drift
    true_rel = float(np.linalg.norm(A @ x - b) / bnorm)
    return x, SolveReport(it, true_rel, time.perf_counter() - t0)


def solve_direct(system):
    """Sparse LU oracle; use for small systems and cross-checks."""
    t0 = time.perf_counter()
    x = spla.spsolve(system.matrix.tocsc(), system.rhs)
    bnorm = np.linalg.norm(system.rhs)
    rel = 0.0 if bnorm == 0 else \
        float(np.linalg.norm(system.matrix @ x - system.rhs) / bnorm)
    return x, SolveReport(1, rel, time.perf_counter() - t0, method="direct")
