"""Howard's algorithm (policy iteration): alternate per-cell control
maximization with least-squares Galerkin solves until the discrete pair
stops moving in the H1 pair norm.

The per-cell control problem maximizes the integral over the cell of
M_theta^alpha(u, g) - f^alpha.  For angle control sets the maximizer is
located on a coarse uniform grid on [0, 2 pi) and then sharpened by
golden-section search; ties are broken towards the smallest angle.
"""

import numpy as np

from . import assembly, fespace, linsolve

CONTROL_GRID = 64
GOLDEN_TOL = 1e-10
TIE_REL = 1e-12
KEEP_REL = 1e-9
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


class HowardError(Exception):
    pass


class ControlField:
    """Piecewise-constant control map: one control value per cell."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)

    @classmethod
    def constant(cls, value, num_cells):
        return cls(np.full(num_cells, float(value)))


class HowardHistory:
    """Per-iteration residuals, control movement and solver reports."""

    def __init__(self):
        self.residuals = []
        self.control_change = []
        self.solve_reports = []
        self.converged = False

    def __len__(self):
        return len(self.residuals)

    def as_dict(self):
        return {"residuals": [float(r) for r in self.residuals],
                "control_change": [float(c) for c in self.control_change],
                "inner_iterations": [r.iterations for r in self.solve_reports],
                "converged": self.converged}


class _CellObjective:
    """Vectorized per-cell control objective with frozen pair data.

    The pair-dependent quantities (u, grad u, g, Dg at quadrature points)
    are evaluated once; each call evaluates only the coefficients at a new
    per-cell control vector.
    """

    def __init__(self, p, space_u, quad, pair):
        self.p = p
        self.quad = quad
        uvals, ugrads, X, w = fespace._cell_eval(pair.u, quad)
        gvals, ggrads, _, _ = fespace._cell_eval(pair.g, quad)
        self.uvals = uvals
        self.ugrads = ugrads
        self.gvals = gvals
        self.ggrads = ggrads
        self.X = X
        self.w = w

    def __call__(self, alphas):
        """alphas: scalar or (nc,) array.  Returns (nc,) objectives."""
        p = self.p
        nc, nq, _ = self.X.shape
        if np.isscalar(alphas):
            af = float(alphas)
            Xf = self.X.reshape(-1, 2)
            A = np.asarray(p.A(Xf, af)).reshape(nc, nq, 2, 2)
            b = np.asarray(p.b(Xf, af)).reshape(nc, nq, 2)
            c = np.asarray(p.c(Xf, af)).reshape(nc, nq)
            f = np.asarray(p.f(Xf, af)).reshape(nc, nq)
        else:
            A, b, c, f = assembly._coefficients(p, self.X, alphas)
        th = p.theta
        M = (np.einsum("cqml,cqml->cq", A, self.ggrads)
             + np.einsum("cqj,cqj->cq",
                         b, th * self.gvals + (1 - th) * self.ugrads)
             - c * self.uvals)
        return ((M - f) * self.w).sum(axis=1)


def control_objective(p, mesh, spaces, cell, alpha, pair, quad=None):
    """Objective value for a single cell and control."""
    space_u, _ = spaces
    if quad is None:
        quad = fespace.triangle_rule(2 * space_u.k + 4)
    obj = _CellObjective(p, space_u, quad, pair)
    return float(obj(float(alpha))[cell])


def optimize_control(p, mesh, spaces, pair, quad=None, q_prev=None):
    """Per-cell maximizer of the control objective.

    Coarse 64-point grid on [0, 2 pi), smallest angle among near-ties,
    then golden-section refinement of the bracketing interval down to
    width 1e-10.  If a previous control field is supplied, a cell keeps
    its old control unless the new maximizer improves the objective by
    more than 1e-9 of the per-cell scale; this anti-cycling rule lets
    the control map settle exactly once the pair stops moving.
    """
    space_u, _ = spaces
    if quad is None:
        quad = fespace.triangle_rule(2 * space_u.k + 4)
    nc = mesh.num_cells
    if p.control_set.kind == "singleton":
        return ControlField.constant(p.control_set.value, nc)

    obj = _CellObjective(p, space_u, quad, pair)
    grid = 2 * np.pi * np.arange(CONTROL_GRID) / CONTROL_GRID
    vals = np.empty((CONTROL_GRID, nc))
    for i, a in enumerate(grid):
        vals[i] = obj(float(a))

    vmax = vals.max(axis=0)
    vmin = vals.min(axis=0)
    scale = np.maximum(vmax - vmin, np.maximum(np.abs(vmax), 1.0))
    # smallest grid angle among near-ties, for determinism
    near = vals >= vmax[None, :] - TIE_REL * scale[None, :]
    best = near.argmax(axis=0)

    h = 2 * np.pi / CONTROL_GRID
    a = grid[best] - h
    b = grid[best] + h
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = obj(np.mod(c, 2 * np.pi))
    fd = obj(np.mod(d, 2 * np.pi))
    while np.max(b - a) > GOLDEN_TOL:
        take_c = fc >= fd   # keep the left interval on ties (smaller alpha)
        b = np.where(take_c, d, b)
        a = np.where(take_c, a, c)
        c_new = b - _INVPHI * (b - a)
        d_new = a + _INVPHI * (b - a)
        # only one of the two interior points is new per cell
        fc_old, fd_old = fc, fd
        fc = np.where(take_c, obj(np.mod(c_new, 2 * np.pi)), fd_old)
        fd = np.where(take_c, fc_old, obj(np.mod(d_new, 2 * np.pi)))
        c, d = c_new, d_new
    alpha = np.mod(0.5 * (a + b), 2 * np.pi)
    # keep the grid point if refinement did not improve on it
    f_ref = obj(alpha)
    f_grid = vals[best, np.arange(nc)]
    keep_grid = f_ref < f_grid
    alpha = np.where(keep_grid, grid[best], alpha)
    if q_prev is not None:
        f_new = np.where(keep_grid, f_grid, f_ref)
        f_old = obj(q_prev.values)
        keep_old = f_new - f_old <= KEEP_REL * scale
        alpha = np.where(keep_old, q_prev.values, alpha)
    return ControlField(alpha)


def howard_solve(p, mesh, k, tol=1e-7, maxiter=8, init=None,
                 solver_tol=1e-11, solver_maxiter=None, spaces=None,
                 use_direct=False):
    """Policy iteration for the discrete HJB problem.

    Parameters
    ----------
    p : HjbProblem
    mesh : TriMesh
    k : polynomial degree (1 or 2)
    init : PairField or None
        Initial pair; defaults to (0, 0).

    Returns
    -------
    (PairField, ControlField, HowardHistory)
        The control field is re-maximized against the returned pair, so
        it is the per-cell argmax for the final iterate even when the
        iteration stops at the cap.
    """
    if tol <= 0:
        raise HowardError("tol must be positive")
    if maxiter < 1:
        raise HowardError("maxiter must be >= 1")
    if spaces is None:
        space_u = fespace.build_space(mesh, k, 1)
        space_g = fespace.build_space(mesh, k, 2)
        spaces = (space_u, space_g)
    else:
        space_u, space_g = spaces
    quad = fespace.triangle_rule(2 * k + 4)

    pair = init if init is not None else assembly.PairField.zero(space_u,
                                                                 space_g)
    history = HowardHistory()
    q_prev = None
    for n in range(1, maxiter + 1):
        q = optimize_control(p, mesh, spaces, pair, quad=quad, q_prev=q_prev)
        system = assembly.assemble(p, mesh, spaces, q, quad=quad)
        try:
            if use_direct:
                x, report = linsolve.solve_direct(system)
            else:
                x, report = linsolve.solve_spd(system, tol=solver_tol,
                                               maxiter=solver_maxiter)
        except linsolve.SolveError as exc:
            raise HowardError("inner solve failed at iteration %d: %s"
                              % (n, exc)) from exc
        new_pair = assembly.PairField.from_combined(space_u, space_g, x)

        diff_u = fespace.DiscreteFunction(
            space_u, new_pair.u.coeffs - pair.u.coeffs)
        diff_g = fespace.DiscreteFunction(
            space_g, new_pair.g.coeffs - pair.g.coeffs)
        res = fespace.pair_norm(fespace.norms(diff_u, quad=quad),
                                fespace.norms(diff_g, quad=quad))

        if q_prev is None:
            moved = 1.0
        else:
            dist = p.control_set.metric(q.values, q_prev.values)
            moved = float(np.mean(dist > 1e-10))
        history.residuals.append(res)
        history.control_change.append(moved)
        history.solve_reports.append(report)

        pair = new_pair
        q_prev = q
        if res <= tol:
            history.converged = True
            break
    # re-maximize against the final pair so the returned control is the
    # per-cell argmax for the returned iterate; the keep-previous rule
    # leaves converged runs untouched
    q = optimize_control(p, mesh, spaces, pair, quad=quad, q_prev=q_prev)
    return pair, q, history
