"""Residual a posteriori error indicators, fixed-fraction marking and the
adaptive refinement loop.

The per-cell indicator is the cell restriction of the least-squares
functional:

    eta(K)^2 = ||grad u - g||_K^2 + ||rot g||_K^2 + ||M(u,g) - f||_K^2
               + boundary terms on (cell boundary) intersect (domain
               boundary),

so the global eta^2 coincides with the value of the functional.
"""

import numpy as np

from . import assembly, fespace, howard, mesh as meshmod


class Indicators:
    """Per-cell squared error indicators and their sum."""

    def __init__(self, per_cell):
        self.per_cell = np.asarray(per_cell, dtype=float)
        if np.any(self.per_cell < 0):
            raise ValueError("negative indicator")
        self.total = float(self.per_cell.sum())

    @property
    def global_eta(self):
        return float(np.sqrt(self.total))


def compute_indicators(p, mesh, spaces, pair, q, quad=None):
    """Per-cell eta(K)^2 for a solved pair and its control field."""
    space_u, _ = spaces
    if quad is None:
        quad = fespace.triangle_rule(2 * space_u.k + 4)
    fields = assembly.eval_m_theta(p, pair, quad, q.values)
    w = fields["w"]
    per_cell = ((fields["graddiff"] ** 2).sum(-1) * w).sum(axis=1)
    per_cell = per_cell + (fields["rotg"] ** 2 * w).sum(axis=1)
    per_cell = per_cell + ((fields["M"] - fields["f"]) ** 2 * w).sum(axis=1)

    for edge in mesh.boundary_edges:
        pts, uvals, gvals, wts, t, k = assembly._edge_pair_values(
            pair, quad, edge)
        if p.homogeneous:
            per_cell[k] += ((gvals @ t) ** 2 * wts).sum()
        else:
            rvals = np.asarray(p.r(pts))
            grv = np.asarray(p.grad_r(pts))
            per_cell[k] += ((uvals - rvals) ** 2 * wts).sum()
            per_cell[k] += (((gvals - grv) @ t) ** 2 * wts).sum()
    return Indicators(per_cell)


def mark_fraction(ind, beta):
    """Mark the ceil(beta * ncells) cells with the largest indicators.

    Ties are broken towards the smaller cell index.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must be in (0, 1)")
    n = len(ind.per_cell)
    count = int(np.ceil(beta * n))
    order = np.argsort(-ind.per_cell, kind="stable")
    return meshmod.MarkedSet(order[:count], num_cells=n)


class AdaptiveLevel:
    """Record of one adaptive level."""

    def __init__(self, level, mesh, ndof, h, eta, pair, control, history,
                 indicators):
        self.level = level
        self.mesh = mesh
        self.ndof = ndof
        self.h = h
        self.eta = eta
        self.pair = pair
        self.control = control
        self.history = history
        self.indicators = indicators


def adaptive_solve(p, initial_mesh, k, beta=0.3, tol_a=1e-7, maxiter_a=8,
                   howard_tol=1e-7, howard_maxiter=8, solver_tol=1e-11,
                   warm_start=False, use_direct=False):
    """Adaptive loop: solve, estimate, mark, refine.

    Stops when the global eta^2 drops below tol_a^2 or after maxiter_a
    levels.  Each level re-runs Howard from the zero pair unless
    warm_start interpolation is requested.

    Returns a list of AdaptiveLevel records.
    """
    mesh = initial_mesh
    levels = []
    init = None
    for level in range(maxiter_a + 1):
        space_u = fespace.build_space(mesh, k, 1)
        space_g = fespace.build_space(mesh, k, 2)
        spaces = (space_u, space_g)
        pair, q, history = howard.howard_solve(
            p, mesh, k, tol=howard_tol, maxiter=howard_maxiter,
            init=init, solver_tol=solver_tol, spaces=spaces,
            use_direct=use_direct)
        ind = compute_indicators(p, mesh, spaces, pair, q)
        levels.append(AdaptiveLevel(
            level, mesh, space_u.ndof + space_g.ndof,
            float(mesh.cell_diameters().max()), ind.global_eta,
            pair, q, history, ind))
        if ind.total <= tol_a ** 2 or level == maxiter_a:
            break
        marked = mark_fraction(ind, beta)
        new_mesh = meshmod.refine_marked(mesh, marked)
        if warm_start:
            nsu = fespace.build_space(new_mesh, k, 1)
            nsg = fespace.build_space(new_mesh, k, 2)
            init = assembly.PairField(
                _transfer(pair.u, nsu), _transfer(pair.g, nsg))
        mesh = new_mesh
    return levels


def _transfer(func, new_space):
    """Interpolate a discrete function onto a refined mesh's space by
    point evaluation at the new nodal points."""
    old_space = func.space
    pts = new_space.nodal_points()
    vals = _point_eval(func, pts)
    if new_space.ncomp == 1:
        return fespace.DiscreteFunction(new_space, vals)
    return fespace.DiscreteFunction(new_space, vals.T.reshape(-1))


def _point_eval(func, pts):
    """Evaluate a discrete function at arbitrary points (slow path)."""
    sp = func.space
    mesh = sp.mesh
    v = mesh.vertices
    c = mesh.cells
    nc = len(c)
    npts = len(pts)
    out_shape = (npts,) if sp.ncomp == 1 else (npts, 2)
    out = np.zeros(out_shape)
    found = np.zeros(npts, dtype=bool)
    p0 = v[c[:, 0]]
    J = np.stack([v[c[:, 1]] - v[c[:, 0]], v[c[:, 2]] - v[c[:, 0]]], axis=2)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    for k in range(nc):
        rem = np.flatnonzero(~found)
        if len(rem) == 0:
            break
        d = pts[rem] - p0[k]
        x = (J[k, 1, 1] * d[:, 0] - J[k, 0, 1] * d[:, 1]) / det[k]
        y = (-J[k, 1, 0] * d[:, 0] + J[k, 0, 0] * d[:, 1]) / det[k]
        inside = (x >= -1e-12) & (y >= -1e-12) & (x + y <= 1 + 1e-12)
        if not inside.any():
            continue
        sel = rem[inside]
        xy = np.column_stack([x[inside], y[inside]])
        N, _ = fespace.ref_basis(sp.k, xy)
        if sp.ncomp == 1:
            loc = func.coeffs[sp.cell_dofs[k]]
            out[sel] = loc @ N
        else:
            for comp in range(2):
                loc = func.coeffs[comp * sp.nscalar + sp.cell_dofs[k]]
                out[sel, comp] = loc @ N
        found[sel] = True
    return out
