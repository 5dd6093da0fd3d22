"""Lagrange P1/P2 spaces on triangles: dofs, quadrature, evaluation, norms.

Scalar and 2-vector spaces share the same scalar basis; vector dofs are
blocked component-wise (all component-0 dofs first).  All evaluation is
vectorized over cells.
"""

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


class FeError(Exception):
    pass


# -- quadrature ---------------------------------------------------------------

class QuadRule:
    """Quadrature on the reference triangle {x>=0, y>=0, x+y<=1}.

    points are stored in barycentric coordinates (n, 3), weights sum to
    the reference area 1/2.  Also carries a 1D Gauss rule on [0, 1] for
    boundary edges.
    """

    def __init__(self, points_bary, weights, edge_points, edge_weights,
                 degree):
        self.points = np.asarray(points_bary, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.edge_points = np.asarray(edge_points, dtype=float)
        self.edge_weights = np.asarray(edge_weights, dtype=float)
        self.degree = degree

    @property
    def xy(self):
        """Reference (x, y) coordinates, (n, 2)."""
        return self.points[:, 1:]


def triangle_rule(degree):
    """Conical-product Gauss rule exact for polynomials up to `degree`.

    Built from Gauss-Legendre x Gauss-Jacobi(1,0) via the Duffy map; the
    n-point conical rule is exact to total degree 2n-1.
    """
    n = degree // 2 + 1
    xg, wg = roots_legendre(n)          # on [-1, 1]
    xj, wj = roots_jacobi(n, 1, 0)      # weight (1-x) on [-1, 1]
    s = 0.5 * (xg + 1.0)
    ws = 0.5 * wg
    t = 0.5 * (xj + 1.0)
    wt = 0.25 * wj                      # includes the (1-t) Jacobi factor
    # x = t, y = s*(1-t); weight ws*wt already carries jacobian (1-t)
    X = np.repeat(t, n)
    Y = np.tile(s, n) * (1.0 - X)
    W = np.repeat(wt, n) * np.tile(ws, n)
    bary = np.column_stack([1.0 - X - Y, X, Y])
    xe, we = roots_legendre(n)
    return QuadRule(bary, W, 0.5 * (xe + 1.0), 0.5 * we, 2 * n - 1)


# -- reference basis ----------------------------------------------------------

def ref_basis(k, xy):
    """Values and reference gradients of the Pk scalar basis.

    Parameters
    ----------
    k : 1 or 2
    xy : (n, 2) reference coordinates

    Returns
    -------
    N : (nb, n) values
    dN : (nb, n, 2) reference gradients
    """
    x = xy[:, 0]
    y = xy[:, 1]
    l0 = 1.0 - x - y
    l1 = x
    l2 = y
    g = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    if k == 1:
        N = np.stack([l0, l1, l2])
        dN = np.broadcast_to(g[:, None, :], (3, len(x), 2)).copy()
        return N, dN
    if k == 2:
        lam = [l0, l1, l2]
        N = np.empty((6, len(x)))
        dN = np.empty((6, len(x), 2))
        for i in range(3):
            N[i] = lam[i] * (2 * lam[i] - 1)
            dN[i] = (4 * lam[i] - 1)[:, None] * g[i]
        for i in range(3):  # edge node on edge opposite vertex i
            j, m = (i + 1) % 3, (i + 2) % 3
            N[3 + i] = 4 * lam[j] * lam[m]
            dN[3 + i] = 4 * (lam[j][:, None] * g[m] + lam[m][:, None] * g[j])
        return N, dN
    raise FeError("unsupported degree %r" % (k,))


def local_nodes(k):
    """Reference coordinates of the Pk nodal points."""
    v = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    if k == 1:
        return v
    mids = np.array([0.5 * (v[(i + 1) % 3] + v[(i + 2) % 3]) for i in range(3)])
    return np.vstack([v, mids])


# -- space --------------------------------------------------------------------

class FeSpace:
    """Continuous Pk Lagrange space, scalar (ncomp=1) or 2-vector (ncomp=2).

    Dof numbering is deterministic: vertex dofs first (vertex order), then
    one dof per edge in the order of the sorted-vertex-pair edge list.
    Vector dofs are blocked: global dof = comp * nscalar + scalar dof.
    """

    def __init__(self, mesh, k, ncomp=1):
        if k not in (1, 2):
            raise FeError("unsupported degree %r" % (k,))
        if ncomp not in (1, 2):
            raise FeError("unsupported component count %r" % (ncomp,))
        self.mesh = mesh
        self.k = k
        self.ncomp = ncomp
        nv = mesh.num_vertices
        if k == 1:
            self.nscalar = nv
            self.cell_dofs = mesh.cells.copy()
        else:
            self.nscalar = nv + len(mesh.edges)
            self.cell_dofs = np.hstack([mesh.cells, nv + mesh.cell_edge_idx])
        self.ndof = ncomp * self.nscalar
        self.boundary_scalar_dofs = self._boundary_scalar_dofs()

        # geometry caches (affine cells)
        v = mesh.vertices
        c = mesh.cells
        J = np.stack([v[c[:, 1]] - v[c[:, 0]], v[c[:, 2]] - v[c[:, 0]]],
                     axis=2)  # (nc, 2, 2), columns are edge vectors
        self.jac = J
        self.detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        invJ = np.empty_like(J)
        invJ[:, 0, 0] = J[:, 1, 1]
        invJ[:, 0, 1] = -J[:, 0, 1]
        invJ[:, 1, 0] = -J[:, 1, 0]
        invJ[:, 1, 1] = J[:, 0, 0]
        self.invJ = invJ / self.detJ[:, None, None]
        self._basis_cache = {}

    def _boundary_scalar_dofs(self):
        mesh = self.mesh
        bnd = set(mesh.boundary_vertex_indices().tolist())
        dofs = sorted(bnd)
        if self.k == 2:
            rows = np.flatnonzero(mesh.edge_counts == 1)
            dofs += (mesh.num_vertices + rows).tolist()
        return np.array(sorted(dofs), dtype=np.int64)

    @property
    def boundary_dofs(self):
        """Global dofs whose nodal points lie on the boundary."""
        sd = self.boundary_scalar_dofs
        return np.concatenate([comp * self.nscalar + sd
                               for comp in range(self.ncomp)])

    def nodal_points(self):
        """Coordinates of all scalar nodal points, (nscalar, 2)."""
        mesh = self.mesh
        pts = mesh.vertices
        if self.k == 2:
            mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]]
                          + mesh.vertices[mesh.edges[:, 1]])
            pts = np.vstack([pts, mids])
        return pts

    def eval_basis(self, quad):
        """Basis values and physical gradients at quadrature points.

        Returns
        -------
        N : (nb, nq) scalar basis values (same on every cell)
        G : (nc, nb, nq, 2) physical gradients
        X : (nc, nq, 2) physical quadrature points
        w : (nc, nq) quadrature weights scaled by |detJ|
        """
        # keep the rule object alive inside the cache entry so its id
        # cannot be recycled for a different rule
        key = id(quad)
        hit = self._basis_cache.get(key)
        if hit is not None and hit[0] is quad:
            return hit[1]
        if np.any(self.detJ <= 0):
            raise FeError("degenerate cell")
        N, dN = ref_basis(self.k, quad.xy)
        # grad_phys = invJ^T @ grad_ref
        G = np.einsum("clj,bql->cbqj", self.invJ, dN)
        v0 = self.mesh.vertices[self.mesh.cells[:, 0]]
        X = v0[:, None, :] + np.einsum("cjl,ql->cqj", self.jac, quad.xy)
        w = quad.weights[None, :] * np.abs(self.detJ)[:, None]
        self._basis_cache[key] = (quad, (N, G, X, w))
        return N, G, X, w


class DiscreteFunction:
    """Coefficient vector on a FeSpace."""

    def __init__(self, space, coeffs=None):
        self.space = space
        if coeffs is None:
            coeffs = np.zeros(space.ndof)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.ndof,):
            raise FeError("coefficient length mismatch")
        self.coeffs = coeffs

    def copy(self):
        return DiscreteFunction(self.space, self.coeffs.copy())

    def cell_values(self, quad):
        """Values at quadrature points.

        Returns (nc, nq) for scalar spaces, (nc, nq, 2) for vector spaces.
        """
        sp = self.space
        N, G, X, w = sp.eval_basis(quad)
        return self._values_from(N, sp)

    def _values_from(self, N, sp):
        loc = self.coeffs[sp.cell_dofs]  # (nc, nb) scalar part, comp 0
        if sp.ncomp == 1:
            return np.einsum("cb,bq->cq", loc, N)
        vals = []
        for comp in range(2):
            locc = self.coeffs[comp * sp.nscalar + sp.cell_dofs]
            vals.append(np.einsum("cb,bq->cq", locc, N))
        return np.stack(vals, axis=-1)


def build_space(mesh, k, ncomp=1):
    return FeSpace(mesh, k, ncomp)


def interpolate(space, f):
    """Nodal interpolant of a callback.

    f maps (n, 2) points to values: shape (n,) for scalar spaces and
    (n, 2) for vector spaces.
    """
    pts = space.nodal_points()
    vals = np.asarray(f(pts), dtype=float)
    if space.ncomp == 1:
        if vals.shape != (space.nscalar,):
            raise FeError("interpolation callback shape mismatch")
        return DiscreteFunction(space, vals)
    if vals.shape != (space.nscalar, 2):
        raise FeError("interpolation callback shape mismatch")
    return DiscreteFunction(space, vals.T.reshape(-1))


def _cell_eval(u, quad):
    """Values and gradients of u at quadrature points, with weights.

    Returns (vals, grads, X, w); grads has a trailing (2,) axis for scalar
    spaces and (2, 2) (components x derivative) for vector spaces.
    """
    sp = u.space
    N, G, X, w = sp.eval_basis(quad)
    if sp.ncomp == 1:
        loc = u.coeffs[sp.cell_dofs]
        vals = np.einsum("cb,bq->cq", loc, N)
        grads = np.einsum("cb,cbqj->cqj", loc, G)
    else:
        vals_c, grads_c = [], []
        for comp in range(2):
            loc = u.coeffs[comp * sp.nscalar + sp.cell_dofs]
            vals_c.append(np.einsum("cb,bq->cq", loc, N))
            grads_c.append(np.einsum("cb,cbqj->cqj", loc, G))
        vals = np.stack(vals_c, axis=-1)
        grads = np.stack(grads_c, axis=-2)  # (nc, nq, comp, deriv)
    return vals, grads, X, w


def _subdivide_quad(quad, levels):
    """Refine a reference rule by uniform subdivision of the reference
    triangle; used near point singularities."""
    bary = quad.points
    wts = quad.weights
    for _ in range(levels):
        v = [np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0])]
        xy = bary[:, 1:]
        pts, ws = [], []
        corners = np.array(v)
        mids = np.array([0.5 * (v[1] + v[2]), 0.5 * (v[2] + v[0]),
                         0.5 * (v[0] + v[1])])
        subs = [(corners[0], mids[2], mids[1]),
                (corners[1], mids[0], mids[2]),
                (corners[2], mids[1], mids[0]),
                (mids[0], mids[1], mids[2])]
        for (a, b, c) in subs:
            mapped = a + xy @ np.stack([b - a, c - a])
            pts.append(mapped)
            ws.append(wts / 4.0)
        xy_new = np.vstack(pts)
        wts = np.concatenate(ws)
        bary = np.column_stack([1.0 - xy_new.sum(1), xy_new])
    return QuadRule(bary, wts, quad.edge_points, quad.edge_weights,
                    quad.degree)


def norms(u, exact=None, exact_grad=None, quad=None, subdivide_cells=None,
          subdivide_levels=2):
    """L2 norm, H1 seminorm and H1 norm of u (or of the error u - exact).

    Parameters
    ----------
    u : DiscreteFunction
    exact, exact_grad : callbacks on (n, 2) points, or None
        For vector spaces exact returns (n, 2) and exact_grad (n, 2, 2).
    subdivide_cells : optional bool array (nc,)
        Cells integrated with a locally subdivided rule (singular
        integrands with bounded values but unbounded derivatives).

    Returns
    -------
    dict with keys "L2", "H1semi", "H1".
    """
    sp = u.space
    if quad is None:
        quad = triangle_rule(2 * sp.k + 4)

    def accumulate(cell_mask, rule):
        vals, grads, X, w = _cell_eval(u, rule)
        if cell_mask is not None:
            vals, grads, X, w = (vals[cell_mask], grads[cell_mask],
                                 X[cell_mask], w[cell_mask])
        if exact is not None:
            pts = X.reshape(-1, 2)
            ve = np.asarray(exact(pts)).reshape(vals.shape)
            vals = vals - ve
        if exact_grad is not None:
            pts = X.reshape(-1, 2)
            ge = np.asarray(exact_grad(pts)).reshape(grads.shape)
            grads = grads - ge
        l2 = ((vals ** 2).reshape(len(w), len(rule.weights), -1).sum(-1)
              * w).sum(1)
        h1 = ((grads ** 2).reshape(len(w), len(rule.weights), -1).sum(-1)
              * w).sum(1)
        return l2.sum(), h1.sum()

    if subdivide_cells is None or not np.any(subdivide_cells):
        l2sq, h1sq = accumulate(None, quad)
    else:
        mask = np.asarray(subdivide_cells, dtype=bool)
        l2a, h1a = accumulate(~mask, quad)
        fine = _subdivide_quad(quad, subdivide_levels)
        l2b, h1b = accumulate(mask, fine)
        l2sq, h1sq = l2a + l2b, h1a + h1b

    return {"L2": np.sqrt(l2sq), "H1semi": np.sqrt(h1sq),
            "H1": np.sqrt(l2sq + h1sq)}


def pair_norm(u_norms, g_norms):
    """H1 norm of a (scalar, vector) pair from the component norms."""
    return float(np.sqrt(u_norms["H1"] ** 2 + g_norms["H1"] ** 2))
