"""Least-squares Galerkin assembly for the gradient-recovery formulation.

For a fixed piecewise-constant control field q this builds the symmetric
system of the bilinear form

    (grad u - g, grad v - w) + (rot g, rot w) + (M(u,g), M(v,w))
        + boundary terms

over the combined dof vector (u-dofs, then the two blocked components of
g).  The homogeneous variant pins boundary u-dofs; the nonhomogeneous
variant instead adds the boundary mass term (u, v) on the left and the
data terms (r, v) and (T grad r, T w) on the right.
"""

import numpy as np
import scipy.sparse as sparse

from . import fespace


class AssemblyError(Exception):
    pass


class PairField:
    """Discrete pair (u, g): scalar state and recovered gradient."""

    def __init__(self, u, g):
        if u.space.mesh is not g.space.mesh or u.space.k != g.space.k:
            raise AssemblyError("pair spaces must share mesh and degree")
        self.u = u
        self.g = g

    @classmethod
    def zero(cls, space_u, space_g):
        return cls(fespace.DiscreteFunction(space_u),
                   fespace.DiscreteFunction(space_g))

    def combined(self):
        return np.concatenate([self.u.coeffs, self.g.coeffs])

    @classmethod
    def from_combined(cls, space_u, space_g, vec):
        return cls(fespace.DiscreteFunction(space_u, vec[:space_u.ndof]),
                   fespace.DiscreteFunction(space_g, vec[space_u.ndof:]))


class SparseSystem:
    def __init__(self, matrix, rhs, constrained, ndof_u, ndof_g):
        self.matrix = matrix
        self.rhs = rhs
        self.constrained = constrained
        self.ndof_u = ndof_u
        self.ndof_g = ndof_g


def m_theta_point(p, x, alpha, phi, grad_phi, psi, D_psi):
    """Pointwise value of M_theta(phi, psi) at (x, alpha).

    D_psi is the 2x2 Jacobian of psi (rows: components, columns:
    derivatives).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    A = np.asarray(p.A(x, alpha))[0]
    b = np.asarray(p.b(x, alpha))[0]
    c = np.asarray(p.c(x, alpha))[0]
    th = p.theta
    psi = np.asarray(psi, dtype=float)
    grad_phi = np.asarray(grad_phi, dtype=float)
    return float((A * np.asarray(D_psi)).sum()
                 + b @ (th * psi + (1 - th) * grad_phi) - c * phi)


def _coefficients(p, X, q_values):
    """Coefficient arrays at per-cell quadrature points.

    X is (nc, nq, 2); q_values is (nc,).  Returns A (nc, nq, 2, 2),
    b (nc, nq, 2), c (nc, nq), f (nc, nq).
    """
    nc, nq, _ = X.shape
    Xf = X.reshape(-1, 2)
    af = np.repeat(np.asarray(q_values, dtype=float), nq)
    A = np.asarray(p.A(Xf, af)).reshape(nc, nq, 2, 2)
    b = np.asarray(p.b(Xf, af)).reshape(nc, nq, 2)
    c = np.asarray(p.c(Xf, af)).reshape(nc, nq)
    f = np.asarray(p.f(Xf, af)).reshape(nc, nq)
    return A, b, c, f


def _local_fields(p, space_u, quad, q_values, cell_slice=slice(None)):
    """Per-local-dof fields entering the least-squares form.

    Local dof order: nb u-dofs, nb g-component-0 dofs, nb g-component-1
    dofs.  Returns (V, rot, m, fvals, X, w) with V (nc, nl, nq, 2),
    rot and m (nc, nl, nq), restricted to cell_slice.
    """
    N, G, X, w = space_u.eval_basis(quad)
    G, X, w = G[cell_slice], X[cell_slice], w[cell_slice]
    nb, nq = N.shape
    nc = len(w)
    A, b, c, f = _coefficients(p, X, np.asarray(q_values)[cell_slice])
    th = p.theta
    nl = 3 * nb

    V = np.zeros((nc, nl, nq, 2))
    V[:, :nb] = G                                   # grad phi
    V[:, nb:2 * nb, :, 0] = -N[None, :, :]          # -psi, component 0
    V[:, 2 * nb:, :, 1] = -N[None, :, :]

    rot = np.zeros((nc, nl, nq))
    rot[:, nb:2 * nb] = -G[:, :, :, 1]              # rot(N e0) = -d2 N
    rot[:, 2 * nb:] = G[:, :, :, 0]                 # rot(N e1) = d1 N

    m = np.zeros((nc, nl, nq))
    m[:, :nb] = (1 - th) * np.einsum("cqj,cbqj->cbq", b, G) \
        - c[:, None, :] * N[None, :, :]
    for comp in range(2):
        m[:, (1 + comp) * nb:(2 + comp) * nb] = (
            np.einsum("cqj,cbqj->cbq", A[:, :, comp, :], G)
            + th * b[:, :, comp][:, None, :] * N[None, :, :])
    return V, rot, m, f, X, w


def _edge_quad_data(p, space_u, quad, edge):
    """Edge quadrature points, scalar basis values at them, weights."""
    (a, b), k, n, t = edge
    mesh = space_u.mesh
    va, vb = mesh.vertices[a], mesh.vertices[b]
    s = quad.edge_points
    pts = va[None, :] + s[:, None] * (vb - va)[None, :]
    le = np.hypot(*(vb - va))
    wts = quad.edge_weights * le

    cell = mesh.cells[k]
    la = int(np.flatnonzero(cell == a)[0])
    lb = int(np.flatnonzero(cell == b)[0])
    refv = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    ref_pts = refv[la][None, :] + s[:, None] * (refv[lb] - refv[la])[None, :]
    N, _ = fespace.ref_basis(space_u.k, ref_pts)  # (nb, nqe)
    return pts, N, wts, t, k


def assemble(p, mesh, spaces, q, quad=None, export_matrix=None):
    """Assemble the least-squares system for a fixed control field q.

    Parameters
    ----------
    p : HjbProblem
    spaces : (scalar FeSpace, vector FeSpace)
    q : ControlField
    export_matrix : optional path
        Write the unconstrained matrix in "row col value" text form.

    Returns
    -------
    SparseSystem
    """
    space_u, space_g = spaces
    if space_u.mesh is not mesh or space_g.mesh is not mesh:
        raise AssemblyError("spaces not built on this mesh")
    if len(q.values) != mesh.num_cells:
        raise AssemblyError("control field length mismatch")
    if quad is None:
        quad = fespace.triangle_rule(2 * space_u.k + 4)

    nb = space_u.cell_dofs.shape[1]
    nsu = space_u.ndof
    nsg = space_g.nscalar
    nc = mesh.num_cells

    # global dof map for the combined vector: u-dofs, then g blocked
    gdof = np.hstack([space_u.cell_dofs,
                      nsu + space_g.cell_dofs,
                      nsu + nsg + space_g.cell_dofs])  # (nc, 3*nb)
    ndof = nsu + space_g.ndof
    nl = 3 * nb

    rhs = np.zeros(ndof)
    matrix = sparse.csr_matrix((ndof, ndof))
    chunk = max(1, 4_000_000 // (nl * len(quad.weights)))
    for lo in range(0, nc, chunk):
        sl = slice(lo, min(lo + chunk, nc))
        V, rot, m, f, X, w = _local_fields(p, space_u, quad, q.values, sl)
        loc = (np.einsum("caqj,cbqj,cq->cab", V, V, w)
               + np.einsum("caq,cbq,cq->cab", rot, rot, w)
               + np.einsum("caq,cbq,cq->cab", m, m, w))
        rhs_loc = np.einsum("cq,caq,cq->ca", f, m, w)
        gd = gdof[sl]
        rows = np.repeat(gd, nl, axis=1).ravel()
        cols = np.tile(gd, (1, nl)).ravel()
        matrix = matrix + sparse.coo_matrix(
            (loc.ravel(), (rows, cols)), shape=(ndof, ndof)).tocsr()
        np.add.at(rhs, gd.ravel(), rhs_loc.ravel())

    # boundary terms
    extra_rows = []
    extra_cols = []
    extra_data = []
    for edge in mesh.boundary_edges:
        pts, Ne, wts, t, k = _edge_quad_data(p, space_u, quad, edge)
        udofs = space_u.cell_dofs[k]
        gdofs0 = nsu + space_g.cell_dofs[k]
        gdofs1 = nsu + nsg + space_g.cell_dofs[k]
        # tangential-trace dofs: psi . t = t0 N (comp 0) + t1 N (comp 1)
        tg_dofs = np.concatenate([gdofs0, gdofs1])
        tg_vals = np.vstack([t[0] * Ne, t[1] * Ne])  # (2nb, nqe)
        M_tt = np.einsum("aq,bq,q->ab", tg_vals, tg_vals, wts)
        extra_rows.append(np.repeat(tg_dofs, len(tg_dofs)))
        extra_cols.append(np.tile(tg_dofs, len(tg_dofs)))
        extra_data.append(M_tt.ravel())
        if not p.homogeneous:
            M_uu = np.einsum("aq,bq,q->ab", Ne, Ne, wts)
            extra_rows.append(np.repeat(udofs, len(udofs)))
            extra_cols.append(np.tile(udofs, len(udofs)))
            extra_data.append(M_uu.ravel())
            rvals = np.asarray(p.r(pts))
            np.add.at(rhs, udofs, np.einsum("q,aq,q->a", rvals, Ne, wts))
            grv = np.asarray(p.grad_r(pts))
            gr_t = grv @ t
            np.add.at(rhs, tg_dofs,
                      np.einsum("q,aq,q->a", gr_t, tg_vals, wts))

    if extra_rows:
        matrix = matrix + sparse.coo_matrix(
            (np.concatenate(extra_data),
             (np.concatenate(extra_rows), np.concatenate(extra_cols))),
            shape=(ndof, ndof)).tocsr()

    constrained = np.array([], dtype=np.int64)
    if p.homogeneous:
        # eliminate boundary u-dofs symmetrically, unit diagonal
        constrained = space_u.boundary_dofs  # u-dofs only (scalar space)
        keep = np.ones(ndof)
        keep[constrained] = 0.0
        P = sparse.diags(keep)
        matrix = P @ matrix @ P + sparse.diags(1.0 - keep)
        matrix = matrix.tocsr()
        rhs[constrained] = 0.0
    matrix.sum_duplicates()
    matrix.eliminate_zeros()

    if export_matrix is not None:
        coo = matrix.tocoo()
        with open(export_matrix, "w") as fh:
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write("%d %d %.17g\n" % (i, j, v))

    return SparseSystem(matrix, rhs, constrained, nsu, space_g.ndof)


def eval_m_theta(p, pair, quad, q_values):
    """M_theta^q(u, g) and companion fields at quadrature points.

    Returns dict with M (nc, nq), graddiff (nc, nq, 2) = grad u - g,
    rotg (nc, nq), f (nc, nq), X, w.
    """
    uvals, ugrads, X, w = fespace._cell_eval(pair.u, quad)
    gvals, ggrads, _, _ = fespace._cell_eval(pair.g, quad)
    A, b, c, f = _coefficients(p, X, q_values)
    th = p.theta
    M = (np.einsum("cqml,cqml->cq", A, ggrads)
         + np.einsum("cqj,cqj->cq", b, th * gvals + (1 - th) * ugrads)
         - c * uvals)
    rotg = ggrads[:, :, 1, 0] - ggrads[:, :, 0, 1]
    graddiff = ugrads - gvals
    return {"M": M, "graddiff": graddiff, "rotg": rotg, "f": f,
            "X": X, "w": w, "uvals": uvals, "gvals": gvals}


def _edge_pair_values(pair, quad, edge):
    """u and g values of a discrete pair along one boundary edge."""
    (a, b), k, n, t = edge
    space_u = pair.u.space
    space_g = pair.g.space
    pts, Ne, wts, t, k = _edge_quad_data(None, space_u, quad, edge)
    uloc = pair.u.coeffs[space_u.cell_dofs[k]]
    uvals = uloc @ Ne
    g0 = pair.g.coeffs[space_g.cell_dofs[k]]
    g1 = pair.g.coeffs[space_g.nscalar + space_g.cell_dofs[k]]
    gvals = np.stack([g0 @ Ne, g1 @ Ne], axis=-1)  # (nqe, 2)
    return pts, uvals, gvals, wts, t, k


def residual_functional(p, mesh, spaces, pair, q, quad=None):
    """Value of the least-squares functional at (u, g) with control q.

    This is the global squared residual: the homogeneous E or, when the
    problem carries boundary data, its extended variant.
    """
    space_u, _ = spaces
    if quad is None:
        quad = fespace.triangle_rule(2 * space_u.k + 4)
    fields = eval_m_theta(p, pair, quad, q.values)
    w = fields["w"]
    val = ((fields["graddiff"] ** 2).sum(-1) * w).sum()
    val += (fields["rotg"] ** 2 * w).sum()
    val += ((fields["M"] - fields["f"]) ** 2 * w).sum()
    for edge in mesh.boundary_edges:
        pts, uvals, gvals, wts, t, k = _edge_pair_values(pair, quad, edge)
        if p.homogeneous:
            val += ((gvals @ t) ** 2 * wts).sum()
        else:
            rvals = np.asarray(p.r(pts))
            grv = np.asarray(p.grad_r(pts))
            val += ((uvals - rvals) ** 2 * wts).sum()
            val += (((gvals - grv) @ t) ** 2 * wts).sum()
    return float(val)
