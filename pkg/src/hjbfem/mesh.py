"""Conforming 2D triangular meshes with uniform and adaptive refinement.

Meshes are immutable after construction.  Refinement operations return new
meshes.  Two boundary geometries are supported: generic polygons (vertices
are exact) and circles (new boundary vertices are snapped radially onto the
circle).  Adaptive refinement uses newest-vertex bisection (NVB) with
recursive closure, so every produced mesh is conforming and shape regular.
"""

import numpy as np


class MeshError(Exception):
    pass


def _signed_areas(vertices, cells):
    p0 = vertices[cells[:, 0]]
    p1 = vertices[cells[:, 1]]
    p2 = vertices[cells[:, 2]]
    return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                  - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))


def _edge_census(cells):
    """All cell edges with sorted endpoints, unique edges and multiplicities.

    Returns (edges, counts, cell_edge_idx) where edges is (ne, 2) with
    sorted vertex pairs, counts the incidence multiplicity and
    cell_edge_idx (nc, 3) maps local edge i (opposite vertex i) to a row
    of edges.
    """
    nc = len(cells)
    # local edge i connects vertices (i+1)%3, (i+2)%3
    raw = np.stack([cells[:, [1, 2]], cells[:, [2, 0]], cells[:, [0, 1]]],
                   axis=1).reshape(3 * nc, 2)
    raw_sorted = np.sort(raw, axis=1)
    edges, inverse, counts = np.unique(
        raw_sorted, axis=0, return_inverse=True, return_counts=True)
    cell_edge_idx = inverse.reshape(nc, 3)
    return edges, counts, cell_edge_idx


class TriMesh:
    """Conforming triangulation of a 2D domain.

    Attributes
    ----------
    vertices : (nv, 2) float array
    cells : (nc, 3) int array
        Vertex indices, counterclockwise.
    refinement_edges : (nc,) int array
        Local index of the NVB refinement edge (edge i is opposite
        vertex i of the cell).
    parent : (nc,) int array
        Parent cell index in the previous mesh, -1 for root cells.
    boundary_geometry : tuple
        ("polygon",) or ("circle", center, radius).
    boundary_edges : list of (edge, cell, normal, tangent)
        Edge endpoints are ordered counterclockwise as traversed by the
        owning cell; normal is the outward unit normal.
    """

    def __init__(self, vertices, cells, boundary_geometry=("polygon",),
                 refinement_edges=None, parent=None, check=True):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.cells = np.ascontiguousarray(cells, dtype=np.int64)
        self.boundary_geometry = boundary_geometry
        nc = len(self.cells)

        edges, counts, cell_edge_idx = _edge_census(self.cells)
        self.edges = edges
        self.edge_counts = counts
        self.cell_edge_idx = cell_edge_idx

        if refinement_edges is None:
            refinement_edges = self._longest_edge_init()
        self.refinement_edges = np.asarray(refinement_edges, dtype=np.int64)
        if parent is None:
            parent = np.full(nc, -1, dtype=np.int64)
        self.parent = np.asarray(parent, dtype=np.int64)

        self.boundary_edges = self._build_boundary_edges()
        if check:
            self.check()

    # -- construction helpers -------------------------------------------------

    def _longest_edge_init(self):
        """Refinement edge = longest edge, ties to smallest opposite vertex."""
        v = self.vertices
        c = self.cells
        lengths = np.empty((len(c), 3))
        for i in range(3):
            a = v[c[:, (i + 1) % 3]]
            b = v[c[:, (i + 2) % 3]]
            lengths[:, i] = np.hypot(*(b - a).T)
        # ties between equally long edges are broken by the smallest
        # opposite-vertex *global* index so refinement is independent of
        # the local vertex ordering
        ref = np.empty(len(c), dtype=np.int64)
        for k in range(len(c)):
            lmax = lengths[k].max()
            cand = np.flatnonzero(lengths[k] >= lmax * (1.0 - 1e-14))
            ref[k] = cand[np.argmin(c[k, cand])]
        return ref

    def _build_boundary_edges(self):
        boundary_rows = np.flatnonzero(self.edge_counts == 1)
        row_set = set(boundary_rows.tolist())
        out = []
        v = self.vertices
        for k in range(len(self.cells)):
            for i in range(3):
                row = self.cell_edge_idx[k, i]
                if row in row_set:
                    a = self.cells[k, (i + 1) % 3]
                    b = self.cells[k, (i + 2) % 3]
                    d = v[b] - v[a]
                    ln = np.hypot(d[0], d[1])
                    t = d / ln
                    n = np.array([t[1], -t[0]])
                    out.append(((a, b), k, n, t))
        return out

    # -- queries --------------------------------------------------------------

    @property
    def num_cells(self):
        return len(self.cells)

    @property
    def num_vertices(self):
        return len(self.vertices)

    def cell_areas(self):
        return _signed_areas(self.vertices, self.cells)

    def total_area(self):
        return float(self.cell_areas().sum())

    def cell_diameters(self):
        v = self.vertices
        c = self.cells
        d = np.zeros(len(c))
        for i in range(3):
            a = v[c[:, (i + 1) % 3]]
            b = v[c[:, (i + 2) % 3]]
            d = np.maximum(d, np.hypot(*(b - a).T))
        return d

    def min_angle(self):
        v = self.vertices
        c = self.cells
        ang = np.pi
        for i in range(3):
            p = v[c[:, i]]
            e1 = v[c[:, (i + 1) % 3]] - p
            e2 = v[c[:, (i + 2) % 3]] - p
            cosv = (e1 * e2).sum(1) / (np.hypot(*e1.T) * np.hypot(*e2.T))
            ang = min(ang, np.arccos(np.clip(cosv, -1, 1)).min())
        return float(ang)

    def boundary_vertex_indices(self):
        rows = np.flatnonzero(self.edge_counts == 1)
        return np.unique(self.edges[rows])

    def check(self):
        """Validate conformity, orientation and geometry invariants."""
        if not np.all((self.edge_counts == 1) | (self.edge_counts == 2)):
            raise MeshError("edge shared by more than two cells")
        areas = self.cell_areas()
        if np.any(areas <= 0):
            raise MeshError("cell with nonpositive signed area")
        # boundary edges form closed loops: every boundary vertex has
        # exactly two incident boundary edges
        rows = np.flatnonzero(self.edge_counts == 1)
        if len(rows):
            bverts, deg = np.unique(self.edges[rows], return_counts=True)
            if not np.all(deg == 2):
                raise MeshError("boundary edges do not form closed loops")
        if self.boundary_geometry[0] == "circle":
            _, center, radius = self.boundary_geometry
            bv = self.vertices[self.boundary_vertex_indices()]
            r = np.hypot(bv[:, 0] - center[0], bv[:, 1] - center[1])
            if np.any(np.abs(r - radius) > 1e-12):
                raise MeshError("boundary vertex off the circle")
        for (a, b), k, n, t in self.boundary_edges:
            if abs(n @ t) > 1e-14 or abs(n @ n - 1) > 1e-14 \
                    or abs(t @ t - 1) > 1e-14:
                raise MeshError("bad boundary frame")


# -- generators ---------------------------------------------------------------

def unit_square_mesh(n):
    """Structured triangulation of (-1,1)^2 with 2*n^2 cells."""
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = np.linspace(-1.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (n + 1) + j

    cells = []
    for i in range(n):
        for j in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    return TriMesh(vertices, np.array(cells))


def unit_disk_mesh(m):
    """Quasi-uniform unstructured mesh of the unit disk.

    m boundary vertices sit exactly on the unit circle; the interior is
    filled with staggered concentric rings and triangulated by Delaunay.
    """
    if m < 6:
        raise ValueError("m must be >= 6")
    from scipy.spatial import Delaunay

    nr = max(1, int(round(m / 6)))
    pts = [np.zeros(2)]
    for j in range(1, nr + 1):
        r = j / nr
        npts = m if j == nr else max(4, int(round(m * j / nr)))
        offset = (j % 2) * np.pi / npts
        th = offset + 2 * np.pi * np.arange(npts) / npts
        pts.append(np.column_stack([r * np.cos(th), r * np.sin(th)]))
    vertices = np.vstack(pts)

    tri = Delaunay(vertices)
    cells = tri.simplices.astype(np.int64)
    areas = _signed_areas(vertices, cells)
    flip = areas < 0
    cells[flip] = cells[flip][:, [0, 2, 1]]
    areas = np.abs(areas)
    # qhull may emit degenerate slivers on cocircular inputs; reject here
    if np.any(areas < 1e-14):
        raise MeshError("degenerate triangle in disk mesh")
    return TriMesh(vertices, cells,
                   boundary_geometry=("circle", np.zeros(2), 1.0))


# -- refinement ---------------------------------------------------------------

def _snap_circle(vertices, idx, geometry):
    if geometry[0] != "circle" or len(idx) == 0:
        return
    _, center, radius = geometry
    p = vertices[idx] - center
    r = np.hypot(p[:, 0], p[:, 1])
    vertices[idx] = center + radius * p / r[:, None]


def refine_uniform(mesh):
    """Red refinement: each triangle is split into 4 similar children.

    For circle geometry, new boundary midpoints are snapped onto the
    circle, so similarity holds only away from the boundary.
    """
    v = mesh.vertices
    c = mesh.cells
    nv = len(v)
    ne = len(mesh.edges)
    mids = 0.5 * (v[mesh.edges[:, 0]] + v[mesh.edges[:, 1]])
    vertices = np.vstack([v, mids])

    boundary_rows = np.flatnonzero(mesh.edge_counts == 1)
    _snap_circle(vertices, nv + boundary_rows, mesh.boundary_geometry)

    mid = nv + mesh.cell_edge_idx  # (nc, 3): midpoint of edge opposite vtx i
    children = np.empty((4 * len(c), 3), dtype=np.int64)
    children[0::4] = np.column_stack([c[:, 0], mid[:, 2], mid[:, 1]])
    children[1::4] = np.column_stack([c[:, 1], mid[:, 0], mid[:, 2]])
    children[2::4] = np.column_stack([c[:, 2], mid[:, 1], mid[:, 0]])
    children[3::4] = np.column_stack([mid[:, 0], mid[:, 1], mid[:, 2]])
    parent = np.repeat(np.arange(len(c)), 4)
    return TriMesh(vertices, children, boundary_geometry=mesh.boundary_geometry,
                   parent=parent)


class MarkedSet:
    """Cell indices selected for refinement."""

    def __init__(self, indices, num_cells=None):
        idx = np.unique(np.asarray(indices, dtype=np.int64))
        if len(idx) == 0:
            raise ValueError("marked set is empty")
        if idx.min() < 0 or (num_cells is not None and idx.max() >= num_cells):
            raise ValueError("marked index out of range")
        self.indices = idx


def refine_marked(mesh, marked):
    """Newest-vertex bisection of all marked cells, with conformity closure."""
    if marked.indices.max() >= mesh.num_cells:
        raise ValueError("marked index out of range")
    c = mesh.cells
    nc = len(c)
    ref = mesh.refinement_edges

    # closure: an edge set where marking any edge of a cell forces its
    # refinement edge to be marked too
    edge_marked = np.zeros(len(mesh.edges), dtype=bool)
    edge_marked[mesh.cell_edge_idx[marked.indices, ref[marked.indices]]] = True
    while True:
        any_edge = edge_marked[mesh.cell_edge_idx].any(axis=1)
        need = any_edge & ~edge_marked[
            mesh.cell_edge_idx[np.arange(nc), ref]]
        if not need.any():
            break
        edge_marked[mesh.cell_edge_idx[need, ref[need]]] = True

    # create midpoints for marked edges
    v = mesh.vertices
    rows = np.flatnonzero(edge_marked)
    nv = len(v)
    midpoint_of = {}
    new_pts = []
    boundary_rows = set(np.flatnonzero(mesh.edge_counts == 1).tolist())
    snap_idx = []
    for j, row in enumerate(rows):
        a, b = mesh.edges[row]
        midpoint_of[(a, b)] = nv + j
        new_pts.append(0.5 * (v[a] + v[b]))
        if row in boundary_rows:
            snap_idx.append(nv + j)
    vertices = np.vstack([v, np.array(new_pts).reshape(-1, 2)])
    _snap_circle(vertices, np.array(snap_idx, dtype=np.int64),
                 mesh.boundary_geometry)

    out_cells = []
    out_ref = []
    out_parent = []

    def emit(tri, redge, par):
        # bisect while the refinement edge carries a midpoint
        r = redge
        p, a, b = tri[r], tri[(r + 1) % 3], tri[(r + 2) % 3]
        key = (a, b) if a < b else (b, a)
        mid = midpoint_of.get(key)
        if mid is None:
            out_cells.append(tri)
            out_ref.append(redge)
            out_parent.append(par)
        else:
            emit((mid, p, a), 0, par)
            emit((mid, b, p), 0, par)

    for k in range(nc):
        emit((c[k, 0], c[k, 1], c[k, 2]), int(ref[k]), k)

    return TriMesh(vertices, np.array(out_cells),
                   boundary_geometry=mesh.boundary_geometry,
                   refinement_edges=np.array(out_ref),
                   parent=np.array(out_parent))


# -- plain-text import/export -------------------------------------------------

def write_mesh(mesh, path):
    """Write "ntriangles nvertices nboundaryedges" header, vertices, cells
    and boundary edges in plain text."""
    with open(path, "w") as fh:
        fh.write("%d %d %d\n" % (mesh.num_cells, mesh.num_vertices,
                                 len(mesh.boundary_edges)))
        for x, y in mesh.vertices:
            fh.write("%.17g %.17g\n" % (x, y))
        for a, b, c in mesh.cells:
            fh.write("%d %d %d\n" % (a, b, c))
        for (a, b), k, _, _ in mesh.boundary_edges:
            fh.write("%d %d %d\n" % (a, b, k))


def read_mesh(path, boundary_geometry=("polygon",)):
    with open(path) as fh:
        tokens = fh.read().split()
    it = iter(tokens)
    try:
        nt, nv, nb = int(next(it)), int(next(it)), int(next(it))
        vertices = np.array([[float(next(it)), float(next(it))]
                             for _ in range(nv)])
        cells = np.array([[int(next(it)) for _ in range(3)]
                          for _ in range(nt)], dtype=np.int64)
    except StopIteration:
        raise MeshError("truncated mesh file: %s" % path)
    return TriMesh(vertices, cells, boundary_geometry=boundary_geometry)
