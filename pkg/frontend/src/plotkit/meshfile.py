"""Reading the solver's plain-text triangle mesh format.

Layout: a header line "ntriangles nvertices nboundaryedges", then the
vertex coordinates (x y per line), the triangles (three 0-based vertex
indices per line) and the boundary edges (two vertex indices plus the
incident triangle per line).
"""

import numpy as np


class MeshFileError(Exception):
    pass


def load_mesh(path):
    """Return (vertices (nv, 2), triangles (nt, 3), boundary (nbe, 2))."""
    try:
        with open(path) as fh:
            tokens = fh.read().split()
    except OSError as exc:
        raise MeshFileError("cannot read %s: %s" % (path, exc)) from exc
    if len(tokens) < 3:
        raise MeshFileError("%s: missing header" % (path,))
    try:
        nt, nv, nbe = (int(t) for t in tokens[:3])
    except ValueError as exc:
        raise MeshFileError("%s: bad header" % (path,)) from exc
    need = 3 + 2 * nv + 3 * nt + 3 * nbe
    if len(tokens) != need:
        raise MeshFileError("%s: expected %d values, found %d"
                            % (path, need, len(tokens)))
    pos = 3
    try:
        vertices = np.array(tokens[pos:pos + 2 * nv],
                            dtype=float).reshape(nv, 2)
        pos += 2 * nv
        triangles = np.array(tokens[pos:pos + 3 * nt],
                             dtype=int).reshape(nt, 3)
        pos += 3 * nt
        boundary = np.array(tokens[pos:pos + 3 * nbe],
                            dtype=int).reshape(max(nbe, 0), 3)[:, :2]
    except ValueError as exc:
        raise MeshFileError("%s: bad numeric data" % (path,)) from exc
    if triangles.size and (triangles.min() < 0 or triangles.max() >= nv):
        raise MeshFileError("%s: triangle index out of range" % (path,))
    return vertices, triangles, boundary
