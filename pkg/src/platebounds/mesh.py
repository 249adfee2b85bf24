"""Triangular and rectangular meshes for the unit square and L-shaped domain.

Triangulations are conforming, counterclockwise oriented, and carry a
refinement-edge label per triangle (local edge index, edge i opposite local
vertex i) for newest-vertex bisection.  All meshes derived from the
right-isosceles initial pattern keep the 45-degree minimum angle: bisection
goes through the hypotenuse and reproduces right-isosceles triangles.

Meshes are immutable after construction; every refinement returns a new mesh.
"""

import numpy as np

__all__ = [
    "TriMesh",
    "RectMesh",
    "build_initial_square",
    "build_initial_lshape",
    "build_rect_mesh",
    "uniform_refine",
    "bisect",
    "validate_trimesh",
    "dump_trimesh",
    "load_trimesh",
]


class TriMesh:
    """Conforming triangulation with edge topology.

    Attributes
    ----------
    vertices : (V, 2) float array
    triangles : (T, 3) int array, counterclockwise
    refine_edge : (T,) int array, local index of the refinement edge
    edges : (E, 2) int array, each stored low-index-first
    tri_edge : (T, 3) int array, global edge id of local edge i
    edge_tri : (E, 2) int array, adjacent triangles (-1 for none)
    boundary_edge, boundary_vertex : boolean masks
    """

    def __init__(self, vertices, triangles, refine_edge):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.refine_edge = np.ascontiguousarray(refine_edge, dtype=np.int64)
        self._build_topology()

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    @property
    def num_edges(self):
        return self.edges.shape[0]

    def _build_topology(self):
        tris = self.triangles
        nv = self.num_vertices
        # local edge i joins vertices (i+1)%3 and (i+2)%3
        pairs = tris[:, [[1, 2], [2, 0], [0, 1]]].reshape(-1, 2)
        lo = pairs.min(axis=1)
        hi = pairs.max(axis=1)
        key = lo.astype(np.int64) * nv + hi
        uniq, inverse = np.unique(key, return_inverse=True)
        ne = uniq.shape[0]
        self.edges = np.column_stack([uniq // nv, uniq % nv])
        self.tri_edge = inverse.reshape(-1, 3)

        edge_tri = np.full((ne, 2), -1, dtype=np.int64)
        tri_ids = np.repeat(np.arange(tris.shape[0]), 3)
        # fill slot 0 then slot 1, scanning triangles in index order
        order = np.argsort(inverse, kind="stable")
        e_sorted = inverse[order]
        t_sorted = tri_ids[order]
        first = np.ones(ne, dtype=bool)
        counts = np.bincount(e_sorted, minlength=ne)
        if counts.max(initial=0) > 2:
            raise ValueError("non-manifold edge: more than two adjacent triangles")
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        edge_tri[:, 0][e_sorted[starts]] = t_sorted[starts]
        second = counts == 2
        edge_tri[second, 1] = t_sorted[starts[second] + 1]
        del first
        self.edge_tri = edge_tri
        self.boundary_edge = counts == 1
        bv = np.zeros(nv, dtype=bool)
        bv[self.edges[self.boundary_edge].ravel()] = True
        self.boundary_vertex = bv

    # geometry helpers -----------------------------------------------------

    def triangle_coords(self):
        """(T, 3, 2) vertex coordinates per triangle."""
        return self.vertices[self.triangles]

    def signed_areas(self):
        xy = self.triangle_coords()
        d1 = xy[:, 1] - xy[:, 0]
        d2 = xy[:, 2] - xy[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def diameters(self):
        """Longest edge per triangle."""
        return self.edge_lengths()[self.tri_edge].max(axis=1)

    def edge_normals(self):
        """Canonical unit normal per edge: low-to-high tangent rotated -90 deg."""
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        length = np.hypot(d[:, 0], d[:, 1])
        return np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]

    def min_angle(self):
        xy = self.triangle_coords()
        angles = []
        for i in range(3):
            a = xy[:, (i + 1) % 3] - xy[:, i]
            b = xy[:, (i + 2) % 3] - xy[:, i]
            cosv = (a * b).sum(axis=1) / (
                np.hypot(a[:, 0], a[:, 1]) * np.hypot(b[:, 0], b[:, 1])
            )
            angles.append(np.arccos(np.clip(cosv, -1.0, 1.0)))
        return float(np.min(angles))


class RectMesh:
    """Uniform axis-aligned rectangle mesh covering the square or L-shape."""

    def __init__(self, nodes, cells, hx, hy, boundary_node, domain, n):
        self.nodes = np.ascontiguousarray(nodes, dtype=float)
        self.cells = np.ascontiguousarray(cells, dtype=np.int64)
        self.hx = float(hx)
        self.hy = float(hy)
        self.boundary_node = np.ascontiguousarray(boundary_node, dtype=bool)
        self.domain = domain
        self.n = int(n)

    @property
    def num_nodes(self):
        return self.nodes.shape[0]

    @property
    def num_cells(self):
        return self.cells.shape[0]


# builders ----------------------------------------------------------------


def _squares_to_trimesh(grid_cols, grid_rows, spacing, cell_mask):
    """Tile masked grid cells with two right-isosceles triangles each.

    Each cell is split by the lower-left to upper-right diagonal; refinement
    edges are the hypotenuses.
    """
    nxv, nyv = grid_cols + 1, grid_rows + 1
    used = np.zeros((nxv, nyv), dtype=bool)
    ci, cj = np.nonzero(cell_mask)
    for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
        used[ci + di, cj + dj] = True
    vid = np.full((nxv, nyv), -1, dtype=np.int64)
    # vertices numbered row-major, bottom row first
    order_i, order_j = np.nonzero(used.T)  # iterate j (rows) outer
    vid[order_j, order_i] = np.arange(order_i.size)
    vertices = np.column_stack([order_j * spacing, order_i * spacing])

    tris = []
    labels = []
    # cells in row-major order for determinism
    cells = sorted(zip(cj.tolist(), ci.tolist()))
    for j, i in cells:
        ll = vid[i, j]
        lr = vid[i + 1, j]
        ur = vid[i + 1, j + 1]
        ul = vid[i, j + 1]
        tris.append((ll, lr, ur))  # hypotenuse (ll, ur) opposite lr -> label 1
        labels.append(1)
        tris.append((ll, ur, ul))  # hypotenuse opposite ul -> label 2
        labels.append(2)
    return TriMesh(vertices, np.array(tris), np.array(labels))


def _lshape_cell_mask(n):
    """Cell mask on a (2n x 2n) grid for (0,1)x(0,1/2) U (0,1/2)x(1/2,1)."""
    mask = np.zeros((2 * n, 2 * n), dtype=bool)
    mask[:, :n] = True  # bottom half, full width
    mask[:n, n:] = True  # top half, left columns
    return mask


def build_initial_square(n):
    """Initial triangulation of the unit square, n x n subsquares."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return _squares_to_trimesh(n, n, 1.0 / n, np.ones((n, n), dtype=bool))


def build_initial_lshape(n):
    """Initial triangulation of the L-shape, squares of side 1/(2n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return _squares_to_trimesh(2 * n, 2 * n, 0.5 / n, _lshape_cell_mask(n))


def build_rect_mesh(domain, n):
    """Uniform rectangle mesh: side 1/n on the square, 1/(2n) on the L-shape."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if domain == "square":
        cols = rows = n
        spacing = 1.0 / n
        mask = np.ones((n, n), dtype=bool)
    elif domain == "lshape":
        cols = rows = 2 * n
        spacing = 0.5 / n
        mask = _lshape_cell_mask(n)
    else:
        raise ValueError(f"unknown domain {domain!r}")

    nxv, nyv = cols + 1, rows + 1
    used = np.zeros((nxv, nyv), dtype=bool)
    ci, cj = np.nonzero(mask)
    for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
        used[ci + di, cj + dj] = True
    vid = np.full((nxv, nyv), -1, dtype=np.int64)
    order_i, order_j = np.nonzero(used.T)
    vid[order_j, order_i] = np.arange(order_i.size)
    nodes = np.column_stack([order_j * spacing, order_i * spacing])

    cells = []
    for j, i in sorted(zip(cj.tolist(), ci.tolist())):
        cells.append((vid[i, j], vid[i + 1, j], vid[i + 1, j + 1], vid[i, j + 1]))
    cells = np.array(cells)

    # boundary nodes: on an edge of a cell face not shared by two cells
    edge_count = {}
    for c in cells:
        for k in range(4):
            a, b = int(c[k]), int(c[(k + 1) % 4])
            key = (min(a, b), max(a, b))
            edge_count[key] = edge_count.get(key, 0) + 1
    boundary = np.zeros(nodes.shape[0], dtype=bool)
    for (a, b), cnt in edge_count.items():
        if cnt == 1:
            boundary[a] = True
            boundary[b] = True
    return RectMesh(nodes, cells, spacing, spacing, boundary, domain, n)


# refinement --------------------------------------------------------------


def uniform_refine(mesh):
    """Regular (red) quadrisection: each triangle splits into 4 similar children."""
    nv = mesh.num_vertices
    mids = 0.5 * (
        mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]]
    )
    vertices = np.vstack([mesh.vertices, mids])
    mid_id = nv + np.arange(mesh.num_edges)

    t = mesh.triangles
    m = mid_id[mesh.tri_edge]  # (T, 3), m[:, i] = midpoint of local edge i
    r = mesh.refine_edge
    tris = []
    labels = []
    for i in range(3):
        tris.append(
            np.column_stack([t[:, i], m[:, (i + 2) % 3], m[:, (i + 1) % 3]])
        )
        labels.append((r - i) % 3)
    tris.append(m)
    labels.append(r)
    new_tris = np.stack(tris, axis=1).reshape(-1, 3)
    new_labels = np.stack(labels, axis=1).reshape(-1)
    return TriMesh(vertices, new_tris, new_labels)


def bisect(mesh, marked):
    """Newest-vertex bisection of the marked triangles with conforming closure.

    Children are stored peak-first (refinement-edge label 0).  Deterministic:
    triangles are processed in index order, midpoints numbered by global edge
    index.
    """
    marked = np.asarray(sorted(set(int(i) for i in marked)), dtype=np.int64)
    if marked.size == 0:
        return mesh
    if marked.min() < 0 or marked.max() >= mesh.num_triangles:
        raise IndexError("marked triangle index out of range")

    ref_edge = mesh.tri_edge[np.arange(mesh.num_triangles), mesh.refine_edge]
    edge_marked = np.zeros(mesh.num_edges, dtype=bool)
    edge_marked[ref_edge[marked]] = True
    # closure: a triangle with any marked edge must have its refinement
    # edge marked; iterate to the fixed point
    while True:
        touched = edge_marked[mesh.tri_edge].any(axis=1)
        need = touched & ~edge_marked[ref_edge]
        if not need.any():
            break
        edge_marked[ref_edge[need]] = True

    cut = np.nonzero(edge_marked)[0]
    mid_of_edge = np.full(mesh.num_edges, -1, dtype=np.int64)
    mid_of_edge[cut] = mesh.num_vertices + np.arange(cut.size)
    mids = 0.5 * (mesh.vertices[mesh.edges[cut, 0]] + mesh.vertices[mesh.edges[cut, 1]])
    vertices = np.vstack([mesh.vertices, mids])

    tris = []
    labels = []

    for ti in range(mesh.num_triangles):
        r = int(mesh.refine_edge[ti])
        ge = int(mesh.tri_edge[ti, r])
        if not edge_marked[ge]:
            tris.append(tuple(mesh.triangles[ti]))
            labels.append(r)
            continue
        p = int(mesh.triangles[ti, r])
        a = int(mesh.triangles[ti, (r + 1) % 3])
        b = int(mesh.triangles[ti, (r + 2) % 3])
        edge_pa = int(mesh.tri_edge[ti, (r + 2) % 3])  # edge opposite b
        edge_pb = int(mesh.tri_edge[ti, (r + 1) % 3])  # edge opposite a
        m = int(mid_of_edge[ge])
        # child containing a, then child containing b
        if edge_marked[edge_pa]:
            m2 = int(mid_of_edge[edge_pa])
            tris.append((m2, m, p))
            labels.append(0)
            tris.append((m2, a, m))
            labels.append(0)
        else:
            tris.append((m, p, a))
            labels.append(0)
        if edge_marked[edge_pb]:
            m2 = int(mid_of_edge[edge_pb])
            tris.append((m2, m, b))
            labels.append(0)
            tris.append((m2, p, m))
            labels.append(0)
        else:
            tris.append((m, b, p))
            labels.append(0)

    return TriMesh(vertices, np.array(tris), np.array(labels))


# validation and I/O -------------------------------------------------------


def validate_trimesh(mesh, min_angle_deg=45.0):
    """Check all TriMesh invariants; raises AssertionError on violation."""
    areas = mesh.signed_areas()
    assert (areas > 0).all(), "triangle with non-positive signed area"
    counts = np.zeros(mesh.num_edges, dtype=np.int64)
    np.add.at(counts, mesh.tri_edge.ravel(), 1)
    assert ((counts == 1) | (counts == 2)).all(), "non-conforming edge"
    assert (counts[mesh.boundary_edge] == 1).all()
    assert (counts[~mesh.boundary_edge] == 2).all()
    euler = mesh.num_vertices - mesh.num_edges + mesh.num_triangles
    assert euler == 1, f"Euler relation violated: {euler}"
    assert (mesh.edges[:, 0] < mesh.edges[:, 1]).all(), "edge not canonical"
    assert mesh.min_angle() >= np.deg2rad(min_angle_deg) - 1e-9
    # stored adjacency consistent with triangle windings
    for e in range(mesh.num_edges):
        adj = [t for t in mesh.edge_tri[e] if t >= 0]
        for t in adj:
            assert e in mesh.tri_edge[t]
    return True


def dump_trimesh(mesh, path):
    """Plain-text dump: header 'V E T', vertex lines, triangle lines."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{mesh.num_vertices} {mesh.num_edges} {mesh.num_triangles}\n")
        for x, y in mesh.vertices:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        for (a, b, c), r in zip(mesh.triangles, mesh.refine_edge):
            f.write(f"{a} {b} {c} {r}\n")


def load_trimesh(path):
    with open(path, encoding="utf-8") as f:
        nv, ne, nt = map(int, f.readline().split())
        vertices = np.array(
            [[float(v) for v in f.readline().split()] for _ in range(nv)]
        )
        rows = [[int(v) for v in f.readline().split()] for _ in range(nt)]
    rows = np.array(rows)
    mesh = TriMesh(vertices, rows[:, :3], rows[:, 3])
    if mesh.num_edges != ne:
        raise ValueError("edge count mismatch in mesh dump")
    return mesh
