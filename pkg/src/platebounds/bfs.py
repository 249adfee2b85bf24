"""Bogner-Fox-Schmit bicubic rectangle element (conforming upper bounds).

Each node carries four DOFs: value, x-derivative, y-derivative and mixed
xy-derivative.  The clamped condition constrains all four at boundary nodes.
Shape functions are tensor products of 1D cubic Hermite polynomials; on the
uniform grids used here every cell shares one pair of local matrices.
"""

import numpy as np
import scipy.sparse as sp

from .quadrature import gauss01

__all__ = ["BfsDofMap", "BfsField", "assemble_bfs", "bfs_eigen_table"]


class BfsDofMap:
    """Per-node DOFs (value, dx, dy, dxy); global id = 4*node + component."""

    def __init__(self, rmesh):
        self.rmesh = rmesh
        nn = rmesh.num_nodes
        self.free_mask = np.repeat(~rmesh.boundary_node, 4)
        self.n_free = int(self.free_mask.sum())
        self.free_index = np.full(4 * nn, -1, dtype=np.int64)
        self.free_index[self.free_mask] = np.arange(self.n_free)


def _hermite_1d(s, h):
    """Cubic Hermite values and first/second derivatives at s in [0,1].

    Returns (val, d1, d2) of shape (4, len(s)); rows are (value-left,
    slope-left, value-right, slope-right); derivatives are with respect to
    the physical coordinate x = s*h.
    """
    s = np.asarray(s, dtype=float)
    val = np.stack(
        [
            1 - 3 * s**2 + 2 * s**3,
            h * (s - 2 * s**2 + s**3),
            3 * s**2 - 2 * s**3,
            h * (-(s**2) + s**3),
        ]
    )
    d1 = np.stack(
        [
            (-6 * s + 6 * s**2) / h,
            1 - 4 * s + 3 * s**2,
            (6 * s - 6 * s**2) / h,
            -2 * s + 3 * s**2,
        ]
    )
    d2 = np.stack(
        [
            (-6 + 12 * s) / h**2,
            (-4 + 6 * s) / h,
            (6 - 12 * s) / h**2,
            (-2 + 6 * s) / h,
        ]
    )
    return val, d1, d2


# local DOF layout: node order (LL, LR, UR, UL) x (value, dx, dy, dxy).
# tensor index: x-factor index ix in {0:left-val,1:left-slope,2:right-val,
# 3:right-slope}, same for y; (ix, iy) -> (node, component)
_IDX = np.empty((4, 4), dtype=np.int64)
for _ix in range(4):
    for _iy in range(4):
        node_x = _ix // 2  # 0 left, 1 right
        node_y = _iy // 2  # 0 bottom, 1 top
        node = {(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}[(node_x, node_y)]
        comp = (_ix % 2) + 2 * (_iy % 2)  # 0 val, 1 dx, 2 dy, 3 dxy
        _IDX[_ix, _iy] = 4 * node + comp


def _local_matrices(hx, hy, tau, npts=4):
    """16x16 stiffness and mass for one cell of a uniform grid."""
    xs, wx = gauss01(npts)
    vx, dx1, dx2 = _hermite_1d(xs, hx)
    vy, dy1, dy2 = _hermite_1d(xs, hy)
    wx = wx * hx
    wy = wx / hx * hy

    def mat1d(fa, fb, w):
        return np.einsum("iq,jq,q->ij", fa, fb, w)

    Mx, My = mat1d(vx, vx, wx), mat1d(vy, vy, wy)
    Sx, Sy = mat1d(dx1, dx1, wx), mat1d(dy1, dy1, wy)
    Hx, Hy = mat1d(dx2, dx2, wx), mat1d(dy2, dy2, wy)

    def tensor(ax, ay):
        full = np.einsum("ik,jl->ijkl", ax, ay)
        out = np.zeros((16, 16))
        for ix in range(4):
            for iy in range(4):
                for kx in range(4):
                    for ky in range(4):
                        out[_IDX[ix, iy], _IDX[kx, ky]] += full[ix, iy, kx, ky]
        return out

    K = tensor(Hx, My) + 2 * tensor(Sx, Sy) + tensor(Mx, Hy)
    if tau > 0:
        K = K + tau * (tensor(Sx, My) + tensor(Mx, Sy))
    M = tensor(Mx, My)
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    return K, M


def assemble_bfs(rmesh, tau):
    """Global (A, B, dofmap) with all boundary-node DOFs eliminated."""
    if rmesh.num_cells == 0:
        raise ValueError("empty rectangle mesh")
    dofmap = BfsDofMap(rmesh)
    K, M = _local_matrices(rmesh.hx, rmesh.hy, tau)
    # local DOF c -> global DOF 4*cells[:, c//4] + c%4
    comp = np.arange(16) % 4
    node = np.arange(16) // 4
    gdof = 4 * rmesh.cells[:, node] + comp[None, :]
    gid = dofmap.free_index[gdof]
    n = dofmap.n_free
    rows = np.repeat(gid, 16, axis=1).ravel()
    cols = np.tile(gid, (1, 16)).ravel()
    keep = (rows >= 0) & (cols >= 0)
    vals_K = np.broadcast_to(K.ravel(), (rmesh.num_cells, 256)).ravel()
    vals_M = np.broadcast_to(M.ravel(), (rmesh.num_cells, 256)).ravel()
    A = sp.coo_matrix((vals_K[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    B = sp.coo_matrix((vals_M[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    A.sum_duplicates()
    B.sum_duplicates()
    # duplicate summation order can differ between (i, j) and (j, i);
    # averaging with the transpose restores bitwise symmetry
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    return A.tocsr(), B.tocsr(), dofmap


class BfsField:
    """Global BFS function; evaluates value, gradient and Hessian anywhere."""

    def __init__(self, rmesh, dofmap, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (dofmap.n_free,):
            raise ValueError("coefficient length must equal n_free")
        self.rmesh = rmesh
        self.dofmap = dofmap
        full = np.zeros(4 * rmesh.num_nodes)
        full[dofmap.free_mask] = coeffs
        self._full = full
        # cell lookup grid
        self._inv_h = 1.0 / rmesh.hx
        cols = int(round(1.0 / rmesh.hx))
        self._grid = np.full((cols, cols), -1, dtype=np.int64)
        idx = np.rint(rmesh.nodes[rmesh.cells[:, 0]] * self._inv_h).astype(int)
        self._grid[idx[:, 0], idx[:, 1]] = np.arange(rmesh.num_cells)

    def _locate(self, pts):
        eps = 1e-12
        ij = np.floor(pts * self._inv_h - eps).astype(int)
        ij = np.clip(ij, 0, self._grid.shape[0] - 1)
        cells = self._grid[ij[:, 0], ij[:, 1]]
        if (cells < 0).any():
            raise ValueError("point outside the rectangle mesh")
        s = pts * self._inv_h - ij
        return cells, s

    def _eval(self, pts, deriv):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        cells, s = self._locate(pts)
        vx, dx1, dx2 = _hermite_1d(s[:, 0], self.rmesh.hx)
        vy, dy1, dy2 = _hermite_1d(s[:, 1], self.rmesh.hy)
        fx = {0: vx, 1: dx1, 2: dx2}[deriv[0]]
        fy = {0: vy, 1: dy1, 2: dy2}[deriv[1]]
        comp = np.arange(16) % 4
        node = np.arange(16) // 4
        gdof = 4 * self.rmesh.cells[cells][:, node] + comp[None, :]
        c = self._full[gdof]  # (N, 16)
        shape = np.empty((pts.shape[0], 16))
        for ix in range(4):
            for iy in range(4):
                shape[:, _IDX[ix, iy]] = fx[ix] * fy[iy]
        return (c * shape).sum(axis=1)

    def value(self, pts):
        return self._eval(pts, (0, 0))

    def gradient(self, pts):
        return np.column_stack([self._eval(pts, (1, 0)), self._eval(pts, (0, 1))])

    def hessian(self, pts):
        """(N, 3) Hessian entries (xx, xy, yy)."""
        return np.column_stack(
            [self._eval(pts, (2, 0)), self._eval(pts, (1, 1)), self._eval(pts, (0, 2))]
        )

    def b_normalize(self, B):
        """Rescale in place so the mass-inner-product norm is 1.

        The sign is fixed so the largest-magnitude free coefficient is
        positive (same convention as the eigensolver).
        """
        c = self._full[self.dofmap.free_mask]
        nrm = np.sqrt(c @ (B @ c))
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero field")
        sign = 1.0 if c[np.argmax(np.abs(c))] >= 0 else -1.0
        self._full *= sign / nrm
        return self


def bfs_eigen_table(domain, tau, levels, k=2, initial_n=None, tol=1e-9, seed=42):
    """Eigenvalues on a sequence of uniformly refined rectangle meshes.

    Returns a list of RunRecord; eigenvalues are conforming upper bounds and
    decrease monotonically with refinement.
    """
    from .eig import smallest_eigs
    from .records import RunRecord
    from .mesh import build_rect_mesh
    import time

    if initial_n is None:
        initial_n = 4 if domain == "square" else 2
    records = []
    n = initial_n
    for level in range(levels):
        t0 = time.perf_counter()
        rmesh = build_rect_mesh(domain, n)
        A, B, dofmap = assemble_bfs(rmesh, tau)
        pairs = smallest_eigs(A, B, k, tol=tol, seed=seed)
        records.append(
            RunRecord(
                method="bfs",
                domain=domain,
                tau=tau,
                iteration=level,
                h=np.sqrt(2.0) * rmesh.hx,
                ndof=dofmap.n_free,
                lambdas=[p.value for p in pairs],
                eta2=None,
                seconds=time.perf_counter() - t0,
            )
        )
        n *= 2
    return records
