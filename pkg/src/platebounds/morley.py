"""Morley element: basis construction, assembly, interpolation, evaluation.

Degrees of freedom are vertex point values and mean normal derivatives over
edges (equivalently the edge-midpoint normal derivative, since the normal
derivative of a quadratic is linear along an edge).  Edge DOFs use the
canonical global normal: the low-to-high-vertex tangent rotated by -90
degrees, so no per-element sign bookkeeping is needed.

Basis functions are built on the physical element by a 6x6 solve in
centroid-centered, diameter-scaled monomials {1, xi, eta, xi^2, xi*eta,
eta^2}; the scaling keeps the system condition number mesh-independent.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import quadrature as quad

__all__ = [
    "DofMap",
    "ElementMatrices",
    "MorleySpace",
    "MorleyField",
    "FunctionProbe",
    "morley_basis",
    "local_matrices",
    "assemble",
    "interpolate_Ih",
    "identity_terms",
]

DEGENERATE_REL_AREA = 1e-14


class DofMap:
    """Global Morley DOF numbering: vertex values then edge normal means.

    Global DOF id of vertex v is v; of edge e is V + e.  Boundary vertex and
    boundary edge DOFs are constrained to zero; free DOFs are renumbered
    densely in [0, n_free).
    """

    def __init__(self, mesh):
        nv, ne = mesh.num_vertices, mesh.num_edges
        self.mesh = mesh
        self.free_mask = np.concatenate(
            [~mesh.boundary_vertex, ~mesh.boundary_edge]
        )
        self.n_free = int(self.free_mask.sum())
        self.free_index = np.full(nv + ne, -1, dtype=np.int64)
        self.free_index[self.free_mask] = np.arange(self.n_free)

    def vertex_dof(self, v):
        return int(v)

    def edge_dof(self, e):
        return self.mesh.num_vertices + int(e)


@dataclass
class ElementMatrices:
    """6x6 local stiffness and mass, DOF order: 3 vertex values, 3 edge DOFs."""

    K: np.ndarray
    M: np.ndarray


def _mono_val(xi, eta):
    """Scaled-monomial values, stacked on the last axis: (..., 6)."""
    one = np.ones_like(xi)
    return np.stack([one, xi, eta, xi * xi, xi * eta, eta * eta], axis=-1)


def _mono_grad(xi, eta):
    """Gradients in scaled coordinates: (..., 6, 2)."""
    z = np.zeros_like(xi)
    o = np.ones_like(xi)
    gx = np.stack([z, o, z, 2 * xi, eta, z], axis=-1)
    gy = np.stack([z, z, o, z, xi, 2 * eta], axis=-1)
    return np.stack([gx, gy], axis=-1)


def morley_basis(coords, normals=None):
    """Monomial-coefficient matrix of the six basis functions of one triangle.

    coords: (3, 2) vertex coordinates, counterclockwise.  normals: optional
    (3, 2) unit edge normals (edge i opposite vertex i); defaults to the
    canonical low-to-high convention within the local numbering.  Row i of
    the result gives the coefficients of basis function i in the scaled
    monomial basis.
    """
    coords = np.asarray(coords, dtype=float)
    Phi, centroid, h = _batched_basis(coords[None], None if normals is None else np.asarray(normals, float)[None])
    return Phi[0]


def _canonical_local_normals(coords):
    """Canonical normals for standalone triangles: edge i runs from its
    lower local vertex index to the higher one."""
    normals = np.empty((coords.shape[0], 3, 2))
    for i in range(3):
        a, b = sorted(((i + 1) % 3, (i + 2) % 3))
        t = coords[:, b] - coords[:, a]
        t = t / np.hypot(t[:, 0], t[:, 1])[:, None]
        normals[:, i, 0] = t[:, 1]
        normals[:, i, 1] = -t[:, 0]
    return normals


def _batched_basis(coords, normals=None):
    """Basis coefficients for a batch of triangles.

    coords: (T, 3, 2); normals: (T, 3, 2) or None.  Returns (Phi, centroid,
    h) with Phi of shape (T, 6, 6), row i the coefficients of basis i.
    """
    d1 = coords[:, 1] - coords[:, 0]
    d2 = coords[:, 2] - coords[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    side = np.stack(
        [coords[:, (i + 2) % 3] - coords[:, (i + 1) % 3] for i in range(3)], axis=1
    )
    h = np.hypot(side[..., 0], side[..., 1]).max(axis=1)
    if (np.abs(area) <= DEGENERATE_REL_AREA * h * h).any():
        raise ValueError("degenerate triangle in basis construction")
    centroid = coords.mean(axis=1)

    if normals is None:
        normals = _canonical_local_normals(coords)

    sc = (coords - centroid[:, None, :]) / h[:, None, None]
    D = np.empty((coords.shape[0], 6, 6))
    D[:, :3, :] = _mono_val(sc[..., 0], sc[..., 1])
    mids = 0.5 * (coords[:, [1, 2, 0]] + coords[:, [2, 0, 1]])  # midpoint of edge i
    sm = (mids - centroid[:, None, :]) / h[:, None, None]
    g = _mono_grad(sm[..., 0], sm[..., 1]) / h[:, None, None, None]
    D[:, 3:, :] = np.einsum("temd,ted->tem", g, normals)
    Phi = np.linalg.inv(D).transpose(0, 2, 1)
    return Phi, centroid, h


class MorleySpace:
    """Morley finite element space on a triangulation.

    Caches the per-element basis and geometry; the heavy operations
    (assembly, interpolation, estimator inputs) all start from here.
    """

    def __init__(self, mesh, flip_edges=None):
        self.mesh = mesh
        self.dofmap = DofMap(mesh)
        coords = mesh.triangle_coords()
        normals = mesh.edge_normals()[mesh.tri_edge]
        if flip_edges is not None:
            sign = np.ones(mesh.num_edges)
            sign[list(flip_edges)] = -1.0
            normals = normals * sign[mesh.tri_edge][:, :, None]
        self.Phi, self.centroid, self.h = _batched_basis(coords, normals)
        self.area = mesh.signed_areas()
        self._coords = coords

    # local quantities ----------------------------------------------------

    def basis_hessians(self):
        """Constant physical Hessians of the basis: (T, 6, 3) as (xx, xy, yy)."""
        c = self.Phi
        h2 = (self.h * self.h)[:, None]
        return np.stack(
            [2 * c[:, :, 3] / h2, c[:, :, 4] / h2, 2 * c[:, :, 5] / h2], axis=-1
        )

    def _scaled_points(self, bary):
        pts = quad.tri_points(self._coords, bary)
        return (pts - self.centroid[:, None, :]) / self.h[:, None, None], pts

    def basis_values(self, bary):
        """Basis values at barycentric points: (T, Q, 6)."""
        sc, _ = self._scaled_points(bary)
        return np.einsum("tqm,tim->tqi", _mono_val(sc[..., 0], sc[..., 1]), self.Phi)

    def basis_gradients(self, bary):
        """Physical basis gradients at barycentric points: (T, Q, 6, 2)."""
        sc, _ = self._scaled_points(bary)
        g = _mono_grad(sc[..., 0], sc[..., 1]) / self.h[:, None, None, None]
        return np.einsum("tqmd,tim->tqid", g, self.Phi)

    def local_matrices(self, tau):
        """Batched 6x6 stiffness and mass matrices: (T, 6, 6) each."""
        H = self.basis_hessians()
        w = np.array([1.0, 2.0, 1.0])
        K = np.einsum("tia,tja,a->tij", H, H, w) * self.area[:, None, None]
        if tau > 0:
            g = self.basis_gradients(quad.TRI_DEG2_BARY)
            Kg = np.einsum("q,tqid,tqjd->tij", quad.TRI_DEG2_W, g, g)
            K = K + tau * self.area[:, None, None] * Kg
        v = self.basis_values(quad.TRI_DEG5_BARY)
        M = np.einsum("q,tqi,tqj->tij", quad.TRI_DEG5_W, v, v) * self.area[:, None, None]
        K = 0.5 * (K + K.transpose(0, 2, 1))
        M = 0.5 * (M + M.transpose(0, 2, 1))
        return K, M

    def global_dofs(self):
        """(T, 6) global DOF ids, vertex DOFs then edge DOFs."""
        return np.concatenate(
            [self.mesh.triangles, self.mesh.num_vertices + self.mesh.tri_edge], axis=1
        )

    def assemble(self, tau, eliminate_bc=True):
        """Global stiffness A and mass B in CSR form.

        With eliminate_bc, constrained rows and columns are dropped and the
        matrices have dimension n_free; otherwise all V+E DOFs are kept
        (used by the patch test).
        """
        K, M = self.local_matrices(tau)
        gdof = self.global_dofs()
        if eliminate_bc:
            if self.dofmap.n_free == 0:
                raise ValueError("mesh has no free DOFs")
            gid = self.dofmap.free_index[gdof]
        else:
            gid = gdof
        n = self.dofmap.n_free if eliminate_bc else self.dofmap.free_index.size
        rows = np.repeat(gid, 6, axis=1).ravel()
        cols = np.tile(gid, (1, 6)).ravel()
        keep = (rows >= 0) & (cols >= 0)
        A = sp.coo_matrix(
            (K.ravel()[keep], (rows[keep], cols[keep])), shape=(n, n)
        ).tocsr()
        B = sp.coo_matrix(
            (M.ravel()[keep], (rows[keep], cols[keep])), shape=(n, n)
        ).tocsr()
        A.sum_duplicates()
        B.sum_duplicates()
        return A, B

    def interpolate(self, probe):
        """Morley interpolant: vertex values and edge-mean normal derivatives
        of the probe; constrained DOFs are set to zero."""
        mesh = self.mesh
        vvals = np.asarray(probe.value(mesh.vertices), dtype=float)
        x, w = quad.gauss01(5)
        p0 = mesh.vertices[mesh.edges[:, 0]]
        p1 = mesh.vertices[mesh.edges[:, 1]]
        pts = p0[:, None, :] + x[None, :, None] * (p1 - p0)[:, None, :]
        grads = np.asarray(probe.gradient(pts.reshape(-1, 2))).reshape(
            mesh.num_edges, x.size, 2
        )
        normals = mesh.edge_normals()
        evals = np.einsum("q,eqd,ed->e", w, grads, normals)
        full = np.concatenate([vvals, evals])
        coeffs = full[self.dofmap.free_mask]
        return MorleyField(self, coeffs)


class MorleyField:
    """A Morley function: coefficient vector over the free DOFs."""

    def __init__(self, space, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.dofmap.n_free,):
            raise ValueError("coefficient length must equal n_free")
        self.space = space
        self.coeffs = coeffs

    def local_dofs(self):
        """(T, 6) element DOF values, zeros at constrained DOFs."""
        full = np.zeros(self.space.dofmap.free_index.size)
        full[self.space.dofmap.free_mask] = self.coeffs
        return full[self.space.global_dofs()]

    def local_monomial_coeffs(self):
        """(T, 6) coefficients of the local quadratic in scaled monomials."""
        return np.einsum("ti,tim->tm", self.local_dofs(), self.space.Phi)

    def element_hessians(self):
        """(T, 3) constant physical Hessians per element as (xx, xy, yy)."""
        return np.einsum("ti,tia->ta", self.local_dofs(), self.space.basis_hessians())

    def values_at(self, bary):
        """(T, Q) values at barycentric points on every element."""
        return np.einsum("tqi,ti->tq", self.space.basis_values(bary), self.local_dofs())

    def gradients_at(self, bary):
        """(T, Q, 2) gradients at barycentric points on every element."""
        return np.einsum(
            "tqid,ti->tqd", self.space.basis_gradients(bary), self.local_dofs()
        )

    def evaluate(self, element, bary):
        """Value, gradient and Hessian of the local quadratic at one point."""
        t = int(element)
        if not 0 <= t < self.space.mesh.num_triangles:
            raise IndexError("element index out of range")
        bary = np.asarray(bary, dtype=float).reshape(3)
        coords = self.space._coords[t]
        pt = bary @ coords
        xi, eta = (pt - self.space.centroid[t]) / self.space.h[t]
        c = self.local_monomial_coeffs()[t]
        value = c @ np.array([1, xi, eta, xi * xi, xi * eta, eta * eta])
        g = _mono_grad(np.asarray(xi), np.asarray(eta)) / self.space.h[t]
        grad = np.einsum("md,m->d", g, c)
        h2 = self.space.h[t] ** 2
        hess = np.array(
            [
                [2 * c[3] / h2, c[4] / h2],
                [c[4] / h2, 2 * c[5] / h2],
            ]
        )
        return float(value), np.asarray(grad, float), hess

    def b_norm_sq(self):
        v = self.values_at(quad.TRI_DEG5_BARY)
        return float(
            np.einsum("q,tq,t->", quad.TRI_DEG5_W, v * v, self.space.area)
        )

    def to_csv(self, path):
        """Coefficient dump `dof_id,value` over free DOFs."""
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("dof_id,value\n")
            for i, v in enumerate(self.coeffs):
                f.write(f"{i},{v!r}\n")


class FunctionProbe:
    """Probe wrapping vectorized callables value/grad/hess on (N, 2) points."""

    def __init__(self, value, gradient=None, hessian=None):
        self._value = value
        self._gradient = gradient
        self._hessian = hessian

    def value(self, pts):
        return self._value(np.asarray(pts, float))

    def gradient(self, pts):
        if self._gradient is None:
            raise ValueError("probe has no gradient")
        return self._gradient(np.asarray(pts, float))

    def hessian(self, pts):
        """(N, 3) Hessian entries (xx, xy, yy)."""
        if self._hessian is None:
            raise ValueError("probe has no hessian")
        return self._hessian(np.asarray(pts, float))


# module-level operation wrappers -----------------------------------------


def local_matrices(coords, tau, normals=None):
    """ElementMatrices for a standalone triangle."""
    coords = np.asarray(coords, dtype=float)[None]
    normals = None if normals is None else np.asarray(normals, float)[None]
    Phi, centroid, h = _batched_basis(coords, normals)
    space = object.__new__(MorleySpace)
    space.Phi, space.centroid, space.h = Phi, centroid, h
    space._coords = coords
    d1 = coords[:, 1] - coords[:, 0]
    d2 = coords[:, 2] - coords[:, 0]
    space.area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    K, M = MorleySpace.local_matrices(space, tau)
    return ElementMatrices(K=K[0], M=M[0])


def assemble(mesh, tau):
    """Assembled (A, B, dofmap) with clamped boundary DOFs eliminated."""
    space = MorleySpace(mesh)
    A, B = space.assemble(tau)
    return A, B, space.dofmap


def interpolate_Ih(mesh, probe):
    """Morley interpolant of the probe on the given mesh."""
    return MorleySpace(mesh).interpolate(probe)


def identity_terms(space, tau, lambda_h, u_h, probe, lambda_ref):
    """Diagnostic decomposition of the eigenvalue error.

    Returns (T1, T2, T3, T4) where
      T1 = ||u - u_h||_h^2
      T2 = -lambda_h ||u - u_h||_b^2
      T3 = -2 lambda_h b(u - I_h u, u_h)
      T4 = 2 a_h(u - I_h u, u_h)
    and T1 + T2 + T3 + T4 approximates lambda_ref - lambda_h when the probe
    is a good reference eigenfunction with unit b-norm.
    """
    bary, w = quad.TRI_DEG5_BARY, quad.TRI_DEG5_W
    pts = quad.tri_points(space._coords, bary)
    flat = pts.reshape(-1, 2)
    T, Q = pts.shape[0], bary.shape[0]

    u = np.asarray(probe.value(flat), float).reshape(T, Q)
    gu = np.asarray(probe.gradient(flat), float).reshape(T, Q, 2)
    hu = np.asarray(probe.hessian(flat), float).reshape(T, Q, 3)
    area = space.area

    bnorm2 = float(np.einsum("q,tq,t->", w, u * u, area))
    if not (1 - 1e-6) ** 2 <= bnorm2 <= (1 + 1e-6) ** 2:
        raise ValueError(f"probe b-norm {np.sqrt(bnorm2)} not within 1e-6 of 1")

    uh = u_h.values_at(bary)
    guh = u_h.gradients_at(bary)
    huh = u_h.element_hessians()[:, None, :]  # constant per element

    sign = np.sign(np.einsum("q,tq,tq,t->", w, u, uh, area)) or 1.0
    u, gu, hu = sign * u, sign * gu, sign * hu

    ih = space.interpolate(
        _SignedProbe(probe, sign)
    )
    uih = ih.values_at(bary)
    guih = ih.gradients_at(bary)
    huih = ih.element_hessians()[:, None, :]

    fro_w = np.array([1.0, 2.0, 1.0])

    dh = hu - huh
    T1 = float(np.einsum("q,tqa,a,t->", w, dh * dh, fro_w, area))
    if tau > 0:
        dg = gu - guh
        T1 += tau * float(np.einsum("q,tqd,t->", w, (dg * dg).sum(-1), area))

    du = u - uh
    T2 = -lambda_h * float(np.einsum("q,tq,t->", w, du * du, area))

    T3 = -2 * lambda_h * float(np.einsum("q,tq,tq,t->", w, u - uih, uh, area))

    dih = hu - huih
    T4 = 2 * float(np.einsum("q,tqa,tqa,a,t->", w, dih, np.broadcast_to(huh, dih.shape), fro_w, area))
    if tau > 0:
        T4 += 2 * tau * float(
            np.einsum("q,tqd,tqd,t->", w, gu - guih, guh, area)
        )
    return T1, T2, T3, T4


class _SignedProbe:
    def __init__(self, probe, sign):
        self.probe = probe
        self.sign = sign

    def value(self, pts):
        return self.sign * np.asarray(self.probe.value(pts), float)

    def gradient(self, pts):
        return self.sign * np.asarray(self.probe.gradient(pts), float)
