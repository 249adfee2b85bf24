"""Residual error estimator, Dörfler marking and the adaptive eigenvalue loop.

The element indicator for a computed eigenpair (lambda_h, u_h) is

    eta^2(k) = h_k^4 ||lambda_h u_h||^2_{0,k}
             + [tau > 0] h_k^2 tau |u_h|^2_{1,k}
             + sum_{F in dk} h_F ||[Hess(u_h) nu_F]||^2_{0,F},

with h_k the longest edge of k, h_F the edge length, nu_F the edge tangent,
jumps across interior edges and plain traces on boundary edges.  Since the
Hessian is constant per element, each edge term is h_F * |F| * |jump|^2.
"""

import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import quadrature as quad
from .eig import smallest_eigs
from .mesh import bisect, build_initial_lshape, build_initial_square
from .morley import MorleyField, MorleySpace
from .records import RunRecord

__all__ = [
    "ElementEstimate",
    "AdaptiveConfig",
    "RunRecord",
    "eta_local",
    "mark_dorfler",
    "adaptive_loop",
]


@dataclass
class ElementEstimate:
    """Per-element squared indicators and their sum."""

    per_element: np.ndarray
    total: float


@dataclass
class AdaptiveConfig:
    """Parameters of one adaptive eigenvalue run."""

    domain: str = "lshape"
    tau: float = 0.0
    theta: float = 0.25
    j: int = 1  # target eigenvalue index (1-based)
    k: int = 2  # number of eigenvalues solved per iteration
    max_dof: int = 150_000
    initial_n: Optional[int] = None  # squares per unit side; default h = sqrt(2)/32
    eig_tol: float = 1e-9
    seed: int = 42
    dump_mesh: Optional[str] = None  # path prefix for per-iteration mesh dumps

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        if self.j < 1 or self.k < self.j:
            raise ValueError("need 1 <= j <= k")


def eta_local(u_h, lambda_h, tau):
    """Squared error indicators for a Morley eigenpair, one per triangle."""
    space = u_h.space
    mesh = space.mesh
    if u_h.coeffs.shape != (space.dofmap.n_free,):
        raise ValueError("field does not match the mesh/dofmap")
    h_k = mesh.diameters()
    areas = np.abs(mesh.signed_areas())

    # volume term: h^4 * lambda^2 * ||u||^2 on each element (degree-5 exact)
    vals = u_h.values_at(quad.TRI_DEG5_BARY)
    u_sq = np.einsum("q,tq->t", quad.TRI_DEG5_W, vals * vals) * areas
    eta2 = h_k**4 * lambda_h**2 * u_sq

    # tension term: h^2 * tau * |u|_1^2 (gradient linear, midpoint rule exact)
    if tau > 0:
        g = u_h.gradients_at(quad.TRI_DEG2_BARY)
        g_sq = np.einsum("q,tqd->t", quad.TRI_DEG2_W, g * g) * areas
        eta2 = eta2 + h_k**2 * tau * g_sq

    # edge terms: jump (or boundary trace) of Hess(u_h) * tangent
    H = u_h.element_hessians()  # (T, 3) as (xx, xy, yy)
    normals = mesh.edge_normals()
    tangents = np.column_stack([-normals[:, 1], normals[:, 0]])
    lengths = mesh.edge_lengths()
    # Hess * tangent per (element, edge): 2-vector
    t0, t1 = mesh.edge_tri[:, 0], mesh.edge_tri[:, 1]

    def hess_dot_tangent(tri_ids):
        Ht = H[tri_ids]
        return np.column_stack(
            [
                Ht[:, 0] * tangents[:, 0] + Ht[:, 1] * tangents[:, 1],
                Ht[:, 1] * tangents[:, 0] + Ht[:, 2] * tangents[:, 1],
            ]
        )

    flux0 = hess_dot_tangent(t0)
    flux1 = np.where((t1 >= 0)[:, None], hess_dot_tangent(np.maximum(t1, 0)), 0.0)
    jump = flux0 - flux1  # boundary edges: plain trace (flux1 = 0)
    # h_F * ||jump||^2_{0,F} = h_F * |F| * |jump|^2 with h_F = |F|
    edge_term = lengths**2 * (jump * jump).sum(axis=1)
    # scatter each edge's contribution to its adjacent triangles
    contrib = np.zeros(mesh.num_triangles)
    np.add.at(contrib, t0, edge_term)
    interior = t1 >= 0
    np.add.at(contrib, t1[interior], edge_term[interior])
    eta2 = eta2 + contrib

    return ElementEstimate(per_element=eta2, total=float(eta2.sum()))


def mark_dorfler(estimates, theta):
    """Minimal element set whose indicator mass reaches theta * total.

    Elements are sorted by eta^2 descending with ties broken by ascending
    index, and the shortest qualifying prefix is returned.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    eta2 = np.asarray(estimates.per_element, dtype=float)
    total = eta2.sum()
    if total <= 0.0:
        return np.array([], dtype=np.int64)
    # argsort on (-eta2) is stable, so ties keep ascending element index
    order = np.argsort(-eta2, kind="stable")
    csum = np.cumsum(eta2[order])
    count = int(np.searchsorted(csum, theta * total - 1e-15 * total)) + 1
    return np.sort(order[:count])


def _initial_mesh(config):
    n = config.initial_n
    if config.domain == "square":
        return build_initial_square(16 if n is None else n)
    if config.domain == "lshape":
        return build_initial_lshape(16 if n is None else n)
    raise ValueError(f"unknown domain {config.domain!r}")


def adaptive_loop(config):
    """Algorithm: solve -> estimate -> mark -> bisect until Ndof > max_dof.

    Returns one RunRecord per iteration (iteration 0 is the initial mesh).
    The estimator and marking always target eigenpair j of the run.
    """
    mesh = _initial_mesh(config)
    records: List[RunRecord] = []
    iteration = 0
    while True:
        t0 = time.perf_counter()
        space = MorleySpace(mesh)
        A, B = space.assemble(config.tau)
        try:
            pairs = smallest_eigs(
                A, B, config.k, tol=config.eig_tol, seed=config.seed
            )
        except Exception as exc:
            raise RuntimeError(
                f"eigensolver failed at adaptive iteration {iteration}"
            ) from exc
        u_h = MorleyField(space, pairs[config.j - 1].vector)
        lambda_j = pairs[config.j - 1].value
        est = eta_local(u_h, lambda_j, config.tau)
        records.append(
            RunRecord(
                method="morley",
                domain=config.domain,
                tau=config.tau,
                iteration=iteration,
                h=float(mesh.diameters().max()),
                ndof=space.dofmap.n_free,
                lambdas=[p.value for p in pairs],
                eta2=est.total,
                seconds=time.perf_counter() - t0,
            )
        )
        if config.dump_mesh:
            from .mesh import dump_trimesh

            dump_trimesh(mesh, f"{config.dump_mesh}.{iteration:03d}.txt")
        if space.dofmap.n_free >= config.max_dof:
            break
        marked = mark_dorfler(est, config.theta)
        if marked.size == 0:
            break
        mesh = bisect(mesh, marked)
        iteration += 1
    return records
