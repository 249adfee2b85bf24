"""Acceptance gate: reproduces the reference tables and structural properties.

Each test covers one numbered criterion; tests/conftest.py prints a one-line
pass/fail summary per criterion at the end of the run.  The expensive
experiment runs are computed once per session and shared via lru_cache.

Reference values are the published tables for the clamped-plate eigenvalue
problem on the unit square and the L-shaped domain.  Tolerances are stated
inline with every assertion.
"""

import itertools
from functools import lru_cache

import numpy as np
import pytest

from platebounds.adaptive import (
    AdaptiveConfig,
    ElementEstimate,
    adaptive_loop,
    eta_local,
    mark_dorfler,
)
from platebounds.bfs import BfsField, assemble_bfs
from platebounds.eig import dense_eig_oracle, smallest_eigs
from platebounds.mesh import (
    bisect,
    build_initial_lshape,
    build_initial_square,
    build_rect_mesh,
    validate_trimesh,
)
from platebounds.morley import (
    FunctionProbe,
    MorleyField,
    MorleySpace,
    identity_terms,
)
from platebounds.report import run_uniform_bfs, run_uniform_morley, slope_report

# ----------------------------------------------------------------- reference
# Published uniform-mesh tables; rows are levels h = sqrt(2)/4 ... sqrt(2)/128.

MORLEY_SQUARE = {
    0.0: (
        [691.358, 1049.963, 1221.316, 1275.511, 1290.009, 1293.698],
        [2068.884, 3777.006, 4850.316, 5239.489, 5348.921, 5377.161],
    ),
    10.0: (
        [817.866, 1232.645, 1441.896, 1509.595, 1527.828],
        [2340.295, 4166.902, 5352.314, 5790.254, 5914.201],
    ),
    100.0: (
        [1842.476, 2684.564, 3290.809, 3528.551, 3596.929],
        [4567.218, 7340.279, 9629.657, 10614.330, 10909.494],
    ),
}

MORLEY_LSHAPE = {
    0.0: (
        [2026.507, 3897.606, 5443.844, 6223.547, 6523.545, 6632.571],
        [3077.627, 6579.447, 9332.592, 10541.203, 10916.025, 11018.170],
    ),
    10.0: (
        [2248.988, 4197.762, 5844.849, 6680.697, 7000.825, 7116.044],
        [3401.184, 7026.946, 9933.029, 11225.122, 11627.366, 11736.937],
    ),
    100.0: (
        [4138.743, 6676.425, 9245.708, 10655.575, 11189.250, 11370.095],
        [6220.391, 10808.767, 15103.285, 17239.122, 17931.933, 18121.348],
    ),
}

BFS_LSHAPE = {
    0.0: (
        [7571.752, 6999.898, 6835.442, 6765.112, 6732.515, 6717.205],
        [11513.975, 11107.297, 11062.761, 11056.385, 11055.009, 11054.646],
    ),
    10.0: (
        [8095.501, 7493.573, 7324.642, 7252.764, 7219.475, 7203.839],
        [12267.987, 11830.283, 11784.194, 11777.697, 11776.312, 11775.948],
    ),
    100.0: (
        [12775.204, 11854.535, 11635.005, 11548.155, 11508.527, 11489.938],
        [19033.258, 18270.540, 18198.392, 18189.699, 18188.136, 18187.754],
    ),
}

# lambda1 windows at the first adaptive iteration with Ndof >= 1e5:
# lower edge just below the published value near Ndof 1e5, upper edge the
# finest published upper bound
ADAPTIVE_WINDOWS = {0.0: (6695.0, 6717.205), 10.0: (7180.0, 7203.839), 100.0: (11460.0, 11489.938)}

MORLEY_SQUARE_NDOF = [49, 225, 961, 3969, 16129, 65025]
MORLEY_LSHAPE_NDOF = [33, 161, 705, 2945, 12033, 48641]
BFS_SQUARE_NDOF = [36, 196, 900, 3844]
BFS_LSHAPE_NDOF = [20, 132, 644, 2820]


# ----------------------------------------------------------------- shared runs

@lru_cache(maxsize=None)
def morley_square(tau):
    return run_uniform_morley("square", tau, 6 if tau == 0.0 else 5)


@lru_cache(maxsize=None)
def morley_lshape(tau):
    return run_uniform_morley("lshape", tau, 6)


@lru_cache(maxsize=None)
def bfs_square(tau):
    return run_uniform_bfs("square", tau, 5)


@lru_cache(maxsize=None)
def bfs_lshape(tau):
    return run_uniform_bfs("lshape", tau, 6)


@lru_cache(maxsize=None)
def adaptive_run(tau, j):
    max_dof = 150_000 if j == 1 else 40_000
    cfg = AdaptiveConfig(domain="lshape", tau=tau, theta=0.25, j=j, k=2, max_dof=max_dof)
    return adaptive_loop(cfg)


TAUS = (0.0, 10.0, 100.0)


# ----------------------------------------------------------------- criteria

def test_criterion_01_dof_sequences_exact():
    """Uniform Ndof sequences equal the published ones exactly (zero tolerance)."""
    assert [r.ndof for r in morley_square(0.0)] == MORLEY_SQUARE_NDOF
    assert [r.ndof for r in morley_lshape(0.0)] == MORLEY_LSHAPE_NDOF
    assert [r.ndof for r in bfs_square(0.0)][:4] == BFS_SQUARE_NDOF
    assert [r.ndof for r in bfs_lshape(0.0)][:4] == BFS_LSHAPE_NDOF


def test_criterion_02_square_morley_tables():
    """Square Morley eigenvalues match the tables to ±0.05 absolute or
    1e-4 relative, whichever is larger."""
    failures = []
    for tau in TAUS:
        recs = morley_square(tau)
        for j, column in enumerate(MORLEY_SQUARE[tau]):
            for level, ref in enumerate(column):
                got = recs[level].lambdas[j]
                tol = max(0.05, 1e-4 * abs(ref))
                if abs(got - ref) > tol:
                    failures.append(
                        f"tau={tau:g} lambda{j+1} level {level}: "
                        f"got {got:.3f}, expected {ref} ± {tol:.4g}"
                    )
    assert not failures, "\n".join(failures)


def test_criterion_03_bfs_upper_bounds():
    """BFS: square tau=0 at h=sqrt(2)/64 to ±0.01 (lambda1) / ±0.05 (lambda2);
    all L-shape table values to ±0.5."""
    finest = bfs_square(0.0)[4]
    assert finest.lambdas[0] == pytest.approx(1294.934, abs=0.01)
    assert finest.lambdas[1] == pytest.approx(5386.658, abs=0.05)
    failures = []
    for tau in TAUS:
        recs = bfs_lshape(tau)
        for j, column in enumerate(BFS_LSHAPE[tau]):
            for level, ref in enumerate(column):
                got = recs[level].lambdas[j]
                if abs(got - ref) > 0.5:
                    failures.append(
                        f"lshape tau={tau:g} lambda{j+1} level {level}: "
                        f"got {got:.3f}, expected {ref} ± 0.5"
                    )
    assert not failures, "\n".join(failures)


def test_criterion_04_lshape_morley_tables():
    """L-shape Morley eigenvalues match the tables to 5e-3 relative; the
    monotone increase across levels holds exactly."""
    failures = []
    for tau in TAUS:
        recs = morley_lshape(tau)
        for j in range(2):
            seq = [r.lambdas[j] for r in recs]
            for a, b in zip(seq, seq[1:]):
                assert b > a, f"tau={tau:g} lambda{j+1} not increasing: {a} -> {b}"
            for level, ref in enumerate(MORLEY_LSHAPE[tau][j]):
                got = recs[level].lambdas[j]
                if abs(got - ref) > 5e-3 * abs(ref):
                    failures.append(
                        f"tau={tau:g} lambda{j+1} level {level}: got {got:.3f}, "
                        f"expected {ref} (5e-3 rel = ±{5e-3 * abs(ref):.2f})"
                    )
    assert not failures, "\n".join(failures)


def test_criterion_05_bracketing():
    """Every Morley lambda_j (uniform and adaptive) lies at or below the
    finest BFS lambda_j for the same domain and tau.  Zero violations."""
    failures = []
    for tau in TAUS:
        upper_sq = bfs_square(tau)[-1].lambdas
        upper_ls = bfs_lshape(tau)[-1].lambdas
        for r in morley_square(tau):
            for j in range(2):
                if r.lambdas[j] > upper_sq[j]:
                    failures.append(f"square tau={tau:g} level {r.iteration} lambda{j+1}")
        for r in morley_lshape(tau):
            for j in range(2):
                if r.lambdas[j] > upper_ls[j]:
                    failures.append(f"lshape tau={tau:g} level {r.iteration} lambda{j+1}")
        for j in (1, 2):
            for r in adaptive_run(tau, j):
                if r.lambdas[j - 1] > upper_ls[j - 1]:
                    failures.append(
                        f"adaptive tau={tau:g} j={j} iter {r.iteration}: "
                        f"{r.lambdas[j-1]:.3f} > {upper_ls[j-1]:.3f}"
                    )
    assert not failures, "\n".join(failures)


def test_criterion_06_monotonicity():
    """Uniform Morley sequences strictly increase; adaptive sequences are
    nondecreasing after iteration 3."""
    for tau in TAUS:
        for recs in (morley_square(tau), morley_lshape(tau)):
            for j in range(2):
                seq = [r.lambdas[j] for r in recs]
                assert all(b > a for a, b in zip(seq, seq[1:]))
        for j in (1, 2):
            seq = [r.lambdas[j - 1] for r in adaptive_run(tau, j)][3:]
            assert all(b >= a for a, b in zip(seq, seq[1:])), (
                f"adaptive tau={tau:g} j={j} decreases after iteration 3"
            )


def test_criterion_07_adaptive_trajectories():
    """Adaptive L-shape runs (theta=0.25, initial h=sqrt(2)/32): iteration-1
    Ndof equals the published 3201 exactly; at the first iteration with
    Ndof >= 1e5, lambda1 lies in the published window."""
    for tau in TAUS:
        recs = adaptive_run(tau, 1)
        first = next(r for r in recs if r.ndof >= 100_000)
        lo, hi = ADAPTIVE_WINDOWS[tau]
        assert lo <= first.lambdas[0] <= hi, (
            f"tau={tau:g}: lambda1 {first.lambdas[0]:.3f} at Ndof {first.ndof} "
            f"outside [{lo}, {hi}]"
        )
    assert adaptive_run(0.0, 1)[0].ndof == 2945  # initial mesh, matches Table 4
    assert adaptive_run(0.0, 1)[1].ndof == 3201  # published iteration-1 Ndof


def test_criterion_08_oracle_equivalence():
    """Iterative eigensolver agrees with the independent dense Cholesky +
    Jacobi oracle to 1e-8 relative on the 2 smallest eigenvalues, for all
    assembled systems with n <= 500."""
    systems = []
    for tau in TAUS:
        for mesh in (build_initial_square(4), build_initial_square(8),
                     build_initial_lshape(2), build_initial_lshape(4)):
            systems.append(MorleySpace(mesh).assemble(tau))
        for rmesh in (build_rect_mesh("square", 4), build_rect_mesh("square", 8),
                      build_rect_mesh("lshape", 2), build_rect_mesh("lshape", 4)):
            A, B, _ = assemble_bfs(rmesh, tau)
            systems.append((A, B))
    checked = 0
    for A, B in systems:
        if A.shape[0] > 500:
            continue
        vals = [p.value for p in smallest_eigs(A, B, 2)]
        oracle = dense_eig_oracle(A, B)[:2]
        for got, ref in zip(vals, oracle):
            assert abs(got - ref) <= 1e-8 * abs(ref)
        checked += 1
    assert checked >= 12  # all seeded systems are small enough


def test_criterion_09_property_suites():
    """Patch test 1e-10, exact assembly symmetry, B-normalization 1e-10,
    NVB conformity + 45 degree minimum angle, Dorfler minimality
    (brute-forced on <= 20-element instances), estimator zero cases, and
    identity-terms dominance |T1| > |T2| + |T3| + |T4|."""
    # patch test: broken energy of q = x^2 + xy equals int |Hess q|^2 = 6
    mesh = build_initial_square(3)
    space = MorleySpace(mesh)
    A_full, _ = space.assemble(0.0, eliminate_bc=False)
    probe = FunctionProbe(
        value=lambda p: p[:, 0] ** 2 + p[:, 0] * p[:, 1],
        gradient=lambda p: np.column_stack([2 * p[:, 0] + p[:, 1], p[:, 0]]),
    )
    from platebounds.quadrature import gauss01

    x5, w5 = gauss01(5)
    p0 = mesh.vertices[mesh.edges[:, 0]]
    p1 = mesh.vertices[mesh.edges[:, 1]]
    pts = p0[:, None, :] + x5[None, :, None] * (p1 - p0)[:, None, :]
    grads = probe.gradient(pts.reshape(-1, 2)).reshape(mesh.num_edges, 5, 2)
    means = np.einsum("q,eqd,ed->e", w5, grads, mesh.edge_normals())
    qdof = np.concatenate([probe.value(mesh.vertices), means])
    assert abs(qdof @ A_full @ qdof - 6.0) <= 1e-10 * 6.0

    # exact assembly symmetry
    A, B = MorleySpace(build_initial_lshape(2)).assemble(10.0)
    assert np.abs(A - A.T).max() == 0.0
    Ab, Bb, _ = assemble_bfs(build_rect_mesh("lshape", 2), 10.0)
    assert np.abs(Ab - Ab.T).max() == 0.0

    # B-normalization of returned eigenvectors
    for p in smallest_eigs(A, B, 2):
        assert abs(p.vector @ (B @ p.vector) - 1.0) <= 1e-10

    # NVB conformity and 45-degree angle preservation
    rng = np.random.default_rng(11)
    m = build_initial_lshape(2)
    for _ in range(8):
        marked = rng.choice(m.num_triangles, size=max(1, m.num_triangles // 4),
                            replace=False)
        m = bisect(m, marked)
        validate_trimesh(m)
        assert np.degrees(m.min_angle()) >= 45.0 - 1e-9

    # Dorfler minimality, brute-forced on <= 20-element instances
    for trial in range(10):
        n = int(rng.integers(4, 21))
        eta2 = rng.random(n) ** 2
        theta = float(rng.uniform(0.1, 0.9))
        est = ElementEstimate(per_element=eta2, total=float(eta2.sum()))
        marked = mark_dorfler(est, theta)
        target = theta * eta2.sum()
        assert eta2[marked].sum() >= target - 1e-12
        # greedy-on-sorted gives the minimum cardinality; verify against it
        srt = np.sort(eta2)[::-1]
        need = int(np.searchsorted(np.cumsum(srt), target - 1e-12)) + 1
        assert len(marked) == need

    # estimator zero cases
    space0 = MorleySpace(build_initial_lshape(2))
    zero = MorleyField(space0, np.zeros(space0.dofmap.n_free))
    est0 = eta_local(zero, 42.0, 7.0)
    assert est0.total == 0.0 and np.all(est0.per_element == 0.0)

    # identity-terms dominance on the square tau=0 diagnostic: reference
    # eigenfunction from the fine conforming (rectangle) discretization
    rmesh = build_rect_mesh("square", 64)
    Ar, Br, dm = assemble_bfs(rmesh, 0.0)
    ref = smallest_eigs(Ar, Br, 1)[0]
    field = BfsField(rmesh, dm, ref.vector)
    ref_probe = FunctionProbe(
        value=field.value, gradient=field.gradient, hessian=field.hessian
    )
    msh = build_initial_square(8)
    msp = MorleySpace(msh)
    Am, Bm = msp.assemble(0.0)
    mp = smallest_eigs(Am, Bm, 1)[0]
    T1, T2, T3, T4 = identity_terms(
        msp, 0.0, mp.value, MorleyField(msp, mp.vector), ref_probe, ref.value
    )
    assert abs(T1) > abs(T2) + abs(T3) + abs(T4)
    # the decomposition reproduces the eigenvalue gap (5% artifact tolerance)
    gap = ref.value - mp.value
    assert abs((T1 + T2 + T3 + T4) - gap) <= 0.05 * gap


def test_criterion_10_estimator_slope():
    """log-log slope of eta^2 vs Ndof over the last 10 adaptive iterations
    lies in [-1.25, -0.75] for tau in {0, 10, 100} and j in {1, 2}."""
    for tau in TAUS:
        for j in (1, 2):
            slope = slope_report(adaptive_run(tau, j), window=10)
            assert -1.25 <= slope <= -0.75, f"tau={tau:g} j={j}: slope {slope:.4f}"
