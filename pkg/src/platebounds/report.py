"""Experiment drivers, CSV emission and verification reports.

CSV schema: ``method,domain,tau,iter,h,ndof,lambda1,lambda2,eta2,seconds``.
Floats are written with 17 significant digits so a round trip through the
file reproduces the in-memory records exactly; inapplicable fields are empty.
"""

import csv
import math
import time
from typing import List

import numpy as np

from .adaptive import AdaptiveConfig, adaptive_loop
from .bfs import bfs_eigen_table
from .eig import smallest_eigs
from .mesh import build_initial_lshape, build_initial_square, uniform_refine
from .morley import MorleySpace
from .records import RunRecord

__all__ = [
    "run_uniform_morley",
    "run_uniform_bfs",
    "run_adaptive",
    "write_csv",
    "read_csv",
    "verify_monotone",
    "verify_bracket",
    "slope_report",
]

CSV_HEADER = [
    "method",
    "domain",
    "tau",
    "iter",
    "h",
    "ndof",
    "lambda1",
    "lambda2",
    "eta2",
    "seconds",
]


def run_uniform_morley(domain, tau, levels, k=2, tol=1e-9, seed=42):
    """Morley eigenvalues on uniformly red-refined triangle meshes."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    mesh = build_initial_square(4) if domain == "square" else build_initial_lshape(2)
    records = []
    for level in range(levels):
        t0 = time.perf_counter()
        space = MorleySpace(mesh)
        A, B = space.assemble(tau)
        pairs = smallest_eigs(A, B, k, tol=tol, seed=seed)
        records.append(
            RunRecord(
                method="morley",
                domain=domain,
                tau=tau,
                iteration=level,
                h=float(mesh.diameters().max()),
                ndof=space.dofmap.n_free,
                lambdas=[p.value for p in pairs],
                eta2=None,
                seconds=time.perf_counter() - t0,
            )
        )
        if level + 1 < levels:
            mesh = uniform_refine(mesh)
    return records


def run_uniform_bfs(domain, tau, levels, k=2, tol=1e-9, seed=42):
    """BFS eigenvalues on uniformly refined rectangle meshes."""
    return bfs_eigen_table(domain, tau, levels, k=k, tol=tol, seed=seed)


def run_adaptive(config: AdaptiveConfig):
    """Adaptive Morley run; see AdaptiveConfig for the knobs."""
    return adaptive_loop(config)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(records: List[RunRecord], path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            lam = list(r.lambdas) + [None, None]
            w.writerow(
                [
                    r.method,
                    r.domain,
                    _fmt(float(r.tau)),
                    r.iteration,
                    _fmt(r.h),
                    r.ndof,
                    _fmt(lam[0]),
                    _fmt(lam[1]),
                    _fmt(r.eta2),
                    _fmt(float(r.seconds)),
                ]
            )


def read_csv(path):
    records = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"unexpected CSV schema: {reader.fieldnames}")
        for row in reader:
            lambdas = [float(row[c]) for c in ("lambda1", "lambda2") if row[c] != ""]
            records.append(
                RunRecord(
                    method=row["method"],
                    domain=row["domain"],
                    tau=float(row["tau"]),
                    iteration=int(row["iter"]),
                    h=float(row["h"]) if row["h"] != "" else None,
                    ndof=int(row["ndof"]),
                    lambdas=lambdas,
                    eta2=float(row["eta2"]) if row["eta2"] != "" else None,
                    seconds=float(row["seconds"]),
                )
            )
    return records


def verify_monotone(records, direction="increasing", skip=0):
    """Check each lambda column is monotone across the record sequence.

    Returns (ok, message).  ``skip`` ignores the first iterations (adaptive
    sequences are only expected to be nondecreasing after a few steps).
    """
    if not records:
        return False, "no records"
    ncols = min(len(r.lambdas) for r in records)
    rows = records[skip:]
    for j in range(ncols):
        seq = [r.lambdas[j] for r in rows]
        for a, b in zip(seq, seq[1:]):
            if direction == "increasing" and b < a:
                return False, f"lambda{j+1} decreases: {a!r} -> {b!r}"
            if direction == "decreasing" and b > a + 1e-8:
                return False, f"lambda{j+1} increases: {a!r} -> {b!r}"
    return True, "monotone: true"


def verify_bracket(morley_records, bfs_records):
    """Every Morley lambda_j must lie below the finest BFS lambda_j.

    Returns (ok, list of margin lines).
    """
    if not morley_records or not bfs_records:
        raise ValueError("need records on both sides")
    dom = morley_records[0].domain
    tau = morley_records[0].tau
    for r in morley_records + bfs_records:
        if r.domain != dom or r.tau != tau:
            raise ValueError("domain/tau mismatch between CSVs")
    finest = min(bfs_records, key=lambda r: r.h if r.h is not None else math.inf)
    ok = True
    lines = []
    ncols = min(len(finest.lambdas), min(len(r.lambdas) for r in morley_records))
    for r in morley_records:
        for j in range(ncols):
            margin = finest.lambdas[j] - r.lambdas[j]
            lines.append(
                f"iter {r.iteration} lambda{j+1}: margin {margin:.6g}"
            )
            if margin < 0:
                ok = False
    return ok, lines


def slope_report(records, window=10):
    """Least-squares slope of log eta^2 vs log Ndof over the last rows."""
    rows = [r for r in records if r.eta2 is not None and r.eta2 > 0]
    if len(rows) < window:
        raise ValueError(f"need at least {window} rows with positive eta2")
    rows = rows[-window:]
    x = np.log([r.ndof for r in rows])
    y = np.log([r.eta2 for r in rows])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)
