"""Guaranteed eigenvalue brackets for the clamped-plate vibration problem.

Lower bounds come from the nonconforming Morley element on triangle meshes,
upper bounds from the conforming Bogner-Fox-Schmit element on rectangle
meshes; an element-residual estimator drives adaptive refinement.
"""

from .adaptive import (
    AdaptiveConfig,
    ElementEstimate,
    adaptive_loop,
    eta_local,
    mark_dorfler,
)
from .bfs import BfsDofMap, BfsField, assemble_bfs, bfs_eigen_table
from .eig import (
    EigenPair,
    EigenSolveError,
    NotSPDError,
    dense_eig_oracle,
    factorize,
    smallest_eigs,
)
from .mesh import (
    RectMesh,
    TriMesh,
    bisect,
    build_initial_lshape,
    build_initial_square,
    build_rect_mesh,
    uniform_refine,
    validate_trimesh,
)
from .morley import (
    DofMap,
    FunctionProbe,
    MorleyField,
    MorleySpace,
    identity_terms,
    interpolate_Ih,
    morley_basis,
)
from .records import RunRecord
from .report import (
    read_csv,
    run_adaptive,
    run_uniform_bfs,
    run_uniform_morley,
    slope_report,
    verify_bracket,
    verify_monotone,
    write_csv,
)

__version__ = "1.0.0"
