"""Shared result-record type for the uniform and adaptive experiment drivers."""

from dataclasses import dataclass
from typing import List, Optional

__all__ = ["RunRecord"]


@dataclass
class RunRecord:
    """One refinement level / adaptive iteration of an eigenvalue run."""

    method: str  # "morley" or "bfs"
    domain: str  # "square" or "lshape"
    tau: float
    iteration: int
    h: float  # max element diameter
    ndof: int
    lambdas: List[float]  # ascending computed eigenvalues
    eta2: Optional[float]  # total squared error estimate (adaptive runs)
    seconds: float
