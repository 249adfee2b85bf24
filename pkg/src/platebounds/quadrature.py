"""Quadrature rules shared by the element modules.

Triangle rules are given in barycentric coordinates with weights that sum
to 1 (multiply by the element area). Line rules are Gauss-Legendre on [0,1].
"""

import numpy as np
from numpy.polynomial.legendre import leggauss

# 7-point degree-5 rule (Strang-Fix / Dunavant order 5).
_A1 = 0.4701420641051151
_A2 = 0.1012865073234563
_W0 = 9.0 / 40.0
_W1 = 0.1323941527885062
_W2 = 0.1259391805448271

TRI_DEG5_BARY = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_A1, _A1, 1 - 2 * _A1],
        [_A1, 1 - 2 * _A1, _A1],
        [1 - 2 * _A1, _A1, _A1],
        [_A2, _A2, 1 - 2 * _A2],
        [_A2, 1 - 2 * _A2, _A2],
        [1 - 2 * _A2, _A2, _A2],
    ]
)
TRI_DEG5_W = np.array([_W0, _W1, _W1, _W1, _W2, _W2, _W2])

# Edge-midpoint rule, exact for quadratics.
TRI_DEG2_BARY = np.array(
    [
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
    ]
)
TRI_DEG2_W = np.array([1 / 3, 1 / 3, 1 / 3])


def gauss01(npts):
    """Gauss-Legendre nodes/weights mapped to [0,1]; weights sum to 1."""
    x, w = leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def tri_points(vertices, bary):
    """Physical coordinates of barycentric points on a batch of triangles.

    vertices: (T, 3, 2); bary: (Q, 3). Returns (T, Q, 2).
    """
    return np.einsum("qj,tjd->tqd", bary, vertices)
