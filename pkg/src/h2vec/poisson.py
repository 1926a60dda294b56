"""Finite-difference Poisson problem on the L-shaped domain.

The domain is the unit square minus the closed upper-right quarter
[1/2, 1] x [1/2, 1].  Grid points on the cut-out (including its
boundary lines) carry Dirichlet conditions and are excluded, leaving
the interior points of the L.  The 5-point stencil with spacing h =
1/grid yields a symmetric positive definite matrix in row-major
interior numbering.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["PoissonProblem", "assemble_lshape", "lshape_interior_count"]


@dataclass
class PoissonProblem:
    grid: int
    points: np.ndarray  # (n, 2) interior coordinates, row-major order
    matrix: np.ndarray  # (n, n) dense stencil matrix
    site: np.ndarray  # (n, 2) integer grid coordinates (i, j)


def _interior_sites(grid):
    half = grid // 2
    sites = []
    for j in range(1, grid):
        for i in range(1, grid):
            if i >= half and j >= half:
                continue
            sites.append((i, j))
    return sites


def lshape_interior_count(grid):
    """Number of interior grid points, by direct enumeration."""
    return len(_interior_sites(grid))


def assemble_lshape(grid):
    """Assemble the 5-point stencil matrix on the L-shaped domain."""
    if grid < 4 or grid % 2:
        raise ValueError("grid must be an even number >= 4")
    h = 1.0 / grid
    sites = _interior_sites(grid)
    n = len(sites)
    number = {ij: p for p, ij in enumerate(sites)}
    a = np.zeros((n, n))
    inv_h2 = 1.0 / (h * h)
    for p, (i, j) in enumerate(sites):
        a[p, p] = 4.0 * inv_h2
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            q = number.get((i + di, j + dj))
            if q is not None:
                a[p, q] = -inv_h2
    points = np.array([(i * h, j * h) for i, j in sites])
    return PoissonProblem(grid, points, a, np.array(sites))
