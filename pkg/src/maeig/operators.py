"""Discrete Monge-Ampere operator and companion finite differences.

The determinant of the Hessian is discretized by a monotone wide-stencil
scheme: a minimum over orthogonal lattice-direction pairs of the product of
the positive parts of the two directional second differences, minus a penalty
on the negative parts.  Second differences use Shortley-Weller fractions with
the homogeneous boundary value substituted at rays that leave the domain.

All functions are pure; fields are plain 1-D float arrays over the interior
nodes of a grid (implicitly zero on the boundary).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, typing only
    from .geometry import Grid

__all__ = [
    "StencilSet",
    "default_stencil",
    "ScalarField",
    "second_difference",
    "second_differences_all",
    "ma_det",
    "laplacian",
    "central_hessian",
    "is_discretely_convex",
]

ScalarField = np.ndarray
"""Alias: values at interior grid nodes, implicitly zero on the boundary."""

# orthogonal (e, e_perp) pairs in preference order; pair 0 must be the axes
_CANONICAL_PAIRS: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = (
    ((1, 0), (0, 1)),
    ((1, 1), (-1, 1)),
    ((2, 1), (-1, 2)),
    ((1, 2), (-2, 1)),
    ((3, 1), (-1, 3)),
    ((1, 3), (-3, 1)),
    ((3, 2), (-2, 3)),
    ((2, 3), (-3, 2)),
)


@dataclass(frozen=True)
class StencilSet:
    """Ordered orthogonal lattice-direction pairs (e, e_perp).

    Pair 0 must be the coordinate axes; that pair feeds the discrete
    Laplacian.  Directions must have coprime integer components and each pair
    must be exactly orthogonal.
    """

    pairs: tuple[tuple[tuple[int, int], tuple[int, int]], ...]

    def __post_init__(self):
        if len(self.pairs) < 2:
            raise ValueError("stencil needs K >= 2 direction pairs")
        if self.pairs[0] != ((1, 0), (0, 1)):
            raise ValueError("pair 0 must be the coordinate axes ((1,0),(0,1))")
        for e, p in self.pairs:
            if e[0] * p[0] + e[1] * p[1] != 0:
                raise ValueError(f"pair {e}, {p} is not orthogonal")
            for d in (e, p):
                if d == (0, 0) or math.gcd(abs(d[0]), abs(d[1])) != 1:
                    raise ValueError(f"direction {d} must be nonzero with coprime components")

    @property
    def K(self) -> int:
        return len(self.pairs)

    def signed_directions(self) -> np.ndarray:
        """(4K, 2) int array: (+e, -e, +e_perp, -e_perp) per pair."""
        out = []
        for e, p in self.pairs:
            out += [e, (-e[0], -e[1]), p, (-p[0], -p[1])]
        return np.asarray(out, dtype=np.int32)

    def direction_lengths(self) -> np.ndarray:
        """(2K,) Euclidean lengths in unsigned-direction order (e_0, p_0, e_1, ...)."""
        out = []
        for e, p in self.pairs:
            out += [math.hypot(*e), math.hypot(*p)]
        return np.asarray(out, dtype=float)


def default_stencil(k: int = 2) -> StencilSet:
    """First k canonical orthogonal pairs (axes + diagonals for k=2)."""
    if not 2 <= k <= len(_CANONICAL_PAIRS):
        raise ValueError(f"k must be in [2, {len(_CANONICAL_PAIRS)}]")
    return StencilSet(_CANONICAL_PAIRS[:k])


def _padded(field: ScalarField, grid: Grid) -> np.ndarray:
    """Field extended by one trailing zero so nbr index -1 reads the boundary value."""
    u = np.asarray(field, dtype=float)
    if u.shape != (grid.num_interior,):
        raise ValueError(
            f"field has shape {u.shape}, expected ({grid.num_interior},) for this grid"
        )
    return np.append(u, 0.0)


def second_differences_all(field: ScalarField, grid: Grid) -> np.ndarray:
    """(n, 2K) Shortley-Weller second differences, unsigned-direction order.

    Column 2k is pair k's first direction, column 2k+1 its orthogonal partner.
    """
    ue = _padded(field, grid)
    u0 = ue[:-1]
    K = grid.stencil.K
    out = np.empty((grid.num_interior, 2 * K))
    for m in range(2 * K):
        base = 4 * (m // 2) + 2 * (m % 2)
        tp = grid.theta[:, base]
        tm = grid.theta[:, base + 1]
        up = ue[np.where(grid.nbr[:, base] >= 0, grid.nbr[:, base], -1)]
        um = ue[np.where(grid.nbr[:, base + 1] >= 0, grid.nbr[:, base + 1], -1)]
        out[:, m] = (
            2.0 * (tm * up + tp * um - (tp + tm) * u0) / (grid.dir_len2[m] * tp * tm * (tp + tm))
        )
    return out


def second_difference(field: ScalarField, grid: Grid, node: int, direction) -> float:
    """Directional second difference at one interior node.

    ``direction`` must be one of the stencil's directions (either sign).
    """
    dirs = grid.stencil.signed_directions()
    d = (int(direction[0]), int(direction[1]))
    cols = [c for c in range(dirs.shape[0]) if tuple(dirs[c]) in (d, (-d[0], -d[1]))]
    if not cols:
        raise ValueError(f"direction {d} is not in the grid's stencil")
    m = cols[0] // 4 * 2 + (cols[0] % 4) // 2
    return float(second_differences_all(field, grid)[node, m])


def ma_det(
    field: ScalarField,
    grid: Grid,
    stencil: StencilSet | None = None,
    penalty: float = 1.0,
) -> ScalarField:
    """Monotone wide-stencil approximation of det D^2 at every interior node.

    min over pairs of (D_e u)^+ (D_perp u)^+ - penalty * ((D_e u)^- + (D_perp u)^-).
    With penalty > 0 the scheme is monotone and selects convex solutions.
    """
    if stencil is not None and stencil.pairs != grid.stencil.pairs:
        raise ValueError("stencil does not match the one the grid was built with")
    if penalty < 0:
        raise ValueError("penalty must be nonnegative")
    sd = second_differences_all(field, grid)
    K = grid.stencil.K
    best = None
    for k in range(K):
        a = sd[:, 2 * k]
        b = sd[:, 2 * k + 1]
        g = np.maximum(a, 0.0) * np.maximum(b, 0.0) - penalty * (
            np.maximum(-a, 0.0) + np.maximum(-b, 0.0)
        )
        best = g if best is None else np.minimum(best, g)
    return best


def laplacian(field: ScalarField, grid: Grid) -> ScalarField:
    """Sum of the two axis second differences (pair 0 of the stencil)."""
    sd = second_differences_all(field, grid)
    return sd[:, 0] + sd[:, 1]


def central_hessian(field: ScalarField, grid: Grid, node: int) -> np.ndarray | None:
    """Central-difference Hessian at a node whose 8 lattice neighbors are interior.

    Returns None near the boundary (the mixed difference needs the full ring).
    """
    i, j = int(grid.nodes_ij[node, 0]), int(grid.nodes_ij[node, 1])
    nx, ny = grid.shape
    ring = {}
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            ti, tj = i + di, j + dj
            if not (0 <= ti < nx and 0 <= tj < ny):
                return None
            m = grid.index_map[ti, tj]
            if m < 0:
                return None
            ring[(di, dj)] = field[m]
    h2 = grid.h * grid.h
    uxx = (ring[(1, 0)] + ring[(-1, 0)] - 2.0 * ring[(0, 0)]) / h2
    uyy = (ring[(0, 1)] + ring[(0, -1)] - 2.0 * ring[(0, 0)]) / h2
    uxy = (ring[(1, 1)] + ring[(-1, -1)] - ring[(1, -1)] - ring[(-1, 1)]) / (4.0 * h2)
    return np.array([[uxx, uxy], [uxy, uyy]])


def is_discretely_convex(
    field: ScalarField,
    grid: Grid,
    stencil: StencilSet | None = None,
    tol: float = 1e-8,
) -> bool:
    """True iff every directional second difference is >= -tol."""
    if stencil is not None and stencil.pairs != grid.stencil.pairs:
        raise ValueError("stencil does not match the one the grid was built with")
    sd = second_differences_all(field, grid)
    return bool(np.all(sd >= -tol))
