"""Convex domains, uniform grids and exact boundary intersections.

The domain types describe a bounded open convex set in the plane.  Grids are
uniform Cartesian lattices over the domain's bounding box; every lattice node
is classified interior/exterior, and for each interior node and each stencil
direction the exact fractional distance to the boundary along that ray is
precomputed.  All values are immutable after construction and safe to share
across concurrent solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .operators import StencilSet, default_stencil

__all__ = [
    "Disk",
    "Ellipse",
    "ConvexPolygon",
    "Rectangle",
    "ConvexDomain",
    "Grid",
    "GridError",
    "contains",
    "area",
    "diameter",
    "bounding_box",
    "boundary_fraction",
    "boundary_distance",
    "inscribed_polygon",
    "apply_unimodular",
    "build_grid",
    "domain_spec",
]


class GridError(ValueError):
    """Raised when a grid cannot be built over a domain."""


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")


@dataclass(frozen=True)
class Ellipse:
    """Axis lengths a, b along the rotated x/y axes; rotation in radians."""

    center: tuple[float, float]
    a: float
    b: float
    rotation: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("ellipse semi-axes must be positive")


@dataclass(frozen=True)
class ConvexPolygon:
    """Strictly convex counterclockwise vertex chain."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
            raise ValueError("polygon needs at least 3 planar vertices")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if not np.all(cross > 0):
            raise ValueError("vertices must form a strictly convex counterclockwise chain")


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle given by two opposite corners."""

    corner0: tuple[float, float]
    corner1: tuple[float, float]

    def __post_init__(self):
        if not (self.corner1[0] > self.corner0[0] and self.corner1[1] > self.corner0[1]):
            raise ValueError("rectangle corners must satisfy corner0 < corner1 componentwise")


ConvexDomain = Union[Disk, Ellipse, ConvexPolygon, Rectangle]


def _polygon_array(domain: ConvexDomain) -> np.ndarray:
    if isinstance(domain, ConvexPolygon):
        return np.asarray(domain.vertices, dtype=float)
    if isinstance(domain, Rectangle):
        (x0, y0), (x1, y1) = domain.corner0, domain.corner1
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)
    raise TypeError(f"not a polygonal domain: {type(domain).__name__}")


def _ellipse_frame(domain: Ellipse, pts: np.ndarray) -> np.ndarray:
    """Map physical points into the frame where the ellipse is the unit circle."""
    c, s = math.cos(domain.rotation), math.sin(domain.rotation)
    d = pts - np.asarray(domain.center, dtype=float)
    u = (c * d[..., 0] + s * d[..., 1]) / domain.a
    v = (-s * d[..., 0] + c * d[..., 1]) / domain.b
    return np.stack([u, v], axis=-1)


def _contains_many(domain: ConvexDomain, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    if isinstance(domain, Disk):
        d = pts - np.asarray(domain.center, dtype=float)
        return d[..., 0] ** 2 + d[..., 1] ** 2 < domain.radius**2
    if isinstance(domain, Ellipse):
        q = _ellipse_frame(domain, pts)
        return q[..., 0] ** 2 + q[..., 1] ** 2 < 1.0
    if isinstance(domain, Rectangle):
        (x0, y0), (x1, y1) = domain.corner0, domain.corner1
        return (pts[..., 0] > x0) & (pts[..., 0] < x1) & (pts[..., 1] > y0) & (pts[..., 1] < y1)
    verts = _polygon_array(domain)
    inside = np.ones(pts.shape[:-1], dtype=bool)
    for k in range(len(verts)):
        p = verts[k]
        e = verts[(k + 1) % len(verts)] - p
        cross = e[0] * (pts[..., 1] - p[1]) - e[1] * (pts[..., 0] - p[0])
        inside &= cross > 0
    return inside


def contains(domain: ConvexDomain, point) -> bool:
    """True iff the point lies in the open set; boundary points are excluded."""
    return bool(_contains_many(domain, np.asarray(point, dtype=float)))


def area(domain: ConvexDomain) -> float:
    """Exact area; shoelace formula for polygons."""
    if isinstance(domain, Disk):
        return math.pi * domain.radius**2
    if isinstance(domain, Ellipse):
        return math.pi * domain.a * domain.b
    if isinstance(domain, Rectangle):
        return (domain.corner1[0] - domain.corner0[0]) * (domain.corner1[1] - domain.corner0[1])
    v = _polygon_array(domain)
    w = np.roll(v, -1, axis=0)
    return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))


def diameter(domain: ConvexDomain) -> float:
    if isinstance(domain, Disk):
        return 2.0 * domain.radius
    if isinstance(domain, Ellipse):
        return 2.0 * max(domain.a, domain.b)
    v = _polygon_array(domain)
    d2 = np.sum((v[:, None, :] - v[None, :, :]) ** 2, axis=-1)
    return math.sqrt(float(d2.max()))


def bounding_box(domain: ConvexDomain) -> tuple[float, float, float, float]:
    """(x0, y0, x1, y1) of the tight axis-aligned bounding box."""
    if isinstance(domain, Disk):
        (cx, cy), r = domain.center, domain.radius
        return (cx - r, cy - r, cx + r, cy + r)
    if isinstance(domain, Ellipse):
        c, s = math.cos(domain.rotation), math.sin(domain.rotation)
        hx = math.hypot(domain.a * c, domain.b * s)
        hy = math.hypot(domain.a * s, domain.b * c)
        (cx, cy) = domain.center
        return (cx - hx, cy - hy, cx + hx, cy + hy)
    if isinstance(domain, Rectangle):
        return (*domain.corner0, *domain.corner1)
    v = _polygon_array(domain)
    return (float(v[:, 0].min()), float(v[:, 1].min()), float(v[:, 0].max()), float(v[:, 1].max()))


def _exit_lengths(domain: ConvexDomain, pts: np.ndarray, unit_dir: np.ndarray) -> np.ndarray:
    """Distance from each interior point to the boundary along a fixed unit direction.

    Disk and ellipse use the quadratic-root formula in the circle frame;
    polygons clip the ray against every edge half-plane.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if isinstance(domain, Disk):
        d = pts - np.asarray(domain.center, dtype=float)
        b = d @ unit_dir
        c = np.sum(d * d, axis=-1) - domain.radius**2
        disc = np.sqrt(np.maximum(b * b - c, 0.0))
        return disc - b  # stable: c < 0 so the positive root is disc - b
    if isinstance(domain, Ellipse):
        q = _ellipse_frame(domain, pts)
        cc, ss = math.cos(domain.rotation), math.sin(domain.rotation)
        du = (cc * unit_dir[0] + ss * unit_dir[1]) / domain.a
        dv = (-ss * unit_dir[0] + cc * unit_dir[1]) / domain.b
        a2 = du * du + dv * dv
        b = q[:, 0] * du + q[:, 1] * dv
        c = np.sum(q * q, axis=-1) - 1.0
        disc = np.sqrt(np.maximum(b * b - a2 * c, 0.0))
        # c < 0 for interior points: take the positive root without cancellation
        return np.where(b <= 0, (disc - b) / a2, -c / (b + disc))
    verts = _polygon_array(domain)
    t = np.full(pts.shape[0], np.inf)
    for k in range(len(verts)):
        p = verts[k]
        q = verts[(k + 1) % len(verts)]
        n = np.array([q[1] - p[1], -(q[0] - p[0])])  # outward normal of a CCW edge
        ndir = n @ unit_dir
        if ndir <= 0.0:
            continue  # ray moves away from or parallel to this edge plane
        tk = -((pts - p) @ n) / ndir
        t = np.minimum(t, tk)
    return t


def boundary_fraction(domain: ConvexDomain, point, direction, h: float) -> float:
    """Fraction theta in (0, 1] such that the ray from point along +direction
    meets the boundary at distance theta * |direction| * h.

    theta == 1 means the stepped-to neighbor lies in the closed domain.
    """
    point = np.asarray(point, dtype=float)
    if not contains(domain, point):
        raise ValueError(f"point {tuple(point)} is not interior to the domain")
    e = np.asarray(direction, dtype=float)
    norm = math.hypot(e[0], e[1])
    if norm == 0.0 or h <= 0:
        raise ValueError("direction must be nonzero and h positive")
    s = float(_exit_lengths(domain, point[None, :], e / norm)[0])
    return min(1.0, s / (norm * h))


def boundary_distance(domain: ConvexDomain, pts: np.ndarray) -> np.ndarray:
    """Euclidean distance from interior points to the boundary."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if isinstance(domain, Disk):
        d = pts - np.asarray(domain.center, dtype=float)
        return domain.radius - np.hypot(d[:, 0], d[:, 1])
    if isinstance(domain, Ellipse):
        return _ellipse_distance(domain, pts)
    if isinstance(domain, Rectangle):
        (x0, y0), (x1, y1) = domain.corner0, domain.corner1
        return np.minimum.reduce(
            [pts[:, 0] - x0, x1 - pts[:, 0], pts[:, 1] - y0, y1 - pts[:, 1]]
        )
    verts = _polygon_array(domain)
    dist = np.full(pts.shape[0], np.inf)
    for k in range(len(verts)):
        p = verts[k]
        q = verts[(k + 1) % len(verts)]
        e = q - p
        ee = e @ e
        t = np.clip(((pts - p) @ e) / ee, 0.0, 1.0)
        proj = p + t[:, None] * e
        dist = np.minimum(dist, np.hypot(pts[:, 0] - proj[:, 0], pts[:, 1] - proj[:, 1]))
    return dist


def _ellipse_distance(domain: Ellipse, pts: np.ndarray) -> np.ndarray:
    """Point-to-ellipse distance via bisection on the boundary-normal equation.

    Works for interior points (the only ones the library queries); the point
    is folded into the first quadrant of the ellipse frame with the long axis
    first, and points exactly on either axis take their closed forms.
    """
    q = np.abs(_ellipse_frame(domain, pts))
    u = q[:, 0] * domain.a
    v = q[:, 1] * domain.b
    a, b = domain.a, domain.b
    if a < b:
        a, b = b, a
        u, v = v, u

    out = np.empty_like(u)
    on_minor = u < 1e-14 * a
    on_major = (v < 1e-14 * b) & ~on_minor
    general = ~(on_minor | on_major)

    # point on the minor axis: nearest boundary point is the minor vertex
    out[on_minor] = b - v[on_minor]
    if np.any(on_major):
        um = u[on_major]
        crit = (a * a - b * b) / a
        x0 = np.where(crit > 0, a * a * um / max(a * a - b * b, 1e-300), np.inf)
        near_vertex = um >= crit
        y0 = b * np.sqrt(np.maximum(1.0 - (x0 / a) ** 2, 0.0))
        out[on_major] = np.where(near_vertex, a - um, np.hypot(um - x0, y0))
    if np.any(general):
        ug = u[general]
        vg = v[general]
        # closest point ((a^2 u)/(t+a^2), (b^2 v)/(t+b^2)) with t the root of
        # f(t) = (a u/(t+a^2))^2 + (b v/(t+b^2))^2 - 1 = 0 on (-b^2, 0]:
        # f -> +inf at the left end and f(0) < 0 for interior points
        lo = np.full(ug.shape, -(b * b) * (1.0 - 1e-12))
        hi = np.zeros_like(ug)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            pos = (a * ug / (mid + a * a)) ** 2 + (b * vg / (mid + b * b)) ** 2 > 1.0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
        t = 0.5 * (lo + hi)
        cx = a * a * ug / (t + a * a)
        cy = b * b * vg / (t + b * b)
        out[general] = np.hypot(ug - cx, vg - cy)
    return out


def inscribed_polygon(domain: ConvexDomain, n_vertices: int = 256) -> ConvexPolygon:
    """Inscribe a convex polygon in an analytic domain (identity for polygons)."""
    if isinstance(domain, (ConvexPolygon, Rectangle)):
        return ConvexPolygon(tuple(map(tuple, _polygon_array(domain))))
    if n_vertices < 3:
        raise ValueError("need at least 3 vertices")
    t = 2.0 * math.pi * np.arange(n_vertices) / n_vertices
    if isinstance(domain, Disk):
        (cx, cy), r = domain.center, domain.radius
        pts = np.stack([cx + r * np.cos(t), cy + r * np.sin(t)], axis=1)
    else:
        c, s = math.cos(domain.rotation), math.sin(domain.rotation)
        ex = domain.a * np.cos(t)
        ey = domain.b * np.sin(t)
        pts = np.stack(
            [domain.center[0] + c * ex - s * ey, domain.center[1] + s * ex + c * ey], axis=1
        )
    return ConvexPolygon(tuple(map(tuple, pts)))


def apply_unimodular(
    domain: ConvexDomain, T, n_vertices: int = 256
) -> ConvexPolygon:
    """Image of the domain under a volume-preserving linear map (det T = 1).

    Analytic domains are first replaced by an inscribed polygon with
    ``n_vertices`` vertices; the area of polygonal inputs is preserved to
    machine precision.
    """
    T = np.asarray(T, dtype=float)
    det = T[0, 0] * T[1, 1] - T[0, 1] * T[1, 0]
    if abs(det - 1.0) > 1e-12:
        raise ValueError(f"map is not unimodular: det T = {det!r}")
    poly = inscribed_polygon(domain, n_vertices)
    verts = _polygon_array(poly) @ T.T
    return ConvexPolygon(tuple(map(tuple, verts)))


def domain_spec(domain: ConvexDomain) -> dict:
    """JSON-ready description of a domain (used in manifests and dump headers)."""
    if isinstance(domain, Disk):
        return {"kind": "disk", "center": list(domain.center), "radius": domain.radius}
    if isinstance(domain, Ellipse):
        return {
            "kind": "ellipse",
            "center": list(domain.center),
            "a": domain.a,
            "b": domain.b,
            "rotation": domain.rotation,
        }
    if isinstance(domain, Rectangle):
        return {"kind": "rectangle", "corner0": list(domain.corner0), "corner1": list(domain.corner1)}
    return {"kind": "polygon", "vertices": [list(v) for v in domain.vertices]}


@dataclass
class Grid:
    """Uniform lattice over a convex domain with boundary-ray metadata.

    Interior nodes are numbered 0..n-1.  For pair k of the stencil the four
    signed rays occupy metadata columns 4k .. 4k+3 in the order
    (+e, -e, +e_perp, -e_perp).  ``nbr`` holds the interior index of the
    stepped-to node, or -1 when the ray leaves the domain, in which case
    ``theta`` < 1 locates the exact boundary hit and the field value 0 is
    implied.  Instances are immutable by contract once built.
    """

    h: float
    origin: tuple[float, float]
    shape: tuple[int, int]
    stencil: StencilSet
    index_map: np.ndarray  # (nx, ny) int32, -1 for exterior
    nodes_ij: np.ndarray  # (n, 2) int32 lattice coordinates
    nodes_xy: np.ndarray  # (n, 2) float64 physical coordinates
    nbr: np.ndarray  # (n, 4K) int32
    theta: np.ndarray  # (n, 4K) float64
    dir_len2: np.ndarray = field(repr=False, default=None)  # (2K,) (|e| h)^2

    ndim: int = 2

    @property
    def num_interior(self) -> int:
        return self.nodes_xy.shape[0]

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    def interior_values(self, func) -> np.ndarray:
        """Sample func(x, y) at the interior nodes (vectorized)."""
        return np.asarray(func(self.nodes_xy[:, 0], self.nodes_xy[:, 1]), dtype=float)


def build_grid(domain: ConvexDomain, h: float, stencil: StencilSet | None = None) -> Grid:
    """Classify lattice nodes and precompute boundary fractions for all rays.

    Deterministic for fixed inputs.  Raises GridError("grid too coarse") when
    no lattice node is interior and GridError on a disconnected interior.
    """
    if h <= 0:
        raise ValueError("spacing h must be positive")
    if stencil is None:
        stencil = default_stencil()
    x0, y0, x1, y1 = bounding_box(domain)
    nx = int(math.floor((x1 - x0) / h + 1e-12)) + 1
    ny = int(math.floor((y1 - y0) / h + 1e-12)) + 1

    xs = x0 + h * np.arange(nx)
    ys = y0 + h * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    lattice = np.stack([gx, gy], axis=-1)
    inside = _contains_many(domain, lattice)

    n_int = int(inside.sum())
    if n_int == 0:
        raise GridError("grid too coarse: no interior nodes")

    index_map = np.full((nx, ny), -1, dtype=np.int32)
    ii, jj = np.nonzero(inside)
    index_map[ii, jj] = np.arange(n_int, dtype=np.int32)
    nodes_ij = np.stack([ii, jj], axis=1).astype(np.int32)
    nodes_xy = np.stack([xs[ii], ys[jj]], axis=1)

    _check_connected(index_map, nodes_ij)

    dirs = stencil.signed_directions()  # (4K, 2) int
    D = dirs.shape[0]
    nbr = np.full((n_int, D), -1, dtype=np.int32)
    theta = np.ones((n_int, D), dtype=float)
    for d in range(D):
        di, dj = int(dirs[d, 0]), int(dirs[d, 1])
        ti = nodes_ij[:, 0] + di
        tj = nodes_ij[:, 1] + dj
        ok = (ti >= 0) & (ti < nx) & (tj >= 0) & (tj < ny)
        tgt = np.full(n_int, -1, dtype=np.int32)
        tgt[ok] = index_map[ti[ok], tj[ok]]
        nbr[:, d] = tgt
        miss = tgt < 0
        if np.any(miss):
            norm = math.hypot(di, dj)
            unit = np.array([di, dj], dtype=float) / norm
            s = _exit_lengths(domain, nodes_xy[miss], unit)
            theta[miss, d] = np.minimum(1.0, s / (norm * h))
    if not np.all(theta > 0):
        raise GridError("degenerate boundary fraction (node on the boundary?)")

    lens = stencil.direction_lengths()  # (2K,) |e|
    dir_len2 = (lens * h) ** 2
    return Grid(
        h=h,
        origin=(float(x0), float(y0)),
        shape=(nx, ny),
        stencil=stencil,
        index_map=index_map,
        nodes_ij=nodes_ij,
        nodes_xy=nodes_xy,
        nbr=nbr,
        theta=theta,
        dir_len2=dir_len2,
    )


def _check_connected(index_map: np.ndarray, nodes_ij: np.ndarray) -> None:
    """Interior nodes must form one 4-connected component."""
    n = nodes_ij.shape[0]
    if n == 1:
        return
    nx, ny = index_map.shape
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        k = stack.pop()
        i, j = int(nodes_ij[k, 0]), int(nodes_ij[k, 1])
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ti, tj = i + di, j + dj
            if 0 <= ti < nx and 0 <= tj < ny:
                m = index_map[ti, tj]
                if m >= 0 and not seen[m]:
                    seen[m] = True
                    count += 1
                    stack.append(int(m))
    if count != n:
        raise GridError(
            f"grid too coarse: interior nodes are disconnected ({count} of {n} reachable)"
        )
