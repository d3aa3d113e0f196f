"""Uniform triangulations of [-1, 1]^2 and level-set interface geometry.

The mesh splits every grid cell by the diagonal running from its lower-left
to its upper-right corner.  Local edge ``j`` of a triangle is the edge
opposite local vertex ``j``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

MINUS = -1
INTERFACE = 0
PLUS = 1

SNAP_TOL = 1e-9  # relative to h
DEGENERATE_TOL = 1e-12  # relative to |K|
BISECTION_STEPS = 64
_RESOLUTION_SAMPLES = 8


class ResolutionError(ValueError):
    """The interface crosses a mesh edge more than once."""


class DegenerateCutError(ValueError):
    """A cut produced a sub-polygon with (numerically) zero area."""


@dataclass(frozen=True)
class Mesh:
    N: int
    vertices: np.ndarray  # (nv, 2)
    triangles: np.ndarray  # (nt, 3), counter-clockwise
    edges: np.ndarray  # (ne, 2), vertex indices with edges[:, 0] < edges[:, 1]
    triangle_edges: np.ndarray  # (nt, 3), local edge j is opposite local vertex j
    edge_triangles: np.ndarray  # (ne, 2), -1 where missing
    boundary_edge: np.ndarray  # (ne,) bool

    @property
    def h(self) -> float:
        return 2.0 / self.N

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def triangle_points(self, idx=None) -> np.ndarray:
        tris = self.triangles if idx is None else self.triangles[idx]
        return self.vertices[tris]

    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def triangle_areas(self) -> np.ndarray:
        return signed_area(self.triangle_points())


def signed_area(pts: np.ndarray) -> np.ndarray:
    """Signed area of triangles given as (..., 3, 2)."""
    p0, p1, p2 = pts[..., 0, :], pts[..., 1, :], pts[..., 2, :]
    return 0.5 * ((p1[..., 0] - p0[..., 0]) * (p2[..., 1] - p0[..., 1])
                  - (p2[..., 0] - p0[..., 0]) * (p1[..., 1] - p0[..., 1]))


def polygon_area(poly) -> float:
    """Shoelace area of a simple polygon (positive for counter-clockwise)."""
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def build_uniform_mesh(N: int) -> Mesh:
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    N = int(N)
    xs = np.linspace(-1.0, 1.0, N + 1)
    X, Y = np.meshgrid(xs, xs)  # row j is y = xs[j]
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(N), np.arange(N))
    v00 = (j * (N + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + N + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * N * N, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    local = triangles[:, [[1, 2], [2, 0], [0, 1]]]  # (nt, 3, 2)
    local = np.sort(local, axis=2).reshape(-1, 2)
    edges, inverse = np.unique(local, axis=0, return_inverse=True)
    triangle_edges = inverse.reshape(-1, 3)

    ne = len(edges)
    edge_triangles = np.full((ne, 2), -1, dtype=np.int64)
    flat_edges = triangle_edges.ravel()
    flat_tris = np.repeat(np.arange(len(triangles)), 3)
    order = np.argsort(flat_edges, kind="stable")
    se, st_ = flat_edges[order], flat_tris[order]
    first = np.ones(len(se), dtype=bool)
    first[1:] = se[1:] != se[:-1]
    edge_triangles[se[first], 0] = st_[first]
    edge_triangles[se[~first], 1] = st_[~first]
    boundary_edge = edge_triangles[:, 1] < 0

    return Mesh(N, vertices, triangles, edges, triangle_edges, edge_triangles, boundary_edge)


# --------------------------------------------------------------------------
# level sets


@dataclass(frozen=True)
class LevelSet:
    """Interface description; phi < 0 in the minus region, phi > 0 in the plus region.

    kinds and params:
      circle: center (cx, cy), radius r           phi = |x-c|^2 - r^2
      ellipse: center, a, b                        phi = (x-cx)^2/a^2 + (y-cy)^2/b^2 - 1
      line: a, b, c                                phi = a x + b y + c
      circles: list of (cx, cy, r), disjoint       phi = min_i |x-c_i| - r_i
      none:                                        phi = 1 (everything in the plus region)
    """

    kind: str = "none"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("circle", "ellipse", "line", "circles", "none"):
            raise ValueError(f"unknown level set kind {self.kind!r}")
        if self.kind == "circles":
            circ = np.asarray(self.params["circles"], dtype=float).reshape(-1, 3)
            for a in range(len(circ)):
                for b in range(a + 1, len(circ)):
                    d = np.hypot(*(circ[a, :2] - circ[b, :2]))
                    if d <= circ[a, 2] + circ[b, 2]:
                        raise ValueError(f"circles {a} and {b} overlap")

    @classmethod
    def circle(cls, radius, center=(0.0, 0.0)):
        return cls("circle", {"center": tuple(center), "radius": float(radius)})

    @classmethod
    def ellipse(cls, a, b, center=(0.0, 0.0)):
        return cls("ellipse", {"center": tuple(center), "a": float(a), "b": float(b)})

    @classmethod
    def line(cls, slope, intercept):
        """The line y = slope*x + intercept, plus region above it."""
        return cls("line", {"a": -float(slope), "b": 1.0, "c": -float(intercept)})

    @classmethod
    def circles(cls, circles):
        return cls("circles", {"circles": [tuple(map(float, c)) for c in circles]})

    @classmethod
    def none(cls):
        return cls("none", {})

    @property
    def is_none(self) -> bool:
        return self.kind == "none"

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        p = self.params
        if self.kind == "circle":
            cx, cy = p.get("center", (0.0, 0.0))
            return (x - cx) ** 2 + (y - cy) ** 2 - p["radius"] ** 2
        if self.kind == "ellipse":
            cx, cy = p.get("center", (0.0, 0.0))
            return (x - cx) ** 2 / p["a"] ** 2 + (y - cy) ** 2 / p["b"] ** 2 - 1.0
        if self.kind == "line":
            return p["a"] * x + p["b"] * y + p["c"]
        if self.kind == "circles":
            out = np.full(np.broadcast(x, y).shape, np.inf)
            for cx, cy, r in p["circles"]:
                out = np.minimum(out, np.hypot(x - cx, y - cy) - r)
            return out
        return np.ones(np.broadcast(x, y).shape)

    def at(self, pts):
        pts = np.asarray(pts, dtype=float)
        return self(pts[..., 0], pts[..., 1])


def _is_plus(phi):
    return phi >= 0.0


def edge_crossings(p0: np.ndarray, p1: np.ndarray, ls: LevelSet, h: float | None = None):
    """Vectorised interface crossing along segments p0[k] -> p1[k].

    Returns ``(points, has_crossing)``; rows without a sign change are NaN.
    Roots are bracketed by bisection; a root within ``SNAP_TOL * h`` of an
    endpoint is moved onto that endpoint.
    """
    p0 = np.atleast_2d(np.asarray(p0, dtype=float))
    p1 = np.atleast_2d(np.asarray(p1, dtype=float))
    s0 = _is_plus(ls.at(p0))
    s1 = _is_plus(ls.at(p1))
    cross = s0 != s1
    out = np.full(p0.shape, np.nan)
    if not cross.any():
        return out, cross
    a, b = p0[cross], p1[cross]
    sa = s0[cross]
    lo = np.zeros(len(a))
    hi = np.ones(len(a))
    d = b - a
    length = np.hypot(d[:, 0], d[:, 1])
    if h is None:
        h = float(length.max())
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        sm = _is_plus(ls.at(a + mid[:, None] * d))
        same = sm == sa
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
        if np.all((hi - lo) * length <= 1e-14 * h):
            break
    t = 0.5 * (lo + hi)
    snap = SNAP_TOL * h
    t = np.where(t * length <= snap, 0.0, t)
    t = np.where((1.0 - t) * length <= snap, 1.0, t)
    out[cross] = a + t[:, None] * d
    return out, cross


def edge_crossing(p0, p1, ls: LevelSet, h: float | None = None):
    """Crossing point of the interface with segment p0-p1, or None."""
    if np.allclose(p0, p1):
        raise ValueError("degenerate segment")
    pts, cross = edge_crossings(np.asarray(p0)[None], np.asarray(p1)[None], ls, h)
    return pts[0] if cross[0] else None


# --------------------------------------------------------------------------
# element cuts


@dataclass(frozen=True)
class ElementCut:
    triangle_index: int
    vertices: np.ndarray  # (3, 2) triangle
    D: np.ndarray
    E: np.ndarray
    cut_edges: tuple  # local edge slots carrying D and E
    normal: np.ndarray  # unit, minus -> plus
    poly_minus: np.ndarray
    poly_plus: np.ndarray

    def side(self, pts) -> np.ndarray:
        """1 for points on the plus side of the chord DE, 0 otherwise."""
        pts = np.asarray(pts, dtype=float)
        return ((pts - self.D) @ self.normal >= 0.0).astype(np.int64)

    @property
    def area_minus(self) -> float:
        return polygon_area(self.poly_minus)

    @property
    def area_plus(self) -> float:
        return polygon_area(self.poly_plus)


def _dedupe(poly, tol):
    out = []
    for p in poly:
        if not out or np.hypot(*(p - out[-1])) > tol:
            out.append(p)
    while len(out) > 1 and np.hypot(*(out[0] - out[-1])) <= tol:
        out.pop()
    return np.array(out)


def cut_triangle(verts, plus, crossing, tri_index=-1) -> ElementCut:
    """Split a triangle along the chord joining its two edge crossings.

    ``plus`` holds vertex signs (bool) and ``crossing`` is (3, 2) with the
    crossing point on local edge j (opposite vertex j) or NaN.
    """
    verts = np.asarray(verts, dtype=float)
    crossing = np.asarray(crossing, dtype=float)
    slots = tuple(j for j in range(3) if not np.isnan(crossing[j, 0]))
    if len(slots) != 2:
        raise DegenerateCutError(f"triangle {tri_index}: expected 2 cut edges, got {len(slots)}")
    D, E = crossing[slots[0]], crossing[slots[1]]
    K = abs(float(signed_area(verts)))
    diam = max(np.hypot(*(verts[a] - verts[b])) for a, b in ((0, 1), (1, 2), (2, 0)))
    if np.hypot(*(D - E)) <= DEGENERATE_TOL * diam:
        raise DegenerateCutError(f"triangle {tri_index}: D == E")

    # walk the boundary v0, x(e2), v1, x(e0), v2, x(e1); edge (v_k, v_k+1) is slot (k+2)%3
    minus_poly, plus_poly = [], []
    for k in range(3):
        (plus_poly if plus[k] else minus_poly).append(verts[k])
        slot = (k + 2) % 3
        if slot in slots:
            minus_poly.append(crossing[slot])
            plus_poly.append(crossing[slot])
    tol = 1e-15 * diam
    pm = _dedupe(np.array(minus_poly), tol)
    pp = _dedupe(np.array(plus_poly), tol)
    if signed_area(verts) < 0.0:  # keep sub-polygons counter-clockwise
        pm, pp = pm[::-1], pp[::-1]
    am = polygon_area(pm) if len(pm) >= 3 else 0.0
    ap = polygon_area(pp) if len(pp) >= 3 else 0.0
    if min(am, ap) < DEGENERATE_TOL * K:
        raise DegenerateCutError(f"triangle {tri_index}: sub-polygon area below tolerance")

    t = E - D
    n = np.array([-t[1], t[0]]) / np.hypot(*t)
    plus_pts = verts[np.asarray(plus, dtype=bool)]
    ref = plus_pts.mean(axis=0) if len(plus_pts) else verts.mean(axis=0)
    if np.dot(ref - D, n) < 0.0:
        n = -n
    return ElementCut(int(tri_index), verts, D, E, slots, n, pm, pp)


@dataclass
class InterfaceData:
    """Classification of one mesh against one level set."""

    labels: np.ndarray  # (nt,) MINUS / INTERFACE / PLUS
    edge_points: np.ndarray  # (ne, 2) crossing per edge, NaN if none
    cuts: dict  # triangle index -> ElementCut
    unresolved_edges: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def interface_triangles(self) -> np.ndarray:
        return np.flatnonzero(self.labels == INTERFACE)


def unresolved_edges(mesh: Mesh, ls: LevelSet) -> np.ndarray:
    """Edges along which the level set changes sign more than once (sampled)."""
    p0 = mesh.vertices[mesh.edges[:, 0]]
    p1 = mesh.vertices[mesh.edges[:, 1]]
    t = np.linspace(0.0, 1.0, _RESOLUTION_SAMPLES + 1)
    samples = p0[:, None, :] + t[None, :, None] * (p1 - p0)[:, None, :]
    s = _is_plus(ls.at(samples))
    changes = np.count_nonzero(s[:, 1:] != s[:, :-1], axis=1)
    return np.flatnonzero(changes > 1)


def analyze_interface(mesh: Mesh, ls: LevelSet, strict: bool = False) -> InterfaceData:
    """Classify all triangles and cut the interface elements.

    Crossings come from endpoint signs only.  Edges crossed more than once
    are reported: ``strict`` raises :class:`ResolutionError`, otherwise a
    warning is logged and the edges are listed in ``unresolved_edges``
    (the interface is then seen through its endpoint-sign chords).
    """
    nt = mesh.n_triangles
    if ls.is_none:
        return InterfaceData(np.full(nt, PLUS, dtype=np.int64),
                             np.full((mesh.n_edges, 2), np.nan), {})
    bad = unresolved_edges(mesh, ls)
    if len(bad):
        msg = (f"N={mesh.N}: {len(bad)} edge(s) cross the interface more than once "
               f"(first: edge {bad[0]}); refine the mesh")
        if strict:
            raise ResolutionError(msg)
        log.warning(msg)
    p0 = mesh.vertices[mesh.edges[:, 0]]
    p1 = mesh.vertices[mesh.edges[:, 1]]
    edge_points, _ = edge_crossings(p0, p1, ls, mesh.h)

    tri_pts = mesh.triangle_points()
    centroid_plus = _is_plus(ls.at(tri_pts.mean(axis=1)))
    labels = np.where(centroid_plus, PLUS, MINUS).astype(np.int64)
    vplus = _is_plus(ls.at(mesh.vertices))[mesh.triangles]
    cut_mask = ~(vplus.all(axis=1) | (~vplus).all(axis=1))

    cuts = {}
    for t in np.flatnonzero(cut_mask):
        crossing = edge_points[mesh.triangle_edges[t]]
        try:
            cuts[int(t)] = cut_triangle(tri_pts[t], vplus[t], crossing, t)
        except DegenerateCutError:
            continue  # keeps the centroid label
        labels[t] = INTERFACE
    return InterfaceData(labels, edge_points, cuts, bad)


def classify_elements(mesh: Mesh, ls: LevelSet, strict: bool = False) -> np.ndarray:
    return analyze_interface(mesh, ls, strict).labels


def split_element(mesh: Mesh, tri: int, ls: LevelSet) -> ElementCut:
    verts = mesh.triangle_points(tri)
    plus = _is_plus(ls.at(verts))
    edges = mesh.edges[mesh.triangle_edges[tri]]
    crossing, _ = edge_crossings(mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]], ls, mesh.h)
    return cut_triangle(verts, plus, crossing, tri)
