"""Quadrature, local element matrices and global assembly.

Global degrees of freedom are edge means: dof ``2*e + c`` is the mean of
component ``c`` over edge ``e``.  Boundary-edge dofs are eliminated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .basis import LocalBasisSet, cr_profiles, immersed_local_basis, strain_and_div, vector_from_profiles
from .geometry import INTERFACE, MINUS, InterfaceData, Mesh, signed_area
from .material import LameField, coefficients_at

_CHUNK = 16384

# ---------------------------------------------------------------- quadrature

_A4, _B4 = 0.445948490915965, 0.091576213509771
_W4a, _W4b = 0.223381589678011, 0.109951743655322


@lru_cache(maxsize=None)
def triangle_quadrature(order: int):
    """Points and weights on the reference triangle (0,0), (1,0), (0,1).

    order 1: centroid; 2: three interior points; 3: six-point Dunavant rule
    (exact to degree 4).  Weights are positive and sum to 1/2.
    """
    if order == 1:
        pts = np.array([[1 / 3, 1 / 3]])
        w = np.array([0.5])
    elif order == 2:
        pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        w = np.full(3, 1 / 6)
    elif order == 3:
        a, b = _A4, _B4
        pts = np.array([[a, a], [1 - 2 * a, a], [a, 1 - 2 * a],
                        [b, b], [1 - 2 * b, b], [b, 1 - 2 * b]])
        w = 0.5 * np.array([_W4a] * 3 + [_W4b] * 3)
        w = w * (0.5 / w.sum())
    else:
        raise ValueError(f"unsupported triangle quadrature order {order}")
    pts.setflags(write=False)
    w.setflags(write=False)
    return pts, w


def physical_quadrature(tri_pts: np.ndarray, order: int = 2):
    """Map the reference rule to triangles (..., 3, 2) -> points (..., q, 2), weights (..., q)."""
    ref, w = triangle_quadrature(order)
    p0 = tri_pts[..., 0:1, :]
    J1 = tri_pts[..., 1:2, :] - p0
    J2 = tri_pts[..., 2:3, :] - p0
    pts = p0 + ref[:, 0:1] * J1 + ref[:, 1:2] * J2
    det = np.abs(2.0 * signed_area(tri_pts))
    return pts, det[..., None] * w


def fan_triangles(poly) -> np.ndarray:
    poly = np.asarray(poly, dtype=float)
    return np.stack([np.stack([poly[0], poly[k], poly[k + 1]]) for k in range(1, len(poly) - 1)])


def polygon_quadrature(poly, order: int = 2):
    poly = np.asarray(poly, dtype=float)
    if len(poly) < 3:
        raise ValueError("degenerate polygon")
    tris = fan_triangles(poly)
    if np.abs(signed_area(tris)).sum() <= 1e-300:
        raise ValueError("degenerate polygon")
    pts, w = physical_quadrature(tris, order)
    return pts.reshape(-1, 2), w.ravel()


def integrate_cut(poly, integrand, order: int = 2) -> float:
    """Integral of ``integrand(x, y)`` over a convex polygon by fan triangulation."""
    pts, w = polygon_quadrature(poly, order)
    return float(np.dot(w, integrand(pts[:, 0], pts[:, 1])))


def segment_quadrature(n: int = 2):
    g, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (g + 1.0), 0.5 * w


# ---------------------------------------------------------------- config & dofs


@dataclass(frozen=True)
class AssemblyConfig:
    """tau_scaling: 'mu' (tau * 2*max(mu-, mu+), default), 'local_mu'
    (tau * 2*max mu of the regions touching the edge), 'lambda'
    (tau * (2*max mu + max lambda)) or 'constant' (tau)."""

    tau: float = 1.0
    tau_scaling: str = "mu"
    tri_order: int = 2
    seg_points: int = 2

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.tau_scaling not in ("mu", "local_mu", "lambda", "constant"):
            raise ValueError(f"unknown tau scaling {self.tau_scaling!r}")


@dataclass(frozen=True)
class DofMap:
    n_edges: int
    free: np.ndarray  # (2*n_edges,) bool
    free_index: np.ndarray  # (2*n_edges,) position among free dofs or -1

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "DofMap":
        free = np.repeat(~mesh.boundary_edge, 2)
        idx = np.full(free.shape, -1, dtype=np.int64)
        idx[free] = np.arange(np.count_nonzero(free))
        return cls(mesh.n_edges, free, idx)

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_edges

    @property
    def n_free(self) -> int:
        return int(np.count_nonzero(self.free))

    @property
    def n_constrained(self) -> int:
        return self.n_dofs - self.n_free

    def expand(self, u_free) -> np.ndarray:
        u = np.zeros(self.n_dofs)
        u[self.free] = u_free
        return u

    def restrict(self, u_full) -> np.ndarray:
        return np.asarray(u_full)[self.free]


def element_dofs(mesh: Mesh) -> np.ndarray:
    te = mesh.triangle_edges
    return np.concatenate([2 * te, 2 * te + 1], axis=1)  # (nt, 6)


# ---------------------------------------------------------------- element bases


@dataclass
class ElementBases:
    """Per-element basis coefficients for one mesh level (read-only after construction)."""

    mesh: Mesh
    interface: InterfaceData
    material: LameField
    coef: np.ndarray  # (nt, 2, 6, 2, 3)
    areas: np.ndarray  # (nt, 2) area of the minus / plus part
    is_cut: np.ndarray  # (nt,) bool
    chord_point: np.ndarray  # (nt, 2)
    chord_normal: np.ndarray  # (nt, 2)
    immersed: dict = field(default_factory=dict)  # tri -> LocalBasisSet

    def side(self, tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Side index (0 minus, 1 plus) used to evaluate element ``tri`` at ``pts``."""
        d = np.einsum("...k,...k->...", pts - self.chord_point[tri], self.chord_normal[tri])
        return np.where(self.is_cut[tri], d >= 0.0, 1).astype(np.int64)

    def values(self, tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Basis values for elements ``tri`` (n,) at points (n, q, 2) -> (n, q, 6, 2)."""
        tri = np.asarray(tri)
        s = self.side(tri[:, None], pts)
        c = self.coef[tri[:, None], s]  # (n, q, 6, 2, 3)
        return c[..., 0] + c[..., 1] * pts[:, :, None, None, 0] + c[..., 2] * pts[:, :, None, None, 1]

    def local(self, tri: int) -> LocalBasisSet:
        if tri in self.immersed:
            return self.immersed[tri]
        return LocalBasisSet("standard", self.mesh.triangle_points(tri), self.coef[tri])

    def region_mu(self) -> np.ndarray:
        """Largest density-normalised mu present in each element."""
        mu_m = coefficients_at(self.material, "-")[1]
        mu_p = coefficients_at(self.material, "+")[1]
        lab = self.interface.labels
        return np.where(lab == INTERFACE, max(mu_m, mu_p), np.where(lab == MINUS, mu_m, mu_p))


def build_bases(mesh: Mesh, interface: InterfaceData, mat: LameField) -> ElementBases:
    pts = mesh.triangle_points()
    nt = len(pts)
    c = vector_from_profiles(cr_profiles(pts))
    coef = np.repeat(c[:, None], 2, axis=1)
    K = np.abs(signed_area(pts))
    areas = np.zeros((nt, 2))
    lab = interface.labels
    areas[:, 0] = np.where(lab == MINUS, K, 0.0)
    areas[:, 1] = np.where(lab == MINUS, 0.0, K)
    is_cut = np.zeros(nt, dtype=bool)
    cp = np.zeros((nt, 2))
    cn = np.zeros((nt, 2))
    immersed = {}
    for t in interface.interface_triangles:
        cut = interface.cuts[int(t)]
        b = immersed_local_basis(cut, mat)
        immersed[int(t)] = b
        coef[t] = b.coef
        areas[t] = (cut.area_minus, cut.area_plus)
        is_cut[t] = True
        cp[t] = cut.D
        cn[t] = cut.normal
    return ElementBases(mesh, interface, mat, coef, areas, is_cut, cp, cn, immersed)


# ---------------------------------------------------------------- local matrices


def _stiffness_blocks(coef, areas, mat: LameField):
    """Element stiffness for coef (n, 2, 6, 2, 3) and side areas (n, 2) -> (n, 6, 6)... per dof."""
    eps, div = strain_and_div(coef)  # (n, 2, 6, 2, 2), (n, 2, 6)
    out = 0.0
    for s, side in enumerate(("-", "+")):
        lam, mu, _ = coefficients_at(mat, side)
        ee = np.einsum("nikl,njkl->nij", eps[:, s], eps[:, s])
        dd = div[:, s, :, None] * div[:, s, None, :]
        out = out + areas[:, s, None, None] * (2.0 * mu * ee + lam * dd)
    return 0.5 * (out + np.swapaxes(out, 1, 2))


def local_stiffness(basis: LocalBasisSet, mat: LameField, label: int | None = None) -> np.ndarray:
    """6x6 element matrix of int_K 2 mu eps:eps + lambda div div.

    Rows/cols follow the local basis ordering (first component on edges
    0..2, then second component).  ``label`` picks the material of an uncut
    element (default plus).
    """
    K = abs(float(signed_area(basis.vertices)))
    if basis.cut is not None:
        areas = np.array([[basis.cut.area_minus, basis.cut.area_plus]])
    elif label == MINUS:
        areas = np.array([[K, 0.0]])
    else:
        areas = np.array([[0.0, K]])
    return _stiffness_blocks(basis.coef[None], areas, mat)[0]


def local_mass(basis: LocalBasisSet, order: int = 2) -> np.ndarray:
    if basis.cut is None:
        pts, w = physical_quadrature(basis.vertices, order)
    else:
        pm, wm = polygon_quadrature(basis.cut.poly_minus, order)
        pp, wp = polygon_quadrature(basis.cut.poly_plus, order)
        pts, w = np.vstack([pm, pp]), np.concatenate([wm, wp])
    vals = basis.values(pts)  # (q, 6, 2)
    M = np.einsum("q,qic,qjc->ij", w, vals, vals)
    return 0.5 * (M + M.T)


def edge_jump_matrix(p0, p1, split, traces, tau_e: float, seg_points: int = 2) -> np.ndarray:
    """(tau_e/|e|) int_e [u].[v] for the functions whose traces are given.

    ``traces`` maps points (q, 2) to values (q, nfun, 2) of the jump of each
    function (already signed).  The edge is integrated piecewise on
    [p0, split] and [split, p1].
    """
    p0, p1, split = (np.asarray(p, dtype=float) for p in (p0, p1, split))
    t, w = segment_quadrature(seg_points)
    pts, wts = [], []
    for a, b in ((p0, split), (split, p1)):
        L = np.hypot(*(b - a))
        if L > 0.0:
            pts.append(a + t[:, None] * (b - a))
            wts.append(L * w)
    pts, wts = np.vstack(pts), np.concatenate(wts)
    J = traces(pts)
    elen = np.hypot(*(p1 - p0))
    G = tau_e / elen * np.einsum("q,qic,qjc->ij", wts, J, J)
    return 0.5 * (G + G.T)


# ---------------------------------------------------------------- global assembly


@dataclass
class Assembly:
    bases: ElementBases
    dofmap: DofMap
    config: AssemblyConfig
    stiffness: sp.csr_matrix  # free x free
    stabilization: sp.csr_matrix
    mass: sp.csr_matrix

    @property
    def A(self) -> sp.csr_matrix:
        return (self.stiffness + self.stabilization).tocsr()

    @property
    def M(self) -> sp.csr_matrix:
        return self.mass

    @property
    def mesh(self) -> Mesh:
        return self.bases.mesh


def _accumulate(dofs, blocks, n):
    """Sum local blocks (n_loc, k, k) with dofs (n_loc, k) into an n x n CSR matrix."""
    k = dofs.shape[1]
    rows = np.repeat(dofs, k, axis=1).ravel()
    cols = np.tile(dofs, (1, k)).ravel()
    return sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _global_stiffness(bases: ElementBases, dofs: np.ndarray, n: int):
    A = sp.csr_matrix((n, n))
    for s in range(0, len(dofs), _CHUNK):
        sl = slice(s, s + _CHUNK)
        blocks = _stiffness_blocks(bases.coef[sl], bases.areas[sl], bases.material)
        A = A + _accumulate(dofs[sl], blocks, n)
    return A


def _global_mass(bases: ElementBases, dofs: np.ndarray, n: int, order: int):
    mesh = bases.mesh
    uncut = np.flatnonzero(~bases.is_cut)
    M = sp.csr_matrix((n, n))
    for s in range(0, len(uncut), _CHUNK):
        t = uncut[s:s + _CHUNK]
        pts, w = physical_quadrature(mesh.triangle_points(t), order)
        vals = bases.values(t, pts)
        blocks = np.einsum("nq,nqic,nqjc->nij", w, vals, vals)
        blocks = 0.5 * (blocks + np.swapaxes(blocks, 1, 2))
        M = M + _accumulate(dofs[t], blocks, n)
    cut = np.flatnonzero(bases.is_cut)
    if len(cut):
        blocks = np.stack([local_mass(bases.immersed[int(t)], order) for t in cut])
        M = M + _accumulate(dofs[cut], blocks, n)
    return M


def edge_split_points(mesh: Mesh, interface: InterfaceData) -> np.ndarray:
    p0 = mesh.vertices[mesh.edges[:, 0]]
    p1 = mesh.vertices[mesh.edges[:, 1]]
    split = 0.5 * (p0 + p1)
    has = ~np.isnan(interface.edge_points[:, 0])
    split[has] = interface.edge_points[has]
    return split


def edge_tau(bases: ElementBases, cfg: AssemblyConfig) -> np.ndarray:
    mesh = bases.mesh
    mat = bases.material
    lam_m, mu_m, _ = coefficients_at(mat, "-")
    lam_p, mu_p, _ = coefficients_at(mat, "+")
    ne = mesh.n_edges
    if cfg.tau_scaling == "mu":
        return np.full(ne, cfg.tau * 2.0 * max(mu_m, mu_p))
    if cfg.tau_scaling == "lambda":
        return np.full(ne, cfg.tau * (2.0 * max(mu_m, mu_p) + max(lam_m, lam_p)))
    if cfg.tau_scaling == "constant":
        return np.full(ne, cfg.tau)
    rm = bases.region_mu()
    et = mesh.edge_triangles
    mu_e = np.maximum(rm[et[:, 0]], np.where(et[:, 1] >= 0, rm[np.maximum(et[:, 1], 0)], 0.0))
    return cfg.tau * 2.0 * mu_e


def edge_quadrature(mesh: Mesh, interface: InterfaceData, edges: np.ndarray, seg_points: int = 2):
    """Points (n, 2*q, 2) and weights (n, 2*q) on the two pieces of each edge."""
    p0 = mesh.vertices[mesh.edges[edges, 0]]
    p1 = mesh.vertices[mesh.edges[edges, 1]]
    sp_ = edge_split_points(mesh, interface)[edges]
    t, w = segment_quadrature(seg_points)
    pts, wts = [], []
    for a, b in ((p0, sp_), (sp_, p1)):
        pts.append(a[:, None, :] + t[None, :, None] * (b - a)[:, None, :])
        wts.append(np.hypot(*(b - a).T)[:, None] * w[None, :])
    return np.concatenate(pts, axis=1), np.concatenate(wts, axis=1)


def _global_stabilization(bases: ElementBases, dofs: np.ndarray, n: int, cfg: AssemblyConfig):
    mesh = bases.mesh
    tau = edge_tau(bases, cfg)
    elen = mesh.edge_lengths()
    et = mesh.edge_triangles
    S = sp.csr_matrix((n, n))
    for interior in (False, True):
        edges = np.flatnonzero(mesh.boundary_edge != interior)
        for s in range(0, len(edges), _CHUNK):
            e = edges[s:s + _CHUNK]
            pts, w = edge_quadrature(mesh, bases.interface, e, cfg.seg_points)
            J = bases.values(et[e, 0], pts)
            ldofs = dofs[et[e, 0]]
            if interior:
                J = np.concatenate([J, -bases.values(et[e, 1], pts)], axis=2)
                ldofs = np.concatenate([ldofs, dofs[et[e, 1]]], axis=1)
            blocks = np.einsum("nq,nqic,nqjc->nij", w, J, J) * (tau[e] / elen[e])[:, None, None]
            blocks = 0.5 * (blocks + np.swapaxes(blocks, 1, 2))
            S = S + _accumulate(ldofs, blocks, n)
    return S


def _symmetric(A, name):
    A = A.tocsr()
    A.sum_duplicates()
    defect = abs(A - A.T).max() if A.nnz else 0.0
    scale = abs(A).max() if A.nnz else 1.0
    if defect > 1e-12 * max(scale, 1e-300):
        raise AssertionError(f"{name} symmetry defect {defect:.3e}")
    A = (0.5 * (A + A.T)).tocsr()
    A.eliminate_zeros()
    return A


def assemble(mesh: Mesh, interface: InterfaceData, bases: ElementBases | None,
             mat: LameField, cfg: AssemblyConfig = AssemblyConfig()) -> Assembly:
    """Stiffness, edge-jump stabilization and mass over the free dofs."""
    if bases is None:
        bases = build_bases(mesh, interface, mat)
    dofmap = DofMap.from_mesh(mesh)
    dofs = element_dofs(mesh)
    n = dofmap.n_dofs
    free = dofmap.free
    K = _global_stiffness(bases, dofs, n)[free][:, free]
    S = _global_stabilization(bases, dofs, n, cfg)[free][:, free]
    M = _global_mass(bases, dofs, n, cfg.tri_order)[free][:, free]
    return Assembly(bases, dofmap, cfg, _symmetric(K, "stiffness"), _symmetric(S, "stabilization"),
                    _symmetric(M, "mass"))


def energy_norm(v, asm: Assembly) -> float:
    """sqrt(sum_K |v|_{a,K}^2 + sum_e tau/h int_e [v]^2) from the assembled parts."""
    v = np.asarray(v, dtype=float)
    val = float(v @ (asm.stiffness @ v) + v @ (asm.stabilization @ v))
    return float(np.sqrt(max(val, 0.0)))


# ---------------------------------------------------------------- functionals


def element_quadrature(bases: ElementBases, order: int = 2):
    """Cut-aware quadrature over every element: (tri, points, weights) flat arrays."""
    mesh = bases.mesh
    uncut = np.flatnonzero(~bases.is_cut)
    pts, w = physical_quadrature(mesh.triangle_points(uncut), order)
    q = pts.shape[1]
    tris = [np.repeat(uncut, q)]
    P = [pts.reshape(-1, 2)]
    W = [w.ravel()]
    for t in np.flatnonzero(bases.is_cut):
        cut = bases.interface.cuts[int(t)]
        for poly in (cut.poly_minus, cut.poly_plus):
            pp, ww = polygon_quadrature(poly, order)
            tris.append(np.full(len(ww), t))
            P.append(pp)
            W.append(ww)
    return np.concatenate(tris), np.vstack(P), np.concatenate(W)


def load_vector(asm: Assembly, f, order: int | None = None) -> np.ndarray:
    """(f, phi_j) over the free dofs; ``f(x, y)`` returns (..., 2)."""
    bases = asm.bases
    order = asm.config.tri_order if order is None else order
    tri, pts, w = element_quadrature(bases, order)
    fv = np.asarray(f(pts[:, 0], pts[:, 1]), dtype=float)
    vals = bases.values(tri, pts[:, None, :])[:, 0]  # (nq, 6, 2)
    contrib = w[:, None] * np.einsum("qic,qc->qi", vals, fv)
    dofs = element_dofs(bases.mesh)[tri]
    b = np.bincount(dofs.ravel(), weights=contrib.ravel(), minlength=asm.dofmap.n_dofs)
    return b[asm.dofmap.free]


def evaluate(bases: ElementBases, u_full: np.ndarray, tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Discrete field values at points (n, 2) inside elements tri (n,)."""
    vals = bases.values(np.asarray(tri), np.asarray(pts)[:, None, :])[:, 0]
    d = u_full[element_dofs(bases.mesh)[tri]]
    return np.einsum("ni,nic->nc", d, vals)
