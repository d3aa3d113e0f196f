"""Local vector-valued P1-nonconforming basis functions.

A vector-valued affine polynomial is stored as a (2, 3) coefficient array
``[[a0, b0, c0], [a1, b1, c1]]`` meaning ``(a0 + b0 x + c0 y, a1 + b1 x + c1 y)``.
A local basis set stores ``coef`` of shape (2, 6, 2, 3): side (0 = minus,
1 = plus), basis index, component, monomial.  Basis functions 0..2 carry
the first component on local edges 0..2, functions 3..5 the second.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ElementCut, signed_area
from .material import LameField, coefficients_at

SOLVE_RESIDUAL_TOL = 1e-8


class BasisConditioningError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearVecPoly:
    coef: np.ndarray  # (2, 3)

    def __call__(self, x, y):
        c = self.coef
        return np.stack([c[0, 0] + c[0, 1] * x + c[0, 2] * y,
                         c[1, 0] + c[1, 1] * x + c[1, 2] * y], axis=-1)


def _coef(p):
    return p.coef if isinstance(p, LinearVecPoly) else np.asarray(p, dtype=float)


def strain_and_div(p):
    c = _coef(p)
    b0, c0, b1, c1 = c[..., 0, 1], c[..., 0, 2], c[..., 1, 1], c[..., 1, 2]
    off = 0.5 * (c0 + b1)
    eps = np.stack([np.stack([b0, off], -1), np.stack([off, c1], -1)], -2)
    return eps, b0 + c1


def traction(p, lam, mu, normal):
    eps, div = strain_and_div(p)
    sigma = 2.0 * mu * eps + lam * div[..., None, None] * np.eye(2)
    return sigma @ np.asarray(normal, dtype=float)


def _traction_rows(lam, mu, n):
    """Matrix mapping the 6 coefficients (comp-major) of one side to its traction."""
    n1, n2 = n
    T = np.zeros((2, 6))
    # coefficient order: a0 b0 c0 a1 b1 c1
    T[0, 1] = (2 * mu + lam) * n1
    T[0, 5] = lam * n1
    T[0, 2] = mu * n2
    T[0, 4] = mu * n2
    T[1, 2] = mu * n1
    T[1, 4] = mu * n1
    T[1, 1] = lam * n2
    T[1, 5] = (2 * mu + lam) * n2
    return T


def barycentric_coefficients(pts: np.ndarray) -> np.ndarray:
    """Affine coefficients of the barycentric coordinates, (..., 3 vertices, 3 monomials)."""
    pts = np.asarray(pts, dtype=float)
    V = np.concatenate([np.ones(pts.shape[:-1] + (1,)), pts], axis=-1)  # (..., 3, 3)
    return np.swapaxes(np.linalg.inv(V), -1, -2)


def cr_profiles(pts: np.ndarray) -> np.ndarray:
    """Scalar CR profiles 1 - 2*lambda_j, (..., 3, 3)."""
    prof = -2.0 * barycentric_coefficients(pts)
    prof[..., 0] += 1.0
    return prof


def vector_from_profiles(prof: np.ndarray) -> np.ndarray:
    """(..., 3, 3) scalar profiles -> (..., 6, 2, 3) vector basis coefficients."""
    out = np.zeros(prof.shape[:-2] + (6, 2, 3))
    out[..., :3, 0, :] = prof
    out[..., 3:, 1, :] = prof
    return out


@dataclass(frozen=True)
class LocalBasisSet:
    kind: str  # "standard" | "immersed"
    vertices: np.ndarray  # (3, 2)
    coef: np.ndarray  # (2, 6, 2, 3)
    cut: ElementCut | None = None
    residual: float = 0.0

    def side(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.cut is None:
            return np.ones(pts.shape[:-1], dtype=np.int64)
        return self.cut.side(pts)

    def poly(self, i: int, side: int = 1) -> LinearVecPoly:
        return LinearVecPoly(self.coef[side, i])

    def values(self, pts) -> np.ndarray:
        """Basis values at points, shape (npts, 6, 2)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        mono = np.column_stack([np.ones(len(pts)), pts])
        c = self.coef[self.side(pts)]  # (npts, 6, 2, 3)
        return np.einsum("picm,pm->pic", c, mono)

    def contains(self, pt, tol=1e-12) -> bool:
        lam = barycentric_coefficients(self.vertices)
        b = lam @ np.array([1.0, pt[0], pt[1]])
        return bool(np.all(b >= -tol))


def cr_local_basis(vertices) -> LocalBasisSet:
    v = np.asarray(vertices, dtype=float)
    area = float(signed_area(v))
    scale = max(np.ptp(v[:, 0]), np.ptp(v[:, 1])) ** 2
    if abs(area) <= 1e-14 * scale:
        raise ValueError("degenerate triangle")
    c = vector_from_profiles(cr_profiles(v))
    return LocalBasisSet("standard", v, np.stack([c, c]))


def edge_pieces(vertices, cut: ElementCut | None, j: int):
    """Linear pieces of local edge j as (start, end, side) triples."""
    a = vertices[(j + 1) % 3]
    b = vertices[(j + 2) % 3]
    if cut is None:
        return [(a, b, 1)]
    if j in cut.cut_edges:
        P = cut.D if cut.cut_edges[0] == j else cut.E
        pieces = [(a, P), (P, b)]
    else:
        pieces = [(a, b)]
    out = []
    for s, e in pieces:
        if np.hypot(*(e - s)) > 0.0:
            out.append((s, e, int(cut.side(0.5 * (s + e)))))
    return out


def immersed_system(cut: ElementCut, mat: LameField):
    """The 12x12 interface-constrained system and its right-hand sides."""
    lam_m, mu_m, _ = coefficients_at(mat, "-")
    lam_p, mu_p, _ = coefficients_at(mat, "+")
    v = cut.vertices
    S = np.zeros((12, 12))
    # unknown index: side*6 + comp*3 + monomial
    for j in range(3):
        elen = np.hypot(*(v[(j + 2) % 3] - v[(j + 1) % 3]))
        for s, e, side in edge_pieces(v, cut, j):
            w = np.hypot(*(e - s)) / elen
            m = 0.5 * (s + e)
            row = w * np.array([1.0, m[0], m[1]])
            for comp in range(2):
                S[comp * 3 + j, side * 6 + comp * 3: side * 6 + comp * 3 + 3] += row
    r = 6
    for P in (cut.D, cut.E):
        mono = np.array([1.0, P[0], P[1]])
        for comp in range(2):
            S[r, comp * 3: comp * 3 + 3] = mono
            S[r, 6 + comp * 3: 6 + comp * 3 + 3] = -mono
            r += 1
    S[10:12, :6] = _traction_rows(lam_m, mu_m, cut.normal)
    S[10:12, 6:] = -_traction_rows(lam_p, mu_p, cut.normal)
    R = np.zeros((12, 6))
    R[:6, :6] = np.eye(6)
    return S, R


def immersed_local_basis(cut: ElementCut, mat: LameField) -> LocalBasisSet:
    S, R = immersed_system(cut, mat)
    # row equilibration; traction rows scale with the moduli
    scale = np.abs(S).max(axis=1)
    S = S / scale[:, None]
    R = R / scale[:, None]
    X = np.linalg.solve(S, R)  # LU with partial pivoting
    res = float(np.abs(S @ X - R).max())
    if not np.isfinite(res) or res > SOLVE_RESIDUAL_TOL:
        raise BasisConditioningError(
            f"immersed basis on triangle {cut.triangle_index}: residual {res:.3e}")
    # X[:, i] -> coefficients (side, comp, mono)
    coef = X.T.reshape(6, 2, 2, 3).transpose(1, 0, 2, 3)
    return LocalBasisSet("immersed", cut.vertices, np.ascontiguousarray(coef), cut, res)


def local_basis(vertices, cut: ElementCut | None, mat: LameField) -> LocalBasisSet:
    return cr_local_basis(vertices) if cut is None else immersed_local_basis(cut, mat)


def edge_averages(basis: LocalBasisSet) -> np.ndarray:
    """Edge means of every basis function, (6 functions, 2 comps, 3 edges).

    Uses 4-point Gauss on each linear piece.
    """
    g, w = np.polynomial.legendre.leggauss(4)
    t = 0.5 * (g + 1.0)
    w = 0.5 * w
    out = np.zeros((6, 2, 3))
    v = basis.vertices
    for j in range(3):
        elen = np.hypot(*(v[(j + 2) % 3] - v[(j + 1) % 3]))
        for s, e, side in edge_pieces(v, basis.cut, j):
            pts = s + t[:, None] * (e - s)
            mono = np.column_stack([np.ones(len(t)), pts])
            vals = np.einsum("icm,qm->qic", basis.coef[side], mono)
            out[:, :, j] += np.hypot(*(e - s)) / elen * np.einsum("q,qic->ic", w, vals)
    return out


def eval_field(basis: LocalBasisSet, dofs, point, tol=1e-12) -> np.ndarray:
    """Value at ``point`` of sum_i dofs[i] * phi_i."""
    point = np.asarray(point, dtype=float)
    if not basis.contains(point, tol):
        raise ValueError(f"point {point} lies outside the triangle")
    return np.asarray(dofs, dtype=float) @ basis.values(point[None])[0]
