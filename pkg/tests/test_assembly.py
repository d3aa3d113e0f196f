import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from crifem.assembly import (AssemblyConfig, DofMap, assemble, build_bases, edge_jump_matrix, element_dofs,
                             energy_norm, integrate_cut, local_mass, local_stiffness, triangle_quadrature)
from crifem.basis import cr_local_basis, immersed_local_basis
from crifem.geometry import PLUS, LevelSet, analyze_interface, build_uniform_mesh, cut_triangle
from crifem.material import LameField

REF = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
CONTRAST = LameField(0.5, 5.0, 2.5, 25.0)


def discretise(N, ls, mat, **cfg):
    mesh = build_uniform_mesh(N)
    data = analyze_interface(mesh, ls)
    return assemble(mesh, data, None, mat, AssemblyConfig(**cfg))


# ---------------------------------------------------------------- quadrature


@pytest.mark.parametrize("order, degree", [(1, 1), (2, 2), (3, 4)])
def test_quadrature_monomials(order, degree):
    pts, w = triangle_quadrature(order)
    assert np.all(w > 0) and w.sum() == pytest.approx(0.5, abs=1e-15)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            assert np.dot(w, pts[:, 0] ** a * pts[:, 1] ** b) == pytest.approx(exact, abs=1e-14)


def test_quadrature_examples():
    pts, w = triangle_quadrature(1)
    assert np.dot(w, pts[:, 0]) == pytest.approx(1 / 6)
    pts, w = triangle_quadrature(2)
    assert np.dot(w, pts[:, 0] ** 2) == pytest.approx(1 / 12)
    with pytest.raises(ValueError):
        triangle_quadrature(5)


def test_integrate_cut_examples():
    assert integrate_cut([[0, 0], [1, 0], [1, 1], [0, 1]], lambda x, y: np.ones_like(x)) == pytest.approx(1.0)
    assert integrate_cut(REF, lambda x, y: x) == pytest.approx(1 / 6)
    with pytest.raises(ValueError):
        integrate_cut([[0, 0], [1, 1]], lambda x, y: x)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2), st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.integers(0, 2), st.integers(0, 2))
def test_integrate_cut_exact_for_quadratics(k, t0, t1, a, b):
    plus = np.array([True] * 3)
    plus[k] = False
    cross = np.full((3, 2), np.nan)
    i, j = (k + 1) % 3, (k + 2) % 3
    cross[j] = REF[k] + t0 * (REF[i] - REF[k])
    cross[i] = REF[k] + t1 * (REF[j] - REF[k])
    cut = cut_triangle(REF, plus, cross)
    if a + b > 2:
        return
    f = lambda x, y: x ** a * y ** b
    whole = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
    assert integrate_cut(cut.poly_minus, f) + integrate_cut(cut.poly_plus, f) == pytest.approx(whole, abs=1e-14)
    ones = lambda x, y: np.ones_like(x)
    assert integrate_cut(cut.poly_minus, ones) == pytest.approx(cut.area_minus, abs=1e-12)


# ---------------------------------------------------------------- local matrices


def test_local_stiffness_null_space():
    b = cr_local_basis(REF)
    K = local_stiffness(b, LameField.uniform(1.0, 2.0))
    const = np.array([1, 1, 1, 0, 0, 0.0])
    np.testing.assert_allclose(K @ const, 0, atol=1e-14)
    # rotation (-y, x): edge means of -y and x on edges 0, 1, 2
    rot = np.array([-0.5, -0.5, 0.0, 0.5, 0.0, 0.5])
    assert rot @ K @ rot == pytest.approx(0.0, abs=1e-14)


def test_local_stiffness_stretch_energy():
    K = local_stiffness(cr_local_basis(REF), LameField.uniform(1.0, 1e-300))
    u = np.array([0.5, 0.0, 0.5, 0, 0, 0])  # edge means of (x, 0)
    assert u @ K @ u == pytest.approx(1.0, rel=1e-14)


def test_local_mass_uncut():
    M = local_mass(cr_local_basis(REF))
    np.testing.assert_allclose(M, np.eye(6) * 0.5 / 3, atol=1e-15)
    one = np.array([1, 1, 1, 0, 0, 0.0])
    assert one @ M @ one == pytest.approx(0.5)


def test_cut_mass_equals_uncut_without_jump():
    cross = np.full((3, 2), np.nan)
    cross[2], cross[1] = [0.3, 0.0], [0.0, 0.7]
    cut = cut_triangle(REF, [False, True, True], cross)
    b = immersed_local_basis(cut, LameField.uniform(1.0, 3.0))
    np.testing.assert_allclose(local_mass(b), local_mass(cr_local_basis(REF)), atol=1e-12)
    np.testing.assert_allclose(local_stiffness(b, LameField.uniform(1.0, 3.0)),
                               local_stiffness(cr_local_basis(REF), LameField.uniform(1.0, 3.0)), atol=1e-11)


def _perm_dofs(perm):
    # slot j of the permuted triangle is the original slot perm[j]
    return np.concatenate([perm, np.asarray(perm) + 3])


@settings(max_examples=60, deadline=None)
@given(st.permutations([0, 1, 2]), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_local_forms_relabeling_invariant(perm, t0, t1):
    perm = np.array(perm)
    cross = np.full((3, 2), np.nan)
    cross[2], cross[1] = [t0, 0.0], [0.0, t1]
    plus = np.array([False, True, True])
    b0 = immersed_local_basis(cut_triangle(REF, plus, cross), CONTRAST)
    b1 = immersed_local_basis(cut_triangle(REF[perm], plus[perm], cross[perm]), CONTRAST)
    p = _perm_dofs(perm)
    for f in (lambda b: local_stiffness(b, CONTRAST), local_mass):
        np.testing.assert_allclose(f(b1), f(b0)[np.ix_(p, p)], rtol=1e-10, atol=1e-12)


def test_edge_jump_examples():
    p0, p1 = np.array([0.0, 0.0]), np.array([0.5, 0.0])
    mid = 0.5 * (p0 + p1)
    same = lambda pts: np.zeros((len(pts), 1, 2))
    assert np.all(edge_jump_matrix(p0, p1, mid, same, 3.0) == 0)
    const = lambda pts: np.tile([[1.0, 0.0]], (len(pts), 1, 1))
    G = edge_jump_matrix(p0, p1, mid, const, 3.0)
    assert G[0, 0] == pytest.approx(3.0 / 0.5 * 0.5)


def test_edge_jump_matches_dense_sampling():
    # two CR interpolants of a smooth field on the triangles sharing an edge
    h = 0.1
    A = np.array([[0, 0], [h, 0], [h, h]])
    B = np.array([[0, 0], [h, h], [0, h]])
    f = lambda x, y: np.stack([np.sin(3 * x + y), np.cos(x - 2 * y)], -1)

    def interp(V):
        b = cr_local_basis(V)
        g, w = np.polynomial.legendre.leggauss(6)
        d = np.zeros(6)
        for j in range(3):
            a, c = V[(j + 1) % 3], V[(j + 2) % 3]
            q = a + 0.5 * (g + 1)[:, None] * (c - a)
            m = 0.5 * np.dot(w, f(q[:, 0], q[:, 1]))
            d[j], d[j + 3] = m
        return b, d

    bA, dA = interp(A)
    bB, dB = interp(B)
    jump = lambda pts: (dA @ bA.values(pts) - dB @ bB.values(pts))[:, None, :]
    p0, p1 = A[0], A[2]
    G = edge_jump_matrix(p0, p1, 0.5 * (p0 + p1), jump, 1.0)
    t = np.linspace(0, 1, 20001)
    J = jump(p0 + t[:, None] * (p1 - p0))[:, 0]
    dense = np.trapezoid(np.sum(J ** 2, axis=1), t)  # |e| cancels with 1/|e|
    assert G[0, 0] > 0
    assert G[0, 0] == pytest.approx(dense, rel=1e-6)
    assert G[0, 0] < 50 * h ** 4


# ---------------------------------------------------------------- global


def test_dof_counts():
    asm = discretise(2, LevelSet.none(), LameField.uniform(1, 1))
    assert asm.A.shape == asm.M.shape == (16, 16)
    dm = DofMap.from_mesh(asm.mesh)
    assert dm.n_dofs == 2 * asm.mesh.n_edges
    assert dm.n_constrained == 2 * int(asm.mesh.boundary_edge.sum())


def _textbook_cr(N, mu, lam, tau0):
    """Plain loop CR elasticity assembly on the uniform mesh (no interface)."""
    mesh = build_uniform_mesh(N)
    n = 2 * mesh.n_edges
    K = np.zeros((n, n))
    M = np.zeros((n, n))
    S = np.zeros((n, n))
    for t, tri in enumerate(mesh.triangles):
        V = mesh.vertices[tri]
        area = 0.5 * abs((V[1, 0] - V[0, 0]) * (V[2, 1] - V[0, 1]) - (V[2, 0] - V[0, 0]) * (V[1, 1] - V[0, 1]))
        # gradient of lambda_j is the rotated opposite edge over 2|K|
        grads = np.array([[V[(j + 1) % 3, 1] - V[(j + 2) % 3, 1], V[(j + 2) % 3, 0] - V[(j + 1) % 3, 0]]
                          for j in range(3)]) / (2 * area)
        if np.dot(grads[0], V[0] - V[1]) < 0:
            grads = -grads
        gphi = -2 * grads  # CR profile 1 - 2 lambda_j
        # strain vector (e11, e22, 2 e12) for each of 6 functions
        B = np.zeros((3, 6))
        for j in range(3):
            B[:, j] = [gphi[j, 0], 0, gphi[j, 1]]
            B[:, j + 3] = [0, gphi[j, 1], gphi[j, 0]]
        C = np.array([[2 * mu + lam, lam, 0], [lam, 2 * mu + lam, 0], [0, 0, mu]])
        Ke = area * B.T @ C @ B
        dofs = [2 * e for e in mesh.triangle_edges[t]] + [2 * e + 1 for e in mesh.triangle_edges[t]]
        K[np.ix_(dofs, dofs)] += Ke
        M[np.ix_(dofs, dofs)] += area / 3 * np.eye(6)

    def cr_value(t, x):
        V = mesh.vertices[mesh.triangles[t]]
        T = np.array([[1, *V[0]], [1, *V[1]], [1, *V[2]]]).T
        lam_ = np.linalg.solve(T, [1, *x])
        return 1 - 2 * lam_

    g = np.array([-1, 1]) / math.sqrt(3)
    for e, (a, b) in enumerate(mesh.edges):
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        L = np.linalg.norm(pb - pa)
        tau = tau0 * 2 * mu
        for half in ((pa, 0.5 * (pa + pb)), (0.5 * (pa + pb), pb)):
            for s in g:
                x = half[0] + 0.5 * (s + 1) * (half[1] - half[0])
                w = 0.5 * L / 2
                vec = np.zeros(n)
                for side, t in enumerate(mesh.edge_triangles[e]):
                    if t < 0:
                        continue
                    sign = 1 if side == 0 else -1
                    for j, ed in enumerate(mesh.triangle_edges[t]):
                        vec[2 * ed] += sign * cr_value(t, x)[j]
                for comp in (0, 1):
                    v = np.zeros(n)
                    v[comp::2] = vec[0::2]
                    S += tau / L * w * np.outer(v, v)
    free = np.repeat(~mesh.boundary_edge, 2)
    return (K + S)[np.ix_(free, free)], M[np.ix_(free, free)]


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_matches_textbook_assembly(N):
    mu, lam, tau0 = 1.3, 2.1, 0.7
    asm = discretise(N, LevelSet.none(), LameField.uniform(mu, lam), tau=tau0)
    A_ref, M_ref = _textbook_cr(N, mu, lam, tau0)
    # textbook dofs are interleaved per edge like ours
    np.testing.assert_allclose(asm.A.toarray(), A_ref, atol=1e-12 * abs(A_ref).max())
    np.testing.assert_allclose(asm.M.toarray(), M_ref, atol=1e-12 * abs(M_ref).max())


@pytest.mark.parametrize("ls", [LevelSet.circle(0.6), LevelSet.line(0.5, -0.2)])
def test_spd_and_symmetric_small(ls):
    asm = discretise(8, ls, CONTRAST)
    for X in (asm.A, asm.M):
        assert abs(X - X.T).max() == 0.0
        assert np.linalg.eigvalsh(X.toarray()).min() > 0


def test_zero_field_forms():
    asm = discretise(4, LevelSet.circle(0.6), CONTRAST)
    z = np.zeros(asm.dofmap.n_free)
    assert energy_norm(z, asm) == 0.0
    assert z @ asm.M @ z == 0.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_energy_norm_identity(seed):
    asm = _circle8()
    v = np.random.default_rng(seed).standard_normal(asm.dofmap.n_free)
    assert energy_norm(v, asm) == pytest.approx(math.sqrt(v @ asm.A @ v), rel=1e-12)


_cache = {}


def _circle8():
    if "c8" not in _cache:
        _cache["c8"] = discretise(8, LevelSet.circle(0.6), CONTRAST)
    return _cache["c8"]


@pytest.mark.parametrize("N", [4, 8])
def test_stabilization_zero_on_continuous_p1(N):
    asm = discretise(N, LevelSet.none(), LameField.uniform(1.0, 1.0))
    mesh = asm.mesh
    rng = np.random.default_rng(N)
    nodal = rng.standard_normal((mesh.n_vertices, 2))
    on_bdry = np.zeros(mesh.n_vertices, bool)
    on_bdry[mesh.edges[mesh.boundary_edge].ravel()] = True
    nodal[on_bdry] = 0.0
    mids = 0.5 * (nodal[mesh.edges[:, 0]] + nodal[mesh.edges[:, 1]])
    u = asm.dofmap.restrict(mids.reshape(-1))
    assert abs(u @ asm.stabilization @ u) <= 1e-13 * (u @ asm.stiffness @ u)


def test_no_jump_interface_is_inert():
    mat = LameField.uniform(0.7, 1.9)
    a = discretise(8, LevelSet.circle(0.6), mat)
    b = discretise(8, LevelSet.none(), mat)
    # the only difference is where the edge quadrature splits, exact either way
    np.testing.assert_allclose(a.A.toarray(), b.A.toarray(), atol=1e-11)
    np.testing.assert_allclose(a.M.toarray(), b.M.toarray(), atol=1e-13)


def test_element_dofs_layout():
    mesh = build_uniform_mesh(2)
    d = element_dofs(mesh)
    np.testing.assert_array_equal(d[:, :3], 2 * mesh.triangle_edges)
    np.testing.assert_array_equal(d[:, 3:], 2 * mesh.triangle_edges + 1)


@pytest.mark.parametrize("scaling", ["mu", "local_mu", "lambda", "constant"])
def test_tau_scalings_assemble(scaling):
    asm = discretise(4, LevelSet.circle(0.6), CONTRAST, tau_scaling=scaling)
    assert sp.issparse(asm.A) and asm.A.nnz > 0


def test_bad_config():
    with pytest.raises(ValueError):
        AssemblyConfig(tau=0.0)
    with pytest.raises(ValueError):
        AssemblyConfig(tau_scaling="h")


def test_bases_cover_interface():
    mesh = build_uniform_mesh(16)
    data = analyze_interface(mesh, LevelSet.ellipse(0.6, 0.3))
    bases = build_bases(mesh, data, CONTRAST)
    assert set(bases.immersed) == set(int(t) for t in data.interface_triangles)
    np.testing.assert_allclose(bases.areas.sum(axis=1), np.abs(mesh.triangle_areas()), rtol=1e-12)
    uncut = ~bases.is_cut
    assert np.all(bases.areas[uncut & (data.labels == PLUS), 0] == 0)
