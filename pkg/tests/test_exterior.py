import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from kplane.exterior import (
    DomainError,
    MVector,
    basis_indices,
    hyperplane_projections,
    induced_map,
    induced_matrix,
    interior_projection,
    restrict_to_plane,
    sphere_volume,
    symbol_constant,
    symbol_h,
    wedge,
)
from kplane.grassmann import Plane, sample_haar

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def e(d, *index):
    return MVector.basis(d, index)


def minors_by_wedging(A, m):
    """Oracle: column J of the induced matrix is A e_j1 ^ ... ^ A e_jm."""
    A = np.asarray(A, dtype=float)
    dst, src = A.shape
    cols = []
    for J in basis_indices(src, m):
        acc = MVector(dst, 0, np.ones(1))
        for j in J:
            acc = wedge(acc, MVector.vector(A[:, j]))
        cols.append(acc.coeffs)
    return np.column_stack(cols)


# -- basis -------------------------------------------------------------------


def test_basis_lexicographic():
    assert basis_indices(3, 2) == ((0, 1), (0, 2), (1, 2))
    assert basis_indices(5, 0) == ((),)
    idx = basis_indices(4, 2)
    assert len(idx) == 6 and idx[0] == (0, 1) and idx[-1] == (2, 3)


def test_basis_degree_too_large():
    with pytest.raises(DomainError):
        basis_indices(2, 3)


@pytest.mark.parametrize("d", range(0, 7))
def test_basis_sizes(d):
    for m in range(d + 1):
        idx = basis_indices(d, m)
        assert len(idx) == math.comb(d, m)
        assert list(idx) == sorted(idx)
        assert all(list(I) == sorted(set(I)) for I in idx)


# -- wedge -------------------------------------------------------------------


def test_wedge_examples():
    assert np.array_equal(wedge(e(3, 0), e(3, 1)).coeffs, e(3, 0, 1).coeffs)
    assert np.array_equal(wedge(e(3, 1), e(3, 0)).coeffs, -e(3, 0, 1).coeffs)
    s = e(3, 0) + e(3, 1)
    assert np.array_equal((s ^ e(3, 1)).coeffs, e(3, 0, 1).coeffs)


def test_wedge_degree_overflow():
    with pytest.raises(DomainError):
        wedge(e(2, 0, 1), e(2, 0))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.data())
def test_wedge_graded_anticommutative_and_associative(d, data):
    p = data.draw(st.integers(0, d))
    q = data.draw(st.integers(0, d - p))
    r = data.draw(st.integers(0, d - p - q))
    u, v, w = (
        MVector(d, deg, np.array(data.draw(arrays(float, math.comb(d, deg), elements=finite))))
        for deg in (p, q, r)
    )
    np.testing.assert_allclose((u ^ v).coeffs, (-1) ** (p * q) * (v ^ u).coeffs, atol=1e-12)
    np.testing.assert_allclose(((u ^ v) ^ w).coeffs, (u ^ (v ^ w)).coeffs, atol=1e-10)


# -- induced maps --------------------------------------------------------------


def test_induced_map_examples():
    np.testing.assert_array_equal(induced_map(np.eye(3), 2).matrix, np.eye(3))
    np.testing.assert_array_equal(induced_map(np.diag([2.0, 3.0]), 2).matrix, [[6.0]])
    A = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 2)))[0].T
    np.testing.assert_array_equal(induced_map(A, 1).matrix, A)


def test_induced_map_degree_out_of_range():
    with pytest.raises(DomainError):
        induced_map(np.ones((2, 3)), 3)


@pytest.mark.parametrize("dst,src", [(2, 2), (3, 2), (3, 3), (4, 2), (4, 4), (5, 3), (5, 5)])
def test_minors_agree_with_column_wedging(dst, src):
    rng = np.random.default_rng(dst * 10 + src)
    A = rng.standard_normal((dst, src))
    for m in range(0, min(dst, src) + 1):
        np.testing.assert_allclose(induced_matrix(A, m), minors_by_wedging(A, m), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_functoriality(a, b, c, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((a, b))
    B = rng.standard_normal((b, c))
    for m in range(0, min(a, b, c) + 1):
        lhs = induced_matrix(A @ B, m)
        rhs = induced_matrix(A, m) @ induced_matrix(B, m)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10 * max(1.0, np.abs(rhs).max()))


def test_induced_matrix_batched():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((4, 5, 4, 3))
    batched = induced_matrix(A, 2)
    for i, j in itertools.product(range(4), range(5)):
        np.testing.assert_allclose(batched[i, j], induced_matrix(A[i, j], 2), atol=1e-14)


@pytest.mark.parametrize("n", range(2, 6))
def test_orthonormal_frames_induce_isometries(n):
    rng = np.random.default_rng(n)
    for k in range(1, n + 1):
        F = np.linalg.qr(rng.standard_normal((n, k)))[0]
        for m in range(k + 1):
            E = induced_matrix(F, m)
            np.testing.assert_allclose(E.T @ E, np.eye(E.shape[1]), atol=1e-12)


# -- restriction ---------------------------------------------------------------


def test_restriction_kills_orthogonal_part():
    v = e(3, 0, 1) + 2.0 * e(3, 0, 2)
    P = Plane(np.eye(3)[:, :2])
    r = restrict_to_plane(v, P)
    assert r.dim == 2 and r.degree == 2
    np.testing.assert_allclose(r.coeffs, [1.0])


def test_restriction_roundtrip_inside_plane():
    rng = np.random.default_rng(5)
    P = sample_haar(4, 3, 1, rng).planes[0]
    w = rng.standard_normal(3)
    incl = induced_matrix(P.frame, 2)
    v = MVector(4, 2, incl @ w)
    np.testing.assert_allclose(restrict_to_plane(v, P).coeffs, w, atol=1e-14)


def test_restriction_is_adjoint_of_inclusion():
    rng = np.random.default_rng(6)
    for n, k, m in [(3, 2, 1), (4, 2, 2), (5, 3, 2), (5, 4, 3)]:
        P = sample_haar(n, k, 1, rng).planes[0]
        v = MVector(n, m, rng.standard_normal(math.comb(n, m)))
        vr = restrict_to_plane(v, P).coeffs
        incl = induced_matrix(P.frame, m)
        W = rng.standard_normal((100, math.comb(k, m)))
        assert np.abs(W @ vr - (W @ incl.T) @ v.coeffs).max() < 1e-12


def test_restriction_degree_too_large():
    with pytest.raises(DomainError):
        restrict_to_plane(e(3, 0, 1), Plane(np.eye(3)[:, :1]))


# -- hyperplane projections ----------------------------------------------------


def test_projection_examples():
    Pi, Psi = hyperplane_projections([0, 0, 1], 1)
    np.testing.assert_allclose(Pi.matrix, np.diag([1, 1, 0]), atol=1e-15)
    Pi, _ = hyperplane_projections([0, 0, 1], 2)
    np.testing.assert_allclose(Pi.matrix, np.diag([1, 0, 0]), atol=1e-15)
    Pi, Psi = hyperplane_projections([0.3, -2.0], 0)
    np.testing.assert_allclose(Pi.matrix, [[1.0]])
    np.testing.assert_allclose(Psi.matrix, [[0.0]])


def test_projection_rejects_zero():
    with pytest.raises(DomainError):
        hyperplane_projections(np.zeros(3), 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.data())
def test_projection_identities(n, data):
    m = data.draw(st.integers(0, n))
    xi = np.array(data.draw(arrays(float, n, elements=finite)))
    if np.linalg.norm(xi) < 1e-3:
        xi[0] = 1.0
    lam = data.draw(st.floats(0.01, 100))
    Pi, Psi = (op.matrix for op in hyperplane_projections(xi, m))
    np.testing.assert_allclose(Pi @ Pi, Pi, atol=1e-12)
    np.testing.assert_allclose(Pi, Pi.T, atol=1e-12)
    np.testing.assert_allclose(Pi + Psi, np.eye(len(Pi)), atol=1e-12)
    np.testing.assert_allclose(hyperplane_projections(lam * xi, m)[0].matrix, Pi, atol=1e-12)
    # rank of Lambda^m of an (n-1)-space
    assert round(np.trace(Pi)) == math.comb(n - 1, m)


@pytest.mark.parametrize("n", range(2, 6))
def test_projection_frame_independent(n):
    """Any orthonormal frame of the hyperplane gives the same projection."""
    rng = np.random.default_rng(n)
    xi = rng.standard_normal(n)
    u = xi / np.linalg.norm(xi)
    for m in range(n + 1):
        Pi = hyperplane_projections(xi, m)[0].matrix
        basis = np.linalg.qr(np.column_stack([u, rng.standard_normal((n, n - 1))]))[0][:, 1:]
        rot = np.linalg.qr(rng.standard_normal((n - 1, n - 1)))[0]
        if m <= n - 1:
            E = induced_matrix(basis @ rot, m)
            np.testing.assert_allclose(E @ E.T, Pi, atol=1e-12)


@pytest.mark.parametrize("n", range(2, 6))
def test_complement_is_interior_route(n):
    """Psi(u) v = u ^ (u -| v), computed without any hyperplane frame."""
    rng = np.random.default_rng(10 + n)
    for m in range(n + 1):
        xi = rng.standard_normal(n)
        v = rng.standard_normal(math.comb(n, m))
        Psi = hyperplane_projections(xi, m)[1].matrix
        route = interior_projection(xi / np.linalg.norm(xi), m, v)
        np.testing.assert_allclose(route, Psi @ v, atol=1e-13)


# -- sphere volume and symbol ---------------------------------------------------


def test_sphere_volume():
    assert sphere_volume(1) == pytest.approx(2.0)
    assert sphere_volume(2) == pytest.approx(2 * math.pi)
    assert sphere_volume(3) == pytest.approx(4 * math.pi)
    assert sphere_volume(4) == pytest.approx(2 * math.pi**2)
    with pytest.raises(DomainError):
        sphere_volume(0)


def test_symbol_scalar_plane():
    np.testing.assert_allclose(symbol_h([1.0, 0.0], 2, 1, 0).matrix, [[math.pi]])


def test_symbol_three_two_one_at_e2():
    h = symbol_h([0, 0, 1.0], 3, 2, 1).matrix
    np.testing.assert_allclose(h, np.diag([4.0, 4.0, 2.0]), atol=1e-12)


def symbol_constant_oracle(n, k, m):
    """Constant forced by evaluating the back-projected Gaussian at the origin.

    For alpha = exp(-pi |x|^2) dx_I the spatial side gives E_P[Pi_P] e_I with
    E_P[Pi_P] = C(k, m) / C(n, m).  The Fourier side is
    int |xi|^(k-n) exp(-pi |xi|^2) d xi * E_u[h(u)^-1] e_I, where the radial
    integral equals vol(S^(n-1)) / vol(S^(k-1)) and the direction averages of
    Pi(u), Psi(u) are C(n-1, m)/C(n, m) and 1 minus that.
    """
    radial = sphere_volume(n) / sphere_volume(k)
    avg_pi = math.comb(n - 1, m) / math.comb(n, m)
    inverse_average = (k - m) * avg_pi + (n - m) * (1 - avg_pi)
    return radial * inverse_average / (math.comb(k, m) / math.comb(n, m))


@pytest.mark.parametrize("n,k,m", [(n, k, m) for n in range(2, 7) for k in range(1, n) for m in range(k)])
def test_symbol_constant_matches_origin_oracle(n, k, m):
    assert symbol_constant(n, k, m) == pytest.approx(symbol_constant_oracle(n, k, m), rel=1e-13)


def test_symbol_constant_known_values():
    assert symbol_constant(2, 1, 0) == pytest.approx(math.pi)
    assert symbol_constant(3, 2, 1) == pytest.approx(4.0)
    assert symbol_constant(4, 3, 2) == pytest.approx(3 * math.pi / 2)


def test_symbol_spectrum_random_direction():
    rng = np.random.default_rng(2)
    c = symbol_constant(4, 2, 1)
    for _ in range(10):
        eig = np.linalg.eigvalsh(symbol_h(rng.standard_normal(4), 4, 2, 1).matrix)
        np.testing.assert_allclose(eig, [c / 3] + [c / 1] * 3, rtol=1e-12)


def test_symbol_degree_checks():
    with pytest.raises(DomainError):
        symbol_h([1.0, 0, 0], 3, 2, 2)
    with pytest.raises(DomainError):
        symbol_h([1.0, 0, 0], 3, 3, 1)
    with pytest.raises(DomainError):
        symbol_h([0.0, 0, 0], 3, 2, 1)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([(n, k, m) for n in range(2, 6) for k in range(1, n) for m in range(k)]),
       st.integers(0, 2**32 - 1), st.floats(-50, 50).filter(lambda t: abs(t) > 1e-2))
def test_symbol_homogeneity_equivariance_conditioning(triple, seed, lam):
    n, k, m = triple
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal(n)
    h = symbol_h(xi, n, k, m).matrix
    scale = symbol_constant(n, k, m) / (k - m)
    np.testing.assert_allclose(symbol_h(lam * xi, n, k, m).matrix, h, atol=1e-12 * scale)
    rho = np.linalg.qr(rng.standard_normal((n, n)))[0]
    R = induced_matrix(rho, m)
    np.testing.assert_allclose(symbol_h(rho @ xi, n, k, m).matrix, R @ h @ R.T, atol=1e-10 * scale)
    eig = np.linalg.eigvalsh(h)
    assert eig.min() > 0
    assert eig.max() / eig.min() <= (n - m) / (k - m) * (1 + 1e-12)
