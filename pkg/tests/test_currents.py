import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kplane.currents import (
    DiracCurrent,
    SimplexCurrent,
    circle_current,
    current_from_json,
    pair,
    polygon_current,
    pullback_form_eval,
    pushforward,
    simplex_to_dirac,
)
from kplane.exterior import DomainError, MVector, induced_matrix
from kplane.forms import AnalyticForm, FormField, GridSpec, Term, gaussian_form
from kplane.grassmann import Plane, sample_haar


def test_unit_segment_single_atom():
    T = simplex_to_dirac(SimplexCurrent(3, 1, [[[0, 0, 0], [1, 0, 0]]], [1.0]), order=1)
    np.testing.assert_allclose(T.positions, [[0.5, 0, 0]])
    np.testing.assert_allclose(T.weights, [[1.0, 0, 0]])


def test_reversed_orientation_flips_sign():
    verts = np.array([[[0.1, 0.2, 0.0], [1.0, -0.3, 0.5], [0.2, 0.9, 0.4]]])
    a = simplex_to_dirac(SimplexCurrent(3, 2, verts, [2.0]), order=2)
    b = simplex_to_dirac(SimplexCurrent(3, 2, verts[:, [0, 2, 1]], [2.0]), order=2)
    np.testing.assert_allclose(a.weights.sum(axis=0), -b.weights.sum(axis=0), atol=1e-15)


def test_triangle_weight_is_area_times_orientation():
    verts = np.array([[[0, 0, 0], [2.0, 0, 0], [0, 3.0, 0]]])
    T = simplex_to_dirac(SimplexCurrent(3, 2, verts, [1.0]), order=2)
    # area 3, oriented along e0 ^ e1
    np.testing.assert_allclose(T.weights.sum(axis=0), [3.0, 0, 0], atol=1e-14)


def test_degenerate_simplex_rejected():
    verts = [[[0, 0], [1, 1], [2, 2]]]
    with pytest.raises(DomainError):
        simplex_to_dirac(SimplexCurrent(2, 2, verts, [1.0]))
    simplex_to_dirac(SimplexCurrent(2, 2, verts, [0.0]))


def test_closed_circle_pairs_exact_form_to_zero():
    T = circle_current(1.0, 512)
    assert abs(pair(T, lambda x: np.tile([1.0, 0.0], (len(x), 1)))) < 1e-6
    assert abs(pair(T, lambda x: np.tile([0.0, 1.0], (len(x), 1)))) < 1e-6


def test_circle_green_theorem():
    T = circle_current(1.0, 512)
    x0_dx1 = AnalyticForm(2, 1, [Term((1,), {(1, 0): 1.0}, 1e-300)])
    assert pair(T, lambda x: np.stack([np.zeros(len(x)), x[:, 0]], axis=1)) == pytest.approx(math.pi, abs=1e-4)
    assert pair(T, x0_dx1) == pytest.approx(math.pi, abs=1e-4)


def test_polygon_closed_loops_and_stokes_refinement():
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((7, 3))
    T = polygon_current(pts, closed=True, order=2)
    for i in range(3):
        w = np.zeros(3)
        w[i] = 1.0
        assert abs(pair(T, lambda x, w=w: np.tile(w, (len(x), 1)))) < 1e-12


def test_pair_examples_and_linearity():
    T = DiracCurrent(3, 1, [[0, 0, 0]], [[1, 0, 0]])
    assert pair(T, gaussian_form(3, (0,), coefficient=3.0)) == pytest.approx(3.0)
    rng = np.random.default_rng(1)
    S = DiracCurrent(3, 1, rng.standard_normal((4, 3)), rng.standard_normal((4, 3)))
    a, b = gaussian_form(3, (1,), monomial=(1, 0, 0)), gaussian_form(3, (2,), width=0.5)
    assert pair(S + 2.0 * T, a) == pytest.approx(pair(S, a) + 2 * pair(T, a))
    assert pair(S, a + b.scaled(-1.5)) == pytest.approx(pair(S, a) - 1.5 * pair(S, b))


def test_pair_with_grid_field():
    g = GridSpec(2, 2.0, 16)
    f = FormField(g, 1, np.ones(g.shape + (2,)))
    T = DiracCurrent(2, 1, [[0.1, 0.3], [5.0, 0.0]], [[1.0, 2.0], [1.0, 1.0]])
    # the second atom lies outside the box where the field is zero
    assert pair(T, f) == pytest.approx(3.0)


def test_zero_weights_pair_to_zero():
    T = DiracCurrent(3, 1, np.zeros((3, 3)), np.zeros((3, 3)))
    assert pair(T, gaussian_form(3, (0,))) == 0.0


# -- pushforward and pullback ------------------------------------------------------------


def test_pushforward_annihilates_normal_direction():
    P = Plane(np.eye(3)[:, :2])
    pc = pushforward(P, DiracCurrent(3, 1, [[0.3, 0.1, 2.0]], [[0, 0, 1.0]]))
    np.testing.assert_array_equal(pc.weights, [[0.0, 0.0]])
    np.testing.assert_allclose(pc.positions, [[0.3, 0.1]])


def test_pushforward_preserves_tangent_weight():
    rng = np.random.default_rng(2)
    P = sample_haar(4, 3, 1, rng).planes[0]
    w_plane = rng.standard_normal(3)
    w = induced_matrix(P.frame, 2) @ w_plane
    pc = pushforward(P, DiracCurrent(4, 2, rng.standard_normal((1, 4)), w[None]))
    np.testing.assert_allclose(pc.weights[0], w_plane, atol=1e-14)


def test_pushforward_degree_too_large():
    with pytest.raises(DomainError):
        pushforward(Plane(np.eye(3)[:, :1]), DiracCurrent(3, 2, [[0, 0, 0]], [[1, 0, 0]]))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([(2, 1, 1), (3, 2, 1), (3, 2, 2), (4, 2, 1), (4, 3, 2), (4, 2, 2), (3, 1, 0)]),
       st.integers(0, 2**32 - 1))
def test_pushforward_pullback_duality(triple, seed):
    n, k, m = triple
    rng = np.random.default_rng(seed)
    P = sample_haar(n, k, 1, rng).planes[0]
    T = DiracCurrent(n, m, rng.standard_normal((5, n)), rng.standard_normal((5, math.comb(n, m))))
    coef = rng.standard_normal()
    lin = rng.standard_normal(k)
    index = tuple(range(m))
    poly = {(0,) * k: coef}
    for a in range(k):
        poly[tuple(int(a == b) for b in range(k))] = lin[a]
    alpha_P = AnalyticForm(k, m, [Term(index, poly, 0.8)])
    lhs = pair(pushforward(P, T), alpha_P)
    rhs = pair(T, lambda x: pullback_form_eval(P, alpha_P, x))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_pushforward_equivariance():
    rng = np.random.default_rng(3)
    rho = np.linalg.qr(rng.standard_normal((4, 4)))[0]
    P = sample_haar(4, 2, 1, rng).planes[0]
    T = DiracCurrent(4, 2, rng.standard_normal((6, 4)), rng.standard_normal((6, 6)))
    a = pushforward(P, T)
    b = pushforward(P.rotated(rho), T.rotated(rho))
    # frame rho F gives the same in-plane coordinates for the rotated current
    np.testing.assert_allclose(b.positions, a.positions, atol=1e-13)
    np.testing.assert_allclose(b.weights, a.weights, atol=1e-13)


def test_pullback_constant_scalar():
    P = sample_haar(3, 1, 1, 4).planes[0]
    g = GridSpec(1, 4.0, 16)
    const = FormField(g, 0, np.full((16, 1), 2.5))
    x = np.random.default_rng(0).uniform(-1, 1, (10, 3))
    np.testing.assert_allclose(pullback_form_eval(P, const, x), 2.5)


def test_pullback_line_in_plane():
    P = Plane(np.array([[1.0], [0.0]]))
    f = AnalyticForm(1, 1, [Term((0,), {(2,): 1.0}, 1.0)])
    x = np.array([[0.4, 7.0], [-1.2, -3.0]])
    out = pullback_form_eval(P, f, x)
    expected = np.stack([x[:, 0] ** 2 * np.exp(-math.pi * x[:, 0] ** 2), np.zeros(2)], axis=1)
    np.testing.assert_allclose(out, expected, atol=1e-15)


# -- serialization -----------------------------------------------------------------


def test_json_roundtrip():
    rng = np.random.default_rng(5)
    T = DiracCurrent(3, 2, rng.standard_normal((3, 3)), rng.standard_normal((3, 3)))
    back = current_from_json(json.loads(json.dumps(T.to_json())))
    np.testing.assert_array_equal(back.positions, T.positions)
    np.testing.assert_array_equal(back.weights, T.weights)
    S = SimplexCurrent(3, 1, rng.standard_normal((2, 2, 3)), [1.0, -2.0])
    back = current_from_json(json.loads(json.dumps(S.to_json())))
    np.testing.assert_array_equal(back.vertices, S.vertices)
    circ = current_from_json({"type": "circle", "n": 3, "m": 1, "segments": 16})
    assert len(circ) == 32
