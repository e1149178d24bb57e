"""Compactly supported m-currents as finite sums of weighted Dirac m-vectors."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .exterior import DomainError, MVector, basis_dim, induced_matrix, wedge
from .forms import AnalyticForm, FormField, interpolate
from .grassmann import Plane

__all__ = [
    "DiracCurrent",
    "SimplexCurrent",
    "PlaneCurrent",
    "simplex_to_dirac",
    "pair",
    "pushforward",
    "pullback_form_eval",
    "polygon_current",
    "circle_current",
]


@dataclass(frozen=True)
class DiracCurrent:
    """``T(alpha) = sum_i <w_i, alpha(x_i)>``.

    ``positions`` has shape (A, n); ``weights`` has shape (A, C(n, m)).
    """

    n: int
    m: int
    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, self.n)
        w = np.asarray(self.weights, dtype=float).reshape(-1, basis_dim(self.n, self.m))
        if len(pos) != len(w):
            raise DomainError("one weight per atom required")
        if not np.isfinite(pos).all():
            raise DomainError("atom positions must be finite")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.positions)

    def __add__(self, other: "DiracCurrent") -> "DiracCurrent":
        if (self.n, self.m) != (other.n, other.m):
            raise DomainError("currents of different type")
        return DiracCurrent(
            self.n,
            self.m,
            np.concatenate([self.positions, other.positions]),
            np.concatenate([self.weights, other.weights]),
        )

    def __mul__(self, scalar: float) -> "DiracCurrent":
        return DiracCurrent(self.n, self.m, self.positions, scalar * self.weights)

    __rmul__ = __mul__

    def rotated(self, rotation) -> "DiracCurrent":
        rotation = np.asarray(rotation, dtype=float)
        lam = induced_matrix(rotation, self.m)
        return DiracCurrent(self.n, self.m, self.positions @ rotation.T, self.weights @ lam.T)

    def to_json(self) -> dict:
        return {
            "type": "dirac",
            "n": self.n,
            "m": self.m,
            "atoms": [
                {"position": p.tolist(), "weight": w.tolist()}
                for p, w in zip(self.positions, self.weights)
            ],
        }


@dataclass(frozen=True)
class SimplexCurrent:
    """Oriented m-simplices with real multiplicities; ``vertices`` has shape (S, m+1, n)."""

    n: int
    m: int
    vertices: np.ndarray
    multiplicities: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, self.m + 1, self.n)
        mult = np.asarray(self.multiplicities, dtype=float).reshape(-1)
        if len(mult) != len(v):
            raise DomainError("one multiplicity per simplex required")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "multiplicities", mult)

    def to_json(self) -> dict:
        return {
            "type": "simplex",
            "n": self.n,
            "m": self.m,
            "simplices": [
                {"vertices": v.tolist(), "multiplicity": float(c)}
                for v, c in zip(self.vertices, self.multiplicities)
            ],
        }


@dataclass(frozen=True)
class PlaneCurrent:
    """A current on a plane, in the plane's frame coordinates."""

    plane: Plane
    m: int
    positions: np.ndarray
    weights: np.ndarray

    def to_json(self) -> dict:
        return {
            "type": "plane",
            "frame": self.plane.frame.reshape(-1).tolist(),
            "n": self.plane.n,
            "k": self.plane.k,
            "m": self.m,
            "atoms": [
                {"position": p.tolist(), "weight": w.tolist()}
                for p, w in zip(self.positions, self.weights)
            ],
        }


def current_from_json(doc: dict):
    kind = doc.get("type", "dirac")
    n, m = doc["n"], doc["m"]
    if kind == "dirac":
        atoms = doc["atoms"]
        return DiracCurrent(
            n, m,
            np.array([a["position"] for a in atoms], dtype=float).reshape(-1, n),
            np.array([a["weight"] for a in atoms], dtype=float).reshape(-1, basis_dim(n, m)),
        )
    if kind == "simplex":
        simp = doc["simplices"]
        return SimplexCurrent(
            n, m,
            np.array([s["vertices"] for s in simp], dtype=float).reshape(-1, m + 1, n),
            np.array([s["multiplicity"] for s in simp], dtype=float),
        )
    if kind == "circle":
        return circle_current(
            doc.get("radius", 1.0), doc.get("segments", 512), n,
            tuple(doc.get("axes", (0, 1))), doc.get("order", 2),
        )
    raise ValueError(f"unknown current type {kind!r}")


def dumps(current) -> str:
    return json.dumps(current.to_json())


def _simplex_rule(m: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric nodes (Q, m+1) and weights (sum 1) on the reference m-simplex."""
    if order <= 1:
        return np.full((1, m + 1), 1.0 / (m + 1)), np.ones(1)
    if m == 1 and order > 2:
        t, w = np.polynomial.legendre.leggauss(order)
        s = 0.5 * (t + 1.0)
        return np.column_stack([1.0 - s, s]), 0.5 * w
    # degree-2 rule with m+1 nodes
    b = (m + 2 - math.sqrt(m + 2)) / ((m + 1) * (m + 2))
    a = 1.0 - m * b
    nodes = np.full((m + 1, m + 1), b)
    np.fill_diagonal(nodes, a)
    return nodes, np.full(m + 1, 1.0 / (m + 1))


def _edge_wedge(verts: np.ndarray) -> np.ndarray:
    """``(v1 - v0) ^ ... ^ (vm - v0)`` for one simplex."""
    n = verts.shape[1]
    acc = MVector(n, 0, np.ones(1))
    for v in verts[1:]:
        acc = wedge(acc, MVector.vector(v - verts[0]))
    return acc.coeffs


def simplex_to_dirac(T: SimplexCurrent, order: int = 1) -> DiracCurrent:
    """Quadrature of each oriented simplex into weighted atoms."""
    if T.m < 1:
        raise DomainError("simplex currents need m >= 1")
    bary, qw = _simplex_rule(T.m, order)
    positions, weights = [], []
    fact = math.factorial(T.m)
    for verts, mult in zip(T.vertices, T.multiplicities):
        ev = _edge_wedge(verts)
        if mult != 0 and np.linalg.norm(ev) <= 1e-14 * max(1.0, np.abs(verts).max()) ** T.m:
            raise DomainError("degenerate simplex with nonzero multiplicity")
        # |ev| / m! is the m-volume and ev / |ev| the orienting unit m-vector
        oriented = mult * ev / fact
        positions.append(bary @ verts)
        weights.append(qw[:, None] * oriented[None, :])
    return DiracCurrent(T.n, T.m, np.concatenate(positions), np.concatenate(weights))


def polygon_current(points, closed: bool = True, order: int = 2) -> DiracCurrent:
    """1-current of the polygonal path through ``points`` (shape (V, n))."""
    pts = np.asarray(points, dtype=float)
    ends = np.roll(pts, -1, axis=0) if closed else pts[1:]
    starts = pts if closed else pts[:-1]
    simp = SimplexCurrent(pts.shape[1], 1, np.stack([starts, ends], axis=1), np.ones(len(starts)))
    return simplex_to_dirac(simp, order)


def circle_current(radius: float = 1.0, segments: int = 512, n: int = 2, axes=(0, 1), order: int = 2) -> DiracCurrent:
    """Counter-clockwise inscribed polygon of a circle in the coordinate plane ``axes``."""
    theta = 2.0 * math.pi * np.arange(segments) / segments
    pts = np.zeros((segments, n))
    pts[:, axes[0]] = radius * np.cos(theta)
    pts[:, axes[1]] = radius * np.sin(theta)
    return polygon_current(pts, closed=True, order=order)


def _form_values(alpha, points) -> np.ndarray:
    if isinstance(alpha, AnalyticForm):
        return alpha.evaluate(points)
    if isinstance(alpha, FormField):
        return interpolate(alpha, points)
    return np.asarray(alpha(points), dtype=float)


def pair(T, alpha) -> float:
    """``T(alpha)``; ``alpha`` may be analytic, a grid field, or a callable on points."""
    vals = _form_values(alpha, T.positions)
    if vals.shape != T.weights.shape:
        raise DomainError("current and form have different types")
    # fixed summation order: per-atom products, then a sequential sum
    return float(np.sum(np.einsum("ac,ac->a", T.weights, vals)))


def pushforward(plane: Plane, T: DiracCurrent) -> PlaneCurrent:
    """Pushforward by the orthogonal projection onto ``plane``."""
    F = plane.frame
    if T.m > plane.k:
        raise DomainError(f"cannot push an {T.m}-current onto a {plane.k}-plane")
    if T.n != plane.n:
        raise DomainError("current and plane live in different dimensions")
    lam = induced_matrix(F, T.m)  # C(n,m) x C(k,m); its transpose is Lambda^m(F^T)
    return PlaneCurrent(plane, T.m, T.positions @ F, T.weights @ lam)


def pullback_form_eval(plane: Plane, alpha_P, x, degree: int | None = None) -> np.ndarray:
    """Pullback of a plane form by the orthogonal projection, evaluated at ``x``.

    ``alpha_P`` is a k-dimensional :class:`FormField` in frame coordinates, or
    any form accepted by :func:`pair` (callables need ``degree``).  Returns
    ambient Lambda^m coordinates of shape ``x.shape[:-1] + (C(n, m),)``.
    """
    x = np.asarray(x, dtype=float)
    F = plane.frame
    vals = _form_values(alpha_P, x @ F)
    if degree is None:
        degree = alpha_P.degree if isinstance(alpha_P, FormField) else alpha_P.m
    if degree > plane.k:
        raise DomainError("plane form degree exceeds plane dimension")
    return vals @ induced_matrix(F, degree).T
