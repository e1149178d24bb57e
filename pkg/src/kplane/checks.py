"""Self-check suites: exact exterior-algebra identities and the dot-product
test for the transform and its adjoint."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .exterior import (
    MVector,
    basis_dim,
    basis_indices,
    hyperplane_projections,
    induced_matrix,
    restrict_to_plane,
    symbol_constant,
    symbol_h,
)
from .forms import AnalyticForm, GridSpec, Term, sample_to_grid
from .grassmann import Plane, sample_haar
from .transform import QuadratureSpec, Sinogram, adjoint, forward, sinogram_inner, sinogram_norm

__all__ = [
    "SuiteResult",
    "exterior_suite",
    "adjointness_gap",
    "adjointness_suite",
    "degree_triples",
]


@dataclass
class SuiteResult:
    """Named worst-case errors against a single tolerance."""

    tolerance: float
    errors: dict = field(default_factory=dict)

    def record(self, name: str, value: float) -> None:
        self.errors[name] = max(self.errors.get(name, 0.0), float(value))

    @property
    def worst(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def ok(self) -> bool:
        return all(np.isfinite(v) and v <= self.tolerance for v in self.errors.values())

    def to_json(self) -> dict:
        return {"tolerance": self.tolerance, "worst": self.worst, "errors": dict(self.errors), "ok": self.ok}


def degree_triples(max_n: int, allow_top: bool = False):
    """All ``(n, k, m)`` with ``0 <= m < k < n <= max_n`` (``m <= k`` if ``allow_top``)."""
    for n in range(2, max_n + 1):
        for k in range(1, n):
            for m in range(0, k + 1 if allow_top else k):
                yield n, k, m


def _random_orthogonal(n: int, rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def exterior_suite(max_n: int = 5, trials: int = 5, seed: int = 0, tolerance: float = 1e-10) -> SuiteResult:
    """Functoriality, frame isometry, projection identities, symbol spectrum,
    equivariance and restriction adjointness, exhaustively over dimensions."""
    rng = np.random.default_rng(seed)
    res = SuiteResult(tolerance)
    for d in range(1, max_n + 1):
        for m in range(0, d + 1):
            for _ in range(trials):
                A = rng.standard_normal((d, d))
                B = rng.standard_normal((d, d))
                lhs = induced_matrix(A @ B, m)
                rhs = induced_matrix(A, m) @ induced_matrix(B, m)
                res.record("functoriality", np.abs(lhs - rhs).max() / max(1.0, np.abs(rhs).max()))
                for k in range(m, d + 1):
                    if k == 0:
                        continue
                    F = np.linalg.qr(rng.standard_normal((d, k)))[0]
                    E = induced_matrix(F, m)
                    res.record("frame_isometry", np.abs(E.T @ E - np.eye(E.shape[1])).max())
                    v = rng.standard_normal(basis_dim(d, m))
                    w = rng.standard_normal(basis_dim(k, m))
                    vr = restrict_to_plane(MVector(d, m, v), Plane(F)).coeffs
                    res.record("restriction_adjoint", abs(vr @ w - v @ (E @ w)))
            if d < 2:
                continue
            for _ in range(trials):
                xi = rng.standard_normal(d)
                Pi, Psi = (op.matrix for op in hyperplane_projections(xi, m))
                Pi2, _ = (op.matrix for op in hyperplane_projections(3.7 * xi, m))
                res.record("projection_idempotent", np.abs(Pi @ Pi - Pi).max())
                res.record("projection_symmetric", np.abs(Pi - Pi.T).max())
                res.record("projection_complete", np.abs(Pi + Psi - np.eye(len(Pi))).max())
                res.record("projection_homogeneous", np.abs(Pi - Pi2).max())
                res.record("complement_idempotent", np.abs(Psi @ Psi - Psi).max())
    for n, k, m in degree_triples(max_n):
        c = symbol_constant(n, k, m)
        expected_hi, expected_lo = c / (k - m), c / (n - m)
        for _ in range(trials):
            xi = rng.standard_normal(n)
            h = symbol_h(xi, n, k, m).matrix
            eig = np.linalg.eigvalsh(h)
            # every eigenvalue is one of the two predicted values, and both occur when possible
            gap = np.minimum(np.abs(eig - expected_hi), np.abs(eig - expected_lo)).max()
            res.record("symbol_spectrum", gap / expected_hi)
            Pi, _ = hyperplane_projections(xi, m)
            rank = round(float(np.trace(Pi.matrix)))
            res.record("symbol_multiplicity", abs(np.sum(np.isclose(eig, expected_hi)) - rank)
                       if not math.isclose(expected_hi, expected_lo) else 0.0)
            res.record("symbol_homogeneous", np.abs(symbol_h(-2.5 * xi, n, k, m).matrix - h).max() / expected_hi)
            rho = _random_orthogonal(n, rng)
            R = induced_matrix(rho, m)
            lhs = symbol_h(rho @ xi, n, k, m).matrix
            res.record("symbol_equivariant", np.abs(lhs - R @ h @ R.T).max() / expected_hi)
    return res


def _random_form(n: int, m: int, rng) -> AnalyticForm:
    indices = basis_indices(n, m)
    terms = []
    for index in indices:
        # an affine factor breaks the radial symmetry of the Gaussian
        poly = {(0,) * n: float(rng.normal())}
        for axis in range(n):
            poly[tuple(int(a == axis) for a in range(n))] = float(rng.normal()) * 0.5
        terms.append(Term(index, poly, float(rng.uniform(0.8, 1.4))))
    return AnalyticForm(n, m, terms)


def _random_plane_data(planes, k_grid: GridSpec, m: int, rng) -> Sinogram:
    """Smooth random plane data: one shifted Gaussian bump per plane and channel."""
    k = planes.k
    y = k_grid.points()
    ncoef = basis_dim(k, m)
    data = np.empty((len(planes),) + k_grid.shape + (ncoef,))
    for i in range(len(planes)):
        for c in range(ncoef):
            center = rng.uniform(-0.5, 0.5, k)
            width = rng.uniform(0.5, 1.0)
            r2 = np.sum((y - center) ** 2, axis=-1)
            data[i, ..., c] = rng.normal() * np.exp(-width * math.pi * r2)
    return Sinogram(planes, k_grid, m, data)


def adjointness_gap(
    n: int,
    k: int,
    m: int,
    rng,
    planes: int = 12,
    half_width: float = 3.0,
    points: int = 32,
    perp_nodes: int = 33,
) -> float:
    """``|<R a, b> - <a, R* b>| / (||R a|| ||b||)`` for one random pair."""
    rng = np.random.default_rng(rng)
    ps = sample_haar(n, k, planes, rng)
    grid = GridSpec(n, half_width, points)
    k_grid = GridSpec(k, half_width, points)
    quad = QuadratureSpec(half_width, perp_nodes)
    alpha = _random_form(n, m, rng)
    beta = _random_plane_data(ps, k_grid, m, rng)
    ra = forward(alpha, ps, k_grid, quad)
    lhs = sinogram_inner(ra, beta)
    rhs = sample_to_grid(alpha, grid).inner(adjoint(beta, grid))
    scale = sinogram_norm(ra) * sinogram_norm(beta)
    return abs(lhs - rhs) / scale if scale > 0 else abs(lhs - rhs)


def adjointness_suite(max_n: int = 4, pairs: int = 5, seed: int = 0, tolerance: float = 0.02, **kwargs) -> SuiteResult:
    """Dot-product test over every ``0 <= m <= k < n <= max_n``."""
    res = SuiteResult(tolerance)
    streams = np.random.SeedSequence(seed).spawn(len(list(degree_triples(max_n, allow_top=True))))
    for (n, k, m), ss in zip(degree_triples(max_n, allow_top=True), streams):
        rng = np.random.default_rng(ss)
        for _ in range(pairs):
            res.record(f"n{n}k{k}m{m}", adjointness_gap(n, k, m, rng, **kwargs))
    return res
