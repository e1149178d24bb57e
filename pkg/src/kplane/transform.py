"""The exterior k-plane transform, its formal adjoint, and the X-norm.

For a k-plane P with orthonormal frame F (n x k) and complement frame S,

    R alpha(P, x) = int_{P^perp} alpha(x + y)|_P dy,

with the Lambda^m(P)-valued integrand expressed in the wedge basis of F.
The integral over P^perp is a tensor trapezoidal rule on the cube
``|t|_inf <= R_trunc`` in the coordinates of S.
"""
from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exterior import DomainError, basis_dim, induced_matrix
from .forms import AnalyticForm, FormField, GridSpec, interpolate, l2_norm
from .grassmann import Plane, PlaneSet, complement_frame

__all__ = [
    "Sinogram",
    "QuadratureSpec",
    "forward_point",
    "forward",
    "adjoint",
    "x_norm",
    "sinogram_inner",
    "sinogram_norm",
]

# evaluation points per batch inside forward_point
_CHUNK = 1 << 20


@dataclass(frozen=True)
class QuadratureSpec:
    """Trapezoidal rule over P^perp: ``nodes`` per axis on ``[-radius, radius]``."""

    radius: float
    nodes: int = 129

    def __post_init__(self):
        if self.nodes < 2 or self.radius <= 0:
            raise DomainError("quadrature needs >= 2 nodes and a positive radius")

    def rule(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        t = np.linspace(-self.radius, self.radius, self.nodes)
        w = np.full(self.nodes, 2.0 * self.radius / (self.nodes - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        if dim == 0:
            return np.zeros((1, 0)), np.ones(1)
        mesh = np.meshgrid(*([t] * dim), indexing="ij")
        wmesh = np.meshgrid(*([w] * dim), indexing="ij")
        nodes = np.stack([a.reshape(-1) for a in mesh], axis=-1)
        weights = np.prod(np.stack([a.reshape(-1) for a in wmesh], axis=-1), axis=-1)
        return nodes, weights


@dataclass(frozen=True)
class Sinogram:
    """Samples of the transform: per plane, a k-dimensional grid of Lambda^m(P) coordinates.

    ``data`` has shape ``(len(planes),) + k_grid.shape + (C(k, m),)``.
    """

    planes: PlaneSet
    k_grid: GridSpec
    degree: int
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        k = self.planes.k
        if self.k_grid.n != k:
            raise DomainError("k_grid dimension must equal the plane dimension")
        expected = (len(self.planes),) + self.k_grid.shape + (basis_dim(k, self.degree),)
        if data.shape != expected:
            raise DomainError(f"sinogram data shape {data.shape} != {expected}")
        object.__setattr__(self, "data", data)

    def plane_field(self, i: int) -> FormField:
        return FormField(self.k_grid, self.degree, self.data[i])

    def __add__(self, other: "Sinogram") -> "Sinogram":
        return Sinogram(self.planes, self.k_grid, self.degree, self.data + other.data)

    def __mul__(self, scalar: float) -> "Sinogram":
        return Sinogram(self.planes, self.k_grid, self.degree, scalar * self.data)

    __rmul__ = __mul__

    MAGIC = b"KPSG"
    # trailing fields: seed (u64) and a flag telling whether the seed is present
    _HEADER = "<4sIIIIdIIQB"

    def to_bytes(self) -> bytes:
        ps = self.planes
        seed = 0 if ps.seed is None else int(ps.seed)
        header = struct.pack(
            self._HEADER,
            self.MAGIC,
            ps.n,
            ps.k,
            self.degree,
            self.k_grid.points_per_axis,
            self.k_grid.half_width,
            self.data.shape[-1],
            len(ps),
            seed,
            ps.seed is not None,
        )
        frames = np.ascontiguousarray(ps.frames, dtype="<f8").tobytes()
        weights = np.ascontiguousarray(ps.weights, dtype="<f8").tobytes()
        return header + frames + weights + np.ascontiguousarray(self.data, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Sinogram":
        size = struct.calcsize(cls._HEADER)
        magic, n, k, m, Nk, L, ncoef, count, seed, has_seed = struct.unpack(cls._HEADER, blob[:size])
        if magic != cls.MAGIC:
            raise ValueError("not a Sinogram container")
        off = size
        frames = np.frombuffer(blob, "<f8", count * n * k, off).reshape(count, n, k)
        off += 8 * count * n * k
        weights = np.frombuffer(blob, "<f8", count, off)
        off += 8 * count
        grid = GridSpec(k, L, Nk)
        data = np.frombuffer(blob, "<f8", offset=off).reshape((count,) + grid.shape + (ncoef,))
        planes = PlaneSet([Plane(f) for f in frames], weights.copy(), seed if has_seed else None)
        return cls(planes, grid, m, data.copy())


def _evaluator(alpha):
    if isinstance(alpha, AnalyticForm):
        return alpha.n, alpha.m, alpha.evaluate
    if isinstance(alpha, FormField):
        return alpha.n, alpha.degree, lambda pts: interpolate(alpha, pts)
    raise TypeError(f"cannot transform {type(alpha).__name__}")


def forward_point(alpha, plane: Plane, x_coords, quad: QuadratureSpec) -> np.ndarray:
    """Transform at in-plane coordinates ``x_coords`` (shape ``(..., k)``).

    Returns Lambda^m(P) coordinates, shape ``(..., C(k, m))``.
    """
    n, m, evaluate = _evaluator(alpha)
    F = plane.frame
    k = F.shape[1]
    if F.shape[0] != n:
        raise DomainError("plane and form live in different dimensions")
    if m > k:
        raise DomainError(f"cannot restrict a {m}-form to a {k}-plane")
    x_coords = np.asarray(x_coords, dtype=float)
    lead = x_coords.shape[:-1]
    xc = x_coords.reshape(-1, k)

    S = complement_frame(plane).frame
    t, w = quad.rule(n - k)
    offsets = t @ S.T  # (Q, n)
    restrict = induced_matrix(F, m)  # C(n,m) x C(k,m)

    out = np.empty((len(xc), restrict.shape[1]))
    per = max(1, _CHUNK // len(offsets))
    for start in range(0, len(xc), per):
        base = xc[start:start + per] @ F.T  # (M, n)
        pts = base[:, None, :] + offsets[None, :, :]
        vals = evaluate(pts) @ restrict  # restriction before accumulation
        out[start:start + per] = np.einsum("q,mqc->mc", w, vals)
    return out.reshape(lead + (restrict.shape[1],))


def _map_planes(func, planes, threads: int):
    """Lazily map ``func`` over planes, in order; ``threads=0`` means one per CPU."""
    if threads == 1 or len(planes) == 1:
        yield from map(func, planes)
        return
    with ThreadPoolExecutor(max_workers=threads or None) as pool:
        yield from pool.map(func, planes)


def forward(alpha, planes: PlaneSet, k_grid: GridSpec, quad: QuadratureSpec, threads: int = 1) -> Sinogram:
    """Transform sampled at every plane and every node of the in-plane grid."""
    _, m, _ = _evaluator(alpha)
    coords = k_grid.points()
    rows = list(_map_planes(lambda P: forward_point(alpha, P, coords, quad), planes.planes, threads))
    return Sinogram(planes, k_grid, m, np.stack(rows))


def adjoint(beta: Sinogram, out_grid: GridSpec, threads: int = 1) -> FormField:
    """Backprojection: at each node x, the weighted sum over planes of the
    included plane value at the projection of x."""
    planes = beta.planes
    if out_grid.n != planes.n:
        raise DomainError("output grid must live in the ambient dimension")
    m = beta.degree
    X = out_grid.points().reshape(-1, planes.n)
    acc = np.zeros((len(X), basis_dim(planes.n, m)))

    def contribution(i):
        P = planes.planes[i]
        vals = interpolate(beta.plane_field(i), X @ P.frame)
        return vals @ induced_matrix(P.frame, m).T

    # fixed summation order over planes keeps results independent of the worker count
    for i, c in enumerate(_map_planes(contribution, range(len(planes)), threads)):
        acc += planes.weights[i] * c
    return FormField(out_grid, m, acc.reshape(out_grid.shape + (acc.shape[-1],)))


def sinogram_inner(a: Sinogram, b: Sinogram) -> float:
    """Inner product in L^2(Gamma): probability measure on G times Lebesgue on each plane."""
    count = len(a.planes)
    per_plane = np.einsum("pi,pi->p", a.data.reshape(count, -1), b.data.reshape(count, -1))
    per_plane = per_plane * a.k_grid.cell_volume
    return float(np.dot(a.planes.weights, per_plane))


def sinogram_norm(beta: Sinogram) -> float:
    return math.sqrt(sinogram_inner(beta, beta))


def x_norm(alpha, planes: PlaneSet, k_grid: GridSpec, quad: QuadratureSpec, l2_grid: GridSpec | None = None) -> float:
    """``sqrt(||alpha||_L2^2 + ||R alpha||_{L2(Gamma)}^2)``.

    Analytic forms are sampled on ``l2_grid`` (default: the in-plane grid
    parameters lifted to dimension n) for the L^2 part.
    """
    if isinstance(alpha, AnalyticForm):
        from .forms import sample_to_grid

        grid = l2_grid or GridSpec(alpha.n, k_grid.half_width, k_grid.points_per_axis)
        l2 = l2_norm(sample_to_grid(alpha, grid))
    else:
        l2 = l2_norm(alpha)
    return math.sqrt(l2**2 + sinogram_norm(forward(alpha, planes, k_grid, quad)) ** 2)
