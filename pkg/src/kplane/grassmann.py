"""Points of the Grassmannian G(k, n) and discretizations of its invariant measure."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exterior import DomainError

__all__ = [
    "Plane",
    "PlaneSet",
    "sample_haar",
    "fixed_quadrature",
    "project_point",
    "complement_frame",
    "distance",
    "UnsupportedQuadrature",
]

_ORTHO_TOL = 1e-12


class UnsupportedQuadrature(ValueError):
    pass


@dataclass(frozen=True)
class Plane:
    """A k-dimensional linear subspace of R^n, stored as an orthonormal n x k frame."""

    frame: np.ndarray

    def __post_init__(self):
        frame = np.array(self.frame, dtype=float)
        if frame.ndim != 2 or frame.shape[1] > frame.shape[0]:
            raise DomainError(f"bad frame shape {frame.shape}")
        err = np.abs(frame.T @ frame - np.eye(frame.shape[1])).max(initial=0.0)
        if err > _ORTHO_TOL:
            raise DomainError(f"frame columns not orthonormal (error {err:.2e})")
        frame.setflags(write=False)
        object.__setattr__(self, "frame", frame)

    @property
    def n(self) -> int:
        return self.frame.shape[0]

    @property
    def k(self) -> int:
        return self.frame.shape[1]

    @property
    def projector(self) -> np.ndarray:
        return self.frame @ self.frame.T

    @classmethod
    def span(cls, vectors) -> "Plane":
        """Plane spanned by the given columns (orthonormalized)."""
        q, _ = np.linalg.qr(np.asarray(vectors, dtype=float))
        return cls(q)

    def same_subspace(self, other: "Plane", tol: float = 1e-12) -> bool:
        return np.abs(self.projector - other.projector).max() <= tol

    def rotated(self, rotation) -> "Plane":
        return Plane(np.asarray(rotation) @ self.frame)


@dataclass(frozen=True)
class PlaneSet:
    """Weighted finite family of planes approximating the invariant probability measure."""

    planes: tuple
    weights: np.ndarray
    seed: int | None = None
    kind: str = field(default="custom")

    def __post_init__(self):
        planes = tuple(self.planes)
        weights = np.asarray(self.weights, dtype=float)
        if not planes:
            raise DomainError("empty PlaneSet")
        if len(weights) != len(planes):
            raise DomainError("one weight per plane required")
        if (weights < 0).any() or abs(weights.sum() - 1.0) > 1e-12:
            raise DomainError("weights must be nonnegative and sum to 1")
        shape = planes[0].frame.shape
        if any(p.frame.shape != shape for p in planes):
            raise DomainError("all planes must share (n, k)")
        object.__setattr__(self, "planes", planes)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.planes)

    def __iter__(self):
        return iter(zip(self.planes, self.weights))

    @property
    def n(self) -> int:
        return self.planes[0].n

    @property
    def k(self) -> int:
        return self.planes[0].k

    @property
    def frames(self) -> np.ndarray:
        return np.stack([p.frame for p in self.planes])

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "kind": self.kind,
            "seed": self.seed,
            "weights": self.weights.tolist(),
            # row-major flattening of each n x k frame
            "frames": [p.frame.reshape(-1).tolist() for p in self.planes],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PlaneSet":
        n, k = doc["n"], doc["k"]
        planes = [Plane(np.asarray(f, dtype=float).reshape(n, k)) for f in doc["frames"]]
        return cls(planes, np.asarray(doc["weights"]), doc.get("seed"), doc.get("kind", "custom"))

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _orthonormalize(mats: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(mats)
    # positive diagonal of R makes QR of a Gaussian matrix Haar distributed
    signs = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    signs[signs == 0] = 1.0
    return q * signs[..., None, :]


def sample_haar(n: int, k: int, count: int, seed) -> PlaneSet:
    """I.i.d. samples from the O(n)-invariant probability measure on G(k, n).

    ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    if not 0 < k < n:
        raise DomainError(f"need 0 < k < n, got k={k}, n={n}")
    if count < 1:
        raise DomainError("count must be positive")
    rng = np.random.default_rng(seed)
    frames = _orthonormalize(rng.standard_normal((count, n, k)))
    planes = tuple(Plane(f) for f in frames)
    seed_value = seed if isinstance(seed, (int, np.integer)) else None
    return PlaneSet(planes, np.full(count, 1.0 / count), seed_value, "haar")


def _sphere_directions(n: int, resolution: int) -> np.ndarray:
    if n == 2:
        theta = np.pi * np.arange(resolution) / resolution
        return np.column_stack([np.cos(theta), np.sin(theta)])
    if n == 3:
        # equal-area Fibonacci lattice on the upper hemisphere
        i = np.arange(resolution)
        z = (i + 0.5) / resolution
        phi = i * math.pi * (3.0 - math.sqrt(5.0))
        r = np.sqrt(1.0 - z**2)
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    raise UnsupportedQuadrature(f"no deterministic sphere quadrature for n={n}")


def fixed_quadrature(n: int, k: int, resolution: int) -> PlaneSet:
    """Deterministic equal-weight quadrature for G(1, n) or G(n-1, n), n in {2, 3}."""
    if resolution < 1:
        raise DomainError("resolution must be positive")
    if k == 1:
        dirs = _sphere_directions(n, resolution)
        planes = tuple(Plane(d[:, None]) for d in dirs)
    elif k == n - 1:
        dirs = _sphere_directions(n, resolution)
        planes = tuple(complement_frame(Plane(d[:, None])) for d in dirs)
    else:
        raise UnsupportedQuadrature(
            f"G({k},{n}) has no built-in quadrature; use sample_haar"
        )
    return PlaneSet(planes, np.full(resolution, 1.0 / resolution), None, "fixed")


def project_point(plane: Plane, x) -> tuple[np.ndarray, np.ndarray]:
    """In-plane coordinates of ``x`` and its orthogonal projection in R^n."""
    x = np.asarray(x, dtype=float)
    coords = x @ plane.frame
    return coords, coords @ plane.frame.T


def complement_frame(plane: Plane) -> Plane:
    """Deterministic orthonormal frame of the orthogonal complement."""
    n, k = plane.frame.shape
    q, _ = np.linalg.qr(np.column_stack([plane.frame, np.eye(n)]))
    return Plane(q[:, k:n])


def distance(P: Plane, Q: Plane) -> float:
    """Projector-gap metric ``||pi_P - pi_Q||_2``, with values in [0, 1]."""
    if P.frame.shape != Q.frame.shape:
        raise DomainError("planes from different Grassmannians")
    return float(np.linalg.norm(P.projector - Q.projector, ord=2))
