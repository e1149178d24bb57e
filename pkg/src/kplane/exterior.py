"""Finite-dimensional exterior algebra in the lexicographic wedge basis.

Elements of the m-th exterior power of R^d are stored as real coefficient
vectors of length C(d, m).  Basis element ``e_I = e_{i1} ^ ... ^ e_{im}``
for a strictly increasing multi-index ``I``; the standard inner product
makes this basis orthonormal.

Linear maps between exterior powers are plain matrices; the induced map of a
linear map ``A`` has entries equal to the m x m minors of ``A``.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MultiIndex",
    "MVector",
    "MOperator",
    "basis_indices",
    "basis_dim",
    "wedge",
    "induced_map",
    "induced_matrix",
    "restrict_to_plane",
    "hyperplane_projections",
    "interior_projection",
    "symbol_constant",
    "symbol_h",
    "sphere_volume",
]

MultiIndex = tuple  # strictly increasing tuple of ints


class DomainError(ValueError):
    """Raised when degrees or dimensions are out of range."""


def basis_dim(d: int, m: int) -> int:
    return math.comb(d, m)


@functools.lru_cache(maxsize=None)
def basis_indices(d: int, m: int) -> tuple[MultiIndex, ...]:
    """All m-subsets of ``range(d)`` in lexicographic order."""
    if d < 0 or m < 0 or m > d:
        raise DomainError(f"need 0 <= m <= d, got d={d}, m={m}")
    return tuple(itertools.combinations(range(d), m))


@functools.lru_cache(maxsize=None)
def _index_lookup(d: int, m: int) -> dict:
    return {idx: pos for pos, idx in enumerate(basis_indices(d, m))}


@functools.lru_cache(maxsize=None)
def _index_array(d: int, m: int) -> np.ndarray:
    idx = np.array(basis_indices(d, m), dtype=np.intp)
    return idx.reshape(len(basis_indices(d, m)), m)


@dataclass(frozen=True)
class MVector:
    """Element of the ``degree``-th exterior power of R^dim."""

    dim: int
    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if self.degree > self.dim or self.degree < 0:
            raise DomainError(f"degree {self.degree} out of range for dim {self.dim}")
        if coeffs.shape != (basis_dim(self.dim, self.degree),):
            raise DomainError(
                f"expected {basis_dim(self.dim, self.degree)} coefficients, got shape {coeffs.shape}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def basis(cls, dim: int, index) -> "MVector":
        index = tuple(index)
        m = len(index)
        coeffs = np.zeros(basis_dim(dim, m))
        coeffs[_index_lookup(dim, m)[index]] = 1.0
        return cls(dim, m, coeffs)

    @classmethod
    def vector(cls, v) -> "MVector":
        v = np.asarray(v, dtype=float)
        return cls(len(v), 1, v)

    def __add__(self, other: "MVector") -> "MVector":
        self._check_compatible(other)
        return MVector(self.dim, self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other: "MVector") -> "MVector":
        self._check_compatible(other)
        return MVector(self.dim, self.degree, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "MVector":
        return MVector(self.dim, self.degree, scalar * self.coeffs)

    __rmul__ = __mul__

    def __xor__(self, other: "MVector") -> "MVector":
        return wedge(self, other)

    def dot(self, other: "MVector") -> float:
        self._check_compatible(other)
        return float(self.coeffs @ other.coeffs)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def _check_compatible(self, other: "MVector"):
        if (self.dim, self.degree) != (other.dim, other.degree):
            raise DomainError("MVectors live in different exterior powers")


@dataclass(frozen=True)
class MOperator:
    """Linear map from the ``degree``-th exterior power of R^src_dim to that of R^dst_dim."""

    src_dim: int
    dst_dim: int
    degree: int
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        shape = (basis_dim(self.dst_dim, self.degree), basis_dim(self.src_dim, self.degree))
        if mat.shape != shape:
            raise DomainError(f"matrix shape {mat.shape} does not match {shape}")
        object.__setattr__(self, "matrix", mat)

    def __call__(self, v: MVector) -> MVector:
        if (v.dim, v.degree) != (self.src_dim, self.degree):
            raise DomainError("operator applied to an MVector of the wrong space")
        return MVector(self.dst_dim, self.degree, self.matrix @ v.coeffs)

    def __matmul__(self, other: "MOperator") -> "MOperator":
        if other.dst_dim != self.src_dim or other.degree != self.degree:
            raise DomainError("cannot compose operators on incompatible spaces")
        return MOperator(other.src_dim, self.dst_dim, self.degree, self.matrix @ other.matrix)

    @property
    def T(self) -> "MOperator":
        return MOperator(self.dst_dim, self.src_dim, self.degree, self.matrix.T)


def _sort_sign(seq) -> int:
    """Sign of the permutation sorting ``seq`` (entries distinct)."""
    sign = 1
    seq = list(seq)
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def wedge(u: MVector, v: MVector) -> MVector:
    """Exterior product of a p-vector and a q-vector."""
    if u.dim != v.dim:
        raise DomainError("wedge of MVectors in different ambient dimensions")
    d, p, q = u.dim, u.degree, v.degree
    if p + q > d:
        raise DomainError(f"degree {p}+{q} exceeds dimension {d}")
    lookup = _index_lookup(d, p + q)
    out = np.zeros(basis_dim(d, p + q))
    for a, I in enumerate(basis_indices(d, p)):
        if u.coeffs[a] == 0.0:
            continue
        for b, J in enumerate(basis_indices(d, q)):
            if v.coeffs[b] == 0.0 or set(I) & set(J):
                continue
            K = I + J
            out[lookup[tuple(sorted(K))]] += _sort_sign(K) * u.coeffs[a] * v.coeffs[b]
    return MVector(d, p + q, out)


def induced_matrix(A, m: int) -> np.ndarray:
    """Matrix of the m-th exterior power of ``A`` (batched over leading axes).

    ``A`` has shape ``(..., dst, src)``; the result has shape
    ``(..., C(dst, m), C(src, m))`` with entry ``(I, J)`` the minor
    ``det A[I, J]``.
    """
    A = np.asarray(A, dtype=float)
    dst, src = A.shape[-2:]
    if m < 0 or m > min(dst, src):
        raise DomainError(f"degree {m} out of range for a {dst}x{src} matrix")
    batch = A.shape[:-2]
    if m == 0:
        return np.ones(batch + (1, 1))
    if m == 1:
        return A.copy()
    rows = _index_array(dst, m)
    cols = _index_array(src, m)
    sub = A[..., rows[:, None, :, None], cols[None, :, None, :]]
    if m == 2:
        return sub[..., 0, 0] * sub[..., 1, 1] - sub[..., 0, 1] * sub[..., 1, 0]
    return np.linalg.det(sub)


def induced_map(A, m: int) -> MOperator:
    """The m-th exterior power of the linear map ``A`` (a dst x src matrix)."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DomainError("induced_map expects a single matrix")
    dst, src = A.shape
    return MOperator(src, dst, m, induced_matrix(A, m))


def restrict_to_plane(v: MVector, plane) -> MVector:
    """Coordinates of ``v|_P`` in the wedge basis of the plane's frame.

    ``plane`` is anything with an orthonormal ``frame`` (n x k), or the frame
    itself.  Restriction is the adjoint of the (isometric) inclusion.
    """
    frame = np.asarray(getattr(plane, "frame", plane), dtype=float)
    n, k = frame.shape
    if v.dim != n:
        raise DomainError("dimension mismatch between MVector and plane")
    if v.degree > k:
        raise DomainError(f"cannot restrict a {v.degree}-vector to a {k}-plane")
    return MVector(k, v.degree, induced_matrix(frame, v.degree).T @ v.coeffs)


def _hyperplane_frame(xi: np.ndarray) -> np.ndarray:
    n = len(xi)
    completed = np.column_stack([xi / np.linalg.norm(xi), np.eye(n)])
    q, _ = np.linalg.qr(completed)
    return q[:, 1:n]


def _check_xi(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 1 or not np.linalg.norm(xi) > 0:
        raise DomainError("xi must be a nonzero vector")
    return xi


def hyperplane_projections(xi, m: int) -> tuple[MOperator, MOperator]:
    """Orthogonal projections onto the m-vectors of the hyperplane ``xi^perp``
    and onto its orthocomplement.  Returns ``(Pi, Psi)`` with ``Pi + Psi = I``.
    """
    xi = _check_xi(xi)
    n = len(xi)
    if m < 0 or m > n:
        raise DomainError(f"degree {m} out of range for dimension {n}")
    if m == n:
        # Lambda^n(H) = 0 for a hyperplane H
        pi = np.zeros((1, 1))
    else:
        incl = induced_matrix(_hyperplane_frame(xi), m)
        pi = incl @ incl.T
    psi = np.eye(len(pi)) - pi
    return MOperator(n, n, m, pi), MOperator(n, n, m, psi)


@functools.lru_cache(maxsize=None)
def _wedge_tensors(n: int, m: int) -> np.ndarray:
    """``W[i]`` is the matrix of ``e_i ^ .`` from degree m-1 to degree m."""
    W = np.zeros((n, basis_dim(n, m), basis_dim(n, m - 1)))
    lookup = _index_lookup(n, m)
    for i in range(n):
        for b, J in enumerate(basis_indices(n, m - 1)):
            if i in J:
                continue
            K = (i,) + J
            W[i, lookup[tuple(sorted(K))], b] = _sort_sign(K)
    W.setflags(write=False)
    return W


def interior_projection(unit, m: int, v: np.ndarray) -> np.ndarray:
    """Apply ``Psi`` for unit directions ``unit`` (shape (..., n)) to m-vectors
    ``v`` (shape (..., C(n, m))).

    Uses ``Psi(u) v = u ^ (u -| v)``; the contraction by a unit vector is the
    adjoint of wedging with it.
    """
    unit = np.asarray(unit)
    n = unit.shape[-1]
    if m == 0:
        return np.zeros_like(v)
    W = _wedge_tensors(n, m)
    # tensordot then a batched row-vector product: much faster than a 3-operand einsum
    partial = np.tensordot(v, W, axes=([-1], [1]))
    contracted = (unit[..., None, :] @ partial)[..., 0, :]
    partial = np.tensordot(contracted, W, axes=([-1], [2]))
    return (unit[..., None, :] @ partial)[..., 0, :]


def sphere_volume(d: int) -> float:
    """Surface measure of the unit sphere in R^d."""
    if d < 1:
        raise DomainError("sphere_volume needs d >= 1")
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def symbol_constant(n: int, k: int, m: int) -> float:
    """Scalar prefactor ``c`` of the inversion symbol.

    ``c = k vol(S^(n-1)) C(n-1, m) / (vol(S^(k-1)) C(k, m))``.  The ratio
    ``C(k, m) / C(n-1, m)`` is the average, over k-planes inside a fixed
    hyperplane H, of the projection onto their m-vectors, restricted to the
    m-vectors of H.
    """
    _check_degrees(n, k, m)
    return (
        k * sphere_volume(n) * math.comb(n - 1, m)
        / (sphere_volume(k) * math.comb(k, m))
    )


def _check_degrees(n: int, k: int, m: int):
    if not 0 <= m < k < n:
        raise DomainError(f"need 0 <= m < k < n, got n={n}, k={k}, m={m}")


def symbol_h(xi, n: int, k: int, m: int) -> MOperator:
    r"""The 0-homogeneous symbol

    .. math::

        h(\xi) = c \left[\frac{\Pi(\xi)}{k - m} + \frac{\Psi(\xi)}{n - m}\right].
    """
    _check_degrees(n, k, m)
    xi = _check_xi(xi)
    if len(xi) != n:
        raise DomainError("xi has the wrong dimension")
    pi, psi = hyperplane_projections(xi, m)
    c = symbol_constant(n, k, m)
    return MOperator(n, n, m, c * (pi.matrix / (k - m) + psi.matrix / (n - m)))
