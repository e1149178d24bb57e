"""Analytic Schwartz m-forms and m-forms sampled on regular grids."""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .exterior import DomainError, MVector, basis_dim, basis_indices

__all__ = [
    "GridSpec",
    "FormField",
    "AnalyticForm",
    "Term",
    "eval_analytic",
    "sample_to_grid",
    "interpolate",
    "l2_norm",
    "hdot_norm",
    "gaussian_form",
]


@dataclass(frozen=True)
class GridSpec:
    """Regular grid on the box [-L, L)^n with N points per axis."""

    n: int
    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("grid dimension must be positive")
        if self.half_width <= 0:
            raise DomainError("half_width must be positive")
        N = self.points_per_axis
        if N < 8 or N % 2:
            raise DomainError(f"points_per_axis must be even and >= 8, got {N}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.n

    def axis(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.points_per_axis)

    def points(self) -> np.ndarray:
        """Grid nodes, shape ``shape + (n,)``, row-major."""
        ax = self.axis()
        return np.stack(np.meshgrid(*([ax] * self.n), indexing="ij"), axis=-1)

    def frequencies(self) -> list[np.ndarray]:
        """Physical DFT frequencies j / (2L) per axis, in FFT order."""
        return [np.fft.fftfreq(self.points_per_axis, d=self.spacing)] * self.n

    def padded(self, factor: int) -> "GridSpec":
        """Concentric grid with the same spacing and ``factor`` times the width."""
        return GridSpec(self.n, self.half_width * factor, self.points_per_axis * factor)

    def crop_slices(self, inner: "GridSpec") -> tuple[slice, ...]:
        """Index slices of this grid that coincide with a concentric ``inner`` grid."""
        if not math.isclose(inner.spacing, self.spacing) or inner.n != self.n:
            raise DomainError("grids are not concentric with equal spacing")
        start = (self.points_per_axis - inner.points_per_axis) // 2
        return (slice(start, start + inner.points_per_axis),) * self.n


@dataclass(frozen=True)
class FormField:
    """An m-form sampled on a grid; ``data`` has shape ``grid.shape + (C(n, m),)``."""

    grid: GridSpec
    degree: int
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        expected = self.grid.shape + (basis_dim(self.grid.n, self.degree),)
        if data.shape != expected:
            raise DomainError(f"data shape {data.shape} != {expected}")
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.grid.n

    @classmethod
    def zeros(cls, grid: GridSpec, degree: int) -> "FormField":
        return cls(grid, degree, np.zeros(grid.shape + (basis_dim(grid.n, degree),)))

    def __add__(self, other: "FormField") -> "FormField":
        return FormField(self.grid, self.degree, self.data + other.data)

    def __sub__(self, other: "FormField") -> "FormField":
        return FormField(self.grid, self.degree, self.data - other.data)

    def __mul__(self, scalar: float) -> "FormField":
        return FormField(self.grid, self.degree, scalar * self.data)

    __rmul__ = __mul__

    def inner(self, other: "FormField") -> float:
        """L^2 inner product (Riemann sum)."""
        return float(np.vdot(self.data, other.data)) * self.grid.cell_volume

    def evaluate(self, points) -> np.ndarray:
        return interpolate(self, points)

    # -- serialization -------------------------------------------------
    MAGIC = b"KPFF"

    def to_bytes(self) -> bytes:
        header = struct.pack(
            "<4sIIIdI",
            self.MAGIC,
            self.n,
            self.degree,
            self.grid.points_per_axis,
            self.grid.half_width,
            self.data.shape[-1],
        )
        return header + np.ascontiguousarray(self.data, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "FormField":
        size = struct.calcsize("<4sIIIdI")
        magic, n, m, N, L, ncoef = struct.unpack("<4sIIIdI", blob[:size])
        if magic != cls.MAGIC:
            raise ValueError("not a FormField container")
        grid = GridSpec(n, L, N)
        if ncoef != basis_dim(n, m):
            raise ValueError("coefficient count inconsistent with (n, m)")
        data = np.frombuffer(blob[size:], dtype="<f8").reshape(grid.shape + (ncoef,))
        return cls(grid, m, data.copy())

    def write_csv(self, path) -> None:
        names = ["x%d" % i for i in range(self.n)]
        names += ["dx" + "".join(map(str, I)) if I else "scalar" for I in basis_indices(self.n, self.degree)]
        pts = self.grid.points().reshape(-1, self.n)
        vals = self.data.reshape(-1, self.data.shape[-1])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            for p, v in zip(pts, vals):
                writer.writerow([repr(float(a)) for a in p] + [repr(float(b)) for b in v])


@dataclass(frozen=True)
class Term:
    """``poly(x) * exp(-width * pi * |x|^2) dx_index``.

    ``poly`` maps exponent tuples to coefficients; ``{(0,)*n: 1.0}`` is the constant 1.
    """

    index: tuple
    poly: dict
    width: float = 1.0


@dataclass(frozen=True)
class AnalyticForm:
    """Finite sum of Gaussian-times-polynomial coefficient functions."""

    n: int
    m: int
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        valid = set(basis_indices(self.n, self.m))
        for t in self.terms:
            if tuple(t.index) not in valid:
                raise DomainError(f"invalid multi-index {t.index} for n={self.n}, m={self.m}")
            if t.width <= 0:
                raise DomainError("gaussian width must be positive")
            for e in t.poly:
                if len(e) != self.n or min(e, default=0) < 0:
                    raise DomainError(f"bad exponent {e}")

    def __call__(self, points) -> np.ndarray:
        return eval_analytic(self, points)

    def evaluate(self, points) -> np.ndarray:
        return eval_analytic(self, points)

    def scaled(self, factor: float) -> "AnalyticForm":
        terms = [Term(t.index, {e: factor * c for e, c in t.poly.items()}, t.width) for t in self.terms]
        return AnalyticForm(self.n, self.m, terms)

    def __add__(self, other: "AnalyticForm") -> "AnalyticForm":
        if (self.n, self.m) != (other.n, other.m):
            raise DomainError("forms of different type")
        return AnalyticForm(self.n, self.m, self.terms + other.terms)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "terms": [
                {
                    "index": list(t.index),
                    "width": t.width,
                    "poly": [[list(e), c] for e, c in sorted(t.poly.items())],
                }
                for t in self.terms
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "AnalyticForm":
        n = doc["n"]
        terms = []
        for t in doc["terms"]:
            poly = t.get("poly")
            if poly is None:
                poly = [[[0] * n, t.get("coefficient", 1.0)]]
            terms.append(Term(tuple(t["index"]), {tuple(e): float(c) for e, c in poly}, float(t.get("width", 1.0))))
        return cls(n, doc["m"], terms)


def gaussian_form(n: int, index=(), coefficient: float = 1.0, width: float = 1.0, monomial=None) -> AnalyticForm:
    """``coefficient * x^monomial * exp(-width pi |x|^2) dx_index``."""
    index = tuple(index)
    expo = tuple(monomial) if monomial is not None else (0,) * n
    return AnalyticForm(n, len(index), [Term(index, {expo: coefficient}, width)])


def eval_analytic(form: AnalyticForm, points) -> np.ndarray:
    """Evaluate at ``points`` of shape ``(..., n)``; returns ``(..., C(n, m))``."""
    x = np.asarray(points, dtype=float)
    if x.shape[-1] != form.n:
        raise DomainError("point dimension does not match the form")
    lookup = {I: pos for pos, I in enumerate(basis_indices(form.n, form.m))}
    out = np.zeros(x.shape[:-1] + (basis_dim(form.n, form.m),))
    r2 = np.einsum("...i,...i->...", x, x)
    gauss = {}
    for t in form.terms:
        if t.width not in gauss:
            gauss[t.width] = np.exp(-t.width * math.pi * r2)
        poly = np.zeros(x.shape[:-1])
        for expo, c in t.poly.items():
            mono = np.full(x.shape[:-1], c)
            for axis, e in enumerate(expo):
                if e:
                    mono = mono * x[..., axis] ** e
            poly += mono
        out[..., lookup[tuple(t.index)]] += poly * gauss[t.width]
    return out


def sample_to_grid(form: AnalyticForm, grid: GridSpec) -> FormField:
    if form.n != grid.n:
        raise DomainError("grid and form dimensions differ")
    return FormField(grid, form.m, eval_analytic(form, grid.points()))


def interpolate(field: FormField, points) -> np.ndarray:
    """Multilinear interpolation of every coefficient channel.

    The field is extended by zero outside [-L, L)^n, including the last
    half-open cell.  Returns shape ``points.shape[:-1] + (C(n, m),)``.
    """
    x = np.asarray(points, dtype=float)
    grid = field.grid
    n, N = grid.n, grid.points_per_axis
    if x.shape[-1] != n:
        raise DomainError("point dimension does not match the field")
    lead = x.shape[:-1]
    x = x.reshape(-1, n)
    ncoef = field.data.shape[-1]

    t = (x + grid.half_width) / grid.spacing
    inside = ((t >= 0) & (t < N)).all(axis=1)
    # one trailing zero layer per axis represents the zero extension
    padded = np.pad(field.data, [(0, 1)] * n + [(0, 0)])
    coords = t.T
    out = np.empty((len(x), ncoef))
    for c in range(ncoef):
        out[:, c] = ndimage.map_coordinates(
            padded[..., c], coords, order=1, mode="constant", cval=0.0, prefilter=False
        )
    out[~inside] = 0.0
    return out.reshape(lead + (ncoef,))


def l2_norm(field: FormField) -> float:
    return math.sqrt(float(np.sum(field.data**2)) * field.grid.cell_volume)


def _freq_magnitude(grid: GridSpec) -> np.ndarray:
    freqs = np.meshgrid(*grid.frequencies(), indexing="ij")
    return np.sqrt(sum(f**2 for f in freqs))


def hdot_norm(field: FormField, s: float) -> float:
    r"""Homogeneous Sobolev norm :math:`(\int |\xi|^{2s} |\mathcal F f(\xi)|^2 d\xi)^{1/2}`
    with the DFT scaled to approximate :math:`\mathcal F f(\xi) = \int e^{-2\pi i x\cdot\xi} f(x) dx`.
    """
    if s < 0:
        raise DomainError("s must be nonnegative")
    grid = field.grid
    axes = tuple(range(grid.n))
    spec = np.fft.fftn(field.data, axes=axes) * grid.cell_volume
    dxi = (1.0 / (2.0 * grid.half_width)) ** grid.n
    weight = _freq_magnitude(grid) ** (2 * s)
    if s == 0:
        weight = np.ones_like(weight)
    else:
        weight.reshape(-1)[0] = 0.0
    total = np.sum(weight[..., None] * np.abs(spec) ** 2) * dxi
    return math.sqrt(float(total))


def mvector_at(field: FormField, point) -> MVector:
    """Interpolated value at a single point as an :class:`MVector`."""
    return MVector(field.n, field.degree, interpolate(field, np.asarray(point)[None])[0])
