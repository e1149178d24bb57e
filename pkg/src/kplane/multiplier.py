"""The inversion multiplier ``|xi|^(n-k) h(xi)`` applied to grid forms by FFT."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .exterior import (
    DomainError,
    MOperator,
    _check_degrees,
    basis_dim,
    induced_matrix,
    interior_projection,
    symbol_constant,
)
from .forms import FormField, GridSpec

__all__ = [
    "MultiplierSpec",
    "multiplier_matrix",
    "multiplier_matrices",
    "apply_Q",
    "decay_check",
    "DecayReport",
    "ImaginaryResidueError",
]

IMAG_TOL = 1e-9


class ImaginaryResidueError(RuntimeError):
    pass


@dataclass(frozen=True)
class MultiplierSpec:
    n: int
    k: int
    m: int

    def __post_init__(self):
        _check_degrees(self.n, self.k, self.m)

    @property
    def constant(self) -> float:
        return symbol_constant(self.n, self.k, self.m)

    @property
    def eigenvalues(self) -> tuple[float, float]:
        """Eigenvalues of h on Lambda^m(H_xi) and on its complement."""
        c = self.constant
        return c / (self.k - self.m), c / (self.n - self.m)


def multiplier_matrices(xi, spec: MultiplierSpec) -> np.ndarray:
    """``|xi|^(n-k) h(xi)`` for a batch of frequencies ``xi`` of shape ``(..., n)``.

    Built from the exterior power of the hyperplane projector ``I - u u^T``,
    which is exactly the projection onto m-vectors of the hyperplane.
    Zero at ``xi = 0``.
    """
    xi = np.asarray(xi, dtype=float)
    n, k, m = spec.n, spec.k, spec.m
    if xi.shape[-1] != n:
        raise DomainError("frequency dimension mismatch")
    r = np.linalg.norm(xi, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    u = xi / safe[..., None]
    proj = np.eye(n) - u[..., :, None] * u[..., None, :]
    pi = induced_matrix(proj, m)
    eye = np.eye(basis_dim(n, m))
    h = spec.constant * (pi / (k - m) + (eye - pi) / (n - m))
    scale = np.where(r > 0, r ** (n - k), 0.0)
    return scale[..., None, None] * h


def multiplier_matrix(xi, spec: MultiplierSpec) -> MOperator:
    """Symbol of the multiplier at a single frequency (zero matrix at the origin)."""
    xi = np.asarray(xi, dtype=float)
    return MOperator(spec.n, spec.n, spec.m, multiplier_matrices(xi, spec))


def _apply_symbol(spectrum: np.ndarray, grid: GridSpec, spec: MultiplierSpec) -> np.ndarray:
    """Multiply Fourier coefficients (shape grid.shape + (C,)) by the symbol, in place per axis-0 slab."""
    n, k, m = spec.n, spec.k, spec.m
    freqs = grid.frequencies()
    c = spec.constant
    a_pi = c / (k - m)
    a_diff = c / (n - m) - a_pi
    rest = list(np.meshgrid(*freqs[1:], indexing="ij"))
    nyquist = -0.5 / grid.spacing if grid.points_per_axis % 2 == 0 else None

    # slab loop keeps temporaries at one hyperplane of the grid
    for i, f0 in enumerate(freqs[0]):
        xi = np.stack([np.full(rest[0].shape, f0)] + rest, axis=-1)
        r = np.linalg.norm(xi, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        u = xi / safe[..., None]
        v = spectrum[i]
        hv = a_pi * v
        if m > 0:
            hv = hv + a_diff * interior_projection(u, m, v)
            if nyquist is not None:
                # a Nyquist bin stands for both +f_N and -f_N; averaging the
                # symbol over these aliases keeps it Hermitian-symmetric
                nyq = np.isclose(xi, nyquist)
                edge = nyq.any(axis=-1)
                # only the Nyquist components need sign flips, so group bins by which ones they have
                codes = nyq @ (1 << np.arange(n))
                for code in np.unique(codes[edge]):
                    sel = codes == code
                    us, vs = u[sel], v[sel]
                    axes_nyq = np.flatnonzero((code >> np.arange(n)) & 1)
                    avg = np.zeros_like(vs)
                    for signs in itertools.product((1.0, -1.0), repeat=len(axes_nyq)):
                        flipped = us.copy()
                        flipped[:, axes_nyq] *= signs
                        avg += interior_projection(flipped, m, vs)
                    hv[sel] = a_pi * vs + a_diff * avg / 2 ** len(axes_nyq)
        scale = np.where(r > 0, r ** (n - k), 0.0)
        spectrum[i] = scale[..., None] * hv
    return spectrum


def apply_Q(field: FormField, spec: MultiplierSpec, pad: int = 2) -> FormField:
    """Apply the multiplier to a grid form by FFT.

    The field is zero-padded to ``pad`` times the box width per axis before
    transforming and cropped back afterwards.  ``pad=1`` is the bare periodic
    DFT multiplier.
    """
    grid = field.grid
    if grid.n != spec.n:
        raise DomainError("field dimension does not match the multiplier")
    if field.degree != spec.m:
        raise DomainError("field degree does not match the multiplier")
    if pad < 1:
        raise DomainError("pad must be >= 1")
    work_grid = grid.padded(pad) if pad > 1 else grid
    axes = tuple(range(grid.n))
    if pad > 1:
        buf = np.zeros(work_grid.shape + field.data.shape[-1:], dtype=complex)
        buf[work_grid.crop_slices(grid)] = field.data
    else:
        buf = field.data.astype(complex)
    spectrum = sfft.fftn(buf, axes=axes, overwrite_x=True)
    del buf
    spectrum = _apply_symbol(spectrum, work_grid, spec)
    out = sfft.ifftn(spectrum, axes=axes, overwrite_x=True)
    del spectrum
    if pad > 1:
        out = out[work_grid.crop_slices(grid)]
    residue = np.abs(out.imag).max(initial=0.0)
    scale = max(np.abs(out.real).max(initial=0.0), 1.0)
    if residue > IMAG_TOL * scale:
        raise ImaginaryResidueError(f"imaginary residue {residue:.3e} after inverse FFT")
    return FormField(grid, field.degree, np.ascontiguousarray(out.real))


@dataclass
class DecayReport:
    max_ratio: float
    radii: np.ndarray
    profile: np.ndarray

    def to_json(self) -> dict:
        return {
            "max_ratio": self.max_ratio,
            "radii": self.radii.tolist(),
            "profile": self.profile.tolist(),
        }


def decay_check(field: FormField, bins: int = 24) -> DecayReport:
    """Weighted magnitude ``|f(x)| <x>^n``: its grid maximum and its maximum per radial shell."""
    grid = field.grid
    x = grid.points()
    r = np.sqrt(np.sum(x**2, axis=-1))
    mag = np.linalg.norm(field.data, axis=-1)
    ratio = mag * (1.0 + r**2) ** (grid.n / 2)
    # shells out to the inscribed radius only; corners are under-sampled
    edges = np.linspace(0.0, grid.half_width, bins + 1)
    which = np.digitize(r.reshape(-1), edges) - 1
    flat = ratio.reshape(-1)
    profile = np.zeros(bins)
    for b in range(bins):
        sel = which == b
        profile[b] = flat[sel].max() if sel.any() else 0.0
    return DecayReport(float(flat.max(initial=0.0)), 0.5 * (edges[1:] + edges[:-1]), profile)
