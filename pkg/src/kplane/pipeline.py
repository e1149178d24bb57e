"""End-to-end experiments: inversion, decomposition into plane forms, and
reconstruction of current pairings from projections, plus property checks."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import NamedTuple

import jsonschema
import numpy as np

from .currents import DiracCurrent, pair, pushforward
from .exterior import basis_indices, induced_matrix
from .forms import (
    AnalyticForm,
    FormField,
    GridSpec,
    Term,
    gaussian_form,
    hdot_norm,
    l2_norm,
    sample_to_grid,
)
from .grassmann import Plane, PlaneSet, distance, fixed_quadrature, sample_haar
from .multiplier import DecayReport, MultiplierSpec, apply_Q, decay_check
from .transform import QuadratureSpec, Sinogram, adjoint, forward, forward_point

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "DecompositionResult",
    "InversionResult",
    "PairingResult",
    "invert",
    "decompose",
    "pair_via_projections",
    "holder_check",
    "boundedness_check",
    "decay_study",
    "random_form_family",
    "convergence_study",
    "backprojection",
    "q_field",
    "commutation_gap",
    "plane_values",
    "HolderReport",
    "DecayStudy",
    "BoundsReport",
    "boundedness_ratio",
]


class ConfigError(ValueError):
    """Configuration failed schema or semantic validation."""


def _schema() -> dict:
    return json.loads(resources.files("kplane").joinpath("config.schema.json").read_text())


_DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "grid": {
        "half_width": 4.0,
        "points": 64,
        "k_points": None,
        "perp_nodes": 129,
        "backproject_pad": 2,
        "q_pad": 2,
    },
    "planes": {"mode": "haar", "count": 200},
    "form": None,
    "current": None,
    "holder": {"theta": 0.5, "pairs": 200},
    "bounds": {"family_size": 10},
    "tolerances": {},
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment configuration; build with :meth:`from_dict`."""

    doc: dict = field(repr=False)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(doc, _schema())
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"config does not match schema: {exc.message}") from None
        resolved = _merge(_DEFAULTS, doc)
        n, k, m = resolved["n"], resolved["k"], resolved["m"]
        if not 0 <= m < k < n:
            raise ConfigError(f"need 0 <= m < k < n, got n={n}, k={k}, m={m}")
        # k_points stays null in the stored doc so that replace() on points carries it along
        g = resolved["grid"]
        for key in ("points", "k_points"):
            value = g[key] if g[key] is not None else g["points"]
            if value < 8 or value % 2:
                raise ConfigError(f"grid.{key} must be even and >= 8")
        mode = resolved["planes"]["mode"]
        if mode == "fixed" and not (n in (2, 3) and k in (1, n - 1)):
            raise ConfigError(f"fixed quadrature unavailable for G({k},{n}); use haar")
        if resolved["form"] is not None:
            try:
                form = AnalyticForm.from_json({"n": n, "m": m, **resolved["form"]})
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"invalid form: {exc}") from None
            if form.n != n or form.m != m:
                raise ConfigError("form dimension/degree disagree with n, m")
        return cls(resolved)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def replace(self, **changes) -> "ExperimentConfig":
        return ExperimentConfig.from_dict(_merge(self.doc, changes))

    def to_json(self) -> dict:
        return copy.deepcopy(self.doc)

    @property
    def hash(self) -> str:
        """SHA-256 of the canonical resolved config; the thread count is left out
        because it never changes results."""
        doc = {key: value for key, value in self.doc.items() if key != "threads"}
        canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    # -- convenience views ---------------------------------------------
    n = property(lambda self: self.doc["n"])
    k = property(lambda self: self.doc["k"])
    m = property(lambda self: self.doc["m"])
    seed = property(lambda self: self.doc["seed"])
    threads = property(lambda self: self.doc["threads"])

    @property
    def grid(self) -> GridSpec:
        g = self.doc["grid"]
        return GridSpec(self.n, float(g["half_width"]), g["points"])

    @property
    def k_grid(self) -> GridSpec:
        g = self.doc["grid"]
        points = g["k_points"] if g["k_points"] is not None else g["points"]
        return GridSpec(self.k, float(g["half_width"]), points)

    @property
    def quad(self) -> QuadratureSpec:
        g = self.doc["grid"]
        return QuadratureSpec(float(g["half_width"]), g["perp_nodes"])

    @property
    def spec(self) -> MultiplierSpec:
        return MultiplierSpec(self.n, self.k, self.m)

    def streams(self, count: int = 4) -> list[np.random.SeedSequence]:
        """Independent seed streams: planes, probes, families, spare."""
        return np.random.SeedSequence(self.seed).spawn(count)

    def planes(self, count: int | None = None, stream: int = 0) -> PlaneSet:
        p = self.doc["planes"]
        count = count or p["count"]
        if p["mode"] == "fixed":
            return fixed_quadrature(self.n, self.k, count)
        ps = sample_haar(self.n, self.k, count, np.random.default_rng(self.streams()[stream]))
        return PlaneSet(ps.planes, ps.weights, self.seed, "haar")

    def form(self) -> AnalyticForm:
        if self.doc["form"] is None:
            return gaussian_form(self.n, tuple(range(self.m)))
        return AnalyticForm.from_json({"n": self.n, "m": self.m, **self.doc["form"]})


# -- inversion ----------------------------------------------------------


class InversionResult(NamedTuple):
    reconstruction: FormField
    rel_l2_error: float


def backprojection(alpha, cfg: ExperimentConfig, planes: PlaneSet | None = None):
    """``R* R alpha`` on the widened grid, together with the sinogram."""
    planes = planes or cfg.planes()
    sino = forward(alpha, planes, cfg.k_grid, cfg.quad, threads=cfg.threads)
    wide = cfg.grid.padded(cfg.doc["grid"]["backproject_pad"])
    return adjoint(sino, wide, threads=cfg.threads), sino


def invert(alpha: AnalyticForm, cfg: ExperimentConfig, planes: PlaneSet | None = None) -> InversionResult:
    """Reconstruct ``alpha`` from its transform by ``Q R* R`` and compare to the sampled form.

    The backprojection is evaluated on a grid ``backproject_pad`` times wider
    than the target box: ``R* R alpha`` decays only like ``|x|^(k-n)`` and
    truncating it at the box edge would pollute the low frequencies.
    """
    grid = cfg.grid
    bp, _ = backprojection(alpha, cfg, planes)
    q = apply_Q(bp, cfg.spec, pad=cfg.doc["grid"]["q_pad"])
    recon = FormField(grid, alpha.m, q.data[bp.grid.crop_slices(grid)])
    ref = sample_to_grid(alpha, grid)
    ref_norm = l2_norm(ref)
    err = l2_norm(recon - ref) / ref_norm if ref_norm > 0 else l2_norm(recon)
    return InversionResult(recon, err)


# -- decomposition ------------------------------------------------------


def q_field(alpha: AnalyticForm, cfg: ExperimentConfig) -> FormField:
    """The multiplier applied to ``alpha`` sampled on the configured grid."""
    return apply_Q(sample_to_grid(alpha, cfg.grid), cfg.spec, pad=cfg.doc["grid"]["q_pad"])


@dataclass
class DecompositionResult:
    """Plane forms ``alpha_P = R(Q alpha)(P, .)`` sampled on each plane's k-grid
    in frame coordinates."""

    sinogram: Sinogram
    config_hash: str
    q_alpha: FormField | None = None

    @property
    def planes(self) -> PlaneSet:
        return self.sinogram.planes

    def plane_form(self, i: int) -> FormField:
        return self.sinogram.plane_field(i)

    def superpose(self, x) -> np.ndarray:
        """``sum_P w_P (P^* alpha_P)(x)``, which should reproduce ``alpha(x)``."""
        from .currents import pullback_form_eval

        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (len(basis_indices(self.planes.n, self.sinogram.degree)),))
        for i, (P, w) in enumerate(self.planes):
            out += w * pullback_form_eval(P, self.plane_form(i), x)
        return out

    def on_grid(self, grid: GridSpec) -> FormField:
        """The superposition sampled on ``grid`` (this is ``R*`` of the plane forms)."""
        return adjoint(self.sinogram, grid)


def decompose(alpha: AnalyticForm, cfg: ExperimentConfig, planes: PlaneSet | None = None) -> DecompositionResult:
    """Plane forms ``alpha_P``: the transform of ``Q alpha`` restricted to each plane."""
    planes = planes or cfg.planes()
    qa = q_field(alpha, cfg)
    sino = forward(qa, planes, cfg.k_grid, cfg.quad, threads=cfg.threads)
    return DecompositionResult(sino, cfg.hash, qa)


def commutation_gap(alpha: AnalyticForm, cfg: ExperimentConfig, planes: PlaneSet | None = None) -> float:
    """Relative L^2 gap between ``R* R Q alpha`` and ``Q R* R alpha`` on the box."""
    planes = planes or cfg.planes()
    recon = invert(alpha, cfg, planes).reconstruction
    other = decompose(alpha, cfg, planes).on_grid(cfg.grid)
    return l2_norm(recon - other) / max(l2_norm(recon), 1e-300)


# -- currents -----------------------------------------------------------


@dataclass
class PairingResult:
    estimate: float
    std_error: float
    truth: float
    per_plane: np.ndarray = field(repr=False)

    def within(self, rel: float = 0.05, sigmas: float = 3.0) -> bool:
        return abs(self.estimate - self.truth) <= max(sigmas * self.std_error, rel * abs(self.truth))

    def to_json(self) -> dict:
        return {
            "estimate": self.estimate,
            "std_error": self.std_error,
            "truth": self.truth,
            "abs_error": abs(self.estimate - self.truth),
            "planes": len(self.per_plane),
        }


def pair_via_projections(
    T: DiracCurrent,
    alpha: AnalyticForm,
    cfg: ExperimentConfig,
    planes: PlaneSet | None = None,
    qa: FormField | None = None,
) -> PairingResult:
    """Estimate ``T(alpha)`` as the plane average of ``(P_* T)(alpha_P)``.

    The plane forms are evaluated directly at the pushed-forward atoms
    rather than interpolated from a stored k-grid.
    """
    planes = planes or cfg.planes()
    qa = qa if qa is not None else q_field(alpha, cfg)
    values = np.empty(len(planes))
    for i, P in enumerate(planes.planes):
        pushed = pushforward(P, T)
        alpha_P = forward_point(qa, P, pushed.positions, cfg.quad)
        values[i] = float(np.sum(np.einsum("ac,ac->a", pushed.weights, alpha_P)))
    w = planes.weights
    estimate = float(np.dot(w, values))
    if len(values) > 1:
        var = float(np.dot(w, (values - estimate) ** 2)) * len(values) / (len(values) - 1)
        std_error = math.sqrt(var * float(np.dot(w, w)))
    else:
        std_error = float("inf")
    return PairingResult(estimate, std_error, pair(T, alpha), values)


# -- property checks ----------------------------------------------------


def _perturbed_plane(P: Plane, eps: float, rng: np.random.Generator) -> Plane:
    F = P.frame
    G = rng.standard_normal(F.shape)
    G -= F @ (F.T @ G)
    G /= np.linalg.norm(G)
    q, _ = np.linalg.qr(F + eps * G)
    return Plane(q)


@dataclass
class HolderReport:
    theta: float
    ratios: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)
    max_half: float = 0.0
    max_full: float = 0.0

    @property
    def drift(self) -> float:
        return abs(self.max_full - self.max_half) / self.max_half if self.max_half > 0 else 0.0

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.ratios).all()) and self.drift <= 0.2

    def to_json(self) -> dict:
        q = np.quantile(self.ratios, [0.5, 0.9, 0.99]) if len(self.ratios) else [0.0] * 3
        return {
            "theta": self.theta,
            "samples": len(self.ratios),
            "max_ratio_half_sample": self.max_half,
            "max_ratio": self.max_full,
            "drift": self.drift,
            "quantiles": {"p50": float(q[0]), "p90": float(q[1]), "p99": float(q[2])},
            "min_distance": float(self.distances.min()) if len(self.distances) else 0.0,
            "ok": self.ok,
        }


def plane_values(qa: FormField, P: Plane, x, quad: QuadratureSpec) -> np.ndarray:
    """``R(Q alpha)(P, x_P)`` included back into ambient Lambda^m coordinates."""
    x = np.atleast_2d(x)
    vals = forward_point(qa, P, x @ P.frame, quad)
    return vals @ induced_matrix(P.frame, qa.degree).T


def holder_check(
    alpha: AnalyticForm,
    cfg: ExperimentConfig,
    theta: float | None = None,
    pairs: int | None = None,
    qa: FormField | None = None,
    eps_range=(1e-3, 10.0),
) -> HolderReport:
    """Ratios ``|R Q alpha(P, x_P) - R Q alpha(Q, x_Q)| / dist(P, Q)^theta``.

    ``2 * pairs`` plane pairs are drawn; the maximum over the first half and
    over the full sample are both reported so stability under doubling can
    be judged.
    """
    theta = cfg.doc["holder"]["theta"] if theta is None else theta
    pairs = cfg.doc["holder"]["pairs"] if pairs is None else pairs
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    qa = qa if qa is not None else q_field(alpha, cfg)
    rng = np.random.default_rng(cfg.streams()[1])
    total = 2 * pairs
    base = sample_haar(cfg.n, cfg.k, total, rng)
    L = cfg.grid.half_width
    ratios = np.empty(total)
    dists = np.empty(total)
    lo, hi = np.log(eps_range[0]), np.log(eps_range[1])
    for i, P in enumerate(base.planes):
        Q = _perturbed_plane(P, float(np.exp(rng.uniform(lo, hi))), rng)
        # probe uniformly in the ball of radius L/2
        d = rng.standard_normal(cfg.n)
        x = 0.5 * L * rng.uniform() ** (1.0 / cfg.n) * d / np.linalg.norm(d)
        diff = plane_values(qa, P, x, cfg.quad) - plane_values(qa, Q, x, cfg.quad)
        dists[i] = distance(P, Q)
        ratios[i] = np.linalg.norm(diff) / dists[i] ** theta if dists[i] > 0 else 0.0
    return HolderReport(theta, ratios, dists, float(ratios[:pairs].max()), float(ratios.max()))


@dataclass
class DecayStudy:
    base: DecayReport
    doubled: DecayReport

    @property
    def growth(self) -> float:
        return self.doubled.max_ratio / self.base.max_ratio - 1.0 if self.base.max_ratio > 0 else 0.0

    @property
    def ok(self) -> bool:
        return self.growth <= 0.1

    def to_json(self) -> dict:
        return {
            "base": self.base.to_json(),
            "doubled_box": self.doubled.to_json(),
            "growth": self.growth,
            "ok": self.ok,
        }


def decay_study(alpha: AnalyticForm, cfg: ExperimentConfig) -> DecayStudy:
    """``|Q alpha(x)| <x>^n`` on the configured box and on a box twice as wide."""
    pad = cfg.doc["grid"]["q_pad"]
    grid = cfg.grid
    base = decay_check(apply_Q(sample_to_grid(alpha, grid), cfg.spec, pad=pad))
    wide = grid.padded(2)
    doubled = decay_check(apply_Q(sample_to_grid(alpha, wide), cfg.spec, pad=pad))
    return DecayStudy(base, doubled)


def random_form_family(n: int, m: int, size: int, rng) -> list[AnalyticForm]:
    """Random Gaussian-times-affine test forms with widths in [0.8, 1.6]."""
    rng = np.random.default_rng(rng)
    indices = basis_indices(n, m)
    family = []
    for _ in range(size):
        terms = []
        for _ in range(int(rng.integers(1, 4))):
            index = indices[int(rng.integers(len(indices)))]
            poly = {(0,) * n: float(rng.normal())}
            axis = int(rng.integers(n))
            expo = tuple(1 if a == axis else 0 for a in range(n))
            poly[expo] = float(rng.normal())
            terms.append(Term(index, poly, float(rng.uniform(0.8, 1.6))))
        family.append(AnalyticForm(n, m, terms))
    return family


@dataclass
class BoundsReport:
    ratios: list
    lower: float
    upper: float

    @property
    def sup(self) -> float:
        return max(self.ratios)

    @property
    def ok(self) -> bool:
        return all(np.isfinite(self.ratios))

    def to_json(self) -> dict:
        return {
            "ratios": list(self.ratios),
            "empirical_constant": self.sup,
            "symbol_bounds": [self.lower, self.upper],
            "ok": self.ok,
        }


def boundedness_ratio(alpha: AnalyticForm, cfg: ExperimentConfig, planes: PlaneSet | None = None) -> float:
    """``||R* R alpha||_{Hdot^(n-k)} / ||alpha||_{L^2}``."""
    bp, _ = backprojection(alpha, cfg, planes)
    return hdot_norm(bp, cfg.n - cfg.k) / l2_norm(sample_to_grid(alpha, cfg.grid))


def boundedness_check(family, cfg: ExperimentConfig, planes: PlaneSet | None = None) -> BoundsReport:
    """Empirical constant of ``Hdot^(n-k)``-boundedness of ``R* R`` over a family of forms.

    The exact continuum ratio lies between the reciprocal eigenvalues of the
    symbol, which are reported alongside.
    """
    family = list(family)
    if len(family) < 10:
        raise ValueError("boundedness_check needs a family of at least 10 forms")
    planes = planes or cfg.planes()
    ratios = [boundedness_ratio(a, cfg, planes) for a in family]
    big, small = cfg.spec.eigenvalues
    if cfg.m == 0:
        # scalar case: the complementary projection vanishes and h is constant
        small = big
    return BoundsReport(ratios, 1.0 / big, 1.0 / small)


def convergence_study(alpha: AnalyticForm, cfg: ExperimentConfig, settings: list[dict]) -> list[float]:
    """Inversion errors for a sequence of config overrides."""
    return [invert(alpha, cfg.replace(**s)).rel_l2_error for s in settings]
