#!/usr/bin/env python3
"""
Fractal Measures - atomic alpha-dimensional measures, rescalings and growth audits
Part of Layer 3: Tools (deterministic operations)
Architecture SOP: architecture/05_numerical_contracts.md

Every measure is an AtomicMeasure: a weighted point cloud in R^{n+1} with a
declared resolution. Optional structure rides along for fast paths:
RadialProfile (shell radii and masses), ProductFactors (separable 1-D
factors along an orthonormal basis) and GridLayout (cell indices).
"""

import os
import sys
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal, special, stats
from scipy.spatial.distance import cdist

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tools.cone_geometry import NullFrame, ball_volume, plate_rotation, sphere_measure
from tools.lab_errors import InvalidInputError, RegimeMismatchError, ResourceInfeasibleError
from tools.lab_logging import get_logger

logger = get_logger(__name__)

MEASURE_SETTINGS = {
    "grid_cells_per_resolution": 2,
    "max_atoms": 4_000_000,
    "materialize_limit": 500_000,
    "profile_nodes": 4,
    "meridian_radial_nodes": 12,
    "meridian_polar_nodes": 8,
    "meridian_focus_angles": (math.pi / 4, 3 * math.pi / 4),
    "cube_factor_nodes": 4,
    "cube_jacobi_nodes": 6,
    "plate_cells_per_axis": 4,
    "pairwise_limit": 50_000,
}

AUDIT_SETTINGS = {
    "floor_factor": 4.0,
    "radii_per_center": 32,
    "bands": 6,
    "trend_threshold": -0.25,
    "center_chunk": 8,
}


class LatticeKind(Enum):
    MID_LATTICE = "mid"
    HIGH_LATTICE = "high"

    @classmethod
    def parse(cls, value) -> "LatticeKind":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        for kind in cls:
            if text in (kind.value, kind.name.lower(), kind.value + "_lattice"):
                return kind
        raise InvalidInputError(f"unknown lattice kind {value!r}")


# --- data model ---------------------------------------------------------------

@dataclass(frozen=True)
class RadialProfile:
    """Radial measure as shells: mass masses[i] spread uniformly over the sphere of radius radii[i]."""

    radii: np.ndarray
    masses: np.ndarray
    dim: int
    alpha: float = float("nan")

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    def ball_mass(self, rho: float) -> float:
        return float(np.sum(self.masses[self.radii <= rho]))


@dataclass(frozen=True)
class ProductFactors:
    """Separable measure: product of 1-D atomic factors along the columns of basis (x = basis @ t)."""

    nodes: Tuple[np.ndarray, ...]
    weights: Tuple[np.ndarray, ...]
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.nodes)

    @property
    def atom_count(self) -> int:
        return int(np.prod([len(w) for w in self.weights]))

    @property
    def total_mass(self) -> float:
        return float(np.prod([np.sum(w) for w in self.weights]))

    def atoms(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.atom_count > MEASURE_SETTINGS["max_atoms"]:
            raise ResourceInfeasibleError(f"product measure has {self.atom_count} atoms; too many to materialize")
        grids = np.meshgrid(*self.nodes, indexing="ij")
        coords = np.stack([g.ravel() for g in grids], axis=1)
        weight_grids = np.meshgrid(*self.weights, indexing="ij")
        weights = np.prod(np.stack([w.ravel() for w in weight_grids], axis=1), axis=1)
        return coords @ self.basis.T, weights

    def scaled(self, factors: Sequence[float]) -> "ProductFactors":
        return ProductFactors(
            nodes=tuple(nodes * s for nodes, s in zip(self.nodes, factors)),
            weights=self.weights,
            basis=self.basis,
        )


@dataclass(frozen=True)
class GridLayout:
    """Atoms sit at spacing * indices."""

    spacing: float
    indices: np.ndarray


@dataclass
class AtomicMeasure:
    """
    Weighted point cloud approximating an alpha-dimensional measure.

    Product measures too large to expand keep empty point arrays and carry
    their mass in factors (materialized is False).
    """

    points: np.ndarray
    weights: np.ndarray
    alpha_claimed: float
    support_radius: float
    resolution: float
    seed: Optional[int] = None
    label: str = ""
    radial: Optional[RadialProfile] = None
    factors: Optional[ProductFactors] = None
    grid: Optional[GridLayout] = None
    axisymmetric: bool = False
    empty: bool = False
    materialized: bool = True
    meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.points.ndim != 2:
            raise InvalidInputError("measure points must be a 2-D array")
        if self.points.shape[0] != self.weights.shape[0]:
            raise InvalidInputError("points and weights differ in length")
        if np.any(self.weights < 0):
            raise InvalidInputError("measure weights must be nonnegative")
        if self.resolution <= 0:
            raise InvalidInputError(f"resolution must be positive, got {self.resolution}")
        if self.points.size and np.max(np.linalg.norm(self.points, axis=1)) > self.support_radius * (1 + 1e-9):
            raise InvalidInputError("atoms lie outside support_radius")

    @property
    def dimension_ambient(self) -> int:
        if self.factors is not None:
            return self.factors.dim
        return int(self.points.shape[1])

    @property
    def n(self) -> int:
        return self.dimension_ambient - 1

    @property
    def atom_count(self) -> int:
        if not self.materialized and self.factors is not None:
            return self.factors.atom_count
        return int(self.weights.shape[0])

    @property
    def atoms(self):
        return list(zip(self.points, self.weights))

    def relabeled(self, alpha: float, label: str = None) -> "AtomicMeasure":
        """Same atoms with a different claimed dimension (used to plant mislabeled audits)."""
        return replace(self, alpha_claimed=float(alpha), label=label or f"{self.label}@alpha={alpha}")


@dataclass(frozen=True)
class GrowthAudit:
    alpha: float
    estimated_constant: float
    samples: int
    worst_center: np.ndarray
    worst_radius: float
    radius_floor: float
    trend_slope: float
    diverging_trend: bool
    ball_shape: str = "euclidean"

    def as_row(self) -> dict:
        return {
            "alpha": self.alpha,
            "estimated_constant": self.estimated_constant,
            "samples": self.samples,
            "worst_radius": self.worst_radius,
            "radius_floor": self.radius_floor,
            "trend_slope": self.trend_slope,
            "diverging_trend": self.diverging_trend,
            "ball_shape": self.ball_shape,
        }


def _check_alpha(alpha: float, n: int):
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    if not 0 < alpha <= n + 1:
        raise InvalidInputError(f"alpha must lie in (0, {n + 1}], got {alpha}")


# --- radial power measures ------------------------------------------------------

def radial_profile(alpha: float, dim: int, resolution: float) -> RadialProfile:
    """
    Shell decomposition of |x|^{alpha-dim} dx on the unit ball of R^dim.

    Dyadic octaves [2^{-k-1}, 2^{-k}] are split into panels no wider than
    resolution with Gauss-Legendre nodes; the ball below the last octave is
    lumped at radius 0 with its exact mass.
    """
    sigma = sphere_measure(dim)
    depth = max(1, int(math.ceil(math.log2(1.0 / resolution) - 1e-12)))
    x, w = special.roots_legendre(MEASURE_SETTINGS["profile_nodes"])
    radii, masses = [0.0], [sigma * 2.0 ** (-depth * alpha) / alpha]
    for k in range(depth):
        lo, hi = 2.0 ** (-k - 1), 2.0 ** (-k)
        panels = max(1, int(math.ceil((hi - lo) / resolution - 1e-12)))
        edges = np.linspace(lo, hi, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        r = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        wr = (half[:, None] * w[None, :]).ravel()
        radii.extend(r.tolist())
        masses.extend((sigma * r ** (alpha - 1.0) * wr).tolist())
    order = np.argsort(radii, kind="stable")
    return RadialProfile(radii=np.asarray(radii)[order], masses=np.asarray(masses)[order], dim=dim, alpha=alpha)


@lru_cache(maxsize=64)
def cube_singular_mass(alpha: float, dim: int) -> float:
    """
    Integral of |x|^{alpha-dim} over the unit cube [-1/2, 1/2]^dim.

    The cube is its own third plus an outer shell of 3^dim - 1 subcubes, so
    C = M_outer / (1 - 3^{-alpha}); M_outer uses a 9^dim midpoint grid.
    """
    centers = (np.arange(9) + 0.5) / 9.0 - 0.5
    grids = np.meshgrid(*[centers] * dim, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    outer = np.any(np.abs(pts) > 1.0 / 6.0, axis=1)
    radius = np.linalg.norm(pts[outer], axis=1)
    m_outer = float(np.sum(radius ** (alpha - dim))) / 9.0 ** dim
    return m_outer / (1.0 - 3.0 ** (-alpha))


def _ball_cell_indices(dim: int, spacing: float) -> np.ndarray:
    count = int(math.floor(1.0 / spacing + 1e-9))
    if ball_volume(dim) / spacing ** dim > MEASURE_SETTINGS["max_atoms"] or (2 * count + 1) ** dim > 4 * MEASURE_SETTINGS["max_atoms"]:
        raise ResourceInfeasibleError(f"grid spacing {spacing} in dimension {dim} needs too many cells")
    axis = np.arange(-count, count + 1)
    grids = np.meshgrid(*[axis] * dim, indexing="ij")
    indices = np.stack([g.ravel() for g in grids], axis=1)
    keep = np.sum(indices.astype(float) ** 2, axis=1) * spacing ** 2 <= 1.0 + 1e-12
    return indices[keep]


def _radial_grid(alpha: float, n: int, resolution: float) -> Tuple[np.ndarray, np.ndarray, GridLayout]:
    dim = n + 1
    h = resolution / MEASURE_SETTINGS["grid_cells_per_resolution"]
    indices = _ball_cell_indices(dim, h)
    points = indices * h
    radius = np.linalg.norm(points, axis=1)
    weights = np.empty(len(points))
    origin = radius == 0
    weights[~origin] = h ** dim * radius[~origin] ** (alpha - dim)
    weights[origin] = h ** alpha * cube_singular_mass(float(alpha), dim)
    return points, weights, GridLayout(spacing=h, indices=indices)


def _graded_polar_edges(resolution: float) -> np.ndarray:
    edges = {0.0, math.pi / 2, math.pi}
    for angle in MEASURE_SETTINGS["meridian_focus_angles"]:
        edges.add(angle)
        gap = math.pi / 4
        while gap >= resolution:
            gap /= 2.0
            edges.update((angle - gap, angle + gap))
    return np.array(sorted(edges))


def _radial_meridian(alpha: float, n: int, resolution: float) -> Tuple[np.ndarray, np.ndarray]:
    dim = n + 1
    depth = max(1, int(math.ceil(math.log2(1.0 / resolution) - 1e-12)))
    xr, wr = special.roots_legendre(MEASURE_SETTINGS["meridian_radial_nodes"])
    radii, rweights = [], []
    for k in range(depth):
        lo, hi = 2.0 ** (-k - 1), 2.0 ** (-k)
        r = 0.5 * (hi + lo) + 0.5 * (hi - lo) * xr
        radii.append(r)
        rweights.append(0.5 * (hi - lo) * wr * r ** (alpha - 1.0))
    radii = np.concatenate(radii)
    rweights = np.concatenate(rweights)

    edges = _graded_polar_edges(resolution)
    xt, wt = special.roots_legendre(MEASURE_SETTINGS["meridian_polar_nodes"])
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    theta = (mid[:, None] + half[:, None] * xt[None, :]).ravel()
    tweights = (half[:, None] * wt[None, :]).ravel() * sphere_measure(n) * np.sin(theta) ** (n - 1)

    rr, tt = np.meshgrid(radii, theta, indexing="ij")
    points = np.zeros((rr.size + 1, dim))
    points[1:, 0] = (rr * np.sin(tt)).ravel()
    points[1:, -1] = (rr * np.cos(tt)).ravel()
    weights = np.empty(rr.size + 1)
    weights[0] = sphere_measure(dim) * 2.0 ** (-depth * alpha) / alpha
    weights[1:] = np.outer(rweights, tweights).ravel()
    return points, weights


def make_radial_power(alpha: float, n: int, resolution: float, layout: str = "grid",
                      seed: Optional[int] = None) -> AtomicMeasure:
    """
    |x|^{alpha-n-1} dx restricted to the closed unit ball of R^{n+1}.

    Args:
        alpha: Dimension in (0, n+1]
        n: Spatial dimension
        resolution: Finest resolved scale, in (0, 1/8]
        layout: "grid" (cells of side resolution/2, origin cell exact) or
            "meridian" (axisymmetric reduction about the time axis, octaves
            down to resolution, polar nodes graded toward the dual-cone angles)
        seed: Recorded for provenance

    Returns:
        AtomicMeasure with a RadialProfile attached
    """
    _check_alpha(alpha, n)
    if not 0 < resolution <= 0.125:
        raise InvalidInputError(f"resolution must lie in (0, 1/8] to resolve the inner shell, got {resolution}")
    profile = radial_profile(float(alpha), n + 1, resolution)
    grid = None
    if layout == "grid":
        points, weights, grid = _radial_grid(float(alpha), n, resolution)
    elif layout == "meridian":
        if n < 2:
            raise InvalidInputError("meridian layout needs n >= 2")
        points, weights = _radial_meridian(float(alpha), n, resolution)
    else:
        raise InvalidInputError(f"unknown radial layout {layout!r}")
    logger.debug("radial_measure_built", alpha=float(alpha), n=n, layout=layout, atoms=len(weights))
    return AtomicMeasure(
        points=points, weights=weights, alpha_claimed=float(alpha), support_radius=1.0,
        resolution=float(resolution), seed=seed, label=f"radial_{layout}", radial=profile,
        grid=grid, axisymmetric=(layout == "meridian"),
    )


def make_lebesgue_ball(n: int, resolution: float, layout: str = "grid") -> AtomicMeasure:
    """Lebesgue measure on the closed unit ball of R^{n+1} (alpha = n+1)."""
    mu = make_radial_power(n + 1, n, resolution, layout=layout)
    mu.label = f"lebesgue_{layout}"
    return mu


# --- product measures -----------------------------------------------------------

def _interval_mass(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """Integral of |t|^gamma over [a, b] for 0 <= a < b."""
    return (b ** (gamma + 1.0) - a ** (gamma + 1.0)) / (gamma + 1.0)


def _power_factor_cells(gamma: float, half_side: float, spacing: float) -> Tuple[np.ndarray, np.ndarray]:
    """Cells of width spacing on [-half_side, half_side]; atoms at cell midpoints, weights exact."""
    cells = max(1, int(round(half_side / spacing)))
    edges = np.linspace(0.0, half_side, cells + 1)
    mass = _interval_mass(edges[:-1], edges[1:], gamma)
    mid = 0.5 * (edges[:-1] + edges[1:])
    return np.concatenate([-mid[::-1], mid]), np.concatenate([mass[::-1], mass])


def _power_factor_quadrature(gamma: float, half_side: float, spacing: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    1-D rule for |t|^gamma dt on [-half_side, half_side].

    Gauss-Jacobi on the innermost cell absorbs the singularity; Gauss-Legendre
    panels of width spacing cover the rest.
    """
    x, w = special.roots_jacobi(MEASURE_SETTINGS["cube_jacobi_nodes"], 0.0, gamma)
    inner = min(spacing, half_side)
    t_in = 0.5 * inner * (1.0 + x)
    w_in = (0.5 * inner) ** (gamma + 1.0) * w
    nodes, weights = [t_in], [w_in]
    if half_side > inner:
        panels = max(1, int(math.ceil((half_side - inner) / spacing - 1e-12)))
        edges = np.linspace(inner, half_side, panels + 1)
        xg, wg = special.roots_legendre(MEASURE_SETTINGS["cube_factor_nodes"])
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        t = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
        nodes.append(t)
        weights.append((half[:, None] * wg[None, :]).ravel() * t ** gamma)
    t = np.concatenate(nodes)
    wt = np.concatenate(weights)
    return np.concatenate([-t[::-1], t]), np.concatenate([wt[::-1], wt])


def delta_product_exponents(alpha: float, n: int) -> List[float]:
    """
    Per-axis density exponents in plate-frame order (y_1, y'', y_{n+1}).

    -1 marks a delta factor, 0 a uniform factor. For l-1 < alpha <= l the
    first n+1-l axes are deltas and axis n+1-l carries |t|^{alpha-l};
    for alpha > n axis 0 carries |t|^{alpha-n-1}.
    """
    _check_alpha(alpha, n)
    if alpha > n:
        return [alpha - n - 1.0] + [0.0] * n
    ell = max(1, int(math.ceil(alpha - 1e-12)))
    gammas = [-1.0] * (n + 1 - ell) + [alpha - ell] + [0.0] * (ell - 1)
    return [float(g) for g in gammas]


def make_delta_product(alpha: float, n: int, resolution: float, domain: str = "ball",
                       seed: Optional[int] = None, basis=None) -> AtomicMeasure:
    """
    Delta-product measure: deltas on some coordinates, a power density on one, uniform on the rest.

    Args:
        alpha: Dimension in (0, n+1]
        n: Spatial dimension
        resolution: Cell width of the 1-D factors
        domain: "ball" (ambient coordinates, cells restricted to the unit
            ball) or "cube" (plate-frame coordinates, cube of half-side
            1/sqrt(n+1), kept as ProductFactors)
        seed: Recorded for provenance
        basis: Orthogonal frame for the cube domain (plate frame by default)

    Returns:
        AtomicMeasure
    """
    gammas = delta_product_exponents(alpha, n)
    dim = n + 1
    if domain == "ball":
        spacing = resolution / MEASURE_SETTINGS["grid_cells_per_resolution"]
        nodes, weights = [], []
        for gamma in gammas:
            if gamma == -1.0:
                nodes.append(np.zeros(1))
                weights.append(np.ones(1))
            else:
                t, w = _power_factor_cells(gamma, 1.0, spacing)
                nodes.append(t)
                weights.append(w)
        factors = ProductFactors(tuple(nodes), tuple(weights), np.eye(dim))
        points, atom_weights = factors.atoms()
        keep = np.linalg.norm(points, axis=1) <= 1.0 + 1e-12
        return AtomicMeasure(
            points=points[keep], weights=atom_weights[keep], alpha_claimed=float(alpha), support_radius=1.0,
            resolution=float(resolution), seed=seed, label="delta_product_ball",
        )
    if domain == "cube":
        half_side = 1.0 / math.sqrt(dim)
        nodes, weights = [], []
        for gamma in gammas:
            if gamma == -1.0:
                nodes.append(np.zeros(1))
                weights.append(np.ones(1))
            else:
                t, w = _power_factor_quadrature(gamma, half_side, resolution)
                nodes.append(t)
                weights.append(w)
        frame = plate_rotation(n) if basis is None else np.asarray(basis, dtype=float)
        if frame.shape != (dim, dim):
            raise InvalidInputError(f"basis must be {dim}x{dim}, got {frame.shape}")
        factors = ProductFactors(tuple(nodes), tuple(weights), frame)
        return _from_factors(factors, alpha, 1.0, resolution, seed, "delta_product_cube")
    raise InvalidInputError(f"unknown delta-product domain {domain!r}")


def _from_factors(factors: ProductFactors, alpha: float, support_radius: float, resolution: float,
                  seed: Optional[int], label: str) -> AtomicMeasure:
    if factors.atom_count <= MEASURE_SETTINGS["materialize_limit"]:
        points, weights = factors.atoms()
        materialized = True
    else:
        points, weights = np.empty((0, factors.dim)), np.empty(0)
        materialized = False
    return AtomicMeasure(
        points=points, weights=weights, alpha_claimed=float(alpha), support_radius=float(support_radius),
        resolution=float(resolution), seed=seed, label=label, factors=factors, materialized=materialized,
    )


def make_squashed_measure(alpha: float, n: int, resolution: float,
                          line_resolution: float = 0.25) -> AtomicMeasure:
    """
    |x''|^{alpha-n-1} dx_1 dx_{n+1} dx'' on [-1/2, 1/2]^2 x B''(0, 1/2), x'' the ambient axes 1..n-1.

    For n = 2 the measure is a product of three 1-D rules in ambient
    coordinates. For n >= 3 the x'' block is a radial grid measure of
    dimension alpha - 2, crossed with the two uniform lines.

    Args:
        alpha: Dimension in (2, n+1]
        n: Spatial dimension
        resolution: Resolved scale across x''
        line_resolution: Panel width of the two uniform lines

    Returns:
        AtomicMeasure
    """
    _check_alpha(alpha, n)
    if alpha <= 2:
        raise InvalidInputError(f"squashed measure needs alpha > 2, got {alpha}")
    line, line_w = _power_factor_quadrature(0.0, 0.5, line_resolution)
    support = math.sqrt(3.0) / 2.0
    if n == 2:
        t, w = _power_factor_quadrature(alpha - 3.0, 0.5, resolution)
        factors = ProductFactors((line, t, line), (line_w, w, line_w), np.eye(3))
        return _from_factors(factors, alpha, support, resolution, None, "squashed_product")

    block = make_radial_power(alpha - 2.0, n - 2, min(0.125, 2.0 * resolution))
    total = len(line) ** 2 * block.atom_count
    if total > MEASURE_SETTINGS["max_atoms"]:
        raise ResourceInfeasibleError(f"squashed measure needs {total} atoms at resolution {resolution}")
    a, b, k = np.meshgrid(np.arange(len(line)), np.arange(len(line)), np.arange(block.atom_count), indexing="ij")
    a, b, k = a.ravel(), b.ravel(), k.ravel()
    points = np.zeros((len(k), n + 1))
    points[:, 0] = line[a]
    points[:, n] = line[b]
    points[:, 1:n] = 0.5 * block.points[k]
    weights = line_w[a] * line_w[b] * block.weights[k] * 0.5 ** (alpha - 2.0)
    return AtomicMeasure(
        points=points, weights=weights, alpha_claimed=float(alpha), support_radius=support,
        resolution=float(resolution), label="squashed_block",
    )


def null_frame_basis(frame: NullFrame) -> np.ndarray:
    """Columns are the ambient directions of the null coordinates (xi'', sigma, tau)."""
    return frame.from_null(np.eye(frame.n + 1)).T


def make_null_product(n: int, exponents: Sequence[float], extent: float = 1.0,
                      spacing: float = 2.0 ** -12, frame: NullFrame = None) -> AtomicMeasure:
    """
    Product of |t|^gamma_i densities on [-extent, extent] in null coordinates (xi'', sigma, tau).

    Each 1-D factor uses cells of width spacing with atoms at the cell
    midpoints and exact cell masses; gamma = -1 is a delta at 0. The grid
    is uniform, so spacing is the resolution everywhere on the support.

    Args:
        n: Spatial dimension
        exponents: gamma per null coordinate, length n+1
        extent: Half-range of every factor
        spacing: Cell width
        frame: Null frame (identity rotation by default)

    Returns:
        Factorized AtomicMeasure with alpha = sum of (gamma_i + 1)
    """
    if len(exponents) != n + 1:
        raise InvalidInputError(f"need {n + 1} exponents, got {len(exponents)}")
    if any(g < -1 or (-1 < g <= -1 + 1e-12) for g in exponents):
        raise InvalidInputError("exponents must be -1 (delta) or > -1")
    if not 0 < spacing <= extent:
        raise InvalidInputError(f"spacing must lie in (0, extent], got {spacing}")
    frame = frame or NullFrame(n)
    nodes, weights = [], []
    for gamma in exponents:
        if gamma == -1:
            nodes.append(np.zeros(1))
            weights.append(np.ones(1))
            continue
        t, w = _power_factor_cells(gamma, extent, spacing)
        nodes.append(t)
        weights.append(w)
    alpha = float(sum(g + 1.0 for g in exponents))
    factors = ProductFactors(tuple(nodes), tuple(weights), null_frame_basis(frame))
    mu = _from_factors(factors, alpha, extent * math.sqrt(n + 1), spacing, None, "null_product")
    mu.meta.update({"exponents": [float(g) for g in exponents], "extent": extent, "spacing": spacing})
    return mu


# --- plate-union measures ---------------------------------------------------------

@dataclass(frozen=True)
class LatticePlan:
    """
    Offsets of the translated dual plates and the density on their union.

    Offsets are in plate-frame coordinates y = Q^T x; shifts_pp moves the
    y'' block and shifts_1 moves y_1. The plate sum on the frequency side
    uses the same offsets as modulations.
    """

    kind: LatticeKind
    alpha: float
    n: int
    R: float
    shifts_pp: np.ndarray
    shifts_1: np.ndarray
    density: float
    box_half_widths: np.ndarray

    @property
    def count(self) -> int:
        return len(self.shifts_pp) * len(self.shifts_1)

    @property
    def box_volume(self) -> float:
        return float(np.prod(2.0 * self.box_half_widths))


def _nearest_lattice_points(count: int, spacing: float, dim: int) -> np.ndarray:
    """The count points of spacing * Z^dim closest to the origin (ties broken lexicographically)."""
    reach = int(math.ceil(count ** (1.0 / dim))) + 2
    axis = np.arange(-reach, reach + 1)
    grids = np.meshgrid(*[axis] * dim, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    keys = np.lexsort(tuple(pts[:, i] for i in reversed(range(dim))) + (np.sum(pts ** 2, axis=1),))
    return pts[keys[:count]] * spacing


def lattice_plan(kind, alpha: float, n: int, R: float) -> LatticePlan:
    """
    Offsets for the Wolff-type plate sums.

    MID: N = round(R^{(alpha-1)/2}) offsets in y'' at spacing
    R^{-(alpha-1)/(2(n-1))}. HIGH: M offsets in y'' at spacing
    R^{-(2alpha-n-1)/(2(n+1))} times L = round(R^{(2alpha-n-1)/(n+1)})
    offsets in y_1 at spacing R^{-(2alpha-n-1)/(n+1)}.

    Args:
        kind: LatticeKind or its name
        alpha: Dimension, regime-matched to kind
        n: Spatial dimension
        R: Scale, a power of 2, R >= 16

    Returns:
        LatticePlan
    """
    kind = LatticeKind.parse(kind)
    if R < 16 or abs(math.log2(R) - round(math.log2(R))) > 1e-12:
        raise InvalidInputError(f"R must be a power of 2 with R >= 16, got {R}")
    if kind is LatticeKind.MID_LATTICE and not 1 < alpha <= n:
        raise RegimeMismatchError(f"MID lattice needs 1 < alpha <= n, got alpha={alpha}, n={n}")
    if kind is LatticeKind.HIGH_LATTICE and not n < alpha <= n + 1:
        raise RegimeMismatchError(f"HIGH lattice needs n < alpha <= n+1, got alpha={alpha}, n={n}")

    half = np.empty(n + 1)
    half[0] = 0.5 / R
    half[1:n] = 0.5 / math.sqrt(R)
    half[n] = 0.5
    if kind is LatticeKind.MID_LATTICE:
        count = max(1, int(round(R ** ((alpha - 1.0) / 2.0))))
        spacing = R ** (-(alpha - 1.0) / (2.0 * (n - 1)))
        shifts_pp = _nearest_lattice_points(count, spacing, n - 1)
        shifts_1 = np.zeros(1)
        density = R ** ((n + 2.0 - alpha) / 2.0)
        separations = [(spacing, 2.0 * half[1])]
    else:
        expo = (2.0 * alpha - n - 1.0) / (n + 1.0)
        count_pp = max(1, int(round(R ** ((n - 1.0) * expo / 2.0))))
        spacing_pp = R ** (-expo / 2.0)
        count_1 = max(1, int(round(R ** expo)))
        spacing_1 = R ** (-expo)
        shifts_pp = _nearest_lattice_points(count_pp, spacing_pp, n - 1)
        shifts_1 = (np.arange(count_1) - 0.5 * (count_1 - 1)) * spacing_1
        density = R ** (n + 1.0 - alpha)
        separations = [(spacing_pp, 2.0 * half[1]), (spacing_1, 2.0 * half[0])]
    # width is the full plate width along the shifted axis
    for spacing, width in separations:
        if len(shifts_pp) > 1 or len(shifts_1) > 1:
            if spacing < width - 1e-12:
                raise ResourceInfeasibleError(
                    f"lattice spacing {spacing:.3g} is below the plate width {width:.3g} at R={R}")
    if np.max(np.linalg.norm(shifts_pp, axis=1)) > 1.0:
        raise ResourceInfeasibleError(f"lattice offsets leave B(0,1) at R={R}")
    return LatticePlan(kind=kind, alpha=float(alpha), n=n, R=float(R), shifts_pp=shifts_pp,
                       shifts_1=shifts_1, density=float(density), box_half_widths=half)


def make_plate_union_measure(kind, alpha: float, n: int, R: float,
                             cells_per_axis: int = None) -> AtomicMeasure:
    """
    Constant density on the union of unit dual plates at the lattice offsets.

    Cells are near-cubes of side h = (y'' plate width) / cells_per_axis:
    every box axis gets ceil(width / h) midpoint cells, so the thin y_1
    axis collapses to one layer and the unit y_{n+1} axis is cut at
    spacing <= h. The declared resolution is h, the largest cell side.

    Args:
        kind: MID_LATTICE or HIGH_LATTICE
        alpha: Dimension, regime-matched to kind
        n: Spatial dimension
        R: Scale, a power of 2, R >= 16
        cells_per_axis: Midpoint cells across the y'' width of a plate

    Returns:
        AtomicMeasure with the LatticePlan in meta["plan"]
    """
    plan = lattice_plan(kind, alpha, n, R)
    cells = cells_per_axis or MEASURE_SETTINGS["plate_cells_per_axis"]
    widths = 2.0 * plan.box_half_widths
    h = float(widths[1]) / cells
    per_axis = [max(1, int(math.ceil(w / h - 1e-9))) for w in widths]
    total = plan.count * math.prod(per_axis)
    if total > MEASURE_SETTINGS["max_atoms"]:
        raise ResourceInfeasibleError(f"plate union needs {total} atoms at R={R}")

    axes = [((np.arange(k) + 0.5) / k * 2.0 - 1.0) * b for k, b in zip(per_axis, plan.box_half_widths)]
    grids = np.meshgrid(*axes, indexing="ij")
    local = np.stack([g.ravel() for g in grids], axis=1)
    cell_volume = plan.box_volume / math.prod(per_axis)

    offsets = np.zeros((plan.count, n + 1))
    pp = np.repeat(plan.shifts_pp, len(plan.shifts_1), axis=0)
    offsets[:, 1:n] = pp
    offsets[:, 0] = np.tile(plan.shifts_1, len(plan.shifts_pp))
    y = (offsets[:, None, :] + local[None, :, :]).reshape(-1, n + 1)
    points = y @ plate_rotation(n).T
    weights = np.full(len(points), plan.density * cell_volume)
    support = float(np.max(np.linalg.norm(points, axis=1)))
    logger.debug("plate_union_built", kind=plan.kind.value, alpha=alpha, n=n, R=R, boxes=plan.count, atoms=len(points))
    return AtomicMeasure(
        points=points, weights=weights, alpha_claimed=float(alpha), support_radius=max(1.0, support),
        resolution=h, label=f"plate_union_{plan.kind.value}",
        meta={"plan": plan, "cells_per_box": per_axis},
    )


# --- Cantor measures --------------------------------------------------------------

def make_cantor(alpha: float, n: int, depth: int) -> AtomicMeasure:
    """
    Self-similar product Cantor measure of similarity dimension alpha in R^{n+1}.

    m = ceil(alpha) axes carry 2 branches each, so k = 2^m maps of ratio
    r = k^{-1/alpha} <= 1/2 act on the cube [-a, a]^m, a = 1/sqrt(n+1).

    Args:
        alpha: Dimension in (0, n+1]
        n: Ambient dimension minus one (n = 1 gives a planar set)
        depth: Generations, 0 <= depth <= 12

    Returns:
        AtomicMeasure with k^depth atoms of mass k^{-depth}
    """
    _check_alpha(alpha, n)
    if not 0 <= depth <= 12:
        raise InvalidInputError(f"depth must lie in [0, 12], got {depth}")
    dim = n + 1
    axes = int(math.ceil(alpha - 1e-12))
    if axes > dim:
        raise ResourceInfeasibleError(f"alpha={alpha} needs {axes} axes in R^{dim}")
    branches = 2 ** axes
    if branches ** depth > MEASURE_SETTINGS["max_atoms"]:
        raise ResourceInfeasibleError(f"Cantor depth {depth} with {branches} branches is too large")
    ratio = branches ** (-1.0 / alpha)
    half = 1.0 / math.sqrt(dim)

    corners = np.array(np.meshgrid(*[[-1.0, 1.0]] * axes, indexing="ij")).reshape(axes, -1).T
    centers = np.zeros((1, axes))
    for level in range(depth):
        step = (1.0 - ratio) * half * ratio ** level
        centers = (centers[:, None, :] + step * corners[None, :, :]).reshape(-1, axes)
    points = np.zeros((len(centers), dim))
    points[:, :axes] = centers
    weights = np.full(len(points), float(branches) ** (-depth))
    return AtomicMeasure(
        points=points, weights=weights, alpha_claimed=float(alpha), support_radius=1.0,
        resolution=float(2.0 * half * ratio ** depth), label=f"cantor_depth{depth}",
        meta={"branches": branches, "ratio": ratio, "axes": axes},
    )


# --- audits ----------------------------------------------------------------------

def _require_atoms(mu: AtomicMeasure):
    if mu.empty or mu.atom_count == 0 or total_mass(mu) == 0:
        raise InvalidInputError("growth audit of an empty measure")
    if mu.axisymmetric:
        raise InvalidInputError("axisymmetric (meridian) measures only integrate axisymmetric functions; audit a grid layout")


def _ball_masses(mu: AtomicMeasure, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Masses of B(c_i, radii[i, k]) for materialized measures."""
    masses = np.empty(radii.shape)
    chunk = AUDIT_SETTINGS["center_chunk"]
    for start in range(0, len(centers), chunk):
        dist = cdist(centers[start:start + chunk], mu.points)
        for row, d in enumerate(dist):
            order = np.argsort(d, kind="stable")
            cum = np.cumsum(mu.weights[order])
            pos = np.searchsorted(d[order], radii[start + row], side="right")
            masses[start + row] = np.where(pos > 0, cum[np.maximum(pos - 1, 0)], 0.0)
    return masses


def _cube_masses(factors: ProductFactors, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Masses of coordinate cubes of half-side radii[i, k] in factor coordinates."""
    masses = np.ones(radii.shape)
    for axis, (nodes, weights) in enumerate(zip(factors.nodes, factors.weights)):
        order = np.argsort(nodes, kind="stable")
        sorted_nodes = nodes[order]
        cum = np.concatenate([[0.0], np.cumsum(weights[order])])
        c = centers[:, axis][:, None]
        hi = np.searchsorted(sorted_nodes, c + radii, side="right")
        lo = np.searchsorted(sorted_nodes, c - radii, side="left")
        masses *= cum[hi] - cum[lo]
    return masses


def growth_audit_centers(mu: AtomicMeasure, trials: int, rng: np.random.Generator) -> np.ndarray:
    """
    Centers drawn from the atoms (factor nodes for unexpanded product measures), in ambient coordinates.

    The first center is the heaviest atom (per factor for unexpanded
    products), where a singularity such as the origin of a radial power sits.
    """
    if mu.materialized and mu.atom_count:
        positive = np.flatnonzero(mu.weights > 0)
        drawn = mu.points[rng.choice(positive, size=trials, replace=len(positive) < trials)]
        drawn[0] = mu.points[_heaviest(mu.weights, np.linalg.norm(mu.points, axis=1))]
        return drawn
    coords = np.stack([rng.choice(nodes, size=trials) for nodes in mu.factors.nodes], axis=1)
    coords[0] = [nodes[_heaviest(w, np.abs(nodes))] for nodes, w in zip(mu.factors.nodes, mu.factors.weights)]
    return coords @ mu.factors.basis.T


def _heaviest(weights: np.ndarray, reach: np.ndarray) -> int:
    """Index of the largest weight; near-ties (1e-9 relative) go to the smallest reach."""
    rel = np.round(weights / np.max(weights), 9)
    return int(np.lexsort((reach, -rel))[0])


def estimate_growth_constant(mu: AtomicMeasure, alpha: float = None, trials: int = 64, seed: int = 0,
                             centers=None, radii=None) -> GrowthAudit:
    """
    Empirical sup of rho^{-alpha} mu(B(x, rho)) over sampled balls.

    Radii are drawn log-uniformly (stratified) in [4 * resolution, 2 * support_radius]
    unless given. Unexpanded product measures are audited with coordinate
    cubes of half-side rho in their factor frame. The trend slope fits
    log(band maximum) against log(rho) over the lower half of the radius
    range; a slope below -0.25 means the ratio grows as rho shrinks, i.e.
    the claimed alpha exceeds the dimension of the measure.

    Args:
        mu: Measure to audit
        alpha: Exponent to test (defaults to mu.alpha_claimed)
        trials: Number of centers
        seed: RNG seed for centers and radii
        centers: Optional explicit centers (ambient coordinates)
        radii: Optional explicit radii shared by all centers

    Returns:
        GrowthAudit
    """
    _require_atoms(mu)
    if trials < 1:
        raise InvalidInputError(f"trials must be >= 1, got {trials}")
    alpha = float(mu.alpha_claimed if alpha is None else alpha)
    rng = np.random.default_rng(seed)
    floor = AUDIT_SETTINGS["floor_factor"] * mu.resolution
    top = 2.0 * mu.support_radius

    centers = growth_audit_centers(mu, trials, rng) if centers is None else np.atleast_2d(np.asarray(centers, dtype=float))
    if radii is None:
        # one log-uniform draw per stratum, so every band sees every center
        k = AUDIT_SETTINGS["radii_per_center"]
        strata = (np.arange(k)[None, :] + rng.uniform(size=(len(centers), k))) / k
        radii_grid = np.exp(math.log(floor) + strata * (math.log(top) - math.log(floor)))
    else:
        radii = np.asarray(radii, dtype=float)
        radii = radii[radii >= floor * (1 - 1e-12)]
        if radii.size == 0:
            raise InvalidInputError(f"all audit radii fall below the discretization floor {floor:.3g}")
        radii_grid = np.broadcast_to(radii, (len(centers), radii.size)).copy()

    if mu.materialized:
        masses = _ball_masses(mu, centers, radii_grid)
        shape = "euclidean"
    else:
        frame_centers = centers @ mu.factors.basis
        masses = _cube_masses(mu.factors, frame_centers, radii_grid)
        shape = "cube"

    ratios = masses / radii_grid ** alpha
    worst = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
    slope = _trend_slope(radii_grid.ravel(), ratios.ravel(), floor, top)
    audit = GrowthAudit(
        alpha=alpha, estimated_constant=float(ratios[worst]), samples=int(ratios.size),
        worst_center=centers[worst[0]].copy(), worst_radius=float(radii_grid[worst]),
        radius_floor=float(floor), trend_slope=slope,
        diverging_trend=bool(slope < AUDIT_SETTINGS["trend_threshold"]), ball_shape=shape,
    )
    logger.debug("growth_audit", label=mu.label, alpha=alpha, constant=audit.estimated_constant,
                 trend_slope=slope, diverging=audit.diverging_trend)
    return audit


def _trend_slope(radii: np.ndarray, ratios: np.ndarray, floor: float, top: float) -> float:
    lo, hi = math.log(floor), 0.5 * (math.log(floor) + math.log(top))
    edges = np.linspace(lo, hi, AUDIT_SETTINGS["bands"] + 1)
    log_r = np.log(radii)
    xs, ys = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        band = (log_r >= a) & (log_r < b) & (ratios > 0)
        if np.any(band):
            xs.append(0.5 * (a + b))
            ys.append(math.log(float(np.max(ratios[band]))))
    if len(xs) < 3:
        return 0.0
    return float(stats.linregress(xs, ys).slope)


# --- rescalings ----------------------------------------------------------------------

def restrict_rescale(mu: AtomicMeasure, x0, rho: float) -> AtomicMeasure:
    """
    mu_rho(phi) = rho^{-alpha} * integral of phi((x - x0)/rho) over B(x0, rho).

    Args:
        mu: Materialized measure
        x0: Center of the localizing ball
        rho: Radius in (0, 1]

    Returns:
        Rescaled measure on the unit ball; flagged empty if no atom falls in the ball
    """
    if not 0 < rho <= 1:
        raise InvalidInputError(f"rho must lie in (0, 1], got {rho}")
    if not mu.materialized:
        raise InvalidInputError("restrict_rescale needs a materialized measure")
    x0 = np.asarray(x0, dtype=float)
    shifted = mu.points - x0
    inside = np.linalg.norm(shifted, axis=1) <= rho
    alpha = mu.alpha_claimed
    out = AtomicMeasure(
        points=shifted[inside] / rho, weights=mu.weights[inside] * rho ** (-alpha), alpha_claimed=alpha,
        support_radius=1.0, resolution=mu.resolution / rho, seed=mu.seed,
        label=f"{mu.label}|rescaled", empty=not np.any(inside),
        meta={"x0": x0.tolist(), "rho": rho},
    )
    if out.empty:
        logger.warning("restrict_rescale_empty", label=mu.label, rho=rho)
    return out


def anisotropic_pushforward(mu: AtomicMeasure, j: int, frame: NullFrame = None) -> AtomicMeasure:
    """
    mu_j = T_j # mu with T_j: (xi'', sigma, tau) -> (2^j xi'', sigma, 4^j tau) in the frame's null coordinates.

    Each atom moves to its T_j image with its weight unchanged. Product
    measures whose factors are the frame's null coordinates stay factorized.

    Args:
        mu: Measure
        j: Level, j >= 1
        frame: Null frame (identity rotation by default)

    Returns:
        Pushed-forward measure with support radius scaled by 4^j; the
        resolution scales by the largest factor acting on a spread-out
        axis (4^j unless the measure is an aligned product)
    """
    if j < 1:
        raise InvalidInputError(f"pushforward level must be >= 1, got {j}")
    frame = frame or NullFrame(mu.n)
    scale = [2.0 ** j] * (mu.n - 1) + [1.0, 4.0 ** j]
    factors = None
    coarsening = 4.0 ** j
    if mu.factors is not None and np.allclose(mu.factors.basis, null_frame_basis(frame)):
        factors = mu.factors.scaled(scale)
        coarsening = max([s for s, nodes in zip(scale, mu.factors.nodes) if len(nodes) > 1], default=1.0)
    if mu.materialized:
        eta = frame.to_null(mu.points) * np.asarray(scale)
        points = frame.from_null(eta)
    else:
        if factors is None:
            raise InvalidInputError("unexpanded product measure is not aligned with the null frame")
        points = np.empty((0, mu.dimension_ambient))
    return AtomicMeasure(
        points=points, weights=mu.weights.copy(), alpha_claimed=mu.alpha_claimed,
        support_radius=mu.support_radius * 4.0 ** j, resolution=mu.resolution * coarsening,
        seed=mu.seed, label=f"{mu.label}|T{j}", factors=factors, materialized=mu.materialized,
        meta=dict(mu.meta, pushforward_level=j),
    )


# --- mass and energy ------------------------------------------------------------------

def total_mass(mu: AtomicMeasure) -> float:
    """Sum of weights."""
    if not mu.materialized and mu.factors is not None:
        return mu.factors.total_mass
    return float(np.sum(mu.weights))


def energy(mu: AtomicMeasure, alpha: float, cutoff: float = None) -> float:
    """
    Discrete Riesz energy: sum over i != j of w_i w_j |x_i - x_j|^{-alpha}, pairs closer than cutoff dropped.

    Grid measures use an FFT convolution over cell offsets; other measures
    sum pairs directly.

    Args:
        mu: Materialized measure
        alpha: Energy exponent
        cutoff: Short-distance cutoff (defaults to mu.resolution)

    Returns:
        Energy value
    """
    if not mu.materialized:
        raise InvalidInputError("energy needs a materialized measure")
    cutoff = mu.resolution if cutoff is None else cutoff
    if mu.atom_count < 2:
        return 0.0
    if mu.grid is not None:
        return _grid_energy(mu, alpha, cutoff)
    if mu.atom_count > MEASURE_SETTINGS["pairwise_limit"]:
        raise ResourceInfeasibleError(f"pairwise energy over {mu.atom_count} atoms is too large")
    total = 0.0
    chunk = 2048
    for start in range(0, mu.atom_count, chunk):
        d = cdist(mu.points[start:start + chunk], mu.points)
        kernel = np.zeros_like(d)
        far = d >= cutoff
        if cutoff <= 0:
            far &= d > 0
        kernel[far] = d[far] ** (-alpha)
        total += float(mu.weights[start:start + chunk] @ kernel @ mu.weights)
    return total


def _grid_energy(mu: AtomicMeasure, alpha: float, cutoff: float) -> float:
    idx = mu.grid.indices
    low = idx.min(axis=0)
    shape = tuple(idx.max(axis=0) - low + 1)
    grid = np.zeros(shape)
    grid[tuple((idx - low).T)] = mu.weights
    offsets = [np.arange(-(s - 1), s) for s in shape]
    mesh = np.meshgrid(*offsets, indexing="ij")
    dist = mu.grid.spacing * np.sqrt(sum(m.astype(float) ** 2 for m in mesh))
    kernel = np.zeros(dist.shape)
    far = (dist >= cutoff) & (dist > 0)
    kernel[far] = dist[far] ** (-alpha)
    potential = signal.fftconvolve(grid, kernel, mode="same")
    return float(np.sum(grid * potential))


def measure_summary(mu: AtomicMeasure) -> dict:
    """Flat description used by the CLI and reports."""
    return {
        "label": mu.label,
        "ambient_dimension": mu.dimension_ambient,
        "alpha_claimed": mu.alpha_claimed,
        "atoms": mu.atom_count,
        "total_mass": total_mass(mu),
        "resolution": mu.resolution,
        "support_radius": mu.support_radius,
    }


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description="Build a measure and audit its growth constant")
    parser.add_argument("--family", choices=["radial", "lebesgue", "delta", "cantor"], default="radial")
    parser.add_argument("--n", type=int, default=3)
    parser.add_argument("--alpha", type=float, default=2.0)
    parser.add_argument("--resolution", type=float, default=0.125)
    parser.add_argument("--depth", type=int, default=6)
    parser.add_argument("--trials", type=int, default=32)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if args.family == "radial":
        measure = make_radial_power(args.alpha, args.n, args.resolution)
    elif args.family == "lebesgue":
        measure = make_lebesgue_ball(args.n, args.resolution)
    elif args.family == "delta":
        measure = make_delta_product(args.alpha, args.n, args.resolution)
    else:
        measure = make_cantor(args.alpha, args.n, args.depth)

    print(measure_summary(measure))
    print(estimate_growth_constant(measure, trials=args.trials, seed=args.seed).as_row())
