#!/usr/bin/env python3
"""
Fourier Engine - transforms at measure atoms, L^q(dmu) norms, wave propagation, mollifiers
Part of Layer 3: Tools (deterministic operations)
Architecture SOP: architecture/05_numerical_contracts.md

Convention: f^(x) = integral of e^{-i x.xi} f(xi) dxi, no 2pi on the forward
transform. The (2pi)^{-n} of the wave solution formula appears only in the
wave pipeline (solve_wave, sample_wave_at, to_spatial).

Closed forms (box, windowed box, lattice sum, cone shell) are evaluated
exactly; GRID functions are summed directly over their cells.
"""

import os
import sys
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft, special

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tools.cone_geometry import (
    ConeShell, PlateSpec, cone_distance, cone_shell_volume, knapp_plate, sphere_measure,
    sphere_quadrature, stadium_quadrature,
)
from tools.exponents import INF
from tools.fractal_measures import AtomicMeasure, ProductFactors
from tools.lab_errors import InvalidInputError, QuadratureNotConvergedError, ResourceInfeasibleError
from tools.lab_logging import get_logger

logger = get_logger(__name__)

ENGINE_SETTINGS = {
    "chunk_elements": 4_000_000,
    "shell_chunk": 256,
    "window_flat_fraction": 0.5,
    "romberg_tolerance": 1e-4,
    "romberg_max_cells": 256,
    "mollifier_nodes": 4,
    "mollifier_max_cells": 2_000_000,
    "direct_sum_limit": 4e9,
    "decay_extra_nodes": 40,
    "knapp_c": 0.25,
}


class Family(Enum):
    BOX = "box"
    WINDOWED_BOX = "windowed_box"
    LATTICE_SUM = "lattice_sum"
    CONE_SHELL = "cone_shell"
    GRID = "grid"


@dataclass(frozen=True, eq=False)
class BoxRegion:
    """Box |eta - center| <= half_widths in frame coordinates eta = xi @ rotation."""

    center: np.ndarray
    half_widths: np.ndarray
    rotation: np.ndarray

    def contains(self, xi) -> np.ndarray:
        eta = np.asarray(xi, dtype=float) @ self.rotation
        return np.all(np.abs(eta - self.center) <= self.half_widths * (1 + 1e-12), axis=-1)


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """
    Cell-centered tensor grid in frame coordinates; ambient points are frame @ rotation.T.

    origin is the first cell center, so cell i on axis a spans
    origin_a + spacing_a * (i -+ 1/2).
    """

    origin: np.ndarray
    spacing: np.ndarray
    shape: Tuple[int, ...]
    rotation: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        object.__setattr__(self, "spacing", np.asarray(self.spacing, dtype=float))
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if self.rotation is None:
            object.__setattr__(self, "rotation", np.eye(len(self.shape)))
        if np.any(self.spacing <= 0):
            raise InvalidInputError("grid spacing must be positive")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self) -> List[np.ndarray]:
        return [self.origin[a] + self.spacing[a] * np.arange(self.shape[a]) for a in range(self.dim)]

    def frame_points(self, cells: np.ndarray = None) -> np.ndarray:
        if cells is not None:
            return self.origin + self.spacing * np.asarray(cells, dtype=float)
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def points(self, cells: np.ndarray = None) -> np.ndarray:
        return self.frame_points(cells) @ self.rotation.T


@dataclass(frozen=True, eq=False)
class FrequencyFunction:
    """
    Function on frequency space, either a closed-form family or grid samples.

    GRID functions are dense (values shaped like grid.shape) or sparse
    (cells lists integer cell indices, values is 1-D).
    """

    ambient: int
    family: Family
    params: Dict = field(default_factory=dict)
    declared_support: object = None
    grid: Optional[FrequencyGrid] = None
    values: Optional[np.ndarray] = None
    cells: Optional[np.ndarray] = None

    @property
    def kind(self) -> str:
        return "GRID" if self.family is Family.GRID else "CLOSED_FORM"

    @property
    def is_grid(self) -> bool:
        return self.family is Family.GRID

    def frequency_points(self) -> np.ndarray:
        self._require_grid()
        return self.grid.points(self.cells)

    def with_values(self, values) -> "FrequencyFunction":
        self._require_grid()
        values = np.asarray(values, dtype=complex)
        if values.shape != self.values.shape:
            raise InvalidInputError(f"new values have shape {values.shape}, expected {self.values.shape}")
        return replace(self, values=values)

    def _require_grid(self):
        if not self.is_grid:
            raise InvalidInputError(f"{self.family.value} function has no grid samples")


@dataclass(frozen=True, eq=False)
class SpatialField:
    """Values of a transform at a list of points, in the order requested."""

    points: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        if len(self.points) != len(self.values):
            raise InvalidInputError("field points and values differ in length")
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError(f"field {self.label!r} has non-finite values")


# --- 1-D closed forms ----------------------------------------------------------------

def interval_ft(y, center: float, half: float) -> np.ndarray:
    """Transform of the indicator of [center - half, center + half]: e^{-iyc} 2 sin(half y)/y."""
    y = np.asarray(y, dtype=float)
    return np.exp(-1j * y * center) * 2.0 * half * np.sinc(half * y / np.pi)


def tukey_window(s, flat: float, taper: float) -> np.ndarray:
    """1 on |s| <= flat, raised-cosine taper of width taper, 0 beyond flat + taper."""
    s = np.abs(np.asarray(s, dtype=float))
    out = np.zeros_like(s)
    out[s <= flat] = 1.0
    ramp = (s > flat) & (s < flat + taper)
    out[ramp] = 0.5 * (1.0 + np.cos(np.pi * (s[ramp] - flat) / taper))
    return out


def tukey_ft(y, center: float, flat: float, taper: float) -> np.ndarray:
    """
    Transform of the raised-cosine window centered at center.

    W(y) = k^2 (sin(y(a+b)) + sin(ya)) / (y (k^2 - y^2)) with k = pi/b;
    W(0) = 2a + b and W(+-k) = b cos(ka)/2.

    Args:
        y: Dual variable
        center: Window center
        flat: Half-width a of the flat part
        taper: Taper width b

    Returns:
        Complex transform values
    """
    y = np.asarray(y, dtype=float)
    a, b = float(flat), float(taper)
    k = np.pi / b
    out = np.empty(y.shape)
    near_zero = np.abs(y) < 1e-8 / (a + b)
    near_pole = np.abs(np.abs(y) - k) < 1e-7 * k
    regular = ~(near_zero | near_pole)
    yr = y[regular]
    out[regular] = k * k * (np.sin(yr * (a + b)) + np.sin(yr * a)) / (yr * (k * k - yr * yr))
    out[near_zero] = 2.0 * a + b
    out[near_pole] = 0.5 * b * np.cos(k * a)
    return np.exp(-1j * y * center) * out


def tukey_l2_squared(flat: float, taper: float) -> float:
    """Integral of the squared window: 2a + 3b/4."""
    return 2.0 * flat + 0.75 * taper


def _window_split(half: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    frac = ENGINE_SETTINGS["window_flat_fraction"]
    half = np.asarray(half, dtype=float)
    return frac * half, (1.0 - frac) * half


def sphere_ft(s, n: int) -> np.ndarray:
    """Integral over S^{n-1} of e^{-i s omega_1}: (2pi)^{n/2} s^{1-n/2} J_{n/2-1}(s)."""
    s = np.asarray(s, dtype=float)
    nu = n / 2.0 - 1.0
    out = np.full(s.shape, sphere_measure(n))
    big = s > 1e-8
    sb = s[big]
    out[big] = (2.0 * np.pi) ** (n / 2.0) * sb ** (-nu) * special.jv(nu, sb)
    return out


def ball_average(s, dim: int) -> np.ndarray:
    """Normalized spherical average j(s) = Gamma(d/2) (2/s)^{d/2-1} J_{d/2-1}(s); j(0) = 1."""
    return sphere_ft(s, dim) / sphere_measure(dim)


# --- constructors --------------------------------------------------------------------

def box_indicator(center, half_widths, rotation=None) -> FrequencyFunction:
    """Indicator of a box given in frame coordinates eta = xi @ rotation."""
    center = np.asarray(center, dtype=float)
    half_widths = np.asarray(half_widths, dtype=float)
    rotation = np.eye(len(center)) if rotation is None else np.asarray(rotation, dtype=float)
    if np.any(half_widths <= 0):
        raise InvalidInputError("box half widths must be positive")
    region = BoxRegion(center, half_widths, rotation)
    return FrequencyFunction(
        ambient=len(center), family=Family.BOX, declared_support=region,
        params={"center": center, "half_widths": half_widths, "rotation": rotation},
    )


def plate_indicator(plate: PlateSpec, rotation=None) -> FrequencyFunction:
    f = box_indicator(plate.center, plate.half_widths, plate.rotation if rotation is None else rotation)
    if rotation is None:
        return replace(f, declared_support=plate)
    return f


def windowed_plate(plate: PlateSpec, rotation=None) -> FrequencyFunction:
    """Separable raised-cosine window supported in the plate, equal to 1 on its middle half."""
    rotation = plate.rotation if rotation is None else np.asarray(rotation, dtype=float)
    flat, taper = _window_split(plate.half_widths)
    return FrequencyFunction(
        ambient=plate.n + 1, family=Family.WINDOWED_BOX,
        declared_support=BoxRegion(plate.center, plate.half_widths, rotation),
        params={"center": plate.center, "half_widths": plate.half_widths, "flat": flat,
                "taper": taper, "rotation": rotation, "volume": plate.volume},
    )


def reflect_first_axis(f: FrequencyFunction) -> FrequencyFunction:
    """Mirror a box-type function through xi_1 -> -xi_1."""
    if f.family not in (Family.BOX, Family.WINDOWED_BOX):
        raise InvalidInputError(f"cannot reflect a {f.family.value} function")
    flip = np.eye(f.ambient)
    flip[0, 0] = -1.0
    rotation = flip @ f.params["rotation"]
    params = dict(f.params, rotation=rotation)
    support = BoxRegion(f.params["center"], f.params["half_widths"], rotation)
    return replace(f, params=params, declared_support=support)


def lattice_sum(plan, plate: PlateSpec = None) -> FrequencyFunction:
    """
    count^{-1/2} phi_P(xi) sum over offsets of e^{i(w_j eta_1 + u_k . xi'')}.

    Args:
        plan: LatticePlan with shifts_1 (w_j) and shifts_pp (u_k)
        plate: Plate carrying the window (Knapp plate at plan.R by default)

    Returns:
        LATTICE_SUM FrequencyFunction
    """
    plate = plate or knapp_plate(plan.R, plan.n)
    flat, taper = _window_split(plate.half_widths)
    return FrequencyFunction(
        ambient=plan.n + 1, family=Family.LATTICE_SUM, declared_support=plate,
        params={"plan": plan, "center": plate.center, "half_widths": plate.half_widths,
                "flat": flat, "taper": taper, "rotation": plate.rotation},
    )


def cone_shell_indicator(R: float, n: int, delta: float = 1.0) -> FrequencyFunction:
    shell = ConeShell(float(R), float(delta), n)
    return FrequencyFunction(ambient=n + 1, family=Family.CONE_SHELL, declared_support=shell,
                             params={"R": float(R), "delta": float(delta), "n": n})


def grid_function(grid: FrequencyGrid, values, cells=None, support=None) -> FrequencyFunction:
    """
    GRID function from samples; samples outside support must vanish.

    Args:
        grid: Frequency grid
        values: Dense array shaped like grid.shape, or 1-D when cells is given
        cells: Optional (m, d) integer cell indices for sparse samples
        support: Region with .contains (checked against nonzero samples)

    Returns:
        GRID FrequencyFunction
    """
    values = np.asarray(values, dtype=complex)
    if cells is not None:
        cells = np.asarray(cells, dtype=np.int64)
        if cells.ndim != 2 or cells.shape[1] != grid.dim or len(cells) != values.size:
            raise InvalidInputError("sparse cells must be (m, d) and match the values")
        values = values.ravel()
    elif values.shape != grid.shape:
        raise InvalidInputError(f"values shape {values.shape} differs from grid shape {grid.shape}")
    f = FrequencyFunction(ambient=grid.dim, family=Family.GRID, declared_support=support,
                          grid=grid, values=values, cells=cells)
    if support is not None:
        points = f.frequency_points().reshape(-1, grid.dim)
        outside = ~np.asarray(support.contains(points)).ravel()
        if np.any(values.ravel()[outside] != 0):
            raise InvalidInputError("GRID samples do not vanish outside the declared support")
    return f


def random_cone_function(R: float, n: int, spacing: float = 0.5, modes: int = 4,
                         seed: int = 0) -> FrequencyFunction:
    """
    Smooth random function on Gamma_R(1), sampled on the cells of a frequency grid.

    f = cos^2(pi d / 2) * sum_k c_k e^{i a_k . xi}, d the distance to the
    cone, |a_k| <= 1/2 and c_k complex Gaussian.

    Args:
        R: Cone scale
        n: Spatial dimension
        spacing: Cell side
        modes: Number of plane-wave modes
        seed: RNG seed

    Returns:
        Sparse GRID FrequencyFunction with declared support Gamma_R(1)
    """
    shell = ConeShell(float(R), 1.0, n)
    reach = 2.0 * R + 1.0
    lo = np.array([-reach] * n + [R - 1.0])
    hi = np.array([reach] * n + [2.0 * R + 1.0])
    shape = tuple(int(math.ceil((h - l) / spacing)) for l, h in zip(lo, hi))
    if float(np.prod(shape)) > 64e6:
        raise ResourceInfeasibleError(f"cone grid at R={R}, spacing={spacing} has {np.prod(shape):.3g} cells")
    grid = FrequencyGrid(origin=lo + 0.5 * spacing, spacing=np.full(n + 1, spacing), shape=shape)

    # walk the time axis so only the shell's slab is materialized per layer
    axes = grid.axes()
    spatial = np.stack(np.meshgrid(*axes[:-1], indexing="ij"), axis=-1).reshape(-1, n)
    spatial_idx = np.stack(np.meshgrid(*[np.arange(s) for s in shape[:-1]], indexing="ij"), axis=-1).reshape(-1, n)
    radius = np.linalg.norm(spatial, axis=1)
    cells, dists = [], []
    for k, tau in enumerate(axes[-1]):
        near = np.abs(radius - tau) < 2.0
        if not np.any(near):
            continue
        d = cone_distance(R, np.concatenate([spatial[near], np.full((near.sum(), 1), tau)], axis=1))
        keep = d < 1.0
        idx = np.concatenate([spatial_idx[near][keep], np.full((keep.sum(), 1), k)], axis=1)
        cells.append(idx)
        dists.append(d[keep])
    cells = np.concatenate(cells)
    dists = np.concatenate(dists)
    rng = np.random.default_rng(seed)
    freqs = rng.normal(size=(modes, n + 1))
    freqs *= rng.uniform(0.0, 0.5, size=(modes, 1)) / np.linalg.norm(freqs, axis=1, keepdims=True)
    coeffs = rng.normal(size=modes) + 1j * rng.normal(size=modes)
    points = grid.points(cells)
    values = np.cos(0.5 * np.pi * dists) ** 2 * (np.exp(1j * points @ freqs.T) @ coeffs)
    logger.debug("random_cone_function", R=R, n=n, cells=len(cells), seed=seed)
    return grid_function(grid, values, cells=cells, support=shell)


def restrict(f: FrequencyFunction, region) -> FrequencyFunction:
    """Zero a GRID function outside region."""
    points = f.frequency_points()
    flat = points.reshape(-1, points.shape[-1])
    mask = np.asarray(region.contains(flat)).reshape(f.values.shape)
    return replace(f.with_values(np.where(mask, f.values, 0.0)), declared_support=region)


# --- pointwise evaluation in frequency space --------------------------------------------

def evaluate_frequency(f: FrequencyFunction, xi) -> np.ndarray:
    """Closed-form values f(xi) at ambient frequency points."""
    xi = np.asarray(xi, dtype=float)
    if f.family is Family.BOX:
        region = BoxRegion(f.params["center"], f.params["half_widths"], f.params["rotation"])
        return region.contains(xi).astype(complex)
    if f.family in (Family.WINDOWED_BOX, Family.LATTICE_SUM):
        eta = xi @ f.params["rotation"]
        value = np.ones(xi.shape[:-1], dtype=complex)
        for a in range(f.ambient):
            value *= tukey_window(eta[..., a] - f.params["center"][a], f.params["flat"][a], f.params["taper"][a])
        if f.family is Family.LATTICE_SUM:
            plan = f.params["plan"]
            n = plan.n
            s1 = np.exp(1j * eta[..., 0, None] * plan.shifts_1).sum(axis=-1)
            spp = np.exp(1j * eta[..., 1:n] @ plan.shifts_pp.T).sum(axis=-1)
            value *= s1 * spp / math.sqrt(plan.count)
        return value
    if f.family is Family.CONE_SHELL:
        return f.declared_support.contains(xi).astype(complex)
    raise InvalidInputError(f"no pointwise closed form for {f.family.value}")


def sample_on_grid(f: FrequencyFunction, cells_per_axis: int) -> FrequencyFunction:
    """
    Dense GRID realization of a box-supported closed form, cell-aligned with the box.

    Args:
        f: BOX, WINDOWED_BOX or LATTICE_SUM function
        cells_per_axis: Cells per box axis (a multiple of 4 keeps taper joints on cell edges)

    Returns:
        GRID FrequencyFunction in the box frame
    """
    if f.family not in (Family.BOX, Family.WINDOWED_BOX, Family.LATTICE_SUM):
        raise InvalidInputError(f"{f.family.value} is not box-supported")
    center, half = f.params["center"], f.params["half_widths"]
    spacing = 2.0 * half / cells_per_axis
    grid = FrequencyGrid(origin=center - half + 0.5 * spacing, spacing=spacing,
                         shape=(cells_per_axis,) * f.ambient, rotation=f.params["rotation"])
    values = evaluate_frequency(f, grid.points())
    return FrequencyFunction(ambient=f.ambient, family=Family.GRID, declared_support=f.declared_support,
                             grid=grid, values=values)


# --- transforms at points ---------------------------------------------------------------

def _chunks(total: int, size: int):
    size = max(1, int(size))
    for start in range(0, total, size):
        yield slice(start, min(total, start + size))


def _box_ft(f: FrequencyFunction, points: np.ndarray) -> np.ndarray:
    y = points @ f.params["rotation"]
    center, half = f.params["center"], f.params["half_widths"]
    out = np.ones(len(points), dtype=complex)
    for a in range(f.ambient):
        if f.family is Family.BOX:
            out *= interval_ft(y[:, a], center[a], half[a])
        else:
            out *= tukey_ft(y[:, a], center[a], f.params["flat"][a], f.params["taper"][a])
    return out


def _lattice_ft(f: FrequencyFunction, points: np.ndarray) -> np.ndarray:
    plan = f.params["plan"]
    n = plan.n
    y = points @ f.params["rotation"]
    center, flat, taper = f.params["center"], f.params["flat"], f.params["taper"]
    first = np.zeros(len(points), dtype=complex)
    for w in plan.shifts_1:
        first += tukey_ft(y[:, 0] - w, center[0], flat[0], taper[0])
    middle = np.zeros(len(points), dtype=complex)
    for u in plan.shifts_pp:
        term = np.ones(len(points), dtype=complex)
        for i in range(1, n):
            term *= tukey_ft(y[:, i] - u[i - 1], center[i], flat[i], taper[i])
        middle += term
    last = tukey_ft(y[:, n], center[n], flat[n], taper[n])
    return first * middle * last / math.sqrt(plan.count)


def _shell_ft(f: FrequencyFunction, points: np.ndarray) -> np.ndarray:
    R, delta, n = f.params["R"], f.params["delta"], f.params["n"]
    reach = float(np.max(np.linalg.norm(points, axis=1))) if len(points) else 0.0
    panel = min(2.0, math.pi / (reach + 1.0))
    rho, z, w = stadium_quadrature(R, delta, panel_length=panel)
    weights = w * rho ** (n - 1)
    out = np.empty(len(points), dtype=complex)
    radial = np.linalg.norm(points[:, :-1], axis=1)
    for sl in _chunks(len(points), ENGINE_SETTINGS["shell_chunk"]):
        kernel = sphere_ft(radial[sl, None] * rho[None, :], n) * np.exp(-1j * points[sl, -1, None] * z[None, :])
        out[sl] = kernel @ weights
    return out


def _direct_grid_ft(f: FrequencyFunction, points: np.ndarray) -> np.ndarray:
    xi = f.frequency_points().reshape(-1, f.ambient)
    values = f.values.ravel()
    live = values != 0
    xi, values = xi[live], values[live]
    out = np.zeros(len(points), dtype=complex)
    if not len(values):
        return out
    per_chunk = ENGINE_SETTINGS["chunk_elements"] // max(1, len(values))
    for sl in _chunks(len(points), per_chunk):
        out[sl] = np.exp(-1j * points[sl] @ xi.T) @ values
    return out * f.grid.cell_volume


def _tensor_grid_ft(f: FrequencyFunction, points: np.ndarray) -> np.ndarray:
    grid = f.grid
    y = points @ grid.rotation
    axes = grid.axes()
    tail = int(np.prod(grid.shape[1:])) if grid.dim > 1 else 1
    out = np.empty(len(points), dtype=complex)
    for sl in _chunks(len(points), ENGINE_SETTINGS["chunk_elements"] // tail):
        factors = [np.exp(-1j * np.outer(y[sl, a], axes[a])) for a in range(grid.dim)]
        acc = np.tensordot(factors[0], f.values, axes=([1], [0]))
        for a in range(1, grid.dim):
            acc = np.einsum("pi...,pi->p...", acc, factors[a])
        out[sl] = acc
    return out * grid.cell_volume


def _nyquist_guard(f: FrequencyFunction, points: np.ndarray):
    y = np.abs(points @ f.grid.rotation)
    worst = float(np.max(np.max(y, axis=0) * f.grid.spacing)) if len(points) else 0.0
    if worst > math.pi:
        raise QuadratureNotConvergedError(
            f"grid too coarse: spacing * max|x| = {worst:.3g} exceeds pi", coarse=worst, fine=math.pi)


def _evaluate(f: FrequencyFunction, points: np.ndarray) -> np.ndarray:
    if f.family in (Family.BOX, Family.WINDOWED_BOX):
        return _box_ft(f, points)
    if f.family is Family.LATTICE_SUM:
        return _lattice_ft(f, points)
    if f.family is Family.CONE_SHELL:
        return _shell_ft(f, points)
    if f.family is Family.GRID:
        if f.cells is None and np.count_nonzero(f.values) > 0.25 * f.values.size:
            return _tensor_grid_ft(f, points)
        return _direct_grid_ft(f, points)
    raise InvalidInputError(f"unsupported closed form {f.family}")


def ft_at_points(f: FrequencyFunction, points, jobs: int = 1, label: str = "") -> SpatialField:
    """
    f^(x) at each point, exact for closed forms and a cell-volume Riemann sum for GRID.

    Args:
        f: Frequency function
        points: (m, d) evaluation points, typically measure atoms
        jobs: Worker threads over point blocks
        label: Name recorded on the field

    Returns:
        SpatialField in the order of points
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != f.ambient:
        raise InvalidInputError(f"points live in R^{points.shape[1]}, function in R^{f.ambient}")
    if f.is_grid:
        _nyquist_guard(f, points)
    if jobs > 1 and len(points) > jobs:
        blocks = np.array_split(np.arange(len(points)), jobs)
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda idx: _evaluate(f, points[idx]), blocks))
        values = np.concatenate(parts)
    else:
        values = _evaluate(f, points)
    return SpatialField(points=points, values=values, label=label or f.family.value)


def ft_grid_converged(f: FrequencyFunction, points, cells: int = 8,
                      tolerance: float = None) -> Tuple[np.ndarray, dict]:
    """
    Direct-quadrature transform of a box-supported closed form, refined until converged.

    Cell-aligned midpoint sums at m, 2m and 4m cells per axis are
    Richardson-extrapolated (orders 2, 4 for indicators, 4, 6 for
    windows). The two first-level extrapolants must agree to tolerance
    relative to the largest value, otherwise the grid is declared
    unconverged.

    Args:
        f: BOX, WINDOWED_BOX or LATTICE_SUM function
        points: Evaluation points
        cells: Starting cells per axis (rounded up to a multiple of 4)
        tolerance: Half-spacing agreement (1e-4 by default)

    Returns:
        (values, report) with the cells used and the agreement reached
    """
    tolerance = ENGINE_SETTINGS["romberg_tolerance"] if tolerance is None else tolerance
    points = np.atleast_2d(np.asarray(points, dtype=float))
    y = np.abs(points @ f.params["rotation"])
    span = 2.0 * f.params["half_widths"] * np.max(y, axis=0)
    needed = int(math.ceil(float(np.max(span)) / math.pi)) + 1
    m = 4 * int(math.ceil(max(cells, needed) / 4.0))
    if 4 * m > ENGINE_SETTINGS["romberg_max_cells"]:
        raise ResourceInfeasibleError(f"oracle grid needs {4 * m} cells per axis")
    p1, p2 = (2, 4) if f.family is Family.BOX else (4, 6)
    sums = [ft_at_points(sample_on_grid(f, m * 2 ** k), points).values for k in range(3)]
    first = [(2 ** p1 * sums[k + 1] - sums[k]) / (2 ** p1 - 1) for k in range(2)]
    scale = float(np.max(np.abs(first[1]))) or 1.0
    agreement = float(np.max(np.abs(first[1] - first[0]))) / scale
    if agreement > tolerance:
        raise QuadratureNotConvergedError(
            f"{f.family.value} grid sums disagree by {agreement:.3g} at {m}..{4 * m} cells",
            coarse=agreement, fine=tolerance)
    values = (2 ** p2 * first[1] - first[0]) / (2 ** p2 - 1)
    return values, {"cells": [m, 2 * m, 4 * m], "agreement": agreement, "orders": [p1, p2]}


def cone_shell_ft_oracle(R: float, n: int, x, delta: float = 1.0) -> complex:
    """
    Transform of the shell indicator by adaptive nested quadrature over the meridian stadium.

    Independent of stadium_quadrature: z is integrated outermost and the
    rho-slice of the stadium is computed analytically.
    """
    from scipy import integrate

    x = np.asarray(x, dtype=float)
    radial = float(np.linalg.norm(x[:-1]))
    t = float(x[-1])
    s2 = math.sqrt(2.0)

    def rho_slice(z):
        pieces = []
        lo, hi = max(z - s2 * delta, 2.0 * R - z), min(z + s2 * delta, 4.0 * R - z)
        if lo < hi:
            pieces.append((lo, hi))
        for end in (R, 2.0 * R):
            dz = z - end
            if abs(dz) < delta:
                half = math.sqrt(delta * delta - dz * dz)
                pieces.append((end - half, end + half))
        return min(p[0] for p in pieces), max(p[1] for p in pieces)

    def inner(z, part):
        lo, hi = rho_slice(z)
        phase = np.exp(-1j * t * z)

        def integrand(rho):
            value = rho ** (n - 1) * float(sphere_ft(radial * rho, n)) * phase
            return value.real if part == 0 else value.imag

        return integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-11, limit=200)[0]

    z_lo, z_hi = R - delta, 2.0 * R + delta
    breaks = [R - delta / s2, R + delta, 2.0 * R - delta, 2.0 * R + delta / s2]
    real = integrate.quad(inner, z_lo, z_hi, args=(0,), points=breaks, epsabs=0.0, epsrel=1e-10, limit=400)[0]
    imag = integrate.quad(inner, z_lo, z_hi, args=(1,), points=breaks, epsabs=0.0, epsrel=1e-10, limit=400)[0]
    return complex(real, imag)


# --- norms ------------------------------------------------------------------------------

def as_exponent(q) -> float:
    """Float Lebesgue exponent in [1, inf]; accepts INF, "inf" and rationals."""
    if q is INF or (isinstance(q, str) and q.strip().lower() in ("inf", "infinity", "oo")):
        return math.inf
    try:
        value = float(q)
    except (TypeError, ValueError):
        raise InvalidInputError(f"unreadable exponent {q!r}")
    if not value >= 1:
        raise InvalidInputError(f"exponent must lie in [1, inf], got {q}")
    return value


def lq_norm_mu(field: SpatialField, mu: AtomicMeasure, q) -> float:
    """
    (sum of w_i |v_i|^q)^{1/q}; for q = inf the max over atoms of positive weight.

    Args:
        field: Transform evaluated at mu's atoms
        mu: Materialized measure
        q: Exponent in [1, inf]

    Returns:
        L^q(dmu) norm
    """
    q = as_exponent(q)
    if field.points.shape != mu.points.shape or not np.array_equal(field.points, mu.points):
        raise InvalidInputError("field was not evaluated at the measure's atoms")
    magnitude = np.abs(field.values)
    if math.isinf(q):
        positive = mu.weights > 0
        return float(np.max(magnitude[positive])) if np.any(positive) else 0.0
    return float(np.sum(mu.weights * magnitude ** q) ** (1.0 / q))


def separable_lq_norm(factor_values: Sequence[np.ndarray], factors: ProductFactors, q) -> float:
    """L^q norm of prod_a g_a(t_a) against a product measure: prod_a ||g_a||_{L^q(factor a)}."""
    q = as_exponent(q)
    if len(factor_values) != factors.dim:
        raise InvalidInputError(f"need {factors.dim} factor fields, got {len(factor_values)}")
    total = 1.0
    for values, weights in zip(factor_values, factors.weights):
        magnitude = np.abs(np.asarray(values))
        if math.isinf(q):
            total *= float(np.max(magnitude[weights > 0]))
        else:
            total *= float(np.sum(weights * magnitude ** q) ** (1.0 / q))
    return total


def box_factor_values(f: FrequencyFunction, factors: ProductFactors) -> List[np.ndarray]:
    """Per-axis transforms of a box-type function at the nodes of a product measure in the same frame."""
    if f.family not in (Family.BOX, Family.WINDOWED_BOX):
        raise InvalidInputError(f"{f.family.value} transform is not separable")
    if not np.allclose(factors.basis, f.params["rotation"]):
        raise InvalidInputError("product measure frame differs from the function frame")
    center, half = f.params["center"], f.params["half_widths"]
    out = []
    for a, nodes in enumerate(factors.nodes):
        if f.family is Family.BOX:
            out.append(interval_ft(nodes, center[a], half[a]))
        else:
            out.append(tukey_ft(nodes, center[a], f.params["flat"][a], f.params["taper"][a]))
    return out


def _gauss_on(lo: float, hi: float, count: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = special.roots_legendre(count)
    return 0.5 * (hi + lo) + 0.5 * (hi - lo) * x, 0.5 * (hi - lo) * w


def lattice_l2_norm(f: FrequencyFunction) -> float:
    """
    Exact ||F||_2 for a lattice sum.

    |F|^2 factors as count^{-1} w_1^2 |S_1|^2 * prod w_i^2 |S''|^2 * w_{n+1}^2,
    so the norm is a product of a 1-D integral, an (n-1)-D integral and a
    closed-form window integral, each by Gauss-Legendre.
    """
    plan = f.params["plan"]
    n = plan.n
    center, flat, taper = f.params["center"], f.params["flat"], f.params["taper"]
    extra = ENGINE_SETTINGS["decay_extra_nodes"]

    def nodes_for(axis, shifts):
        half = flat[axis] + taper[axis]
        span = float(np.ptp(shifts)) if len(shifts) > 1 else 0.0
        return _gauss_on(center[axis] - half, center[axis] + half, int(math.ceil(span * half)) + extra)

    t, wt = nodes_for(0, plan.shifts_1)
    s1 = np.exp(1j * np.outer(t, plan.shifts_1)).sum(axis=1)
    first = float(np.sum(wt * tukey_window(t - center[0], flat[0], taper[0]) ** 2 * np.abs(s1) ** 2))

    rules = [nodes_for(i, plan.shifts_pp[:, i - 1]) for i in range(1, n)]
    mesh = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wmesh = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    weights = np.prod(np.stack([w.ravel() for w in wmesh], axis=1), axis=1)
    window = np.ones(len(pts))
    for i in range(1, n):
        window *= tukey_window(pts[:, i - 1] - center[i], flat[i], taper[i]) ** 2
    spp = np.zeros(len(pts), dtype=complex)
    for sl in _chunks(len(pts), ENGINE_SETTINGS["chunk_elements"] // max(1, len(plan.shifts_pp))):
        spp[sl] = np.exp(1j * pts[sl] @ plan.shifts_pp.T).sum(axis=1)
    middle = float(np.sum(weights * window * np.abs(spp) ** 2))
    last = tukey_l2_squared(flat[n], taper[n])
    return math.sqrt(first * middle * last / plan.count)


def l2_norm_freq(f: FrequencyFunction) -> float:
    """||f||_2: exact volumes for closed forms, a cell-volume sum for GRID."""
    if f.family is Family.BOX:
        return math.sqrt(float(np.prod(2.0 * f.params["half_widths"])))
    if f.family is Family.WINDOWED_BOX:
        return math.sqrt(float(np.prod([tukey_l2_squared(a, b) for a, b in zip(f.params["flat"], f.params["taper"])])))
    if f.family is Family.LATTICE_SUM:
        return lattice_l2_norm(f)
    if f.family is Family.CONE_SHELL:
        return math.sqrt(cone_shell_volume(f.params["R"], f.params["n"], f.params["delta"]))
    return math.sqrt(float(np.sum(np.abs(f.values) ** 2)) * f.grid.cell_volume)


def frequency_norms(data: FrequencyFunction) -> np.ndarray:
    points = data.frequency_points()
    return np.linalg.norm(points, axis=-1)


def sobolev_norm(data: FrequencyFunction, s: float) -> float:
    """||(1 + |xi|^2)^{s/2} h^||_2 for spatial data given by its transform on a grid."""
    weight = (1.0 + frequency_norms(data) ** 2) ** (s / 2.0)
    return math.sqrt(float(np.sum(np.abs(weight * data.values) ** 2)) * data.grid.cell_volume)


# --- spectral grids and the wave pipeline ----------------------------------------------

def spectral_grid(n: int, size: int, length: float) -> FrequencyGrid:
    """
    Centered frequency grid dual to a periodic spatial grid of size^n samples on [-L/2, L/2)^n.

    Args:
        n: Spatial dimension
        size: Samples per axis (even)
        length: Period L

    Returns:
        FrequencyGrid with spacing 2pi/L, zero frequency at index size/2
    """
    if size < 2 or size % 2:
        raise InvalidInputError(f"spectral grid size must be even, got {size}")
    step = 2.0 * math.pi / length
    return FrequencyGrid(origin=np.full(n, -(size // 2) * step), spacing=np.full(n, step), shape=(size,) * n)


def spectral_data(grid: FrequencyGrid, values) -> FrequencyFunction:
    return grid_function(grid, values)


def from_spatial(samples, length: float) -> FrequencyFunction:
    """h^ on the centered grid from samples h(x_k), x_k = (k - size/2) L/size."""
    samples = np.asarray(samples, dtype=complex)
    n, size = samples.ndim, samples.shape[0]
    dx = length / size
    hat = fft.fftshift(fft.fftn(fft.ifftshift(samples))) * dx ** n
    return spectral_data(spectral_grid(n, size, length), hat)


def to_spatial(data: FrequencyFunction) -> np.ndarray:
    """Inverse of from_spatial: h(x_k) = (2pi)^{-n} sum h^(xi) e^{i x.xi} dxi."""
    n = data.ambient
    size = data.grid.shape[0]
    length = 2.0 * math.pi / data.grid.spacing[0]
    dx = length / size
    return fft.fftshift(fft.ifftn(fft.ifftshift(data.values))) / dx ** n


def half_wave_evolve(data: FrequencyFunction, t: float) -> FrequencyFunction:
    """Multiply h^ by e^{it|xi|}."""
    return data.with_values(data.values * np.exp(1j * t * frequency_norms(data)))


def solve_wave(f_data: FrequencyFunction, g_data: FrequencyFunction, t: float) -> FrequencyFunction:
    """u^(., t) = cos(t|xi|) f^ + sin(t|xi|)/|xi| g^ (t g^ at xi = 0)."""
    norms = frequency_norms(f_data)
    safe = np.where(norms > 0, norms, 1.0)
    sine = np.where(norms > 0, np.sin(t * norms) / safe, t)
    return f_data.with_values(np.cos(t * norms) * f_data.values + sine * g_data.values)


def _wave_sum(xi: np.ndarray, coeff_fn, points: np.ndarray, volume: float) -> np.ndarray:
    n = xi.shape[1]
    out = np.zeros(len(points), dtype=complex)
    if not len(xi):
        return out
    norms = np.linalg.norm(xi, axis=1)
    for sl in _chunks(len(points), ENGINE_SETTINGS["chunk_elements"] // len(xi)):
        x, t = points[sl, :n], points[sl, n]
        out[sl] = np.sum(np.exp(1j * x @ xi.T) * coeff_fn(t[:, None], norms[None, :]), axis=1)
    return out * volume / (2.0 * math.pi) ** n


def sample_wave_at(f_data: FrequencyFunction, g_data: FrequencyFunction, points) -> SpatialField:
    """
    u(x, t) at space-time points (x, t) by direct summation over the nonzero frequencies.

    Args:
        f_data: Initial position h^ on a spectral grid
        g_data: Initial velocity h^ on the same grid
        points: (m, n+1) space-time points

    Returns:
        SpatialField of u values
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    xi = f_data.frequency_points().reshape(-1, f_data.ambient)
    fv, gv = f_data.values.ravel(), g_data.values.ravel()
    live = (fv != 0) | (gv != 0)
    xi, fv, gv = xi[live], fv[live], gv[live]

    def coeff(t, norms):
        safe = np.where(norms > 0, norms, 1.0)
        sine = np.where(norms > 0, np.sin(t * norms) / safe, t)
        return np.cos(t * norms) * fv[None, :] + sine * gv[None, :]

    return SpatialField(points, _wave_sum(xi, coeff, points, f_data.grid.cell_volume), label="wave")


def sample_half_wave_at(data: FrequencyFunction, points) -> SpatialField:
    """(e^{it sqrt(-Laplacian)} h)(x) at space-time points (x, t)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    xi = data.frequency_points().reshape(-1, data.ambient)
    hv = data.values.ravel()
    live = hv != 0
    xi, hv = xi[live], hv[live]
    return SpatialField(points, _wave_sum(xi, lambda t, norms: np.exp(1j * t * norms) * hv[None, :],
                                          points, data.grid.cell_volume), label="half_wave")


def smooth_step(s) -> np.ndarray:
    """C-infinity chi: 1 on [0, 1], 0 on [2, inf)."""
    s = np.asarray(s, dtype=float)

    def bump(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    up, down = bump(2.0 - s), bump(s - 1.0)
    return up / (up + down)


def lp_multiplier(norms, j: int) -> np.ndarray:
    """beta(|xi|/2^j) = chi(|xi|/2^j) - chi(|xi|/2^{j-1}), supported in [2^{j-1}, 2^{j+1}]."""
    norms = np.asarray(norms, dtype=float)
    return smooth_step(norms / 2.0 ** j) - smooth_step(norms / 2.0 ** (j - 1))


def lp_top_band(data: FrequencyFunction) -> int:
    """Largest j with beta_j nonzero somewhere on the grid."""
    top = float(np.max(frequency_norms(data)))
    return max(1, int(math.ceil(math.log2(max(top, 1.0)))) + 1)


def littlewood_paley(data: FrequencyFunction, j: int) -> FrequencyFunction:
    """P_j h: multiply h^ by beta(|xi|/2^j), j >= 1."""
    if j < 1:
        raise InvalidInputError(f"Littlewood-Paley band must be >= 1, got {j}")
    return data.with_values(data.values * lp_multiplier(frequency_norms(data), j))


def low_part(data: FrequencyFunction) -> FrequencyFunction:
    """P_{<=0} h with beta_0 = 1 - sum of the bands present on the grid."""
    norms = frequency_norms(data)
    total = np.zeros(norms.shape)
    for j in range(1, lp_top_band(data) + 1):
        total += lp_multiplier(norms, j)
    return data.with_values(data.values * (1.0 - total))


def annulus_data(grid: FrequencyGrid, j: int, seed: Optional[int] = None) -> FrequencyFunction:
    """
    h^ = beta(|xi|/2^j) e^{i theta(xi)}; theta = 0 without a seed (data focused at x = 0), random otherwise.
    """
    norms = np.linalg.norm(grid.points(), axis=-1)
    values = lp_multiplier(norms, j).astype(complex)
    if seed is not None:
        rng = np.random.default_rng(seed)
        values *= np.exp(2j * np.pi * rng.uniform(size=values.shape))
    return spectral_data(grid, values)


# --- mollifier convolutions ------------------------------------------------------------------

def _norm_from_samples(values: np.ndarray, weights: np.ndarray, r: float, peaks: np.ndarray = None) -> float:
    if math.isinf(r):
        top = float(np.max(values))
        return max(top, float(np.max(peaks))) if peaks is not None and len(peaks) else top
    return float(np.sum(weights * values ** r) ** (1.0 / r))


def _radial_nodes(R: float, reach: float) -> Tuple[np.ndarray, np.ndarray]:
    panel = 1.0 / (4.0 * R)
    panels = int(math.ceil(reach / panel))
    x, w = special.roots_legendre(ENGINE_SETTINGS["mollifier_nodes"])
    edges = np.linspace(0.0, panels * panel, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * x[None, :]).ravel(), (half[:, None] * w[None, :]).ravel()


def _radial_convolution(mu: AtomicMeasure, R: float, r: float) -> float:
    profile = mu.radial
    d = profile.dim
    nu = d / 2.0 - 1.0
    radii, wr = _radial_nodes(R, float(np.max(profile.radii)) + 6.0 / R)
    radii = np.concatenate([[0.0], radii])
    wr = np.concatenate([[0.0], wr])
    values = np.zeros(len(radii))
    peak = R ** d * math.pi ** (-d / 2.0)
    for sl in _chunks(len(radii), ENGINE_SETTINGS["chunk_elements"] // max(1, len(profile.radii))):
        rr = radii[sl, None]
        rho = profile.radii[None, :]
        kappa = 2.0 * R * R * rr * rho
        safe = np.where(kappa > 1e-12, kappa, 1.0)
        average = np.where(
            kappa > 1e-12,
            math.gamma(d / 2.0) * (2.0 / safe) ** nu * special.ive(nu, safe),
            np.exp(-kappa),
        )
        kernel = peak * np.exp(-R * R * (rr - rho) ** 2) * average
        values[sl] = kernel @ profile.masses
    shell = sphere_measure(d) * radii ** (d - 1) * wr
    return _norm_from_samples(values, shell, r)


def _gaussian_line(nodes: np.ndarray, weights: np.ndarray, R: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    step = 1.0 / (4.0 * R)
    lo, hi = float(np.min(nodes)) - 6.0 / R, float(np.max(nodes)) + 6.0 / R
    count = int(math.ceil((hi - lo) / step)) + 1
    if count > ENGINE_SETTINGS["mollifier_max_cells"]:
        raise ResourceInfeasibleError(f"mollifier line needs {count} samples at R={R}")
    grid = lo + step * np.arange(count)
    samples = np.concatenate([grid, nodes])
    values = np.zeros(len(samples))
    scale = R / math.sqrt(math.pi)
    for sl in _chunks(len(samples), ENGINE_SETTINGS["chunk_elements"] // max(1, len(nodes))):
        values[sl] = np.exp(-R * R * (samples[sl, None] - nodes[None, :]) ** 2) @ weights * scale
    return values[:count], np.full(count, step), values[count:]


def _separable_convolution(factors: ProductFactors, R: float, r: float) -> float:
    total = 1.0
    for nodes, weights in zip(factors.nodes, factors.weights):
        values, quad, peaks = _gaussian_line(nodes, weights, R)
        total *= _norm_from_samples(values, quad, r, peaks)
    return total


def _direct_convolution(mu: AtomicMeasure, R: float, r: float, spacing: float) -> float:
    d = mu.dimension_ambient
    lo = mu.points.min(axis=0) - 4.0 / R
    hi = mu.points.max(axis=0) + 4.0 / R
    counts = np.ceil((hi - lo) / spacing).astype(int) + 1
    cells = float(np.prod(counts))
    if cells > ENGINE_SETTINGS["mollifier_max_cells"] or cells * mu.atom_count > ENGINE_SETTINGS["direct_sum_limit"]:
        raise ResourceInfeasibleError(f"mollifier grid of {cells:.3g} cells over {mu.atom_count} atoms is too large")
    axes = [lo[a] + spacing * np.arange(counts[a]) for a in range(d)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    samples = np.concatenate([grid, mu.points])
    values = np.zeros(len(samples))
    peak = R ** d * math.pi ** (-d / 2.0)
    for sl in _chunks(len(samples), ENGINE_SETTINGS["chunk_elements"] // max(1, mu.atom_count)):
        sq = np.sum((samples[sl, None, :] - mu.points[None, :, :]) ** 2, axis=-1)
        values[sl] = np.exp(-R * R * sq) @ mu.weights * peak
    quad = np.full(len(grid), spacing ** d)
    return _norm_from_samples(values[:len(grid)], quad, r, values[len(grid):])


def mollify_convolve(mu: AtomicMeasure, R: float, r_norm, spacing: float = None) -> float:
    """
    ||phi_R * dmu||_r with phi(x) = pi^{-d/2} e^{-|x|^2} and phi_R = R^d phi(R x).

    Radial measures are convolved shell by shell (the spherical average of
    a Gaussian is a Bessel I function) on radial nodes of spacing 1/(4R).
    Product measures factor into 1-D Gaussian sums. Other measures use a
    direct grid over supp mu inflated by 4/R.

    Args:
        mu: Measure
        R: Mollifier scale
        r_norm: 1, 2 or inf
        spacing: Grid spacing for the direct path (at most 1/(4R))

    Returns:
        Norm value
    """
    r = as_exponent(r_norm)
    if R <= 0:
        raise InvalidInputError(f"R must be positive, got {R}")
    limit = 1.0 / (4.0 * R)
    spacing = limit if spacing is None else float(spacing)
    if spacing > limit * (1 + 1e-12):
        raise QuadratureNotConvergedError(f"grid spacing {spacing:.3g} exceeds 1/(4R) = {limit:.3g}",
                                          coarse=spacing, fine=limit)
    if mu.radial is not None:
        return _radial_convolution(mu, R, r)
    if mu.factors is not None:
        return _separable_convolution(mu.factors, R, r)
    if mu.axisymmetric:
        raise InvalidInputError("axisymmetric measures need a radial profile for convolution")
    return _direct_convolution(mu, R, r, spacing)


# --- average decay over the unit cone --------------------------------------------------------

def radial_transform(alpha: float, dim: int, y_norms) -> np.ndarray:
    """
    Transform of |x|^{alpha-dim} dx on the unit ball at |y| = y_norms.

    Each dyadic octave gets ceil(|y| width / 2) + 40 Gauss-Legendre nodes;
    octaves run down to 2^{-K} with K = log2 max|y| + 8 and the inner ball
    is lumped at the origin.
    """
    y_norms = np.atleast_1d(np.asarray(y_norms, dtype=float))
    top = max(1.0, float(np.max(y_norms)))
    depth = int(math.ceil(math.log2(top))) + 8
    sigma = sphere_measure(dim)
    out = np.full(y_norms.shape, sigma * 2.0 ** (-depth * alpha) / alpha)
    for k in range(depth):
        lo, hi = 2.0 ** (-k - 1), 2.0 ** (-k)
        count = int(math.ceil(0.5 * top * (hi - lo))) + ENGINE_SETTINGS["decay_extra_nodes"]
        r, w = _gauss_on(lo, hi, count)
        mass = sigma * r ** (alpha - 1.0) * w
        for sl in _chunks(len(y_norms), ENGINE_SETTINGS["chunk_elements"] // count):
            out[sl] += ball_average(y_norms[sl, None] * r[None, :], dim) @ mass
    return out


def cone_surface_measure(n: int) -> float:
    """sigma(Gamma_1) = sqrt2 sigma(S^{n-1}) (2^n - 1)/n."""
    return math.sqrt(2.0) * sphere_measure(n) * (2.0 ** n - 1.0) / n


def average_cone_decay(mu: AtomicMeasure, R: float) -> float:
    """
    Integral over Gamma_1 = {(rho omega, rho): 1 <= rho <= 2} of |mu^(R xi)|^2 dsigma.

    dsigma = sqrt2 rho^{n-1} drho domega. Radial measures reduce to a 1-D
    integral in rho; other measures use a product rule on S^{n-1} x [1, 2]
    resolved to the oscillation scale of mu^ at R.

    Args:
        mu: Materialized measure (or one with a radial profile)
        R: Dilation

    Returns:
        Surface integral value
    """
    n = mu.n
    extra = ENGINE_SETTINGS["decay_extra_nodes"]
    if mu.radial is not None and not math.isnan(mu.radial.alpha):
        rho, w = _gauss_on(1.0, 2.0, int(math.ceil(math.sqrt(2.0) * R)) + extra)
        hat = radial_transform(mu.radial.alpha, mu.radial.dim, math.sqrt(2.0) * R * rho)
        return float(math.sqrt(2.0) * sphere_measure(n) * np.sum(w * rho ** (n - 1) * np.abs(hat) ** 2))
    if not mu.materialized or mu.axisymmetric:
        raise InvalidInputError("average decay needs atoms in ambient coordinates")
    reach = float(np.max(np.linalg.norm(mu.points, axis=1))) if mu.atom_count else 0.0
    order = int(math.ceil(math.sqrt(2.0) * R * reach)) + 12
    omega, w_omega = sphere_quadrature(n, order)
    rho, w_rho = _gauss_on(1.0, 2.0, int(math.ceil(math.sqrt(2.0) * R * reach)) + 12)
    nodes = len(omega) * len(rho)
    if float(nodes) * mu.atom_count > ENGINE_SETTINGS["direct_sum_limit"]:
        raise ResourceInfeasibleError(
            f"decay quadrature needs {nodes} nodes against {mu.atom_count} atoms at R={R}")
    xi = np.concatenate([
        (rho[:, None, None] * omega[None, :, :]).reshape(-1, n),
        np.repeat(rho, len(omega))[:, None],
    ], axis=1)
    weights = math.sqrt(2.0) * np.outer(w_rho * rho ** (n - 1), w_omega).ravel()
    total = 0.0
    for sl in _chunks(len(xi), ENGINE_SETTINGS["chunk_elements"] // max(1, mu.atom_count)):
        hat = np.exp(-1j * R * xi[sl] @ mu.points.T) @ mu.weights
        total += float(np.sum(weights[sl] * np.abs(hat) ** 2))
    return total


# --- Knapp calibration ----------------------------------------------------------------------

def calibrate_knapp_radius(R: float, n: int, c: float = None, directions: int = 6) -> float:
    """
    Largest c = c0 / 2^k with |f^(x)| >= |Gamma_R(1)|/2 on |x| = c/R for f the shell indicator.

    Args:
        R: Cone scale
        n: Spatial dimension
        c: Starting constant (1/4 by default)
        directions: Sphere quadrature order for the probe directions

    Returns:
        Calibrated c
    """
    c = ENGINE_SETTINGS["knapp_c"] if c is None else c
    f = cone_shell_indicator(R, n)
    volume = cone_shell_volume(R, n)
    probes, _ = sphere_quadrature(n + 1, directions)
    for _ in range(8):
        values = ft_at_points(f, probes * c / R).values
        if np.min(np.abs(values)) >= 0.5 * volume:
            logger.info("knapp_radius_calibrated", R=R, n=n, c=c)
            return c
        c /= 2.0
    raise QuadratureNotConvergedError(f"no Knapp radius found at R={R}")


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description="Evaluate closed-form transforms against the grid oracle")
    parser.add_argument("--n", type=int, default=2)
    parser.add_argument("--R", type=float, default=64)
    parser.add_argument("--points", type=int, default=10)
    args = parser.parse_args()

    plate = knapp_plate(args.R, args.n)
    rng = np.random.default_rng(0)
    probe = rng.uniform(-1.0, 1.0, size=(args.points, args.n + 1)) / args.R
    for func in (plate_indicator(plate), windowed_plate(plate)):
        exact = ft_at_points(func, probe).values
        oracle, report = ft_grid_converged(func, probe)
        err = float(np.max(np.abs(exact - oracle)) / np.max(np.abs(exact)))
        print(f"{func.family.value}: max relative error {err:.2e} with cells {report['cells']}")
