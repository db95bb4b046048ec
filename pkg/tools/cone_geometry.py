#!/usr/bin/env python3
"""
Cone Geometry - truncated light cone, null frames, Knapp plates, Whitney caps
Part of Layer 3: Tools (deterministic operations)
Architecture SOP: architecture/05_numerical_contracts.md

Frequency points are arrays of shape (..., n+1) with the time frequency
last. Directions live on S^{n-1} in R^n.
"""

import os
import sys
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tools.lab_errors import InvalidInputError
from tools.lab_logging import get_logger

logger = get_logger(__name__)

DUAL_BOX_CONSTANT = 0.1
PLATE_SETTINGS = {
    "sum_low": 2.5,          # (xi_1 + xi_{n+1}) / R lower edge
    "sum_high": 3.0,         # (xi_1 + xi_{n+1}) / R upper edge
    "diff_half": 0.01,       # |xi_1 - xi_{n+1}| <= 1/100
    "transverse_half": 0.5,  # |xi''_i| <= sqrt(R)/2
    "min_R": 16,
}


def sphere_measure(dim: int) -> float:
    """Surface measure of the unit sphere S^{dim-1} in R^dim."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


def ball_volume(dim: int) -> float:
    """Volume of the unit ball in R^dim."""
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)


@lru_cache(maxsize=64)
def _sphere_rule(dim: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if dim == 2:
        count = 2 * order
        phi = 2.0 * np.pi * (np.arange(count) + 0.5) / count
        nodes = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        return nodes, np.full(count, 2.0 * np.pi / count)

    # x = (t, sqrt(1 - t^2) y) with y on S^{dim-2}, weight (1 - t^2)^((dim-3)/2)
    a = (dim - 3) / 2.0
    t, wt = special.roots_jacobi(order, a, a)
    sub_nodes, sub_weights = _sphere_rule(dim - 1, order)
    radial = np.sqrt(np.clip(1.0 - t ** 2, 0.0, None))
    nodes = np.concatenate([
        np.repeat(t, len(sub_weights))[:, None],
        (radial[:, None, None] * sub_nodes[None, :, :]).reshape(-1, dim - 1),
    ], axis=1)
    weights = np.outer(wt, sub_weights).ravel()
    return nodes, weights


def sphere_quadrature(dim: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Product rule on S^{dim-1}: Gauss-Jacobi in each polar angle cosine, trapezoid on the circle.

    Exact for polynomials of degree < 2*order in the polar variables.

    Args:
        dim: Ambient dimension of the sphere
        order: Nodes per polar variable (circle uses 2*order)

    Returns:
        (nodes of shape (m, dim), weights summing to sphere_measure(dim))
    """
    if dim < 1 or order < 1:
        raise InvalidInputError(f"sphere_quadrature needs dim >= 1 and order >= 1, got {dim}, {order}")
    nodes, weights = _sphere_rule(dim, order)
    return nodes.copy(), weights.copy()


# --- truncated cone ----------------------------------------------------------

@dataclass(frozen=True)
class ConeShell:
    """Gamma_R(delta): points within delta of {|xi'| = xi_{n+1}, R <= xi_{n+1} <= 2R}."""

    R: float
    delta: float
    n: int

    def __post_init__(self):
        if self.R < 1:
            raise InvalidInputError(f"ConeShell needs R >= 1, got {self.R}")
        if self.delta <= 0:
            raise InvalidInputError(f"ConeShell needs delta > 0, got {self.delta}")
        if self.n < 2:
            raise InvalidInputError(f"ConeShell needs n >= 2, got {self.n}")

    def contains(self, xi) -> np.ndarray:
        return cone_distance(self.R, xi) < self.delta

    @property
    def volume(self) -> float:
        return cone_shell_volume(self.R, self.n, self.delta)


def meridian_distance(R: float, rho, z) -> np.ndarray:
    """
    Distance in the (|xi'|, xi_{n+1}) half plane to the segment (R,R)-(2R,2R).

    Minimizing over the angular variable reduces the cone distance to this
    planar point-segment distance.
    """
    rho = np.asarray(rho, dtype=float)
    z = np.asarray(z, dtype=float)
    d_rho, d_z = rho - R, z - R
    along = np.clip((d_rho + d_z) / 2.0, 0.0, float(R))
    return np.hypot(d_rho - along, d_z - along)


def cone_distance(R: float, xi) -> np.ndarray:
    """Exact Euclidean distance from frequency points to the truncated cone Gamma_R."""
    xi = np.asarray(xi, dtype=float)
    rho = np.linalg.norm(xi[..., :-1], axis=-1)
    return meridian_distance(R, rho, xi[..., -1])


def shell_contains(shell: ConeShell, xi) -> np.ndarray:
    """Membership test for Gamma_R(delta)."""
    return shell.contains(xi)


def stadium_quadrature(R: float, delta: float = 1.0, panel_length: float = 2.0,
                       order: int = 8, cap_order: int = 8) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Quadrature for the meridian section of Gamma_R(delta), a stadium.

    The rectangle part uses Gauss-Legendre panels along the segment and
    across it; each half-disc end is integrated in polar coordinates about
    its endpoint.

    Args:
        R: Cone scale
        delta: Neighborhood width
        panel_length: Maximum panel length along the segment
        order: Gauss-Legendre nodes per panel and across the segment
        cap_order: Nodes per variable on each half disc

    Returns:
        (rho, z, area weights); integrate g by sum(w * g(rho, z))
    """
    length = math.sqrt(2.0) * R
    panels = max(1, int(math.ceil(length / panel_length)))
    x, w = special.roots_legendre(order)

    edges = np.linspace(0.0, length, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wu = (half[:, None] * w[None, :]).ravel()
    v = delta * x
    wv = delta * w

    s2 = math.sqrt(2.0)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    rho_rect = R + (uu + vv) / s2
    z_rect = R + (uu - vv) / s2
    w_rect = np.outer(wu, wv)

    # half discs: polar radius with Gauss-Legendre, angle over the outward half circle
    xr, wr = special.roots_legendre(cap_order)
    r = 0.5 * delta * (xr + 1.0)
    wr = 0.5 * delta * wr
    xa, wa = special.roots_legendre(2 * cap_order)
    caps_rho, caps_z, caps_w = [], [], []
    for end, outward in (((R, R), -1.0), ((2 * R, 2 * R), 1.0)):
        # outward direction is -+ (1,1)/sqrt(2); half circle spans +-pi/2 about it
        base = math.atan2(outward, outward)
        phi = base + 0.5 * math.pi * xa
        wphi = 0.5 * math.pi * wa
        rr, pp = np.meshgrid(r, phi, indexing="ij")
        caps_rho.append(end[0] + rr * np.cos(pp))
        caps_z.append(end[1] + rr * np.sin(pp))
        caps_w.append(np.outer(wr * r, wphi))

    rho = np.concatenate([rho_rect.ravel()] + [c.ravel() for c in caps_rho])
    z = np.concatenate([z_rect.ravel()] + [c.ravel() for c in caps_z])
    weights = np.concatenate([w_rect.ravel()] + [c.ravel() for c in caps_w])
    return rho, z, weights


def cone_shell_volume(R: float, n: int, delta: float = 1.0) -> float:
    """
    |Gamma_R(delta)| as a solid of revolution: sigma(S^{n-1}) * integral of rho^{n-1} over the stadium.

    Args:
        R: Cone scale
        n: Spatial dimension
        delta: Neighborhood width

    Returns:
        Volume in R^{n+1}
    """
    rho, _, weights = stadium_quadrature(R, delta, panel_length=max(1.0, R / 8.0))
    return float(sphere_measure(n) * np.sum(weights * rho ** (n - 1)))


def pappus_shell_volume_n2(R: float, delta: float = 1.0) -> float:
    """Closed form for n = 2: 2 pi * (stadium area) * (centroid radius 3R/2)."""
    area = 2.0 * delta * math.sqrt(2.0) * R + math.pi * delta ** 2
    return 2.0 * math.pi * area * 1.5 * R


# --- null coordinates ---------------------------------------------------------

def _householder_to_last(omega: np.ndarray) -> np.ndarray:
    """Orthogonal matrix H with H @ omega = e_n (last basis vector)."""
    n = omega.shape[0]
    e_last = np.zeros(n)
    e_last[-1] = 1.0
    v = omega - e_last
    norm = np.linalg.norm(v)
    if norm < 1e-14:
        return np.eye(n)
    v = v / norm
    return np.eye(n) - 2.0 * np.outer(v, v)


@dataclass(frozen=True)
class NullFrame:
    """
    Null coordinates (xi'', sigma, tau) after a spatial rotation.

    The rotation sends the chosen direction omega to e_n, so the cone ray
    (omega, 1) becomes the tau axis; sigma = (xi_{n+1} - xi_n)/sqrt(2) and
    tau = (xi_{n+1} + xi_n)/sqrt(2).
    """

    n: int
    rotation: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.n < 2:
            raise InvalidInputError(f"NullFrame needs n >= 2, got {self.n}")
        rotation = np.eye(self.n) if self.rotation is None else np.asarray(self.rotation, dtype=float)
        if rotation.shape != (self.n, self.n):
            raise InvalidInputError(f"rotation must be {self.n}x{self.n}")
        object.__setattr__(self, "rotation", rotation)

    @classmethod
    def aligned(cls, omega: Sequence[float]) -> "NullFrame":
        omega = np.asarray(omega, dtype=float)
        omega = omega / np.linalg.norm(omega)
        return cls(n=omega.shape[0], rotation=_householder_to_last(omega))

    def to_null(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        spatial = xi[..., :-1] @ self.rotation.T
        s2 = math.sqrt(2.0)
        sigma = (xi[..., -1] - spatial[..., -1]) / s2
        tau = (xi[..., -1] + spatial[..., -1]) / s2
        return np.concatenate([spatial[..., :-1], sigma[..., None], tau[..., None]], axis=-1)

    def from_null(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        s2 = math.sqrt(2.0)
        sigma, tau = eta[..., -2], eta[..., -1]
        last = (tau - sigma) / s2
        time = (tau + sigma) / s2
        spatial = np.concatenate([eta[..., :-2], last[..., None]], axis=-1) @ self.rotation
        return np.concatenate([spatial, time[..., None]], axis=-1)


def null_coords(frame: NullFrame, xi) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split frequency points into (xi'', sigma, tau) in the given frame."""
    eta = frame.to_null(xi)
    return eta[..., :-2], eta[..., -2], eta[..., -1]


def from_null_coords(frame: NullFrame, xi_pp, sigma, tau) -> np.ndarray:
    """Inverse of null_coords."""
    xi_pp = np.asarray(xi_pp, dtype=float)
    eta = np.concatenate([xi_pp, np.asarray(sigma, float)[..., None], np.asarray(tau, float)[..., None]], axis=-1)
    return frame.from_null(eta)


def anisotropic_scale(eta, j: int) -> np.ndarray:
    """T_j in null coordinates: (xi'', sigma, tau) -> (2^j xi'', sigma, 4^j tau)."""
    eta = np.array(eta, dtype=float, copy=True)
    eta[..., :-2] *= 2.0 ** j
    eta[..., -1] *= 4.0 ** j
    return eta


# --- Knapp plates -------------------------------------------------------------

def plate_rotation(n: int) -> np.ndarray:
    """Columns map plate-frame axes (eta_1, xi'', eta_{n+1}) to ambient axes."""
    d = n + 1
    q = np.zeros((d, d))
    s2 = 1.0 / math.sqrt(2.0)
    q[0, 0], q[d - 1, 0] = s2, s2          # eta_1 = (xi_1 + xi_{n+1})/sqrt2
    q[0, d - 1], q[d - 1, d - 1] = -s2, s2  # eta_{n+1} = (xi_{n+1} - xi_1)/sqrt2
    for i in range(1, d - 1):
        q[i, i] = 1.0
    return q


@dataclass(frozen=True)
class PlateSpec:
    """Box in plate-frame coordinates (eta_1, xi'', eta_{n+1}); xi = Q eta."""

    R: float
    n: int
    center: np.ndarray = field(repr=False, compare=False)
    half_widths: np.ndarray = field(repr=False, compare=False)

    @property
    def rotation(self) -> np.ndarray:
        return plate_rotation(self.n)

    @property
    def volume(self) -> float:
        return float(np.prod(2.0 * self.half_widths))

    def to_frame(self, xi) -> np.ndarray:
        return np.asarray(xi, dtype=float) @ self.rotation

    def from_frame(self, eta) -> np.ndarray:
        return np.asarray(eta, dtype=float) @ self.rotation.T

    def contains(self, xi) -> np.ndarray:
        eta = self.to_frame(xi)
        return np.all(np.abs(eta - self.center) <= self.half_widths * (1 + 1e-12), axis=-1)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        unit = rng.uniform(-1.0, 1.0, size=(count, self.n + 1))
        return self.from_frame(self.center + unit * self.half_widths)


def knapp_plate(R: float, n: int) -> PlateSpec:
    """
    Knapp plate near the null ray through (1, 0, ..., 0, 1).

    Window: 5R/2 <= xi_1 + xi_{n+1} <= 3R, |xi_1 - xi_{n+1}| <= 1/100,
    |xi''_i| <= sqrt(R)/2.

    Args:
        R: Scale, R >= 16
        n: Spatial dimension

    Returns:
        PlateSpec contained in Gamma_R(1)
    """
    if R < PLATE_SETTINGS["min_R"]:
        raise InvalidInputError(f"knapp_plate needs R >= {PLATE_SETTINGS['min_R']} for containment, got {R}")
    if n < 2:
        raise InvalidInputError(f"knapp_plate needs n >= 2, got {n}")
    s2 = math.sqrt(2.0)
    low, high = PLATE_SETTINGS["sum_low"] * R, PLATE_SETTINGS["sum_high"] * R
    center = np.zeros(n + 1)
    center[0] = (low + high) / (2.0 * s2)
    half = np.empty(n + 1)
    half[0] = (high - low) / (2.0 * s2)
    half[1:n] = PLATE_SETTINGS["transverse_half"] * math.sqrt(R)
    half[n] = PLATE_SETTINGS["diff_half"] / s2
    return PlateSpec(R=float(R), n=n, center=center, half_widths=half)


def plate_in_shell(plate: PlateSpec, samples: int = 1000, seed: int = 0) -> bool:
    """Sampled containment check plate ⊂ Gamma_R(1), corners included."""
    rng = np.random.default_rng(seed)
    points = plate.sample(samples, rng)
    corners = np.array(np.meshgrid(*[[-1.0, 1.0]] * (plate.n + 1), indexing="ij")).reshape(plate.n + 1, -1).T
    points = np.concatenate([points, plate.from_frame(plate.center + corners * plate.half_widths)])
    return bool(np.all(cone_distance(plate.R, points) < 1.0))


@dataclass(frozen=True)
class DualBox:
    """Box centered at 0 in plate-frame spatial coordinates y = Q^T x."""

    half_widths: np.ndarray = field(repr=False, compare=False)
    n: int = 2

    @property
    def sides(self) -> np.ndarray:
        return 2.0 * self.half_widths

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    def to_frame(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ plate_rotation(self.n)

    def from_frame(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) @ plate_rotation(self.n).T

    def contains(self, x, offset=None) -> np.ndarray:
        y = self.to_frame(x)
        if offset is not None:
            y = y - np.asarray(offset, dtype=float)
        return np.all(np.abs(y) <= self.half_widths * (1 + 1e-12), axis=-1)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        unit = rng.uniform(-1.0, 1.0, size=(count, self.n + 1))
        return self.from_frame(unit * self.half_widths)


def dual_box(plate: PlateSpec, constant: float = DUAL_BOX_CONSTANT) -> DualBox:
    """
    Dual box with sides C R^{-1} x C R^{-1/2} x ... x C, last side at most 1.

    Args:
        plate: Knapp plate
        constant: C (1/10 for the lower-bound checks, 1 for plate-union measures)

    Returns:
        DualBox in plate-frame coordinates
    """
    sides = np.empty(plate.n + 1)
    sides[0] = constant / plate.R
    sides[1:plate.n] = constant / math.sqrt(plate.R)
    sides[plate.n] = min(constant, 1.0)
    return DualBox(half_widths=sides / 2.0, n=plate.n)


# --- Whitney caps -------------------------------------------------------------

@dataclass(frozen=True)
class Cap:
    """Level-j cap: radial projection of a dyadic cell on a face of [-1,1]^n."""

    j: int
    k: int
    n: int
    face: int
    cell: Tuple[int, ...]
    center: np.ndarray = field(repr=False, compare=False)
    radius: float = field(compare=False, default=0.0)

    @property
    def axis(self) -> int:
        return self.face // 2

    @property
    def sign(self) -> float:
        return 1.0 if self.face % 2 == 0 else -1.0


class CapLevel:
    """All caps of one level with vectorized box bounds for adjacency queries."""

    def __init__(self, j: int, n: int):
        if n < 2:
            raise InvalidInputError(f"caps need n >= 2, got {n}")
        if j < 0 or j > 20:
            raise InvalidInputError(f"cap level must lie in [0, 20], got {j}")
        self.j, self.n = j, n
        self.per_axis = 2 ** j
        self.per_face = self.per_axis ** (n - 1)
        self.count = 2 * n * self.per_face
        width = 2.0 / self.per_axis

        k = np.arange(self.count)
        face = k // self.per_face
        cells = np.array(np.unravel_index(k % self.per_face, (self.per_axis,) * (n - 1))).T.reshape(self.count, n - 1)
        axis = face // 2
        sign = np.where(face % 2 == 0, 1.0, -1.0)

        lo = np.empty((self.count, n))
        hi = np.empty((self.count, n))
        for i in range(self.count):
            others = [b for b in range(n) if b != axis[i]]
            lo[i, axis[i]] = hi[i, axis[i]] = sign[i]
            lo[i, others] = -1.0 + cells[i] * width
            hi[i, others] = -1.0 + (cells[i] + 1) * width
        self.face, self.cells, self.lo, self.hi = face, cells, lo, hi

        mid = 0.5 * (lo + hi)
        self.centers = mid / np.linalg.norm(mid, axis=1, keepdims=True)

    def cap(self, k: int) -> Cap:
        corners = self._corners(k)
        radius = float(np.max(np.arccos(np.clip(corners @ self.centers[k], -1.0, 1.0))))
        return Cap(j=self.j, k=int(k), n=self.n, face=int(self.face[k]),
                   cell=tuple(int(c) for c in self.cells[k]), center=self.centers[k].copy(), radius=radius)

    def _corners(self, k: int) -> np.ndarray:
        choices = [[self.lo[k, b], self.hi[k, b]] for b in range(self.n)]
        corners = np.array(np.meshgrid(*choices, indexing="ij")).reshape(self.n, -1).T
        return corners / np.linalg.norm(corners, axis=1, keepdims=True)

    def adjacent_mask(self, k: int) -> np.ndarray:
        """Caps whose closed cells intersect cap k (cap k included)."""
        if self.j == 0:
            return np.ones(self.count, dtype=bool)
        eps = 1e-12
        return np.all((self.lo <= self.hi[k] + eps) & (self.lo[k] <= self.hi + eps), axis=1)

    def parent_index(self, k: int) -> int:
        return int(self.face[k] * (self.per_face // (2 ** (self.n - 1)))
                   + np.ravel_multi_index(tuple(self.cells[k] // 2), (self.per_axis // 2,) * (self.n - 1)))

    def children_indices(self, parent: int) -> np.ndarray:
        parent_axis = self.per_axis // 2
        parent_per_face = parent_axis ** (self.n - 1)
        face = parent // parent_per_face
        cell = np.array(np.unravel_index(parent % parent_per_face, (parent_axis,) * (self.n - 1)))
        offsets = np.array(np.meshgrid(*[[0, 1]] * (self.n - 1), indexing="ij")).reshape(self.n - 1, -1).T
        child_cells = 2 * cell[None, :] + offsets
        flat = np.ravel_multi_index(tuple(child_cells.T), (self.per_axis,) * (self.n - 1))
        return face * self.per_face + flat

    def locate(self, directions) -> np.ndarray:
        """Cap index of each direction; points on cell boundaries go to the lower index."""
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        axis = np.argmax(np.abs(directions), axis=1)
        rows = np.arange(directions.shape[0])
        top = directions[rows, axis]
        face = 2 * axis + (top < 0)
        scaled = directions / np.abs(top)[:, None]
        index = np.zeros(directions.shape[0], dtype=np.int64)
        for r in rows:
            others = [b for b in range(self.n) if b != axis[r]]
            u = scaled[r, others]
            cell = np.ceil((u + 1.0) / 2.0 * self.per_axis - 1e-12).astype(int) - 1
            cell = np.clip(cell, 0, self.per_axis - 1)
            index[r] = face[r] * self.per_face + np.ravel_multi_index(tuple(cell), (self.per_axis,) * (self.n - 1))
        return index


@lru_cache(maxsize=32)
def cap_level(j: int, n: int) -> CapLevel:
    return CapLevel(j, n)


def whitney_caps(j: int, n: int) -> List[Cap]:
    """
    Level-j caps on S^{n-1}: 2n * 2^{(n-1)j} projected dyadic face cells.

    Args:
        j: Level, 1 <= j <= 20 (0 gives the 2n face caps)
        n: Dimension of the direction space

    Returns:
        Caps ordered by index k
    """
    level = cap_level(j, n)
    return [level.cap(k) for k in range(level.count)]


def caps_adjacent(a: Cap, b: Cap) -> bool:
    """Closed caps intersect; every pair of level-0 face caps counts as adjacent."""
    if a.j != b.j or a.n != b.n:
        return False
    return bool(cap_level(a.j, a.n).adjacent_mask(a.k)[b.k])


def caps_related(a: Cap, b: Cap) -> bool:
    """
    a ≈ b: same level j >= 1, not adjacent, with adjacent (or equal) parents.
    """
    if a.j != b.j or a.n != b.n or a.j < 1 or a.k == b.k:
        return False
    level = cap_level(a.j, a.n)
    if level.adjacent_mask(a.k)[b.k]:
        return False
    parents = cap_level(a.j - 1, a.n)
    return bool(parents.adjacent_mask(level.parent_index(a.k))[level.parent_index(b.k)])


def related_indices(j: int, n: int, k: int) -> np.ndarray:
    """Indices of level-j caps related to cap k, in increasing order."""
    level = cap_level(j, n)
    parents = cap_level(j - 1, n)
    candidate_parents = np.flatnonzero(parents.adjacent_mask(level.parent_index(k)))
    children = np.concatenate([level.children_indices(p) for p in candidate_parents])
    adjacent = level.adjacent_mask(k)
    return np.sort(children[~adjacent[children]])


def cap_of(direction, j: int, n: int) -> Cap:
    """Level-j cap containing a direction (ties to the lowest index)."""
    level = cap_level(j, n)
    return level.cap(int(level.locate(direction)[0]))


def cap_multiplicity(direction, j: int, n: int) -> int:
    """Number of closed level-j caps containing a direction."""
    direction = np.asarray(direction, dtype=float)
    top = np.max(np.abs(direction))
    point = direction / top
    level = cap_level(j, n)
    eps = 1e-12
    inside = np.all((level.lo - eps <= point) & (point <= level.hi + eps), axis=1)
    return int(np.count_nonzero(inside))


@dataclass
class WhitneyDecomposition:
    """Related pairs per level 1..j0 plus the diagonal caps at level j0."""

    R: float
    n: int
    j0: int
    pairs: Dict[int, List[Tuple[int, int]]]
    diagonal: List[int]

    def locate_pair(self, omega, omega_prime) -> Optional[int]:
        """Level whose related pair captures (omega, omega'), or None for the diagonal part."""
        for j in range(1, self.j0 + 1):
            level = cap_level(j, self.n)
            a, b = level.locate(np.stack([omega, omega_prime]))
            if caps_related(level.cap(int(a)), level.cap(int(b))):
                return j
        return None


def whitney_cover_pairs(R: float, n: int) -> WhitneyDecomposition:
    """
    Whitney decomposition of S^{n-1} x S^{n-1} down to 2^{-j0} ~ R^{-1/2}.

    Args:
        R: Scale, R >= 16
        n: Dimension of the direction space

    Returns:
        WhitneyDecomposition with j0 = ceil(log2 sqrt(R))
    """
    if R < 16:
        raise InvalidInputError(f"whitney_cover_pairs needs R >= 16, got {R}")
    j0 = int(math.ceil(math.log2(math.sqrt(R)) - 1e-12))
    pairs = {}
    for j in range(1, j0 + 1):
        level = cap_level(j, n)
        pairs[j] = [(k, int(m)) for k in range(level.count) for m in related_indices(j, n, k)]
    logger.debug("whitney_decomposition", R=R, n=n, j0=j0, pairs=sum(len(p) for p in pairs.values()))
    return WhitneyDecomposition(R=float(R), n=n, j0=j0, pairs=pairs, diagonal=list(range(cap_level(j0, n).count)))


def export_caps(caps: Sequence[Cap], related: Sequence[Tuple[int, int]] = ()) -> dict:
    """JSON-ready description of caps and related pairs."""
    return {
        "caps": [
            {"level": c.j, "index": c.k, "center": [float(v) for v in c.center], "radius": c.radius}
            for c in caps
        ],
        "related_pairs": [[int(a), int(b)] for a, b in related],
    }


# --- angular supports -----------------------------------------------------------

def directions_of(points) -> np.ndarray:
    """Spatial directions xi'/|xi'| of frequency points."""
    points = np.asarray(points, dtype=float)
    spatial = points[..., :-1]
    return spatial / np.linalg.norm(spatial, axis=-1, keepdims=True)


def angular_support(f, threshold: float = 0.0) -> np.ndarray:
    """
    Directions of the samples where |f| exceeds threshold.

    Args:
        f: Object with frequency_points() and values (a GRID FrequencyFunction)
        threshold: Magnitude cutoff

    Returns:
        Array of unit directions, shape (m, n)
    """
    points = f.frequency_points()
    mask = np.abs(f.values).ravel() > threshold
    return directions_of(points.reshape(-1, points.shape[-1])[mask])


def angular_project(f, cap: Cap):
    """
    f_k^j = chi_cap(xi'/tau) f; samples outside the cap are zeroed.

    Cap membership uses the lowest-index tie rule, so summing over all caps
    of one level returns f exactly.
    """
    points = f.frequency_points()
    flat = points.reshape(-1, points.shape[-1])
    level = cap_level(cap.j, cap.n)
    mask = (level.locate(flat[:, :-1] / flat[:, -1:]) == cap.k).reshape(f.values.shape)
    return f.with_values(np.where(mask, f.values, 0.0))


def support_distance(dirs_a: np.ndarray, dirs_b: np.ndarray) -> float:
    """Minimum Euclidean distance between two direction sets."""
    dirs_a = np.atleast_2d(dirs_a)
    dirs_b = np.atleast_2d(dirs_b)
    if dirs_a.size == 0 or dirs_b.size == 0:
        return float("inf")
    gram = np.clip(dirs_a @ dirs_b.T, -1.0, 1.0)
    return float(np.sqrt(max(0.0, 2.0 - 2.0 * gram.max())))


# --- transversal supports --------------------------------------------------------

@dataclass(frozen=True)
class ConeSector:
    """Points of Gamma_R(delta) whose spatial direction lies within half_angle of center."""

    R: float
    n: int
    center: np.ndarray = field(repr=False, compare=False)
    half_angle: float = 0.0
    delta: float = 1.0

    def contains(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        cosine = directions_of(xi) @ self.center
        return (cosine >= math.cos(self.half_angle)) & (cone_distance(self.R, xi) < self.delta)


@dataclass(frozen=True)
class NullWindow:
    """{|xi''/tau - sign 2^{-j} e_1| <= 2^{-j-2}} inside Gamma_R(delta), in a null frame."""

    R: float
    n: int
    j: int
    sign: float
    frame: NullFrame = field(compare=False, default=None)
    delta: float = 1.0

    def contains(self, xi) -> np.ndarray:
        xi_pp, _, tau = null_coords(self.frame, xi)
        target = np.zeros(self.n - 1)
        target[0] = self.sign * 2.0 ** (-self.j)
        offset = np.linalg.norm(xi_pp / tau[..., None] - target, axis=-1)
        return (offset <= 2.0 ** (-self.j - 2)) & (tau > 0) & (cone_distance(self.R, xi) < self.delta)

    @property
    def center_direction(self) -> np.ndarray:
        """Spatial direction of the cone ray through the window center."""
        ray = np.zeros(self.n)
        ray[0] = self.sign * math.sqrt(2.0) * 2.0 ** (-self.j)
        ray[-1] = 1.0
        ray = ray / np.linalg.norm(ray)
        return ray @ self.frame.rotation


def transversal_pair_supports(R: float, n: int, separation: float = 0.01, j: int = None):
    """
    Two angularly separated subregions of Gamma_R(1).

    Default: sectors of half-angle pi/8 around +e_1 and -e_1 (chordal
    separation 2cos(pi/8) >= separation). With j given, the null-frame
    windows at +-2^{-j} e_1 of width 2^{-j-2}.

    Args:
        R: Cone scale
        n: Spatial dimension
        separation: Required chordal separation, in (0, 1]
        j: Optional level for the 2^{-j}-separated pair

    Returns:
        (region_1, region_2) with .contains(xi)
    """
    if not 0 < separation <= 1:
        raise InvalidInputError(f"separation must lie in (0, 1], got {separation}")
    if j is not None:
        if j < 1:
            raise InvalidInputError(f"j must be >= 1, got {j}")
        frame = NullFrame(n)
        return NullWindow(R, n, j, 1.0, frame), NullWindow(R, n, j, -1.0, frame)
    half_angle = math.pi / 8
    e1 = np.zeros(n)
    e1[0] = 1.0
    return ConeSector(R, n, e1, half_angle), ConeSector(R, n, -e1, half_angle)


if __name__ == "__main__":
    import argparse
    import json

    parser = argparse.ArgumentParser(description="Cone geometry utilities")
    parser.add_argument("--n", type=int, default=2)
    parser.add_argument("--R", type=float, default=256)
    args = parser.parse_args()

    decomposition = whitney_cover_pairs(args.R, args.n)
    summary = {j: len(p) for j, p in decomposition.pairs.items()}
    print(json.dumps({"j0": decomposition.j0, "related_pairs_per_level": summary}, indent=2))
    print(f"|Gamma_R(1)| = {cone_shell_volume(args.R, args.n):.6e}")
