#!/usr/bin/env python3
"""
Wave Packets - Gaussian packet frame on thin cone slabs, tube geometry and the tube/cube split
Part of Layer 3: Tools (deterministic operations)
Architecture SOP: architecture/05_numerical_contracts.md

Functions supported in Gamma_1(1/R) are carried by their profile on the
spatial frequency plane, F(eta, tau) = a(eta) b(R(tau - |eta|)) with b a
fixed raised-cosine bump on [-1, 1]. Then

    F^(x', t) = E a(x', t) * b^(t/R) / R,
    E a(x', t) = integral of e^{-i(x'.eta + t|eta|)} a(eta) deta.

Packets are phi_w(eta) = g(eta - v) e^{i y.eta}, g a unit Gaussian of width
R^{-1/2}, with y in a lattice of spacing ~R^{1/2} over the periodic cell
[-2R, 2R)^n of the sampling grid and v in R^{-1/2} Z^n, 1/2 <= |v| <= 4.
Their extensions travel along x' = y - t v/|v|. Coefficients for one
direction come from folding the windowed profile onto the position
lattice period and taking one FFT.
"""

import os
import sys
import math
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy import fft

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tools.fourier_engine import FrequencyGrid, grid_function, tukey_ft, tukey_l2_squared, tukey_window
from tools.lab_errors import InvalidInputError, QuadratureNotConvergedError
from tools.lab_logging import get_logger

logger = get_logger(__name__)

PACKET_SETTINGS = {
    "min_R": 16,
    "max_R": 512,
    "max_R_n3": 64,
    "direction_min": 0.5,
    "direction_max": 4.0,
    "shell_inner": 1.0,
    "shell_outer": 2.0,
    "patch_sigmas": 6.0,
    "grid_margin_sigmas": 13.0,
    "thickness_flat": 0.5,
    "thickness_taper": 0.5,
    "ripple_limit": 1e-2,
    "decay_threshold_power": -2.0,
    "decay_distance_factor": 3.0,
    "cube_dilation": 2.0,
    "slices_per_cube": 4,
}


@dataclass(frozen=True)
class PacketIndex:
    """w = (y, v): direction row into the dictionary and position index in FFT order."""

    direction: int
    position: Tuple[int, ...]
    y: np.ndarray = field(repr=False, compare=False)
    v: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True, eq=False)
class Tube:
    """T_w = {(x', t): |x' - (y + t axis)| <= R^{1/2}, |t| <= R} with axis = -v/|v|."""

    index: PacketIndex
    R: float
    axis: np.ndarray = field(repr=False, compare=False)

    @property
    def radius(self) -> float:
        return math.sqrt(self.R)

    def axis_distance(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        center = self.index.y + x[:, -1:] * self.axis
        return np.linalg.norm(x[:, :-1] - center, axis=1)

    def distance(self, x) -> np.ndarray:
        """Distance to the tube core, measured across the axis at the same time."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        across = np.maximum(self.axis_distance(x) - self.radius, 0.0)
        beyond = np.maximum(np.abs(x[:, -1]) - self.R, 0.0)
        return np.hypot(across, beyond)

    def contains(self, x) -> np.ndarray:
        return self.distance(x) == 0.0


@dataclass(frozen=True, eq=False)
class SpaceTimeCube:
    center: np.ndarray
    side: float

    def dilated(self, factor: float) -> "SpaceTimeCube":
        return SpaceTimeCube(self.center, self.side * factor)


def _signed(index: np.ndarray, period: int) -> np.ndarray:
    return np.where(index < (period + 1) // 2, index, index - period)


class WavePacketDictionary:
    """
    Packet lattices, tube geometry and profiles at one scale R.

    The profile grid has spacing h = 2pi/(4R) so that spatial transforms are
    periodic on [-2R, 2R)^n; the position lattice has M points per axis with
    M h times the position spacing equal to 2pi.
    """

    def __init__(self, R: float, n: int = 2):
        if n not in (2, 3):
            raise InvalidInputError(f"packet dictionaries support n = 2 or 3, got {n}")
        top = PACKET_SETTINGS["max_R"] if n == 2 else PACKET_SETTINGS["max_R_n3"]
        if not PACKET_SETTINGS["min_R"] <= R <= top:
            raise InvalidInputError(f"R must lie in [{PACKET_SETTINGS['min_R']}, {top}] for n={n}, got {R}")
        self.R = float(R)
        self.n = n
        root = math.sqrt(self.R)
        self.period = 4.0 * self.R
        self.step = 2.0 * math.pi / self.period
        self.positions_per_axis = max(1, int(round(self.period / root)))
        self.position_spacing = self.period / self.positions_per_axis
        self.direction_spacing = 1.0 / root
        self.patch_radius = PACKET_SETTINGS["patch_sigmas"] / root

        reach = PACKET_SETTINGS["shell_outer"] + PACKET_SETTINGS["grid_margin_sigmas"] / root
        self.half_nodes = int(math.ceil(reach / self.step))
        size = 2 * self.half_nodes + 1
        self.grid = FrequencyGrid(origin=np.full(n, -self.half_nodes * self.step),
                                  spacing=np.full(n, self.step), shape=(size,) * n)

        self.direction_lattice = self._direction_lattice()
        self.directions = self.direction_lattice * self.direction_spacing
        self.thickness_l2 = tukey_l2_squared(PACKET_SETTINGS["thickness_flat"], PACKET_SETTINGS["thickness_taper"])
        # p_w = (G_w)^ has unit L^2 norm on R^{n+1} when G_w = nu phi_w b(R(tau - |eta|))
        self.normalization = (2.0 * math.pi) ** (-(n + 1) / 2.0) * math.sqrt(self.R / self.thickness_l2)
        logger.debug("packet_dictionary_built", R=self.R, n=n, directions=len(self.directions),
                     positions=self.positions_per_axis ** n, grid=size)

    def _direction_lattice(self) -> np.ndarray:
        top = int(math.floor(PACKET_SETTINGS["direction_max"] / self.direction_spacing))
        axis = np.arange(-top, top + 1)
        lattice = np.stack(np.meshgrid(*[axis] * self.n, indexing="ij"), axis=-1).reshape(-1, self.n)
        norms = np.linalg.norm(lattice, axis=1) * self.direction_spacing
        keep = (norms >= PACKET_SETTINGS["direction_min"]) & (norms <= PACKET_SETTINGS["direction_max"])
        return lattice[keep]

    # --- enumeration -----------------------------------------------------------

    @property
    def direction_count(self) -> int:
        return len(self.directions)

    @property
    def position_count(self) -> int:
        return self.positions_per_axis ** self.n

    def __len__(self) -> int:
        return self.direction_count * self.position_count

    @property
    def frame_constant(self) -> float:
        """Nominal frame bound (2pi)^n (R^{1/2} / position spacing)^n."""
        return (2.0 * math.pi * math.sqrt(self.R) / self.position_spacing) ** self.n

    def positions(self) -> np.ndarray:
        """All lattice points y in FFT order, shape (M^n, n)."""
        idx = np.arange(self.positions_per_axis)
        mesh = np.stack(np.meshgrid(*[idx] * self.n, indexing="ij"), axis=-1).reshape(-1, self.n)
        return _signed(mesh, self.positions_per_axis) * self.position_spacing

    def index(self, direction: int, position: Sequence[int]) -> PacketIndex:
        position = tuple(int(p) % self.positions_per_axis for p in position)
        y = _signed(np.array(position), self.positions_per_axis) * self.position_spacing
        return PacketIndex(direction=int(direction), position=position, y=y, v=self.directions[direction].copy())

    def nearest_index(self, y, v) -> PacketIndex:
        v = np.asarray(v, dtype=float)
        row = int(np.argmin(np.linalg.norm(self.directions - v, axis=1)))
        position = np.round(np.asarray(y, dtype=float) / self.position_spacing).astype(int)
        return self.index(row, position)

    def tube(self, index: PacketIndex) -> Tube:
        return Tube(index=index, R=self.R, axis=-index.v / np.linalg.norm(index.v))

    def tubes(self, indices: Sequence[PacketIndex]) -> List[Tube]:
        return [self.tube(w) for w in indices]

    # --- packet profiles -----------------------------------------------------------

    def gaussian(self, u) -> np.ndarray:
        """One axis of g: (R/pi)^{1/4} e^{-R u^2 / 2}."""
        return (self.R / math.pi) ** 0.25 * np.exp(-0.5 * self.R * np.asarray(u) ** 2)

    def patch(self, v) -> Tuple[Tuple[slice, ...], List[np.ndarray], List[np.ndarray]]:
        """
        Grid window around v of half-width patch_radius.

        Returns:
            (slices into the grid, per-axis Gaussian factors g(eta_i - v_i),
            per-axis fold indices (k - K) mod M)
        """
        slices, factors, folds = [], [], []
        size = self.grid.shape[0]
        for a in range(self.n):
            lo = max(0, int(math.ceil((v[a] - self.patch_radius) / self.step)) + self.half_nodes)
            hi = min(size - 1, int(math.floor((v[a] + self.patch_radius) / self.step)) + self.half_nodes)
            k = np.arange(lo, hi + 1)
            slices.append(slice(lo, hi + 1))
            factors.append(self.gaussian((k - self.half_nodes) * self.step - v[a]))
            folds.append((k - self.half_nodes) % self.positions_per_axis)
        return tuple(slices), factors, folds

    @staticmethod
    def _outer(factors: Sequence[np.ndarray]) -> np.ndarray:
        out = factors[0]
        for f in factors[1:]:
            out = np.multiply.outer(out, f)
        return out

    def analyze(self, values: np.ndarray, row: int) -> np.ndarray:
        """<a, phi_{y,v}> for every y at direction row, in FFT order."""
        slices, factors, folds = self.patch(self.directions[row])
        window = values[slices] * self._outer(factors)
        folded = np.zeros((self.positions_per_axis,) * self.n, dtype=complex)
        np.add.at(folded, np.ix_(*folds), window)
        return fft.fftn(folded) * self.step ** self.n

    def synthesize_into(self, out: np.ndarray, coefficients: np.ndarray, row: int, scale: complex = 1.0):
        """out += scale * sum over y of c_y phi_{y,v} on the patch of direction row."""
        if not np.any(coefficients):
            return
        slices, factors, folds = self.patch(self.directions[row])
        periodic = fft.ifftn(coefficients) * self.positions_per_axis ** self.n
        out[slices] += scale * periodic[np.ix_(*folds)] * self._outer(factors)

    def profile(self, index: PacketIndex) -> np.ndarray:
        """phi_w on the profile grid (zero outside its patch)."""
        coefficients = np.zeros((self.positions_per_axis,) * self.n, dtype=complex)
        coefficients[index.position] = 1.0
        out = np.zeros(self.grid.shape, dtype=complex)
        self.synthesize_into(out, coefficients, index.direction)
        return out

    def frame_function(self, rows: Sequence[int]) -> np.ndarray:
        """D(eta) = (M h)^n sum over the given directions of g(eta - v)^2."""
        out = np.zeros(self.grid.shape)
        for row in rows:
            slices, factors, _ = self.patch(self.directions[row])
            out[slices] += self._outer([f * f for f in factors])
        return out * (self.positions_per_axis * self.step) ** self.n

    def active_directions(self, mask: np.ndarray) -> np.ndarray:
        """Direction rows whose patch meets the support mask (summed-area table query)."""
        if not np.any(mask):
            return np.zeros(0, dtype=int)
        table = np.pad(mask.astype(np.int64), [(1, 0)] * self.n)
        for a in range(self.n):
            table = np.cumsum(table, axis=a)
        size = self.grid.shape[0]
        lo = np.clip(np.ceil((self.directions - self.patch_radius) / self.step).astype(int) + self.half_nodes, 0, size)
        hi = np.clip(np.floor((self.directions + self.patch_radius) / self.step).astype(int) + self.half_nodes + 1, 0, size)
        total = np.zeros(len(self.directions), dtype=np.int64)
        for corner in itertools.product((0, 1), repeat=self.n):
            idx = tuple(np.where(corner[a], hi[:, a], lo[:, a]) for a in range(self.n))
            sign = (-1) ** (self.n - sum(corner))
            total += sign * table[idx]
        return np.nonzero((total > 0) & np.all(hi > lo, axis=1))[0]

    # --- spatial side -----------------------------------------------------------------

    def envelope(self, t) -> np.ndarray:
        """Time factor b^(t/R)/R of every slab function."""
        return tukey_ft(np.asarray(t, dtype=float) / self.R, 0.0, PACKET_SETTINGS["thickness_flat"],
                        PACKET_SETTINGS["thickness_taper"]) / self.R

    def evaluate(self, indices: Sequence[PacketIndex], x, t) -> np.ndarray:
        """
        p_w(x, t) for each index at each space-time point, by direct summation over the packet patch.

        Args:
            indices: Packet indices
            x: (m, n) spatial points
            t: (m,) times

        Returns:
            Complex array of shape (len(indices), m)
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.broadcast_to(np.asarray(t, dtype=float), (len(x),))
        out = np.empty((len(indices), len(x)), dtype=complex)
        envelope = self.envelope(t)
        for i, w in enumerate(indices):
            slices, factors, _ = self.patch(w.v)
            axes = [(np.arange(s.start, s.stop) - self.half_nodes) * self.step for s in slices]
            eta = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)
            phi = self._outer(factors).ravel() * np.exp(1j * eta @ w.y)
            speed = np.linalg.norm(eta, axis=1)
            chunk = max(1, 4_000_000 // len(eta))
            for start in range(0, len(x), chunk):
                sl = slice(start, start + chunk)
                phase = np.exp(-1j * (x[sl] @ eta.T + t[sl, None] * speed[None, :]))
                out[i, sl] = phase @ phi
        return out * self.step ** self.n * self.normalization * envelope[None, :]

    def frame_bound(self, subset: Sequence[PacketIndex]) -> float:
        """||sum over S of p_w||_2^2 / #S, computed on the frequency side by Plancherel."""
        if not subset:
            return 0.0
        total = np.zeros(self.grid.shape, dtype=complex)
        for w in subset:
            total += self.profile(w)
        energy = float(np.sum(np.abs(total) ** 2)) * self.step ** self.n * self.thickness_l2 / self.R
        return energy * self.normalization ** 2 * (2.0 * math.pi) ** (self.n + 1) / len(subset)

    def spatial_axis(self) -> np.ndarray:
        size = self.grid.shape[0]
        return (np.arange(size) - self.half_nodes) * (self.period / size)


def packet_dictionary(R: float, n: int = 2) -> WavePacketDictionary:
    return WavePacketDictionary(R, n)


# --- slab data -----------------------------------------------------------------------------

@dataclass(eq=False)
class ConeSlabData:
    """F(eta, tau) = a(eta) b(R(tau - |eta|)) with the profile a sampled on the dictionary grid."""

    dictionary: WavePacketDictionary
    values: np.ndarray
    label: str = ""

    @property
    def profile_norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.values) ** 2)) * self.dictionary.step ** self.dictionary.n)

    @property
    def norm(self) -> float:
        """||F||_2 on R^{n+1}."""
        return self.profile_norm * math.sqrt(self.dictionary.thickness_l2 / self.dictionary.R)

    def as_frequency_function(self):
        return grid_function(self.dictionary.grid, self.values)

    def __add__(self, other: "ConeSlabData") -> "ConeSlabData":
        return ConeSlabData(self.dictionary, self.values + other.values, label=self.label)

    def __sub__(self, other: "ConeSlabData") -> "ConeSlabData":
        return ConeSlabData(self.dictionary, self.values - other.values, label=self.label)

    def extension_slice(self, t: float) -> np.ndarray:
        """F^(x', t) on the periodic spatial grid dictionary.spatial_axis()^n."""
        d = self.dictionary
        speed = np.linalg.norm(d.grid.points(), axis=-1)
        shifted = self.values * np.exp(-1j * t * speed)
        field_t = fft.fftshift(fft.fftn(fft.ifftshift(shifted))) * d.step ** d.n
        return field_t * d.envelope(t)


def _shell_radius(dictionary: WavePacketDictionary) -> np.ndarray:
    return np.linalg.norm(dictionary.grid.points(), axis=-1)


def slab_data(dictionary: WavePacketDictionary, values, label: str = "") -> ConeSlabData:
    """Wrap a profile, checking that it vanishes off the annulus 1 <= |eta| <= 2."""
    values = np.asarray(values, dtype=complex)
    if values.shape != dictionary.grid.shape:
        raise InvalidInputError(f"profile shape {values.shape} differs from the grid {dictionary.grid.shape}")
    radius = _shell_radius(dictionary)
    outside = (radius < PACKET_SETTINGS["shell_inner"]) | (radius > PACKET_SETTINGS["shell_outer"])
    if np.any(values[outside] != 0):
        raise InvalidInputError("profile is not supported in Gamma_1(1/R)")
    return ConeSlabData(dictionary, values, label=label)


def random_slab_data(dictionary: WavePacketDictionary, seed: int = 0, direction=None,
                     half_angle: float = None) -> ConeSlabData:
    """
    White complex noise under a smooth radial taper on [1, 2], optionally restricted to an angular sector.

    Args:
        dictionary: Packet dictionary fixing R and the grid
        seed: RNG seed
        direction: Sector axis (unit vector in R^n); None for the full annulus
        half_angle: Sector half-angle in radians

    Returns:
        ConeSlabData normalized to ||F||_2 = 1
    """
    rng = np.random.default_rng(seed)
    points = dictionary.grid.points()
    radius = np.linalg.norm(points, axis=-1)
    taper = tukey_window(radius - 1.5, 0.25, 0.25)
    if direction is not None:
        axis = np.asarray(direction, dtype=float)
        axis = axis / np.linalg.norm(axis)
        cosine = np.clip(points @ axis / np.where(radius > 0, radius, 1.0), -1.0, 1.0)
        angle = np.arccos(cosine)
        taper = taper * tukey_window(angle, 0.5 * half_angle, 0.5 * half_angle)
    noise = rng.normal(size=points.shape[:-1]) + 1j * rng.normal(size=points.shape[:-1])
    data = slab_data(dictionary, np.where(taper > 0, noise * taper, 0.0), label=f"random_{seed}")
    return ConeSlabData(dictionary, data.values / data.norm, label=data.label)


def packet_data(dictionary: WavePacketDictionary, index: PacketIndex) -> ConeSlabData:
    """Single packet profile cut to the annulus."""
    radius = _shell_radius(dictionary)
    inside = (radius >= PACKET_SETTINGS["shell_inner"]) & (radius <= PACKET_SETTINGS["shell_outer"])
    return slab_data(dictionary, np.where(inside, dictionary.profile(index), 0.0), label="packet")


# --- expansions ----------------------------------------------------------------------------

@dataclass(eq=False)
class PacketExpansion:
    """
    F = sum over w of c_w G_w with G_w = nu phi_w b(R(tau - |eta|)) and p_w = (G_w)^.

    coefficients[i] holds c_{y, v} for v = directions[rows[i]] over the
    position lattice in FFT order.
    """

    dictionary: WavePacketDictionary
    rows: np.ndarray
    coefficients: np.ndarray
    source_norm: float
    frame_constant: float
    ripple: float = 0.0

    @property
    def coefficient_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coefficients) ** 2)))

    @property
    def coefficient_ratio(self) -> float:
        """(sum |c_w|^2)^{1/2} / ||F||_2."""
        return self.coefficient_norm / self.source_norm if self.source_norm > 0 else 0.0

    def restricted(self, mask: np.ndarray) -> "PacketExpansion":
        return PacketExpansion(self.dictionary, self.rows, np.where(mask, self.coefficients, 0.0),
                               self.source_norm, self.frame_constant, self.ripple)

    def reconstruct(self) -> ConeSlabData:
        d = self.dictionary
        out = np.zeros(d.grid.shape, dtype=complex)
        for i, row in enumerate(self.rows):
            d.synthesize_into(out, self.coefficients[i], row, scale=d.normalization)
        return ConeSlabData(d, out, label="reconstruction")

    def indices(self, mask: np.ndarray = None) -> List[PacketIndex]:
        mask = np.abs(self.coefficients) > 0 if mask is None else mask
        return [self.dictionary.index(self.rows[i], pos) for i, *pos in zip(*np.nonzero(mask))]

    def mass_near(self, index: PacketIndex, radius: int = 3) -> float:
        """Share of sum |c_w|^2 within radius lattice steps of index in both y and v."""
        d = self.dictionary
        lattice = d.direction_lattice[self.rows]
        near_v = np.max(np.abs(lattice - d.direction_lattice[index.direction]), axis=1) <= radius
        idx = np.arange(d.positions_per_axis)
        offsets = [np.abs(_signed((idx - p) % d.positions_per_axis, d.positions_per_axis)) for p in index.position]
        near_y = WavePacketDictionary._outer([(o <= radius).astype(float) for o in offsets]) > 0
        power = np.abs(self.coefficients) ** 2
        total = float(np.sum(power))
        return float(np.sum(power[near_v][:, near_y])) / total if total > 0 else 0.0

    def summary(self, limit: int = 50) -> List[Dict]:
        """Largest coefficients with their tube geometry, for JSON export."""
        flat = np.abs(self.coefficients).ravel()
        order = np.argsort(-flat, kind="stable")[:limit]
        rows = []
        for k in order:
            if flat[k] == 0:
                break
            i, *pos = np.unravel_index(k, self.coefficients.shape)
            w = self.dictionary.index(self.rows[i], pos)
            tube = self.dictionary.tube(w)
            rows.append({"direction": w.direction, "position": list(w.position), "y": w.y.tolist(),
                         "v": w.v.tolist(), "axis": tube.axis.tolist(), "radius": tube.radius,
                         "abs_coefficient": float(flat[k])})
        return rows


def decompose(F: ConeSlabData, jobs: int = 1) -> PacketExpansion:
    """
    Packet coefficients by frame correlation with dual normalization.

    c_w = <a, phi_w> / (nu A), A the frame function averaged over supp a;
    the frame is reported ill-conditioned when D/A varies by more than 1%.

    Args:
        F: Slab data supported in Gamma_1(1/R)
        jobs: Worker threads over directions

    Returns:
        PacketExpansion
    """
    d = F.dictionary
    F = slab_data(d, F.values, label=F.label)
    live = F.values != 0
    rows = d.active_directions(live)
    shape = (len(rows),) + (d.positions_per_axis,) * d.n
    if not len(rows):
        return PacketExpansion(d, rows, np.zeros(shape, dtype=complex), 0.0, d.frame_constant, 0.0)
    frame = d.frame_function(rows)[live]
    constant = float(np.mean(frame))
    ripple = float(np.max(np.abs(frame / constant - 1.0)))
    if ripple > PACKET_SETTINGS["ripple_limit"]:
        raise QuadratureNotConvergedError(f"packet frame ripple {ripple:.3g} on the support", coarse=ripple,
                                          fine=PACKET_SETTINGS["ripple_limit"])
    coefficients = np.empty(shape, dtype=complex)
    scale = 1.0 / (d.normalization * constant)

    def work(block):
        for i in block:
            coefficients[i] = d.analyze(F.values, rows[i]) * scale

    blocks = np.array_split(np.arange(len(rows)), max(1, jobs))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(work, blocks))
    else:
        work(blocks[0])
    logger.debug("packets_decomposed", R=d.R, directions=len(rows), ripple=ripple)
    return PacketExpansion(d, rows, coefficients, F.norm, constant, ripple)


def reconstruction_error(F: ConeSlabData, expansion: PacketExpansion) -> float:
    """Relative L^2 error of sum c_w p_w against F^; by Plancherel it bounds the error on B(0, R)."""
    if F.norm == 0:
        return 0.0
    return (expansion.reconstruct() - F).norm / F.norm


def support_inflation(data: ConeSlabData, tolerance: float = 1e-6) -> float:
    """C_d with |a| >= tolerance * max|a| only inside Gamma_1(C_d / R)."""
    magnitude = np.abs(data.values)
    if not np.any(magnitude):
        return 1.0
    radius = _shell_radius(data.dictionary)
    significant = magnitude >= tolerance * magnitude.max()
    overflow = np.maximum(PACKET_SETTINGS["shell_inner"] - radius, 0.0) + np.maximum(radius - PACKET_SETTINGS["shell_outer"], 0.0)
    return 1.0 + data.dictionary.R * float(np.max(overflow[significant]))


# --- tube decay -----------------------------------------------------------------------------

def _perpendicular(axis: np.ndarray) -> np.ndarray:
    trial = np.eye(len(axis))[int(np.argmin(np.abs(axis)))]
    perp = trial - (trial @ axis) * axis
    return perp / np.linalg.norm(perp)


def tube_decay_check(expansion: PacketExpansion, delta: float = 0.3, packets: int = 3,
                     samples: int = 24, distance_factor: float = None) -> Dict:
    """
    Off-tube decay of the strongest packets of an expansion.

    Samples run across the tube axis at t in {-R, -R/2, 0, R/2, R}. The
    report holds the largest |p_w| / max|p_w| at distance >=
    distance_factor * R^{1/2+delta} from T_w, the threshold R^{-2}, and
    whether the ratio decays monotonically along the perpendicular at t = 0.

    Args:
        expansion: Packet expansion supplying the packets to test
        delta: Exponent in [0.1, 0.3]
        packets: Number of packets sampled
        samples: Distances per perpendicular
        distance_factor: Multiple of R^{1/2+delta} where the threshold applies

    Returns:
        Report dict
    """
    if not 0.1 <= delta <= 0.3:
        raise InvalidInputError(f"delta must lie in [0.1, 0.3], got {delta}")
    d = expansion.dictionary
    factor = PACKET_SETTINGS["decay_distance_factor"] if distance_factor is None else distance_factor
    scale = d.R ** (0.5 + delta)
    far = factor * scale
    threshold = d.R ** PACKET_SETTINGS["decay_threshold_power"]
    distances = np.unique(np.concatenate([np.linspace(0.0, 1.5 * far, samples), [scale, far]]))
    times = d.R * np.array([-1.0, -0.5, 0.0, 0.5, 1.0])

    flat = np.abs(expansion.coefficients).ravel()
    chosen = np.argsort(-flat, kind="stable")[:packets]
    reports = []
    for k in chosen:
        if flat[k] == 0:
            continue
        i, *pos = np.unravel_index(k, expansion.coefficients.shape)
        w = d.index(expansion.rows[i], pos)
        tube = d.tube(w)
        perp = _perpendicular(tube.axis)
        xs, ts = [], []
        for t in times:
            center = w.y + t * tube.axis
            xs.append(center[None, :] + (tube.radius + distances)[:, None] * perp[None, :])
            xs.append(center[None, :])
            ts.extend([t] * (len(distances) + 1))
        values = np.abs(d.evaluate([w], np.concatenate(xs), np.array(ts))[0])
        blocks = values.reshape(len(times), len(distances) + 1)
        peak = float(np.max(blocks[:, -1]))
        ratios = blocks[:, :-1] / peak
        beyond = distances >= far - 1e-9
        middle = int(np.argmin(np.abs(times)))
        reports.append({
            "index": {"direction": w.direction, "position": list(w.position)},
            "on_tube_ratio": float(blocks[middle, -1] / peak),
            "max_ratio_beyond": float(np.max(ratios[:, beyond])),
            "ratio_at_scale": float(np.max(ratios[:, np.isclose(distances, scale)])),
            "monotone": bool(np.all(np.diff(ratios[middle]) <= 1e-12)),
        })
    worst = max((r["max_ratio_beyond"] for r in reports), default=0.0)
    return {
        "R": d.R, "delta": delta, "distance": far, "threshold": threshold,
        "max_ratio_beyond": worst, "packets": reports,
        "passed": bool(worst <= threshold and all(r["monotone"] for r in reports)),
    }


# --- tube / cube relation ------------------------------------------------------------------

def cube_cover(R: float, n: int, delta: float) -> List[SpaceTimeCube]:
    """Cubes of side R^{1-delta} centered on a grid covering [-R, R]^{n+1}."""
    side = R ** (1.0 - delta)
    count = int(math.ceil(2.0 * R / side - 1e-9))
    centers_1d = (np.arange(count) - (count - 1) / 2.0) * side
    mesh = np.stack(np.meshgrid(*[centers_1d] * (n + 1), indexing="ij"), axis=-1).reshape(-1, n + 1)
    return [SpaceTimeCube(center=c, side=side) for c in mesh]


def related_mask(expansion: PacketExpansion, cube: SpaceTimeCube,
                 dilation: float = None) -> np.ndarray:
    """
    w ~ q: the tube of w meets the cube dilated by dilation (2 by default).

    Tube cross-sections are treated as squares of half-side R^{1/2}, so the
    test clips the axis segment against the dilated cube inflated by R^{1/2}.
    """
    d = expansion.dictionary
    dilation = PACKET_SETTINGS["cube_dilation"] if dilation is None else dilation
    half = 0.5 * cube.side * dilation
    t_lo = max(-d.R, cube.center[-1] - half)
    t_hi = min(d.R, cube.center[-1] + half)
    shape = expansion.coefficients.shape
    if t_lo > t_hi:
        return np.zeros(shape, dtype=bool)
    reach = half + math.sqrt(d.R)
    v = d.directions[expansion.rows]
    axis = -v / np.linalg.norm(v, axis=1, keepdims=True)
    y = d.positions()
    lo = np.full((len(v), len(y)), t_lo)
    hi = np.full((len(v), len(y)), t_hi)
    for a in range(d.n):
        offset = (cube.center[a] - y[:, a])[None, :]
        speed = axis[:, a:a + 1]
        moving = np.abs(speed) > 1e-12
        safe = np.where(moving, speed, 1.0)
        first = (offset - reach) / safe
        second = (offset + reach) / safe
        enter = np.where(moving, np.minimum(first, second), np.where(np.abs(offset) <= reach, -np.inf, np.inf))
        leave = np.where(moving, np.maximum(first, second), np.where(np.abs(offset) <= reach, np.inf, -np.inf))
        lo = np.maximum(lo, enter)
        hi = np.minimum(hi, leave)
    return (lo <= hi).reshape(shape)


def sim_split(F: PacketExpansion, cube: SpaceTimeCube, delta: float = None) -> Tuple[PacketExpansion, PacketExpansion]:
    """(F_q, F_not_q): the coefficient partition by the tube/cube relation."""
    if delta is not None and not math.isclose(cube.side, F.dictionary.R ** (1.0 - delta), rel_tol=1e-9):
        raise InvalidInputError(f"cube side {cube.side} is not R^(1-delta) for delta={delta}")
    mask = related_mask(F, cube)
    return F.restricted(mask), F.restricted(~mask)


def split_energy(expansion: PacketExpansion, delta: float = 0.1) -> Dict:
    """sum over cubes q of ||F_q||_2^2 / ||F||_2^2 over the cover of B(0, R)."""
    cubes = cube_cover(expansion.dictionary.R, expansion.dictionary.n, delta)
    total = 0.0
    worst_inflation = 1.0
    for cube in cubes:
        part, _ = sim_split(expansion, cube, delta)
        if not np.any(part.coefficients):
            continue
        data = part.reconstruct()
        total += data.norm ** 2
        worst_inflation = max(worst_inflation, support_inflation(data))
    ratio = total / expansion.source_norm ** 2 if expansion.source_norm > 0 else 0.0
    return {"R": expansion.dictionary.R, "delta": delta, "cubes": len(cubes), "ratio": ratio,
            "support_inflation": worst_inflation}


def _cube_l2(F: ConeSlabData, G: ConeSlabData, cube: SpaceTimeCube) -> float:
    d = F.dictionary
    axis = d.spatial_axis()
    half = 0.5 * cube.side
    t_lo, t_hi = max(-d.R, cube.center[-1] - half), min(d.R, cube.center[-1] + half)
    if t_lo >= t_hi:
        return 0.0
    inside = [np.abs(axis - cube.center[a]) <= half for a in range(d.n)]
    if not all(np.any(m) for m in inside):
        return 0.0
    count = PACKET_SETTINGS["slices_per_cube"]
    dt = (t_hi - t_lo) / count
    dx = (axis[1] - axis[0]) ** d.n
    total = 0.0
    for k in range(count):
        t = t_lo + (k + 0.5) * dt
        product = F.extension_slice(t) * G.extension_slice(t)
        total += float(np.sum(np.abs(product[np.ix_(*inside)]) ** 2)) * dx * dt
    return math.sqrt(total)


def bilinear_local(F: PacketExpansion, G: PacketExpansion, delta: float = 0.1) -> Dict:
    """
    max over cubes q of ||F_q^ G_not_q^||_{L^2(q)} / (||F||_2 ||G||_2).

    Args:
        F: Expansion of the first function
        G: Expansion of the second, angularly separated from F
        delta: Cube side exponent

    Returns:
        Report with the maximizing cube and the ratio
    """
    d = F.dictionary
    best, where = 0.0, None
    for cube in cube_cover(d.R, d.n, delta):
        near, _ = sim_split(F, cube, delta)
        _, far = sim_split(G, cube, delta)
        if not np.any(near.coefficients) or not np.any(far.coefficients):
            continue
        value = _cube_l2(near.reconstruct(), far.reconstruct(), cube)
        if value > best:
            best, where = value, cube.center.tolist()
    ratio = best / (F.source_norm * G.source_norm) if F.source_norm and G.source_norm else 0.0
    return {"R": d.R, "delta": delta, "ratio": ratio, "cube": where}


if __name__ == "__main__":
    import argparse
    import json

    parser = argparse.ArgumentParser(description="Decompose random cone data into wave packets")
    parser.add_argument("--R", type=float, default=64)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    dictionary = packet_dictionary(args.R)
    data = random_slab_data(dictionary, seed=args.seed, direction=[1.0, 0.0], half_angle=math.pi / 8)
    expansion = decompose(data)
    print(json.dumps({
        "packets": len(dictionary),
        "reconstruction_error": reconstruction_error(data, expansion),
        "coefficient_ratio": expansion.coefficient_ratio,
        "ripple": expansion.ripple,
    }, indent=2))
