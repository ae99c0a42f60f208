"""Periodic cubic grids, scaled Gaussian wave packets, and unitary transforms.

Everything lives in natural units (hbar = m = 1). The momentum transform
follows the (2*pi)^(-3/2) * integral exp(-i k.x) convention, realized as a
scaled DFT on grids centered at the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sfft


class FieldError(ValueError):
    """Raised when a grid/packet precondition is violated."""


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic cubic lattice centered at the origin."""

    n_per_axis: int
    box_extent: float

    @property
    def dx(self) -> float:
        return self.box_extent / self.n_per_axis

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.box_extent

    @property
    def k_max(self) -> float:
        return np.pi / self.dx

    def axis(self) -> np.ndarray:
        """Centered position coordinates along one axis."""
        n = self.n_per_axis
        return (np.arange(n) - n // 2) * self.dx

    def k_axis(self) -> np.ndarray:
        """Centered momentum coordinates along one axis."""
        n = self.n_per_axis
        return (np.arange(n) - n // 2) * self.dk

    def meshes(self):
        x = self.axis()
        return np.meshgrid(x, x, x, indexing="ij")

    def k_meshes(self):
        k = self.k_axis()
        return np.meshgrid(k, k, k, indexing="ij")

    def k_raw_axis(self) -> np.ndarray:
        """Momentum coordinates in FFT (unshifted) layout."""
        return 2.0 * np.pi * sfft.fftfreq(self.n_per_axis, d=self.dx)


def build_grid(n: int, extent: float) -> GridSpec:
    if n % 2 != 0:
        raise FieldError(f"n_per_axis must be even, got {n}")
    if n < 16:
        raise FieldError(f"n_per_axis must be >= 16, got {n}")
    if extent <= 0:
        raise FieldError(f"box_extent must be positive, got {extent}")
    return GridSpec(n_per_axis=int(n), box_extent=float(extent))


# ---------------------------------------------------------------------------
# fields


@dataclass
class ComplexField:
    """Complex amplitude sampled on a GridSpec lattice at one instant."""

    grid: GridSpec
    values: np.ndarray
    time: float = 0.0

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.dx**3))

    def normalized(self) -> "ComplexField":
        return replace(self, values=self.values / self.norm())

    def momentum_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.dk**3))


# ---------------------------------------------------------------------------
# packets


@dataclass(frozen=True)
class PacketSpec:
    """Gaussian envelope with boost k0 along e3, scale epsilon, center y.

    The sampled packet is
        eps^(3/2) * exp(i k0.x) * (pi sigma^2)^(-3/4) * exp(-eps^2 (x-y)^2 / (2 sigma^2)).
    """

    sigma: float
    k0: float  # magnitude of the boost along +e3
    epsilon: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.sigma <= 0:
            raise FieldError("sigma must be positive")
        if not (0.0 < self.epsilon <= 1.0):
            raise FieldError("epsilon must lie in (0, 1]")
        if self.k0 <= 0:
            raise FieldError("k0 must be positive (boost along +e3)")

    @property
    def k0_vec(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.k0])

    @property
    def center_vec(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    @property
    def position_std(self) -> float:
        """Per-axis standard deviation of |psi|^2."""
        return self.sigma / (np.sqrt(2.0) * self.epsilon)

    @property
    def momentum_std(self) -> float:
        """Per-axis standard deviation of |psi_hat|^2 around k0."""
        return self.epsilon / (np.sqrt(2.0) * self.sigma)

    @property
    def dispersion_time(self) -> float:
        """Time scale sigma^2/eps^2 after which the width grows linearly."""
        return self.sigma**2 / self.epsilon**2


def packet_values(spec: PacketSpec, X, Y, Z) -> np.ndarray:
    """Closed-form packet amplitude at arbitrary points."""
    y = spec.center_vec
    r2 = (X - y[0]) ** 2 + (Y - y[1]) ** 2 + (Z - y[2]) ** 2
    pref = spec.epsilon**1.5 * (np.pi * spec.sigma**2) ** -0.75
    return pref * np.exp(1j * spec.k0 * Z - spec.epsilon**2 * r2 / (2.0 * spec.sigma**2))


def gaussian_packet(spec: PacketSpec, grid: GridSpec) -> ComplexField:
    """Sample the packet on the lattice and normalize its discrete norm to 1."""
    if spec.sigma / spec.epsilon > grid.box_extent / 8.0:
        raise FieldError(
            f"packet too wide for grid: sigma/eps = {spec.sigma / spec.epsilon:g} "
            f"exceeds extent/8 = {grid.box_extent / 8.0:g}"
        )
    if spec.k0 > grid.k_max / 2.0:
        raise FieldError(
            f"boost beyond Nyquist headroom: k0 = {spec.k0:g} exceeds k_max/2 = {grid.k_max / 2.0:g}"
        )
    X, Y, Z = grid.meshes()
    field = ComplexField(grid=grid, values=packet_values(spec, X, Y, Z), time=0.0)
    return field.normalized()


# ---------------------------------------------------------------------------
# transforms

# The centered-lattice DFT picks up alternating-sign masks plus a constant
# (-1)^(N/2) per axis relative to the plain FFT; both are exact for even N.


def _alternating_mask(n: int) -> np.ndarray:
    return (-1.0) ** np.arange(n)


def _mask3(n: int) -> np.ndarray:
    a = _alternating_mask(n)
    return a[:, None, None] * a[None, :, None] * a[None, None, :]


def to_momentum(field: ComplexField) -> ComplexField:
    """Unitary transform to the centered momentum lattice, convention (2pi)^(-3/2)."""
    g = field.grid
    n = g.n_per_axis
    mask = _mask3(n)
    phase_const = float((-1.0) ** (n // 2)) ** 3
    vals = mask * sfft.fftn(mask * field.values, workers=1)
    vals *= (g.dx / np.sqrt(2.0 * np.pi)) ** 3 * phase_const
    return ComplexField(grid=g, values=vals, time=field.time)


def to_position(field: ComplexField) -> ComplexField:
    """Inverse of to_momentum."""
    g = field.grid
    n = g.n_per_axis
    mask = _mask3(n)
    phase_const = float((-1.0) ** (n // 2)) ** 3
    vals = mask * sfft.ifftn(mask * field.values, workers=1)
    vals *= (g.dk * n / np.sqrt(2.0 * np.pi)) ** 3 * phase_const
    return ComplexField(grid=g, values=vals, time=field.time)


# ---------------------------------------------------------------------------
# lattice helpers shared by the trajectory and flux modules


def spectral_gradient(values: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradient of a lattice field via ik multiplication in momentum space."""
    kr = grid.k_raw_axis()
    ph = sfft.fftn(values, workers=1)
    gx = sfft.ifftn(1j * kr[:, None, None] * ph, workers=1)
    gy = sfft.ifftn(1j * kr[None, :, None] * ph, workers=1)
    gz = sfft.ifftn(1j * kr[None, None, :] * ph, workers=1)
    return gx, gy, gz


def trilinear_weights(points: np.ndarray, grid: GridSpec):
    """Corner indices and weights for periodic trilinear interpolation.

    points: (N, 3) positions in centered coordinates. Returns (idx, w) where
    idx is a tuple of 8 index triples and w the matching (8, N) weights.
    """
    n = grid.n_per_axis
    u = points / grid.dx + n // 2
    i0 = np.floor(u).astype(np.int64)
    f = u - i0
    g = 1.0 - f
    corners = []
    weights = []
    for a in (0, 1):
        wa = f[:, 0] if a else g[:, 0]
        ia = (i0[:, 0] + a) % n
        for b in (0, 1):
            wb = f[:, 1] if b else g[:, 1]
            ib = (i0[:, 1] + b) % n
            for c in (0, 1):
                wc = f[:, 2] if c else g[:, 2]
                ic = (i0[:, 2] + c) % n
                corners.append((ia, ib, ic))
                weights.append(wa * wb * wc)
    return corners, weights


def trilinear_gather(arrays, corners, weights) -> list[np.ndarray]:
    """Interpolate several lattice arrays at once with shared weights."""
    npts = weights[0].shape[0]
    out = [np.zeros(npts, dtype=a.dtype) for a in arrays]
    for (ia, ib, ic), w in zip(corners, weights):
        for o, a in zip(out, arrays):
            o += w * a[ia, ib, ic]
    return out


def interpolate_many(arrays, points: np.ndarray, grid: GridSpec) -> list[np.ndarray]:
    corners, weights = trilinear_weights(points, grid)
    return trilinear_gather(arrays, corners, weights)
