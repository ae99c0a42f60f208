"""Split-operator time evolution, analytic free Gaussian evolution, and
finite-time wave-operator / out-asymptote approximants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .fields import (
    ComplexField,
    FieldError,
    GridSpec,
    PacketSpec,
    packet_values,
    to_momentum,
)


class PropagationError(RuntimeError):
    """Raised when an evolution precondition or monitor fails."""


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class PotentialModel:
    """Radial Gaussian bump/well  V(x) = v0 exp(-x^2 / (2 a^2)), or zero."""

    kind: str = "zero"
    v0: float = 0.0
    a: float = 1.0

    def __post_init__(self):
        if self.kind not in ("zero", "gaussian_well"):
            raise FieldError(f"unknown potential kind {self.kind!r}")
        if self.kind == "gaussian_well" and self.a <= 0:
            raise FieldError("potential range a must be positive")

    @property
    def strength(self) -> float:
        return 0.0 if self.kind == "zero" else self.v0

    def radial(self, r):
        if self.kind == "zero":
            return np.zeros_like(np.asarray(r, dtype=float))
        return self.v0 * np.exp(-np.asarray(r, dtype=float) ** 2 / (2.0 * self.a**2))

    def on_grid(self, grid: GridSpec) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros((grid.n_per_axis,) * 3)
        X, Y, Z = grid.meshes()
        return self.v0 * np.exp(-(X**2 + Y**2 + Z**2) / (2.0 * self.a**2))


@dataclass(frozen=True)
class EvolutionPlan:
    dt: float
    t_total: float
    store_stride: int = 10

    def __post_init__(self):
        if self.dt <= 0 or self.t_total < 0:
            raise FieldError("dt must be positive and t_total nonnegative")
        if self.store_stride < 1:
            raise FieldError("store_stride must be a positive integer")
        steps = self.t_total / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise FieldError("t_total must be an integer number of dt steps")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_total / self.dt))


def suggested_dt(V: PotentialModel, grid: GridSpec) -> float:
    """Stability/accuracy heuristic: dt <= 0.5 min(1/|v0|, 2/k_max^2)."""
    bound = 2.0 / grid.k_max**2
    if V.strength != 0.0:
        bound = min(bound, 1.0 / abs(V.strength))
    return 0.5 * bound


# ---------------------------------------------------------------------------
# split-operator stepping


class SplitOperator:
    """Strang V/2 - K - V/2 stepper with precomputed phase factors.

    Each factor is unitary, so the discrete norm is conserved to roundoff.
    """

    def __init__(self, V: PotentialModel, grid: GridSpec, dt: float):
        if dt == 0:  # negative dt is backward evolution, used by reversal checks
            raise FieldError("dt must be nonzero")
        self.grid = grid
        self.dt = dt
        self.V_grid = V.on_grid(grid)
        kr = grid.k_raw_axis()
        self.k2 = (
            kr[:, None, None] ** 2 + kr[None, :, None] ** 2 + kr[None, None, :] ** 2
        )
        self.exp_v_half = np.exp(-0.5j * dt * self.V_grid)
        self.exp_k = np.exp(-0.5j * dt * self.k2)

    def step_values(self, values: np.ndarray) -> np.ndarray:
        v = self.exp_v_half * values
        v = sfft.ifftn(self.exp_k * sfft.fftn(v, workers=1), workers=1)
        return self.exp_v_half * v

    def step(self, field: ComplexField) -> ComplexField:
        return ComplexField(
            grid=self.grid, values=self.step_values(field.values), time=field.time + self.dt
        )


def strang_step(field: ComplexField, V: PotentialModel, dt: float) -> ComplexField:
    """One Strang step; convenience wrapper over SplitOperator."""
    return SplitOperator(V, field.grid, dt).step(field)


def evolve(field: ComplexField, V: PotentialModel, dt: float, n_steps: int) -> ComplexField:
    op = SplitOperator(V, field.grid, dt)
    vals = field.values
    for _ in range(n_steps):
        vals = op.step_values(vals)
    return ComplexField(grid=field.grid, values=vals, time=field.time + n_steps * dt)


# ---------------------------------------------------------------------------
# analytic free evolution of the Gaussian family


class FreeGaussian:
    """Closed-form free evolution of a PacketSpec, plus its Bohmian flow.

    The packet disperses with per-axis width ratio w(t) = sqrt(1 + (t/beta)^2),
    beta = sigma^2/eps^2, and the free trajectories follow
        X(t) = y + k0 t + (X(0) - y) w(t).
    """

    def __init__(self, spec: PacketSpec):
        self.spec = spec
        self.beta = spec.dispersion_time

    def width_ratio(self, t: float) -> float:
        return float(np.sqrt(1.0 + (t / self.beta) ** 2))

    def sigma_t(self, t: float) -> float:
        """Dispersive width (sigma/eps) * sqrt(1 + (eps^2 t / sigma^2)^2)."""
        s = self.spec
        return (s.sigma / s.epsilon) * self.width_ratio(t)

    def values_at(self, X, Y, Z, t: float) -> np.ndarray:
        s = self.spec
        beta = self.beta
        c = s.center_vec + s.k0_vec * t
        g = 1.0 + 1j * t / beta
        pref = (s.epsilon**2 / (np.pi * s.sigma**2)) ** 0.75 / g**1.5
        r2 = (X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2
        phase = np.exp(1j * s.k0 * Z - 0.5j * s.k0**2 * t)
        return pref * phase * np.exp(-r2 / (2.0 * beta * g))

    def field(self, grid: GridSpec, t: float) -> ComplexField:
        X, Y, Z = grid.meshes()
        return ComplexField(grid=grid, values=self.values_at(X, Y, Z, t), time=t)

    def flow(self, q0: np.ndarray, t: float) -> np.ndarray:
        """Exact free Bohmian trajectory map for starts q0 (N, 3) at t = 0."""
        s = self.spec
        q0 = np.atleast_2d(np.asarray(q0, dtype=float))
        return s.center_vec + s.k0_vec * t + (q0 - s.center_vec) * self.width_ratio(t)

    def velocity(self, x: np.ndarray, t: float) -> np.ndarray:
        """Exact guidance velocity of the free packet at points x (N, 3)."""
        s = self.spec
        x = np.atleast_2d(np.asarray(x, dtype=float))
        fac = (t / self.beta**2) / (1.0 + (t / self.beta) ** 2)
        return s.k0_vec + (x - s.center_vec - s.k0_vec * t) * fac

    def momentum_values(self, KX, KY, KZ) -> np.ndarray:
        """Closed-form momentum representation (time-independent modulus)."""
        s = self.spec
        pref = s.epsilon**-1.5 * (s.sigma**2 / np.pi) ** 0.75
        y = s.center_vec
        q2 = (KX - 0.0) ** 2 + (KY - 0.0) ** 2 + (KZ - s.k0) ** 2
        phase = np.exp(-1j * (KX * y[0] + KY * y[1] + KZ * y[2]))
        return pref * phase * np.exp(-s.sigma**2 * q2 / (2.0 * s.epsilon**2))


def free_evolve_analytic(spec: PacketSpec, t: float) -> FreeGaussian:
    """Closed-form field evaluator and trajectory map for the free packet.

    Returns the FreeGaussian; callers evaluate .field(grid, t), .flow(q0, t).
    The t argument is kept for interface symmetry and validated lazily.
    """
    del t
    return FreeGaussian(spec)


# ---------------------------------------------------------------------------
# overlap and boundary monitors


def potential_overlap(field: ComplexField, V: PotentialModel) -> float:
    """integral |psi|^2 |V| dx^3, the packet-on-potential diagnostic."""
    if V.kind == "zero":
        return 0.0
    dens = np.abs(field.values) ** 2
    return float(np.sum(dens * np.abs(V.on_grid(field.grid))) * field.grid.dx**3)


def boundary_shell_probability(field: ComplexField, shell_cells: int = 2) -> float:
    """Probability mass within shell_cells lattice planes of the box faces."""
    n = field.grid.n_per_axis
    dens = np.abs(field.values) ** 2 * field.grid.dx**3
    mask = np.zeros((n, n, n), dtype=bool)
    sl = list(range(shell_cells)) + list(range(n - shell_cells, n))
    mask[sl, :, :] = True
    mask[:, sl, :] = True
    mask[:, :, sl] = True
    return float(dens[mask].sum())


# ---------------------------------------------------------------------------
# wave operator and out asymptote, as finite-time approximants


def apply_wave_operator_minus(
    spec: PacketSpec,
    V: PotentialModel,
    T_pre: float,
    grid: GridSpec,
    dt: float | None = None,
    overlap_tol: float = 1e-5,
    boundary_tol: float = 1e-8,
) -> ComplexField:
    """Interacting state at t = 0 whose incoming asymptote is the given packet.

    The free asymptote is evolved analytically back to -T_pre (exact for the
    Gaussian family), injected on the grid there, and stepped forward with the
    full Hamiltonian for T_pre.
    """
    free = FreeGaussian(spec)
    if dt is None:
        dt = suggested_dt(V, grid)
    if T_pre < 0:
        raise FieldError("T_pre must be nonnegative")
    n_steps = int(round(T_pre / dt)) if T_pre > 0 else 0
    if n_steps > 0:
        dt = T_pre / n_steps
    injected = free.field(grid, -T_pre)
    injected.time = -T_pre
    leak = boundary_shell_probability(injected)
    if leak > boundary_tol:
        raise PropagationError(
            f"boundary leakage at injection: shell probability {leak:.3e} > {boundary_tol:g}"
        )
    if V.kind != "zero":
        ov = potential_overlap(injected, V)
        if ov > overlap_tol * abs(V.strength):
            raise PropagationError(
                f"packet overlaps potential at injection: {ov:.3e} > "
                f"{overlap_tol:g} * |v0|"
            )
    out = evolve(injected, V, dt, n_steps) if n_steps else injected
    out.time = 0.0
    return out


def extract_out_asymptote(
    field_at_T: ComplexField,
    T: float,
    V: PotentialModel | None = None,
    overlap_tol: float = 1e-6,
) -> ComplexField:
    """Momentum-space out asymptote: undo the free phase accumulated up to T."""
    if V is not None and V.kind != "zero":
        ov = potential_overlap(field_at_T, V)
        if ov > overlap_tol * abs(V.strength):
            raise PropagationError(
                f"potential overlap too large at extraction: {ov:.3e} > "
                f"{overlap_tol:g} * |v0| (T too small)"
            )
    hat = to_momentum(field_at_T)
    KX, KY, KZ = field_at_T.grid.k_meshes()
    k2 = KX**2 + KY**2 + KZ**2
    hat.values = np.exp(0.5j * k2 * T) * hat.values
    return hat
