"""Stationary scattering oracle: partial-wave phase shifts from radial
integration, the scattering amplitude, the first-order momentum-transfer
kernel with its closed Gaussian form, and per-bin cross-section predictions.

Two independent routes (partial waves and the first-order kernel) validate
each other in the weak-coupling regime; the trajectory pipeline is never
checked against a single oracle implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import spherical_jn, spherical_yn

from .detector import DetectorSpec
from .fields import FieldError
from .propagator import PotentialModel

FOUR_PI_SQ = 4.0 * np.pi**2


class BoundStateError(RuntimeError):
    """Attractive potential supports a bound state; the no-bound-state
    assumption is violated and the run must be rejected."""


# ---------------------------------------------------------------------------
# radial integration


def _match_radius(V: PotentialModel, floor: float = 1e-12) -> float:
    """Radius beyond which |V| < floor (the matching point)."""
    if V.kind == "zero" or V.strength == 0.0:
        return 8.0
    r = V.a * np.sqrt(2.0 * np.log(abs(V.strength) / floor))
    return float(max(r, 8.0 * V.a, 8.0))


def _radial_log_derivative(V: PotentialModel, k2_times_2E: float, l: int, r_match: float, h: float) -> float:
    """Outward RK4 integration of u'' = [2V + l(l+1)/r^2 - 2E] u; returns u'/u
    at r_match. k2_times_2E is 2E (equal to k^2 on shell, negative below)."""

    def rhs(r, u, up):
        w = 2.0 * V.radial(r) + l * (l + 1) / r**2 - k2_times_2E
        return up, w * u

    r0 = 1e-4
    u, up = r0 ** (l + 1), (l + 1) * r0**l
    n = max(int(np.ceil((r_match - r0) / h)), 8)
    h = (r_match - r0) / n
    r = r0
    for _ in range(n):
        k1u, k1p = rhs(r, u, up)
        k2u, k2p = rhs(r + h / 2, u + h / 2 * k1u, up + h / 2 * k1p)
        k3u, k3p = rhs(r + h / 2, u + h / 2 * k2u, up + h / 2 * k2p)
        k4u, k4p = rhs(r + h, u + h * k3u, up + h * k3p)
        u += h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        up += h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        r += h
        if abs(u) > 1e250:  # rescale to dodge overflow; log-derivative unchanged
            u *= 1e-250
            up *= 1e-250
    return up / u


def _zero_energy_nodes(V: PotentialModel, l: int, r_match: float, h: float) -> int:
    """Node count of the zero-energy radial solution; >= 1 signals a bound
    state in that partial wave."""

    def rhs(r, u, up):
        w = 2.0 * V.radial(r) + l * (l + 1) / r**2
        return up, w * u

    r0 = 1e-4
    u, up = r0 ** (l + 1), (l + 1) * r0**l
    n = max(int(np.ceil((r_match - r0) / h)), 8)
    h = (r_match - r0) / n
    r = r0
    nodes = 0
    prev_sign = np.sign(u)
    for _ in range(n):
        k1u, k1p = rhs(r, u, up)
        k2u, k2p = rhs(r + h / 2, u + h / 2 * k1u, up + h / 2 * k1p)
        k3u, k3p = rhs(r + h / 2, u + h / 2 * k2u, up + h / 2 * k2p)
        k4u, k4p = rhs(r + h, u + h * k3u, up + h * k3p)
        u += h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        up += h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        r += h
        s = np.sign(u)
        if s != 0 and prev_sign != 0 and s != prev_sign:
            nodes += 1
        if s != 0:
            prev_sign = s
        if abs(u) > 1e250:
            u *= 1e-250
            up *= 1e-250
    return nodes


def bound_state_scan(V: PotentialModel, l_max: int | None = None) -> int:
    """Total number of bound partial waves detected (0 means assumption holds).

    Repulsive or zero potentials trivially pass. For attractive wells the
    zero-energy node count per l is used; the scan stops once the centrifugal
    barrier dominates.
    """
    if V.kind == "zero" or V.strength >= 0.0:
        return 0
    if l_max is None:
        l_max = int(np.ceil(V.a * np.sqrt(2.0 * abs(V.strength)))) + 3
    r_match = _match_radius(V)
    h = V.a / 40.0
    total = 0
    for l in range(l_max + 1):
        total += _zero_energy_nodes(V, l, r_match, h)
    return total


# ---------------------------------------------------------------------------
# phase shifts


@dataclass
class PhaseShiftTable:
    k: float
    delta_l: np.ndarray
    l_max: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.delta_l)):
            raise FieldError("non-finite phase shift")


def default_l_max(V: PotentialModel, k: float) -> int:
    r_eff = 5.0 * V.a if V.kind != "zero" else 5.0
    return int(np.ceil(k * r_eff)) + 8


def phase_shifts(
    V: PotentialModel,
    k: float,
    l_max: int | None = None,
    step: float | None = None,
    truncation_tol: float = 1e-6,
) -> PhaseShiftTable:
    """delta_l from matching the radial solution to free spherical waves.

    Raises BoundStateError for attractive potentials that bind (the
    no-bound-state assumption), and extends l_max until the last shift is
    below the truncation tolerance.
    """
    if k <= 0:
        raise FieldError("k must be positive")
    if V.kind != "zero" and V.strength < 0.0 and bound_state_scan(V) > 0:
        raise BoundStateError(
            f"gaussian well v0={V.strength:g}, a={V.a:g} supports a bound state"
        )
    if l_max is None:
        l_max = default_l_max(V, k)
    if step is None:
        # half the stability bound keeps delta_l stable to <1e-6 under refinement
        step = 0.5 * min(1.0 / (20.0 * k), (V.a if V.kind != "zero" else 1.0) / 20.0)
    r_match = _match_radius(V)

    deltas = []
    l = 0
    while True:
        if V.kind == "zero" or V.strength == 0.0:
            deltas.append(0.0)
        else:
            beta = _radial_log_derivative(V, k**2, l, r_match, step)
            x = k * r_match
            j = spherical_jn(l, x)
            jp = spherical_jn(l, x, derivative=True)
            y = spherical_yn(l, x)
            yp = spherical_yn(l, x, derivative=True)
            # u ~ cos(d) x j_l(x) - sin(d) x y_l(x); match u'/u at r_match
            Fj, Fjp = x * j, k * (j + x * jp)
            Fy, Fyp = x * y, k * (y + x * yp)
            tan_d = (Fjp - beta * Fj) / (Fyp - beta * Fy)
            deltas.append(float(np.arctan(tan_d)))
        if l >= l_max:
            if abs(deltas[-1]) < truncation_tol or l >= 60:
                break
            l_max += 4
        l += 1
    table = PhaseShiftTable(k=k, delta_l=np.array(deltas), l_max=len(deltas) - 1)
    if abs(table.delta_l[-1]) >= truncation_tol and V.strength != 0.0:
        raise FieldError(
            f"phase shifts not converged by l={table.l_max}: "
            f"|delta|={abs(table.delta_l[-1]):.2e}"
        )
    return table


def born_phase_shift(V: PotentialModel, k: float, l: int) -> float:
    """Weak-coupling phase shift -2k * integral V(r) j_l(kr)^2 r^2 dr."""
    if V.kind == "zero":
        return 0.0
    r_cut = _match_radius(V)
    val, _ = quad(lambda r: V.radial(r) * spherical_jn(l, k * r) ** 2 * r**2, 0.0, r_cut, limit=200)
    return -2.0 * k * val


# ---------------------------------------------------------------------------
# amplitude and cross sections


@dataclass
class AmplitudeTable:
    theta: np.ndarray  # radians
    f: np.ndarray  # complex amplitude
    k: float

    @property
    def sigma_diff(self) -> np.ndarray:
        return np.abs(self.f) ** 2

    @property
    def t_magnitude(self) -> np.ndarray:
        """|T| in the convention where sigma_diff = 16 pi^4 |T|^2."""
        return np.abs(self.f) / FOUR_PI_SQ

    def csv_rows(self) -> list[str]:
        rows = ["theta_deg,re_f,im_f,sigma_diff"]
        for th, fv, sd in zip(np.degrees(self.theta), self.f, self.sigma_diff):
            rows.append(f"{float(th)!r},{float(fv.real)!r},{float(fv.imag)!r},{float(sd)!r}")
        return rows


def _legendre_upward(x: np.ndarray, l_max: int) -> np.ndarray:
    """P_l(x) for l = 0..l_max by the standard upward recurrence."""
    out = np.empty((l_max + 1,) + x.shape)
    out[0] = 1.0
    if l_max >= 1:
        out[1] = x
    for l in range(1, l_max):
        out[l + 1] = ((2 * l + 1) * x * out[l] - l * out[l - 1]) / (l + 1)
    return out


def amplitude(table: PhaseShiftTable, theta_grid: np.ndarray) -> AmplitudeTable:
    """f(theta) = (1/k) sum_l (2l+1) e^{i delta_l} sin(delta_l) P_l(cos theta)."""
    theta = np.asarray(theta_grid, dtype=float)
    P = _legendre_upward(np.cos(theta), table.l_max)
    ls = np.arange(table.l_max + 1)
    coeff = (2 * ls + 1) * np.exp(1j * table.delta_l) * np.sin(table.delta_l)
    f = np.tensordot(coeff, P, axes=(0, 0)) / table.k
    return AmplitudeTable(theta=theta, f=f, k=table.k)


def optical_theorem_residual(amp: AmplitudeTable) -> float:
    """|Im f(0) - (k/4pi) sigma_tot| / |Im f(0)| from the amplitude table."""
    if not (amp.theta[0] <= 1e-12 and abs(amp.theta[-1] - np.pi) <= 1e-9):
        raise FieldError("optical theorem needs an amplitude table on [0, pi]")
    sig_tot = np.trapezoid(2.0 * np.pi * np.sin(amp.theta) * amp.sigma_diff, amp.theta)
    lhs = np.imag(amp.f[0])
    return float(abs(lhs - amp.k / (4.0 * np.pi) * sig_tot) / abs(lhs))


def born_tmatrix(V: PotentialModel, k_out: np.ndarray, k_in: np.ndarray) -> complex:
    """First-order on-shell kernel (2pi)^{-3} * Vhat(k_out - k_in).

    For the Gaussian potential the transform is closed-form:
    (2pi)^{-3/2} v0 a^3 exp(-q^2 a^2 / 2). Off-shell inputs are rejected.
    """
    k_out = np.asarray(k_out, dtype=float)
    k_in = np.asarray(k_in, dtype=float)
    ko, ki = np.linalg.norm(k_out), np.linalg.norm(k_in)
    if abs(ko - ki) > 1e-10 * max(1.0, ki):
        raise FieldError(f"off-shell input: |k_out|={ko!r} != |k_in|={ki!r}")
    if V.kind == "zero":
        return 0.0 + 0.0j
    q2 = float(np.sum((k_out - k_in) ** 2))
    return complex((2.0 * np.pi) ** -1.5 * V.v0 * V.a**3 * np.exp(-q2 * V.a**2 / 2.0))


def born_amplitude(V: PotentialModel, k: float, theta: np.ndarray) -> np.ndarray:
    """|f| implied by the first-order kernel through sigma_diff = 16 pi^4 |T|^2."""
    theta = np.asarray(theta, dtype=float)
    q = 2.0 * k * np.sin(theta / 2.0)
    if V.kind == "zero":
        return np.zeros_like(theta)
    tmag = (2.0 * np.pi) ** -1.5 * abs(V.v0) * V.a**3 * np.exp(-(q**2) * V.a**2 / 2.0)
    return FOUR_PI_SQ * tmag


def sigma_diff_prediction(
    V: PotentialModel,
    k0: float,
    detector: DetectorSpec,
    table: PhaseShiftTable | None = None,
    points_per_bin: int = 400,
) -> np.ndarray:
    """Per-bin integral of |f|^2 over each scored cell.

    Azimuthal symmetry turns each cell into 2 pi / n_phi times the theta-band
    integral of sin(theta) |f(theta)|^2.
    """
    if table is None:
        table = phase_shifts(V, k0)
    te = detector.theta_edges
    out = np.empty(detector.n_bins)
    for it in range(detector.n_theta):
        th = np.linspace(te[it], te[it + 1], points_per_bin)
        amp = amplitude(table, th)
        band = np.trapezoid(np.sin(th) * amp.sigma_diff, th)
        for ip in range(detector.n_phi):
            out[it * detector.n_phi + ip] = band * (2.0 * np.pi / detector.n_phi)
    return out


def sigma_born_prediction(V: PotentialModel, k0: float, detector: DetectorSpec, points_per_bin: int = 400) -> np.ndarray:
    """Per-bin Born-route prediction, the independent weak-coupling check."""
    te = detector.theta_edges
    out = np.empty(detector.n_bins)
    for it in range(detector.n_theta):
        th = np.linspace(te[it], te[it + 1], points_per_bin)
        f2 = born_amplitude(V, k0, th) ** 2
        band = np.trapezoid(np.sin(th) * f2, th)
        for ip in range(detector.n_phi):
            out[it * detector.n_phi + ip] = band * (2.0 * np.pi / detector.n_phi)
    return out
