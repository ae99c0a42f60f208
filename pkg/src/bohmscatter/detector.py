"""Detector sphere geometry: (theta, phi) bins on S^2 with a forward exclusion."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .fields import FieldError

FORWARD = -1  # bin code for directions inside the forward exclusion cone
BACKWARD = -2  # bin code for directions behind theta_max


@dataclass(frozen=True)
class DetectorSpec:
    """Sphere of radius R partitioned into theta x phi cells.

    Scored cells tile [theta_min, theta_max] x [0, 2pi); the forward cone
    around +e3 (the beam axis) is excluded so that k0 never lies in a scored
    cone.
    """

    radius: float
    theta_min_deg: float = 20.0
    theta_max_deg: float = 160.0
    n_theta: int = 7
    n_phi: int = 1
    aux_radii: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.radius <= 0:
            raise FieldError("detector radius must be positive")
        if not (0.0 < self.theta_min_deg < self.theta_max_deg <= 180.0):
            raise FieldError("need 0 < theta_min < theta_max <= 180 degrees")
        if self.n_theta < 1 or self.n_phi < 1:
            raise FieldError("need at least one theta and one phi bin")

    @property
    def radii(self) -> tuple[float, ...]:
        return tuple(sorted(set((self.radius,) + self.aux_radii)))

    @property
    def theta_edges(self) -> np.ndarray:
        return np.radians(np.linspace(self.theta_min_deg, self.theta_max_deg, self.n_theta + 1))

    @property
    def phi_edges(self) -> np.ndarray:
        return np.linspace(0.0, 2.0 * np.pi, self.n_phi + 1)

    @property
    def n_bins(self) -> int:
        return self.n_theta * self.n_phi

    def bin_centers_deg(self) -> list[tuple[float, float, float, float]]:
        """Per-bin (theta_lo, theta_hi, phi_lo, phi_hi) in degrees."""
        te = np.degrees(self.theta_edges)
        pe = np.degrees(self.phi_edges)
        out = []
        for it in range(self.n_theta):
            for ip in range(self.n_phi):
                out.append((float(te[it]), float(te[it + 1]), float(pe[ip]), float(pe[ip + 1])))
        return out

    def solid_angles(self) -> np.ndarray:
        """Exact solid angle of each scored bin."""
        te = self.theta_edges
        dphi = 2.0 * np.pi / self.n_phi
        out = np.empty(self.n_bins)
        for it in range(self.n_theta):
            band = np.cos(te[it]) - np.cos(te[it + 1])
            for ip in range(self.n_phi):
                out[it * self.n_phi + ip] = band * dphi
        return out

    def classify(self, directions: np.ndarray) -> np.ndarray:
        """Map unit vectors (N, 3) to bin indices; FORWARD/BACKWARD outside."""
        d = np.atleast_2d(directions)
        ct = np.clip(d[:, 2], -1.0, 1.0)
        theta = np.arccos(ct)
        phi = np.mod(np.arctan2(d[:, 1], d[:, 0]), 2.0 * np.pi)
        te = self.theta_edges
        it = np.searchsorted(te, theta, side="right") - 1
        it = np.where(theta >= te[-1], self.n_theta, it)  # past the last edge
        out = np.full(d.shape[0], FORWARD, dtype=np.int64)
        back = it >= self.n_theta
        good = (it >= 0) & ~back
        ip = np.minimum((phi / (2.0 * np.pi / self.n_phi)).astype(np.int64), self.n_phi - 1)
        out[good] = it[good] * self.n_phi + ip[good]
        out[back] = BACKWARD
        return out

    def quadrature_nodes(self, per_bin_theta: int = 6, per_bin_phi: int = 12):
        """Surface quadrature on the full sphere (scored bins + polar caps).

        Returns (points, weights, bin_ids) with points on the radius-R sphere,
        weights summing to 4 pi R^2, and bin_ids using FORWARD/BACKWARD codes
        for the caps. Gauss-Legendre in cos(theta) inside each band, uniform
        in phi.
        """
        te = self.theta_edges
        bands = [(0.0, te[0], FORWARD)]
        for it in range(self.n_theta):
            bands.append((te[it], te[it + 1], it))
        bands.append((te[-1], np.pi, BACKWARD))
        pts, wts, ids = [], [], []
        gl_x, gl_w = leggauss(per_bin_theta)
        dphi = 2.0 * np.pi / self.n_phi
        phis0 = (np.arange(per_bin_phi) + 0.5) / per_bin_phi
        for lo, hi, code in bands:
            clo, chi = np.cos(hi), np.cos(lo)  # increasing in cos
            if chi - clo < 1e-15:
                continue
            ct = 0.5 * (gl_x + 1.0) * (chi - clo) + clo
            wct = 0.5 * (chi - clo) * gl_w
            st = np.sqrt(np.clip(1.0 - ct**2, 0.0, None))
            for ip in range(self.n_phi if code >= 0 else 1):
                span = dphi if code >= 0 else 2.0 * np.pi
                base = self.phi_edges[ip] if code >= 0 else 0.0
                phi = base + phis0 * span
                wphi = span / per_bin_phi
                P, C = np.meshgrid(phi, ct, indexing="ij")
                _, S = np.meshgrid(phi, st, indexing="ij")
                W = np.broadcast_to(wct, C.shape) * wphi
                xyz = np.stack(
                    [S * np.cos(P), S * np.sin(P), C], axis=-1
                ).reshape(-1, 3)
                pts.append(self.radius * xyz)
                wts.append((self.radius**2 * W).ravel())
                bid = code if code < 0 else code * self.n_phi + ip
                ids.append(np.full(xyz.shape[0], bid, dtype=np.int64))
        return np.concatenate(pts), np.concatenate(wts), np.concatenate(ids)
