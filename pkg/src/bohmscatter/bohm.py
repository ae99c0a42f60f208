"""Guidance-equation trajectories co-stepped with the field, and
first-crossing bookkeeping on detector spheres."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.stats import chi2 as chi2_dist

from .detector import DetectorSpec
from .fields import ComplexField, GridSpec, interpolate_many, spectral_gradient

NODE_FLOOR = 1e-14  # |psi|^2 threshold relative to the peak density

STATUS_ACTIVE = 0
STATUS_EXITED = 1
STATUS_STALLED = 2
STATUS_ESCAPED = 3

STATUS_NAMES = {0: "active", 1: "exited", 2: "stalled", 3: "escaped_grid"}


# ---------------------------------------------------------------------------
# field snapshots and the guidance velocity


class FieldSnapshot:
    """psi and its spectral gradient on the lattice, ready for interpolation."""

    def __init__(self, values: np.ndarray, grid: GridSpec, time: float):
        self.grid = grid
        self.time = time
        self.psi = values
        self.gx, self.gy, self.gz = spectral_gradient(values, grid)
        self.peak_density = float(np.max(np.abs(values) ** 2))

    @classmethod
    def from_field(cls, f: ComplexField) -> "FieldSnapshot":
        return cls(f.values, f.grid, f.time)

    def velocity(self, points: np.ndarray):
        """Guidance velocity Im(grad psi / psi) at points (N, 3).

        psi and grad psi are interpolated trilinearly and the ratio formed
        afterwards. Returns (v, stalled_mask) where stalled marks points whose
        interpolated density fell below the node floor.
        """
        p, vx, vy, vz = interpolate_many(
            (self.psi, self.gx, self.gy, self.gz), points, self.grid
        )
        dens = np.abs(p) ** 2
        stalled = dens < NODE_FLOOR * self.peak_density
        safe = np.where(stalled, 1.0, p)
        v = np.stack(
            [np.imag(vx / safe), np.imag(vy / safe), np.imag(vz / safe)], axis=1
        )
        v[stalled] = 0.0
        return v, stalled


def velocity_field(field: ComplexField, points: np.ndarray) -> np.ndarray:
    """Public guidance-velocity evaluation at arbitrary points."""
    v, _ = FieldSnapshot.from_field(field).velocity(np.atleast_2d(points))
    return v


# ---------------------------------------------------------------------------
# crossing records


@dataclass
class CrossingRecord:
    """Per-trajectory crossing summary at one sphere radius."""

    t_exit: float
    exit_direction: np.ndarray | None
    n_plus: int
    n_minus: int

    @property
    def n_sig(self) -> int:
        return self.n_plus - self.n_minus

    @property
    def n_tot(self) -> int:
        return self.n_plus + self.n_minus


class CrossingTracker:
    """Vectorized first-exit and signed-crossing bookkeeping for many
    trajectories against a list of sphere radii.

    Crossings are located by sign changes of |x| - R along each step segment;
    every segment that comes near a sphere is refined with a cubic Hermite
    subdivision (the sub-step rule), so grazing passages are resolved and each
    crossing is binned at its own location.
    """

    GRAZE_SUBDIV = 64  # 2^6 refinement near a sphere

    def __init__(self, radii, n_traj: int, detector: DetectorSpec | None = None):
        self.radii = np.asarray(sorted(radii), dtype=float)
        m = len(self.radii)
        self.n_traj = n_traj
        self.detector = detector
        self.n_plus = np.zeros((m, n_traj), dtype=np.int32)
        self.n_minus = np.zeros((m, n_traj), dtype=np.int32)
        self.t_exit = np.full((m, n_traj), np.inf)
        self.exit_dir = np.full((m, n_traj, 3), np.nan)
        self.grazing_events = 0
        if detector is not None:
            self.primary = self.radius_index(detector.radius)
            self.nsig_bin = np.zeros((n_traj, detector.n_bins), dtype=np.int32)
        else:
            self.primary = None
            self.nsig_bin = None

    def update(self, x0, v0, x1, v1, t0: float, dt: float, traj_idx: np.ndarray):
        """Process step segments x0 -> x1 (for trajectories traj_idx) taken
        during [t0, t0 + dt]."""
        r0 = np.linalg.norm(x0, axis=1)
        r1 = np.linalg.norm(x1, axis=1)
        # reach of the Hermite arc: endpoint separation plus curvature bulge
        reach = np.linalg.norm(x1 - x0, axis=1) + 0.25 * dt * (
            np.linalg.norm(v0, axis=1) + np.linalg.norm(v1, axis=1)
        )
        for m, R in enumerate(self.radii):
            near = np.minimum(np.abs(r0 - R), np.abs(r1 - R)) <= reach + 1e-12
            if not near.any():
                continue
            sub = np.nonzero(near)[0]
            self._refine_and_count(
                m, R, traj_idx[sub], x0[sub], v0[sub], x1[sub], v1[sub], t0, dt
            )

    def _refine_and_count(self, m, R, gidx, x0, v0, x1, v1, t0, dt):
        s = np.linspace(0.0, 1.0, self.GRAZE_SUBDIV + 1)
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        path = (
            h00[None, :, None] * x0[:, None, :]
            + h10[None, :, None] * (dt * v0)[:, None, :]
            + h01[None, :, None] * x1[:, None, :]
            + h11[None, :, None] * (dt * v1)[:, None, :]
        )
        r = np.linalg.norm(path, axis=2)
        sgn = r - R
        # half-open sign classes so a node landing exactly on the sphere still
        # registers one crossing
        below = sgn < 0.0
        cross_out = below[:, :-1] & ~below[:, 1:]
        cross_in = ~below[:, :-1] & below[:, 1:]
        cross = cross_out | cross_in
        if not cross.any():
            return
        rows, cols = np.nonzero(cross)
        denom = sgn[rows, cols] - sgn[rows, cols + 1]
        denom = np.where(np.abs(denom) < 1e-300, 1.0, denom)
        lam = np.clip(sgn[rows, cols] / denom, 0.0, 1.0)
        pts = path[rows, cols] + lam[:, None] * (path[rows, cols + 1] - path[rows, cols])
        t_cross = t0 + dt * (cols + lam) / self.GRAZE_SUBDIV
        is_out = cross_out[rows, cols]
        gi = gidx[rows]

        np.add.at(self.n_plus[m], gi[is_out], 1)
        np.add.at(self.n_minus[m], gi[~is_out], 1)

        dr = np.abs(r[rows, cols + 1] - r[rows, cols]) / (dt / self.GRAZE_SUBDIV)
        self.grazing_events += int(np.count_nonzero(dr < 1e-12))

        if self.detector is not None and m == self.primary:
            bins = self.detector.classify(pts / np.linalg.norm(pts, axis=1)[:, None])
            scored = bins >= 0
            signs = np.where(is_out, 1, -1).astype(np.int32)
            np.add.at(
                self.nsig_bin,
                (gi[scored], bins[scored]),
                signs[scored],
            )

        # first outward crossing per trajectory fixes t_exit and direction
        cand = is_out & ~np.isfinite(self.t_exit[m, gi])
        if not cand.any():
            return
        order = np.lexsort((t_cross, gi))
        for j in order:
            if not cand[j]:
                continue
            g = gi[j]
            if np.isfinite(self.t_exit[m, g]):
                continue
            self.t_exit[m, g] = t_cross[j]
            self.exit_dir[m, g] = pts[j] / np.linalg.norm(pts[j])

    def radius_index(self, R: float) -> int:
        i = int(np.argmin(np.abs(self.radii - R)))
        if abs(self.radii[i] - R) > 1e-9:
            raise KeyError(f"radius {R} not tracked")
        return i

    def record(self, R: float, i: int) -> CrossingRecord:
        m = self.radius_index(R)
        d = self.exit_dir[m, i]
        return CrossingRecord(
            t_exit=float(self.t_exit[m, i]),
            exit_direction=None if np.isnan(d[0]) else d.copy(),
            n_plus=int(self.n_plus[m, i]),
            n_minus=int(self.n_minus[m, i]),
        )


# ---------------------------------------------------------------------------
# the trajectory ensemble


class TrajectoryEnsemble:
    """Positions plus status flags for a batch of trajectories sharing one
    field history."""

    def __init__(
        self,
        q0: np.ndarray,
        grid: GridSpec,
        radii,
        detector: DetectorSpec | None = None,
        step_cap_cells: float = 1.0,
    ):
        q0 = np.atleast_2d(np.asarray(q0, dtype=float))
        self.q0 = q0.copy()
        self.positions = q0.copy()
        self.grid = grid
        self.n = q0.shape[0]
        self.status = np.zeros(self.n, dtype=np.int8)
        self.tracker = CrossingTracker(radii, self.n, detector)
        self.step_cap = step_cap_cells * grid.dx
        self.safe_half_extent = grid.box_extent / 2.0 - 2.0 * grid.dx
        self.max_displacement_seen = 0.0

    @property
    def active(self) -> np.ndarray:
        return self.status == STATUS_ACTIVE

    def counts(self) -> dict:
        out = {
            STATUS_NAMES[s]: int(np.count_nonzero(self.status == s))
            for s in (STATUS_ACTIVE, STATUS_STALLED, STATUS_ESCAPED)
        }
        m = self.tracker.primary if self.tracker.primary is not None else 0
        out["exited"] = int(np.count_nonzero(np.isfinite(self.tracker.t_exit[m])))
        out["grazing_events"] = int(self.tracker.grazing_events)
        return out


def advance_trajectories(
    snap_t: FieldSnapshot,
    snap_half: FieldSnapshot,
    snap_next: FieldSnapshot,
    ens: TrajectoryEnsemble,
    dt: float,
) -> TrajectoryEnsemble:
    """One classical RK4 update using the three half-step field snapshots.

    Velocities are evaluated at (t, x), (t + dt/2, .), (t + dt, .).
    Trajectories whose displacement would exceed the per-step cap are redone
    with halved internal sub-steps (up to 6 halvings); crossing bookkeeping
    consumes the segment endpoints and endpoint velocities.
    """
    act = ens.active
    if not act.any():
        return ens
    idx = np.nonzero(act)[0]
    x0 = ens.positions[idx]
    t0 = snap_t.time

    x1, v0, v1, stalled = _rk4_once(snap_t, snap_half, snap_next, x0, dt)
    disp = np.linalg.norm(x1 - x0, axis=1)
    ens.max_displacement_seen = max(ens.max_displacement_seen, float(disp.max(initial=0.0)))
    over = disp > ens.step_cap
    if over.any():
        sub = np.nonzero(over)[0]
        xs = x0[sub]
        redone = None
        for halvings in range(1, 7):
            redone = _substep_path(snap_t, snap_half, snap_next, xs, dt, 2**halvings, ens.step_cap)
            if redone is not None:
                break
        if redone is None:
            redone = _substep_path(snap_t, snap_half, snap_next, xs, dt, 64, ens.step_cap, force=True)
        x1[sub] = redone

    ens.tracker.update(x0, v0, x1, v1, t0, dt, idx)

    ens.status[idx[stalled]] = STATUS_STALLED
    escaped = np.max(np.abs(x1), axis=1) > ens.safe_half_extent
    ens.status[idx[escaped & ~stalled]] = STATUS_ESCAPED
    moved = ~stalled
    ens.positions[idx[moved]] = x1[moved]
    return ens


def _rk4_once(snap_t, snap_half, snap_next, x0, dt):
    k1, s1 = snap_t.velocity(x0)
    k2, s2 = snap_half.velocity(x0 + 0.5 * dt * k1)
    k3, s3 = snap_half.velocity(x0 + 0.5 * dt * k2)
    k4, s4 = snap_next.velocity(x0 + dt * k3)
    x1 = x0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    stalled = s1 | s2 | s3 | s4
    return x1, k1, k4, stalled


def _substep_path(snap_t, snap_half, snap_next, x0, dt, nsub, cap, force=False):
    """Integrate x0 across dt in nsub RK4 sub-steps, using the nearest of the
    three available field snapshots at each stage time."""
    x = x0.copy()
    h = dt / nsub

    def vel(frac, pts):
        if frac < 0.25:
            v, _ = snap_t.velocity(pts)
        elif frac < 0.75:
            v, _ = snap_half.velocity(pts)
        else:
            v, _ = snap_next.velocity(pts)
        return v

    for i in range(nsub):
        f0 = i / nsub
        fh = (i + 0.5) / nsub
        f1 = (i + 1.0) / nsub
        k1 = vel(f0, x)
        k2 = vel(fh, x + 0.5 * h * k1)
        k3 = vel(fh, x + 0.5 * h * k2)
        k4 = vel(f1, x + h * k3)
        xn = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not force and np.any(np.linalg.norm(xn - x, axis=1) > cap):
            return None
        x = xn
    return x


# ---------------------------------------------------------------------------
# detection and ensemble statistics


def detect_crossings(ens: TrajectoryEnsemble, det: DetectorSpec, i: int) -> CrossingRecord:
    """CrossingRecord of trajectory i at the detector's primary radius."""
    return ens.tracker.record(det.radius, i)


def detection_matrix(ens: TrajectoryEnsemble, det: DetectorSpec) -> np.ndarray:
    """N_det indicator per (trajectory, scored bin): 1 iff the start lay inside
    the sphere, a first outward crossing happened, and its direction fell in
    the bin."""
    m = ens.tracker.radius_index(det.radius)
    q0_inside = np.linalg.norm(ens.q0, axis=1) <= det.radius
    exited = np.isfinite(ens.tracker.t_exit[m])
    out = np.zeros((ens.n, det.n_bins), dtype=np.int8)
    ok = q0_inside & exited
    if ok.any():
        bins = det.classify(ens.tracker.exit_dir[m, ok])
        rows = np.nonzero(ok)[0]
        scored = bins >= 0
        out[rows[scored], bins[scored]] = 1
    return out


@dataclass
class CrossingStats:
    mean_n_sig: float
    se_n_sig: float
    mean_n_tot: float
    mean_n_minus: float
    se_n_minus: float
    mean_n_sig_per_bin: np.ndarray
    se_n_sig_per_bin: np.ndarray
    p_det_per_bin: np.ndarray
    se_p_det_per_bin: np.ndarray
    n_traj: int
    counts: dict = dc_field(default_factory=dict)


def crossing_expectations(
    ens: TrajectoryEnsemble, det: DetectorSpec, radius: float | None = None
) -> CrossingStats:
    """Monte Carlo means with standard errors over a |psi_0|^2 ensemble."""
    R = det.radius if radius is None else radius
    m = ens.tracker.radius_index(R)
    n = ens.n
    nsig = (ens.tracker.n_plus[m] - ens.tracker.n_minus[m]).astype(float)
    ntot = (ens.tracker.n_plus[m] + ens.tracker.n_minus[m]).astype(float)
    nmin = ens.tracker.n_minus[m].astype(float)

    if ens.tracker.nsig_bin is not None and m == ens.tracker.primary:
        per_bin = ens.tracker.nsig_bin.astype(float)
    else:
        per_bin = np.zeros((n, det.n_bins))

    if R == det.radius:
        detm = detection_matrix(ens, det).astype(float)
    else:
        detm = np.zeros((n, det.n_bins))
    p = detm.mean(axis=0)
    return CrossingStats(
        mean_n_sig=float(nsig.mean()),
        se_n_sig=float(nsig.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
        mean_n_tot=float(ntot.mean()),
        mean_n_minus=float(nmin.mean()),
        se_n_minus=float(nmin.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
        mean_n_sig_per_bin=per_bin.mean(axis=0),
        se_n_sig_per_bin=(
            per_bin.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(det.n_bins)
        ),
        p_det_per_bin=p,
        se_p_det_per_bin=np.sqrt(np.clip(p * (1 - p), 0.0, None) / n),
        n_traj=n,
        counts=ens.counts(),
    )


# ---------------------------------------------------------------------------
# equivariance check


def equivariance_chi2(
    positions: np.ndarray,
    field: ComplexField,
    n_cells: int = 4,
    half_width_sigmas: float = 2.5,
) -> tuple[float, float]:
    """Chi-square comparison of trajectory positions against |psi|^2 on an
    n_cells^3 partition around the density centroid.

    Cell edges snap to lattice-cube faces so each site's probability mass is
    assigned to exactly one cell. Mass and trajectories outside the box are
    pooled into one extra cell; cells with expected count below 5 are dropped.
    Returns (chi2_statistic, p_value).
    """
    g = field.grid
    dens = np.abs(field.values) ** 2 * g.dx**3
    total = dens.sum()
    ax = g.axis()
    center = np.empty(3)
    spread = 0.0
    for d in range(3):
        proj = dens.sum(axis=tuple(j for j in range(3) if j != d)) / total
        center[d] = float(np.dot(proj, ax))
        spread = max(spread, float(np.dot(proj, (ax - center[d]) ** 2)))
    half = half_width_sigmas * np.sqrt(spread)

    # integer number of lattice sites per cell; edges on cube faces
    m_sites = max(1, int(round(2.0 * half / n_cells / g.dx)))
    edges = []
    for d in range(3):
        i0 = int(round((center[d] - 0.5 * m_sites * n_cells * g.dx - ax[0]) / g.dx))
        i0 = min(max(i0, 0), g.n_per_axis - m_sites * n_cells)
        edges.append(ax[i0] - 0.5 * g.dx + np.arange(n_cells + 1) * m_sites * g.dx)

    exp_p = np.zeros((n_cells, n_cells, n_cells))
    idx_axes = []
    for d in range(3):
        di = np.digitize(ax, edges[d]) - 1
        di[(ax < edges[d][0]) | (ax >= edges[d][-1])] = -1
        idx_axes.append(di)
    IX, IY, IZ = np.meshgrid(*idx_axes, indexing="ij")
    ok = (IX >= 0) & (IY >= 0) & (IZ >= 0)
    np.add.at(exp_p, (IX[ok], IY[ok], IZ[ok]), dens[ok])
    exp_p /= total
    p_out = max(1.0 - exp_p.sum(), 0.0)

    pos = np.atleast_2d(positions)
    obs = np.zeros_like(exp_p)
    di = [np.digitize(pos[:, d], edges[d]) - 1 for d in range(3)]
    okp = np.ones(pos.shape[0], dtype=bool)
    for d in range(3):
        okp &= (di[d] >= 0) & (di[d] < n_cells)
    np.add.at(obs, (di[0][okp], di[1][okp], di[2][okp]), 1)
    n_out = int(np.count_nonzero(~okp))

    N = pos.shape[0]
    exp_counts = np.append(exp_p.ravel() * N, p_out * N)
    obs_counts = np.append(obs.ravel(), n_out)
    keep = exp_counts >= 5.0
    e = exp_counts[keep]
    o = obs_counts[keep]
    e = e * (o.sum() / e.sum())
    stat = float(np.sum((o - e) ** 2 / e))
    dof = max(int(keep.sum()) - 1, 1)
    pval = float(chi2_dist.sf(stat, dof))
    return stat, pval
