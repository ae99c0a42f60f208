"""Co-stepped propagation: field half-steps feeding trajectory RK4 updates,
streaming flux accumulation, and run monitors.

Memory stays O(grid): only the rolling window of three snapshots is held.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .bohm import FieldSnapshot, TrajectoryEnsemble, advance_trajectories, equivariance_chi2
from .detector import DetectorSpec
from .fields import ComplexField
from .flux import FluxLedger, SphereFluxTracker, continuity_residual
from .propagator import PotentialModel, SplitOperator, extract_out_asymptote


@dataclass
class RunResult:
    field_final: ComplexField
    ensemble: TrajectoryEnsemble | None
    ledger: FluxLedger | None
    psi_out_hat: ComplexField | None
    t_end: float
    stop_reason: str
    diagnostics: dict = dc_field(default_factory=dict)
    extra_ledgers: list = dc_field(default_factory=list)


def _radial_mask(grid, radius):
    X, Y, Z = grid.meshes()
    return X**2 + Y**2 + Z**2 <= radius**2


def co_stepped_run(
    field0: ComplexField,
    V: PotentialModel,
    dt: float,
    t_max: float,
    detector: DetectorSpec | None = None,
    q0: np.ndarray | None = None,
    with_flux: bool = False,
    extra_flux_detectors: tuple = (),
    equivariance_times: tuple = (),
    continuity_times: tuple = (),
    monitor_stride: int = 10,
    inside_r_stop: float = 1e-4,
    boundary_soft: float = 1e-3,
    wrap_guard_speed: float | None = None,
    extract_asymptote: bool = False,
    overlap_tol_extract: float | None = None,
    path_dump_count: int = 0,
    path_dump_stride: int = 10,
) -> RunResult:
    """Evolve field0 under V while advancing trajectories and accumulating flux.

    The field steps at dt/2 so every trajectory step sees snapshots at
    (t, t + dt/2, t + dt). Stops at t_max, or when the probability inside the
    primary detector radius falls below inside_r_stop, or at the wrap guard:
    once the boundary-shell mass exceeds boundary_soft, the window is closed
    before wrapped probability can travel back to the detector sphere.
    """
    grid = field0.grid
    op = SplitOperator(V, grid, dt / 2.0)
    n_steps = int(round(t_max / dt))

    ens = None
    if q0 is not None:
        if detector is None:
            raise ValueError("trajectories need a detector (radii to track)")
        ens = TrajectoryEnsemble(q0, grid, detector.radii, detector)

    tracker = SphereFluxTracker(detector, grid) if (with_flux and detector is not None) else None
    extra_trackers = [SphereFluxTracker(d, grid) for d in extra_flux_detectors]
    inside_mask = _radial_mask(grid, detector.radius) if detector is not None else None

    vals = field0.values
    t = field0.time
    snap0 = FieldSnapshot(vals, grid, t)
    for tk in ([tracker] if tracker is not None else []) + extra_trackers:
        tk.sample(snap0)

    diag: dict = {
        "equivariance": [],
        "continuity": [],
        "norm_drift": 0.0,
        "max_boundary_mass": 0.0,
        "inside_R_series": [],
    }
    eq_times = sorted(equivariance_times)
    ct_times = sorted(continuity_times)
    prev_full_vals = vals
    deadline = np.inf
    stop_reason = "t_max"
    paths: list[tuple[float, np.ndarray]] = []
    if path_dump_count > 0 and ens is not None:
        paths.append((t, ens.positions[:path_dump_count].copy()))

    dx3 = grid.dx**3
    norm0 = float(np.sum(np.abs(vals) ** 2) * dx3)

    step = 0
    while step < n_steps:
        vals_h = op.step_values(vals)
        snap_h = FieldSnapshot(vals_h, grid, t + dt / 2.0)
        vals_n = op.step_values(vals_h)
        snap_n = FieldSnapshot(vals_n, grid, t + dt)

        if ens is not None:
            advance_trajectories(snap0, snap_h, snap_n, ens, dt)
        for tk in ([tracker] if tracker is not None else []) + extra_trackers:
            tk.sample(snap_h)
            tk.sample(snap_n)

        t += dt
        vals = vals_n
        step += 1
        snap0 = snap_n
        if path_dump_count > 0 and ens is not None and step % path_dump_stride == 0:
            paths.append((t, ens.positions[:path_dump_count].copy()))

        while eq_times and t >= eq_times[0] - dt / 2.0:
            target = eq_times.pop(0)
            if ens is not None:
                stat, pval = equivariance_chi2(ens.positions, ComplexField(grid, vals, t))
                diag["equivariance"].append({"t": t, "target_t": target, "chi2": stat, "p": pval})
        while ct_times and t >= ct_times[0] - dt / 2.0:
            ct_times.pop(0)
            res = continuity_residual(
                ComplexField(grid, prev_full_vals, t - dt), ComplexField(grid, vals, t), dt
            )
            peak = float(np.max(np.abs(vals) ** 2))
            diag["continuity"].append({"t": t, "residual": res, "peak_density": peak})
        prev_full_vals = vals

        if step % monitor_stride == 0 or step == n_steps:
            dens_sum = float(np.sum(np.abs(vals) ** 2) * dx3)
            diag["norm_drift"] = max(diag["norm_drift"], abs(dens_sum - norm0))
            n = grid.n_per_axis
            dens = np.abs(vals) ** 2 * dx3
            shell = (
                dens[:2].sum() + dens[-2:].sum()
                + dens[:, :2].sum() + dens[:, -2:].sum()
                + dens[:, :, :2].sum() + dens[:, :, -2:].sum()
            )
            diag["max_boundary_mass"] = max(diag["max_boundary_mass"], float(shell))
            if inside_mask is not None:
                inside = float(dens[inside_mask].sum())
                diag["inside_R_series"].append({"t": t, "inside": inside})
                if inside < inside_r_stop:
                    stop_reason = "inside_r_stop"
                    break
            if shell > boundary_soft and np.isinf(deadline):
                speed = wrap_guard_speed if wrap_guard_speed is not None else 3.0
                margin = grid.box_extent / 2.0 - (detector.radii[-1] if detector else 0.0)
                deadline = t + margin / speed
            if t >= deadline:
                stop_reason = "wrap_guard"
                break

    field_final = ComplexField(grid, vals, t)
    inside_end = float((np.abs(vals) ** 2 * dx3)[inside_mask].sum()) if inside_mask is not None else 0.0
    ledger = None
    if tracker is not None:
        ledger = tracker.ledger(
            truncation_inside_R=inside_end,
            boundary_leakage=diag["max_boundary_mass"],
        )
    extra_ledgers = [
        tk.ledger(
            truncation_inside_R=float((np.abs(vals) ** 2 * dx3)[_radial_mask(grid, tk.detector.radius)].sum()),
            boundary_leakage=diag["max_boundary_mass"],
        )
        for tk in extra_trackers
    ]
    psi_out = None
    if extract_asymptote:
        psi_out = extract_out_asymptote(
            field_final, t, V if overlap_tol_extract is not None else None,
            overlap_tol=overlap_tol_extract or 1e-6,
        )
    diag["t_end"] = t
    diag["stop_reason"] = stop_reason
    if ens is not None:
        diag["trajectory_counts"] = ens.counts()
        diag["max_step_displacement"] = ens.max_displacement_seen
    if paths:
        diag["paths"] = paths
    return RunResult(
        field_final=field_final,
        ensemble=ens,
        ledger=ledger,
        psi_out_hat=psi_out,
        t_end=t,
        stop_reason=stop_reason,
        diagnostics=diag,
        extra_ledgers=extra_ledgers,
    )


def path_csv_rows(paths, trajectory: int) -> list[str]:
    """Sampled path of one dumped trajectory as t,x,y,z rows."""
    rows = ["t,x,y,z"]
    for t, block in paths:
        p = block[trajectory]
        rows.append(f"{float(t)!r},{float(p[0])!r},{float(p[1])!r},{float(p[2])!r}")
    return rows
