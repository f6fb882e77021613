"""Constructive splitting u = v + z: exact linear solve plus a fixed-point
correction.

With v solving the linear damped problem, the remainder z (with z(0) = 0)
satisfies the mild equation

    z(t) = -int_tau^t e^{-(t-s)} J S (q q_x + (q v)_x + v v_x)(s) ds,

where J = (I - d_xx)^{-1} and S is the frequency-cutoff smoothing operator.
Since q q_x + (q v)_x + v v_x = d_x((q + v)^2) / 2, the integrand is a single
derivative of a square.  The map q -> G(q; v) defined by that integral is a
contraction for small v, and its fixed point is found by Picard iteration
from q_0 = 0.  The exponential kernel lets the trapezoid quadrature advance
recursively: J_n = e^{-dt} J_{n-1} + (dt/2)(F_n + e^{-dt} F_{n-1}).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .csvio import write_csv
from .dynamics import Trajectory, i_y1_norm, y_norm
from .errors import GridMismatchError, NoConvergenceError, WindowError
from .spectral import (
    ImethodParams,
    SpectralField,
    i_h1_norm,
    i_multiplier,
)

__all__ = [
    "PicardReport",
    "WindowReport",
    "apply_G",
    "picard_solve_z",
    "window_bound_check",
    "write_picard_csv",
    "write_window_csv",
    "PICARD_CSV_HEADER",
    "WINDOW_CSV_HEADER",
]

PICARD_CSV_HEADER = ("iter", "update_norm", "ratio")
WINDOW_CSV_HEADER = (
    "k",
    "tau",
    "z_h1_start",
    "z_h1_end",
    "z_y1_window",
    "v_y1_window",
    "y1_bound_rhs",
    "y1_ok",
    "implied_ct",
    "mesh_ok",
)


@dataclass
class PicardReport:
    """Iteration diagnostics for the fixed-point solve."""

    iterations: int
    update_norms: list
    final_residual: float
    contraction_factor: Optional[float]
    z_y1_norm: float
    v_y1_norm: float
    z_to_v_ratio: float
    within_v_ball: bool
    converged: bool


@dataclass(frozen=True)
class WindowReport:
    """Per-window smallness diagnostics on the mesh {0, T, 2T, ...}.

    Window k covers [(k-1) T, k T].  y1_ok checks the windowed bound
    ||S z||_{Y1} <= 2 ||S z(tau)||_{H1} + 2 ||S v||_{Y1}; mesh_ok checks the
    one-step recursion with a constant calibrated on the first window.
    """

    k: int
    tau: float
    z_h1_start: float
    z_h1_end: float
    z_y1_window: float
    v_y1_window: float
    y1_bound_rhs: float
    y1_ok: bool
    implied_ct: float
    mesh_ok: bool


def _check_shared_mesh(q: Trajectory, v: Trajectory) -> None:
    if q.grid != v.grid:
        raise GridMismatchError("trajectories live on different grids")
    if abs(q.dt - v.dt) > 1e-12 * max(q.dt, v.dt):
        raise GridMismatchError(
            f"trajectory meshes differ: dt = {q.dt!r} vs {v.dt!r}"
        )


def apply_G(
    q: Trajectory,
    v: Trajectory,
    params: ImethodParams,
    tau: float,
    T: float,
) -> Trajectory:
    """Evaluate the Duhamel map t -> G(q; v)(t) on [tau, tau + T].

    Quadrature is the trapezoid rule on the trajectory mesh with the exact
    kernel e^{-(t - s)} folded in recursively.
    """
    _check_shared_mesh(q, v)
    qs = q.slice(tau, T)
    vs = v.slice(tau, T)
    grid = qs.grid
    dt = qs.dt
    n = len(qs) - 1
    m = i_multiplier(grid.xi, params)
    weight = m * grid.helmholtz * (0.5j * grid.xi)

    def integrand(i):
        total = qs.snapshots[i] + vs.snapshots[i]
        c = np.where(grid.dealias_mask, total.coeffs, 0.0)
        values = (np.fft.ifft(c * grid.phase) * grid.M).real
        sq = np.fft.fft(values * values) * grid.phase / grid.M
        sq = np.where(grid.dealias_mask, sq, 0.0)
        return weight * sq

    decay = math.exp(-dt)
    snapshots = [SpectralField.zeros(grid)]
    previous = integrand(0)
    accum = np.zeros(grid.M, dtype=np.complex128)
    for i in range(1, n + 1):
        current = integrand(i)
        accum = decay * accum + 0.5 * dt * (current + decay * previous)
        snapshots.append(SpectralField(grid, -accum))
        previous = current
    return Trajectory(qs.t0, dt, snapshots)


def _update_norm(a: Trajectory, b: Trajectory, tau: float, T: float) -> float:
    diff = Trajectory(
        a.t0, a.dt, [sa - sb for sa, sb in zip(a.snapshots, b.snapshots)]
    )
    return y_norm(diff, 1.0, tau, T)


def picard_solve_z(
    v: Trajectory,
    params: ImethodParams,
    tau: float,
    T: float,
    tol: float,
    max_iter: int = 25,
    contraction_threshold: float = 0.05,
) -> tuple:
    """Fixed point of G by Picard iteration from q_0 = 0.

    Returns (z, PicardReport).  Warns when ||S v||_{Y1} exceeds the
    configured contraction threshold; raises NoConvergenceError (report
    attached) when updates stop shrinking or max_iter is exhausted.
    """
    vs = v.slice(tau, T)
    v_y1 = i_y1_norm(vs, params, tau, T)
    if v_y1 > contraction_threshold:
        warnings.warn(
            f"||S v||_Y1 = {v_y1:.3e} exceeds the contraction threshold "
            f"{contraction_threshold:.3e}; the iteration may not contract",
            stacklevel=2,
        )
    grid = vs.grid
    q = Trajectory(
        vs.t0, vs.dt, [SpectralField.zeros(grid) for _ in range(len(vs))]
    )
    update_norms: list = []

    def build_report(converged: bool) -> PicardReport:
        factor = None
        if len(update_norms) >= 3:
            ratios = [
                update_norms[i + 1] / update_norms[i]
                for i in range(len(update_norms) - 1)
                if update_norms[i] > 0
            ]
            if ratios:
                factor = float(np.median(ratios))
        z_y1 = i_y1_norm(q, params, tau, T)
        ratio = z_y1 / v_y1 if v_y1 > 0 else 0.0
        return PicardReport(
            iterations=len(update_norms),
            update_norms=list(update_norms),
            final_residual=update_norms[-1] if update_norms else 0.0,
            contraction_factor=factor,
            z_y1_norm=z_y1,
            v_y1_norm=v_y1,
            z_to_v_ratio=ratio,
            within_v_ball=z_y1 <= v_y1,
            converged=converged,
        )

    for _ in range(max_iter):
        q_next = apply_G(q, vs, params, tau, T)
        update_norms.append(_update_norm(q_next, q, tau, T))
        q = q_next
        if update_norms[-1] <= tol:
            return q, build_report(True)
        if (
            len(update_norms) >= 3
            and update_norms[-1] >= update_norms[-2]
            and update_norms[-2] >= update_norms[-3]
        ):
            raise NoConvergenceError(
                "update norms non-decreasing over 3 iterations",
                report=build_report(False),
            )
    raise NoConvergenceError(
        f"no convergence within {max_iter} iterations "
        f"(last update {update_norms[-1]:.3e} > tol {tol:.3e})",
        report=build_report(False),
    )


def window_bound_check(
    z: Trajectory,
    v: Trajectory,
    params: ImethodParams,
    T: float,
    ct_slack: float = 2.0,
) -> list:
    """Windowed smallness diagnostics on the mesh {0, T, 2T, ...}.

    Requires both trajectories to span at least 3 windows.  The recursion
    constant is calibrated on the first window (where z starts from 0) and
    checked with slack ct_slack on the rest.
    """
    _check_shared_mesh(z, v)
    span = (len(z) - 1) * z.dt
    windows = int(math.floor(span / T + 1e-9))
    if windows < 3:
        raise WindowError(
            f"span {span:g} holds only {windows} windows of length {T:g}; need >= 3"
        )
    decay = math.exp(-T)
    reports = []
    ct_cal = None
    for k in range(1, windows + 1):
        tau = (k - 1) * T
        start = z.t0 + tau
        z_h1_start = i_h1_norm(z.snapshots[z.index_at(start)], params)
        z_h1_end = i_h1_norm(z.snapshots[z.index_at(start + T)], params)
        z_y1 = i_y1_norm(z, params, start, T)
        v_y1 = i_y1_norm(v, params, start, T)
        y1_rhs = 2.0 * z_h1_start + 2.0 * v_y1
        y1_ok = z_y1 <= y1_rhs * (1.0 + 1e-12)
        denom = z_h1_start**2 + v_y1**2
        implied = max(0.0, z_h1_end - decay * z_h1_start) / denom if denom > 0 else 0.0
        if ct_cal is None:
            ct_cal = implied
            mesh_ok = True
        else:
            bound = decay * z_h1_start + ct_slack * ct_cal * denom
            mesh_ok = z_h1_end <= bound * (1.0 + 1e-12)
        reports.append(
            WindowReport(
                k=k,
                tau=tau,
                z_h1_start=z_h1_start,
                z_h1_end=z_h1_end,
                z_y1_window=z_y1,
                v_y1_window=v_y1,
                y1_bound_rhs=y1_rhs,
                y1_ok=y1_ok,
                implied_ct=implied,
                mesh_ok=mesh_ok,
            )
        )
    return reports


def write_picard_csv(report: PicardReport, path, trailer: str | None = None) -> None:
    rows = []
    for i, update in enumerate(report.update_norms):
        previous = report.update_norms[i - 1] if i > 0 else 0.0
        ratio = update / previous if previous > 0 else None
        rows.append((i + 1, update, ratio))
    write_csv(path, PICARD_CSV_HEADER, rows, trailer)


def write_window_csv(reports, path, trailer: str | None = None) -> None:
    rows = [
        (
            r.k,
            r.tau,
            r.z_h1_start,
            r.z_h1_end,
            r.z_y1_window,
            r.v_y1_window,
            r.y1_bound_rhs,
            r.y1_ok,
            r.implied_ct,
            r.mesh_ok,
        )
        for r in reports
    ]
    write_csv(path, WINDOW_CSV_HEADER, rows, trailer)
