"""Time integration of the damped, forced BBM equation and trajectory norms.

The equation u_t - u_xxt + u - u_xx + u u_x = f becomes, mode by mode,

    (1 + xi^2) dc/dt = -(1 + xi^2) c + fhat - (i xi / 2) (u^2)hat,

so dc/dt = -c + (fhat - (i xi / 2)(u^2)hat) / (1 + xi^2): the linear part is a
uniform damping with symbol -1.  The torus variant
u_t - u_txx - u_xx + u_x + u u_x = f likewise gives

    dc/dt = -((xi^2 + i xi) / (1 + xi^2)) c + (fhat - (i xi/2)(u^2)hat) / (1 + xi^2).

Because the linear symbol is diagonal, integrating-factor (exponential)
schemes advance the linear, unforced part exactly; the first/second/fourth
order variants differ only in how they quadrature the nonlinear and forcing
terms.  Coefficient functions (e^z - 1)/z etc. are evaluated by averaging
over a small complex contour around z to avoid cancellation near z = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .csvio import write_csv
from .errors import (
    DivergenceError,
    GridMismatchError,
    UnsupportedProfileError,
    WindowError,
)
from .spectral import (
    Grid,
    ImethodParams,
    SpectralField,
    i_h1_norm,
    sobolev_norm,
    to_spectral,
)

__all__ = [
    "ForcingSpec",
    "SolverConfig",
    "Trajectory",
    "LwpReport",
    "linear_symbol",
    "rhs",
    "evolve",
    "linear_evolve",
    "linear_trajectory",
    "y_norm",
    "i_y1_norm",
    "lwp_bound_check",
    "write_trajectory_csv",
    "TRAJECTORY_CSV_HEADER",
]

VARIANTS = ("bbm_damped", "bbm_burgers_torus")
INTEGRATORS = ("exp_euler", "exp_rk2", "etdrk4")
SPATIAL_PROFILES = ("gaussian", "mode")
TEMPORAL_PROFILES = ("constant", "cosine", "custom")

TRAJECTORY_CSV_HEADER = ("t", "l2_norm", "h_ell_norm", "h1_I_norm")


@dataclass(frozen=True)
class ForcingSpec:
    """Separable forcing f(x, t) = amplitude * spatial(x) * temporal(t).

    Spatial profiles: gaussian(sigma, center) or a single cosine mode.
    Temporal profiles: constant, cosine with period theta, or a custom
    callable (which requires theta so the forcing stays periodic and its
    sup-in-time L2 norm stays computable).  When theta is set, evaluation
    reduces t modulo theta first, so f(x, t + theta) == f(x, t) bitwise
    whenever t + theta is exact in floating point.
    """

    amplitude: float
    spatial: str = "gaussian"
    sigma: float = 1.0
    center: float = 0.0
    mode_number: int = 1
    temporal: str = "constant"
    theta: Optional[float] = None
    custom_time: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if not np.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")
        if self.spatial not in SPATIAL_PROFILES:
            raise ValueError(f"unknown spatial profile {self.spatial!r}")
        if self.spatial == "gaussian" and not self.sigma > 0:
            raise ValueError("gaussian profile needs sigma > 0")
        if self.temporal not in TEMPORAL_PROFILES:
            raise ValueError(f"unknown temporal profile {self.temporal!r}")
        if self.temporal in ("cosine", "custom") and not (
            self.theta is not None and self.theta > 0
        ):
            raise ValueError(f"temporal profile {self.temporal!r} needs theta > 0")
        if self.temporal == "custom" and self.custom_time is None:
            raise ValueError("custom temporal profile needs custom_time")
        if self.theta is not None and not self.theta > 0:
            raise ValueError("theta must be positive when set")

    def spatial_values(self, grid: Grid) -> np.ndarray:
        if self.spatial == "gaussian":
            return np.exp(-((grid.x - self.center) ** 2) / (2.0 * self.sigma**2))
        xi = np.pi * self.mode_number / grid.L
        return np.cos(xi * (grid.x - self.center))

    def spatial_field(self, grid: Grid) -> SpectralField:
        """Spectral coefficients of amplitude * spatial(x)."""
        return _spatial_field(self, grid)

    def temporal_value(self, t: float) -> float:
        if self.theta is not None:
            t = math.fmod(t, self.theta)
        if self.temporal == "constant":
            return 1.0
        if self.temporal == "cosine":
            return math.cos(2.0 * math.pi * t / self.theta)
        return float(self.custom_time(t))

    def field_at(self, grid: Grid, t: float) -> SpectralField:
        base = self.spatial_field(grid)
        return SpectralField(grid, base.coeffs * self.temporal_value(t))

    def sup_l2_norm(self, grid: Grid) -> float:
        """sup over t of ||f(., t)||_{L2}."""
        base = sobolev_norm(self.spatial_field(grid), 0.0)
        if self.temporal in ("constant", "cosine"):
            return base
        samples = np.linspace(0.0, self.theta, 1001)
        peak = max(abs(self.temporal_value(float(s))) for s in samples)
        return base * peak


@lru_cache(maxsize=32)
def _spatial_field(spec: ForcingSpec, grid: Grid) -> SpectralField:
    return to_spectral(spec.amplitude * spec.spatial_values(grid), grid)


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    variant: str = "bbm_damped"
    integrator: str = "exp_rk2"
    dealias: bool = True
    nonlinear: bool = True
    store_stride: int = 1
    imethod: Optional[ImethodParams] = None

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if not (isinstance(self.store_stride, int) and self.store_stride >= 1):
            raise ValueError("store_stride must be an integer >= 1")


@dataclass
class Trajectory:
    """Snapshots with uniform spacing dt starting at t0, on one shared grid."""

    t0: float
    dt: float
    snapshots: list

    def __post_init__(self):
        if not self.snapshots:
            raise ValueError("a trajectory needs at least one snapshot")
        grid = self.snapshots[0].grid
        for snap in self.snapshots:
            if snap.grid != grid:
                raise GridMismatchError("snapshots live on different grids")

    def __len__(self) -> int:
        return len(self.snapshots)

    @property
    def grid(self) -> Grid:
        return self.snapshots[0].grid

    @property
    def t1(self) -> float:
        return self.t0 + (len(self.snapshots) - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.snapshots))

    def index_at(self, t: float, tol: float = 1e-9) -> int:
        pos = (t - self.t0) / self.dt
        idx = int(round(pos))
        if idx < 0 or idx >= len(self.snapshots):
            raise WindowError(
                f"t = {t:g} outside trajectory span [{self.t0:g}, {self.t1:g}]"
            )
        if abs(self.t0 + idx * self.dt - t) > tol * max(1.0, abs(t)):
            raise WindowError(f"t = {t!r} does not land on the trajectory mesh")
        return idx

    def window(self, tau: float, T: float) -> tuple:
        """Inclusive snapshot index range covering [tau, tau + T]."""
        if T <= 0:
            raise WindowError("window length T must be positive")
        return self.index_at(tau), self.index_at(tau + T)

    def slice(self, tau: float, T: float) -> "Trajectory":
        i0, i1 = self.window(tau, T)
        return Trajectory(
            self.t0 + i0 * self.dt, self.dt, list(self.snapshots[i0 : i1 + 1])
        )

    def norms(self, ell: float) -> np.ndarray:
        return np.array([sobolev_norm(s, ell) for s in self.snapshots])

    def i_h1_norms(self, params: ImethodParams) -> np.ndarray:
        return np.array([i_h1_norm(s, params) for s in self.snapshots])


def linear_symbol(grid: Grid, variant: str) -> np.ndarray:
    """Per-mode linear symbol lambda_k of the damped evolution."""
    if variant == "bbm_damped":
        return -np.ones(grid.M, dtype=np.complex128)
    if variant == "bbm_burgers_torus":
        return -(grid.xi**2 + 1j * grid.xi) / (1.0 + grid.xi**2)
    raise ValueError(f"unknown variant {variant!r}")


def _quadratic_coeffs(coeffs: np.ndarray, grid: Grid, dealias: bool) -> np.ndarray:
    c = np.where(grid.dealias_mask, coeffs, 0.0) if dealias else coeffs
    values = (np.fft.ifft(c * grid.phase) * grid.M).real
    out = np.fft.fft(values * values) * grid.phase / grid.M
    if dealias:
        out = np.where(grid.dealias_mask, out, 0.0)
    return out


def _nonlinear_term(
    coeffs: np.ndarray,
    grid: Grid,
    forcing_coeffs: np.ndarray,
    temporal: float,
    dealias: bool,
    nonlinear: bool,
) -> np.ndarray:
    total = forcing_coeffs * temporal
    if nonlinear:
        total = total - 0.5j * grid.xi * _quadratic_coeffs(coeffs, grid, dealias)
    return grid.helmholtz * total


def rhs(u: SpectralField, f_t: SpectralField, variant: str, dealias: bool = True) -> SpectralField:
    """Time derivative of u given the forcing snapshot f_t."""
    u._check_grid(f_t)
    grid = u.grid
    lam = linear_symbol(grid, variant)
    nonlin = _nonlinear_term(u.coeffs, grid, f_t.coeffs, 1.0, dealias, True)
    return SpectralField(grid, lam * u.coeffs + nonlin)


def _contour_mean(func, z: np.ndarray, n_points: int = 32) -> np.ndarray:
    points = np.exp(2j * np.pi * (np.arange(n_points) + 0.5) / n_points)
    zz = z[:, None] + points[None, :]
    return func(zz).mean(axis=1)


def _etd_coefficients(lam: np.ndarray, dt: float, integrator: str) -> dict:
    z = lam * dt
    real_input = bool(np.all(np.abs(lam.imag) == 0.0))

    def finish(arr):
        return arr.real if real_input else arr

    coeffs = {"E": finish(np.exp(z))}
    if integrator == "exp_euler":
        coeffs["phi1"] = finish(_contour_mean(lambda w: (np.exp(w) - 1.0) / w, z))
    elif integrator == "exp_rk2":
        coeffs["phi1"] = finish(_contour_mean(lambda w: (np.exp(w) - 1.0) / w, z))
        coeffs["phi2"] = finish(
            _contour_mean(lambda w: (np.exp(w) - 1.0 - w) / w**2, z)
        )
    elif integrator == "etdrk4":
        coeffs["E2"] = finish(np.exp(z / 2.0))
        coeffs["Q"] = dt * finish(
            _contour_mean(lambda w: (np.exp(w / 2.0) - 1.0) / w, z)
        )
        coeffs["f1"] = dt * finish(
            _contour_mean(
                lambda w: (-4.0 - w + np.exp(w) * (4.0 - 3.0 * w + w**2)) / w**3, z
            )
        )
        coeffs["f2"] = dt * finish(
            _contour_mean(lambda w: (2.0 + w + np.exp(w) * (w - 2.0)) / w**3, z)
        )
        coeffs["f3"] = dt * finish(
            _contour_mean(
                lambda w: (-4.0 - 3.0 * w - w**2 + np.exp(w) * (4.0 - w)) / w**3, z
            )
        )
    else:
        raise ValueError(f"unknown integrator {integrator!r}")
    return coeffs


def _resolve_steps(t0: float, t1: float, dt: float, tol: float = 1e-12) -> int:
    if not t1 > t0:
        raise ValueError(f"need t1 > t0, got [{t0!r}, {t1!r}]")
    span = t1 - t0
    n = int(round(span / dt))
    if n < 1 or abs(n * dt - span) > tol * max(1.0, abs(span)):
        raise ValueError(f"dt = {dt!r} does not divide the span {span!r}")
    return n


def evolve(
    u0: SpectralField,
    forcing: ForcingSpec,
    t0: float,
    t1: float,
    cfg: SolverConfig,
) -> Trajectory:
    """Integrate from u0 over [t0, t1]; exact on the linear, unforced part.

    Raises DivergenceError (with the step index) if any coefficient leaves
    the finite range.
    """
    grid = u0.grid
    n_steps = _resolve_steps(t0, t1, cfg.dt)
    if n_steps % cfg.store_stride != 0:
        raise ValueError("store_stride must divide the number of steps")
    lam = linear_symbol(grid, cfg.variant)
    etd = _etd_coefficients(lam, cfg.dt, cfg.integrator)
    fhat = forcing.spatial_field(grid).coeffs
    h = cfg.dt

    def nl(c, t):
        return _nonlinear_term(
            c, grid, fhat, forcing.temporal_value(t), cfg.dealias, cfg.nonlinear
        )

    c = u0.coeffs.copy()
    snapshots = [SpectralField(grid, c.copy())]
    # overflow in a blown-up nonlinear term is reported via DivergenceError,
    # not as a numpy warning
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(n_steps):
            t = t0 + step * h
            if cfg.integrator == "exp_euler":
                c = etd["E"] * c + h * etd["phi1"] * nl(c, t)
            elif cfg.integrator == "exp_rk2":
                n0 = nl(c, t)
                a = etd["E"] * c + h * etd["phi1"] * n0
                c = a + h * etd["phi2"] * (nl(a, t + h) - n0)
            else:  # etdrk4
                n0 = nl(c, t)
                a = etd["E2"] * c + etd["Q"] * n0
                na = nl(a, t + h / 2.0)
                b = etd["E2"] * c + etd["Q"] * na
                nb = nl(b, t + h / 2.0)
                cc = etd["E2"] * a + etd["Q"] * (2.0 * nb - n0)
                nc = nl(cc, t + h)
                c = (
                    etd["E"] * c
                    + etd["f1"] * n0
                    + 2.0 * etd["f2"] * (na + nb)
                    + etd["f3"] * nc
                )
            if not np.all(np.isfinite(c)):
                raise DivergenceError(step + 1, t0 + (step + 1) * h)
            if (step + 1) % cfg.store_stride == 0:
                snapshots.append(SpectralField(grid, c.copy()))
    return Trajectory(t0, h * cfg.store_stride, snapshots)


def _forced_convolution(
    lam: np.ndarray, elapsed: float, t_start: float, forcing: ForcingSpec
) -> np.ndarray:
    """Per-mode integral of e^{lam (t - s)} temporal(s) ds over [t_start, t], with
    t = t_start + elapsed, in closed form for constant and cosine profiles."""
    decay = np.exp(lam * elapsed)
    if forcing.temporal == "constant":
        out = np.empty_like(lam)
        nonzero = lam != 0
        out[nonzero] = (decay[nonzero] - 1.0) / lam[nonzero]
        out[~nonzero] = elapsed
        return out
    if forcing.temporal == "cosine":
        omega = 2.0 * np.pi / forcing.theta
        t_end = t_start + elapsed
        plus = (np.exp(1j * omega * t_end) - decay * np.exp(1j * omega * t_start)) / (
            1j * omega - lam
        )
        minus = (np.exp(-1j * omega * t_end) - decay * np.exp(-1j * omega * t_start)) / (
            -1j * omega - lam
        )
        return 0.5 * (plus + minus)
    raise UnsupportedProfileError(
        f"no closed form for temporal profile {forcing.temporal!r}; "
        "use evolve with nonlinear=False instead"
    )


def linear_evolve(
    phi: SpectralField,
    forcing: ForcingSpec,
    t: float,
    variant: str = "bbm_damped",
    t0: float = 0.0,
) -> SpectralField:
    """Exact (quadrature-free) solution of the linear damped problem.

    phi is the state at time t0; the result is the state at time t.  Only
    constant and cosine temporal profiles admit the closed form; anything
    else raises UnsupportedProfileError.
    """
    if t < t0:
        raise ValueError("t must be >= t0")
    grid = phi.grid
    lam = linear_symbol(grid, variant)
    decay = np.exp(lam * (t - t0))
    fhat = forcing.spatial_field(grid).coeffs
    conv = _forced_convolution(lam, t - t0, t0, forcing)
    coeffs = decay * phi.coeffs + grid.helmholtz * fhat * conv
    return SpectralField(grid, coeffs)


def linear_trajectory(
    phi: SpectralField,
    forcing: ForcingSpec,
    t0: float,
    t1: float,
    dt: float,
    variant: str = "bbm_damped",
) -> Trajectory:
    """Closed-form linear solution sampled on a uniform mesh."""
    n = _resolve_steps(t0, t1, dt)
    snapshots = [
        linear_evolve(phi, forcing, t0 + i * dt, variant=variant, t0=t0)
        for i in range(n + 1)
    ]
    return Trajectory(t0, dt, snapshots)


def _window_norms(values: np.ndarray, dt: float) -> float:
    sup = float(np.max(values))
    integral = float(np.trapezoid(values**2, dx=dt))
    return sup + math.sqrt(integral)


def y_norm(traj: Trajectory, ell: float, tau: float, T: float) -> float:
    """sup-in-time H^ell norm plus the square root of the time integral of the
    squared H^ell norm over [tau, tau + T] (trapezoid over snapshots)."""
    i0, i1 = traj.window(tau, T)
    values = np.array([sobolev_norm(s, ell) for s in traj.snapshots[i0 : i1 + 1]])
    return _window_norms(values, traj.dt)


def i_y1_norm(traj: Trajectory, params: ImethodParams, tau: float, T: float) -> float:
    """Same windowed norm built on the H^1 norms of the smoothed snapshots."""
    i0, i1 = traj.window(tau, T)
    values = np.array([i_h1_norm(s, params) for s in traj.snapshots[i0 : i1 + 1]])
    return _window_norms(values, traj.dt)


@dataclass(frozen=True)
class LwpReport:
    """Trajectory norm against data size, and their ratio (an empirical constant)."""

    lhs: float
    rhs_raw: float
    ratio: float


def lwp_bound_check(
    traj: Trajectory,
    phi: SpectralField,
    forcing: ForcingSpec,
    ell: float,
    tau: float,
    T: float,
) -> LwpReport:
    lhs = y_norm(traj, ell, tau, T)
    rhs_raw = sobolev_norm(phi, ell) + forcing.sup_l2_norm(traj.grid)
    if rhs_raw == 0.0:
        ratio = 0.0 if lhs == 0.0 else math.inf
    else:
        ratio = lhs / rhs_raw
    return LwpReport(lhs=lhs, rhs_raw=rhs_raw, ratio=ratio)


def write_trajectory_csv(
    traj: Trajectory,
    ell: float,
    params: ImethodParams,
    path,
    trailer: str | None = None,
) -> None:
    rows = []
    for t, snap in zip(traj.times, traj.snapshots):
        rows.append(
            (
                float(t),
                sobolev_norm(snap, 0.0),
                sobolev_norm(snap, ell),
                i_h1_norm(snap, params),
            )
        )
    write_csv(path, TRAJECTORY_CSV_HEADER, rows, trailer)
