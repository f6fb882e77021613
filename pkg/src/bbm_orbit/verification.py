"""Empirical verification of the smoothing-operator inequalities.

Three checks, each reported as worst-case ratios over seeded random samples:

  equivalence:  c_low ||g||_{H^ell} <= ||S g||_{H^1} <= c_high N^{1-ell} ||g||_{H^ell},
                with both empirical constants stable across a grid of N;
  bilinear:     int_0^T ||J S (u v_x)||_{H^1} ds <= C_T ||S u||_{Y1} ||S v||_{Y1},
                with the empirical C_T growing at most linearly in T;
  trilinear:    |(S(u v)_x, S w)| <= C N^{-3/2+eps} prod ||S .||_{H^1},
                probed with adversarial samples whose spectra concentrate
                near |xi| = N, where a log-log fit of the worst ratio versus
                N must come out at least as steep as -3/2 + eps.

S is the frequency-cutoff smoothing operator and J = (I - d_xx)^{-1}.
Random broadband fields decay much faster than the worst case and would
pass the trilinear slope vacuously; the near-band sampler exists precisely
to avoid that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .csvio import write_csv
from .dynamics import Trajectory, i_y1_norm
from .errors import GridMismatchError, ResolutionError
from .spectral import (
    Grid,
    ImethodParams,
    SpectralField,
    derivative,
    helmholtz_inverse,
    i_h1_norm,
    i_operator,
    nonlinear_product,
    sobolev_norm,
)

__all__ = [
    "WhiteBand",
    "PowerLaw",
    "LocalizedBump",
    "NearBand",
    "EstimateReport",
    "sample_fields",
    "sample_trajectory_pairs",
    "adversarial_triples",
    "trilinear_form",
    "verify_equivalence",
    "verify_bilinear",
    "verify_trilinear",
    "calibrate_trilinear_constant",
    "fit_loglog_slope",
    "write_report_csv",
    "format_report",
    "REPORT_CSV_HEADER",
]

REPORT_CSV_HEADER = ("inequality", "N", "worst_ratio", "slope", "pass")


@dataclass(frozen=True)
class WhiteBand:
    """Flat random spectrum on 1 <= k <= k_max (default M/3)."""

    k_max: Optional[int] = None


@dataclass(frozen=True)
class PowerLaw:
    """Random spectrum with |c_k| ~ k^{-alpha} on 1 <= k <= k_max."""

    alpha: float = 1.0
    k_max: Optional[int] = None


@dataclass(frozen=True)
class LocalizedBump:
    """Random Gaussian bumps in physical space."""

    width_min: float = 0.5
    width_max: float = 2.0


@dataclass(frozen=True)
class NearBand:
    """Random spectrum concentrated on |k - center| <= width."""

    center: int
    width: int


def _band_coeffs(rng, grid: Grid, k_lo: int, k_hi: int, envelope=None) -> np.ndarray:
    k_hi = min(k_hi, grid.M // 2 - 1)
    coeffs = np.zeros(grid.M, dtype=np.complex128)
    if k_hi < k_lo:
        return coeffs
    ks = np.arange(k_lo, k_hi + 1)
    amp = np.ones(ks.size) if envelope is None else envelope(ks)
    draw = rng.standard_normal((ks.size, 2))
    coeffs[ks] = amp * (draw[:, 0] + 1j * draw[:, 1]) / np.sqrt(2.0)
    coeffs[-ks] = np.conj(coeffs[ks])
    return coeffs


def _sample_one(rng, grid: Grid, profile) -> SpectralField:
    if isinstance(profile, WhiteBand):
        k_max = profile.k_max or grid.M // 3
        return SpectralField(grid, _band_coeffs(rng, grid, 1, k_max))
    if isinstance(profile, PowerLaw):
        k_max = profile.k_max or grid.M // 3
        coeffs = _band_coeffs(
            rng, grid, 1, k_max, envelope=lambda ks: ks ** (-float(profile.alpha))
        )
        return SpectralField(grid, coeffs)
    if isinstance(profile, LocalizedBump):
        center = rng.uniform(-grid.L / 2, grid.L / 2)
        width = rng.uniform(profile.width_min, profile.width_max)
        height = rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0])
        values = height * np.exp(-((grid.x - center) ** 2) / (2 * width**2))
        coeffs = np.fft.fft(values) * grid.phase / grid.M
        return SpectralField(grid, coeffs)
    if isinstance(profile, NearBand):
        lo = max(1, profile.center - profile.width)
        hi = profile.center + profile.width
        return SpectralField(grid, _band_coeffs(rng, grid, lo, hi))
    raise ValueError(f"unknown spectrum profile {profile!r}")


def sample_fields(seed: int, count: int, grid: Grid, profile) -> list:
    """Deterministic (seeded) real random fields with the given envelope."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return [_sample_one(rng, grid, profile) for _ in range(count)]


def sample_trajectory_pairs(
    seed: int,
    count: int,
    grid: Grid,
    t1: float,
    dt: float,
    profile=None,
    kind: str = "oscillating",
) -> list:
    """Seeded synthetic trajectory pairs for time-integrated estimates.

    kind="oscillating" modulates two random fields by cos/sin with a random
    frequency; kind="constant" holds one field fixed in time.
    """
    if kind not in ("oscillating", "constant"):
        raise ValueError(f"unknown trajectory kind {kind!r}")
    profile = profile or PowerLaw(alpha=1.0)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n = int(round(t1 / dt))
    times = dt * np.arange(n + 1)
    pairs = []
    for _ in range(count):
        members = []
        for _ in range(2):
            g1 = _sample_one(rng, grid, profile)
            if kind == "constant":
                snaps = [g1.copy() for _ in times]
            else:
                g2 = _sample_one(rng, grid, profile)
                omega = rng.uniform(0.5, 2.0)
                snaps = [
                    SpectralField(
                        grid,
                        g1.coeffs * math.cos(omega * t) + g2.coeffs * math.sin(omega * t),
                    )
                    for t in times
                ]
            members.append(Trajectory(0.0, dt, snaps))
        pairs.append(tuple(members))
    return pairs


def adversarial_triples(seed: int, count: int, grid: Grid, n_value: float) -> list:
    """Near-threshold triples (u, v, w) with interacting frequency bands.

    u sits near xi = N, v near N/2, and w on both difference and sum bands
    (N/2 and 3N/2), so the paired product (u v)_x genuinely overlaps w.
    """
    k_n = int(round(n_value * grid.L / np.pi))
    if k_n < 4:
        raise ResolutionError(f"N = {n_value} is too small for the grid spacing")
    width = max(1, k_n // 8)
    rng = np.random.default_rng(np.random.SeedSequence([seed, k_n]))
    triples = []
    for _ in range(count):
        u = SpectralField(grid, _band_coeffs(rng, grid, k_n - width, k_n + width))
        v = SpectralField(
            grid, _band_coeffs(rng, grid, k_n // 2 - width, k_n // 2 + width)
        )
        w_low = _band_coeffs(rng, grid, k_n // 2 - 2 * width, k_n // 2 + 2 * width)
        w_high = _band_coeffs(
            rng, grid, 3 * k_n // 2 - 2 * width, 3 * k_n // 2 + 2 * width
        )
        w = SpectralField(grid, w_low + w_high)
        triples.append((u, v, w))
    return triples


def trilinear_form(
    u: SpectralField,
    v: SpectralField,
    w: SpectralField,
    params: ImethodParams,
    method: str = "spectral",
) -> float:
    """(S (u v)_x, S w) in L^2, evaluated spectrally or by physical quadrature."""
    flux = i_operator(derivative(nonlinear_product(u, v)), params)
    smoothed_w = i_operator(w, params)
    grid = u.grid
    if method == "spectral":
        return 2.0 * grid.L * float(
            np.real(np.sum(flux.coeffs * np.conj(smoothed_w.coeffs)))
        )
    if method == "physical":
        a = (np.fft.ifft(flux.coeffs * grid.phase) * grid.M).real
        b = (np.fft.ifft(smoothed_w.coeffs * grid.phase) * grid.M).real
        return 2.0 * grid.L / grid.M * float(np.sum(a * b))
    raise ValueError(f"unknown method {method!r}")


@dataclass
class EstimateReport:
    """Worst-case ratios for one inequality, per N (or per T), plus a log-log
    slope when at least four grid values are available."""

    inequality: str
    sample_count: int
    worst_ratio: float
    per_n: dict
    slope: Optional[float]
    slope_stderr: Optional[float]
    passed: bool
    details: dict = field(default_factory=dict)


def fit_loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> tuple:
    """Least-squares slope of log y against log x with its standard error."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    design = np.vstack([np.ones_like(lx), lx]).T
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    fitted = design @ coef
    dof = max(1, lx.size - 2)
    sigma2 = float(np.sum((ly - fitted) ** 2)) / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    return float(coef[1]), float(np.sqrt(cov[1, 1]))


def verify_equivalence(
    fields: Sequence[SpectralField],
    ell: float,
    n_grid: Sequence[float],
    lower_min: float = 0.9,
    stability_factor: float = 2.0,
) -> EstimateReport:
    """Two-sided norm comparison between ||S g||_{H^1} and ||g||_{H^ell}."""
    if not (0.0 <= ell < 1.0):
        raise ValueError(f"ell must lie in [0, 1), got {ell!r}")
    if len(n_grid) < 2:
        raise ValueError("need at least 2 values of N")
    lower = {}
    upper = {}
    for n_value in n_grid:
        params = ImethodParams(ell=ell, N=n_value)
        lows = []
        ups = []
        for g in fields:
            h_ell = sobolev_norm(g, ell)
            if h_ell == 0.0:
                continue
            smoothed = i_h1_norm(g, params)
            lows.append(smoothed / h_ell)
            ups.append(smoothed / (n_value ** (1.0 - ell) * h_ell))
        lower[n_value] = min(lows)
        upper[n_value] = max(ups)
    lo_vals = np.array(list(lower.values()))
    up_vals = np.array(list(upper.values()))
    passed = (
        float(np.min(lo_vals)) >= lower_min
        and float(np.max(up_vals) / np.min(up_vals)) <= stability_factor
        and float(np.max(lo_vals) / np.min(lo_vals)) <= stability_factor
    )
    slope = stderr = None
    if len(n_grid) >= 4:
        slope, stderr = fit_loglog_slope(list(upper.keys()), list(upper.values()))
    return EstimateReport(
        inequality="equivalence",
        sample_count=len(fields),
        worst_ratio=float(np.max(up_vals)),
        per_n=dict(upper),
        slope=slope,
        slope_stderr=stderr,
        passed=passed,
        details={
            "lower_per_n": dict(lower),
            "lower_min": lower_min,
            "stability_factor": stability_factor,
            "ell": ell,
        },
    )


def verify_bilinear(
    pairs: Sequence,
    params: ImethodParams,
    t_grid: Sequence[float],
    growth_factor: float = 3.0,
) -> EstimateReport:
    """Time-integrated product estimate against the window norms.

    The empirical constant ratio(T) must stay within growth_factor across
    the T grid and must grow sublinearly: ratio(T)/T calibrated at the
    smallest T bounds the rest.
    """
    t_grid = sorted(t_grid)
    per_t = {}
    for t_value in t_grid:
        worst = 0.0
        for u, v in pairs:
            if u.grid != v.grid:
                raise GridMismatchError("pair members live on different grids")
            i1 = u.index_at(t_value)
            integrand = np.empty(i1 + 1)
            for i in range(i1 + 1):
                term = helmholtz_inverse(
                    i_operator(
                        nonlinear_product(u.snapshots[i], derivative(v.snapshots[i])),
                        params,
                    )
                )
                integrand[i] = sobolev_norm(term, 1.0)
            lhs = float(np.trapezoid(integrand, dx=u.dt))
            rhs = i_y1_norm(u, params, 0.0, t_value) * i_y1_norm(v, params, 0.0, t_value)
            if rhs > 0:
                worst = max(worst, lhs / rhs)
        per_t[t_value] = worst
    values = np.array(list(per_t.values()))
    t_min = t_grid[0]
    linear_cal = per_t[t_min] / t_min
    sublinear = all(
        per_t[t] <= linear_cal * t * (1.0 + 1e-9) for t in t_grid
    )
    vmax, vmin = float(np.max(values)), float(np.min(values))
    if vmax == 0.0:
        stable = True
    elif vmin == 0.0:
        stable = False
    else:
        stable = vmax / vmin <= growth_factor
    slope = stderr = None
    if len(t_grid) >= 4:
        slope, stderr = fit_loglog_slope(t_grid, values)
    return EstimateReport(
        inequality="bilinear",
        sample_count=len(pairs),
        worst_ratio=float(np.max(values)),
        per_n=dict(per_t),
        slope=slope,
        slope_stderr=stderr,
        passed=bool(stable and sublinear),
        details={
            "growth_factor": growth_factor,
            "ratio_over_t": {t: per_t[t] / t for t in t_grid},
            "sublinear": sublinear,
            "stable": stable,
        },
    )


def verify_trilinear(
    triples_by_n: Mapping,
    ell: float,
    eps: float = 0.25,
    grid: Optional[Grid] = None,
) -> EstimateReport:
    """Slope check of the worst frequency-interaction ratio against N.

    triples_by_n maps each N to its adversarial (u, v, w) samples.  The grid
    must resolve 4x the largest N; the fitted log-log slope must be at most
    -3/2 + eps.
    """
    n_grid = sorted(triples_by_n.keys())
    if len(n_grid) < 4:
        raise ValueError("need at least 4 values of N for the slope fit")
    some_triple = next(iter(triples_by_n[n_grid[0]]))
    grid = grid or some_triple[0].grid
    if grid.xi_max < 4.0 * max(n_grid):
        raise ResolutionError(
            f"grid resolves |xi| <= {grid.xi_max:g} < 4 * max(N) = {4 * max(n_grid):g}"
        )
    per_n = {}
    ratios_all = {}
    for n_value in n_grid:
        params = ImethodParams(ell=ell, N=n_value)
        ratios = []
        for u, v, w in triples_by_n[n_value]:
            numerator = abs(trilinear_form(u, v, w, params))
            denominator = (
                i_h1_norm(u, params) * i_h1_norm(v, params) * i_h1_norm(w, params)
            )
            if denominator > 0:
                ratios.append(numerator / denominator)
        per_n[n_value] = max(ratios)
        ratios_all[n_value] = ratios
    slope, stderr = fit_loglog_slope(n_grid, [per_n[n] for n in n_grid])
    target = -1.5 + eps
    passed = slope <= target
    return EstimateReport(
        inequality="trilinear",
        sample_count=sum(len(v) for v in triples_by_n.values()),
        worst_ratio=float(max(per_n.values())),
        per_n=dict(per_n),
        slope=slope,
        slope_stderr=stderr,
        passed=passed,
        details={"eps": eps, "slope_target": target, "ell": ell, "ratios": ratios_all},
    )


def calibrate_trilinear_constant(report: EstimateReport, eps: float = 0.25) -> float:
    """Smallest C with worst_ratio(N) <= C N^{-3/2+eps} over the report's grid."""
    return max(
        ratio * n_value ** (1.5 - eps) for n_value, ratio in report.per_n.items()
    )


def write_report_csv(report: EstimateReport, path, trailer: str | None = None) -> None:
    rows = [
        (
            report.inequality,
            n_value,
            report.per_n[n_value],
            report.slope,
            report.passed,
        )
        for n_value in sorted(report.per_n)
    ]
    write_csv(path, REPORT_CSV_HEADER, rows, trailer)


def format_report(report: EstimateReport) -> str:
    label = "T" if report.inequality == "bilinear" else "N"
    lines = [
        f"inequality: {report.inequality}",
        f"samples:    {report.sample_count}",
        f"worst:      {report.worst_ratio!r}",
    ]
    for n_value in sorted(report.per_n):
        lines.append(f"  {label}={n_value:g}: worst ratio {report.per_n[n_value]!r}")
    if report.slope is not None:
        lines.append(
            f"slope:      {report.slope!r} (stderr {report.slope_stderr!r})"
        )
    lines.append(f"pass:       {report.passed}")
    return "\n".join(lines) + "\n"
