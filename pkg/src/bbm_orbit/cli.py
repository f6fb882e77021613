"""Experiment driver: strict TOML configuration, one subcommand per
experiment family, deterministic CSV artifacts.

Configuration files are TOML with dotted sections (grid.M, solver.dt, ...).
Parsing is strict: unknown keys are rejected, every numeric field is
validated before any compute, and all artifacts carry a trailing
"# config-hash=<hex>" comment derived from the resolved configuration plus
the effective seed, so identical runs are byte-identical.

Exit codes: 0 ok, 1 numerical failure, 2 config error, 3 threshold failure.
The output directory comes from --out, overridden by the BBM_ORBIT_OUT
environment variable when set.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path
from typing import Callable, Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .csvio import write_csv
from .dynamics import (
    ForcingSpec,
    SolverConfig,
    evolve,
    linear_trajectory,
    lwp_bound_check,
    write_trajectory_csv,
)
from .errors import (
    ConfigError,
    DivergenceError,
    NoConvergenceError,
    ResolutionError,
)
from .orbit import (
    absorbing_check,
    decay_fit,
    error_evolve,
    poincare_iterate,
    write_diff_csv,
    write_series_csv,
)
from .picard import (
    picard_solve_z,
    window_bound_check,
    write_picard_csv,
    write_window_csv,
)
from .spectral import (
    Grid,
    ImethodParams,
    SpectralField,
    sobolev_norm,
    to_spectral,
    write_field_binary,
)
from .verification import (
    LocalizedBump,
    PowerLaw,
    WhiteBand,
    adversarial_triples,
    format_report,
    sample_fields,
    sample_trajectory_pairs,
    verify_bilinear,
    verify_equivalence,
    verify_trilinear,
    write_report_csv,
)

__all__ = ["main", "load_config", "config_hash", "RunConfig"]

_REQUIRED = object()

# key -> (type, default); _REQUIRED means the key must appear for commands
# listing it in _REQUIRED_KEYS, None means optional with no default
_SCHEMA: dict = {
    "seed": ("int", 0),
    "grid.M": ("int", _REQUIRED),
    "grid.L": ("float", _REQUIRED),
    "equation.variant": ("str", "bbm_damped"),
    "solver.dt": ("float", 0.01),
    "solver.integrator": ("str", "exp_rk2"),
    "solver.dealias": ("bool", True),
    "solver.store_stride": ("int", 1),
    "imethod.ell": ("float", 0.5),
    "imethod.N": ("float", 8.0),
    "imethod.N_grid": ("float_list", [8.0, 16.0, 32.0, 64.0]),
    "forcing.amplitude": ("float", 0.0),
    "forcing.spatial": ("str", "gaussian"),
    "forcing.sigma": ("float", 1.0),
    "forcing.center": ("float", 0.0),
    "forcing.mode_number": ("int", 1),
    "forcing.temporal": ("str", "constant"),
    "forcing.theta": ("float", None),
    "initial.kind": ("str", "zero"),
    "initial.amplitude": ("float", 0.0),
    "initial.sigma": ("float", 1.0),
    "initial.center": ("float", 0.0),
    "initial.mode_number": ("int", 1),
    "initial.h_ell_norm": ("float", None),
    "simulate.t0": ("float", 0.0),
    "simulate.t1": ("float", _REQUIRED),
    "simulate.snapshot_stride": ("int", 0),
    "simulate.lwp_tau": ("float", None),
    "simulate.lwp_window": ("float", None),
    "picard.tau": ("float", 0.0),
    "picard.T": ("float", _REQUIRED),
    "picard.tol": ("float", 1e-9),
    "picard.max_iter": ("int", 25),
    "picard.contraction_threshold": ("float", 0.05),
    "picard.window_T": ("float", None),
    "picard.compare": ("bool", True),
    "orbit.k_max": ("int", 40),
    "orbit.tol": ("float", 1e-9),
    "verify.count": ("int", 64),
    "verify.profile": ("str", "mixed"),
    "verify.alpha": ("float", 1.0),
    "verify.pairs": ("int", 6),
    "verify.pair_k_max": ("int", 64),
    "verify.t1": ("float", 8.0),
    "verify.dt": ("float", 0.05),
    "verify.T_grid": ("float_list", [1.0, 2.0, 4.0, 8.0]),
    "verify.triples": ("int", 32),
    "verify.eps": ("float", 0.25),
    "verify.lower_min": ("float", 0.9),
    "verify.stability_factor": ("float", 2.0),
    "verify.growth_factor": ("float", 3.0),
    "stability.horizon": ("float", _REQUIRED),
    "stability.eps_list": ("float_list", [1e-3, 1e-4]),
    "stability.perturbation_sigma": ("float", 2.0),
    "stability.perturbation_center": ("float", -2.0),
    "stability.fit_start": ("float", None),
    "stability.oracle": ("bool", False),
    "stability.pilot_horizon": ("float", 10.0),
    "stability.rate_margin": ("float", 0.05),
    "stability.ball_margin": ("float", 0.0),
}

_REQUIRED_KEYS = {
    "simulate": ("grid.M", "grid.L", "simulate.t1"),
    "find-periodic": ("grid.M", "grid.L"),
    "verify": ("grid.M", "grid.L"),
    "stability": ("grid.M", "grid.L", "stability.horizon"),
    "picard": ("grid.M", "grid.L", "picard.T"),
}

_CHOICES = {
    "equation.variant": ("bbm_damped", "bbm_burgers_torus"),
    "solver.integrator": ("exp_euler", "exp_rk2", "etdrk4"),
    "forcing.spatial": ("gaussian", "mode"),
    "forcing.temporal": ("constant", "cosine"),
    "initial.kind": ("zero", "gaussian", "mode"),
    "verify.profile": ("mixed", "power_law", "white_band", "localized_bump"),
}

_POSITIVE = (
    "grid.L",
    "solver.dt",
    "imethod.N",
    "forcing.sigma",
    "forcing.theta",
    "initial.sigma",
    "initial.h_ell_norm",
    "picard.T",
    "picard.tol",
    "picard.window_T",
    "orbit.tol",
    "verify.t1",
    "verify.dt",
    "stability.horizon",
    "stability.pilot_horizon",
    "simulate.lwp_window",
)


def _flatten(table: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in table.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{path}."))
        else:
            flat[path] = value
    return flat


def _coerce(key: str, value):
    kind, _ = _SCHEMA[key]
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(key, "must be finite")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected a boolean, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    if kind == "float_list":
        if not isinstance(value, list) or not value:
            raise ConfigError(key, f"expected a non-empty array, got {value!r}")
        out = []
        for item in value:
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise ConfigError(key, f"expected numbers, got {item!r}")
            out.append(float(item))
        return out
    raise AssertionError(f"unhandled schema kind {kind}")


def load_config(path) -> dict:
    """Parse and validate a TOML config into a flat dotted-key dict."""
    try:
        with open(path, "rb") as fh:
            table = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(str(path), "config file not found")
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(str(path), f"not valid TOML: {err}")
    flat = _flatten(table)
    cfg = {}
    for key, value in flat.items():
        if key not in _SCHEMA:
            raise ConfigError(key, "unknown key")
        cfg[key] = _coerce(key, value)
    for key, (_, default) in _SCHEMA.items():
        if key not in cfg and default is not _REQUIRED and default is not None:
            cfg[key] = default
    for key, choices in _CHOICES.items():
        if key in cfg and cfg[key] not in choices:
            raise ConfigError(key, f"must be one of {choices}, got {cfg[key]!r}")
    for key in _POSITIVE:
        if key in cfg and not cfg[key] > 0:
            raise ConfigError(key, f"must be positive, got {cfg[key]!r}")
    if "grid.M" in cfg and (cfg["grid.M"] < 8 or cfg["grid.M"] % 2):
        raise ConfigError("grid.M", f"must be an even integer >= 8, got {cfg['grid.M']}")
    if "imethod.ell" in cfg and not 0.0 <= cfg["imethod.ell"] <= 1.0:
        raise ConfigError("imethod.ell", "must lie in [0, 1]")
    if cfg.get("seed", 0) < 0:
        raise ConfigError("seed", "must be nonnegative")
    return cfg


def _require(cfg: dict, command: str) -> None:
    for key in _REQUIRED_KEYS[command]:
        if key not in cfg:
            raise ConfigError(key, f"required for '{command}'")


def _canon(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, list):
        return "[" + ",".join(_canon(v) for v in value) + "]"
    return str(value)


def config_hash(cfg: dict) -> str:
    lines = [f"{key}={_canon(cfg[key])}" for key in sorted(cfg)]
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]


def derived_seed(seed: int, stream: int) -> int:
    """Counter-based splitting: one child stream per (seed, index)."""
    return int(np.random.SeedSequence(seed, spawn_key=(stream,)).generate_state(1)[0])


class RunConfig:
    """Resolved configuration plus builders for the domain objects."""

    def __init__(self, values: dict):
        self.values = values
        self.hash = config_hash(values)
        self.trailer = f"config-hash={self.hash}"

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def grid(self) -> Grid:
        try:
            return Grid(self["grid.M"], self["grid.L"])
        except ValueError as err:
            raise ConfigError("grid", str(err))

    def imethod(self) -> ImethodParams:
        try:
            return ImethodParams(self["imethod.ell"], self["imethod.N"])
        except ValueError as err:
            raise ConfigError("imethod", str(err))

    def solver(self) -> SolverConfig:
        try:
            return SolverConfig(
                dt=self["solver.dt"],
                variant=self["equation.variant"],
                integrator=self["solver.integrator"],
                dealias=self["solver.dealias"],
                store_stride=self["solver.store_stride"],
                imethod=self.imethod(),
            )
        except ValueError as err:
            raise ConfigError("solver", str(err))

    def forcing(self) -> ForcingSpec:
        try:
            return ForcingSpec(
                amplitude=self["forcing.amplitude"],
                spatial=self["forcing.spatial"],
                sigma=self["forcing.sigma"],
                center=self["forcing.center"],
                mode_number=self["forcing.mode_number"],
                temporal=self["forcing.temporal"],
                theta=self.get("forcing.theta"),
            )
        except ValueError as err:
            raise ConfigError("forcing", str(err))

    def initial(self, grid: Grid) -> SpectralField:
        kind = self["initial.kind"]
        if kind == "zero":
            field = SpectralField.zeros(grid)
        elif kind == "gaussian":
            values = self["initial.amplitude"] * np.exp(
                -((grid.x - self["initial.center"]) ** 2)
                / (2.0 * self["initial.sigma"] ** 2)
            )
            field = to_spectral(values, grid)
        else:
            xi = np.pi * self["initial.mode_number"] / grid.L
            values = self["initial.amplitude"] * np.cos(
                xi * (grid.x - self["initial.center"])
            )
            field = to_spectral(values, grid)
        target = self.get("initial.h_ell_norm")
        if target is not None:
            current = sobolev_norm(field, self["imethod.ell"])
            if current == 0.0:
                raise ConfigError(
                    "initial.h_ell_norm", "cannot rescale a zero initial field"
                )
            field = field * (target / current)
        return field


def _resolve_out(args) -> Path:
    out = os.environ.get("BBM_ORBIT_OUT") or args.out
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_error(out: Path, run: RunConfig, kind: str, detail: dict) -> None:
    record = {"error": kind, "config_hash": run.hash}
    record.update(detail)
    _write_json(out / "error.json", record)


def _pmap(fn: Callable, items, jobs: int) -> list:
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def cmd_simulate(run: RunConfig, out: Path, jobs: int) -> int:
    grid = run.grid()
    params = run.imethod()
    solver = run.solver()
    forcing = run.forcing()
    phi = run.initial(grid)
    ell = run["imethod.ell"]
    t0, t1 = run["simulate.t0"], run["simulate.t1"]
    if not t1 > t0:
        raise ConfigError("simulate.t1", "must exceed simulate.t0")
    try:
        traj = evolve(phi, forcing, t0, t1, solver)
    except DivergenceError as err:
        _write_error(
            out, run, "divergence", {"step": err.step, "time": err.time}
        )
        return 1
    write_trajectory_csv(traj, ell, params, out / "trajectory.csv", run.trailer)
    write_field_binary(traj.snapshots[-1], out / "final_state.bin")
    stride = run["simulate.snapshot_stride"]
    if stride > 0:
        for i in range(0, len(traj), stride):
            write_field_binary(traj.snapshots[i], out / f"snapshot_{i:06d}.bin")
    tau = run.get("simulate.lwp_tau")
    window = run.get("simulate.lwp_window")
    tau = t0 if tau is None else tau
    window = (t1 - tau) if window is None else window
    report = lwp_bound_check(traj, phi, forcing, ell, tau, window)
    write_csv(
        out / "lwp.csv",
        ("lhs", "rhs_raw", "ratio"),
        [(report.lhs, report.rhs_raw, report.ratio)],
        run.trailer,
    )
    return 0


def cmd_find_periodic(run: RunConfig, out: Path, jobs: int) -> int:
    grid = run.grid()
    solver = run.solver()
    forcing = run.forcing()
    if forcing.theta is None:
        raise ConfigError("forcing.theta", "required for find-periodic")
    phi = run.initial(grid)
    ell = run["imethod.ell"]
    try:
        result = poincare_iterate(
            phi, forcing, ell, run["orbit.k_max"], run["orbit.tol"], solver
        )
    except NoConvergenceError as err:
        write_diff_csv(err.report or [], out / "differences.csv", run.trailer)
        _write_error(out, run, "no-convergence", {"iterations": len(err.report or [])})
        return 1
    write_field_binary(result.phi_tilde, out / "phi_tilde.bin")
    write_diff_csv(result.diff_norms, out / "differences.csv", run.trailer)
    _write_json(
        out / "summary.json",
        {
            "config_hash": run.hash,
            "converged": True,
            "iterations": result.iterations,
            "residual": result.residual,
            "theta": forcing.theta,
            "phi_tilde_h_ell_norm": sobolev_norm(result.phi_tilde, ell),
        },
    )
    return 0


def cmd_verify(run: RunConfig, out: Path, jobs: int) -> int:
    grid = run.grid()
    ell = run["imethod.ell"]
    if not ell < 1.0:
        raise ConfigError("imethod.ell", "verify needs ell in [0, 1)")
    n_grid = run["imethod.N_grid"]
    seed = run["seed"]
    count = run["verify.count"]
    profile_name = run["verify.profile"]
    alpha = run["verify.alpha"]

    def build_fields():
        if profile_name == "mixed":
            share = max(1, count // 3)
            return (
                sample_fields(derived_seed(seed, 0), share, grid, PowerLaw(alpha=alpha))
                + sample_fields(derived_seed(seed, 1), share, grid, WhiteBand())
                + sample_fields(
                    derived_seed(seed, 2), count - 2 * share, grid, LocalizedBump()
                )
            )
        profile = {
            "power_law": PowerLaw(alpha=alpha),
            "white_band": WhiteBand(),
            "localized_bump": LocalizedBump(),
        }[profile_name]
        return sample_fields(derived_seed(seed, 0), count, grid, profile)

    def job_equivalence():
        return verify_equivalence(
            build_fields(),
            ell,
            n_grid,
            lower_min=run["verify.lower_min"],
            stability_factor=run["verify.stability_factor"],
        )

    def job_bilinear():
        pair_profile = PowerLaw(alpha=alpha, k_max=run["verify.pair_k_max"])
        pairs = sample_trajectory_pairs(
            derived_seed(seed, 3),
            max(1, run["verify.pairs"] - run["verify.pairs"] // 4),
            grid,
            run["verify.t1"],
            run["verify.dt"],
            pair_profile,
            "oscillating",
        ) + sample_trajectory_pairs(
            derived_seed(seed, 4),
            max(1, run["verify.pairs"] // 4),
            grid,
            run["verify.t1"],
            run["verify.dt"],
            pair_profile,
            "constant",
        )
        params = ImethodParams(ell=ell, N=run["imethod.N"])
        return verify_bilinear(
            pairs, params, run["verify.T_grid"], growth_factor=run["verify.growth_factor"]
        )

    def job_trilinear():
        triples = {
            n: adversarial_triples(derived_seed(seed, 5), run["verify.triples"], grid, n)
            for n in n_grid
        }
        return verify_trilinear(triples, ell, eps=run["verify.eps"], grid=grid)

    reports = _pmap(lambda job: job(), [job_equivalence, job_bilinear, job_trilinear], jobs)
    names = ("equivalence", "bilinear", "trilinear")
    summary_lines = []
    for name, report in zip(names, reports):
        write_report_csv(report, out / f"{name}.csv", run.trailer)
        summary_lines.append(format_report(report))
    all_pass = all(report.passed for report in reports)
    summary_lines.append(f"overall: {'pass' if all_pass else 'FAIL'}\n")
    (out / "summary.txt").write_text("\n".join(summary_lines))
    return 0 if all_pass else 3


def cmd_stability(run: RunConfig, out: Path, jobs: int) -> int:
    grid = run.grid()
    params = run.imethod()
    solver = run.solver()
    forcing = run.forcing()
    if forcing.theta is None:
        raise ConfigError("forcing.theta", "required for stability")
    ell = run["imethod.ell"]
    horizon = run["stability.horizon"]
    theta = forcing.theta
    if horizon < 2 * theta:
        raise ConfigError("stability.horizon", "must cover at least two periods")

    orbit = poincare_iterate(
        SpectralField.zeros(grid), forcing, ell, run["orbit.k_max"],
        run["orbit.tol"], solver,
    )
    write_diff_csv(orbit.diff_norms, out / "orbit_differences.csv", run.trailer)

    # local decay around the orbit over an eps sweep
    raw = to_spectral(
        np.exp(
            -((grid.x - run["stability.perturbation_center"]) ** 2)
            / run["stability.perturbation_sigma"] ** 2
        ),
        grid,
    )
    bump = raw * (1.0 / sobolev_norm(raw, ell))
    eps_list = run["stability.eps_list"]
    fit_start = run.get("stability.fit_start")
    fit_window = (theta if fit_start is None else fit_start, horizon)

    reference = evolve(orbit.phi_tilde, forcing, 0.0, horizon, solver)

    def job_local(eps):
        perturbed = evolve(orbit.phi_tilde + eps * bump, forcing, 0.0, horizon, solver)
        series = np.array(
            [
                sobolev_norm(perturbed.snapshots[i] - reference.snapshots[i], ell) ** 2
                for i in range(len(perturbed))
            ]
        )
        return perturbed.times, series

    local_results = _pmap(job_local, eps_list, jobs)
    rate_rows = []
    local_rates = []
    for idx, (eps, (times, series)) in enumerate(zip(eps_list, local_results)):
        write_series_csv(times, series, out / f"decay_{idx}.csv", run.trailer)
        fit = decay_fit(times, series, fit_window)
        local_rates.append(fit.rate)
        rate_rows.append((eps, fit.rate, fit.amplitude, fit.residual))
    write_csv(
        out / "rates.csv", ("eps", "rate", "amplitude", "residual"), rate_rows, run.trailer
    )

    oracle_rate = None
    if run["stability.oracle"]:
        from .dynamics import Trajectory

        steps = int(round(min(horizon, 4.0) / solver.dt))
        zero_ref = Trajectory(
            0.0, solver.dt, [SpectralField.zeros(grid) for _ in range(steps + 1)]
        )
        w0 = bump * 1e-3
        oracle_cfg = SolverConfig(
            dt=solver.dt, variant=solver.variant, integrator="exp_rk2",
            dealias=solver.dealias, imethod=params,
        )
        w_run = error_evolve(w0, zero_ref, oracle_cfg)
        series = w_run.i_h1_norms(params) ** 2
        write_series_csv(w_run.times, series, out / "oracle_decay.csv", run.trailer)
        oracle_rate = decay_fit(w_run.times, series, (0.0, w_run.t1)).rate

    # absorbing phase: pilot-fitted envelope from the unforced decay
    phi_large = run.initial(grid)
    pilot_horizon = run["stability.pilot_horizon"]
    pilot = evolve(phi_large, ForcingSpec(amplitude=0.0), 0.0, pilot_horizon, solver)
    pilot_fit = decay_fit(
        pilot.times, pilot.i_h1_norms(params) ** 2, (0.0, pilot_horizon)
    )
    gamma1 = pilot_fit.rate * (1.0 - run["stability.rate_margin"])
    report = absorbing_check(
        phi_large, forcing, params, solver, horizon, gamma1,
        ball_margin=run["stability.ball_margin"],
    )
    write_csv(
        out / "absorbing.csv",
        ("t", "sq_norm", "bound"),
        list(zip(report.times, report.sq_norms, report.bounds)),
        run.trailer,
    )

    post_entry_rate = None
    if report.entry_time is not None and report.entry_time < horizon - 2 * theta:
        run_traj = evolve(phi_large, forcing, 0.0, horizon, solver)
        diff_sq = np.array(
            [
                sobolev_norm(run_traj.snapshots[i] - reference.snapshots[i], ell) ** 2
                for i in range(len(run_traj))
            ]
        )
        post_entry_rate = decay_fit(
            run_traj.times, diff_sq, (report.entry_time, horizon)
        ).rate

    passed = report.ok and all(r > 0 for r in local_rates)
    _write_json(
        out / "summary.json",
        {
            "config_hash": run.hash,
            "orbit_iterations": orbit.iterations,
            "orbit_residual": orbit.residual,
            "local_rates": local_rates,
            "oracle_rate": oracle_rate,
            "pilot_rate": pilot_fit.rate,
            "gamma1": gamma1,
            "ball_radius": report.ball_radius,
            "entry_time": report.entry_time,
            "absorbing_ok": report.ok,
            "violations": len(report.violations),
            "post_entry_rate": post_entry_rate,
            "pass": passed,
        },
    )
    return 0 if passed else 3


def cmd_picard(run: RunConfig, out: Path, jobs: int) -> int:
    grid = run.grid()
    params = run.imethod()
    solver = run.solver()
    forcing = run.forcing()
    phi = run.initial(grid)
    tau, horizon = run["picard.tau"], run["picard.T"]
    v = linear_trajectory(
        phi, forcing, tau, tau + horizon, solver.dt, variant=solver.variant
    )
    try:
        z, report = picard_solve_z(
            v,
            params,
            tau,
            horizon,
            tol=run["picard.tol"],
            max_iter=run["picard.max_iter"],
            contraction_threshold=run["picard.contraction_threshold"],
        )
    except NoConvergenceError as err:
        if err.report is not None:
            write_picard_csv(err.report, out / "picard.csv", run.trailer)
        _write_error(out, run, "no-convergence", {"detail": str(err)})
        return 1
    write_picard_csv(report, out / "picard.csv", run.trailer)

    summary = {
        "config_hash": run.hash,
        "converged": report.converged,
        "iterations": report.iterations,
        "contraction_factor": report.contraction_factor,
        "z_y1_norm": report.z_y1_norm,
        "v_y1_norm": report.v_y1_norm,
        "z_to_v_ratio": report.z_to_v_ratio,
        "within_v_ball": report.within_v_ball,
    }
    if run["picard.compare"]:
        direct = evolve(phi, forcing, tau, tau + horizon, solver)
        mismatch = max(
            sobolev_norm(
                v.snapshots[i] + z.snapshots[i] - direct.snapshots[i],
                run["imethod.ell"],
            )
            for i in range(len(direct))
        )
        summary["split_mismatch_sup"] = mismatch
    window_t = run.get("picard.window_T")
    if window_t is not None:
        reports = window_bound_check(z, v, params, window_t)
        write_window_csv(reports, out / "windows.csv", run.trailer)
        summary["windows"] = len(reports)
        summary["window_flags_ok"] = all(r.y1_ok and r.mesh_ok for r in reports)
    _write_json(out / "summary.json", summary)
    return 0


_HANDLERS = {
    "simulate": cmd_simulate,
    "find-periodic": cmd_find_periodic,
    "verify": cmd_verify,
    "stability": cmd_stability,
    "picard": cmd_picard,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bbm-orbit",
        description="Pseudospectral experiments for the damped, forced BBM equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _HANDLERS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="TOML config path")
        cmd.add_argument("--out", default="out", help="output directory")
        cmd.add_argument("--seed", type=int, default=None, help="override config seed")
        cmd.add_argument("--jobs", type=int, default=1, help="worker pool size")
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        values = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed", "must be nonnegative")
            values["seed"] = args.seed
        _require(values, args.command)
        run = RunConfig(values)
        out = _resolve_out(args)
        return _HANDLERS[args.command](run, out, max(1, args.jobs))
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except ResolutionError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
