"""Acceptance suite: one test per release criterion, each printing a
PASS line (run with `pytest -s tests/test_acceptance.py` to see them).

Each criterion pins its tolerances and its runtime budget.
"""

import time

import numpy as np
import pytest

from bbm_orbit.cli import main
from bbm_orbit.dynamics import (
    ForcingSpec,
    SolverConfig,
    evolve,
    linear_evolve,
    linear_trajectory,
)
from bbm_orbit.orbit import (
    absorbing_check,
    decay_fit,
    error_evolve,
    local_stability_experiment,
    poincare_iterate,
)
from bbm_orbit.picard import picard_solve_z, window_bound_check
from bbm_orbit.spectral import (
    Grid,
    ImethodParams,
    SpectralField,
    i_h1_norm,
    sobolev_norm,
    to_spectral,
)
from bbm_orbit.dynamics import Trajectory
from bbm_orbit.verification import (
    LocalizedBump,
    PowerLaw,
    WhiteBand,
    adversarial_triples,
    calibrate_trilinear_constant,
    sample_fields,
    trilinear_form,
    verify_equivalence,
    verify_trilinear,
)

LINE_GRID = Grid(256, 32.0 * np.pi)
PARAMS = ImethodParams(ell=0.5, N=8.0)
THETA = 2.0
FORCING = ForcingSpec(amplitude=1e-3, sigma=1.0, temporal="cosine", theta=THETA)
CFG = SolverConfig(dt=0.01, integrator="etdrk4", imethod=PARAMS)


def report(number: int, label: str, started: float, budget: float) -> None:
    elapsed = time.time() - started
    assert elapsed < budget, f"criterion {number} overran its {budget:g}s budget"
    print(f"[criterion {number}] {label}: PASS ({elapsed:.1f}s)")


@pytest.fixture(scope="module")
def orbit():
    return poincare_iterate(
        SpectralField.zeros(LINE_GRID), FORCING, 0.5, 40, 1e-9, CFG
    )


def test_criterion_1_transform_and_norm_foundation():
    started = time.time()
    rng = np.random.default_rng(np.random.SeedSequence(2024))
    for _ in range(100):
        values = rng.standard_normal(LINE_GRID.M)
        field = to_spectral(values, LINE_GRID)
        spectral = sobolev_norm(field, 0.0)
        quadrature = np.sqrt(2 * LINE_GRID.L / LINE_GRID.M * np.sum(values**2))
        assert abs(spectral - quadrature) <= 1e-12 * quadrature

    unit = Grid(256, np.pi)
    sine = to_spectral(np.sin(unit.x), unit)
    assert abs(sobolev_norm(sine, 0.0) - np.sqrt(np.pi)) <= 1e-12
    assert abs(sobolev_norm(sine, 0.5) - (np.sqrt(2.0) * np.pi) ** 0.5) <= 1e-12
    assert abs(sobolev_norm(sine, 1.0) - np.sqrt(2.0 * np.pi)) <= 1e-12
    cos3 = to_spectral(np.cos(3 * unit.x), unit)
    assert abs(sobolev_norm(cos3, 1.0) - np.sqrt(10.0 * np.pi)) <= 1e-12

    report(1, "transform and norm foundation", started, 5.0)


def test_criterion_2_solver_correctness():
    started = time.time()
    phi = to_spectral(0.3 * np.exp(-(LINE_GRID.x**2) / 2), LINE_GRID)

    # closed-form match with the nonlinearity disabled, AL over [0, 20]
    cases = [
        (ForcingSpec(amplitude=0.0), SolverConfig(dt=0.01, nonlinear=False)),
        (
            ForcingSpec(amplitude=1e-3, sigma=0.7),
            SolverConfig(dt=0.01, nonlinear=False),
        ),
        (
            ForcingSpec(amplitude=1e-3, sigma=0.7, temporal="cosine", theta=THETA),
            SolverConfig(dt=0.005, integrator="etdrk4", nonlinear=False),
        ),
    ]
    for forcing, cfg in cases:
        traj = evolve(phi, forcing, 0.0, 20.0, cfg)
        worst = 0.0
        for t, snap in zip(traj.times, traj.snapshots):
            ref = linear_evolve(phi, forcing, float(t))
            worst = max(worst, np.max(np.abs(snap.coeffs - ref.coeffs)))
        assert worst <= 1e-10, f"closed-form mismatch {worst:.3e}"

    # Richardson orders on a forced nonlinear benchmark
    bench_grid = Grid(128, 16.0)
    bench_phi = to_spectral(0.4 * np.exp(-(bench_grid.x**2) / 2), bench_grid)
    bench_forcing = ForcingSpec(amplitude=0.2, sigma=1.5, temporal="cosine", theta=3.0)
    reference = evolve(
        bench_phi, bench_forcing, 0.0, 3.0,
        SolverConfig(dt=3.0 / 3072, integrator="etdrk4"),
    ).snapshots[-1]

    def observed_order(integrator):
        errors = []
        for dt in (0.15, 0.075, 0.0375):
            final = evolve(
                bench_phi, bench_forcing, 0.0, 3.0,
                SolverConfig(dt=dt, integrator=integrator),
            ).snapshots[-1]
            errors.append(sobolev_norm(final - reference, 0.0))
        return min(np.log2(errors[i] / errors[i + 1]) for i in range(2))

    assert observed_order("exp_rk2") >= 1.9
    assert observed_order("etdrk4") >= 3.7

    report(2, "solver correctness", started, 60.0)


def test_criterion_3_norm_equivalence():
    started = time.time()
    grid = Grid(1024, np.pi)
    fields = (
        sample_fields(101, 67, grid, PowerLaw(alpha=1.0))
        + sample_fields(102, 67, grid, WhiteBand())
        + sample_fields(103, 66, grid, LocalizedBump())
    )
    assert len(fields) == 200
    for ell in (0.0, 0.25, 0.5, 0.75):
        result = verify_equivalence(
            fields, ell, [8.0, 16.0, 32.0, 64.0],
            lower_min=0.9, stability_factor=2.0,
        )
        lows = result.details["lower_per_n"]
        assert min(lows.values()) >= 0.9, f"ell={ell}: lower constant too small"
        ups = list(result.per_n.values())
        assert max(ups) / min(ups) <= 2.0, f"ell={ell}: upper constants drift"
        assert result.passed

    report(3, "norm equivalence constants", started, 30.0)


def test_criterion_4_trilinear_scaling():
    started = time.time()
    grid = Grid(1024, np.pi)
    n_grid = (8.0, 16.0, 32.0, 64.0)

    pilot = {n: adversarial_triples(500, 64, grid, n) for n in n_grid}
    calibrated = 1.25 * calibrate_trilinear_constant(
        verify_trilinear(pilot, ell=0.5, eps=0.25), eps=0.25
    )

    triples = {n: adversarial_triples(501, 64, grid, n) for n in n_grid}
    result = verify_trilinear(triples, ell=0.5, eps=0.25)
    assert result.slope <= -1.25, f"fitted slope {result.slope:.3f}"
    for n_value in n_grid:
        params = ImethodParams(ell=0.5, N=n_value)
        bound = calibrated * n_value ** (-1.25)
        for u, v, w in triples[n_value]:
            ratio = abs(trilinear_form(u, v, w, params)) / (
                i_h1_norm(u, params) * i_h1_norm(v, params) * i_h1_norm(w, params)
            )
            assert ratio <= bound, f"sample violates the calibrated bound at N={n_value}"

    report(4, "trilinear threshold scaling", started, 120.0)


def test_criterion_5_picard_splitting():
    started = time.time()
    phi = SpectralField.zeros(LINE_GRID)

    # splitting match and contraction over [0, 5]
    v5 = linear_trajectory(phi, FORCING, 0.0, 5.0, 0.01)
    z5, rep5 = picard_solve_z(v5, PARAMS, 0.0, 5.0, tol=1e-15)
    direct = evolve(phi, FORCING, 0.0, 5.0, CFG)
    mismatch = max(
        sobolev_norm(v5.snapshots[i] + z5.snapshots[i] - direct.snapshots[i], 0.5)
        for i in range(len(direct))
    )
    assert mismatch <= 1e-6, f"splitting mismatch {mismatch:.3e}"
    assert rep5.iterations >= 3
    assert rep5.contraction_factor is not None
    assert rep5.contraction_factor <= 0.5

    # windowed smallness flags over 10 windows of length 2
    v20 = linear_trajectory(phi, FORCING, 0.0, 20.0, 0.01)
    z20, _ = picard_solve_z(v20, PARAMS, 0.0, 20.0, tol=1e-14)
    windows = window_bound_check(z20, v20, PARAMS, T=2.0)
    assert len(windows) == 10
    assert all(w.y1_ok for w in windows), "windowed trajectory-norm flag failed"
    assert all(w.mesh_ok for w in windows), "one-step recursion flag failed"

    report(5, "splitting fixed point and window bounds", started, 120.0)


def test_criterion_6_periodic_orbit_existence(orbit):
    started = time.time()
    assert orbit.iterations <= 40
    assert orbit.residual <= 2e-9

    regen = evolve(orbit.phi_tilde, FORCING, 0.0, THETA, CFG).snapshots[-1]
    assert sobolev_norm(regen - orbit.phi_tilde, 0.5) <= 2e-9

    # two distinct starting data land on the same orbit
    other_start = to_spectral(
        1e-2 * np.exp(-((LINE_GRID.x + 4.0) ** 2) / 3.0), LINE_GRID
    )
    run_a = evolve(SpectralField.zeros(LINE_GRID), FORCING, 0.0, 50.0, CFG)
    run_b = evolve(other_start, FORCING, 0.0, 50.0, CFG)
    gap = sobolev_norm(run_a.snapshots[-1] - run_b.snapshots[-1], 0.5)
    assert gap <= 1e-8, f"distinct starts still {gap:.3e} apart at t = 50"

    report(6, "periodic state exists and is unique", started, 300.0)


def test_criterion_7_local_stability_rate(orbit):
    started = time.time()

    raw = to_spectral(np.exp(-((LINE_GRID.x + 2.0) ** 2) / 2.0), LINE_GRID)
    bump = raw * (1.0 / sobolev_norm(raw, 0.5))
    fits = local_stability_experiment(
        orbit.phi_tilde,
        [1e-3 * bump, 1e-4 * bump],
        FORCING,
        CFG,
        0.5,
        14.0,
        fit_window=(2.0, 14.0),
    )
    for fit in fits:
        assert fit is not None
        assert 0.9 < fit.rate <= 1.0, f"fitted rate {fit.rate!r} outside (0.9, 1.0]"
    assert abs(fits[0].rate - fits[1].rate) <= 0.25 * fits[1].rate

    # pure-damping oracle: with a frozen zero reference the squared decay
    # rate is exactly 1
    zero_ref = Trajectory(
        0.0, 0.01, [SpectralField.zeros(LINE_GRID) for _ in range(201)]
    )
    w_run = error_evolve(
        1e-3 * bump, zero_ref, SolverConfig(dt=0.01, integrator="exp_rk2")
    )
    oracle = decay_fit(w_run.times, w_run.i_h1_norms(PARAMS) ** 2, (0.0, 2.0))
    assert abs(oracle.rate - 1.0) <= 1e-3

    report(7, "local stability decay rate", started, 120.0)


def test_criterion_8_absorbing_envelope(orbit):
    started = time.time()
    raw = to_spectral(np.exp(-(LINE_GRID.x**2) / 8.0), LINE_GRID)
    phi_large = raw * (10.0 / sobolev_norm(raw, 0.5))
    assert abs(sobolev_norm(phi_large, 0.5) - 10.0) < 1e-12

    pilot = evolve(phi_large, ForcingSpec(amplitude=0.0), 0.0, 10.0, CFG)
    pilot_fit = decay_fit(pilot.times, pilot.i_h1_norms(PARAMS) ** 2, (0.0, 10.0))
    gamma1 = pilot_fit.rate * 0.95

    result = absorbing_check(
        phi_large, FORCING, PARAMS, CFG, horizon=40.0, gamma1=gamma1
    )
    assert result.ok, f"envelope violated at {len(result.violations)} samples"
    assert result.entry_time is not None, "never entered the ball"

    reference = evolve(orbit.phi_tilde, FORCING, 0.0, 40.0, CFG)
    run = evolve(phi_large, FORCING, 0.0, 40.0, CFG)
    diff_sq = np.array(
        [
            sobolev_norm(run.snapshots[i] - reference.snapshots[i], 0.5) ** 2
            for i in range(len(run))
        ]
    )
    post = decay_fit(run.times, diff_sq, (result.entry_time, 40.0))
    assert post.rate > 0, "no decay toward the orbit after entry"

    report(8, "absorbing envelope and entry", started, 300.0)


def test_criterion_9_byte_identical_reruns(tmp_path):
    started = time.time()
    base = (
        "seed = 7\n[grid]\nM = 128\nL = 50.26548245743669\n"
        "[solver]\ndt = 0.02\n[imethod]\nell = 0.5\nN = 8.0\n"
        '[forcing]\namplitude = 1e-3\ntemporal = "cosine"\ntheta = 2.0\n'
    )
    configs = {
        "simulate": base + "[simulate]\nt1 = 2.0\n",
        "find-periodic": base + "[orbit]\nk_max = 40\ntol = 1e-8\n",
        "picard": base + "[picard]\nT = 6.0\ntol = 1e-13\nwindow_T = 2.0\n",
        "stability": base + (
            '[initial]\nkind = "gaussian"\namplitude = 1.0\nsigma = 2.0\n'
            "h_ell_norm = 10.0\n"
            "[stability]\nhorizon = 8.0\neps_list = [1e-3]\nfit_start = 2.0\n"
            "pilot_horizon = 4.0\n[orbit]\ntol = 1e-8\n"
        ),
        "verify": (
            "seed = 7\n[grid]\nM = 1024\nL = 3.141592653589793\n"
            "[imethod]\nell = 0.5\n[verify]\ncount = 16\ntriples = 8\npairs = 2\n"
        ),
    }
    for command, text in configs.items():
        cfg_path = tmp_path / f"{command}.toml"
        cfg_path.write_text(text)
        out_a = tmp_path / f"{command}_a"
        out_b = tmp_path / f"{command}_b"
        code_a = main([command, "--config", str(cfg_path), "--out", str(out_a)])
        code_b = main([command, "--config", str(cfg_path), "--out", str(out_b)])
        assert code_a == code_b == 0, f"{command} exited {code_a}/{code_b}"
        csvs = sorted(p.name for p in out_a.glob("*.csv"))
        assert csvs, f"{command} produced no CSV artifacts"
        for name in csvs:
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), (
                f"{command}/{name} differs between reruns"
            )

    report(9, "byte-identical reruns", started, 120.0)
