import numpy as np
import pytest

from bbm_orbit.dynamics import (
    ForcingSpec,
    SolverConfig,
    Trajectory,
    evolve,
)
from bbm_orbit.errors import NoConvergenceError
from bbm_orbit.orbit import (
    absorbing_check,
    decay_fit,
    error_evolve,
    local_stability_experiment,
    poincare_iterate,
    write_diff_csv,
    write_series_csv,
)
from bbm_orbit.spectral import (
    Grid,
    ImethodParams,
    SpectralField,
    i_h1_norm,
    sobolev_norm,
    to_spectral,
)

PARAMS = ImethodParams(0.5, 8.0)
THETA = 2.0


@pytest.fixture(scope="module")
def grid():
    return Grid(256, 32 * np.pi)


@pytest.fixture(scope="module")
def forcing():
    return ForcingSpec(amplitude=1e-3, sigma=1.0, temporal="cosine", theta=THETA)


@pytest.fixture(scope="module")
def cfg():
    return SolverConfig(dt=0.01, integrator="etdrk4", imethod=PARAMS)


@pytest.fixture(scope="module")
def orbit(grid, forcing, cfg):
    return poincare_iterate(SpectralField.zeros(grid), forcing, 0.5, 40, 1e-9, cfg)


def unit_bump(grid, center, ell=0.5, width=2.0):
    raw = to_spectral(np.exp(-((grid.x - center) ** 2) / width), grid)
    return raw * (1.0 / sobolev_norm(raw, ell))


class TestDecayFit:
    def test_exact_exponential(self):
        ts = np.linspace(0, 10, 101)
        fit = decay_fit(ts, np.exp(-0.6 * ts), (0.0, 10.0))
        assert fit.rate == pytest.approx(0.3, abs=1e-12)
        assert fit.amplitude == pytest.approx(1.0, abs=1e-12)
        assert fit.residual < 1e-12

    def test_rejects_nonpositive_values(self):
        ts = np.linspace(0, 1, 11)
        vals = np.ones(11)
        vals[5] = 0.0
        with pytest.raises(ValueError):
            decay_fit(ts, vals, (0.0, 1.0))

    def test_rejects_degenerate_window(self):
        ts = np.linspace(0, 1, 11)
        with pytest.raises(ValueError):
            decay_fit(ts, np.exp(-ts), (0.5, 0.5))

    def test_needs_five_points(self):
        ts = np.linspace(0, 1, 11)
        with pytest.raises(ValueError):
            decay_fit(ts, np.exp(-ts), (0.0, 0.3))


class TestPoincare:
    def test_zero_forcing_zero_start(self, grid, cfg):
        result = poincare_iterate(
            SpectralField.zeros(grid),
            ForcingSpec(amplitude=0.0, theta=THETA),
            0.5,
            40,
            1e-9,
            cfg,
        )
        assert result.iterations == 1
        assert sobolev_norm(result.phi_tilde, 0.5) == 0.0

    def test_zero_forcing_small_start_damps_at_linear_rate(self, grid, cfg):
        phi0 = to_spectral(1e-5 * np.exp(-(grid.x**2) / 2), grid)
        result = poincare_iterate(
            phi0, ForcingSpec(amplitude=0.0, theta=THETA), 0.5, 40, 1e-12, cfg
        )
        assert sobolev_norm(result.phi_tilde, 0.5) < 1e-12
        ratios = [
            result.diff_norms[i + 1] / result.diff_norms[i]
            for i in range(min(3, len(result.diff_norms) - 1))
        ]
        for r in ratios:
            assert r == pytest.approx(np.exp(-THETA), rel=1e-6)

    def test_converges_and_regenerates(self, orbit, grid, forcing, cfg):
        assert orbit.iterations <= 40
        assert orbit.residual <= 2e-9
        regen = evolve(orbit.phi_tilde, forcing, 0.0, THETA, cfg).snapshots[-1]
        assert sobolev_norm(regen - orbit.phi_tilde, 0.5) <= 2e-9

    def test_rate_consistency_with_decay_fit(self, orbit, grid, forcing, cfg):
        # the squared ratio of consecutive return-map differences tracks
        # e^{-2 gamma theta} with gamma from the squared-norm decay fit
        diffs = orbit.diff_norms
        ratios = [
            diffs[i + 1] / diffs[i] for i in range(len(diffs) - 1) if diffs[i] > 0
        ]
        rho_sq = float(np.median(ratios)) ** 2
        bump = unit_bump(grid, -2.0)
        fit = local_stability_experiment(
            orbit.phi_tilde, [1e-3 * bump], forcing, cfg, 0.5, 10.0,
            fit_window=(2.0, 10.0),
        )[0]
        assert rho_sq == pytest.approx(np.exp(-2 * fit.rate * THETA), rel=0.2)

    def test_requires_periodic_forcing(self, grid, cfg):
        with pytest.raises(ValueError):
            poincare_iterate(
                SpectralField.zeros(grid), ForcingSpec(amplitude=1e-3), 0.5, 10, 1e-9, cfg
            )

    def test_no_convergence_error_carries_series(self, grid, forcing, cfg):
        with pytest.raises(NoConvergenceError) as err:
            poincare_iterate(SpectralField.zeros(grid), forcing, 0.5, 2, 1e-14, cfg)
        assert len(err.value.report) == 2

    def test_warns_outside_smallness(self, grid, forcing, cfg):
        big = to_spectral(np.exp(-(grid.x**2)), grid)
        with pytest.warns(UserWarning):
            try:
                poincare_iterate(big, forcing, 0.5, 1, 1e-9, cfg)
            except NoConvergenceError:
                pass


class TestErrorEvolve:
    def test_zero_initial(self, grid, cfg):
        a = Trajectory(0.0, 0.01, [SpectralField.zeros(grid) for _ in range(11)])
        out = error_evolve(SpectralField.zeros(grid), a, SolverConfig(dt=0.01))
        assert max(np.max(np.abs(s.coeffs)) for s in out.snapshots) == 0.0

    def test_pure_damping_is_exact(self, grid):
        a = Trajectory(0.0, 0.01, [SpectralField.zeros(grid) for _ in range(201)])
        w0 = to_spectral(1e-2 * np.exp(-(grid.x**2) / 2) * np.cos(grid.x / 4), grid)
        out = error_evolve(w0, a, SolverConfig(dt=0.01, integrator="exp_rk2"))
        expected = np.exp(-2.0) * w0.coeffs
        assert np.max(np.abs(out.snapshots[-1].coeffs - expected)) < 1e-15

    def test_linearity(self, grid, forcing):
        cfg2 = SolverConfig(dt=0.01, integrator="exp_rk2")
        a = evolve(
            to_spectral(0.05 * np.exp(-(grid.x**2) / 4), grid), forcing, 0.0, 1.0, cfg2
        )
        w1 = to_spectral(1e-2 * np.exp(-(grid.x**2) / 2), grid)
        w2 = to_spectral(1e-2 * np.sin(grid.x / 8), grid)
        o1 = error_evolve(w1, a, cfg2)
        o2 = error_evolve(w2, a, cfg2)
        o3 = error_evolve(2.0 * w1 + 3.0 * w2, a, cfg2)
        mixed = 2.0 * o1.snapshots[-1] + 3.0 * o2.snapshots[-1]
        assert np.max(np.abs(o3.snapshots[-1].coeffs - mixed.coeffs)) < 1e-10

    def test_difference_of_two_solutions(self, grid, forcing):
        # u1 - u2 follows the error dynamics with the averaged reference
        cfg2 = SolverConfig(dt=0.01, integrator="exp_rk2")
        phi1 = to_spectral(2e-2 * np.exp(-(grid.x**2) / 2), grid)
        phi2 = to_spectral(1e-2 * np.exp(-((grid.x - 3) ** 2) / 3), grid)
        u1 = evolve(phi1, forcing, 0.0, 3.0, cfg2)
        u2 = evolve(phi2, forcing, 0.0, 3.0, cfg2)
        avg = Trajectory(
            0.0, 0.01, [0.5 * (u1.snapshots[i] + u2.snapshots[i]) for i in range(len(u1))]
        )
        w = error_evolve(phi1 - phi2, avg, cfg2)
        worst = max(
            sobolev_norm(w.snapshots[i] - (u1.snapshots[i] - u2.snapshots[i]), 1.0)
            for i in range(len(w))
        )
        assert worst < 100 * 0.01**2

    def test_etdrk4_needs_half_step_reference(self, grid, forcing):
        cfg4 = SolverConfig(dt=0.02, integrator="etdrk4")
        a_coarse = evolve(
            to_spectral(1e-2 * np.exp(-(grid.x**2)), grid), forcing, 0.0, 1.0,
            SolverConfig(dt=0.02),
        )
        with pytest.raises(ValueError):
            error_evolve(SpectralField.zeros(grid), a_coarse, cfg4)
        a_fine = evolve(
            to_spectral(1e-2 * np.exp(-(grid.x**2)), grid), forcing, 0.0, 1.0,
            SolverConfig(dt=0.01),
        )
        out = error_evolve(
            to_spectral(1e-3 * np.exp(-(grid.x**2)), grid), a_fine, cfg4
        )
        assert len(out) == 51
        assert np.all(np.isfinite(out.snapshots[-1].coeffs))

    def test_decay_rate_oracle(self, grid):
        a = Trajectory(0.0, 0.01, [SpectralField.zeros(grid) for _ in range(201)])
        w0 = to_spectral(1e-2 * np.exp(-(grid.x**2) / 2), grid)
        out = error_evolve(w0, a, SolverConfig(dt=0.01, integrator="exp_rk2"))
        series = out.i_h1_norms(PARAMS) ** 2
        fit = decay_fit(out.times, series, (0.0, 2.0))
        assert fit.rate == pytest.approx(1.0, abs=1e-3)


class TestLocalStability:
    def test_zero_perturbation_skipped(self, orbit, grid, forcing, cfg):
        fits = local_stability_experiment(
            orbit.phi_tilde, [SpectralField.zeros(grid)], forcing, cfg, 0.5, 4.0
        )
        assert fits == [None]

    def test_rates_positive_and_eps_robust(self, orbit, grid, forcing, cfg):
        bump = unit_bump(grid, -2.0)
        fits = local_stability_experiment(
            orbit.phi_tilde,
            [1e-3 * bump, 1e-4 * bump],
            forcing,
            cfg,
            0.5,
            10.0,
            fit_window=(2.0, 10.0),
        )
        rates = [f.rate for f in fits]
        assert all(r > 0 for r in rates)
        assert abs(rates[0] - rates[1]) <= 0.25 * rates[1]

    def test_distinct_perturbations_forget_their_shape(self, orbit, grid, forcing, cfg):
        bump1 = 1e-3 * unit_bump(grid, -2.0)
        raw2 = to_spectral(np.exp(-((grid.x + 5) ** 2) / 1.5) * np.cos(grid.x / 2), grid)
        bump2 = raw2 * (1e-3 / sobolev_norm(raw2, 0.5))
        run1 = evolve(orbit.phi_tilde + bump1, forcing, 0.0, 50.0, cfg)
        run2 = evolve(orbit.phi_tilde + bump2, forcing, 0.0, 50.0, cfg)
        assert sobolev_norm(run1.snapshots[-1] - run2.snapshots[-1], 0.5) < 1e-8


@pytest.fixture(scope="module")
def big_phi(grid):
    raw = to_spectral(np.exp(-(grid.x**2) / 8.0), grid)
    return raw * (10.0 / sobolev_norm(raw, 0.5))


class TestAbsorbing:
    def test_unforced_decay_envelope(self, grid, big_phi, cfg):
        pilot = evolve(big_phi, ForcingSpec(amplitude=0.0), 0.0, 10.0, cfg)
        fit = decay_fit(pilot.times, pilot.i_h1_norms(PARAMS) ** 2, (0.0, 10.0))
        assert fit.rate > 0
        report = absorbing_check(
            big_phi,
            ForcingSpec(amplitude=0.0),
            PARAMS,
            cfg,
            horizon=10.0,
            gamma1=fit.rate * 0.95,
        )
        assert report.ok

    def test_zero_start_stays_inside(self, grid, forcing, cfg):
        report = absorbing_check(
            SpectralField.zeros(grid), forcing, PARAMS, cfg,
            horizon=10.0, gamma1=0.9,
        )
        assert report.ok
        assert report.entry_time == 0.0

    def test_two_phase_experiment(self, grid, big_phi, forcing, cfg, orbit):
        pilot = evolve(big_phi, ForcingSpec(amplitude=0.0), 0.0, 10.0, cfg)
        fit = decay_fit(pilot.times, pilot.i_h1_norms(PARAMS) ** 2, (0.0, 10.0))
        gamma1 = fit.rate * 0.95
        report = absorbing_check(
            big_phi, forcing, PARAMS, cfg, horizon=30.0, gamma1=gamma1
        )
        assert report.ok
        assert report.entry_time is not None
        # after entry the difference to the orbit decays at a positive rate
        reference = evolve(orbit.phi_tilde, forcing, 0.0, 30.0, cfg)
        run = evolve(big_phi, forcing, 0.0, 30.0, cfg)
        diff_sq = np.array(
            [
                sobolev_norm(run.snapshots[i] - reference.snapshots[i], 0.5) ** 2
                for i in range(len(run))
            ]
        )
        post = decay_fit(run.times, diff_sq, (report.entry_time, 30.0))
        assert post.rate > 0

    def test_gamma_must_be_positive(self, grid, forcing, cfg):
        with pytest.raises(ValueError):
            absorbing_check(
                SpectralField.zeros(grid), forcing, PARAMS, cfg,
                horizon=1.0, gamma1=0.0,
            )


class TestTrilinearAlongDynamics:
    def test_transport_term_bounded_by_calibrated_constant(self):
        # cross-module check: along an error run on a fine verification grid,
        # |(S(aw)_x, Sw)| stays below the calibrated near-band worst case
        from bbm_orbit.verification import (
            adversarial_triples,
            calibrate_trilinear_constant,
            trilinear_form,
            verify_trilinear,
        )

        vgrid = Grid(1024, np.pi)
        triples = {
            n: adversarial_triples(5, 32, vgrid, n) for n in (8.0, 16.0, 32.0, 64.0)
        }
        calibrated = 1.25 * calibrate_trilinear_constant(verify_trilinear(triples, 0.5))
        n_value = 16.0
        params = ImethodParams(0.5, n_value)
        rng = np.random.default_rng(17)
        profile = 0.3 * np.exp(-(vgrid.x**2) * 4) * np.cos(12 * vgrid.x)
        a_field = to_spectral(profile, vgrid)
        a = Trajectory(0.0, 0.01, [a_field.copy() for _ in range(101)])
        w0 = to_spectral(
            0.1 * np.exp(-(vgrid.x**2) * 2) * np.cos(14 * vgrid.x), vgrid
        )
        run = error_evolve(w0, a, SolverConfig(dt=0.01, integrator="exp_rk2"))
        bound = calibrated * n_value ** (-1.25)
        for i in range(0, len(run), 10):
            w = run.snapshots[i]
            lhs = abs(trilinear_form(a_field, w, w, params))
            rhs = (
                i_h1_norm(a_field, params)
                * i_h1_norm(w, params) ** 2
            )
            if rhs > 0:
                assert lhs <= bound * rhs


class TestCsvWriters:
    def test_diff_and_series(self, tmp_path, orbit):
        diff_path = tmp_path / "diffs.csv"
        write_diff_csv(orbit.diff_norms, diff_path, trailer="config-hash=f00")
        lines = diff_path.read_text().splitlines()
        assert lines[0] == "k,diff_norm"
        assert lines[-1] == "# config-hash=f00"
        series_path = tmp_path / "series.csv"
        write_series_csv([0.0, 0.1], [1.0, 0.5], series_path)
        assert series_path.read_text().splitlines()[0] == "t,sq_norm"
