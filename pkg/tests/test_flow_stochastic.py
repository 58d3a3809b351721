import numpy as np
import pytest

from curveflow.curve_geometry import circle_profile
from curveflow.errors import CflViolation, PositivityLost
from curveflow.flow_deterministic import run_rcf
from curveflow.flow_stochastic import (SDE_RESIDUAL_FACTOR, BrownianPath, drift_calculators, noise_time_step,
                                       pathwise_monitor_audit, run_scf, run_srcf, scf_step, sde_coefficient_check,
                                       srcf_step)
from curveflow.models import FlowConfig
from curveflow.spectral import AngleGrid
from curveflow.symmetry_skeleton import flower_generator


SQRT2 = np.sqrt(2.0)


@pytest.fixture
def small_circle():
    return circle_profile(1.0, AngleGrid(64), symmetry_order=4)


def reference_drift_terms(rho):
    """(rho'', h) direkt mit numpy.fft"""
    n = rho.size
    k = np.fft.fftfreq(n, d=1.0 / n)
    rho_pp = np.real(np.fft.ifft(-(k ** 2) * np.fft.fft(rho)))
    r = 1.0 / rho
    c = np.fft.fft(r) / n
    mask = np.abs(k) != 1
    area = np.pi * np.sum(np.abs(c[mask]) ** 2 / (1.0 - k[mask] ** 2))
    h = np.sum(r) * 2.0 * np.pi / n / area
    return rho_pp, h


def reference_srcf_step(rho, dt, dB):
    """Unabhängige Umsetzung eines SRCF-Schritts direkt mit numpy.fft."""
    n = rho.size
    rho_pp, h = reference_drift_terms(rho)
    rho_half = rho + dt * rho ** 2 * (rho_pp + rho - 2.0 * h)
    rho_new = rho_half / (1.0 + SQRT2 * dB * rho_half)
    theta = 2.0 * np.pi * np.arange(n) / n
    r_new = 1.0 / rho_new
    a1 = 2.0 / n * np.dot(r_new, np.cos(theta))
    b1 = 2.0 / n * np.dot(r_new, np.sin(theta))
    return 1.0 / (r_new - a1 * np.cos(theta) - b1 * np.sin(theta))


def test_brownian_path_is_reproducible():
    first, second = BrownianPath(7), BrownianPath(7)
    increments = [first.increment(1e-3) for _ in range(50)]
    assert increments == [second.increment(1e-3) for _ in range(50)]
    assert first.value == pytest.approx(sum(increments))
    assert first.sup >= max(0.0, first.value)
    assert first.qv == pytest.approx(sum(dB * dB for dB in increments))
    silent = BrownianPath(7, noise_off=True)
    assert silent.increment(1e-3) == 0.0 and silent.value == 0.0


def test_noise_time_step():
    assert noise_time_step(1.0) == pytest.approx((0.1 / (3.0 * SQRT2)) ** 2)
    assert noise_time_step(2.0) == pytest.approx(noise_time_step(1.0) / 16.0)


def test_srcf_step_on_circle(small_circle):
    dt, dB = 1e-3, 0.01
    stepped = srcf_step(small_circle, dt, dB)
    # h = 2: rho_half = 1 + dt (0 + 1 - 4)
    expected = (1.0 - 3.0 * dt) / (1.0 + SQRT2 * dB * (1.0 - 3.0 * dt))
    assert np.allclose(stepped.rho, expected, rtol=1e-13)
    assert stepped.base_point[0] == pytest.approx(0.0, abs=1e-14)
    assert stepped.base_point[1] == pytest.approx(-1.0 + dt * (1.0 - 4.0) - SQRT2 * dB, abs=1e-14)


def test_scf_step_on_circle(small_circle):
    dt, dB = 1e-3, -0.02
    stepped = scf_step(small_circle, dt, dB)
    expected = (1.0 + dt) / (1.0 + SQRT2 * dB * (1.0 + dt))
    assert np.allclose(stepped.rho, expected, rtol=1e-13)
    assert stepped.base_point[1] == pytest.approx(-1.0 + dt - SQRT2 * dB, abs=1e-14)


def test_radius_form_is_parallel_offset(small_circle):
    dt, dB = 1e-3, 0.01
    stepped = srcf_step(small_circle, dt, dB, noise_form="radius")
    assert np.allclose(1.0 / stepped.rho, 1.0 + 3.0 * dt + SQRT2 * dB, rtol=1e-13)


def test_srcf_step_matches_reference(flower3):
    dt, dB = 1e-5, 3e-3
    stepped = srcf_step(flower3, dt, dB)
    assert np.allclose(stepped.rho, reference_srcf_step(np.array(flower3.rho), dt, dB), rtol=1e-12)


@pytest.mark.parametrize("noise_form, dB", [("curvature", -1.0), ("radius", -1.0)])
def test_step_reports_lost_positivity(small_circle, noise_form, dB):
    with pytest.raises(PositivityLost):
        srcf_step(small_circle, 1e-3, dB, noise_form=noise_form)


def test_same_seed_same_path(flower3):
    config = FlowConfig(t_end=0.005, record_every=5)
    first = run_srcf(flower3, config, seed=3)
    second = run_srcf(flower3, config, seed=3)
    other = run_srcf(flower3, config, seed=4)
    assert np.array_equal(first.brownian_series, second.brownian_series)
    assert np.array_equal(first.trajectory.column("rho_min"), second.trajectory.column("rho_min"))
    assert not np.array_equal(first.brownian_series, other.brownian_series)


def test_circle_stays_circle(small_circle):
    outcome = run_srcf(small_circle, FlowConfig(t_end=0.01, record_every=1), seed=11)
    assert outcome.stop_reason == "completed"
    assert np.max(np.abs(outcome.trajectory.column("deficit"))) < 1e-12
    for profile in outcome.trajectory.profiles:
        assert np.ptp(profile.rho) < 1e-12 * profile.rho.max()


def test_integral_h_on_circle(small_circle):
    outcome = run_srcf(small_circle, FlowConfig(t_end=0.01, record_every=1), seed=11)
    # h = 2 rho = 2/r
    h = outcome.trajectory.column("h")
    t = np.asarray(outcome.trajectory.times)
    expected = np.concatenate(([0.0], np.cumsum(0.5 * (h[1:] + h[:-1]) * np.diff(t))))
    assert np.allclose(outcome.integral_h, expected, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("noise_form", ["curvature", "radius"])
def test_pathwise_audit_on_flower(flower3, noise_form):
    config = FlowConfig(t_end=0.02, record_every=1, noise_form=noise_form)
    outcome = run_srcf(flower3, config, seed=5)
    assert outcome.stop_reason == "completed"
    assert not outcome.lifetime_hit
    audit = pathwise_monitor_audit(outcome)
    assert audit.all_passed, [c.name for c in audit.failures]
    assert audit.claim("sector_monotone").passed


def test_pathwise_audit_flags_injected_violation(flower3):
    outcome = run_srcf(flower3, FlowConfig(t_end=0.005, record_every=1), seed=5)
    reports = outcome.trajectory.reports
    reports[-1] = reports[-1].model_copy(update={"deficit": reports[0].deficit + 1.0})
    audit = pathwise_monitor_audit(outcome)
    assert audit.claim("deficit_non_increasing").passed is False


def test_scf_audit_on_flower(flower3):
    outcome = run_scf(flower3, FlowConfig(t_end=0.01, record_every=1), seed=2)
    assert outcome.flow == "scf"
    audit = pathwise_monitor_audit(outcome)
    assert audit.kind == "pathwise_scf"
    assert audit.claim("sector_monotone").passed


def test_fixed_step_checked_against_cfl(flower3):
    with pytest.raises(CflViolation, match="adaptiv"):
        run_srcf(flower3, FlowConfig(t_end=0.01, dt=1e-4), seed=0)


def test_sde_coefficients_on_circle():
    circle = circle_profile(1.0, AngleGrid(64), symmetry_order=4)
    outcome = run_srcf(circle, FlowConfig(t_end=0.05, record_every=1, noise_form="radius"), seed=21)
    report = sde_coefficient_check(outcome)
    max_dt = outcome.trajectory.max_dt
    assert report.steps == outcome.trajectory.steps
    assert report.passed
    assert report.sigma_quantiles["max"] < 1e-12
    # Restterm 2 pi (dB^2 - dt)
    assert report.lambda_quantiles["q50"] <= 2.0 * np.pi * 2.0 * max_dt
    assert report.lambda_quantiles["max"] <= 2.0 * np.pi * 16.0 * max_dt


def floor_slack(trajectory):
    return (1.0 / trajectory.column("rho_min")[0] + SQRT2 * trajectory.column("B")
            + 2.0 * trajectory.column("int_h") - 1.0 / trajectory.column("rho_min"))


def test_curvature_form_floor_holds_for_several_seeds(flower3):
    config = FlowConfig(t_end=0.05, record_every=1, record_profiles=False)
    for seed in range(4):
        outcome = run_srcf(flower3, config, seed=seed)
        audit = pathwise_monitor_audit(outcome)
        for name in ("curvature_floor", "curvature_floor_sup"):
            claim = audit.claim(name)
            assert claim.passed, (seed, name, claim.margin)
            assert claim.margin >= -1e-4
            assert "1.00e-04" in claim.detail


def test_floor_margin_ignores_start(flower3):
    outcome = run_srcf(flower3, FlowConfig(t_end=0.002, record_every=1), seed=6)
    claim = pathwise_monitor_audit(outcome).claim("curvature_floor")
    slack = floor_slack(outcome.trajectory)
    assert slack[0] == pytest.approx(0.0, abs=1e-15)
    assert claim.margin == pytest.approx(slack[1:].min(), abs=1e-15)


def test_noise_off_follows_ito_drift(flower3):
    t_end, dt = 0.01, 1e-5
    outcome = run_srcf(flower3, FlowConfig(t_end=t_end, record_every=0, noise_off=True), seed=0)
    assert outcome.brownian_series.max() == 0.0
    rho = np.array(flower3.rho)
    for _ in range(round(t_end / dt)):
        rho_pp, h = reference_drift_terms(rho)
        rho = rho + dt * rho ** 2 * (rho_pp + 3.0 * rho - 2.0 * h)
    final = outcome.trajectory.profiles[-1].rho
    assert np.max(np.abs(final - rho) / rho) < 5e-3
    # RCF-Drift fehlt der Term 2 rho^3
    rcf = run_rcf(flower3, FlowConfig(t_end=t_end, record_every=0)).profiles[-1].rho
    assert np.max(np.abs(rcf - final) / final) > 2e-2


def test_sde_residuals_shrink_with_dt(small_circle):
    medians = []
    for dt in (8e-4, 4e-4):
        total = 0.0
        for seed in range(8):
            outcome = run_srcf(small_circle, FlowConfig(t_end=0.02, dt=dt, record_every=1), seed=seed)
            report = sde_coefficient_check(outcome)
            assert report.passed, (dt, seed)
            assert report.tolerance == pytest.approx(SDE_RESIDUAL_FACTOR * report.max_dt)
            # Kreis: Restterm 18 pi dt^2 rho^3 / (1 - 3 dt rho^2)
            rho_max = outcome.trajectory.column("rho_max").max()
            bound = 18.0 * np.pi * dt ** 2 * rho_max ** 3 / (1.0 - 3.0 * dt * rho_max ** 2)
            assert report.sigma_quantiles["max"] <= 1.01 * bound + 1e-13
            total += report.sigma_quantiles["q50"]
        medians.append(total)
    assert medians[0] / medians[1] >= 2.5


def test_sde_check_fails_on_tampered_area(small_circle):
    outcome = run_srcf(small_circle, FlowConfig(t_end=0.05, record_every=1), seed=21)
    assert sde_coefficient_check(outcome).passed
    reports = outcome.trajectory.reports
    reports[5] = reports[5].model_copy(update={"lambda_": reports[5].lambda_ + 1.0})
    report = sde_coefficient_check(outcome)
    assert report.passed is False
    assert report.as_claim().passed is False and report.as_claim().margin < 0


def test_sde_check_without_single_steps(small_circle):
    outcome = run_srcf(small_circle, FlowConfig(t_end=0.05, record_every=0), seed=21)
    report = sde_coefficient_check(outcome)
    assert report.steps == 0
    assert report.passed is None


def test_drift_on_unit_circle(circle):
    report = drift_calculators(circle)
    assert report.h_drift == pytest.approx(-2.0)
    assert report.h_diffusion == pytest.approx(-2.0 * SQRT2)
    assert report.ent_drift == pytest.approx(-4.0 * np.pi)
    assert report.ent_diffusion == pytest.approx(-2.0 * SQRT2 * np.pi)
    assert report.supermartingale_drift_ok


def test_drift_on_flower(flower3, ellipse):
    report = drift_calculators(flower3)
    parts = report.ent_drift_parts
    assert parts["gradient"] + parts["deviation"] < 0
    assert report.supermartingale_drift_ok is True
    assert report.ent_drift < 0
    assert drift_calculators(ellipse).supermartingale_drift_ok is None


@pytest.mark.slow
def test_pathwise_audits_for_many_seeds(flower3):
    config = FlowConfig(t_end=0.5, record_every=1, record_profiles=False)
    for seed in range(32):
        outcome = run_srcf(flower3, config, seed=seed)
        audit = pathwise_monitor_audit(outcome)
        assert audit.all_passed, (seed, [c.name for c in audit.failures])


@pytest.mark.slow
def test_sector_monotonicity_along_paths(flower3):
    config = FlowConfig(t_end=0.25, record_every=1)
    for seed in range(8):
        for run in (run_srcf, run_scf):
            outcome = run(flower3, config, seed=seed)
            assert pathwise_monitor_audit(outcome).claim("sector_monotone").passed, (run.__name__, seed)


@pytest.mark.slow
def test_long_lifetime_flower8():
    flower8 = flower_generator(8, 0.005, 1.0, AngleGrid(256))
    config = FlowConfig(t_end=1.0, record_every=0, record_profiles=False)
    for seed in range(32):
        assert run_srcf(flower8, config, seed=seed).stop_reason == "completed", seed


@pytest.mark.slow
@pytest.mark.parametrize("noise_form", ["curvature", "radius"])
def test_curvature_floor_over_eight_seeds(flower3, noise_form):
    config = FlowConfig(t_end=0.5, record_every=1, record_profiles=False, noise_form=noise_form)
    for seed in range(8):
        outcome = run_srcf(flower3, config, seed=seed)
        slack = floor_slack(outcome.trajectory)[1:]
        assert slack.min() >= -1e-4, (seed, slack.min())
        assert pathwise_monitor_audit(outcome).claim("curvature_floor").passed
