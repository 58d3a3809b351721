# flow_stochastic.py
"""
Euler-Maruyama für den stochastischen renormalisierten Krümmungsfluss (SRCF)
und den reinen stochastischen Krümmungsfluss (SCF), getrieben von einer
einzigen skalaren Brownschen Bewegung:

    d rho = rho^2 (rho'' + 3 rho - 2h) dt - sqrt(2) rho^2 dB     (SRCF)

Beim SCF entfällt der Term 2h. Koeffizienten werden am Schrittanfang
eingefroren (Itô).
"""
import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field

from .curve_geometry import area_from_radius, numeric_tolerance, project_closure
from .errors import NotClosed, PositivityLost
from .flow_deterministic import isoperimetric_ratio_h
from .models import AuditReport, ClaimResult
from .spectral import SpectralOps
from .symmetry_skeleton import sector_monotone_margin, symmetrize_rho
from .trajectory import (TIME_EPS, Recorder, cfl_time_step, check_fixed_step, classify_state,
                         clip_to_landing, landing_times)


logger = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)
FLOWS = ("srcf", "scf")
# q99-Residuum der SDE-Prüfung in Einheiten von dt; 2 pi (dB^2 - dt) liegt bei etwa 35 dt
SDE_RESIDUAL_FACTOR = 100.0


class BrownianPath:
    """
    Skalare Brownsche Bewegung aus einem eigenen PCG64-Strom.
    Ein Inkrement pro Schritt, gemeinsam für alle Gitterknoten.
    """

    def __init__(self, seed, noise_off=False):
        """Konstruktor"""
        self.seed = int(seed)
        self.noise_off = noise_off
        self._rng = np.random.default_rng(self.seed)
        self.value = 0.0
        self.sup = 0.0
        self.qv = 0.0
        self.last = 0.0

    def increment(self, dt):
        """Neues dB ~ N(0, dt); aktualisiert B_t, sup B und die quadratische Variation."""
        dB = 0.0 if self.noise_off else float(self._rng.normal(0.0, np.sqrt(dt)))
        self.value += dB
        self.sup = max(self.sup, self.value)
        self.qv += dB * dB
        self.last = dB
        return dB


@dataclass
class StochasticRunOutcome:
    trajectory: object
    seed: int
    flow: str = "srcf"
    noise_form: str = "curvature"

    @property
    def brownian_series(self):
        return self.trajectory.column("B")

    @property
    def integral_h(self):
        return self.trajectory.column("int_h")

    @property
    def stop_reason(self):
        return self.trajectory.stop_reason

    @property
    def lifetime_hit(self):
        return self.trajectory.stop_reason != "completed"


def noise_time_step(rho_max):
    """dt <= (0.1 / (3 sqrt(2) rho_max^2))^2: ein 3-Sigma-Inkrement ändert rho um höchstens 10 %."""
    return (0.1 / (3.0 * SQRT2 * rho_max ** 2)) ** 2


def _euler_maruyama(rho, base, dt, dB, ops, renormalized, noise_form, noise_off=False):
    """Roher EM-Schritt für (rho, Basispunkt) ohne Projektion."""
    h = isoperimetric_ratio_h(rho, ops.grid) if renormalized else 0.0
    rho_pp = ops.second_derivative(rho)
    if noise_off:
        # volle Itô-Drift, nicht die RCF-Drift
        rho_new = rho + dt * rho ** 2 * (rho_pp + 3.0 * rho - 2.0 * h)
    elif noise_form == "radius":
        # additive Form für 1/rho: Parallelverschiebung um sqrt(2) dB
        radius = 1.0 / rho - dt * (rho_pp + rho - 2.0 * h) + SQRT2 * dB
        with np.errstate(divide="ignore"):
            rho_new = np.where(radius > 0, 1.0 / radius, -1.0)
    else:
        # Drift ohne Itô-Anteil, danach die exakte Lösung von d rho = -sqrt(2) rho^2 dB + 2 rho^3 dt
        rho_half = rho + dt * rho ** 2 * (rho_pp + rho - 2.0 * h)
        denominator = 1.0 + SQRT2 * dB * rho_half
        with np.errstate(divide="ignore"):
            rho_new = np.where((denominator > 0) & (rho_half > 0), rho_half / denominator, -1.0)
    base_new = base + dt * np.array((-ops.derivative(rho)[0], rho[0] - 2.0 * h)) - np.array((0.0, SQRT2 * dB))
    return rho_new, base_new, h


def _finish(profile, rho, base, enforce_symmetry):
    if enforce_symmetry and profile.symmetry_order >= 1:
        rho = symmetrize_rho(rho, profile.symmetry_order)
    try:
        return project_closure(profile.with_rho(rho, base_point=tuple(base)))
    except PositivityLost as e:
        raise NotClosed(e.detail) from e


def _step(profile, dt, dB, renormalized, noise_form, enforce_symmetry, rho_floor, method):
    ops = SpectralOps(profile.grid, method)
    rho, base, _ = _euler_maruyama(profile.rho, np.array(profile.base_point), dt, dB, ops, renormalized, noise_form)
    if not np.all(np.isfinite(rho)) or rho.min() <= rho_floor:
        raise PositivityLost(f"rho_min = {np.nanmin(rho):.3e} <= rho_floor = {rho_floor:.1e}")
    return _finish(profile, rho, base, enforce_symmetry)


def srcf_step(profile, dt, dB, noise_form="curvature", enforce_symmetry=False, rho_floor=1e-6, method="spectral"):
    """
    Krümmungsform: rho_half = rho + dt rho^2 (rho'' + rho - 2h), dann rho_half / (1 + sqrt(2) dB rho_half).
    Radiusform: 1/rho <- 1/rho - dt (rho'' + rho - 2h) + sqrt(2) dB. Danach Schließungsprojektion.
    :raises PositivityLost: wenn ein Knoten <= rho_floor fällt.
    """
    return _step(profile, dt, dB, True, noise_form, enforce_symmetry, rho_floor, method)


def scf_step(profile, dt, dB, noise_form="curvature", enforce_symmetry=False, rho_floor=1e-6, method="spectral"):
    """Wie srcf_step, ohne den Term 2h."""
    return _step(profile, dt, dB, False, noise_form, enforce_symmetry, rho_floor, method)


def _run(initial, config, seed, flow):
    """
    Gemeinsame Schleife für SRCF und SCF. Aufgezeichnet werden zusätzlich
    B, sup B, Integral von h, das letzte dB, dt, Schrittzahl und Integral von 1/rho^2.
    """
    renormalized = flow == "srcf"
    ops = SpectralOps(initial.grid, config.derivative_method)
    check_fixed_step(config, float(initial.rho.max()), ops)
    recorder = Recorder(config, config.derivative_method)
    landings = landing_times(config)
    brownian = BrownianPath(seed, noise_off=config.noise_off)
    start_time = time.time()
    logger.info(f"{flow.upper()} Start: seed={seed}, N={initial.grid.n_samples}, t_end={config.t_end}, "
                f"noise_form={config.noise_form}")

    profile = project_closure(initial)
    t, step, max_dt, int_h, dt = 0.0, 0, 0.0, 0.0, 0.0
    h_old = isoperimetric_ratio_h(profile.rho, profile.grid) if renormalized else 0.0
    stop_reason = "completed"

    def record():
        radius = profile.radius_of_curvature
        recorder.add(t, profile, step, B=brownian.value, B_sup=brownian.sup, int_h=int_h,
                     dB_last=brownian.last, dt_last=dt, step_count=step, qv=brownian.qv,
                     int_r2=ops.integrate(radius * radius))

    record()
    while t < config.t_end - TIME_EPS:
        if step >= config.max_steps:
            stop_reason = "max_steps"
            break
        rho_max = float(profile.rho.max())
        if config.dt:
            dt = config.dt
        else:
            dt = min(config.dt_max, cfl_time_step(rho_max, ops, config.cfl))
            if config.noise_cap and not config.noise_off:
                dt = min(dt, noise_time_step(rho_max))
        dt, landed = clip_to_landing(t, dt, landings)
        dB = brownian.increment(dt)
        rho, base, _ = _euler_maruyama(profile.rho, np.array(profile.base_point), dt, dB, ops,
                                       renormalized, config.noise_form, config.noise_off)
        stop = classify_state(rho, config)
        if stop:
            stop_reason = stop
            break
        try:
            candidate = _finish(profile, rho, base, config.enforce_symmetry)
        except NotClosed as e:
            logger.warning(f"Seed {seed}: Schließung verloren bei t={t:.6g}: {e.detail}")
            stop_reason = "closure_lost"
            break
        if recorder.closure_lost(candidate):
            stop_reason = "closure_lost"
            break
        profile = candidate
        h_new = isoperimetric_ratio_h(profile.rho, profile.grid) if renormalized else 0.0
        int_h += 0.5 * (h_old + h_new) * dt
        h_old = h_new
        t += dt
        step += 1
        max_dt = max(max_dt, dt)
        if recorder.due(step, landed):
            record()

    record()
    duration = time.time() - start_time
    if stop_reason != "completed":
        logger.warning(f"Seed {seed}: Abbruch ({stop_reason}) bei t={t:.6g}")
    logger.info(f"{flow.upper()} beendet ({stop_reason}) nach {step} Schritten. Laufzeit: {duration:.2f} Sekunden.")
    trajectory = recorder.finish(stop_reason, step, max_dt)
    return StochasticRunOutcome(trajectory=trajectory, seed=int(seed), flow=flow, noise_form=config.noise_form)


def run_srcf(initial, config, seed):
    """
    SRCF bis t_end; Abbrüche (rho_floor, rho_cap, closure_lost, nan) stehen im stop_reason.
    :raises CflViolation: wenn ein fester Zeitschritt die CFL-Schranke verletzt.
    """
    return _run(initial, config, seed, "srcf")


def run_scf(initial, config, seed):
    return _run(initial, config, seed, "scf")


class PathwiseTolerances(BaseModel):
    """Toleranzen der pfadweisen Monitore."""
    monotone_atol: float = Field(1e-6, ge=0)
    bound_atol: float = Field(1e-4, ge=0)
    sector_rtol: float = Field(1e-10, ge=0)


def _monotone(name, values, atol):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return ClaimResult(name=name, passed=None, margin=0.0, detail="zu wenige Werte")
    increase = float(np.max(np.diff(values)))
    return ClaimResult(name=name, passed=increase <= atol, margin=-increase,
                       detail=f"größter Anstieg {increase:.3e}")


def pathwise_monitor_audit(outcome, tolerances=None):
    """
    Pfadweise Aussagen: Defizit und Integral(1/rho^2) - 2 lambda fallen, die Krümmungs-
    untergrenze mit B_t (und mit sup B), 2 rho_min <= h <= 2 rho_max, Monotonie auf [0, pi/n].
    """
    tol = tolerances or PathwiseTolerances()
    traj = outcome.trajectory
    rho_min = traj.column("rho_min")
    rho_max = traj.column("rho_max")
    lam = traj.column("lambda")
    h = traj.column("h")
    sigma = traj.column("sigma")
    brownian = traj.column("B")
    brownian_sup = traj.column("B_sup")
    int_h = traj.column("int_h") if outcome.flow == "srcf" else np.zeros_like(brownian)
    claims = []

    claims.append(_monotone("deficit_non_increasing", traj.column("deficit"), tol.monotone_atol))
    energy = traj.column("int_r2") - 2.0 * lam
    claims.append(_monotone("radius_energy_non_increasing", energy, tol.monotone_atol))
    claims.append(ClaimResult(name="radius_energy_nonnegative", passed=bool(energy.min() >= -tol.monotone_atol),
                              margin=float(energy.min())))

    claims.append(_floor_claim("curvature_floor", rho_min, brownian, int_h, tol.bound_atol))
    claims.append(_floor_claim("curvature_floor_sup", rho_min, brownian_sup, int_h, tol.bound_atol))

    num_tol = np.array([numeric_tolerance(r, s) for r, s in zip(rho_max, sigma)])
    lower = h - 2.0 * rho_min
    upper = 2.0 * rho_max - h
    claims.append(ClaimResult(name="h_between_curvatures",
                              passed=bool(np.all(lower >= -num_tol) and np.all(upper >= -num_tol)),
                              margin=float(min(lower.min(), upper.min()))))

    claims.append(_sector_claim(traj, tol.sector_rtol))
    report = AuditReport(kind=f"pathwise_{outcome.flow}", claims=claims)
    for failure in report.failures:
        logger.warning(f"Seed {outcome.seed}: Monitor verletzt: {failure.name} (Marge {failure.margin:.3e})")
    return report


def _floor_claim(name, rho_min, brownian, int_h, atol):
    """1/rho_min(t) <= 1/rho_min(0) + sqrt(2) B + 2 Integral h, nur für t > 0 ausgewertet."""
    slack = (1.0 / rho_min[0] + SQRT2 * brownian + 2.0 * int_h - 1.0 / rho_min)[1:]
    if slack.size == 0:
        return ClaimResult(name=name, passed=None, margin=0.0, detail="keine Zeitpunkte t > 0")
    margin = float(slack.min())
    return ClaimResult(name=name, passed=margin >= -atol, margin=margin, detail=f"Toleranz {atol:.2e}")


def _sector_claim(traj, rtol):
    profiles = traj.profiles
    if not profiles:
        return ClaimResult(name="sector_monotone", passed=None, margin=0.0, detail="keine Profile")
    n = profiles[0].symmetry_order
    if n < 2 or sector_monotone_margin(profiles[0], n) > rtol * profiles[0].rho.max():
        return ClaimResult(name="sector_monotone", passed=None, margin=0.0, detail="Start nicht in S_n-runter")
    worst = max(sector_monotone_margin(p, n) - rtol * p.rho.max() for p in profiles)
    return ClaimResult(name="sector_monotone", passed=worst <= 0, margin=-worst)


class SdeResidualReport(BaseModel):
    steps: int
    mean_dt: float
    max_dt: float = 0.0
    sigma_quantiles: dict
    lambda_quantiles: dict
    tolerance: float = 0.0
    passed: Optional[bool] = None

    def as_claim(self):
        worst = max(self.sigma_quantiles["q99"], self.lambda_quantiles["q99"])
        return ClaimResult(name="sde_coefficients", passed=self.passed, margin=self.tolerance - worst,
                           detail=f"q99 sigma {self.sigma_quantiles['q99']:.3e}, "
                                  f"lambda {self.lambda_quantiles['q99']:.3e}")


def _quantiles(values):
    values = np.abs(np.asarray(values, dtype=float))
    if values.size == 0:
        return {"q50": 0.0, "q99": 0.0, "max": 0.0}
    return {"q50": float(np.quantile(values, 0.5)), "q99": float(np.quantile(values, 0.99)),
            "max": float(values.max())}


def sde_coefficient_check(outcome, residual_factor=SDE_RESIDUAL_FACTOR):
    """
    Realisierte Zuwächse von sigma und lambda gegen Drift * dt + Diffusion * dB,
    nur über aufeinanderfolgende Einzelschritte (record_every = 1).
    Bestanden, wenn beide q99-Residuen <= residual_factor * max_dt sind.
    """
    traj = outcome.trajectory
    steps = traj.column("step_count")
    dt = traj.column("dt_last")[1:]
    dB = traj.column("dB_last")[1:]
    sigma = traj.column("sigma")
    lam = traj.column("lambda")
    int_rho = traj.column("int_rho")
    single = np.diff(steps) == 1
    renorm = 1.0 if outcome.flow == "srcf" else 0.0

    s0, l0, ir0 = sigma[:-1], lam[:-1], int_rho[:-1]
    sigma_pred = (-ir0 + renorm * 4.0 * np.pi * s0 / l0) * dt + 2.0 * SQRT2 * np.pi * dB
    lambda_pred = renorm * 2.0 * s0 ** 2 / l0 * dt + SQRT2 * s0 * dB
    sigma_res = (np.diff(sigma) - sigma_pred)[single]
    lambda_res = (np.diff(lam) - lambda_pred)[single]
    report = SdeResidualReport(steps=int(single.sum()), mean_dt=0.0,
                               sigma_quantiles=_quantiles(sigma_res), lambda_quantiles=_quantiles(lambda_res))
    if not single.any():
        logger.warning(f"Seed {outcome.seed}: keine Einzelschritte aufgezeichnet, SDE-Prüfung ohne Urteil")
        return report
    report.mean_dt = float(dt[single].mean())
    report.max_dt = float(dt[single].max())
    report.tolerance = residual_factor * report.max_dt
    report.passed = bool(max(report.sigma_quantiles["q99"], report.lambda_quantiles["q99"]) <= report.tolerance)
    if not report.passed:
        logger.warning(f"Seed {outcome.seed}: SDE-Residuen q99 über {report.tolerance:.3e}")
    return report


class DriftReport(BaseModel):
    h_drift: float
    h_diffusion: float
    ent_drift_parts: dict
    ent_drift: float
    ent_diffusion: float
    supermartingale_drift_ok: Optional[bool] = None


def drift_calculators(profile, tol=1e-9):
    """
    Drift und Diffusion von h und der Entropie unter dem SRCF.
    Für n >= 3 wird geprüft, dass -Integral rho'^2 + 2 Integral (rho - h/2)^2 <= tol.
    """
    ops = SpectralOps(profile.grid)
    rho = profile.rho
    sigma = ops.integrate(profile.radius_of_curvature)
    lam = area_from_radius(profile.radius_of_curvature)
    h = sigma / lam
    int_rho = ops.integrate(rho)
    parts = {
        "gradient": -ops.integrate(ops.derivative(rho) ** 2),
        "deviation": 2.0 * ops.integrate((rho - 0.5 * h) ** 2),
        "renormalization": -np.pi * h * h,
    }
    verdict = None
    if profile.symmetry_order >= 3:
        verdict = bool(parts["gradient"] + parts["deviation"] <= tol * max(1.0, abs(parts["renormalization"])))
    return DriftReport(
        h_drift=-int_rho / lam,
        h_diffusion=SQRT2 * (2.0 * np.pi * lam - sigma ** 2) / lam ** 2,
        ent_drift_parts=parts,
        ent_drift=float(sum(parts.values())),
        ent_diffusion=-SQRT2 * int_rho,
        supermartingale_drift_ok=verdict,
    )
