# flow_deterministic.py
"""
Renormalisierter Krümmungsfluss (RCF) in Winkelparametrisierung:

    d rho / dt = rho^2 (rho'' + rho - 2h),   h = sigma / lambda

mit klassischem RK4, CFL-abhängigem Zeitschritt und allen deterministischen
Monitoren (Monotonie, explizite Schranken, ODE-Residuen).
"""
import logging
import time

import numpy as np
from pydantic import BaseModel, Field
from typing import Optional

from .curve_geometry import area_from_radius, project_closure
from .errors import InsufficientSnapshots, PositivityLost
from .models import AuditReport, ClaimResult
from .spectral import SpectralOps
from .symmetry_skeleton import sector_monotone_margin, symmetrize_rho
from .trajectory import (Recorder, cfl_time_step, check_fixed_step, classify_state,
                         TIME_EPS, clip_to_landing, landing_times)


logger = logging.getLogger(__name__)


class DeterministicTolerances(BaseModel):
    """Toleranzen der deterministischen Monitore."""
    monotone_rtol: float = Field(1e-9, ge=0, description="Erlaubter Anstieg relativ zu max(1, |x|)")
    rate_rtol: float = Field(1e-3, ge=0, description="Relative Toleranz für Raten aus finiten Differenzen")
    bound_rtol: float = Field(1e-8, ge=0, description="Relative Toleranz für explizite Schranken")
    convergence_tol: Optional[float] = Field(None, gt=0, description="Erlaubtes sigma^2/lambda - 4pi am Ende")
    sector_rtol: float = Field(1e-10, ge=0)


class ResidualReport(BaseModel):
    sigma_max_rel: float
    lambda_max_rel: float
    h_rate_max_rel: float
    psi_gradient_max_rel: Optional[float] = None
    max_relative_residual: float
    snapshots: int


def isoperimetric_ratio_h(rho, grid):
    """h = sigma / lambda direkt aus rho, ohne Rekonstruktion."""
    sigma = float(np.sum(1.0 / rho)) * grid.delta_theta
    return sigma / area_from_radius(1.0 / rho)


def rcf_rates(rho, ops):
    """
    (d rho/dt, d base/dt) für den RCF; base folgt (-rho'(0), rho(0) - 2h).
    """
    h = isoperimetric_ratio_h(rho, ops.grid)
    drho = rho ** 2 * (ops.second_derivative(rho) + rho - 2.0 * h)
    dbase = np.array((-ops.derivative(rho)[0], rho[0] - 2.0 * h))
    return drho, dbase


def rcf_rhs(profile, method="spectral"):
    """rho^2 (rho'' + rho - 2h), h aus dem Profil neu berechnet."""
    return rcf_rates(profile.rho, SpectralOps(profile.grid, method))[0]


def rk4_step(rho, base, dt, ops):
    """Ein klassischer RK4-Schritt; h wird in jeder Stufe neu ausgewertet."""
    k1, b1 = rcf_rates(rho, ops)
    k2, b2 = rcf_rates(rho + 0.5 * dt * k1, ops)
    k3, b3 = rcf_rates(rho + 0.5 * dt * k2, ops)
    k4, b4 = rcf_rates(rho + dt * k3, ops)
    rho_new = rho + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    base_new = base + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
    return rho_new, base_new


def _post_step(profile, rho, base, config):
    """Schließungsprojektion und optionale Symmetrisierung nach einem Schritt."""
    stop = classify_state(rho, config)
    if stop:
        return None, stop
    if config.enforce_symmetry and profile.symmetry_order >= 1:
        rho = symmetrize_rho(rho, profile.symmetry_order)
    try:
        candidate = project_closure(profile.with_rho(rho, base_point=tuple(base)))
    except PositivityLost as e:
        logger.warning(f"Schließung verloren: {e.detail}")
        return None, "closure_lost"
    return candidate, None


def run_rcf(initial, config):
    """
    Integriert den RCF bis t_end oder bis zu einem Abbruch; Abbrüche werden als
    stop_reason berichtet, nicht geworfen.
    :raises CflViolation: wenn ein fester Zeitschritt die CFL-Schranke verletzt.
    """
    ops = SpectralOps(initial.grid, config.derivative_method)
    check_fixed_step(config, float(initial.rho.max()), ops)
    recorder = Recorder(config, config.derivative_method)
    landings = landing_times(config)
    start_time = time.time()
    logger.info(f"RCF Start: N={initial.grid.n_samples}, t_end={config.t_end}, cfl={config.cfl}")

    profile = project_closure(initial)
    t, step, max_dt = 0.0, 0, 0.0
    stop_reason = "completed"
    recorder.add(t, profile, step)

    while t < config.t_end - TIME_EPS:
        if step >= config.max_steps:
            stop_reason = "max_steps"
            break
        rho = profile.rho
        dt = config.dt or min(config.dt_max, cfl_time_step(float(rho.max()), ops, config.cfl))
        dt, landed = clip_to_landing(t, dt, landings)
        rho_new, base_new = rk4_step(rho, np.array(profile.base_point), dt, ops)
        candidate, stop = _post_step(profile, rho_new, base_new, config)
        if stop:
            stop_reason = stop
            break
        if recorder.closure_lost(candidate):
            stop_reason = "closure_lost"
            break
        profile = candidate
        t += dt
        step += 1
        max_dt = max(max_dt, dt)
        if recorder.due(step, landed):
            recorder.add(t, profile, step)

    recorder.add(t, profile, step)
    duration = time.time() - start_time
    logger.info(f"RCF beendet ({stop_reason}) bei t={t:.6g} nach {step} Schritten. Laufzeit: {duration:.2f} Sekunden.")
    return recorder.finish(stop_reason, step, max_dt)


def deterministic_ode_residuals(trajectory):
    """
    Zentrale Differenzen von sigma und lambda gegen
    sigma' = -Int rho + 4 pi sigma/lambda und lambda' = -2pi + 2 sigma^2/lambda,
    dazu die Rate von h und die Gradientenidentität Psi' = -(1/sigma) Int (rho - 2h)^2 / rho.
    :raises InsufficientSnapshots: bei weniger als drei Aufzeichnungen.
    """
    if len(trajectory.times) < 3:
        raise InsufficientSnapshots(f"Mindestens 3 Aufzeichnungen nötig, vorhanden: {len(trajectory.times)}")
    t = np.asarray(trajectory.times)
    sigma = trajectory.column("sigma")
    lam = trajectory.column("lambda")
    int_rho = trajectory.column("int_rho")

    sigma_rate = -int_rho + 4.0 * np.pi * sigma / lam
    lambda_rate = -2.0 * np.pi + 2.0 * sigma ** 2 / lam
    inner = slice(1, -1)

    def max_rel(observed, predicted):
        return float(np.max(np.abs(observed[inner] - predicted[inner]) / np.maximum(np.abs(predicted[inner]), 1e-12)))

    sigma_res = max_rel(np.gradient(sigma, t), sigma_rate)
    lambda_res = max_rel(np.gradient(lam, t), lambda_rate)
    # h = sigma/lambda: Quotientenregel mit den beiden Raten
    h_rate = (sigma_rate * lam - sigma * lambda_rate) / lam ** 2
    h_res = max_rel(np.gradient(trajectory.column("h"), t), h_rate)
    psi_res = None
    if trajectory.profiles and len(trajectory.profiles) == t.size:
        gradient = []
        for profile, report in zip(trajectory.profiles, trajectory.reports):
            rho = profile.rho
            integral = float(np.sum((rho - 2.0 * report.h) ** 2 / rho)) * profile.grid.delta_theta
            gradient.append(-integral / report.sigma)
        psi_res = max_rel(np.gradient(trajectory.column("psi"), t), np.asarray(gradient))
    worst = max(value for value in (sigma_res, lambda_res, h_res, psi_res) if value is not None)
    return ResidualReport(sigma_max_rel=sigma_res, lambda_max_rel=lambda_res, h_rate_max_rel=h_res,
                          psi_gradient_max_rel=psi_res, max_relative_residual=worst, snapshots=int(t.size))


def _non_increasing(name, values, rtol, detail=""):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return ClaimResult(name=name, passed=None, margin=0.0, detail="zu wenige Werte")
    increase = float(np.max(np.diff(values)))
    tol = rtol * max(1.0, float(np.max(np.abs(values))))
    return ClaimResult(name=name, passed=increase <= tol, margin=-increase, detail=detail)


def _below(name, values, bounds, rtol, detail=""):
    """values <= bounds an jeder Aufzeichnung; margin = min(bounds - values)."""
    values, bounds = np.asarray(values, dtype=float), np.asarray(bounds, dtype=float)
    slack = bounds - values
    tol = rtol * np.maximum(1.0, np.abs(bounds))
    return ClaimResult(name=name, passed=bool(np.all(slack >= -tol)), margin=float(np.min(slack)), detail=detail)


def deterministic_monitor_audit(trajectory, tolerances=None):
    """
    Alle deterministischen Aussagen als ClaimResult: Monotonie von h, sigma^2/(4 pi lambda),
    Defizit, Entropie und Psi, die expliziten Schranken für Defizit, rho_min, Entropie und
    Fläche, rho* <= h, der Poincaré-Ausdruck und der Trend sigma^2/lambda -> 4pi.
    """
    tol = tolerances or DeterministicTolerances()
    t = np.asarray(trajectory.times)
    h = trajectory.column("h")
    sigma = trajectory.column("sigma")
    lam = trajectory.column("lambda")
    deficit = trajectory.column("deficit")
    entropy = trajectory.column("entropy")
    rho_min = trajectory.column("rho_min")
    sigma0, lambda0, h0, rho0, ent0 = sigma[0], lam[0], h[0], rho_min[0], entropy[0]
    claims = []

    # (a) h fällt, h' <= -12 pi^2/(sigma lambda)
    claims.append(_non_increasing("h_non_increasing", h, tol.monotone_rtol))
    if t.size >= 3:
        rate = np.gradient(h, t)[1:-1]
        bound = (-12.0 * np.pi ** 2 / (sigma * lam))[1:-1]
        claims.append(_below("h_rate_bound", rate, bound, tol.rate_rtol, "h' <= -12 pi^2/(sigma lambda)"))
    else:
        claims.append(ClaimResult(name="h_rate_bound", passed=None, margin=0.0, detail="zu wenige Werte"))

    # (b) isoperimetrisches Verhältnis
    ratio = sigma ** 2 / (4.0 * np.pi * lam)
    claims.append(_non_increasing("isoperimetric_ratio_non_increasing", ratio, tol.monotone_rtol))

    # (c) Defizit fällt und bleibt unter der expliziten Schranke
    claims.append(_non_increasing("deficit_non_increasing", deficit, tol.monotone_rtol))
    growth = -2.0 * np.pi + 2.0 * sigma0 ** 2 / lambda0
    deficit_bound = deficit[0] * ((growth * t + lambda0) / lambda0) ** (-2.0 * np.pi / growth)
    claims.append(_below("deficit_bound", deficit, deficit_bound, tol.bound_rtol))

    # (d) Krümmungsuntergrenzen
    floor_exp = rho0 * np.exp(-h0 ** 2 * t)
    floor_sqrt = 1.0 / (1.0 / rho0 + sigma0 ** 2 / (6.0 * np.pi ** 2 * lambda0)
                        * np.sqrt(24.0 * np.pi ** 2 * t + 4.0 * np.pi * lambda0))
    claims.append(_below("rho_min_floor", np.maximum(floor_exp, floor_sqrt), rho_min, tol.bound_rtol))

    # (e) Entropie fällt und liegt in beiden Klammern
    claims.append(_non_increasing("entropy_non_increasing", entropy, tol.monotone_rtol))
    lower = np.maximum(2.0 * np.pi * (np.log(rho0) - h0 ** 2 * t), -2.0 * np.pi * np.log(1.0 / floor_sqrt))
    upper = ent0 + np.pi * rho0 ** 2 / h0 ** 2 * (np.exp(-2.0 * h0 ** 2 * t) - 1.0)
    claims.append(_below("entropy_lower_bracket", lower, entropy, tol.bound_rtol))
    claims.append(_below("entropy_upper_bracket", entropy, upper, tol.bound_rtol))

    # (f) Pseudo-Median
    claims.append(_below("pseudo_median_below_h", trajectory.column("pseudo_median"), h, tol.bound_rtol))

    # (g) Psi
    claims.append(_non_increasing("psi_non_increasing", trajectory.column("psi"), tol.monotone_rtol))

    # (h) sigma^2/lambda -> 4 pi
    excess = sigma ** 2 / lam - 4.0 * np.pi
    trend = _non_increasing("circle_trend", excess, tol.monotone_rtol)
    if tol.convergence_tol is not None:
        final_ok = excess[-1] <= tol.convergence_tol
        trend = ClaimResult(name="circle_trend", passed=bool(trend.passed and final_ok),
                            margin=min(trend.margin, tol.convergence_tol - float(excess[-1])),
                            detail=f"final sigma^2/lambda - 4pi = {excess[-1]:.3e}")
    claims.append(trend)

    # (i) Fläche zwischen lambda0 + 6 pi t und lambda0 + growth t
    claims.append(_below("area_lower_bracket", lambda0 + 6.0 * np.pi * t, lam, tol.bound_rtol))
    claims.append(_below("area_upper_bracket", lam, lambda0 + growth * t, tol.bound_rtol))

    # (j) Int (rho^2 - rho'^2 - 4 h rho) wächst; (k) Monotonie auf [0, pi/n]
    claims.extend(_profile_claims(trajectory, h, tol))

    report = AuditReport(kind="deterministic", claims=claims)
    for failure in report.failures:
        logger.warning(f"Monitor verletzt: {failure.name} (Marge {failure.margin:.3e})")
    return report


def _profile_claims(trajectory, h, tol):
    profiles = trajectory.profiles
    if not profiles or len(profiles) != len(trajectory.times):
        return [ClaimResult(name="poincare_non_decreasing", passed=None, margin=0.0, detail="keine Profile"),
                ClaimResult(name="sector_monotone", passed=None, margin=0.0, detail="keine Profile")]
    ops = SpectralOps(profiles[0].grid)
    poincare = []
    for profile, h_value in zip(profiles, h):
        rho = profile.rho
        poincare.append(ops.integrate(rho ** 2 - ops.derivative(rho) ** 2 - 4.0 * h_value * rho))
    claims = [_non_increasing("poincare_non_decreasing", -np.asarray(poincare), tol.monotone_rtol)]

    n = profiles[0].symmetry_order
    if n >= 2 and sector_monotone_margin(profiles[0], n) <= tol.sector_rtol * profiles[0].rho.max():
        margins = [sector_monotone_margin(p, n) - tol.sector_rtol * p.rho.max() for p in profiles]
        worst = max(margins)
        claims.append(ClaimResult(name="sector_monotone", passed=worst <= 0, margin=-worst))
    else:
        claims.append(ClaimResult(name="sector_monotone", passed=None, margin=0.0, detail="Start nicht in S_n-runter"))
    return claims
