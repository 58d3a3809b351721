# trajectory.py
"""
Gemeinsame Bausteine der Zeitintegration: Zeitschrittwahl, Landezeiten,
Aufzeichnung und Klassifikation von Abbrüchen.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .curve_geometry import CLOSURE_TOL, closure_residual, geometry_report
from .errors import CflViolation


logger = logging.getLogger(__name__)

STOP_REASONS = ("completed", "rho_floor", "rho_cap", "closure_lost", "nan", "max_steps")
# kleinste Zeitdifferenz, die noch als eigener Schritt zählt
TIME_EPS = 1e-12


@dataclass
class TrajectoryRecord:
    """
    Zeitreihe eines Laufs: eine GeometryReport pro Aufzeichnung, optional Profile,
    und zusätzliche Spalten (z. B. B, int_h, dB_last) in ``series``.
    """
    times: List[float] = field(default_factory=list)
    reports: list = field(default_factory=list)
    profiles: list = field(default_factory=list)
    series: Dict[str, List[float]] = field(default_factory=dict)
    stop_reason: str = "completed"
    steps: int = 0
    max_dt: float = 0.0

    @property
    def final_time(self):
        return self.times[-1] if self.times else 0.0

    def column(self, name):
        """Spalte aus den Reports oder aus ``series`` als numpy-Array."""
        if name in self.series:
            return np.asarray(self.series[name], dtype=float)
        if name == "lambda":
            name = "lambda_"
        return np.array([getattr(report, name) for report in self.reports], dtype=float)

    def rows(self):
        """Ein dict pro Aufzeichnung im JSONL-Format."""
        for i, (t, report) in enumerate(zip(self.times, self.reports)):
            row = {
                "t": t,
                "sigma": report.sigma,
                "lambda": report.lambda_,
                "h": report.h,
                "entropy": report.entropy,
                "deficit": report.deficit,
                "psi": report.psi,
                "rho_min": report.rho_min,
                "rho_max": report.rho_max,
                "pseudo_median": report.pseudo_median,
                "closure_residual": report.closure_residual,
            }
            for name, values in self.series.items():
                row[name] = values[i]
            yield row


def cfl_time_step(rho_max, ops, cfl):
    """
    dt = cfl * dtheta^2 / rho_max^2, gemessen am Drei-Punkte-Laplace (Spektralradius 4).
    Für den spektralen Operator (Radius pi^2) wird entsprechend verkleinert.
    """
    dtheta = ops.grid.delta_theta
    return cfl * dtheta ** 2 / rho_max ** 2 * 4.0 / ops.second_derivative_radius


def check_fixed_step(config, rho_max, ops):
    """
    :raises CflViolation: wenn der feste Zeitschritt die CFL-Schranke verletzt.
    """
    if config.dt is None:
        return
    bound = cfl_time_step(rho_max, ops, 0.5)
    if config.dt > bound:
        raise CflViolation(f"dt = {config.dt:.3e} > CFL-Schranke {bound:.3e} (rho_max = {rho_max:.3e}); "
                           "ohne --dt wird der Zeitschritt adaptiv gewählt")


def landing_times(config):
    times = sorted({float(t) for t in config.record_times if t > 0} | {float(config.t_end)})
    return times


def clip_to_landing(t, dt, landings):
    """
    Kürzt dt so, dass die nächste Landezeit exakt getroffen wird.
    Liefert (dt, gelandet).
    """
    target = next((s for s in landings if s > t + TIME_EPS), None)
    if target is None:
        return dt, False
    remaining = target - t
    if remaining <= dt * (1.0 + 1e-12):
        return remaining, True
    if remaining < 2.0 * dt:
        # zwei gleich große Schritte statt eines Mini-Schritts
        return 0.5 * remaining, False
    return dt, False


def classify_state(rho, config):
    """Abbruchgrund für einen neuen Zustand oder None."""
    if not np.all(np.isfinite(rho)):
        return "nan"
    if rho.min() <= config.rho_floor:
        return "rho_floor"
    if rho.max() >= config.rho_cap:
        return "rho_cap"
    return None


class Recorder:
    """
    Sammelt Aufzeichnungen nach record_every und Landezeiten.
    """

    def __init__(self, config, method="spectral"):
        """Konstruktor"""
        self.config = config
        self.method = method
        self.record = TrajectoryRecord()
        self._last_step = None

    def due(self, step, landed):
        every = self.config.record_every
        return landed or (every > 0 and step % every == 0)

    def add(self, t, profile, step, **series):
        if self._last_step == step:
            return
        report = geometry_report(profile, method=self.method)
        self.record.times.append(float(t))
        self.record.reports.append(report)
        if self.config.record_profiles:
            self.record.profiles.append(profile)
        for name, value in series.items():
            self.record.series.setdefault(name, []).append(float(value))
        self._last_step = step

    def closure_lost(self, profile):
        sigma = float(np.sum(profile.radius_of_curvature)) * profile.grid.delta_theta
        return closure_residual(profile) > CLOSURE_TOL * max(1.0, sigma)

    def finish(self, stop_reason, steps, max_dt):
        self.record.stop_reason = stop_reason
        self.record.steps = steps
        self.record.max_dt = max_dt
        return self.record
