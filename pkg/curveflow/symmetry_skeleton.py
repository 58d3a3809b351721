# symmetry_skeleton.py
"""
G_n-symmetrische Kurvenklassen, die Achsenprojektion Pi, das sternförmige
Skelett und die Fourier-Abschätzung des isoperimetrischen Defizits.

G_n wird erzeugt von der Drehung um 2pi/n und der Spiegelung an der
vertikalen Achse (theta -> -theta). Die Kurven sind so gelegt, dass C(0)
der untere Punkt auf der Symmetrieachse ist.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field
from scipy.integrate import cumulative_simpson, simpson
from scipy.optimize import brentq

from .curve_geometry import (CurvatureProfile, geometry_report, numeric_tolerance,
                             reconstruct_curve, support_function, from_support)
from .errors import NotConvex, NotInSn, NotSymmetric
from .spectral import AngleGrid, SpectralOps


logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-8
PI_PRIME_TOL = 1e-9
ENDPOINT_TOL = 1e-6
MONOTONE_TOL = 1e-10
PI_REFINEMENT = 4
ORACLE_GRID = 400
ORACLE_REFINEMENT = 2
ORACLE_CHUNK = 2048
ORACLE_AXIS_REFINEMENT = 64
ORACLE_GAP_TOL = 1e-12


class SupportFourier(BaseModel):
    """
    p(theta) = a0 + sum_k a_k cos(k n theta) um das Symmetriezentrum.
    """
    n: int = Field(..., ge=1)
    a0: float = Field(..., gt=0)
    a: List[float] = Field(default_factory=list, description="a_k für k = 1, 2, ...")

    @classmethod
    def from_radius_modes(cls, n, r0, modes: Dict[int, float]):
        """
        Aus den cos(k n theta)-Moden von 1/rho: a_k = r_k / (1 - k^2 n^2).
        """
        order = max(modes) if modes else 0
        a = [modes.get(k, 0.0) / (1.0 - k * k * n * n) for k in range(1, order + 1)]
        return cls(n=n, a0=r0, a=a)

    @classmethod
    def from_profile(cls, profile, n, max_modes=None):
        curve = reconstruct_curve(profile)
        p = support_function(curve, curve.centroid_of_samples())
        ops = SpectralOps(profile.grid)
        count = profile.grid.n_samples // (2 * n) - 1
        if max_modes is not None:
            count = min(count, max_modes)
        a = [ops.cos_sin_coefficients(p, k * n)[0] for k in range(1, count + 1)]
        return cls(n=n, a0=float(np.mean(p)), a=a)

    def support(self, grid):
        p = np.full(grid.n_samples, self.a0)
        for k, ak in enumerate(self.a, start=1):
            p += ak * np.cos(k * self.n * grid.theta)
        return p

    def to_profile(self, grid):
        return from_support(self.support(grid), grid, symmetry_order=self.n)

    def fourier_deficit(self):
        """2 pi^2 sum a_k^2 (n^2 k^2 - 1)"""
        return float(2.0 * np.pi ** 2 * sum(ak * ak * (self.n ** 2 * k * k - 1)
                                            for k, ak in enumerate(self.a, start=1)))


class ClassMembership(BaseModel):
    in_Tn: bool
    in_Sn: bool
    in_Sn_down: bool
    degenerate: bool = False
    symmetry_residual: float
    pi_prime_min: Optional[float] = None
    rho_increase_max: Optional[float] = None
    implication_holds: bool = True


class SkeletonStar(BaseModel):
    n: int = Field(..., ge=2)
    y0: float = Field(..., ge=0)
    vertices: List[List[float]]
    center: List[float] = Field(default_factory=lambda: [0.0, 0.0])

    @property
    def total_length(self):
        return self.n * self.y0


class MedialAxisEstimate(BaseModel):
    y0: float
    cell: float
    medial_points: int


class ChainReport(BaseModel):
    n: int
    total_length: float
    y0: float
    bonnesen_lhs: float
    deficit: float
    fourier_deficit: float
    wirtinger_member: float
    sector_member: float
    middle_bound: float
    outer_bound: float
    fourier_identity_residual: float
    support_identity_residual: float
    tolerance: float
    chain_holds: bool


@dataclass(frozen=True)
class PiProjection:
    """Pi und Pi' auf dem verfeinerten Sektor [0, pi/n]."""
    n: int
    theta: np.ndarray
    pi: np.ndarray
    pi_prime: np.ndarray
    pi_direct: np.ndarray
    b: float
    y0: float
    endpoint_residual: float

    def at_grid_nodes(self, refine=PI_REFINEMENT):
        return self.theta[::refine], self.pi[::refine], self.pi_prime[::refine]


@dataclass(frozen=True)
class RadialCheck:
    theta: np.ndarray
    r: np.ndarray
    identity_residual: float
    derivative_residual: float


def grid_for_order(n, minimum=256):
    """Kleinste Gittergröße >= minimum, die durch 2n teilbar ist."""
    step = 2 * n
    return AngleGrid(step * int(np.ceil(minimum / step)))


def symmetrize_rho(rho, n):
    """Mittelung über die G_n-Bahn: Drehungen um 2pi/n, dann theta -> -theta."""
    size = rho.size
    averaged = np.tile(rho.reshape(n, size // n).mean(axis=0), n)
    mirrored = averaged[(-np.arange(size)) % size]
    return 0.5 * (averaged + mirrored)


def symmetrize(profile, n=None):
    n = n or profile.symmetry_order
    _require_grid(profile.grid, n)
    return profile.with_rho(symmetrize_rho(profile.rho, n))


def symmetry_residual(profile, n):
    if profile.grid.n_samples % (2 * n):
        return np.inf
    rho = profile.rho
    return float(np.max(np.abs(rho - symmetrize_rho(rho, n))) / rho.max())


def sector_monotone_margin(profile, n):
    """Größte Vorwärtsdifferenz von rho auf [0, pi/n] (<= 0: monoton fallend)."""
    end = profile.grid.n_samples // (2 * n)
    return float(np.max(np.diff(profile.rho[: end + 1])))


def flower_generator(n, epsilon, a0=1.0, grid=None):
    """
    1/rho = a0 + epsilon (1 - n^2) cos(n theta), Basispunkt (0, -(a0 + epsilon)).
    :raises NotConvex: wenn epsilon (n^2 - 1) >= a0.
    """
    if n < 1:
        raise NotSymmetric(f"n muss >= 1 sein, nicht {n}")
    grid = grid or grid_for_order(n)
    if a0 <= 0 or abs(epsilon) * (n * n - 1) >= a0:
        raise NotConvex(f"Konvexität verletzt: |epsilon| (n^2 - 1) = {abs(epsilon) * (n * n - 1):.6g} >= a0 = {a0}")
    _require_grid(grid, n)
    radius = a0 + epsilon * (1.0 - n * n) * np.cos(n * grid.theta)
    return CurvatureProfile(grid=grid, rho=1.0 / radius, symmetry_order=n, base_point=(0.0, -(a0 + epsilon)))


def _require_grid(grid, n):
    if n < 1 or grid.n_samples % (2 * n):
        raise NotSymmetric(f"2n = {2 * n} muss n_samples = {grid.n_samples} teilen")


def _require_symmetric(profile, n):
    _require_grid(profile.grid, n)
    residual = symmetry_residual(profile, n)
    if residual > SYMMETRY_TOL:
        raise NotSymmetric(f"G_{n}-Residuum {residual:.3e} > {SYMMETRY_TOL:.0e}")


def projection_Pi(profile, n, refine=PI_REFINEMENT):
    """
    Pi auf [0, pi/n]: Pi(0) = -(b - 1/rho(0)), Pi' = (1/sin^2) Integral r' sin,
    kumulativ integriert (Simpson) auf einem refine-fach feineren Gitter.
    :raises NotSymmetric: wenn das Profil nicht G_n-symmetrisch ist.
    """
    _require_symmetric(profile, n)
    grid = profile.grid
    ops = SpectralOps(grid)
    curve = reconstruct_curve(profile)
    center = curve.centroid_of_samples()
    b = float(np.linalg.norm(curve.points[0] - center))
    r = profile.radius_of_curvature

    fine = SpectralOps(grid.refined(refine))
    fine_grid = fine.grid
    r_fine = ops.interpolate(r, refine)
    weighted = fine.antiderivative(fine.derivative(r_fine) * fine_grid.sin)
    cos_part = fine.antiderivative(r_fine * fine_grid.cos)
    sin_part = fine.antiderivative(r_fine * fine_grid.sin)

    end = fine_grid.n_samples // (2 * n)
    theta = np.array(fine_grid.theta[: end + 1])
    pi_prime = np.zeros(end + 1)
    pi_prime[1:] = weighted[1: end + 1] / np.sin(theta[1:]) ** 2

    y0 = b - float(r[0])
    pi = -y0 + cumulative_simpson(pi_prime, x=theta, initial=0.0)
    pi_direct = np.full(end + 1, -y0)
    pi_direct[1:] = -b + cos_part[1: end + 1] / np.tan(theta[1:]) + sin_part[1: end + 1]
    return PiProjection(n=n, theta=theta, pi=pi, pi_prime=pi_prime, pi_direct=pi_direct,
                        b=b, y0=y0, endpoint_residual=float(abs(pi[-1])))


def radial_function(profile, n, projection=None):
    """
    r(theta) = |C(theta) - (0, Pi(theta))| an den Gitterknoten in (0, pi/n] und die Residuen
    von Pi' sin + r = 1/rho und r' = Pi' cos.
    """
    projection = projection or projection_Pi(profile, n)
    curve = reconstruct_curve(profile)
    center = curve.centroid_of_samples()
    theta, pi, pi_prime = projection.at_grid_nodes()
    end = theta.size - 1
    points = curve.points[1: end + 1] - center
    axis_points = np.column_stack((np.zeros(end), pi[1:]))
    r = np.linalg.norm(points - axis_points, axis=1)
    identity = pi_prime[1:] * np.sin(theta[1:]) + r - profile.radius_of_curvature[1: end + 1]
    r_prime = np.gradient(r, theta[1:], edge_order=2)
    derivative = (r_prime - pi_prime[1:] * np.cos(theta[1:]))[1:-1]
    return RadialCheck(theta=theta[1:], r=r, identity_residual=float(np.max(np.abs(identity))),
                       derivative_residual=float(np.max(np.abs(derivative))))


def class_membership(profile, n):
    """
    (in_Tn, in_Sn, in_Sn_down) mit Margen: min Pi' und größte Vorwärtsdifferenz von rho.
    implication_holds ist False, wenn in_Sn_down ohne in_Sn auftritt.
    """
    residual = symmetry_residual(profile, n)
    if residual > SYMMETRY_TOL:
        return ClassMembership(in_Tn=False, in_Sn=False, in_Sn_down=False, symmetry_residual=residual)
    projection = projection_Pi(profile, n)
    scale = max(1.0, projection.b)
    pi_prime_min = float(projection.pi_prime[1:].min())
    degenerate = bool(np.max(np.abs(projection.pi_prime)) <= PI_PRIME_TOL * scale)
    endpoint_ok = projection.endpoint_residual <= ENDPOINT_TOL * scale
    in_sn = bool(pi_prime_min >= -PI_PRIME_TOL * scale and endpoint_ok)
    increase = sector_monotone_margin(profile, n)
    in_sn_down = bool(increase <= MONOTONE_TOL * float(profile.rho.max()))
    implication = in_sn or not in_sn_down
    if not implication:
        logger.error(f"S_n-runter ohne S_n: Pi' min = {pi_prime_min:.3e}, Endpunkt {projection.endpoint_residual:.3e}")
    if degenerate:
        logger.info("Pi' verschwindet: Kreis, Skelett entartet")
    return ClassMembership(in_Tn=True, in_Sn=in_sn, in_Sn_down=in_sn_down, degenerate=degenerate,
                           symmetry_residual=residual, pi_prime_min=pi_prime_min, rho_increase_max=increase,
                           implication_holds=implication)


def extract_skeleton(profile, n):
    """
    Sternskelett G_n({0} x [-y0, 0]) mit y0 = b - 1/rho(0).
    :raises NotInSn: wenn das Profil nicht in S_n liegt.
    """
    membership = class_membership(profile, n)
    if not membership.in_Sn:
        raise NotInSn(f"Profil liegt nicht in S_{n} (Pi' min = {membership.pi_prime_min})")
    curve = reconstruct_curve(profile)
    center = curve.centroid_of_samples()
    y0 = max(0.0, float(np.linalg.norm(curve.points[0] - center)) - float(profile.radius_of_curvature[0]))
    angles = 2.0 * np.pi * np.arange(n) / n
    # Drehung von (0, -y0) um 2 pi k / n
    vertices = np.column_stack((y0 * np.sin(angles), -y0 * np.cos(angles))) + center
    return SkeletonStar(n=n, y0=y0, vertices=vertices.tolist(), center=center.tolist())


def _axis_gap(p_axis, cos_axis, s):
    """Abstand zwischen d_s(0) und dem globalen Minimum von d_s = p - s cos auf der Achse (0, -s)."""
    distance = p_axis - s * cos_axis
    return float(distance[0] - distance.min())


def _refine_axis_tip(p, ops, estimate, cell, extent):
    """
    Spitze des Achsenzweigs: größtes s, für das theta = 0 nicht mehr das globale Minimum ist.
    Nullstelle von gap(s) - tol per brentq, Klammer ausgehend von der Gitterschätzung.
    """
    p_axis = ops.interpolate(p, ORACLE_AXIS_REFINEMENT)
    cos_axis = ops.grid.refined(ORACLE_AXIS_REFINEMENT).cos
    tol = ORACLE_GAP_TOL * max(1.0, float(p.max()))

    def excess(s):
        return _axis_gap(p_axis, cos_axis, s) - tol

    lower = max(0.0, estimate - 2.0 * cell)
    while lower > 0 and excess(lower) <= 0:
        lower = max(0.0, lower - 2.0 * cell)
    if excess(lower) <= 0:
        return estimate
    upper = estimate + 2.0 * cell
    while excess(upper) > 0:
        if upper >= extent:
            return estimate
        upper = min(extent, upper + 2.0 * cell)
    return float(brentq(excess, lower, upper, xtol=1e-12))


def medial_axis_oracle(profile, n, grid_size=ORACLE_GRID, refine=ORACLE_REFINEMENT):
    """
    Brute-Force-Schätzung von y0 über ein Kandidatengitter: ein Punkt x gehört zur
    Mittelachse, wenn p(theta) - <x, nu(theta)> zwei getrennte globale Minima hat.
    Die Spitze auf der Achse wird danach per Nullstellensuche nachgeschärft.
    """
    curve = reconstruct_curve(profile)
    center = curve.centroid_of_samples()
    p = support_function(curve, center)
    ops = SpectralOps(profile.grid)
    p_fine = ops.interpolate(p, refine)
    fine_grid = profile.grid.refined(refine)
    sin, cos = fine_grid.sin, fine_grid.cos

    shifted = curve.points - center
    lower, upper = shifted.min(axis=0), shifted.max(axis=0)
    xs = np.linspace(lower[0], upper[0], grid_size)
    ys = np.linspace(lower[1], upper[1], grid_size)
    cell = float(xs[1] - xs[0])
    eta = 0.5 * cell
    gx, gy = (a.ravel() for a in np.meshgrid(xs, ys))
    medial = np.zeros(gx.size, dtype=bool)

    for start in range(0, gx.size, ORACLE_CHUNK):
        stop = start + ORACLE_CHUNK
        distance = p_fine[None, :] - gx[start:stop, None] * sin[None, :] + gy[start:stop, None] * cos[None, :]
        nearest = distance.min(axis=1)
        local = (distance <= np.roll(distance, 1, axis=1)) & (distance < np.roll(distance, -1, axis=1))
        near = local & (distance <= nearest[:, None] + eta)
        medial[start:stop] = (nearest > 0) & (near.sum(axis=1) >= 2)

    on_axis = medial & (np.abs(gx) <= 1.5 * cell) & (gy <= 0)
    if not np.any(on_axis):
        return MedialAxisEstimate(y0=0.0, cell=cell, medial_points=int(medial.sum()))
    estimate = float(np.max(-gy[on_axis]))
    y0 = _refine_axis_tip(p, ops, estimate, cell, float(-lower[1]))
    logger.debug(f"Mittelachse: Gitterschätzung y0 = {estimate:.4f}, nachgeschärft {y0:.6f}")
    return MedialAxisEstimate(y0=y0, cell=cell, medial_points=int(medial.sum()))


def isoperimetric_estimate_check(profile, n):
    """
    Kette pi^2 (r_out - r_int)^2 <= Defizit <= 2pi Int p'^2 = 4n pi Int_0^{pi/n} Pi^2 sin^2
    <= (2 pi^2/n^2) L^2 (1 - sinc(2pi/n)) <= 4 pi^4/(3 n^4) L^2.
    :raises NotInSn: wenn das Profil nicht in S_n liegt.
    """
    skeleton = extract_skeleton(profile, n)
    report = geometry_report(profile)
    projection = projection_Pi(profile, n)
    ops = SpectralOps(profile.grid)
    curve = reconstruct_curve(profile)
    p = support_function(curve, curve.centroid_of_samples())
    p_prime = ops.derivative(p)

    length = skeleton.total_length
    x = 2.0 * np.pi / n
    middle = 2.0 * np.pi ** 2 / n ** 2 * length ** 2 * (1.0 - np.sin(x) / x)
    outer = 4.0 * np.pi ** 4 / (3.0 * n ** 4) * length ** 2
    wirtinger = 2.0 * np.pi * ops.integrate(p_prime ** 2)
    sector = 4.0 * n * np.pi * simpson(projection.pi ** 2 * np.sin(projection.theta) ** 2, x=projection.theta)
    fourier = SupportFourier.from_profile(profile, n).fourier_deficit()
    bonnesen = np.pi ** 2 * (report.r_out - report.r_int) ** 2

    theta_nodes, pi_nodes, _ = projection.at_grid_nodes()
    end = theta_nodes.size
    support_identity = float(np.max(np.abs(p_prime[:end] - pi_nodes * np.sin(theta_nodes))))

    tol = numeric_tolerance(report.rho_max, report.sigma) + 1e-7 * max(1.0, wirtinger)
    holds = (bonnesen <= report.deficit + tol and report.deficit <= wirtinger + tol
             and sector <= middle + tol and middle <= outer + tol and report.deficit <= middle + tol)
    if not holds:
        logger.warning(f"Isoperimetrische Kette verletzt für n={n}: Defizit {report.deficit:.6g}, Mitte {middle:.6g}")
    return ChainReport(n=n, total_length=length, y0=skeleton.y0, bonnesen_lhs=bonnesen, deficit=report.deficit,
                       fourier_deficit=fourier, wirtinger_member=wirtinger, sector_member=sector,
                       middle_bound=middle, outer_bound=outer,
                       fourier_identity_residual=abs(fourier - report.deficit),
                       support_identity_residual=support_identity, tolerance=tol, chain_holds=bool(holds))
