# curve_geometry.py
"""
Darstellung strikt konvexer Kurven über die Krümmung rho(theta) als Funktion
des Tangentenwinkels, Rekonstruktion der Koordinaten und alle statischen
geometrischen Funktionale.

Orientierung: Tangente T = (cos, sin), äußere Normale nu = (sin, -cos).
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.integrate import trapezoid
from scipy.optimize import minimize

from .errors import CenterOutside, NotClosed, NotConvex, NotSymmetric, PositivityLost
from .models import GeometryReport
from .spectral import AngleGrid, SpectralOps


logger = logging.getLogger(__name__)

CLOSURE_TOL = 1e-8
NUMERIC_TOL_BASE = 1e-9
# Chebyshev-Zentrum: grobes Gitter + Verfeinerungen
CENTER_SEARCH_POINTS = 32
CENTER_SEARCH_LEVELS = 2


@dataclass(frozen=True)
class CurvatureProfile:
    """
    Abgetastete Krümmung rho > 0 auf einem AngleGrid.
    """
    grid: AngleGrid
    rho: np.ndarray
    symmetry_order: int = 0
    base_point: tuple = (0.0, 0.0)

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if rho.shape != (self.grid.n_samples,):
            raise ValueError(f"rho hat Form {rho.shape}, erwartet ({self.grid.n_samples},)")
        if not np.all(np.isfinite(rho)) or np.any(rho <= 0):
            raise PositivityLost(f"rho muss überall positiv und endlich sein (min = {np.nanmin(rho):.3e})")
        if self.symmetry_order < 0:
            raise ValueError("symmetry_order muss >= 0 sein")
        if self.symmetry_order >= 1 and self.grid.n_samples % (2 * self.symmetry_order):
            raise ValueError(f"2n = {2 * self.symmetry_order} teilt n_samples = {self.grid.n_samples} nicht")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "base_point", (float(self.base_point[0]), float(self.base_point[1])))

    @property
    def radius_of_curvature(self):
        return 1.0 / self.rho

    def with_rho(self, rho, base_point=None):
        return replace(self, rho=rho, base_point=self.base_point if base_point is None else base_point)


@dataclass(frozen=True)
class PlanarCurve:
    """
    Rekonstruierte Punkte C(theta_k) mit Tangenten und äußeren Normalen.
    """
    grid: AngleGrid
    points: np.ndarray
    closure_gap: float = 0.0
    tangents: np.ndarray = field(init=False, repr=False)
    normals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "tangents", np.column_stack((self.grid.cos, self.grid.sin)))
        object.__setattr__(self, "normals", np.column_stack((self.grid.sin, -self.grid.cos)))

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def y(self):
        return self.points[:, 1]

    def centroid_of_samples(self):
        return self.points.mean(axis=0)


def ops_for(profile, method="spectral"):
    return SpectralOps(profile.grid, method)


def closure_residuals(profile, ops=None):
    """Integrale von cos/rho und sin/rho über [0, 2pi)."""
    ops = ops or ops_for(profile)
    r = profile.radius_of_curvature
    return ops.integrate(r * profile.grid.cos), ops.integrate(r * profile.grid.sin)


def closure_residual(profile, ops=None):
    return float(np.hypot(*closure_residuals(profile, ops)))


def project_closure(profile):
    """
    Entfernt die ersten Fourier-Harmonischen von 1/rho.
    :raises PositivityLost: wenn 1/rho dabei nicht positiv bleibt.
    """
    grid = profile.grid
    r = profile.radius_of_curvature
    n = grid.n_samples
    a1 = 2.0 / n * float(np.dot(r, grid.cos))
    b1 = 2.0 / n * float(np.dot(r, grid.sin))
    projected = r - a1 * grid.cos - b1 * grid.sin
    if np.any(projected <= 0):
        raise PositivityLost(f"Schließungsprojektion macht 1/rho nicht-positiv (a1={a1:.3e}, b1={b1:.3e})")
    return profile.with_rho(1.0 / projected)


def reconstruct_curve(profile, method="spectral"):
    """
    C(theta) = base_point + Integral von (cos, sin)/rho.
    :raises NotClosed: wenn die Lücke C(2pi) - C(0) zu groß ist.
    """
    ops = ops_for(profile, method)
    grid = profile.grid
    r = profile.radius_of_curvature
    sigma = ops.integrate(r)
    gap = closure_residual(profile, ops)
    if gap > 10.0 * CLOSURE_TOL * max(1.0, sigma):
        raise NotClosed(f"Schließungslücke {gap:.3e} überschreitet {10.0 * CLOSURE_TOL * max(1.0, sigma):.3e}")
    x = ops.antiderivative(r * grid.cos)
    y = ops.antiderivative(r * grid.sin)
    points = np.column_stack((x + profile.base_point[0], y + profile.base_point[1]))
    return PlanarCurve(grid=grid, points=points, closure_gap=gap)


def enclosed_area_spectral(profile):
    """
    lambda = pi * sum_{k != +-1} |c_k|^2 / (1 - k^2) mit c_k den Koeffizienten von 1/rho.
    Braucht keine Rekonstruktion und ist translationsinvariant.
    """
    return area_from_radius(profile.radius_of_curvature)


def area_from_radius(radius):
    n = radius.size
    coeffs = np.fft.rfft(radius) / n
    k = np.arange(n // 2 + 1, dtype=float)
    weights = np.full(k.shape, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    weights[1] = 0.0
    denom = 1.0 - k ** 2
    denom[1] = 1.0
    return float(np.pi * np.sum(weights * np.abs(coeffs) ** 2 / denom))


def support_function(curve, center=(0.0, 0.0)):
    """p_c(theta) = <C(theta) - c, nu(theta)>"""
    shifted = curve.points - np.asarray(center, dtype=float)
    return np.einsum("ij,ij->i", shifted, curve.normals)


def pseudo_median(profile):
    """
    rho* = Maximum über alle Gitterfenster der theta-Länge pi des Fenster-Minimums.
    """
    rho = profile.rho
    n = profile.grid.n_samples
    window = n // 2 + 1
    extended = np.concatenate((rho, rho[: window - 1]))
    return float(sliding_window_view(extended, window).min(axis=1)[:n].max())


def numeric_tolerance(rho_max, sigma):
    return NUMERIC_TOL_BASE * max(1.0, rho_max) ** 2 * max(1.0, sigma) ** 2


def _grid_search(score, lower, upper, points=CENTER_SEARCH_POINTS, levels=CENTER_SEARCH_LEVELS):
    """
    Minimiert score(xs, ys) über ein Rechteck, danach zwei Verfeinerungen um das beste Zentrum.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    best, best_value = None, np.inf
    for _ in range(levels + 1):
        xs = np.linspace(lower[0], upper[0], points)
        ys = np.linspace(lower[1], upper[1], points)
        gx, gy = np.meshgrid(xs, ys)
        values = score(gx.ravel(), gy.ravel())
        idx = int(np.argmin(values))
        if values[idx] < best_value:
            best_value = float(values[idx])
            best = np.array((gx.ravel()[idx], gy.ravel()[idx]))
        cell = (upper - lower) / (points - 1)
        lower, upper = best - 2.0 * cell, best + 2.0 * cell
    # lokale Politur (Nelder-Mead) vom besten Gitterpunkt aus
    polished = minimize(lambda c: float(score(c[:1], c[1:])[0]), best, method="Nelder-Mead",
                        options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 400})
    if polished.fun < best_value:
        best, best_value = np.asarray(polished.x), float(polished.fun)
    return best, best_value


def inner_outer_radii(profile, curve=None):
    """
    (r_int, r_out, Zentrum innen, Zentrum außen).
    Symmetrische Profile nutzen den Schwerpunkt der Abtastpunkte, sonst Gittersuche.
    """
    curve = curve or reconstruct_curve(profile)
    if profile.symmetry_order >= 2:
        center = curve.centroid_of_samples()
        p = support_function(curve, center)
        r_out = float(np.max(np.linalg.norm(curve.points - center, axis=1)))
        return float(p.min()), r_out, center, center

    p0 = support_function(curve)
    sin, cos = profile.grid.sin, profile.grid.cos
    points = curve.points

    def negative_inradius(cx, cy):
        return -np.min(p0[None, :] - cx[:, None] * sin[None, :] + cy[:, None] * cos[None, :], axis=1)

    def circumradius(cx, cy):
        dx = points[None, :, 0] - cx[:, None]
        dy = points[None, :, 1] - cy[:, None]
        return np.sqrt(np.max(dx * dx + dy * dy, axis=1))

    lower, upper = points.min(axis=0), points.max(axis=0)
    inner_center, neg_r_int = _grid_search(negative_inradius, lower, upper)
    outer_center, r_out = _grid_search(circumradius, lower, upper)
    return -neg_r_int, r_out, inner_center, outer_center


def geometry_report(profile, curve=None, method="spectral"):
    """
    Alle skalaren Funktionale eines gültigen Profils.
    """
    ops = ops_for(profile, method)
    grid = profile.grid
    rho = profile.rho
    r = profile.radius_of_curvature
    curve = curve or reconstruct_curve(profile, method)

    sigma = ops.integrate(r)
    # 1/2 Integral (x dy - y dx) mit dC = T/rho dtheta
    lam = 0.5 * ops.integrate((curve.x * grid.sin - curve.y * grid.cos) * r)
    h = sigma / lam
    entropy = ops.integrate(np.log(rho))
    deficit = sigma ** 2 - 4.0 * np.pi * lam
    int_rho = ops.integrate(rho)
    r_int, r_out, _, _ = inner_outer_radii(profile, curve)
    tol = numeric_tolerance(float(rho.max()), sigma)

    return GeometryReport(
        sigma=sigma,
        lambda_=lam,
        h=h,
        entropy=entropy,
        deficit=deficit,
        psi=float(np.log(sigma / lam ** 2)),
        rho_min=float(rho.min()),
        rho_max=float(rho.max()),
        pseudo_median=pseudo_median(profile),
        r_int=r_int,
        r_out=r_out,
        int_rho=int_rho,
        gage_slack=int_rho - np.pi * sigma / lam,
        green_osher_slack=entropy - np.pi * np.log(np.pi / lam),
        bonnesen_ok=bool(np.pi ** 2 * (r_out - r_int) ** 2 <= deficit + tol),
        closure_residual=closure_residual(profile, ops),
    )


def inequality_slacks(report):
    """
    Schlupf aller statischen Ungleichungen (>= 0 heißt erfüllt) und die passende Toleranz.
    """
    tol = numeric_tolerance(report.rho_max, report.sigma)
    slacks = {
        "gage": report.gage_slack,
        "isoperimetric": report.deficit,
        "bonnesen": report.deficit - np.pi ** 2 * (report.r_out - report.r_int) ** 2,
        "green_osher": report.green_osher_slack,
        "h_lower": report.h - 2.0 * report.rho_min,
        "h_upper": 2.0 * report.rho_max - report.h,
        "pseudo_median": report.h - report.pseudo_median,
    }
    return {name: float(value) for name, value in slacks.items()}, tol


def from_support(p, grid, symmetry_order=0, method="spectral"):
    """
    Profil aus einer abgetasteten Stützfunktion: 1/rho = p + p''.
    :raises NotConvex: wenn min(p + p'') <= 0.
    """
    ops = SpectralOps(grid, method)
    p = np.asarray(p, dtype=float)
    radius = p + ops.second_derivative(p)
    if radius.min() <= 0:
        raise NotConvex(f"p + p'' muss positiv sein (min = {radius.min():.3e})")
    base = (float(ops.derivative(p)[0]), float(-p[0]))
    return CurvatureProfile(grid=grid, rho=1.0 / radius, symmetry_order=symmetry_order, base_point=base)


def resample_profile(profile, grid):
    """
    Trigonometrische Neuabtastung von 1/rho auf ein anderes Gitter (Auffüllen bzw.
    Abschneiden der rfft-Koeffizienten), danach Schließungsprojektion.
    :raises NotSymmetric: wenn 2n die neue Gitterzahl nicht teilt.
    :raises PositivityLost: wenn 1/rho nach dem Abschneiden nicht mehr positiv ist.
    """
    n, m = profile.grid.n_samples, grid.n_samples
    if m == n:
        return profile
    order = profile.symmetry_order
    if order >= 1 and m % (2 * order):
        raise NotSymmetric(f"2n = {2 * order} teilt n_samples = {m} nicht")
    coeffs = np.fft.rfft(profile.radius_of_curvature)
    kept = min(n, m) // 2 + 1
    resampled = np.zeros(m // 2 + 1, dtype=complex)
    resampled[:kept] = coeffs[:kept]
    if m > n:
        resampled[n // 2] *= 0.5
    else:
        resampled[m // 2] = 0.0
    radius = np.fft.irfft(resampled, n=m) * (m / n)
    if radius.min() <= 0:
        raise PositivityLost(f"1/rho nach Neuabtastung nicht positiv (min = {radius.min():.3e})")
    logger.debug(f"Profil von N={n} auf N={m} neu abgetastet")
    return project_closure(CurvatureProfile(grid=grid, rho=1.0 / radius, symmetry_order=order,
                                            base_point=profile.base_point))


def hausdorff_to_disk(curve, center, radius):
    """
    Hausdorff-Abstand zwischen konvexer Kurve und Kreisscheibe = sup |p_c - radius|.
    :raises CenterOutside: wenn das Zentrum nicht im Inneren liegt.
    """
    p = support_function(curve, center)
    if p.min() <= 0:
        raise CenterOutside(f"Zentrum {tuple(center)} liegt nicht im Inneren (min p = {p.min():.3e})")
    return float(np.max(np.abs(p - radius)))


def circle_convergence(profile, t, curve=None):
    """
    Normierter Hausdorff-Abstand zum Einheitskreis, skaliert mit sqrt(lambda/pi)
    und (für t > 0) mit sqrt(6t).
    """
    curve = curve or reconstruct_curve(profile)
    _, _, center, _ = inner_outer_radii(profile, curve)
    lam = enclosed_area_spectral(profile)
    scale = np.sqrt(lam / np.pi)
    result = {"area_scaled": hausdorff_to_disk(curve, center, scale) / scale, "time_scaled": None}
    if t > 0:
        scale_t = np.sqrt(6.0 * t)
        result["time_scaled"] = hausdorff_to_disk(curve, center, scale_t) / scale_t
    return result


def polygon_curvature(curve):
    """
    Diskrete Krümmung des Polygons: Drehwinkel / mittlere Kantenlänge an jedem Knoten.
    """
    edges = np.roll(curve.points, -1, axis=0) - curve.points
    lengths = np.linalg.norm(edges, axis=1)
    previous = np.roll(edges, 1, axis=0)
    cross = previous[:, 0] * edges[:, 1] - previous[:, 1] * edges[:, 0]
    dot = np.einsum("ij,ij->i", previous, edges)
    turning = np.arctan2(cross, dot)
    return turning / (0.5 * (lengths + np.roll(lengths, 1)))


def wirtinger_terms(f, length):
    """
    (Integral f^2, (L/pi)^2 Integral f'^2) für f auf [0, L] mit f(0) = f(L) = 0.
    """
    f = np.asarray(f, dtype=float)
    x = np.linspace(0.0, length, f.size)
    fp = np.gradient(f, x, edge_order=2)
    return float(trapezoid(f * f, x)), float((length / np.pi) ** 2 * trapezoid(fp * fp, x))


def circle_profile(radius=1.0, grid=None, symmetry_order=0):
    grid = grid or AngleGrid()
    if radius <= 0:
        raise NotConvex(f"Radius muss positiv sein, nicht {radius}")
    rho = np.full(grid.n_samples, 1.0 / radius)
    return CurvatureProfile(grid=grid, rho=rho, symmetry_order=symmetry_order, base_point=(0.0, -radius))


def ellipse_profile(a=2.0, b=1.0, grid=None):
    """Ellipse x^2/a^2 + y^2/b^2 = 1 über ihre Stützfunktion."""
    grid = grid or AngleGrid()
    if a <= 0 or b <= 0:
        raise NotConvex(f"Halbachsen müssen positiv sein (a={a}, b={b})")
    p = np.sqrt(a ** 2 * grid.sin ** 2 + b ** 2 * grid.cos ** 2)
    return from_support(p, grid, symmetry_order=2)


def random_convex_profile(rng, grid=None, modes=6, amplitude=0.3, min_radius=0.05):
    """
    Zufällige Stützfunktion 1 + sum_{k=2..modes} (a_k cos + b_k sin)/k^2 plus Verschiebung;
    die Störung wird halbiert, bis p + p'' >= min_radius gilt.
    """
    grid = grid or AngleGrid()
    ops = SpectralOps(grid)
    theta = grid.theta
    perturbation = np.zeros(grid.n_samples)
    for k in range(2, modes + 1):
        a, b = rng.normal(size=2) * amplitude
        perturbation += (a * np.cos(k * theta) + b * np.sin(k * theta)) / k ** 2
    shift = rng.normal(size=2) * amplitude
    translation = shift[0] * grid.sin - shift[1] * grid.cos
    scale = 1.0
    while True:
        p = 1.0 + scale * perturbation
        if np.min(p + ops.second_derivative(p)) >= min_radius:
            break
        scale *= 0.5
    return from_support(p + translation, grid)
