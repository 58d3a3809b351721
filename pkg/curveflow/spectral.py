# spectral.py
"""
Ableitungen, Stammfunktionen und Quadratur auf dem periodischen Winkelgitter.

Standard ist die spektrale Variante (FFT); "fd4" nutzt zentrale Differenzen
vierter Ordnung und die Trapezregel zum Gegenprüfen.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np


METHODS = ("spectral", "fd4")


@dataclass(frozen=True)
class AngleGrid:
    """
    Gleichmäßiges periodisches Gitter theta_k = k * 2pi / n_samples auf [0, 2pi).
    """
    n_samples: int = 256

    def __post_init__(self):
        if self.n_samples < 16 or self.n_samples % 2:
            raise ValueError(f"n_samples muss gerade und >= 16 sein, nicht {self.n_samples}")

    @property
    def delta_theta(self):
        return 2.0 * np.pi / self.n_samples

    @cached_property
    def theta(self):
        theta = np.arange(self.n_samples) * self.delta_theta
        theta.setflags(write=False)
        return theta

    @cached_property
    def cos(self):
        values = np.cos(self.theta)
        values.setflags(write=False)
        return values

    @cached_property
    def sin(self):
        values = np.sin(self.theta)
        values.setflags(write=False)
        return values

    def refined(self, factor):
        return AngleGrid(self.n_samples * factor)


class SpectralOps:
    """
    Differential- und Integraloperatoren für ein AngleGrid.
    """

    def __init__(self, grid: AngleGrid, method="spectral"):
        """Konstruktor"""
        if method not in METHODS:
            raise ValueError(f"Unbekannte Methode '{method}', erlaubt: {METHODS}")
        self.grid = grid
        self.method = method
        n = grid.n_samples
        self._k = np.arange(n // 2 + 1, dtype=float)
        # Nyquist-Mode hat keine ungerade Ableitung
        self._ik = 1j * self._k
        self._ik[-1] = 0.0

    @property
    def second_derivative_radius(self):
        """Spektralradius des diskreten d^2/dtheta^2, multipliziert mit delta_theta^2."""
        if self.method == "spectral":
            return np.pi ** 2
        return 16.0 / 3.0

    def derivative(self, f, order=1):
        f = np.asarray(f, dtype=float)
        if self.method == "fd4":
            return self._fd4(f, order)
        coeffs = np.fft.rfft(f)
        if order == 2:
            coeffs *= -self._k ** 2
        else:
            coeffs *= self._ik ** order
        return np.fft.irfft(coeffs, n=self.grid.n_samples)

    def second_derivative(self, f):
        return self.derivative(f, order=2)

    def _fd4(self, f, order):
        h = self.grid.delta_theta
        fp1, fm1 = np.roll(f, -1), np.roll(f, 1)
        fp2, fm2 = np.roll(f, -2), np.roll(f, 2)
        if order == 1:
            return (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h)
        if order == 2:
            return (-fp2 + 16.0 * fp1 - 30.0 * f + 16.0 * fm1 - fm2) / (12.0 * h * h)
        return self._fd4(self._fd4(f, order - 2), 2)

    def integrate(self, f):
        """Periodische Trapezregel über [0, 2pi)."""
        return float(np.sum(f) * self.grid.delta_theta)

    def antiderivative(self, f):
        """
        F(theta_k) = Integral von 0 bis theta_k.
        Der Mittelwert von f wird als linearer Anteil mitgeführt, der Rest spektral integriert.
        """
        f = np.asarray(f, dtype=float)
        theta = self.grid.theta
        if self.method == "fd4":
            h = self.grid.delta_theta
            steps = 0.5 * (f + np.roll(f, -1)) * h
            return np.concatenate(([0.0], np.cumsum(steps[:-1])))
        coeffs = np.fft.rfft(f)
        mean = coeffs[0].real / self.grid.n_samples
        coeffs[0] = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            coeffs[1:] = coeffs[1:] / self._ik[1:]
        # Nyquist-Anteil verschwindet an allen Knoten
        coeffs[-1] = 0.0
        periodic = np.fft.irfft(coeffs, n=self.grid.n_samples)
        return periodic - periodic[0] + mean * theta

    def interpolate(self, f, factor):
        """Trigonometrische Interpolation auf ein factor-mal feineres Gitter."""
        n = self.grid.n_samples
        m = n * factor
        coeffs = np.fft.rfft(np.asarray(f, dtype=float))
        padded = np.zeros(m // 2 + 1, dtype=complex)
        padded[: n // 2 + 1] = coeffs
        padded[n // 2] *= 0.5
        return np.fft.irfft(padded, n=m) * factor

    def cos_sin_coefficients(self, f, k):
        """Fourier-Koeffizienten (a_k, b_k) von f = a_0/2 + sum a_k cos + b_k sin."""
        theta = self.grid.theta
        n = self.grid.n_samples
        a = 2.0 / n * float(np.sum(f * np.cos(k * theta)))
        b = 2.0 / n * float(np.sum(f * np.sin(k * theta)))
        return a, b

    def mean_coefficients(self, f):
        """Komplexe Koeffizienten c_k = mean(f e^{-ik theta}), k = 0..N/2."""
        return np.fft.rfft(np.asarray(f, dtype=float)) / self.grid.n_samples
