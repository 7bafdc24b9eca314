"""Fourier analysis on the circle under the normalized measure dtheta/(2 pi).

Functions live on the uniform grid theta_m = 2 pi m / M.  With the measure
normalized so the circle has mass one, the basis u_k(theta) = exp(i k theta)
is orthonormal, coefficients are a_k = (1/2 pi) int f conj(u_k) dtheta, and
the rectangle rule on the periodic grid (equivalently, one FFT over M) is the
quadrature used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridFunction",
    "FourierTable",
    "AliasingError",
    "uniform_grid",
    "grid_size_for",
    "from_samples",
    "from_callable",
    "fourier_coefficients",
    "power_spectrum",
    "reconstruct",
    "spectrum_to_grid",
    "l2_norm",
    "l2_distance",
]

DEFAULT_GRID = 4096


class AliasingError(ValueError):
    """Grid too small for the requested frequency content."""


def uniform_grid(M: int) -> np.ndarray:
    """Grid points theta_m = 2 pi m / M, m = 0 .. M-1."""
    return 2.0 * np.pi * np.arange(M) / M


def grid_size_for(k_max: int, minimum: int = DEFAULT_GRID) -> int:
    """Power-of-two grid size, at least 4*k_max (oversampling factor 2)."""
    M = minimum
    while M < 4 * k_max:
        M *= 2
    return M


@dataclass(frozen=True)
class GridFunction:
    """Complex samples on the uniform grid of size M."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("GridFunction needs a 1-d array of at least 2 samples")
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return self.values.size

    def theta(self) -> np.ndarray:
        return uniform_grid(self.M)


def from_samples(values) -> GridFunction:
    return GridFunction(np.asarray(values))


def from_callable(fn, M: int = DEFAULT_GRID) -> GridFunction:
    return GridFunction(np.asarray(fn(uniform_grid(M))))


@dataclass(frozen=True)
class FourierTable:
    """Coefficients a_k for |k| <= k_max, stored at index k + k_max."""

    k_max: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.size != 2 * self.k_max + 1:
            raise ValueError("coefficient array must have length 2*k_max + 1")
        object.__setattr__(self, "coeffs", c)

    def ks(self) -> np.ndarray:
        return np.arange(-self.k_max, self.k_max + 1)

    def a(self, k: int) -> complex:
        if abs(k) > self.k_max:
            return 0.0 + 0.0j
        return complex(self.coeffs[k + self.k_max])

    def gamma(self, k: int) -> float:
        """Power spectrum entry gamma_k = |a_k|^2."""
        return abs(self.a(k)) ** 2

    def total_power(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def spectral_tail(self, K: int) -> float:
        """sum_{|k| > K} gamma_k within the table's range."""
        mask = np.abs(self.ks()) > K
        return float(np.sum(np.abs(self.coeffs[mask]) ** 2))


def fourier_coefficients(f: GridFunction, k_max: int) -> FourierTable:
    """Quadrature coefficients a_k = (1/M) sum_m f(theta_m) e^{-ik theta_m}.

    Requires M >= 2*k_max + 2 so that no admissible frequency aliases.
    """
    M = f.M
    if M < 2 * k_max + 2:
        raise AliasingError(f"grid of size {M} cannot resolve k_max={k_max}; need M >= {2 * k_max + 2}")
    spec = np.fft.fft(f.values) / M
    ks = np.arange(-k_max, k_max + 1)
    return FourierTable(k_max, spec[np.mod(ks, M)])


def power_spectrum(table: FourierTable) -> dict[int, float]:
    """Map k -> gamma_k = |a_k|^2."""
    return {int(k): float(abs(c) ** 2) for k, c in zip(table.ks(), table.coeffs)}


def spectrum_to_grid(coeffs: np.ndarray, k_max: int, M: int) -> GridFunction:
    """Evaluate sum_k c_k e^{ik theta} on the size-M grid (zero-padded FFT)."""
    if M < 2 * k_max + 2:
        raise AliasingError(f"grid of size {M} cannot hold k_max={k_max}")
    full = np.zeros(M, dtype=complex)
    ks = np.arange(-k_max, k_max + 1)
    full[np.mod(ks, M)] = coeffs
    return GridFunction(np.fft.ifft(full) * M)


def reconstruct(table: FourierTable, M: int) -> GridFunction:
    """Truncated inversion f(theta) = sum_{|k| <= k_max} a_k e^{ik theta}."""
    return spectrum_to_grid(table.coeffs, table.k_max, M)


def l2_norm(f: GridFunction) -> float:
    """Norm under the unit-mass measure: sqrt((1/M) sum |f|^2)."""
    return float(np.sqrt(np.mean(np.abs(f.values) ** 2)))


def l2_distance(f: GridFunction, g: GridFunction) -> float:
    if f.M != g.M:
        raise ValueError(f"grid mismatch: {f.M} vs {g.M}")
    return float(np.sqrt(np.mean(np.abs(f.values - g.values) ** 2)))
