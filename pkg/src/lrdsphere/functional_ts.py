"""
Time-series machinery on harmonic coefficient series.

A functional time series on the sphere is stored through its coefficients
``V[(n, j), t]`` in the real harmonic basis; every estimator here acts on the
diagonal of the corresponding operators in that basis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GridError
from .sphere_basis import SphereGrid, analyze_values, coefficient_degrees, n_coefficients, synthesize_values

__all__ = [
    "CoefficientSeries",
    "CovarianceSequence",
    "SpectralCoefficients",
    "PeriodogramDiag",
    "fourier_frequencies",
    "fdft",
    "periodogram",
    "empirical_autocov",
    "fejer_kernel",
    "expected_periodogram",
]


@dataclass(frozen=True, eq=False)
class CoefficientSeries:
    """Harmonic coefficients ``values[flat(n, j), t]`` for ``t = 1..T`` (column ``t-1``)."""

    N_max: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != n_coefficients(self.N_max):
            raise GridError(
                f"coefficient series must have shape ({n_coefficients(self.N_max)}, T), "
                f"got {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def T(self) -> int:
        return self.values.shape[1]

    def degree_block(self, n: int) -> np.ndarray:
        """The ``(2n+1, T)`` block of degree ``n``."""
        return self.values[n * n:(n + 1) ** 2]

    @classmethod
    def from_fields(cls, grid: SphereGrid, stack, N_max: int) -> "CoefficientSeries":
        """Project a ``(T, nodes)`` stack of maps onto the harmonics."""
        return cls(N_max, analyze_values(grid, stack, N_max).T)

    def to_fields(self, grid: SphereGrid) -> np.ndarray:
        """Synthesize the ``(T, nodes)`` stack of maps."""
        return synthesize_values(grid, self.values.T, self.N_max)


@dataclass(frozen=True, eq=False)
class CovarianceSequence:
    """Per-degree autocovariances ``B[n, tau]`` for lags ``tau = 0..max_lag``."""

    N_max: int
    B: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.B, dtype=float)
        if B.ndim != 2 or B.shape[0] != self.N_max + 1:
            raise GridError(f"B must have shape ({self.N_max + 1}, lags), got {B.shape}")
        object.__setattr__(self, "B", B)


@dataclass(frozen=True, eq=False)
class SpectralCoefficients:
    """Functional DFT values ``values[flat(n, j), k]`` at ``frequencies[k]``."""

    N_max: int
    T: int
    frequencies: np.ndarray
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class PeriodogramDiag:
    """Diagonal of the periodogram operator in the harmonic basis."""

    N_max: int
    T: int
    frequencies: np.ndarray
    values: np.ndarray

    def degree_mean(self) -> np.ndarray:
        """Periodogram averaged over the orders of each degree, ``(N_max+1, nfreq)``."""
        degrees = coefficient_degrees(self.N_max)
        sums = np.zeros((self.N_max + 1, self.values.shape[1]))
        np.add.at(sums, degrees, self.values)
        return sums / (2 * np.arange(self.N_max + 1) + 1)[:, None]


def fourier_frequencies(T: int, full: bool = False) -> np.ndarray:
    """Fourier frequencies ``2 pi k / T``.

    By default ``k = 1..T//2`` (zero excluded, all inside (0, pi]); with
    ``full=True`` every ``k = 0..T-1``.
    """
    k = np.arange(T) if full else np.arange(1, T // 2 + 1)
    return 2.0 * np.pi * k / T


def _check_length(series: CoefficientSeries):
    if series.T < 2:
        raise DomainError(f"need at least 2 time steps, got T={series.T}")


def fdft(series: CoefficientSeries, full: bool = False, method: str = "fft") -> SpectralCoefficients:
    """Functional DFT ``(2 pi T)^(-1/2) sum_{t=1}^T V(t) exp(-i w t)`` coefficient-wise.

    ``method="direct"`` sums the exponentials explicitly; ``"fft"`` uses
    numpy's FFT, which handles any length (prime included).
    """
    _check_length(series)
    T = series.T
    omega = fourier_frequencies(T, full)
    if method == "fft":
        k = np.arange(T) if full else np.arange(1, T // 2 + 1)
        spec = np.fft.fft(series.values, axis=1)[:, k]
        # numpy's sum starts at t=0, ours at t=1
        spec = spec * np.exp(-1j * omega)[None, :]
    elif method == "direct":
        t = np.arange(1, T + 1)
        spec = series.values @ np.exp(-1j * np.outer(t, omega))
    else:
        raise ValueError(f"unknown fdft method {method!r}")
    return SpectralCoefficients(series.N_max, T, omega, spec / np.sqrt(2.0 * np.pi * T))


def periodogram(series: CoefficientSeries, full: bool = False) -> PeriodogramDiag:
    """Squared modulus of the functional DFT at each Fourier frequency."""
    spec = fdft(series, full)
    return PeriodogramDiag(series.N_max, series.T, spec.frequencies, np.abs(spec.values) ** 2)


def empirical_autocov(series: CoefficientSeries, max_lag: int) -> CovarianceSequence:
    """Biased autocovariance per degree, averaged over the orders of the eigenspace.

    ``B[n, tau] = (1 / ((2n+1) T)) sum_j sum_{t=1}^{T-tau} V_nj(t+tau) V_nj(t)``.
    """
    T = series.T
    if not 0 <= max_lag < T:
        raise DomainError(f"max_lag={max_lag} must satisfy 0 <= max_lag < T={T}")
    V = series.values
    nfft = 1 << int(np.ceil(np.log2(2 * T)))
    F = np.fft.rfft(V, n=nfft, axis=1)
    acov = np.fft.irfft(np.abs(F) ** 2, n=nfft, axis=1)[:, :max_lag + 1]
    B = np.zeros((series.N_max + 1, max_lag + 1))
    np.add.at(B, coefficient_degrees(series.N_max), acov)
    B /= (2 * np.arange(series.N_max + 1) + 1)[:, None] * T
    return CovarianceSequence(series.N_max, B)


def fejer_kernel(T: int, omega):
    """Fejer kernel ``(1/T) |sum_{t=1}^T exp(-i t w)|^2``."""
    if T < 1:
        raise DomainError(f"T must be positive, got {T}")
    omega = np.asarray(omega, dtype=float)
    half = np.sin(0.5 * omega)
    small = np.abs(half) < 1e-8
    safe = np.where(small, 1.0, half)
    value = np.sin(0.5 * T * omega) ** 2 / (T * safe ** 2)
    # near multiples of 2 pi the ratio -> T (second-order accurate)
    value = np.where(small, T * (1.0 - (T * T - 1) * (omega - 2 * np.pi * np.round(omega / (2 * np.pi))) ** 2 / 12.0), value)
    return float(value) if value.ndim == 0 else value


def expected_periodogram(B_row, T: int, omega):
    """Mean periodogram of a stationary series with autocovariance ``B_row``.

    ``E p(w) = (1 / (2 pi)) sum_{|u| < T} (1 - |u|/T) B(u) exp(-i w u)``,
    equivalently the Fejer-kernel smoothing of the spectral density divided
    by ``2 pi``.  ``B_row`` must hold lags ``0..T-1``.
    """
    B_row = np.asarray(B_row, dtype=float)[:T]
    if B_row.size < T:
        raise DomainError(f"need {T} autocovariance lags, got {B_row.size}")
    u = np.arange(1, T)
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    taper = (1.0 - u / T) * B_row[1:]
    return (B_row[0] + 2.0 * np.cos(np.outer(omega, u)) @ taper) / (2.0 * np.pi)
