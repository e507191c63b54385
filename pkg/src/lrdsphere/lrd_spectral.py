"""
Semiparametric long-range-dependence spectral model for harmonic coefficients.

Each degree ``n`` carries a spectral density

    f_n(w) = B_n(0) * M_n(w) * [4 sin^2(w/2)]^(-alpha_n / 2),

with ``alpha_n`` in [0, 1/2).  This module evaluates these densities,
selects ``alpha`` from a finite candidate set by minimum contrast against
the periodogram, and turns a density back into autocovariances and Toeplitz
covariance matrices.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg
from scipy.special import gammaln

from .errors import CovarianceError, DomainError
from .functional_ts import CoefficientSeries, PeriodogramDiag, periodogram

__all__ = [
    "FrequencyGrid",
    "LRDSpectralModel",
    "CandidateSet",
    "ContrastWeight",
    "ToeplitzCovariance",
    "spectral_density",
    "normalizer",
    "contrast_eigenvalues",
    "contrast",
    "estimate_theta",
    "fd_autocov",
    "invert_to_autocov",
    "autocov_to_density",
    "build_toeplitz",
    "estimation_calls",
]

DEFAULT_SRD = 1.0 / (2.0 * np.pi)
INVERSION_POINTS = 4096
DENSE_SOLVE_MAX_T = 256
EXTENDED_MATVEC_MAX_T = 4096


class _Counter:
    def __init__(self):
        self._lock = threading.Lock()
        self.value = 0

    def increment(self):
        with self._lock:
            self.value += 1


_ESTIMATIONS = _Counter()


def estimation_calls() -> int:
    """Number of `estimate_theta` invocations in this process."""
    return _ESTIMATIONS.value


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Positive frequencies in (0, pi] with weights for sums over [-pi, pi] minus {0}.

    ``weights`` already include the step and the multiplicity of ``+w`` and
    ``-w``, so ``sum(weights * g(omega))`` is the Riemann sum of an even
    integrand ``g`` over the symmetric grid.
    """

    omega: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.omega.size == 0 or not np.all(self.weights > 0):
            raise DomainError("frequency grid must be nonempty with positive weights")
        if np.any(self.omega <= 0) or np.any(self.omega > np.pi + 1e-12):
            raise DomainError("frequencies must lie in (0, pi]")

    @classmethod
    def fourier(cls, T: int) -> "FrequencyGrid":
        """Fourier frequencies ``2 pi k / T``, ``k = 1..T//2``; ``w = pi`` counted once."""
        if T < 2:
            raise DomainError(f"need T >= 2 for a Fourier grid, got {T}")
        k = np.arange(1, T // 2 + 1)
        omega = 2.0 * np.pi * k / T
        weights = np.full(k.size, 2.0 * (2.0 * np.pi / T))
        if T % 2 == 0:
            weights[-1] /= 2.0
        return cls(omega, weights)

    @classmethod
    def midpoint(cls, m: int = INVERSION_POINTS) -> "FrequencyGrid":
        """Midpoints of ``m`` equal cells of (0, pi), mirrored onto (-pi, 0)."""
        if m < 1:
            raise DomainError(f"midpoint grid needs m >= 1, got {m}")
        step = np.pi / m
        omega = (np.arange(m) + 0.5) * step
        return cls(omega, np.full(m, 2.0 * step))

    def integrate(self, values) -> np.ndarray:
        return np.asarray(values) @ self.weights


SrdFactor = Union[np.ndarray, Callable[[int, np.ndarray], np.ndarray]]


@dataclass(frozen=True, eq=False)
class LRDSpectralModel:
    """Per-degree innovation variance, SRD factor and LRD exponent.

    ``srd_factor`` is either one positive constant per degree or a callable
    ``(n, omega) -> values``; ``None`` means the constant ``1/(2 pi)``.
    """

    innovation_var: np.ndarray
    alpha: np.ndarray
    srd_factor: Optional[SrdFactor] = None

    def __post_init__(self):
        innovation_var = np.asarray(self.innovation_var, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        if innovation_var.ndim != 1 or innovation_var.shape != alpha.shape:
            raise DomainError("innovation_var and alpha must be vectors over degrees 0..N_max")
        if np.any(innovation_var <= 0):
            raise DomainError("innovation variances must be positive")
        if np.any(alpha < 0) or np.any(alpha >= 0.5):
            raise DomainError(f"LRD exponents must lie in [0, 1/2), got {alpha}")
        srd = self.srd_factor
        if srd is None:
            srd = np.full(alpha.size, DEFAULT_SRD)
        if not callable(srd):
            srd = np.asarray(srd, dtype=float)
            if srd.shape != alpha.shape or np.any(srd <= 0):
                raise DomainError("constant SRD factors must be positive, one per degree")
        object.__setattr__(self, "innovation_var", innovation_var)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "srd_factor", srd)

    @property
    def N_max(self) -> int:
        return self.alpha.size - 1

    @classmethod
    def geometric(cls, alpha, c: float = 1.0, rho: float = 0.7, srd_factor=None) -> "LRDSpectralModel":
        """Model with innovation variances ``c * rho**n``."""
        alpha = np.asarray(alpha, dtype=float)
        return cls(c * rho ** np.arange(alpha.size), alpha, srd_factor)

    @property
    def srd_is_constant(self) -> bool:
        return not callable(self.srd_factor)

    def srd(self, n: int, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        if callable(self.srd_factor):
            return np.broadcast_to(np.asarray(self.srd_factor(n, omega), dtype=float), omega.shape)
        return np.full(omega.shape, self.srd_factor[n])

    def with_alpha(self, alpha) -> "LRDSpectralModel":
        return LRDSpectralModel(self.innovation_var, alpha, self.srd_factor)

    def scaled(self, factor: float) -> "LRDSpectralModel":
        return LRDSpectralModel(self.innovation_var * factor, self.alpha, self.srd_factor)

    def trace_diagnostic(self, grid: Optional[FrequencyGrid] = None) -> float:
        """``sum_n (2n+1) int f_n``, finite at any truncation."""
        return float(sum((2 * n + 1) * invert_to_autocov(self, n, 1, grid)[0]
                         for n in range(self.N_max + 1)))


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Finite set of LRD exponent vectors, ``candidates[k, n]``."""

    candidates: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.candidates, dtype=float))
        if c.shape[0] == 0:
            raise DomainError("candidate set is empty")
        if np.any(c < 0) or np.any(c >= 0.5):
            raise DomainError("candidate exponents must lie in [0, 1/2)")
        object.__setattr__(self, "candidates", c)

    def __len__(self) -> int:
        return self.candidates.shape[0]

    @property
    def N_max(self) -> int:
        return self.candidates.shape[1] - 1

    @classmethod
    def uniform(cls, size: int, N_max: int, seed=None, low: float = 0.05,
                high: float = 0.45) -> "CandidateSet":
        """``size`` vectors with independent uniform entries in ``[low, high]``."""
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(low, high, size=(size, N_max + 1)))


@dataclass(frozen=True, eq=False)
class ContrastWeight:
    """Weighting ``w_tilde(n) |w|^gamma`` of the contrast integrand."""

    gamma: float = 1.0
    w_tilde: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if self.w_tilde is not None:
            w = np.asarray(self.w_tilde, dtype=float)
            if np.any(w <= 0):
                raise DomainError("w_tilde must be positive")
            object.__setattr__(self, "w_tilde", w)

    def degree_weight(self, n: int) -> float:
        return 1.0 if self.w_tilde is None else float(self.w_tilde[n])

    def degree_weights(self, N_max: int) -> np.ndarray:
        return np.ones(N_max + 1) if self.w_tilde is None else self.w_tilde[:N_max + 1]


def _lrd_factor(omega, alpha):
    return (4.0 * np.sin(0.5 * omega) ** 2) ** (-0.5 * np.asarray(alpha)[..., None])


def spectral_density(model: LRDSpectralModel, n: int, omega):
    """``f_n(w)`` of the model; ``w = 0`` is rejected."""
    omega_arr = np.asarray(omega, dtype=float)
    if np.any(omega_arr == 0):
        raise DomainError("spectral density is not evaluated at w = 0")
    if np.any(np.abs(omega_arr) > np.pi + 1e-12):
        raise DomainError("frequencies must lie in [-pi, pi]")
    values = (model.innovation_var[n] * model.srd(n, omega_arr)
              * (4.0 * np.sin(0.5 * omega_arr) ** 2) ** (-0.5 * model.alpha[n]))
    return float(values) if values.ndim == 0 else values


def normalizer(model: LRDSpectralModel, n: int, weight: ContrastWeight,
               freq_grid: FrequencyGrid) -> float:
    """``w_tilde(n) * sum_grid f_n(w) |w|^gamma dw`` over the symmetric grid."""
    f = spectral_density(model, n, freq_grid.omega)
    return weight.degree_weight(n) * float(freq_grid.integrate(f * freq_grid.omega ** weight.gamma))


def _density_table(model: LRDSpectralModel, alphas: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Densities for many alpha vectors at once: ``(K, N_max+1, nfreq)``."""
    base = np.stack([model.innovation_var[n] * model.srd(n, omega) for n in range(model.N_max + 1)])
    return base[None, :, :] * _lrd_factor(omega, alphas)


def _contrast_table(pbar, alphas, model, weight, freq_grid):
    N = model.N_max
    f = _density_table(model, alphas, freq_grid.omega)
    kernel = freq_grid.weights * freq_grid.omega ** weight.gamma      # |w|^gamma dw
    wt = weight.degree_weights(N)[None, :, None]
    norm = wt[..., 0] * (f @ kernel)                                    # (K, N+1)
    if np.any(f <= 0) or np.any(norm <= 0):
        raise DomainError("spectral density and normalizer must be positive")
    log_ups = np.log(f) - np.log(norm)[..., None]
    return -((pbar[None] * log_ups * wt) @ kernel)


def _reduce(c: np.ndarray, norm: str, N_max: int) -> np.ndarray:
    if norm == "sup":
        return np.max(np.abs(c), axis=-1)
    if norm == "trace":
        return np.abs(c) @ (2.0 * np.arange(N_max + 1) + 1.0)
    raise ValueError(f"unknown contrast norm {norm!r}")


def contrast_eigenvalues(p: PeriodogramDiag, model: LRDSpectralModel, weight: ContrastWeight,
                         freq_grid: Optional[FrequencyGrid] = None) -> np.ndarray:
    """Diagonal eigenvalues ``c_n(theta)`` of the contrast operator."""
    if p.N_max != model.N_max:
        raise DomainError(f"periodogram N_max={p.N_max} differs from model N_max={model.N_max}")
    freq_grid = freq_grid or FrequencyGrid.fourier(p.T)
    if not np.allclose(freq_grid.omega, p.frequencies):
        raise DomainError("periodogram and frequency grid disagree")
    return _contrast_table(p.degree_mean(), model.alpha[None, :], model, weight, freq_grid)[0]


def contrast(p: PeriodogramDiag, model: LRDSpectralModel, weight: ContrastWeight,
             freq_grid: Optional[FrequencyGrid] = None, norm: str = "trace") -> float:
    """Norm of the diagonal contrast operator.

    ``norm="trace"`` sums ``(2n+1) |c_n|`` (nuclear norm); ``norm="sup"``
    takes ``max_n |c_n|`` (bounded-operator norm).
    """
    c = contrast_eigenvalues(p, model, weight, freq_grid)
    return float(_reduce(c, norm, model.N_max))


def estimate_theta(series: CoefficientSeries, candidates: CandidateSet,
                   weight: Optional[ContrastWeight] = None,
                   base_model: Optional[LRDSpectralModel] = None,
                   norm: str = "trace", return_contrasts: bool = False):
    """Minimum-contrast choice of the LRD exponents among ``candidates``.

    ``base_model`` fixes the innovation variances and SRD factors (defaults:
    unit variances, constant ``1/(2 pi)``).  Returns ``(index, alpha)``,
    the first minimizer on ties, plus the contrast values if requested.
    """
    _ESTIMATIONS.increment()
    N = series.N_max
    if candidates.N_max != N:
        raise DomainError(f"candidates cover {candidates.N_max + 1} degrees, series {N + 1}")
    weight = weight or ContrastWeight()
    if base_model is None:
        base_model = LRDSpectralModel(np.ones(N + 1), np.zeros(N + 1))
    p = periodogram(series)
    grid = FrequencyGrid.fourier(series.T)
    c = _contrast_table(p.degree_mean(), candidates.candidates, base_model, weight, grid)
    values = _reduce(c, norm, N)
    index = int(np.argmin(values))
    result = (index, candidates.candidates[index].copy())
    return result + (values,) if return_contrasts else result


def fd_autocov(d: float, n_lags: int) -> np.ndarray:
    """Autocovariances of fractionally integrated noise with unit innovation variance.

    Spectral density ``(1/(2 pi)) |2 sin(w/2)|^(-2d)``; lags ``0..n_lags-1``.
    """
    if n_lags < 1:
        return np.zeros(0)
    gamma0 = np.exp(gammaln(1.0 - 2.0 * d) - 2.0 * gammaln(1.0 - d))
    k = np.arange(1, n_lags)
    ratios = (k - 1.0 + d) / (k - d)
    return gamma0 * np.concatenate([[1.0], np.cumprod(ratios)])


def _cosine_sum(omega, weighted, n_lags, chunk=256):
    out = np.empty(n_lags)
    for start in range(0, n_lags, chunk):
        t = np.arange(start, min(start + chunk, n_lags))
        out[start:start + t.size] = np.cos(np.outer(t, omega)) @ weighted
    return out


def invert_to_autocov(model: LRDSpectralModel, n: int, n_lags: int,
                      freq_grid: Optional[FrequencyGrid] = None,
                      method: str = "hybrid") -> np.ndarray:
    """Autocovariances ``B_n(t) = int cos(w t) f_n(w) dw``, ``t = 0..n_lags-1``.

    ``method="riemann"`` is the plain midpoint sum over ``freq_grid``
    (default: 4096 cells on (0, pi)).  ``"hybrid"`` integrates the
    ``|2 sin(w/2)|^(-alpha)`` cusp, weighted by the SRD factor at the
    origin, in closed form and applies the Riemann sum only to the smooth
    remainder; it is exact for constant SRD factors.
    """
    grid = freq_grid or FrequencyGrid.midpoint()
    omega = grid.omega
    if method == "riemann":
        return _cosine_sum(omega, spectral_density(model, n, omega) * grid.weights, n_lags)
    if method != "hybrid":
        raise ValueError(f"unknown inversion method {method!r}")
    alpha = float(model.alpha[n])
    if model.srd_is_constant:
        m0 = float(model.srd_factor[n])
        remainder = None
    else:
        m_values = model.srd(n, omega)
        m0 = float(m_values[0])
        remainder = (m_values - m0) * (4.0 * np.sin(0.5 * omega) ** 2) ** (-0.5 * alpha)
    out = 2.0 * np.pi * m0 * fd_autocov(0.5 * alpha, n_lags)
    if remainder is not None:
        out = out + _cosine_sum(omega, remainder * grid.weights, n_lags)
    return model.innovation_var[n] * out


def autocov_to_density(row, omega) -> np.ndarray:
    """Truncated Fourier series ``(1/(2 pi)) sum_{|t| < L} B(t) exp(-i w t)``."""
    row = np.asarray(row, dtype=float)
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    t = np.arange(1, row.size)
    out = np.empty(omega.size)
    for start in range(0, omega.size, 64):
        w = omega[start:start + 64]
        out[start:start + w.size] = np.cos(np.outer(w, t)) @ row[1:]
    return (row[0] + 2.0 * out) / (2.0 * np.pi)


def _durbin_is_pd(row: np.ndarray) -> bool:
    """Levinson-Durbin check that the Toeplitz matrix of ``row`` is positive definite."""
    r0 = row[0]
    if not r0 > 0:
        return False
    v = r0
    phi = np.zeros(0)
    tol = 1e-14 * r0
    for k in range(1, row.size):
        kappa = (row[k] - phi @ row[k - 1:0:-1]) / v
        phi = np.concatenate([phi - kappa * phi[::-1], [kappa]])
        v *= 1.0 - kappa * kappa
        if not v > tol:
            return False
    return True


@dataclass(frozen=True, eq=False)
class ToeplitzCovariance:
    """Symmetric positive-definite Toeplitz matrix ``Lambda[s, t] = B(|s - t|)``."""

    first_row: np.ndarray
    degree: Optional[int] = None
    _chol: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        row = np.asarray(self.first_row, dtype=float)
        object.__setattr__(self, "first_row", row)
        label = "" if self.degree is None else f" for degree {self.degree}"
        if row.size <= DENSE_SOLVE_MAX_T:
            try:
                chol = scipy.linalg.cho_factor(scipy.linalg.toeplitz(row), lower=True)
            except np.linalg.LinAlgError:
                raise CovarianceError(f"Toeplitz covariance{label} is not positive definite",
                                      self.degree) from None
            object.__setattr__(self, "_chol", chol)
        elif not _durbin_is_pd(row):
            raise CovarianceError(f"Toeplitz covariance{label} is not positive definite", self.degree)

    @property
    def T(self) -> int:
        return self.first_row.size

    def matrix(self) -> np.ndarray:
        return scipy.linalg.toeplitz(self.first_row)

    def solve(self, b, method: str = "auto") -> np.ndarray:
        """``Lambda^{-1} b`` by Cholesky (``"dense"``) or Levinson recursion (``"levinson"``)."""
        if method == "auto":
            method = "dense" if self.T <= DENSE_SOLVE_MAX_T else "levinson"
        if method == "dense":
            chol = self._chol
            if chol is None:
                chol = scipy.linalg.cho_factor(self.matrix(), lower=True)
            return scipy.linalg.cho_solve(chol, b)
        if method == "levinson":
            return scipy.linalg.solve_toeplitz(self.first_row, b)
        raise ValueError(f"unknown solve method {method!r}")

    def matvec(self, b, extended: bool = False) -> np.ndarray:
        """``Lambda @ b``; ``extended=True`` accumulates in ``np.longdouble``."""
        if extended and self.T <= EXTENDED_MATVEC_MAX_T:
            return self.matrix().astype(np.longdouble) @ np.asarray(b, dtype=np.longdouble)
        return scipy.linalg.matmul_toeplitz(self.first_row, np.asarray(b, dtype=float))

    def submatrix(self, index) -> np.ndarray:
        """Dense covariance of the series restricted to the time positions ``index``."""
        index = np.asarray(index)
        return self.first_row[np.abs(index[:, None] - index[None, :])]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix())


def build_toeplitz(row, T: int, degree: Optional[int] = None) -> ToeplitzCovariance:
    """Toeplitz covariance of size ``T`` from the first ``T`` autocovariances in ``row``."""
    row = np.asarray(row, dtype=float)
    if row.size < T:
        raise DomainError(f"need {T} autocovariance lags, got {row.size}")
    return ToeplitzCovariance(row[:T].copy(), degree)
