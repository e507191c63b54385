"""
Synthetic data for simulation studies of the spherical functional regression.

Covariates are fractional Brownian motion paths, errors are isotropic
long-range-dependent spherical functional time series simulated degree by
degree through circulant embedding of their Toeplitz covariances.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import DomainError, EmbeddingError, LRDSphereError
from .functional_ts import CoefficientSeries
from .lrd_spectral import CandidateSet, ContrastWeight, LRDSpectralModel, invert_to_autocov
from .regression import LinkOperator, fit, predict
from .sphere_basis import SphereGrid, build_grid, flat_index, n_coefficients

__all__ = [
    "FbmSpec",
    "SimStudyConfig",
    "StudyResult",
    "fbm",
    "fgn_autocov",
    "circulant_sample",
    "simulate_lrd_error",
    "regime_alpha",
    "snapshot_times",
    "make_covariates",
    "simulate_study",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FbmSpec:
    hurst: float
    T: int
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise DomainError(f"Hurst parameter must lie in (0, 1), got {self.hurst}")
        if self.T < 1:
            raise DomainError(f"path length must be positive, got {self.T}")


def fgn_autocov(hurst: float, n_lags: int) -> np.ndarray:
    """Autocovariance of unit-spaced fractional Gaussian noise."""
    k = np.arange(n_lags, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * ((k + 1.0) ** h2 - 2.0 * k ** h2 + np.abs(k - 1.0) ** h2)


def circulant_sample(row: np.ndarray, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """Draw ``size`` stationary Gaussian series with autocovariance ``row``.

    Embeds the Toeplitz matrix of ``row[:n]`` in a circulant of order
    ``2n`` (Davies-Harte, using ``row[n]`` when available).  Falls back to a
    dense Cholesky factor when the embedding has negative eigenvalues.
    Returns an array of shape ``(size, n)``.
    """
    row = np.asarray(row, dtype=float)
    n = row.size - 1 if row.size > 1 else 1
    if row.size == 1:
        return rng.standard_normal((size, 1)) * np.sqrt(row[0])
    c = np.concatenate([row[:n + 1], row[n - 1:0:-1]])
    lam = np.fft.fft(c).real
    m = c.size
    if lam.min() >= -1e-10 * lam.max():
        lam = np.clip(lam, 0.0, None)
        z = rng.standard_normal((size, m)) + 1j * rng.standard_normal((size, m))
        return np.fft.fft(np.sqrt(lam / m) * z, axis=1).real[:, :n]
    logger.debug("circulant embedding not PSD (min eigenvalue %.3g); using Cholesky", lam.min())
    try:
        chol = scipy.linalg.cholesky(scipy.linalg.toeplitz(row[:n]), lower=True)
    except np.linalg.LinAlgError as exc:
        raise EmbeddingError("neither circulant embedding nor Cholesky factorization succeeded") from exc
    return rng.standard_normal((size, n)) @ chol.T


def fbm(spec: FbmSpec, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Fractional Brownian motion ``B_0, ..., B_{T-1}`` on the unit-spaced grid, ``B_0 = 0``."""
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    if spec.T == 1:
        return np.zeros(1)
    increments = circulant_sample(fgn_autocov(spec.hurst, spec.T), rng)[0, :spec.T - 1]
    return np.concatenate([[0.0], np.cumsum(increments)])


def simulate_lrd_error(model: LRDSpectralModel, T: int, grid: Optional[SphereGrid] = None,
                       rng: Optional[np.random.Generator] = None, seed=None,
                       autocov: Optional[Sequence[np.ndarray]] = None):
    """Isotropic LRD spherical functional error series.

    Every coefficient ``V_nj`` is an independent stationary Gaussian series
    with spectral density ``f_n``.  ``autocov`` may supply precomputed
    autocovariance rows (at least ``T + 1`` lags per degree).  Returns the
    coefficient series and, if ``grid`` is given, the ``(T, nodes)`` stack.
    """
    if T < 2:
        raise DomainError(f"need T >= 2, got {T}")
    rng = rng if rng is not None else np.random.default_rng(seed)
    N = model.N_max
    values = np.empty((n_coefficients(N), T))
    for n in range(N + 1):
        row = autocov[n][:T + 1] if autocov is not None else invert_to_autocov(model, n, T + 1)
        values[n * n:(n + 1) ** 2] = circulant_sample(row, rng, size=2 * n + 1)[:, :T]
    series = CoefficientSeries(N, values)
    return series, (series.to_fields(grid) if grid is not None else None)


def regime_alpha(regime: str, N_max: int, low: float = 0.1, high: float = 0.4) -> np.ndarray:
    """LRD exponents increasing or decreasing linearly over the degrees."""
    alpha = np.linspace(low, high, N_max + 1)
    if regime == "increasing":
        return alpha
    if regime == "decreasing":
        return alpha[::-1].copy()
    raise DomainError(f"unknown LRD regime {regime!r}")


def snapshot_times(T: int) -> np.ndarray:
    """1-based reporting times: 9, 19, ..., 99 when ``T >= 99``, else deciles."""
    if T >= 99:
        return np.arange(9, 100, 10)
    return np.unique(np.clip(np.round(np.linspace(0.1, 1.0, 10) * T).astype(int), 1, T))


def make_covariates(T: int, hurst: Sequence[float], rng: np.random.Generator) -> np.ndarray:
    """Columns of independent fBm paths, each centred and scaled to unit sample variance."""
    cols = []
    for h in hurst:
        path = fbm(FbmSpec(h, T), rng)
        path = path - path.mean()
        sd = path.std()
        cols.append(path / sd if sd > 0 else path)
    return np.column_stack(cols)


@dataclass(frozen=True)
class SimStudyConfig:
    """Settings of a Monte Carlo regression study.

    ``hurst=None`` gives column ``k`` (1-based) of the design the Hurst
    parameter ``0.5 / k``.  ``beta_harmonics`` lists the ``(n, j)`` harmonic
    carrying a unit coefficient for each regression parameter function.
    ``target`` selects what predictions are compared with: ``"mean"`` the
    noise-free regression surface ``H(X beta)``, ``"response"`` the
    observed response.
    """

    T: int = 110
    R: int = 100
    N_max: int = 7
    lrd_regime: str = "increasing"
    link: str = "exponential"
    p: int = 2
    seed: int = 0
    variant: str = "oracle"
    hurst: Optional[tuple] = None
    beta_harmonics: tuple = ((1, 1), (1, 2))
    error_scale: float = 1.0
    innovation_c: float = 1.0
    innovation_rho: float = 0.7
    n_polar: int = 18
    n_azimuth: int = 37
    n_candidates: int = 100
    candidate_seed: int = 12345
    target: str = "mean"
    threads: int = 1

    def __post_init__(self):
        if self.R < 1 or self.T < 2:
            raise DomainError(f"need R >= 1 and T >= 2, got R={self.R}, T={self.T}")
        if len(self.beta_harmonics) != self.p:
            raise DomainError(f"{self.p} parameter functions but {len(self.beta_harmonics)} harmonics")
        if self.hurst is not None and len(self.hurst) != self.p:
            raise DomainError("one Hurst parameter per covariate is required")
        if self.variant not in ("oracle", "plugin"):
            raise DomainError(f"unknown variant {self.variant!r}")
        if self.target not in ("mean", "response"):
            raise DomainError(f"unknown MAE target {self.target!r}")

    def hurst_values(self) -> tuple:
        return tuple(self.hurst) if self.hurst is not None else tuple(0.5 / k for k in range(1, self.p + 1))

    def error_model(self) -> LRDSpectralModel:
        return LRDSpectralModel.geometric(regime_alpha(self.lrd_regime, self.N_max),
                                          self.innovation_c, self.innovation_rho)

    def beta_coefficients(self) -> np.ndarray:
        beta = np.zeros((self.p, n_coefficients(self.N_max)))
        for h, (n, j) in enumerate(self.beta_harmonics):
            beta[h, flat_index(n, j)] = 1.0
        return beta


@dataclass(frozen=True, eq=False)
class StudyResult:
    """R-averaged absolute errors at the snapshot times, ``mae[k, node]``."""

    config: SimStudyConfig
    grid: SphereGrid
    times: np.ndarray
    mae: np.ndarray
    selected: tuple = field(default=())

    @property
    def grid_mean_mae(self) -> float:
        """Quadrature mean over the sphere, averaged over snapshots."""
        return float(np.mean(self.mae @ self.grid.weights) / (4.0 * np.pi))


def _one_repetition(cfg, rep, seed_seq, grid, model, autocov, beta, candidates, link, times):
    rng = np.random.default_rng(seed_seq)
    X = make_covariates(cfg.T, cfg.hurst_values(), rng)
    error, _ = simulate_lrd_error(model, cfg.T, rng=rng, autocov=autocov)
    basis = grid.basis(cfg.N_max)
    signal = (X @ beta) @ basis
    noisy = signal + cfg.error_scale * (error.values.T @ basis)
    response = link.apply(noisy)
    if cfg.variant == "oracle":
        result = fit(response, grid, X, link, cfg.N_max, model=model)
    else:
        result = fit(response, grid, X, link, cfg.N_max, candidates=candidates, base_model=model)
    rows = times - 1
    pred = predict(result, X[rows], link, grid)
    truth = link.apply(signal[rows]) if cfg.target == "mean" else response[rows]
    return np.abs(pred - truth), result.theta_index


def simulate_study(cfg: SimStudyConfig) -> StudyResult:
    """Run ``cfg.R`` independent repetitions and average the absolute errors.

    Repetition ``r`` draws from its own stream spawned from ``cfg.seed``, so
    results do not depend on ``cfg.threads``.
    """
    grid = build_grid(cfg.n_polar, cfg.n_azimuth)
    model = cfg.error_model()
    autocov = [invert_to_autocov(model, n, cfg.T + 1) for n in range(cfg.N_max + 1)]
    beta = cfg.beta_coefficients()
    link = LinkOperator(cfg.link)
    candidates = None
    if cfg.variant == "plugin":
        drawn = CandidateSet.uniform(cfg.n_candidates - 1, cfg.N_max, cfg.candidate_seed)
        candidates = CandidateSet(np.vstack([model.alpha, drawn.candidates]))
    times = snapshot_times(cfg.T)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.R)

    def run(rep):
        try:
            return _one_repetition(cfg, rep, seeds[rep], grid, model, autocov, beta,
                                   candidates, link, times)
        except LRDSphereError as exc:
            raise type(exc)(f"repetition {rep}: {exc}") from exc

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            outputs = list(pool.map(run, range(cfg.R)))
    else:
        outputs = [run(rep) for rep in range(cfg.R)]
    total = np.zeros((times.size, grid.size))
    for err, _ in outputs:
        total += err
    return StudyResult(cfg, grid, times, total / cfg.R, tuple(sel for _, sel in outputs))
