"""
Spherical functional regression with long-range-dependent errors.

Submodules: `sphere_basis` (real spherical harmonics, quadrature grids),
`functional_ts` (fDFT, periodogram, autocovariances), `lrd_spectral`
(LRD spectral model, minimum contrast estimation, Toeplitz covariances),
`regression` (GLS in the harmonic eigenspaces), `simulation` (Monte Carlo
studies), `climate_synth` (synthetic radiation and pressure data),
`crossval` and `cli`.
"""
from .climate_synth import ClimateScenario, PhysicalConstants, generate_datasets
from .crossval import CVReport, kfold_cv
from .errors import (
    ConfigError,
    CovarianceError,
    DomainError,
    EmbeddingError,
    GridError,
    LRDSphereError,
    RankDeficiencyError,
)
from .functional_ts import CoefficientSeries, fdft, periodogram
from .lrd_spectral import CandidateSet, ContrastWeight, LRDSpectralModel, estimate_theta, invert_to_autocov
from .regression import GLSFit, LinkOperator, fit, predict
from .simulation import SimStudyConfig, simulate_study
from .sphere_basis import SphereGrid, analyze, build_equiangular_grid, build_grid, synthesize

__version__ = "0.1.0"
