"""Exception hierarchy shared by all lrdsphere modules."""


class LRDSphereError(Exception):
    """Base class for every error raised by this package."""


class DomainError(LRDSphereError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class GridError(LRDSphereError, ValueError):
    """Incompatible grids, or a truncation the grid cannot resolve."""


class CovarianceError(LRDSphereError):
    """A covariance matrix failed its positive-definiteness check."""

    def __init__(self, message, degree=None):
        super().__init__(message)
        self.degree = degree


class RankDeficiencyError(LRDSphereError):
    """A design matrix, or a GLS normal matrix, is numerically singular."""


class EmbeddingError(LRDSphereError):
    """Neither circulant embedding nor dense factorization could simulate a series."""


class ConfigError(LRDSphereError, ValueError):
    """A configuration or model file could not be parsed."""
