"""
Real spherical harmonics on the unit 2-sphere and quadrature-based transforms.

Conventions
-----------
* Surface measure of total mass 4*pi; harmonics are orthonormal for it, so
  the addition formula reads ``sum_j Y_nj(x) Y_nj(y) = (2n+1)/(4 pi) P_n(x.y)``.
* Degree ``n`` carries ``2n+1`` real harmonics indexed by the order
  ``j = 1..2n+1``: ``j = 1`` is the zonal harmonic, ``j = 2k`` the cosine and
  ``j = 2k+1`` the sine harmonic of azimuthal wavenumber ``k``.
* Flat storage index of ``(n, j)`` is ``n**2 + j - 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, GridError

__all__ = [
    "SpherePoint",
    "HarmonicIndex",
    "SphereGrid",
    "GriddedField",
    "HarmonicCoefficients",
    "n_coefficients",
    "flat_index",
    "harmonic_indices",
    "coefficient_degrees",
    "legendre",
    "normalized_assoc_legendre",
    "real_harmonics",
    "eval_harmonic",
    "zonal_kernel",
    "build_grid",
    "build_equiangular_grid",
    "analyze",
    "synthesize",
    "analyze_values",
    "synthesize_values",
]

_DOMAIN_TOL = 1e-12
_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SpherePoint:
    """A point on the unit sphere given by colatitude and longitude (radians)."""

    colatitude: float
    longitude: float

    def __post_init__(self):
        colat = float(self.colatitude)
        if not (-_DOMAIN_TOL <= colat <= np.pi + _DOMAIN_TOL):
            raise DomainError(f"colatitude {colat!r} outside [0, pi]")
        object.__setattr__(self, "colatitude", min(max(colat, 0.0), np.pi))
        object.__setattr__(self, "longitude", float(self.longitude) % _TWO_PI)

    def cartesian(self) -> np.ndarray:
        s = np.sin(self.colatitude)
        return np.array([s * np.cos(self.longitude), s * np.sin(self.longitude),
                         np.cos(self.colatitude)])


@dataclass(frozen=True)
class HarmonicIndex:
    """Degree ``n >= 0`` and order ``1 <= j <= 2n+1`` of a real harmonic."""

    degree: int
    order: int

    def __post_init__(self):
        if self.degree < 0:
            raise DomainError(f"negative degree {self.degree}")
        if not 1 <= self.order <= 2 * self.degree + 1:
            raise DomainError(
                f"order {self.order} outside 1..{2 * self.degree + 1} for degree {self.degree}")

    @property
    def flat(self) -> int:
        return self.degree * self.degree + self.order - 1

    @property
    def wavenumber(self) -> int:
        """Azimuthal wavenumber ``m`` (0 for the zonal harmonic)."""
        return self.order // 2

    @property
    def is_sine(self) -> bool:
        return self.order > 1 and self.order % 2 == 1


def n_coefficients(N_max: int) -> int:
    return (N_max + 1) ** 2


def flat_index(n: int, j: int) -> int:
    return HarmonicIndex(n, j).flat


def harmonic_indices(N_max: int) -> list[HarmonicIndex]:
    return [HarmonicIndex(n, j) for n in range(N_max + 1) for j in range(1, 2 * n + 2)]


def coefficient_degrees(N_max: int) -> np.ndarray:
    """Degree of every flat coefficient slot, e.g. ``[0, 1, 1, 1, 2, ...]``."""
    return np.repeat(np.arange(N_max + 1), 2 * np.arange(N_max + 1) + 1)


def _check_unit_interval(x, what="x"):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + _DOMAIN_TOL):
        raise DomainError(f"{what} outside [-1, 1]: max |{what}| = {np.max(np.abs(x))!r}")
    return np.clip(x, -1.0, 1.0)


def legendre(n: int, x):
    """Legendre polynomial ``P_n(x)`` by the three-term recurrence.

    Accepts a scalar or array ``x``; raises `DomainError` if ``|x| > 1``
    beyond a round-off allowance of 1e-12.
    """
    if n < 0:
        raise DomainError(f"negative degree {n}")
    scalar = np.ndim(x) == 0
    x = _check_unit_interval(x)
    p_prev = np.ones_like(x)
    if n == 0:
        out = p_prev
    else:
        p = x.copy()
        for k in range(2, n + 1):
            p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
        out = p
    return float(out) if scalar else out


def normalized_assoc_legendre(N_max: int, x) -> np.ndarray:
    """Fully normalized associated Legendre functions.

    Returns ``lam`` of shape ``(N_max+1, N_max+1) + x.shape`` where
    ``lam[n, m] = sqrt((2n+1)/(4 pi) (n-m)!/(n+m)!) P_n^m(x)`` for ``m <= n``
    (no Condon-Shortley phase) and zero above the diagonal.  The sectoral seed
    is built per order and then raised in degree, which stays finite well past
    ``n = 100``.
    """
    x = _check_unit_interval(x)
    s = np.sqrt(np.maximum(0.0, 1.0 - x * x))
    lam = np.zeros((N_max + 1, N_max + 1) + x.shape)
    seed = np.full(x.shape, 1.0 / np.sqrt(4.0 * np.pi))
    for m in range(N_max + 1):
        if m > 0:
            seed = np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * seed
        lam[m, m] = seed
        if m + 1 <= N_max:
            lam[m + 1, m] = np.sqrt(2.0 * m + 3.0) * x * seed
        for n in range(m + 2, N_max + 1):
            a = np.sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
            b = np.sqrt(((n - 1.0) ** 2 - m * m) / (4.0 * (n - 1.0) ** 2 - 1.0))
            lam[n, m] = a * (x * lam[n - 1, m] - b * lam[n - 2, m])
    return lam


def real_harmonics(N_max: int, colatitude, longitude) -> np.ndarray:
    """All real orthonormal harmonics up to ``N_max`` at the given points.

    Returns an array of shape ``((N_max+1)**2, npoints)`` in flat order.
    """
    colatitude = np.atleast_1d(np.asarray(colatitude, dtype=float))
    longitude = np.atleast_1d(np.asarray(longitude, dtype=float))
    lam = normalized_assoc_legendre(N_max, np.cos(colatitude))
    out = np.empty((n_coefficients(N_max), colatitude.size))
    root2 = np.sqrt(2.0)
    trig = {m: (np.cos(m * longitude), np.sin(m * longitude)) for m in range(1, N_max + 1)}
    for n in range(N_max + 1):
        base = n * n
        out[base] = lam[n, 0]
        for m in range(1, n + 1):
            c, s = trig[m]
            out[base + 2 * m - 1] = root2 * lam[n, m] * c
            out[base + 2 * m] = root2 * lam[n, m] * s
    return out


def eval_harmonic(idx: HarmonicIndex, p: SpherePoint) -> float:
    """Value of the real orthonormal harmonic ``idx`` at the point ``p``."""
    values = real_harmonics(idx.degree, [p.colatitude], [p.longitude])
    return float(values[idx.flat, 0])


def zonal_kernel(n: int, cos_angle):
    """Addition-formula kernel ``(2n+1)/(4 pi) P_n(cos_angle)``."""
    return (2 * n + 1) / (4.0 * np.pi) * legendre(n, cos_angle)


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Quadrature nodes and weights on the unit sphere.

    Node order is polar-major: all longitudes of the first colatitude ring,
    then the next ring, etc.
    """

    colatitude: np.ndarray
    longitude: np.ndarray
    weights: np.ndarray
    max_exact_degree: int
    n_polar: int
    n_azimuth: int
    kind: str = "gauss"
    _basis_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def nodes(self) -> list[SpherePoint]:
        return [SpherePoint(c, l) for c, l in zip(self.colatitude, self.longitude)]

    @property
    def latitude(self) -> np.ndarray:
        return 0.5 * np.pi - self.colatitude

    def basis(self, N_max: int) -> np.ndarray:
        """Harmonic values at the nodes, ``((N_max+1)**2, size)``; cached."""
        cached = self._basis_cache.get(N_max)
        if cached is None:
            cached = real_harmonics(N_max, self.colatitude, self.longitude)
            cached.setflags(write=False)
            self._basis_cache[N_max] = cached
        return cached

    def same_as(self, other: "SphereGrid") -> bool:
        return self is other or (
            self.size == other.size
            and np.array_equal(self.colatitude, other.colatitude)
            and np.array_equal(self.longitude, other.longitude)
            and np.array_equal(self.weights, other.weights))


def _product_grid(colat, polar_weights, n_azimuth, max_exact, kind):
    lon = _TWO_PI * np.arange(n_azimuth) / n_azimuth
    colat_nodes = np.repeat(colat, n_azimuth)
    lon_nodes = np.tile(lon, colat.size)
    weights = np.repeat(polar_weights, n_azimuth) * (_TWO_PI / n_azimuth)
    for a in (colat_nodes, lon_nodes, weights):
        a.setflags(write=False)
    return SphereGrid(colat_nodes, lon_nodes, weights, max_exact, colat.size, n_azimuth, kind)


def build_grid(n_polar: int, n_azimuth: int) -> SphereGrid:
    """Gauss-Legendre nodes in cos(colatitude) crossed with uniform longitudes.

    Products ``Y_nj * Y_ml`` are integrated exactly for degrees up to
    ``min(n_polar - 1, (n_azimuth - 1) // 2)``.
    """
    if int(n_polar) < 2 or int(n_azimuth) < 2:
        raise GridError(f"grid needs n_polar >= 2 and n_azimuth >= 2, got ({n_polar}, {n_azimuth})")
    x, w = np.polynomial.legendre.leggauss(int(n_polar))
    order = np.argsort(-x)  # north pole first
    colat = np.arccos(x[order])
    max_exact = min(n_polar - 1, (n_azimuth - 1) // 2)
    return _product_grid(colat, w[order], int(n_azimuth), max_exact, "gauss")


def build_equiangular_grid(n_polar: int, n_azimuth: int) -> SphereGrid:
    """Equiangular mid-cell colatitudes crossed with uniform longitudes.

    Colatitudes ``(k + 1/2) pi / n_polar`` fill (0, pi) as in the usual
    latitude-longitude mesh.  Polar weights are Fejer's first rule, the
    sin-colatitude cell areas corrected so that polynomials of degree
    ``< n_polar`` in cos(colatitude) integrate exactly.  Exactness for
    harmonic products therefore holds only up to about half the polar
    resolution, lower than a Gauss grid of the same size.
    """
    if int(n_polar) < 2 or int(n_azimuth) < 2:
        raise GridError(f"grid needs n_polar >= 2 and n_azimuth >= 2, got ({n_polar}, {n_azimuth})")
    n = int(n_polar)
    colat = (np.arange(n) + 0.5) * np.pi / n
    j = np.arange(1, n // 2 + 1)
    corr = np.cos(2.0 * np.outer(colat, j)) / (4.0 * j * j - 1.0)
    w = (2.0 / n) * (1.0 - 2.0 * corr.sum(axis=1))
    max_exact = min((n - 1) // 2, (n_azimuth - 1) // 2)
    return _product_grid(colat, w, int(n_azimuth), max_exact, "equiangular")


@dataclass(frozen=True, eq=False)
class GriddedField:
    """Real values of a field at the nodes of a grid."""

    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise GridError(f"field has {values.size} values for a grid of {self.grid.size} nodes")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class HarmonicCoefficients:
    """Coefficients of a field in the real harmonic basis up to degree ``N_max``."""

    N_max: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.shape != (n_coefficients(self.N_max),):
            raise GridError(
                f"expected {n_coefficients(self.N_max)} entries for N_max={self.N_max}, "
                f"got shape {entries.shape}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def zeros(cls, N_max: int) -> "HarmonicCoefficients":
        return cls(N_max, np.zeros(n_coefficients(N_max)))

    @classmethod
    def single(cls, N_max: int, n: int, j: int, value: float = 1.0) -> "HarmonicCoefficients":
        entries = np.zeros(n_coefficients(N_max))
        entries[flat_index(n, j)] = value
        return cls(N_max, entries)

    def __getitem__(self, key) -> float:
        n, j = key
        return float(self.entries[flat_index(n, j)])

    def degree_block(self, n: int) -> np.ndarray:
        return self.entries[n * n:(n + 1) ** 2]


def analyze_values(grid: SphereGrid, values, N_max: int) -> np.ndarray:
    """Quadrature projection of node values onto the harmonics.

    ``values`` has the nodes on its last axis; the result has the flat
    coefficients on its last axis.
    """
    if N_max > grid.max_exact_degree:
        raise GridError(
            f"truncation N_max={N_max} exceeds grid exactness degree {grid.max_exact_degree}")
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != grid.size:
        raise GridError(f"values have {values.shape[-1]} nodes, grid has {grid.size}")
    return (values * grid.weights) @ grid.basis(N_max).T


def synthesize_values(grid: SphereGrid, entries, N_max: int) -> np.ndarray:
    """Evaluate harmonic expansions (flat coefficients on the last axis) at the nodes."""
    entries = np.asarray(entries, dtype=float)
    return entries @ grid.basis(N_max)


def analyze(field_: GriddedField, N_max: int) -> HarmonicCoefficients:
    """Harmonic coefficients of a gridded field up to degree ``N_max``."""
    return HarmonicCoefficients(N_max, analyze_values(field_.grid, field_.values, N_max))


def synthesize(coeffs: HarmonicCoefficients, grid: SphereGrid) -> GriddedField:
    """Evaluate a truncated harmonic expansion at the nodes of ``grid``."""
    return GriddedField(grid, synthesize_values(grid, coeffs.entries, coeffs.N_max))


def points_to_arrays(points: Sequence[SpherePoint]):
    colat = np.array([p.colatitude for p in points])
    lon = np.array([p.longitude for p in points])
    return colat, lon
