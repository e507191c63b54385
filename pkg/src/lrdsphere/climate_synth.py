"""
Physics-driven synthetic solar radiation and pressure maps.

Daily downward radiation means come from the clear-sky irradiance at solar
noon, pressure means from the barometric law with a seasonal latitudinal
modulation; both get additive LRD spherical functional errors scaled to the
standard deviations used for the synthetic climate data set.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError
from .lrd_spectral import LRDSpectralModel
from .simulation import regime_alpha, simulate_lrd_error
from .sphere_basis import SphereGrid, analyze_values

__all__ = [
    "PhysicalConstants",
    "ClimateScenario",
    "ClimateBundle",
    "season_days",
    "declination",
    "zenith_angle",
    "solar_irradiance",
    "barometric_pressure",
    "irradiance_mean_field",
    "pressure_mean_field",
    "unit_lrd_error",
    "generate_datasets",
    "pressure_covariates",
]

OBLIQUITY_DEG = 23.44
WINTER_SOLSTICE_DAY = 355
SEASON_START = {"autumn_winter": 265, "spring_summer": 80}


@dataclass(frozen=True)
class PhysicalConstants:
    earth_radius: float = 6371000.0         # m; kept for reference, unused by the irradiance law
    solar_constant: float = 1361.0          # W/m^2
    clear_sky_index: float = 0.8
    sea_level_pressure: float = 1013.25     # hPa
    molar_mass: float = 0.029               # kg/mol
    gravity: float = 9.81                   # m/s^2
    gas_constant: float = 8.314             # J/(mol K)
    temperature: float = 288.0              # K
    height_range: tuple = (6000.0, 12000.0)  # m

    def __post_init__(self):
        scalars = [self.earth_radius, self.solar_constant, self.clear_sky_index,
                   self.sea_level_pressure, self.molar_mass, self.gravity,
                   self.gas_constant, self.temperature]
        if min(scalars) <= 0 or min(self.height_range) <= 0:
            raise DomainError("physical constants must be strictly positive")
        lo, hi = self.height_range
        if not lo < hi:
            raise DomainError(f"height range must be increasing, got {self.height_range}")

    @property
    def mid_height(self) -> float:
        return 0.5 * sum(self.height_range)


def season_days(season: str, count: int) -> list[int]:
    """``count`` consecutive days of year starting at the season's equinox."""
    if season not in SEASON_START:
        raise DomainError(f"unknown season {season!r}")
    start = SEASON_START[season]
    return [(start - 1 + k) % 365 + 1 for k in range(count)]


def _check_day(day):
    day = np.asarray(day)
    if np.any(day < 1) or np.any(day > 365) or np.any(day != np.round(day)):
        raise DomainError(f"day of year must be an integer in 1..365, got {day}")
    return day.astype(float)


def declination(day):
    """Solar declination (radians): ``-23.44 deg * cos(2 pi (day + 10) / 365)``."""
    d = _check_day(day)
    value = -np.deg2rad(OBLIQUITY_DEG) * np.cos(2.0 * np.pi * (d + 10.0) / 365.0)
    return float(value) if value.ndim == 0 else value


def _cos_zenith(latitude, decl):
    return np.clip(np.sin(latitude) * np.sin(decl) + np.cos(latitude) * np.cos(decl), 0.0, 1.0)


def _check_latitude(latitude):
    latitude = np.asarray(latitude, dtype=float)
    if np.any(np.abs(latitude) > 0.5 * np.pi + 1e-12):
        raise DomainError("latitude must lie in [-pi/2, pi/2]")
    return latitude


def zenith_angle(latitude, day):
    """Solar-noon zenith angle; ``pi/2`` whenever the sun stays below the horizon."""
    value = np.arccos(_cos_zenith(_check_latitude(latitude), declination(day)))
    return float(value) if value.ndim == 0 else value


def solar_irradiance(latitude, day, constants: PhysicalConstants = PhysicalConstants()):
    """Clear-sky irradiance ``G0 * CSI * cos(ZA) / pi`` in W/m^2."""
    latitude = _check_latitude(latitude)
    cos_za = _cos_zenith(latitude, declination(day))
    value = constants.solar_constant * constants.clear_sky_index * cos_za / np.pi
    return float(value) if np.ndim(value) == 0 else value


def barometric_pressure(height, constants: PhysicalConstants = PhysicalConstants()):
    """Barometric law ``P0 exp(-M g h / (R T))`` in hPa."""
    h = np.asarray(height, dtype=float)
    if np.any(h < 0):
        raise DomainError("height must be non-negative")
    c = constants
    value = c.sea_level_pressure * np.exp(-c.molar_mass * c.gravity * h / (c.gas_constant * c.temperature))
    return float(value) if value.ndim == 0 else value


@dataclass(frozen=True, eq=False)
class ClimateScenario:
    """Constants, days and error models of a synthetic climate data set.

    ``days`` are days of year; ``error_model`` drives both the radiation and
    the pressure errors (independent draws).  ``pressure_amplitude`` is the
    latitudinal pressure swing in hPa.
    """

    constants: PhysicalConstants = PhysicalConstants()
    season: str = "autumn_winter"
    days: tuple = field(default_factory=lambda: tuple(season_days("autumn_winter", 171)))
    radiation_error_scale: float = 160.2262
    pressure_error_scale: float = 49.6453
    error_model: Optional[LRDSpectralModel] = None
    pressure_amplitude: float = 30.0
    seed: int = 0

    def __post_init__(self):
        if len(self.days) == 0:
            raise DomainError("scenario needs at least one day")
        _check_day(np.asarray(self.days))
        if self.season not in SEASON_START:
            raise DomainError(f"unknown season {self.season!r}")
        if self.error_model is None:
            object.__setattr__(self, "error_model",
                               LRDSpectralModel.geometric(regime_alpha("increasing", 8)))

    @classmethod
    def for_season(cls, season: str = "autumn_winter", n_days: int = 171, **kwargs) -> "ClimateScenario":
        return cls(season=season, days=tuple(season_days(season, n_days)), **kwargs)

    def with_zero_error(self) -> "ClimateScenario":
        return replace(self, radiation_error_scale=0.0, pressure_error_scale=0.0)

    def as_dict(self) -> dict:
        c = self.constants
        return {
            "season": self.season,
            "days": ",".join(str(d) for d in self.days),
            "earth_radius": c.earth_radius,
            "solar_constant": c.solar_constant,
            "clear_sky_index": c.clear_sky_index,
            "sea_level_pressure": c.sea_level_pressure,
            "molar_mass": c.molar_mass,
            "gravity": c.gravity,
            "gas_constant": c.gas_constant,
            "temperature": c.temperature,
            "height_min": c.height_range[0],
            "height_max": c.height_range[1],
            "radiation_error_scale": self.radiation_error_scale,
            "pressure_error_scale": self.pressure_error_scale,
            "pressure_amplitude": self.pressure_amplitude,
            "error_alpha": ",".join(repr(float(a)) for a in self.error_model.alpha),
            "error_innovation_var": ",".join(repr(float(v)) for v in self.error_model.innovation_var),
            "seed": self.seed,
        }


def irradiance_mean_field(scenario: ClimateScenario, grid: SphereGrid) -> np.ndarray:
    """Clear-sky irradiance at every node and day, ``(days, nodes)``."""
    days = np.asarray(scenario.days)
    decl = declination(days)[:, None]
    cos_za = _cos_zenith(grid.latitude[None, :], decl)
    c = scenario.constants
    return c.solar_constant * c.clear_sky_index * cos_za / np.pi


def pressure_mean_field(scenario: ClimateScenario, grid: SphereGrid) -> np.ndarray:
    """Mean pressure (hPa) at every node and day, ``(days, nodes)``.

    ``pp(h_mid) + A cos(2 lat) cos(2 pi (day - 355) / 365)``: high pressure in
    the tropics and low pressure at medium and high latitudes around the
    December solstice, reversed around the June solstice.
    """
    days = np.asarray(scenario.days, dtype=float)
    base = barometric_pressure(scenario.constants.mid_height, scenario.constants)
    seasonal = np.cos(2.0 * np.pi * (days - WINTER_SOLSTICE_DAY) / 365.0)
    return base + scenario.pressure_amplitude * np.outer(seasonal, np.cos(2.0 * grid.latitude))


def unit_lrd_error(model: LRDSpectralModel, T: int, grid: SphereGrid,
                   rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """LRD error stack rescaled to unit sample standard deviation over all nodes and days.

    Returns the ``(T, nodes)`` stack and the divisor that was applied.
    """
    _, stack = simulate_lrd_error(model, T, grid, rng=rng)
    scale = float(stack.std())
    return stack / scale, scale


@dataclass(frozen=True, eq=False)
class ClimateBundle:
    """Generated radiation (response) and pressure (regressor) stacks."""

    scenario: ClimateScenario
    grid: SphereGrid
    radiation: np.ndarray
    pressure: np.ndarray
    radiation_mean: np.ndarray
    pressure_mean: np.ndarray
    error_divisors: tuple = (1.0, 1.0)

    @property
    def T(self) -> int:
        return self.radiation.shape[0]

    def radiation_error_model(self) -> LRDSpectralModel:
        """Spectral model of the radiation error actually injected."""
        factor = (self.scenario.radiation_error_scale / self.error_divisors[0]) ** 2
        return self.scenario.error_model.scaled(factor) if factor > 0 else self.scenario.error_model


def generate_datasets(scenario: ClimateScenario, grid: SphereGrid) -> ClimateBundle:
    """Radiation and pressure stacks: deterministic means plus scaled LRD errors."""
    T = len(scenario.days)
    rng = np.random.default_rng(scenario.seed)
    rad_mean = irradiance_mean_field(scenario, grid)
    pres_mean = pressure_mean_field(scenario, grid)
    rad_err, rad_div = unit_lrd_error(scenario.error_model, T, grid, rng)
    pres_err, pres_div = unit_lrd_error(scenario.error_model, T, grid, rng)
    radiation = rad_mean + scenario.radiation_error_scale * rad_err
    pressure = pres_mean + scenario.pressure_error_scale * pres_err
    return ClimateBundle(scenario, grid, radiation, pressure, rad_mean, pres_mean, (rad_div, pres_div))


def pressure_covariates(pressure: np.ndarray, grid: SphereGrid, p: int = 2,
                        slots: Optional[Sequence[int]] = None) -> np.ndarray:
    """Design matrix from harmonic coefficients of the daily pressure maps.

    Column ``h`` is the time series of flat coefficient ``slots[h]``
    (default the first ``p`` slots).
    """
    slots = list(range(p)) if slots is None else list(slots)
    N = 0
    while (N + 1) ** 2 <= max(slots):
        N += 1
    coeffs = analyze_values(grid, pressure, N)
    return coeffs[:, slots]
