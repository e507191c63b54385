"""
Command-line driver for the simulation studies, climate data generation,
fitting, prediction and cross-validation.

Every command reads a ``[section]`` key-value config file (see README) and
writes CSV artifacts plus a ``manifest.txt`` into the output directory.
"""
from __future__ import annotations

import argparse
import configparser
import datetime
import hashlib
import logging
import os
import platform
import sys
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from . import io
from .climate_synth import (
    ClimateBundle,
    ClimateScenario,
    PhysicalConstants,
    generate_datasets,
    pressure_covariates,
)
from .crossval import CVReport, kfold_cv
from .errors import ConfigError, DomainError, LRDSphereError
from .lrd_spectral import CandidateSet, LRDSpectralModel, estimation_calls
from .regression import fit, predict
from .simulation import SimStudyConfig, StudyResult, regime_alpha, simulate_study
from .sphere_basis import GriddedField, SphereGrid, build_equiangular_grid, build_grid

__all__ = ["RunConfig", "run", "main", "CVReport", "kfold_cv"]

logger = logging.getLogger(__name__)

COMMANDS = ("simulate", "climate-gen", "fit", "predict", "crossval")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


@dataclass(frozen=True)
class RunConfig:
    command: str
    config_path: Optional[Path]
    output_dir: Path
    seed: Optional[int] = None
    threads: int = 1
    variant: Optional[str] = None
    k: Optional[int] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.threads < 1:
            raise ConfigError(f"threads must be positive, got {self.threads}")
        if self.variant is not None and self.variant not in ("oracle", "plugin", "both"):
            raise ConfigError(f"unknown variant {self.variant!r}")


class _Section:
    """Typed access to one config section, resolving paths against the config directory."""

    def __init__(self, parser: configparser.ConfigParser, name: str, base: Path):
        self.name = name
        self.base = base
        self.items = dict(parser[name]) if parser.has_section(name) else {}

    def _raw(self, key, default):
        if key in self.items:
            return self.items[key]
        if default is _REQUIRED:
            raise ConfigError(f"[{self.name}] missing required key {key!r}")
        return default

    def str(self, key, default=None):
        return self._raw(key, default)

    def int(self, key, default=None):
        return self._convert(key, default, int)

    def float(self, key, default=None):
        return self._convert(key, default, float)

    def _convert(self, key, default, kind):
        value = self._raw(key, default)
        if value is None or not isinstance(value, str):
            return value
        try:
            return kind(value)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key} = {value!r} is not a valid {kind.__name__}") from None

    def list(self, key, kind=str, default=None):
        value = self._raw(key, default)
        if value is None or not isinstance(value, str):
            return value
        try:
            return [kind(v.strip()) for v in value.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"[{self.name}] {key} = {value!r} is not a list of {kind.__name__}") from None

    def path(self, key, default=None):
        value = self._raw(key, default)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base / p


_REQUIRED = object()


def _load_config(path: Optional[Path]) -> tuple[configparser.ConfigParser, bytes]:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    if path is None:
        return parser, b""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        parser.read_string(raw.decode("utf-8"), source=str(path))
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return parser, raw


def _grid_from(section: _Section, n_polar=18, n_azimuth=37, kind="gauss") -> SphereGrid:
    kind = section.str("grid", kind)
    n_polar = section.int("n_polar", n_polar)
    n_azimuth = section.int("n_azimuth", n_azimuth)
    if kind == "gauss":
        return build_grid(n_polar, n_azimuth)
    if kind == "equiangular":
        return build_equiangular_grid(n_polar, n_azimuth)
    raise ConfigError(f"[{section.name}] grid must be gauss or equiangular, got {kind!r}")


def _with_config_errors(factory, *args, **kwargs):
    try:
        return factory(*args, **kwargs)
    except (DomainError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------- simulate

def _simulate(cfg: RunConfig, parser, out: Path) -> dict:
    s = _Section(parser, "simulate", _base(cfg))
    seed = cfg.seed if cfg.seed is not None else s.int("seed", 0)
    variant = cfg.variant or s.str("variant", "oracle")
    sizes = s.list("T", int, [110])
    regimes = s.list("regime", str, ["increasing"])
    variants = ["oracle", "plugin"] if variant == "both" else [variant]
    hurst = s.list("hurst", float, None)
    summary = []
    for var in variants:
        for T in sizes:
            for regime in regimes:
                study = _with_config_errors(
                    SimStudyConfig, T=T, R=s.int("R", 100), N_max=s.int("N_max", 7),
                    lrd_regime=regime, link=s.str("link", "exponential"), p=s.int("p", 2),
                    seed=seed, variant=var, hurst=tuple(hurst) if hurst else None,
                    error_scale=s.float("error_scale", 1.0),
                    innovation_c=s.float("innovation_c", 1.0),
                    innovation_rho=s.float("innovation_rho", 0.7),
                    n_polar=s.int("n_polar", 18), n_azimuth=s.int("n_azimuth", 37),
                    n_candidates=s.int("n_candidates", 100),
                    candidate_seed=s.int("candidate_seed", 12345),
                    target=s.str("target", "mean"), threads=cfg.threads,
                    beta_harmonics=_beta_harmonics(s))
                result = simulate_study(study)
                _write_study(out / f"{var}_T{T}_{regime}", result)
                summary.append((T, study.R, regime, study.link, result.grid_mean_mae, var))
    header = ("T", "R", "regime", "link", "grid_mean_mae")
    if len(variants) > 1:
        io.write_csv(out / "summary.csv", header + ("variant",), summary)
    else:
        io.write_csv(out / "summary.csv", header, [row[:5] for row in summary])
    return {"seed": seed, "variant": variant}


def _beta_harmonics(s: _Section):
    pairs = s.list("beta_harmonics", str, None)
    if pairs is None:
        return ((1, 1), (1, 2))
    try:
        return tuple(tuple(int(x) for x in pair.split(":")) for pair in pairs)
    except ValueError:
        raise ConfigError("[simulate] beta_harmonics must look like '1:1, 1:2'") from None


def _write_study(directory: Path, result: StudyResult) -> None:
    g = result.grid
    for k, t in enumerate(result.times):
        io.write_csv(directory / f"mae_t{int(t):03d}.csv", ("colat_rad", "lon_rad", "mae"),
                     zip(g.colatitude, g.longitude, result.mae[k]))


# ----------------------------------------------------------- climate-gen

def _scenario_from(s: _Section, seed: int) -> ClimateScenario:
    n_error = s.int("error_N_max", 7)
    error_model = _with_config_errors(
        LRDSpectralModel.geometric,
        regime_alpha(s.str("error_regime", "increasing"), n_error,
                     s.float("error_alpha_low", 0.1), s.float("error_alpha_high", 0.4)),
        s.float("innovation_c", 1.0), s.float("innovation_rho", 0.7))
    constants = _with_config_errors(
        PhysicalConstants,
        solar_constant=s.float("solar_constant", 1361.0),
        clear_sky_index=s.float("clear_sky_index", 0.8),
        sea_level_pressure=s.float("sea_level_pressure", 1013.25),
        temperature=s.float("temperature", 288.0),
        height_range=(s.float("height_min", 6000.0), s.float("height_max", 12000.0)))
    return _with_config_errors(
        ClimateScenario.for_season, s.str("season", "autumn_winter"), s.int("n_days", 171),
        constants=constants,
        radiation_error_scale=s.float("radiation_error_scale", 160.2262),
        pressure_error_scale=s.float("pressure_error_scale", 49.6453),
        pressure_amplitude=s.float("pressure_amplitude", 30.0),
        error_model=error_model, seed=seed)


def _climate_gen(cfg: RunConfig, parser, out: Path) -> dict:
    s = _Section(parser, "climate", _base(cfg))
    seed = cfg.seed if cfg.seed is not None else s.int("seed", 0)
    scenario = _scenario_from(s, seed)
    grid = _grid_from(s, 60, 60, "equiangular")
    bundle = generate_datasets(scenario, grid)
    write_bundle(out, bundle)
    return {"seed": seed}


def write_bundle(directory, bundle: ClimateBundle) -> None:
    """Dataset bundle: ``radiation/t_<t>.csv``, ``pressure/t_<t>.csv`` and ``scenario.txt``."""
    directory = Path(directory)
    g = bundle.grid
    for t in range(bundle.T):
        io.write_field(directory / "radiation" / f"t_{t + 1:03d}.csv", GriddedField(g, bundle.radiation[t]))
        io.write_field(directory / "pressure" / f"t_{t + 1:03d}.csv", GriddedField(g, bundle.pressure[t]))
    info = bundle.scenario.as_dict()
    info.update(grid=g.kind, n_polar=g.n_polar, n_azimuth=g.n_azimuth,
                radiation_error_divisor=bundle.error_divisors[0],
                pressure_error_divisor=bundle.error_divisors[1])
    io.write_key_values(directory / "scenario.txt", info)


def read_bundle(directory) -> tuple[SphereGrid, np.ndarray, np.ndarray, LRDSpectralModel, dict]:
    """Grid, radiation and pressure stacks, radiation error model and scenario entries of a bundle."""
    directory = Path(directory)
    info = io.read_key_values(directory / "scenario.txt")
    builder = build_grid if info.get("grid") == "gauss" else build_equiangular_grid
    grid = builder(int(info["n_polar"]), int(info["n_azimuth"]))
    T = len(info["days"].split(","))
    rad = np.stack([io.read_field(directory / "radiation" / f"t_{t:03d}.csv", grid).values
                    for t in range(1, T + 1)])
    pres = np.stack([io.read_field(directory / "pressure" / f"t_{t:03d}.csv", grid).values
                     for t in range(1, T + 1)])
    alpha = [float(a) for a in info["error_alpha"].split(",")]
    var = np.array([float(v) for v in info["error_innovation_var"].split(",")])
    factor = (float(info["radiation_error_scale"]) / float(info["radiation_error_divisor"])) ** 2
    model = LRDSpectralModel(var * factor if factor > 0 else var, alpha)
    return grid, rad, pres, model, info


# ------------------------------------------------------ fit / predict / cv

def _regression_inputs(s: _Section):
    bundle_dir = s.path("bundle", _REQUIRED)
    grid, rad, pres, model, _ = read_bundle(bundle_dir)
    X = pressure_covariates(pres, grid, s.int("p", 2))
    model_file = s.path("model")
    if model_file is not None:
        model, _ = io.read_model(model_file)
    return grid, rad, X, model


def _candidates(s: _Section, N_max: int) -> CandidateSet:
    path = s.path("candidates")
    if path is not None:
        return io.read_candidates(path)
    return CandidateSet.uniform(s.int("n_candidates", 100), N_max, s.int("candidate_seed", 12345))


def _fit(cfg: RunConfig, parser, out: Path) -> dict:
    s = _Section(parser, "fit", _base(cfg))
    grid, rad, X, model = _regression_inputs(s)
    N = s.int("N_max", 7)
    link = s.str("link", "identity")
    variant = cfg.variant or s.str("variant", "oracle")
    if variant == "oracle":
        result = fit(rad, grid, X, link, N, model=model)
    elif variant == "plugin":
        candidates = _candidates(s, N)
        io.write_candidates(out / "candidates.csv", candidates)
        result = fit(rad, grid, X, link, N, candidates=candidates)
    else:
        raise ConfigError("fit needs variant oracle or plugin")
    io.write_fit(out / "fit.txt", result)
    return {"variant": variant}


def _predict(cfg: RunConfig, parser, out: Path) -> dict:
    s = _Section(parser, "predict", _base(cfg))
    result = io.read_fit(s.path("fit", _REQUIRED))
    grid, rad, X, _ = _regression_inputs(s)
    if X.shape[1] != result.p:
        raise ConfigError(f"fit has {result.p} parameters but p = {X.shape[1]}")
    pred = predict(result, X, result.link, grid)
    for t in range(pred.shape[0]):
        io.write_field(out / "prediction" / f"t_{t + 1:03d}.csv", GriddedField(grid, pred[t]))
    mae = np.abs(pred - rad) @ grid.weights / (4.0 * np.pi)
    io.write_csv(out / "prediction_mae.csv", ("t", "mae"), ((t + 1, m) for t, m in enumerate(mae)))
    return {}


def _crossval(cfg: RunConfig, parser, out: Path) -> dict:
    s = _Section(parser, "crossval", _base(cfg))
    grid, rad, X, model = _regression_inputs(s)
    seed = cfg.seed if cfg.seed is not None else s.int("seed", 0)
    k = cfg.k if cfg.k is not None else s.int("k", 5)
    N = s.int("N_max", 7)
    link = s.str("link", "identity")
    variant = cfg.variant or s.str("variant", "both")
    variants = ["oracle", "plugin"] if variant == "both" else [variant]
    rows = []
    for var in variants:
        candidates = _candidates(s, N) if var == "plugin" else None
        report = kfold_cv(rad, grid, X, link, N, k, var, seed, model=model,
                          candidates=candidates, threads=cfg.threads)
        write_cv_report(out, report, grid)
        rows.append((var, k, report.mean_mae, report.std_mae))
    io.write_csv(out / "cv_summary.csv", ("variant", "k", "mean_mae", "std_mae"), rows)
    return {"seed": seed, "k": k, "variant": variant}


def write_cv_report(directory, report: CVReport, grid: SphereGrid) -> None:
    directory = Path(directory)
    v = report.variant
    io.write_csv(directory / f"cv_{v}_folds.csv", ("fold", "size", "mae"),
                 ((f, len(report.folds[f]), report.fold_mae[f]) for f in range(report.k)))
    io.write_csv(directory / f"cv_{v}_assignment.csv", ("t", "fold"),
                 sorted((int(t) + 1, f) for f in range(report.k) for t in report.folds[f]))
    for f in range(report.k):
        io.write_csv(directory / f"cv_{v}_fold{f}.csv", ("colat_rad", "lon_rad", "mae"),
                     zip(grid.colatitude, grid.longitude, report.fold_fields[f]))


# ------------------------------------------------------------------ driver

_PIPELINES = {
    "simulate": _simulate,
    "climate-gen": _climate_gen,
    "fit": _fit,
    "predict": _predict,
    "crossval": _crossval,
}


def _base(cfg: RunConfig) -> Path:
    return cfg.config_path.parent if cfg.config_path is not None else Path.cwd()


def _versions() -> dict:
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"version_artifact": own, "version_python": platform.python_version(),
            "version_numpy": np.__version__, "version_scipy": scipy.__version__}


def run(cfg: RunConfig) -> int:
    """Execute one pipeline; returns the process exit status."""
    try:
        out = io.ensure_dir(cfg.output_dir)
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        parser, raw = _load_config(cfg.config_path)
        calls_before = estimation_calls()
        extra = _PIPELINES[cfg.command](cfg, parser, out)
        overrides = f"seed={cfg.seed};variant={cfg.variant};k={cfg.k}".encode()
        manifest = {
            "command": cfg.command,
            "seed": extra.pop("seed", cfg.seed),
            "config_hash": hashlib.sha256(raw + b"\0" + overrides).hexdigest(),
            "threads": cfg.threads,
            **extra,
            **_versions(),
            "estimation_calls": estimation_calls() - calls_before,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        }
        io.write_key_values(out / "manifest.txt", manifest)
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LRDSphereError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error[numerical]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


_HELP = {
    "simulate": "Monte Carlo MAE study on synthetic data",
    "climate-gen": "generate a synthetic radiation/pressure bundle",
    "fit": "fit the regression to a bundle",
    "predict": "predict a bundle from a saved fit",
    "crossval": "k-fold cross-validation on a bundle",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lrdsphere",
        description="Spherical functional regression with long-range-dependent errors.")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")
    sub.required = True
    for name in COMMANDS:
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", type=Path, default=None, help="key-value config file")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        p.add_argument("--variant", choices=("oracle", "plugin", "both"), default=None)
        p.add_argument("--k", type=int, default=None, help="number of cross-validation folds")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig(args.command, args.config, args.out, args.seed, args.threads,
                        args.variant, args.k)
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
