"""
Plain-text artifacts: CSV tables and sectioned key-value files.

Floats are written with ``repr`` (shortest round-trip form), so equal inputs
give byte-identical files and reading back recovers the exact values.
"""
from __future__ import annotations

import csv
import os
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigError
from .functional_ts import CoefficientSeries, PeriodogramDiag
from .lrd_spectral import CandidateSet, ContrastWeight, LRDSpectralModel
from .regression import GLSFit
from .sphere_basis import GriddedField, SphereGrid, harmonic_indices, n_coefficients

__all__ = [
    "fmt",
    "write_csv",
    "read_csv",
    "write_field",
    "read_field",
    "write_coefficient_series",
    "read_coefficient_series",
    "write_periodogram",
    "read_periodogram",
    "write_model",
    "read_model",
    "write_candidates",
    "read_candidates",
    "write_fit",
    "read_fit",
    "write_key_values",
    "read_key_values",
    "parse_sections",
]


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_csv(path, header: Sequence[str]) -> list[list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        found = next(reader, None)
        if found is None or [h.strip() for h in found] != list(header):
            raise ConfigError(f"{path}: expected header {','.join(header)}, got {found}")
        return [row for row in reader if row]


def write_field(path, field_: GriddedField) -> None:
    g = field_.grid
    write_csv(path, ("colat_rad", "lon_rad", "value"),
              zip(g.colatitude, g.longitude, field_.values))


def read_field(path, grid: Optional[SphereGrid] = None):
    """Read a field CSV; returns a `GriddedField` when ``grid`` is given, else the three columns."""
    rows = np.array(read_csv(path, ("colat_rad", "lon_rad", "value")), dtype=float).reshape(-1, 3)
    if grid is None:
        return rows[:, 0], rows[:, 1], rows[:, 2]
    if rows.shape[0] != grid.size or not (
            np.allclose(rows[:, 0], grid.colatitude, atol=1e-12)
            and np.allclose(rows[:, 1], grid.longitude, atol=1e-12)):
        raise ConfigError(f"{path}: node coordinates do not match the grid")
    return GriddedField(grid, rows[:, 2])


def write_coefficient_series(path, series: CoefficientSeries) -> None:
    idx = harmonic_indices(series.N_max)

    def rows():
        for k, h in enumerate(idx):
            for t in range(series.T):
                yield h.degree, h.order, t + 1, series.values[k, t]

    write_csv(path, ("n", "j", "t", "value"), rows())


def read_coefficient_series(path) -> CoefficientSeries:
    rows = read_csv(path, ("n", "j", "t", "value"))
    n = np.array([int(r[0]) for r in rows])
    j = np.array([int(r[1]) for r in rows])
    t = np.array([int(r[2]) for r in rows])
    N, T = int(n.max()), int(t.max())
    values = np.zeros((n_coefficients(N), T))
    values[n * n + j - 1, t - 1] = [float(r[3]) for r in rows]
    return CoefficientSeries(N, values)


def write_periodogram(path, p: PeriodogramDiag) -> None:
    idx = harmonic_indices(p.N_max)

    def rows():
        for k, h in enumerate(idx):
            for m, w in enumerate(p.frequencies):
                yield h.degree, h.order, w, p.values[k, m]

    write_csv(path, ("n", "j", "omega", "value"), rows())


def read_periodogram(path, T: int) -> PeriodogramDiag:
    rows = read_csv(path, ("n", "j", "omega", "value"))
    n = np.array([int(r[0]) for r in rows])
    j = np.array([int(r[1]) for r in rows])
    omega = np.array([float(r[2]) for r in rows])
    freqs = np.unique(omega)
    N = int(n.max())
    values = np.zeros((n_coefficients(N), freqs.size))
    values[n * n + j - 1, np.searchsorted(freqs, omega)] = [float(r[3]) for r in rows]
    return PeriodogramDiag(N, T, freqs, values)


def parse_sections(path) -> dict[str, list[str]]:
    """Split a text file into ``[section]`` blocks of non-empty, non-comment lines."""
    sections: dict[str, list[str]] = {}
    current = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip()
                if current in sections:
                    raise ConfigError(f"{path}:{lineno}: duplicate section [{current}]")
                sections[current] = []
            elif current is None:
                raise ConfigError(f"{path}:{lineno}: entry outside any section")
            else:
                sections[current].append(line)
    return sections


def _key_values(lines, path, section) -> dict[str, str]:
    out = {}
    for line in lines:
        if "=" not in line:
            raise ConfigError(f"{path}: [{section}] expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _degree_vector(entries: dict, path, section) -> np.ndarray:
    try:
        items = sorted((int(k), float(v)) for k, v in entries.items())
    except ValueError as exc:
        raise ConfigError(f"{path}: [{section}] entries must be 'n = value': {exc}") from None
    if [n for n, _ in items] != list(range(len(items))):
        raise ConfigError(f"{path}: [{section}] must list degrees 0..N_max exactly once")
    return np.array([v for _, v in items])


def write_model(path, model: LRDSpectralModel, weight: Optional[ContrastWeight] = None) -> None:
    """Model file with ``[alpha]``, ``[innovation_var]`` and ``[weight]`` sections."""
    if not model.srd_is_constant:
        raise ConfigError("only constant SRD factors can be written to a model file")
    weight = weight or ContrastWeight()
    lines = ["[alpha]"]
    lines += [f"{n} = {fmt(a)}" for n, a in enumerate(model.alpha)]
    lines += ["", "[innovation_var]"]
    lines += [f"{n} = {fmt(v)}" for n, v in enumerate(model.innovation_var)]
    lines += ["", "[weight]", f"gamma = {fmt(weight.gamma)}"]
    lines += [f"{n} = {fmt(w)}" for n, w in enumerate(weight.degree_weights(model.N_max))]
    Path(path).write_text("\n".join(lines) + "\n")


def read_model(path) -> tuple[LRDSpectralModel, ContrastWeight]:
    sections = parse_sections(path)
    for name in ("alpha", "innovation_var"):
        if name not in sections:
            raise ConfigError(f"{path}: missing section [{name}]")
    alpha = _degree_vector(_key_values(sections["alpha"], path, "alpha"), path, "alpha")
    var = _degree_vector(_key_values(sections["innovation_var"], path, "innovation_var"),
                         path, "innovation_var")
    weight = ContrastWeight()
    if "weight" in sections:
        entries = _key_values(sections["weight"], path, "weight")
        gamma = float(entries.pop("gamma", 1.0))
        w = _degree_vector(entries, path, "weight") if entries else None
        weight = ContrastWeight(gamma, w)
    return LRDSpectralModel(var, alpha), weight


def write_candidates(path, candidates: CandidateSet) -> None:
    c = candidates.candidates
    write_csv(path, ("candidate_id", "n", "alpha"),
              ((k, n, c[k, n]) for k in range(c.shape[0]) for n in range(c.shape[1])))


def read_candidates(path) -> CandidateSet:
    rows = read_csv(path, ("candidate_id", "n", "alpha"))
    k = np.array([int(r[0]) for r in rows])
    n = np.array([int(r[1]) for r in rows])
    c = np.full((k.max() + 1, n.max() + 1), np.nan)
    c[k, n] = [float(r[2]) for r in rows]
    if np.isnan(c).any():
        raise ConfigError(f"{path}: every candidate needs an exponent for every degree")
    return CandidateSet(c)


def write_fit(path, result: GLSFit) -> None:
    """Fitted-model file: ``[design]``, ``[beta]``, ``[theta]`` and ``[variance]`` sections."""
    lines = ["[design]", f"T = {result.T}", f"p = {result.p}",
             f"N_max = {result.N_max}", f"link = {result.link}", "", "[beta]", "h,n,j,value"]
    idx = harmonic_indices(result.N_max)
    for h in range(result.p):
        lines += [f"{h},{i.degree},{i.order},{fmt(result.beta[h, k])}" for k, i in enumerate(idx)]
    lines += ["", "[theta]", "n,alpha"]
    if result.theta_used is not None:
        lines += [f"{n},{fmt(a)}" for n, a in enumerate(result.theta_used)]
    lines += ["", "[variance]", "n,row,col,value"]
    for n in range(result.N_max + 1):
        for a in range(result.p):
            for b in range(result.p):
                lines.append(f"{n},{a},{b},{fmt(result.covariance[n, a, b])}")
    Path(path).write_text("\n".join(lines) + "\n")


def _table(lines, header, path, section):
    if not lines or lines[0].replace(" ", "") != header:
        raise ConfigError(f"{path}: [{section}] must start with header {header}")
    return [line.split(",") for line in lines[1:]]


def read_fit(path) -> GLSFit:
    sections = parse_sections(path)
    for name in ("design", "beta", "theta", "variance"):
        if name not in sections:
            raise ConfigError(f"{path}: missing section [{name}]")
    design = _key_values(sections["design"], path, "design")
    try:
        T, p, N = int(design["T"]), int(design["p"]), int(design["N_max"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: [design] needs integer T, p and N_max ({exc})") from None
    beta = np.zeros((p, n_coefficients(N)))
    for h, n, j, v in _table(sections["beta"], "h,n,j,value", path, "beta"):
        n = int(n)
        beta[int(h), n * n + int(j) - 1] = float(v)
    theta_rows = _table(sections["theta"], "n,alpha", path, "theta")
    theta = np.array([float(a) for _, a in sorted(theta_rows, key=lambda r: int(r[0]))]) if theta_rows else None
    cov = np.zeros((N + 1, p, p))
    for n, a, b, v in _table(sections["variance"], "n,row,col,value", path, "variance"):
        cov[int(n), int(a), int(b)] = float(v)
    return GLSFit(N, beta, cov, design.get("link", "identity"), T, theta)


def write_key_values(path, items: dict) -> None:
    Path(path).write_text("".join(f"{k} = {fmt(v)}\n" for k, v in items.items()))


def read_key_values(path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and "=" in line:
                key, value = (s.strip() for s in line.split("=", 1))
                out[key] = value
    return out


def ensure_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"output directory {path} is not writable")
    return path
