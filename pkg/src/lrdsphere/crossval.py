"""
Random k-fold cross-validation over time indices.

Whole maps are held out: every fold is a set of days, the regression is fitted
on the remaining days (with the corresponding sub-matrices of the stationary
error covariance) and predicts the held-out maps.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, LRDSphereError
from .lrd_spectral import CandidateSet, ContrastWeight, LRDSpectralModel
from .regression import fit, predict
from .sphere_basis import SphereGrid

__all__ = ["CVReport", "fold_assignment", "kfold_cv"]


def fold_assignment(T: int, k: int, seed=0) -> list[np.ndarray]:
    """Random partition of ``0..T-1`` into ``k`` sorted folds whose sizes differ by at most one."""
    if k < 2 or k > T:
        raise DomainError(f"need 2 <= k <= T, got k={k}, T={T}")
    perm = np.random.default_rng(seed).permutation(T)
    return [np.sort(part) for part in np.array_split(perm, k)]


@dataclass(frozen=True, eq=False)
class CVReport:
    """Per-fold absolute prediction errors of a cross-validation run.

    ``fold_fields[f]`` is the mean over the held-out days of fold ``f`` of
    ``|Y_hat - Y|`` at every node; ``fold_mae[f]`` its spherical mean.
    ``errors[f]`` keeps the per-day error maps, ``(len(folds[f]), nodes)``.
    """

    k: int
    variant: str
    folds: tuple
    fold_fields: np.ndarray
    fold_mae: np.ndarray
    errors: tuple
    selected: tuple = ()

    @property
    def mean_mae(self) -> float:
        return float(np.mean(self.fold_mae))

    @property
    def std_mae(self) -> float:
        return float(np.std(self.fold_mae, ddof=1)) if self.k > 1 else 0.0


def kfold_cv(stack, grid: SphereGrid, X, link, N_max: int, k: int = 5,
             variant: str = "oracle", seed=0,
             model: Optional[LRDSpectralModel] = None,
             candidates: Optional[CandidateSet] = None,
             base_model: Optional[LRDSpectralModel] = None,
             weight: Optional[ContrastWeight] = None,
             threads: int = 1) -> CVReport:
    """k-fold cross-validation of the oracle or plug-in regression predictor.

    ``variant="oracle"`` needs ``model``; ``"plugin"`` needs ``candidates`` and
    estimates the LRD exponents on each training set (``base_model``
    supplies innovation variances and SRD factors, a unit model by default).
    """
    stack = np.atleast_2d(np.asarray(stack, dtype=float))
    X = np.asarray(X, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    T = stack.shape[0]
    if variant == "oracle" and model is None:
        raise DomainError("oracle cross-validation needs the error model")
    if variant == "plugin" and candidates is None:
        raise DomainError("plug-in cross-validation needs a candidate set")
    if variant not in ("oracle", "plugin"):
        raise DomainError(f"unknown variant {variant!r}")
    folds = fold_assignment(T, k, seed)
    everything = np.arange(T)

    def one_fold(f):
        test = folds[f]
        train = np.setdiff1d(everything, test)
        try:
            if variant == "oracle":
                result = fit(stack[train], grid, X[train], link, N_max, model=model, times=train)
            else:
                result = fit(stack[train], grid, X[train], link, N_max, candidates=candidates,
                             base_model=base_model, weight=weight, times=train)
            err = np.abs(predict(result, X[test], link, grid) - stack[test])
        except LRDSphereError as exc:
            raise type(exc)(f"fold {f}: {exc}") from exc
        return err, result.theta_index

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            outputs = list(pool.map(one_fold, range(k)))
    else:
        outputs = [one_fold(f) for f in range(k)]
    fields = np.stack([err.mean(axis=0) for err, _ in outputs])
    mae = fields @ grid.weights / (4.0 * np.pi)
    return CVReport(k, variant, tuple(folds), fields, mae,
                    tuple(err for err, _ in outputs), tuple(sel for _, sel in outputs))
