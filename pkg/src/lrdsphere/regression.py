"""
Nonlinear multiple functional regression with a known link.

The response maps ``Y_t`` are related to scalar covariates ``X[t, h]`` and
parameter functions ``beta_h`` on the sphere through

    H^{-1}(Y_t) = sum_h X[t, h] beta_h + eps_t,

with ``eps`` an isotropic LRD functional time series.  Projecting onto the
harmonic basis decouples the problem into one GLS regression per
coefficient ``(n, j)``, all sharing the Toeplitz error covariance of degree
``n``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import CovarianceError, DomainError, GridError, RankDeficiencyError
from .functional_ts import CoefficientSeries
from .lrd_spectral import (
    CandidateSet,
    ContrastWeight,
    LRDSpectralModel,
    ToeplitzCovariance,
    build_toeplitz,
    estimate_theta,
    invert_to_autocov,
)
from .sphere_basis import (
    GriddedField,
    HarmonicCoefficients,
    SphereGrid,
    analyze_values,
    synthesize_values,
)

__all__ = [
    "LinkOperator",
    "GLSFit",
    "apply_link",
    "invert_link",
    "check_design",
    "project_response",
    "gls_fit_eigenspace",
    "gls_loss",
    "estimator_variance",
    "fit",
    "predict",
]

RANK_TOL = 1e-10


class LinkOperator:
    """Known componentwise link ``H``: ``"identity"`` or ``"exponential"``."""

    KINDS = ("identity", "exponential")

    def __init__(self, kind: str = "identity"):
        if kind not in self.KINDS:
            raise DomainError(f"unknown link {kind!r}; expected one of {self.KINDS}")
        self.kind = kind

    def __repr__(self):
        return f"LinkOperator({self.kind!r})"

    def __eq__(self, other):
        return isinstance(other, LinkOperator) and other.kind == self.kind

    def apply(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return np.exp(values) if self.kind == "exponential" else values

    def invert(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if self.kind == "identity":
            return values
        bad = np.argwhere(~(values > 0))
        if bad.size:
            where = tuple(int(i) for i in bad[0])
            if values.ndim == 2:
                msg = f"time index {where[0]}, node {where[1]}"
            else:
                msg = f"position {where}"
            raise DomainError(
                f"exponential link needs positive responses; got {values[tuple(bad[0])]!r} at {msg}")
        return np.log(values)


def _as_link(link) -> LinkOperator:
    return link if isinstance(link, LinkOperator) else LinkOperator(link)


def apply_link(link, stack) -> np.ndarray:
    return _as_link(link).apply(stack)


def invert_link(link, stack) -> np.ndarray:
    return _as_link(link).invert(stack)


def check_design(X) -> np.ndarray:
    """Validate a ``(T, p)`` design matrix and its numerical full column rank."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < X.shape[1]:
        raise RankDeficiencyError(f"design of shape {X.shape} cannot have full column rank")
    sv = np.linalg.svd(X, compute_uv=False)
    if sv[-1] <= RANK_TOL * sv[0]:
        raise RankDeficiencyError(
            f"design matrix is rank deficient (singular values {sv[0]:.3g} .. {sv[-1]:.3g})")
    return X


def project_response(stack, grid: SphereGrid, N_max: int) -> np.ndarray:
    """Response coefficients ``Y[flat(n, j), t]`` of a ``(T, nodes)`` stack.

    ``stack`` may also be a sequence of `GriddedField` on ``grid``.
    """
    if isinstance(stack, (list, tuple)) and stack and isinstance(stack[0], GriddedField):
        for k, f in enumerate(stack):
            if not f.grid.same_as(grid):
                raise GridError(f"field at time index {k} is on a different grid")
        stack = np.stack([f.values for f in stack])
    return analyze_values(grid, np.atleast_2d(stack), N_max).T


class _DenseCovariance:
    """Cholesky-factored dense covariance with the `ToeplitzCovariance` solve interface."""

    def __init__(self, matrix, degree=None):
        try:
            self._chol = scipy.linalg.cho_factor(matrix, lower=True)
        except np.linalg.LinAlgError:
            label = "" if degree is None else f" for degree {degree}"
            raise CovarianceError(f"covariance{label} is not positive definite", degree) from None
        self._matrix = matrix
        self.T = matrix.shape[0]

    def solve(self, b):
        return scipy.linalg.cho_solve(self._chol, b)

    def matvec(self, b, extended=False):
        if extended:
            return self._matrix.astype(np.longdouble) @ np.asarray(b, dtype=np.longdouble)
        return self._matrix @ b


def _as_covariance(Lam, degree=None):
    if isinstance(Lam, (ToeplitzCovariance, _DenseCovariance)):
        return Lam
    Lam = np.asarray(Lam, dtype=float)
    return _DenseCovariance(0.5 * (Lam + Lam.T), degree)


def _normal_equations(X, cov):
    """``Lambda^{-1} X``, the Cholesky factor of ``G = X^T Lambda^{-1} X`` and ``G^{-1}``.

    One step of iterative refinement with an extended-precision residual,
    and a Newton step on the small inverse, make these correctly rounded in
    practice, so closed forms such as 3/4 come out exact regardless of the
    BLAS kernels used.
    """
    A = cov.solve(X)
    residual = np.asarray(X, dtype=np.longdouble) - cov.matvec(A, extended=True)
    A_ext = A + cov.solve(np.asarray(residual, dtype=float)).astype(np.longdouble)
    G_ext = X.T.astype(np.longdouble) @ A_ext
    G_ext = 0.5 * (G_ext + G_ext.T)
    G = G_ext.astype(float)
    try:
        factor = scipy.linalg.cho_factor(G, lower=True)
    except np.linalg.LinAlgError:
        raise RankDeficiencyError("X^T Lambda^{-1} X is singular") from None
    ev = np.linalg.eigvalsh(G)
    if ev[0] <= RANK_TOL * ev[-1]:
        raise RankDeficiencyError("X^T Lambda^{-1} X is numerically singular")
    V = scipy.linalg.cho_solve(factor, np.eye(G.shape[0])).astype(np.longdouble)
    V = V + V @ (np.eye(G.shape[0], dtype=np.longdouble) - G_ext @ V)
    V = (0.5 * (V + V.T)).astype(float)
    return A_ext.astype(float), factor, V


def gls_fit_eigenspace(X, Lam, y) -> np.ndarray:
    """GLS coefficients ``(X^T L^{-1} X)^{-1} X^T L^{-1} y``.

    ``y`` may be a vector of length ``T`` or a ``(T, k)`` array of several
    responses sharing ``Lam``; only linear solves are performed.
    """
    X = check_design(X)
    cov = _as_covariance(Lam)
    y = np.asarray(y, dtype=float)
    if y.shape[0] != X.shape[0] or cov.T != X.shape[0]:
        raise DomainError(f"dimension mismatch: X {X.shape}, Lambda {cov.T}, y {y.shape}")
    A, factor, _ = _normal_equations(X, cov)
    return scipy.linalg.cho_solve(factor, A.T @ y)


def gls_loss(X, Lam, y, beta) -> float:
    """``(y - X beta)^T L^{-1} (y - X beta)``."""
    r = np.asarray(y, dtype=float) - np.asarray(X, dtype=float) @ beta
    return float(r @ _as_covariance(Lam).solve(r))


def estimator_variance(X, Lam) -> np.ndarray:
    """Covariance ``(X^T L^{-1} X)^{-1}`` of the GLS coefficients."""
    X = check_design(X)
    cov = _as_covariance(Lam)
    if cov.T != X.shape[0]:
        raise DomainError(f"dimension mismatch: X {X.shape}, Lambda {cov.T}")
    return _normal_equations(X, cov)[2]


@dataclass(frozen=True, eq=False)
class GLSFit:
    """Per-coefficient GLS estimates and their covariances.

    ``beta[h, flat(n, j)]`` holds the coefficient of parameter function
    ``h``; ``covariance[n]`` is ``(X^T L_n^{-1} X)^{-1}``, shared by all
    orders of degree ``n``.
    """

    N_max: int
    beta: np.ndarray
    covariance: np.ndarray
    link: str = "identity"
    T: int = 0
    theta_used: Optional[np.ndarray] = None
    theta_index: Optional[int] = None

    @property
    def p(self) -> int:
        return self.beta.shape[0]

    @property
    def total_variance(self) -> np.ndarray:
        """``sum_n (2n+1) (X^T L_n^{-1} X)^{-1}``, the summability diagnostic."""
        mult = 2.0 * np.arange(self.N_max + 1) + 1.0
        return np.tensordot(mult, self.covariance, axes=1)

    def params(self) -> list[HarmonicCoefficients]:
        return [HarmonicCoefficients(self.N_max, b) for b in self.beta]


def _degree_covariances(model: LRDSpectralModel, N_max: int, T: int,
                        times: Optional[np.ndarray]) -> list:
    if model.N_max < N_max:
        raise DomainError(f"error model covers degrees up to {model.N_max}, need {N_max}")
    span = T if times is None else int(times.max()) + 1
    covs = []
    for n in range(N_max + 1):
        row = invert_to_autocov(model, n, span)
        lam = build_toeplitz(row, span, degree=n)
        covs.append(lam if times is None else _DenseCovariance(lam.submatrix(times), n))
    return covs


def fit(stack, grid: SphereGrid, X, link, N_max: int,
        model: Optional[LRDSpectralModel] = None,
        candidates: Optional[CandidateSet] = None,
        base_model: Optional[LRDSpectralModel] = None,
        weight: Optional[ContrastWeight] = None,
        times: Optional[Sequence[int]] = None,
        norm: str = "trace") -> GLSFit:
    """Fit the regression to a ``(T, nodes)`` response stack.

    Exactly one covariance source is used:

    * ``model`` -- the error spectral model is known (oracle GLS);
    * ``candidates`` -- plug-in GLS: an OLS pre-fit gives residual
      coefficient series, minimum contrast picks the LRD exponents among
      ``candidates`` (innovation variances and SRD factors taken from
      ``base_model``), and the GLS fit is repeated with the implied
      covariances.

    ``times`` gives the 0-based time positions of the rows when they are not
    consecutive (e.g. a cross-validation training set); covariances are then
    the corresponding sub-matrices of the stationary covariance.
    """
    link = _as_link(link)
    X = check_design(X)
    stack = np.atleast_2d(np.asarray(stack, dtype=float))
    T = stack.shape[0]
    if X.shape[0] != T:
        raise DomainError(f"design has {X.shape[0]} rows, response {T} times")
    if times is not None:
        times = np.asarray(times, dtype=int)
        if times.shape != (T,) or np.any(np.diff(times) <= 0):
            raise DomainError("times must be strictly increasing, one per response row")
    Y = project_response(link.invert(stack), grid, N_max)     # (ncoef, T)

    theta, theta_index = None, None
    if (model is None) == (candidates is None):
        raise DomainError("pass exactly one of model (oracle) or candidates (plug-in)")
    if candidates is not None:
        base = base_model or LRDSpectralModel(np.ones(N_max + 1), np.zeros(N_max + 1))
        ols, *_ = np.linalg.lstsq(X, Y.T, rcond=None)
        residual = CoefficientSeries(N_max, (Y.T - X @ ols).T)
        theta_index, theta = estimate_theta(residual, candidates, weight, base, norm=norm)
        model = base.with_alpha(theta)

    covs = _degree_covariances(model, N_max, T, times)
    p = X.shape[1]
    beta = np.empty((p, Y.shape[0]))
    covariance = np.empty((N_max + 1, p, p))
    for n in range(N_max + 1):
        try:
            A, factor, V = _normal_equations(X, covs[n])
        except RankDeficiencyError as exc:
            raise RankDeficiencyError(f"degree {n}: {exc}") from exc
        block = slice(n * n, (n + 1) ** 2)
        beta[:, block] = scipy.linalg.cho_solve(factor, A.T @ Y[block].T)
        covariance[n] = V
    return GLSFit(N_max, beta, covariance, link.kind, T, theta, theta_index)


def predict(result: GLSFit, X_new, link, grid: SphereGrid) -> np.ndarray:
    """Predicted response maps ``H(sum_h X_new[t, h] beta_h)``, shape ``(T_new, nodes)``."""
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    if X_new.shape[1] != result.p:
        raise DomainError(f"X_new has {X_new.shape[1]} columns, fit has {result.p} parameters")
    latent = synthesize_values(grid, X_new @ result.beta, result.N_max)
    return _as_link(link).apply(latent)
