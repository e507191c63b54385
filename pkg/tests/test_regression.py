import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lrdsphere.errors import CovarianceError, DomainError, GridError, RankDeficiencyError
from lrdsphere.lrd_spectral import CandidateSet, LRDSpectralModel, build_toeplitz, invert_to_autocov
from lrdsphere.regression import (
    GLSFit,
    LinkOperator,
    apply_link,
    check_design,
    estimator_variance,
    fit,
    gls_fit_eigenspace,
    gls_loss,
    invert_link,
    predict,
    project_response,
)
from lrdsphere.simulation import make_covariates, simulate_lrd_error
from lrdsphere.sphere_basis import (
    GriddedField,
    build_grid,
    flat_index,
    n_coefficients,
    synthesize_values,
)


def lrd_lambda(T, alpha=0.35):
    return build_toeplitz(invert_to_autocov(LRDSpectralModel.geometric([alpha]), 0, T), T)


def random_design(rng, T, p):
    return np.column_stack([np.ones(T)] + [rng.standard_normal(T) for _ in range(p - 1)])


# -------------------------------------------------------------------- link

def test_link_examples():
    exp = LinkOperator("exponential")
    assert exp.apply(0.0) == 1.0
    assert exp.apply(1.0) == pytest.approx(2.718281828, abs=1e-9)
    assert exp.invert(1.0) == 0.0
    stack = np.arange(6.0).reshape(2, 3) - 2
    assert np.array_equal(apply_link("identity", stack), stack)
    assert np.array_equal(invert_link("identity", stack), stack)
    with pytest.raises(DomainError):
        LinkOperator("logit")


def test_exponential_inverse_reports_time_and_node():
    stack = np.ones((4, 5))
    stack[2, 3] = -0.5
    with pytest.raises(DomainError) as info:
        invert_link("exponential", stack)
    assert "time index 2" in str(info.value) and "node 3" in str(info.value)
    with pytest.raises(DomainError):
        invert_link("exponential", np.array([-0.5]))


@settings(max_examples=40, deadline=None)
@given(arrays(float, (3, 7), elements=st.floats(-20, 20)))
def test_link_round_trip(stack):
    for kind in ("identity", "exponential"):
        link = LinkOperator(kind)
        assert np.max(np.abs(link.invert(link.apply(stack)) - stack)) <= 1e-12 * max(1, np.abs(stack).max())


# ----------------------------------------------------------------- design

def test_check_design_rank():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((10, 2))
    assert check_design(X).shape == (10, 2)
    assert check_design(np.ones(5)).shape == (5, 1)
    with pytest.raises(RankDeficiencyError):
        check_design(np.column_stack([X[:, 0], 2 * X[:, 0]]))
    with pytest.raises(RankDeficiencyError):
        check_design(rng.standard_normal((2, 3)))


# ---------------------------------------------------------------- project

def test_project_response_examples():
    g = build_grid(8, 17)
    T = 5
    assert np.all(project_response(np.zeros((T, g.size)), g, 3) == 0)
    c = np.arange(1.0, T + 1)
    Y11 = synthesize_values(g, np.eye(n_coefficients(3))[flat_index(1, 1)], 3)
    Y = project_response(np.outer(c, Y11), g, 3)
    assert np.allclose(Y[flat_index(1, 1)], c, atol=1e-12)
    others = np.delete(Y, flat_index(1, 1), axis=0)
    assert np.max(np.abs(others)) <= 1e-12
    rng = np.random.default_rng(1)
    A, B = rng.standard_normal((2, T, g.size))
    assert np.allclose(project_response(2 * A - B, g, 3),
                       2 * project_response(A, g, 3) - project_response(B, g, 3), atol=1e-12)


def test_project_response_accepts_fields_and_checks_grid():
    g, h = build_grid(8, 17), build_grid(9, 17)
    fields = [GriddedField(g, np.ones(g.size)) for _ in range(3)]
    Y = project_response(fields, g, 2)
    assert Y.shape == (9, 3)
    with pytest.raises(GridError):
        project_response(fields + [GriddedField(h, np.ones(h.size))], g, 2)


# -------------------------------------------------------------------- GLS

def test_gls_identity_reduces_to_ols():
    rng = np.random.default_rng(2)
    X = random_design(rng, 40, 3)
    y = rng.standard_normal(40)
    beta = gls_fit_eigenspace(X, np.eye(40), y)
    ols = np.linalg.solve(X.T @ X, X.T @ y)
    assert np.max(np.abs(beta - ols)) <= 1e-12
    mean = gls_fit_eigenspace(np.ones((40, 1)), np.eye(40), y)
    assert mean[0] == pytest.approx(y.mean(), abs=1e-14)


def test_gls_noiseless_recovery_and_orthogonality():
    rng = np.random.default_rng(3)
    T = 120
    X = random_design(rng, T, 2)
    lam = lrd_lambda(T)
    beta = np.array([1.5, -0.7])
    assert np.max(np.abs(gls_fit_eigenspace(X, lam, X @ beta) - beta)) <= 1e-10
    y = X @ beta + rng.standard_normal(T)
    b = gls_fit_eigenspace(X, lam, y)
    assert np.max(np.abs(X.T @ lam.solve(y - X @ b))) <= 1e-8


def test_gls_dense_and_levinson_paths_agree():
    rng = np.random.default_rng(4)
    T = 300
    X = random_design(rng, T, 2)
    y = rng.standard_normal(T)
    lam = lrd_lambda(T)                  # T > 256: Levinson path
    dense = gls_fit_eigenspace(X, lam.matrix(), y)
    assert np.allclose(gls_fit_eigenspace(X, lam, y), dense, atol=1e-8)


def test_gls_errors():
    rng = np.random.default_rng(5)
    X = random_design(rng, 6, 2)
    with pytest.raises(RankDeficiencyError):
        gls_fit_eigenspace(np.column_stack([X[:, 0], X[:, 0]]), np.eye(6), np.ones(6))
    with pytest.raises(CovarianceError):
        gls_fit_eigenspace(X, -np.eye(6), np.ones(6))
    with pytest.raises(DomainError):
        gls_fit_eigenspace(X, np.eye(5), np.ones(6))


def test_estimator_variance_examples():
    assert estimator_variance(np.ones((7, 1)), np.eye(7))[0, 0] == pytest.approx(1 / 7)
    V = estimator_variance(np.ones((2, 1)), np.array([[1.0, 0.5], [0.5, 1.0]]))
    assert V[0, 0] == 0.75
    rng = np.random.default_rng(6)
    X = random_design(rng, 30, 2)
    lam = lrd_lambda(30).matrix()
    assert np.allclose(estimator_variance(X, 3.0 * lam), 3.0 * estimator_variance(X, lam), rtol=1e-12)
    explicit = np.linalg.inv(X.T @ np.linalg.inv(lam) @ X)
    assert np.allclose(estimator_variance(X, lam), explicit, rtol=1e-10)


def test_estimator_variance_matches_large_monte_carlo():
    # vectorized GLS on 200000 exact circulant draws: no bias beyond 2%
    from lrdsphere.simulation import circulant_sample

    T = 110
    rng = np.random.default_rng(8)
    X = make_covariates(T, (0.5, 0.25), rng)
    row = invert_to_autocov(LRDSpectralModel.geometric([0.1]), 0, T + 1)
    lam = scipy.linalg.toeplitz(row[:T])
    V = estimator_variance(X, lam)
    Z = circulant_sample(row, rng, size=200000)[:, :T]
    B = (V @ (X.T @ np.linalg.solve(lam, Z.T))).T
    d = np.sqrt(np.diag(V))
    assert np.max(np.abs(B.T @ B / B.shape[0] - V) / np.outer(d, d)) <= 0.02


def test_gls_optimality_against_perturbations():
    rng = np.random.default_rng(7)
    T = 80
    X = random_design(rng, T, 2)
    lam = lrd_lambda(T, 0.45)
    y = X @ [0.3, 1.0] + np.linalg.cholesky(lam.matrix()) @ rng.standard_normal(T)
    b = gls_fit_eigenspace(X, lam, y)
    best = gls_loss(X, lam, y, b)
    ols = np.linalg.lstsq(X, y, rcond=None)[0]
    assert best <= gls_loss(X, lam, y, ols) + 1e-12
    for _ in range(50):
        assert best <= gls_loss(X, lam, y, b + 0.1 * rng.standard_normal(2)) + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 10_000))
def test_gls_scale_invariance(c, seed):
    rng = np.random.default_rng(seed)
    T = 25
    X = random_design(rng, T, 2)
    y = rng.standard_normal((T, 3))
    lam = lrd_lambda(T).matrix()
    assert np.allclose(gls_fit_eigenspace(X, c * lam, y), gls_fit_eigenspace(X, lam, y), atol=1e-10)


# ------------------------------------------------------------ fit/predict

@pytest.mark.parametrize("link", ["identity", "exponential"])
def test_fit_recovers_noiseless_beta(link):
    rng = np.random.default_rng(8)
    g = build_grid(10, 21)
    T, N = 60, 4
    X = make_covariates(T, (0.5, 0.25), rng)
    beta = 0.3 * rng.standard_normal((2, n_coefficients(N)))
    Y = LinkOperator(link).apply(synthesize_values(g, X @ beta, N))
    model = LRDSpectralModel.geometric(np.linspace(0.1, 0.4, N + 1))
    result = fit(Y, g, X, link, N, model=model)
    assert np.max(np.abs(result.beta - beta)) <= 1e-10
    pred = predict(result, X, link, g)
    assert np.max(np.abs(pred - Y)) <= 1e-8
    assert result.covariance.shape == (N + 1, 2, 2)
    for V in result.covariance:
        assert np.allclose(V, V.T) and np.all(np.linalg.eigvalsh(V) > 0)
    expected_total = sum((2 * n + 1) * result.covariance[n] for n in range(N + 1))
    assert np.allclose(result.total_variance, expected_total)


def test_fit_covariance_matches_estimator_variance():
    rng = np.random.default_rng(9)
    g = build_grid(6, 13)
    T, N = 40, 2
    X = make_covariates(T, (0.5, 0.25), rng)
    model = LRDSpectralModel.geometric([0.2, 0.3, 0.4])
    result = fit(np.zeros((T, g.size)), g, X, "identity", N, model=model)
    for n in range(N + 1):
        lam = build_toeplitz(invert_to_autocov(model, n, T), T)
        assert np.allclose(result.covariance[n], estimator_variance(X, lam), rtol=1e-12)


def test_fit_needs_exactly_one_covariance_source():
    g = build_grid(6, 13)
    X = np.ones((10, 1))
    with pytest.raises(DomainError):
        fit(np.zeros((10, g.size)), g, X, "identity", 2)
    model = LRDSpectralModel.geometric([0.1] * 3)
    with pytest.raises(DomainError):
        fit(np.zeros((10, g.size)), g, X, "identity", 2, model=model,
            candidates=CandidateSet(np.array([[0.1] * 3])))
    with pytest.raises(DomainError):
        fit(np.zeros((9, g.size)), g, X, "identity", 2, model=model)
    with pytest.raises(DomainError):
        fit(np.zeros((10, g.size)), g, X, "identity", 3, model=model)


def test_fit_with_time_subset_uses_submatrices():
    rng = np.random.default_rng(10)
    g = build_grid(6, 13)
    T, N = 30, 2
    X = random_design(rng, T, 2)
    Y = rng.standard_normal((T, g.size))
    model = LRDSpectralModel.geometric([0.2, 0.3, 0.4])
    keep = np.sort(rng.choice(T, 20, replace=False))
    result = fit(Y[keep], g, X[keep], "identity", N, model=model, times=keep)
    coeffs = project_response(Y[keep], g, N)
    for n in range(N + 1):
        full = build_toeplitz(invert_to_autocov(model, n, T), T).matrix()
        sub = full[np.ix_(keep, keep)]
        for j in range(1, 2 * n + 2):
            k = flat_index(n, j)
            assert np.allclose(result.beta[:, k], gls_fit_eigenspace(X[keep], sub, coeffs[k]), atol=1e-12)
    with pytest.raises(DomainError):
        fit(Y[keep], g, X[keep], "identity", N, model=model, times=keep[::-1])


def test_plugin_fit_selects_true_candidate():
    rng = np.random.default_rng(11)
    g = build_grid(9, 19)
    T, N = 400, 7
    true = LRDSpectralModel.geometric(np.linspace(0.1, 0.4, N + 1))
    cands = CandidateSet(np.vstack([true.alpha, CandidateSet.uniform(19, N, 3).candidates]))
    X = make_covariates(T, (0.5, 0.25), rng)
    beta = np.zeros((2, n_coefficients(N)))
    beta[0, flat_index(1, 1)] = beta[1, flat_index(2, 1)] = 1.0
    err, _ = simulate_lrd_error(true, T, rng=rng)
    Y = synthesize_values(g, X @ beta + err.values.T, N)
    result = fit(Y, g, X, "identity", N, candidates=cands, base_model=true)
    assert result.theta_index == 0
    assert np.allclose(result.theta_used, true.alpha)


def test_predict_examples():
    g = build_grid(6, 13)
    zero = GLSFit(2, np.zeros((1, 9)), np.ones((3, 1, 1)))
    assert np.all(predict(zero, np.ones((3, 1)), "identity", g) == 0)
    assert np.all(predict(zero, np.ones((3, 1)), "exponential", g) == 1)
    c = 2.5
    const = GLSFit(2, np.r_[c, np.zeros(8)][None, :], np.ones((3, 1, 1)))
    assert np.allclose(predict(const, np.ones((2, 1)), "identity", g), c / np.sqrt(4 * np.pi))
    with pytest.raises(DomainError):
        predict(zero, np.ones((3, 2)), "identity", g)
