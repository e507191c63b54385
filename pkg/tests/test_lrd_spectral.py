import numpy as np
import pytest
import scipy.integrate
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammaln

from lrdsphere.errors import CovarianceError, DomainError
from lrdsphere.functional_ts import CoefficientSeries, PeriodogramDiag, fourier_frequencies, periodogram
from lrdsphere.lrd_spectral import (
    CandidateSet,
    ContrastWeight,
    FrequencyGrid,
    LRDSpectralModel,
    ToeplitzCovariance,
    autocov_to_density,
    build_toeplitz,
    contrast,
    contrast_eigenvalues,
    estimate_theta,
    estimation_calls,
    fd_autocov,
    invert_to_autocov,
    normalizer,
    spectral_density,
)
from lrdsphere.simulation import simulate_lrd_error


def unit_model(alpha):
    """B * M = 1 at every degree."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    return LRDSpectralModel(np.ones(alpha.size), alpha, np.ones(alpha.size))


def quad_autocov(model, n, t, split=0.2):
    """Oracle: adaptive quadrature of 2 int_0^pi cos(w t) f_n(w) dw.

    The cusp on (0, split) is handled by QAWS with weight w^(-alpha), the
    rest by QAWO (cosine weight).
    """
    a = float(model.alpha[n])

    def smooth(w):
        # f(w) w^alpha = B M(w) (w / (2 sin(w/2)))^alpha, bounded at w = 0
        ratio = 1.0 if w < 1e-8 else w / (2.0 * np.sin(0.5 * w))
        return np.cos(w * t) * model.innovation_var[n] * float(model.srd(n, np.array([w]))[0]) * ratio ** a

    near, _ = scipy.integrate.quad(smooth, 0, split, weight="alg", wvar=(-a, 0.0))
    f = lambda w: spectral_density(model, n, w)
    if t:
        far, _ = scipy.integrate.quad(f, split, np.pi, weight="cos", wvar=t, limit=400)
    else:
        far, _ = scipy.integrate.quad(f, split, np.pi, limit=400)
    return 2.0 * (near + far)


# ------------------------------------------------------------------ model

def test_model_validation():
    with pytest.raises(DomainError):
        LRDSpectralModel([1.0], [0.5])
    with pytest.raises(DomainError):
        LRDSpectralModel([0.0], [0.2])
    with pytest.raises(DomainError):
        LRDSpectralModel([1.0, 1.0], [0.2])
    with pytest.raises(DomainError):
        CandidateSet(np.array([[0.1, 0.6]]))
    with pytest.raises(DomainError):
        ContrastWeight(gamma=0.0)


def test_geometric_defaults():
    m = LRDSpectralModel.geometric([0.1, 0.2, 0.3])
    assert np.allclose(m.innovation_var, 0.7 ** np.arange(3))
    assert np.allclose(m.srd_factor, 1 / (2 * np.pi))
    assert m.N_max == 2


def test_spectral_density_examples():
    m = LRDSpectralModel([2.0], [0.0], [0.3])
    w = np.linspace(0.01, np.pi, 50)
    assert np.allclose(spectral_density(m, 0, w), 0.6)
    for a in (0.05, 0.3, 0.49):
        assert spectral_density(unit_model(a), 0, np.pi) == pytest.approx(4 ** (-a / 2))
    m = unit_model(0.4)
    values = [spectral_density(m, 0, w) * w ** 0.4 for w in (1e-3, 1e-4)]
    # 4 sin^2(w/2) = w^2 (1 - w^2/12 + ...): linear extrapolation in w^2 to w = 0
    extrapolated = values[1] + (values[1] - values[0]) * (1e-8) / (1e-6 - 1e-8)
    assert extrapolated == pytest.approx(1.0, abs=1e-9)
    assert values[1] == pytest.approx(1.0, abs=1e-8)


def test_spectral_density_rejects_zero_frequency():
    with pytest.raises(DomainError):
        spectral_density(unit_model(0.2), 0, 0.0)
    with pytest.raises(DomainError):
        spectral_density(unit_model(0.2), 0, np.array([0.5, 0.0]))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, np.pi - 0.01), st.floats(0, 0.45), st.floats(0.001, 0.04))
def test_alpha_monotonicity(w, a, da):
    f1 = spectral_density(unit_model(a), 0, w)
    f2 = spectral_density(unit_model(a + da), 0, w)
    base = 4 * np.sin(w / 2) ** 2
    if base < 1 - 1e-9:
        assert f2 > f1
    elif base > 1 + 1e-9:
        assert f2 < f1


def test_trace_diagnostic_is_finite():
    m = LRDSpectralModel.geometric(np.linspace(0.1, 0.45, 8))
    expected = sum((2 * n + 1) * 0.7 ** n * fd_autocov(m.alpha[n] / 2, 1)[0] for n in range(8))
    assert m.trace_diagnostic() == pytest.approx(expected, rel=1e-12)


# ------------------------------------------------------------- normalizer

def test_normalizer_examples():
    flat = unit_model(0.0)
    grid = FrequencyGrid.midpoint(4096)
    assert normalizer(flat, 0, ContrastWeight(), grid) == pytest.approx(np.pi ** 2, rel=1e-6)
    doubled = normalizer(flat, 0, ContrastWeight(w_tilde=np.array([2.0])), grid)
    assert doubled == pytest.approx(2 * normalizer(flat, 0, ContrastWeight(), grid), rel=1e-14)
    with pytest.raises(DomainError):
        FrequencyGrid(np.array([]), np.array([]))
    with pytest.raises(DomainError):
        FrequencyGrid(np.array([0.5]), np.array([0.0]))


def test_fourier_grid_weights():
    g = FrequencyGrid.fourier(8)
    assert np.allclose(g.omega, fourier_frequencies(8))
    assert g.weights.sum() == pytest.approx(2 * np.pi * 7 / 8)
    assert FrequencyGrid.fourier(9).weights.sum() == pytest.approx(2 * np.pi * 8 / 9)


# --------------------------------------------------------------- contrast

def _random_periodogram(T=64, N=2, seed=0):
    rng = np.random.default_rng(seed)
    return periodogram(CoefficientSeries(N, rng.standard_normal(((N + 1) ** 2, T))))


def test_contrast_zero_examples():
    T = 64
    p = _random_periodogram(T)
    grid = FrequencyGrid.fourier(T)
    # w_tilde makes the normalizer equal to the (constant) density, so log Upsilon == 0
    w_tilde = np.full(3, 1.0 / grid.integrate(grid.omega))
    model = LRDSpectralModel(np.full(3, 3.0), np.zeros(3))
    assert contrast(p, model, ContrastWeight(1.0, w_tilde), grid) == pytest.approx(0.0, abs=1e-12)
    zero = PeriodogramDiag(2, T, p.frequencies, np.zeros_like(p.values))
    model = LRDSpectralModel.geometric([0.1, 0.2, 0.3])
    assert contrast(zero, model, ContrastWeight()) == 0.0
    assert contrast(zero, model, ContrastWeight(), norm="sup") == 0.0


def test_contrast_matches_explicit_formula():
    T = 50
    p = _random_periodogram(T, 2, 3)
    model = LRDSpectralModel.geometric([0.1, 0.3, 0.2])
    weight = ContrastWeight(1.5, np.array([1.0, 0.5, 2.0]))
    grid = FrequencyGrid.fourier(T)
    c = contrast_eigenvalues(p, model, weight)
    pbar = p.degree_mean()
    for n in range(3):
        f = spectral_density(model, n, grid.omega)
        N_n = normalizer(model, n, weight, grid)
        explicit = -np.sum(pbar[n] * np.log(f / N_n) * weight.degree_weight(n)
                           * grid.omega ** 1.5 * grid.weights)
        assert c[n] == pytest.approx(explicit, rel=1e-12)
    assert contrast(p, model, weight, norm="sup") == pytest.approx(np.max(np.abs(c)))
    assert contrast(p, model, weight) == pytest.approx(np.sum((2 * np.arange(3) + 1) * np.abs(c)))


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 1000))
def test_contrast_scaling_preserves_argmin(scale, seed):
    p = _random_periodogram(40, 2, seed)
    scaled = PeriodogramDiag(2, 40, p.frequencies, scale * p.values)
    cands = CandidateSet.uniform(10, 2, seed)
    base = LRDSpectralModel.geometric(np.zeros(3))
    w = ContrastWeight()
    for norm in ("trace", "sup"):
        a = [contrast(p, base.with_alpha(c), w, norm=norm) for c in cands.candidates]
        b = [contrast(scaled, base.with_alpha(c), w, norm=norm) for c in cands.candidates]
        assert np.allclose(np.array(b), scale * np.array(a), rtol=1e-10)
        assert int(np.argmin(a)) == int(np.argmin(b))


def test_estimate_theta_examples():
    rng = np.random.default_rng(0)
    s = CoefficientSeries(2, rng.standard_normal((9, 60)))
    one = CandidateSet(np.array([[0.1, 0.2, 0.3]]))
    idx, alpha = estimate_theta(s, one)
    assert idx == 0 and np.allclose(alpha, [0.1, 0.2, 0.3])
    twins = CandidateSet(np.array([[0.3, 0.2, 0.1], [0.3, 0.2, 0.1]]))
    assert estimate_theta(s, twins)[0] == 0
    with pytest.raises(DomainError):
        estimate_theta(s, CandidateSet(np.array([[0.1, 0.2]])))


def test_estimation_counter_increments():
    rng = np.random.default_rng(1)
    s = CoefficientSeries(0, rng.standard_normal((1, 30)))
    before = estimation_calls()
    estimate_theta(s, CandidateSet(np.array([[0.1], [0.3]])))
    estimate_theta(s, CandidateSet(np.array([[0.1], [0.3]])))
    assert estimation_calls() == before + 2


def test_estimate_theta_recovers_planted_candidate_small():
    # reduced version of the acceptance recovery experiment
    cands = CandidateSet.uniform(30, 7, seed=7)
    base = LRDSpectralModel.geometric(np.zeros(8))
    hits = 0
    for r in range(6):
        rng = np.random.default_rng(100 + r)
        k = int(rng.integers(len(cands)))
        s, _ = simulate_lrd_error(base.with_alpha(cands.candidates[k]), 500, rng=rng)
        hits += estimate_theta(s, cands, base_model=base)[0] == k
    assert hits >= 5


# -------------------------------------------------------------- inversion

def test_fd_autocov_closed_form():
    d = 0.2
    g = fd_autocov(d, 6)
    assert g[0] == pytest.approx(np.exp(gammaln(1 - 2 * d) - 2 * gammaln(1 - d)))
    assert g[1] == pytest.approx(g[0] * d / (1 - d))
    assert np.allclose(fd_autocov(0.0, 5), [1, 0, 0, 0, 0])


def test_invert_flat_density_is_white_noise():
    model = LRDSpectralModel([1.0], [0.0])             # f = 1/(2 pi)
    for method in ("hybrid", "riemann"):
        row = invert_to_autocov(model, 0, 20, method=method)
        assert row[0] == pytest.approx(1.0, abs=1e-12)
        assert np.max(np.abs(row[1:])) <= 1e-12


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.45])
def test_hybrid_inversion_matches_quadrature(alpha):
    model = LRDSpectralModel.geometric([0.0, alpha])
    row = invert_to_autocov(model, 1, 65)
    for t in (0, 1, 5, 64):
        assert row[t] == pytest.approx(quad_autocov(model, 1, t), rel=1e-6)


def test_hybrid_inversion_with_frequency_varying_srd():
    srd = lambda n, w: (1.0 + 0.5 * np.cos(w)) / (2 * np.pi)
    model = LRDSpectralModel(np.array([1.3]), np.array([0.35]), srd)
    row = invert_to_autocov(model, 0, 40)
    for t in (0, 3, 39):
        assert row[t] == pytest.approx(quad_autocov(model, 0, t), rel=1e-4, abs=1e-7)


def test_riemann_inversion_is_a_plain_sum():
    model = LRDSpectralModel.geometric([0.25])
    grid = FrequencyGrid.midpoint(512)
    row = invert_to_autocov(model, 0, 5, grid, method="riemann")
    f = spectral_density(model, 0, grid.omega)
    for t in range(5):
        assert row[t] == pytest.approx(np.sum(np.cos(grid.omega * t) * f * grid.weights), rel=1e-13)


def test_tauberian_decay_alpha_045():
    model = unit_model(0.45)
    t = np.arange(32, 129)
    row = invert_to_autocov(model, 0, 129)
    scaled = row[t] * t ** (1 - 0.45)
    assert np.all(scaled > 0)
    assert np.ptp(scaled) / scaled.mean() <= 0.02
    # constant 2 pi Gamma(1-2d) / (Gamma(d) Gamma(1-d)), d = alpha/2, from fractional noise asymptotics
    d = 0.225
    const = 2 * np.pi * np.exp(gammaln(1 - 2 * d) - gammaln(d) - gammaln(1 - d))
    assert scaled[-1] == pytest.approx(const, rel=0.01)
    assert row[64] == pytest.approx(quad_autocov(model, 0, 64), rel=1e-6)


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.45])
def test_spectral_round_trip(alpha):
    model = unit_model(alpha)
    L = 8192
    row = invert_to_autocov(model, 0, L)
    w = 2 * np.pi * np.arange(1, L // 2) / L
    w = w[(w > 0.05 * np.pi) & (w < 0.95 * np.pi)][::16]
    back = autocov_to_density(row, w)
    rel = np.abs(back - spectral_density(model, 0, w)) / spectral_density(model, 0, w)
    assert np.max(rel) <= 0.01


# ---------------------------------------------------------------- toeplitz

def test_build_toeplitz_examples():
    lam = build_toeplitz(np.r_[1.0, np.zeros(5)], 6)
    assert np.array_equal(lam.matrix(), np.eye(6))
    lam = build_toeplitz([1.0, 0.5], 2)
    assert np.array_equal(lam.matrix(), [[1, 0.5], [0.5, 1]])
    assert np.allclose(lam.eigenvalues(), [0.5, 1.5])
    with pytest.raises(CovarianceError) as info:
        build_toeplitz([1.0, 1.1], 2, degree=3)
    assert info.value.degree == 3 and "degree 3" in str(info.value)
    with pytest.raises(DomainError):
        build_toeplitz([1.0, 0.2], 3)


def test_long_rows_use_durbin_check():
    row = np.r_[1.0, 1.1, np.zeros(400)]
    with pytest.raises(CovarianceError):
        ToeplitzCovariance(row)
    ToeplitzCovariance(fd_autocov(0.2, 400))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=2, max_size=8))
def test_durbin_agrees_with_eigenvalues(tail):
    from lrdsphere.lrd_spectral import _durbin_is_pd
    row = np.r_[1.0, np.array(tail) * 0.6]
    ev = np.linalg.eigvalsh(scipy.linalg.toeplitz(row))
    if ev.min() > 1e-8:
        assert _durbin_is_pd(row)
    elif ev.min() < -1e-8:
        assert not _durbin_is_pd(row)


def test_lrd_covariances_are_pd_up_to_512():
    model = LRDSpectralModel.geometric(np.linspace(0.05, 0.45, 9))
    for n in range(9):
        lam = build_toeplitz(invert_to_autocov(model, n, 512), 512, degree=n)
        assert lam.T == 512


def test_solvers_agree():
    rng = np.random.default_rng(5)
    row = invert_to_autocov(LRDSpectralModel.geometric([0.4]), 0, 300)
    lam = ToeplitzCovariance(row)
    b = rng.standard_normal((300, 3))
    dense = lam.solve(b, "dense")
    lev = lam.solve(b, "levinson")
    assert np.allclose(dense, lev, rtol=1e-8, atol=1e-10)
    assert np.allclose(lam.matrix() @ dense, b, atol=1e-9)
    idx = np.array([0, 3, 4, 10])
    assert np.array_equal(lam.submatrix(idx), lam.matrix()[np.ix_(idx, idx)])
