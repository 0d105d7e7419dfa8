import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, linalg as sla, stats

import mph
from mph import core
from mph.errors import DomainError, InvalidArgumentError, ValidationError
from models import fig1_models, loss_model, random_model, random_subintensity

INDEP = mph.MphModel([1.0], [[[-1.0]], [[-2.0]]])


def _diag_model(rates_by_margin, pi):
    return mph.MphModel(pi, [np.diag(-np.asarray(r, dtype=float)) for r in rates_by_margin])


# ---------------------------------------------------------------------------
# validation


def test_validate_accepts_and_rejects():
    core.validate(INDEP)
    with pytest.raises(ValidationError, match="pi not stochastic"):
        mph.MphModel([0.5, 0.6], [-np.eye(2)])
    with pytest.raises(ValidationError, match="diagonal must be negative"):
        mph.MphModel([1.0], [[[1.0]]])
    with pytest.raises(ValidationError, match="share order"):
        mph.MphModel([0.5, 0.5], [-np.eye(2), -np.eye(3)])
    with pytest.raises(ValidationError, match="negative"):
        mph.MphModel([1.5, -0.5], [-np.eye(2)])
    # row sum positive
    with pytest.raises(ValidationError, match="row sums"):
        mph.MphModel([0.5, 0.5], [[[-1.0, 2.0], [0.0, -1.0]]])
    # closed class {0, 1} never exits
    with pytest.raises(ValidationError, match="absorption"):
        mph.MphModel([0.5, 0.5], [[[-1.0, 1.0], [1.0, -1.0]]])


def test_validation_error_names_field():
    with pytest.raises(ValidationError) as info:
        mph.MphModel([0.5, 0.5], [-np.eye(2), [[-1.0, 0.0], [0.0, 2.0]]])
    assert info.value.path == "T[1][1, 1]"


def test_model_is_read_only():
    with pytest.raises(ValueError):
        INDEP.pi[0] = 0.3


# ---------------------------------------------------------------------------
# distribution functions


def test_independent_exponentials():
    x = np.array([1.0, 1.0])
    assert core.density(INDEP, x) == pytest.approx(2 * math.exp(-3), rel=1e-14)
    assert core.cdf(INDEP, x) == pytest.approx((1 - math.exp(-1)) * (1 - math.exp(-2)), rel=1e-14)
    assert core.survival(INDEP, x) == pytest.approx(math.exp(-3), rel=1e-14)
    assert core.laplace(INDEP, x) == pytest.approx(1 / 3, rel=1e-14)


def test_boundary_values():
    m = random_model(np.random.default_rng(2), 3, 2)
    assert core.cdf(m, [0.0, 0.0]) == 0.0
    assert core.survival(m, [0.0, 0.0]) == pytest.approx(1.0, abs=1e-15)
    assert core.laplace(m, [0.0, 0.0]) == pytest.approx(1.0, abs=1e-15)
    means = [core.moment(m, np.eye(2)[i]) for i in range(2)]
    assert core.cdf(m, 50 * np.array([max(means)] * 2)) >= 1 - 1e-6


def test_loss_model_density_transcription():
    # frozen from a per-state loop over scipy.linalg.expm
    m = loss_model()
    assert core.density(m, [1.0, 1.0]) == pytest.approx(0.07411510009776068, rel=1e-12)
    assert core.density(m, [0.5, 3.0]) == pytest.approx(0.005305083632150681, rel=1e-12)
    assert core.survival(m, [1.0, 1.0]) == pytest.approx(0.2464221655418189, rel=1e-12)


def test_univariate_collapse():
    rng = np.random.default_rng(0)
    pi = rng.dirichlet(np.ones(4))
    T = random_subintensity(rng, 4)
    t = -T.sum(axis=1)
    m = mph.MphModel(pi, [T])
    for x in (0.1, 1.0, 4.0):
        ref = pi @ sla.expm(T * x) @ t
        assert core.density(m, [x]) == pytest.approx(ref, rel=1e-12)
        assert core.ph_density(pi, T, x) == pytest.approx(ref, rel=1e-12)


def test_domain_errors():
    with pytest.raises(DomainError):
        core.density(INDEP, [0.0, 1.0])
    with pytest.raises(DomainError):
        core.cdf(INDEP, [-0.1, 1.0])
    with pytest.raises(DomainError):
        core.laplace(INDEP, [-1.0, 1.0])
    with pytest.raises(InvalidArgumentError):
        core.survival(INDEP, [1.0, 1.0, 1.0])


def test_vectorized_rows_match_scalar_calls():
    m = fig1_models()[3]
    X = np.random.default_rng(1).exponential(0.1, size=(7, 2))
    np.testing.assert_allclose(core.density(m, X), [core.density(m, x) for x in X], rtol=1e-14)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), p=st.integers(1, 3), d=st.integers(1, 3))
def test_survival_representations_agree(seed, p, d):
    rng = np.random.default_rng(seed)
    m = random_model(rng, p, d)
    x = rng.exponential(1.0, size=d)
    assert core.survival_kron(m, x) == pytest.approx(core.survival(m, x), abs=1e-10)


def test_survival_kron_cap():
    m = random_model(np.random.default_rng(0), 3, 3)
    with pytest.raises(InvalidArgumentError):
        core.survival_kron(m, [1.0, 1.0, 1.0], cap=10)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_inclusion_exclusion(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, 3, 2)
    x = rng.exponential(1.0, size=2)
    S1 = core.ph_survival(m.pi, m.T[0], x[0])
    S2 = core.ph_survival(m.pi, m.T[1], x[1])
    assert core.cdf(m, x) + S1 + S2 - core.survival(m, x) == pytest.approx(1.0, abs=1e-10)


def test_cdf_monotone_in_each_coordinate():
    m = loss_model()
    xs = np.linspace(0.0, 10.0, 40)
    for other in (0.5, 2.0):
        vals = core.cdf(m, np.column_stack([xs, np.full_like(xs, other)]))
        assert np.all(np.diff(vals) >= -1e-15)
        assert np.all((vals >= 0) & (vals <= 1))


def test_mixed_difference_of_cdf_is_density():
    m = random_model(np.random.default_rng(3), 2, 2)
    h = 1e-4
    for x in ([0.5, 0.7], [1.3, 0.2]):
        x1, x2 = x
        pts = np.array([[x1 + h, x2 + h], [x1 + h, x2 - h], [x1 - h, x2 + h], [x1 - h, x2 - h]])
        F = core.cdf(m, pts)
        approx = (F[0] - F[1] - F[2] + F[3]) / (4 * h * h)
        assert approx == pytest.approx(core.density(m, x), rel=1e-4)


def test_density_integrates_to_one():
    m = random_model(np.random.default_rng(4), 2, 2)
    val, _ = integrate.dblquad(lambda y, x: core.density(m, [x, y]), 0, np.inf, 0, np.inf,
                               epsabs=1e-9, epsrel=1e-9)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_laplace_matches_quadrature():
    m = random_model(np.random.default_rng(5), 2, 2)
    u = np.array([0.7, 1.9])
    val, _ = integrate.dblquad(lambda y, x: math.exp(-u[0] * x - u[1] * y) * core.density(m, [x, y]),
                               0, np.inf, 0, np.inf, epsabs=1e-10, epsrel=1e-10)
    assert core.laplace(m, u) == pytest.approx(val, abs=1e-7)


# ---------------------------------------------------------------------------
# moments and dependence


def test_moments():
    assert core.moment(mph.MphModel([1.0], [[[-1.0]]]), [1.0]) == pytest.approx(1.0)
    m = loss_model()
    assert core.moment(m, [0.0, 0.0]) == pytest.approx(1.0, abs=1e-15)
    diag = _diag_model([[2.0, 5.0], [3.0, 1.0]], [0.4, 0.6])
    ref = 0.4 * math.gamma(1.5) * 2.0 ** -0.5 + 0.6 * math.gamma(1.5) * 5.0 ** -0.5
    assert core.moment(diag, [0.5, 0.0]) == pytest.approx(ref, rel=1e-12)
    # integer orders against plain solves
    T1, T2 = m.T
    e = np.ones(4)
    v1 = np.linalg.solve(-T1, np.linalg.solve(-T1, e)) * 2
    v2 = np.linalg.solve(-T2, e)
    assert core.moment(m, [2.0, 1.0]) == pytest.approx(m.pi @ (v1 * v2), rel=1e-12)
    with pytest.raises(DomainError):
        core.moment(m, [-1.0, 0.0])


def test_fractional_moment_fallback_on_defective_matrix():
    # Erlang(2, 1): E[X^0.5] = Gamma(2.5) / Gamma(2)
    m = mph.MphModel([1.0, 0.0], [[[-1.0, 1.0], [0.0, -1.0]]])
    val, info = core.moment(m, [0.5], full_output=True)
    assert info["quadrature"] == [0]
    assert val == pytest.approx(math.gamma(2.5), rel=1e-8)


def test_pearson_matches_moment_route():
    m = loss_model()
    ex = [core.moment(m, np.eye(2)[i]) for i in range(2)]
    sd = [math.sqrt(core.moment(m, 2 * np.eye(2)[i]) - ex[i] ** 2) for i in range(2)]
    cov = core.moment(m, [1.0, 1.0]) - ex[0] * ex[1]
    assert core.pearson(m, 0, 1) == pytest.approx(cov / (sd[0] * sd[1]), rel=1e-10)
    assert core.marginal_sd(m, 0) == pytest.approx(sd[0], rel=1e-12)


def test_dependence_vanishes_without_mixing():
    rng = np.random.default_rng(6)
    single = mph.MphModel([1.0], [[[-1.0]], [[-3.0]]])
    point = mph.MphModel([0.0, 1.0, 0.0], [random_subintensity(rng, 3) for _ in range(2)])
    same = random_subintensity(rng, 3)
    point_same = mph.MphModel([0.0, 0.0, 1.0], [same, same])
    for m in (single, point, point_same):
        for fn in (core.pearson, core.kendall, core.spearman):
            assert fn(m, 0, 1) == pytest.approx(0.0, abs=1e-12)


def _kendall_by_quadrature(m):
    # tau = 4 E[F(X)] - 1, integrated directly
    f = lambda y, x: core.cdf(m, [x, y]) * core.density(m, [x, y])
    val, _ = integrate.dblquad(f, 0, np.inf, 0, np.inf, epsabs=1e-10, epsrel=1e-10)
    return 4 * val - 1


def _spearman_by_quadrature(m):
    pi, (T1, T2) = m.pi, m.T
    f = lambda y, x: (core.ph_cdf(pi, T1, x) * core.ph_cdf(pi, T2, y)
                      * core.density(m, [x, y]))
    val, _ = integrate.dblquad(f, 0, np.inf, 0, np.inf, epsabs=1e-10, epsrel=1e-10)
    return 12 * val - 3


@pytest.mark.slow
def test_kendall_spearman_against_quadrature():
    m = random_model(np.random.default_rng(7), 2, 2)
    m = mph.MphModel([0.3, 0.7], [m.T[0], m.T[1] * 0.2])
    assert core.kendall(m, 0, 1) == pytest.approx(_kendall_by_quadrature(m), abs=1e-6)
    assert core.spearman(m, 0, 1) == pytest.approx(_spearman_by_quadrature(m), abs=1e-6)


def test_dependence_range_and_symmetry():
    rng = np.random.default_rng(8)
    for _ in range(10):
        m = random_model(rng, 3, 3, scale=rng.uniform(0.1, 10))
        mats = core.dependence_matrices(m)
        for M in mats.values():
            np.testing.assert_allclose(M, M.T)
            assert np.all(np.abs(M) <= 1 + 1e-12)


def test_pair_errors():
    with pytest.raises(DomainError):
        core.kendall(INDEP, 0, 0)
    with pytest.raises(InvalidArgumentError):
        core.pearson(INDEP, 0, 2)


def test_fig1_marginals_identical():
    models = fig1_models()
    grid = np.linspace(0.0, 1.0, 100)
    ref = [core.ph_cdf(models[0].pi, models[0].T[i], grid) for i in range(2)]
    for m in models[1:]:
        for i in range(2):
            assert np.max(np.abs(core.ph_cdf(m.pi, m.T[i], grid) - ref[i])) < 1e-10

def test_fig1_cyclic_permutations_are_mirror_images():
    # permutations sigma and sigma^-1 give (X1, X2) and a state-relabelled
    # (X2, X1): the two 3-cycles share every symmetric dependence measure and
    # their copulas are transposes of each other
    models = fig1_models()
    taus = np.array([core.kendall(m, 0, 1) for m in models])
    cycles = [3, 4]    # (20, 140, 5) and (140, 5, 20) in permutation order
    assert taus[cycles[0]] == pytest.approx(taus[cycles[1]], abs=1e-14)
    assert len(set(np.round(taus, 10))) == 5
    grid = np.array([[0.2, 0.7], [0.6, 0.1], [0.4, 0.45]])
    a = core.copula_density_grid(models[cycles[0]], 0, 1, grid)
    b = core.copula_density_grid(models[cycles[1]], 0, 1, grid[:, ::-1])
    np.testing.assert_allclose(a, b, rtol=1e-8)


# ---------------------------------------------------------------------------
# margins, quantiles, copulas, embedding


def test_marginal():
    m = loss_model()
    pi, T = core.marginal(m, 1)
    np.testing.assert_array_equal(T, m.T[1])
    np.testing.assert_array_equal(pi, m.pi)
    assert core.ph_survival(pi, T, 1.0) == pytest.approx(core.survival(m, [0.0, 1.0]), rel=1e-14)
    assert pi @ np.linalg.solve(-T, np.ones(4)) == pytest.approx(core.moment(m, [0.0, 1.0]))
    with pytest.raises(InvalidArgumentError):
        core.marginal(m, 2)


def test_quantile_inverts_cdf():
    m = loss_model()
    u = np.array([1e-6, 0.1, 0.5, 0.99, 1 - 1e-9])
    q = core.ph_quantile(m.pi, m.T[0], u)
    np.testing.assert_allclose(core.ph_cdf(m.pi, m.T[0], q), u, atol=1e-10)


def test_copula_independence_and_symmetry():
    grid = np.array([[0.1, 0.2], [0.5, 0.5], [0.9, 0.3]])
    np.testing.assert_allclose(core.copula_density_grid(INDEP, 0, 1, grid), 1.0, atol=1e-8)
    T = random_subintensity(np.random.default_rng(9), 3)
    sym = mph.MphModel([0.2, 0.5, 0.3], [T, T])
    a = core.copula_density_grid(sym, 0, 1, [[0.3, 0.7]])
    b = core.copula_density_grid(sym, 0, 1, [[0.7, 0.3]])
    assert a[0] == pytest.approx(b[0], rel=1e-9)
    with pytest.raises(DomainError):
        core.copula_density_grid(INDEP, 0, 1, [[0.0, 0.5]])


def test_copula_density_integrates_to_one():
    m = fig1_models()[0]
    r = 60
    levels = (np.arange(r) + 0.5) / r
    U, V = np.meshgrid(levels, levels)
    c = core.copula_density_grid(m, 0, 1, np.column_stack([U.ravel(), V.ravel()]))
    assert np.all(np.isfinite(c)) and np.all(c > 0)
    assert c.mean() == pytest.approx(1.0, abs=0.05)


def test_copula_center_against_monte_carlo():
    m = fig1_models()[0]
    X = mph.sample(m, 400_000, seed=11)
    ranks = stats.rankdata(X, axis=0) / (len(X) + 1)
    h = 0.05
    inside = np.all(np.abs(ranks - 0.5) < h, axis=1).mean()
    est = inside / (2 * h) ** 2
    c = core.copula_density_grid(m, 0, 1, [[0.5, 0.5]])[0]
    assert est == pytest.approx(c, rel=0.05)


def test_mphstar_structure():
    m = mph.MphModel([1.0], [[[-1.0]], [[-2.0]]])
    rep = core.to_mphstar(m)
    assert rep.T_tilde.shape == (2, 2)
    np.testing.assert_array_equal(rep.R_tilde, np.eye(2))
    rng = np.random.default_rng(10)
    m = random_model(rng, 2, 2)
    rep = core.to_mphstar(m)
    assert rep.pi_tilde.shape == (8,)
    assert rep.pi_tilde.sum() == pytest.approx(1.0)
    assert set(np.unique(rep.R_tilde)) <= {0.0, 1.0}
    np.testing.assert_array_equal(rep.R_tilde.sum(axis=1), 1.0)
    # block k: chain k runs T_1 .. T_d in sequence, passing through state k
    p, d = 2, 2
    for k in range(p):
        blk = rep.T_tilde[k * p * d:(k + 1) * p * d, k * p * d:(k + 1) * p * d]
        np.testing.assert_array_equal(blk[:p, :p], m.T[0])
        np.testing.assert_array_equal(blk[p:, p:], m.T[1])
        np.testing.assert_array_equal(blk[:p, p:], np.outer(m.exits[0], np.eye(p)[k]))


def test_mphstar_reward_law_matches_marginals():
    # accumulated reward j under the embedding has the margin-j law
    m = random_model(np.random.default_rng(12), 2, 2)
    rep = core.to_mphstar(m)
    for j in range(2):
        # states earning reward j form a PH block; expected reward = mean of X_j
        mask = rep.R_tilde[:, j] == 1
        occ = rep.pi_tilde @ np.linalg.inv(-rep.T_tilde)
        assert occ[mask].sum() == pytest.approx(core.moment(m, np.eye(2)[j]), rel=1e-12)
