import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss
from scipy import stats
from scipy.special import i0e

from compsched import anglestats as ast
from compsched.harness import two_cell_covariances


def test_gram_schmidt_identity_seed():
    v1 = np.array([1.0, 0.0, 0.0, 0.0], dtype=complex)
    basis = ast.gram_schmidt_basis(v1)
    assert np.allclose(basis, np.eye(4))


def test_gram_schmidt_orthonormal_and_deterministic():
    rng = np.random.default_rng(0)
    for n in (2, 4, 6):
        v1 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v1 /= np.linalg.norm(v1)
        b1 = ast.gram_schmidt_basis(v1)
        b2 = ast.gram_schmidt_basis(v1)
        assert np.linalg.norm(b1 @ b1.conj().T - np.eye(n)) < 1e-12
        assert np.array_equal(b1, b2)
        assert np.allclose(b1[0], v1)


def test_cos2_mc_uniform_two_dims():
    cov = 2.5 * np.eye(2, dtype=complex)
    samples = ast.cos2_mc(cov, cov, 1_000_000, np.random.default_rng(1))
    assert samples.min() >= 0.0 and samples.max() <= 1.0
    ks = stats.kstest(samples, "uniform").statistic
    assert ks < 0.01


def test_cos2_mc_beta_four_dims():
    cov = 0.3 * np.eye(4, dtype=complex)
    samples = ast.cos2_mc(cov, cov, 1_000_000, np.random.default_rng(2))
    ks = stats.kstest(samples, stats.beta(1, 3).cdf).statistic
    assert ks < 0.01


def test_cos2_mc_collinear_rank_one():
    v = np.array([1.0, 1j]) / np.sqrt(2.0)
    cov = np.outer(v.conj(), v)
    samples = ast.cos2_mc(cov, cov, 1000, np.random.default_rng(3))
    assert np.allclose(samples, 1.0)


def test_basis_independence_of_cos2():
    # two different valid completions of v1 give the same distribution
    cov1, cov2 = two_cell_covariances([-50.0, 100.0])
    rng = np.random.default_rng(4)
    n = 200_000
    h1 = ast._draw_rows(ast._covariance_root(cov1), rng, n)
    h2 = ast._draw_rows(ast._covariance_root(cov2), rng, n)
    v1 = h1 / np.linalg.norm(h1, axis=1)[:, None]

    cos_a = np.empty(2000)
    cos_b = np.empty(2000)
    # basis A: canonical completion; basis B: a different valid completion
    # (second row re-phased, still orthonormal with the same first row)
    for i in range(2000):
        basis_a = ast.gram_schmidt_basis(v1[i])
        q_a = ast.q_vector(h2[i], basis_a)
        basis_b = np.vstack([basis_a[0], basis_a[1] * np.exp(1j * 0.7)])
        q_b = ast.q_vector(h2[i], basis_b)
        cos_a[i] = q_a.cos2
        cos_b[i] = q_b.cos2
    ks = stats.ks_2samp(cos_a[:2000], cos_b[:2000]).statistic
    assert ks < 0.01  # in fact identical values
    assert np.allclose(cos_a[:2000], cos_b[:2000], atol=1e-12)


def test_conditional_q_pdf_diagonal_is_product_exponential():
    t = np.diag([2.0, 0.5]).astype(complex)
    dens = ast.ConditionalQDensity(t, 10)
    q1 = np.linspace(0.1, 8.0, 7)
    q2 = np.linspace(0.1, 3.0, 7)
    got = dens(q1[:, None], q2[None, :])
    expected = (np.exp(-q1 / 2.0) / 2.0)[:, None] * (np.exp(-q2 / 0.5) / 0.5)[None, :]
    assert np.allclose(got, expected, rtol=1e-12)


def _random_t(rng, kappa_max=0.6):
    # moderate correlation keeps the outer-series truncation converged at
    # reachable depths (the alternating partial sums oscillate for kappa > 1/2)
    a11 = float(rng.uniform(0.3, 3.0))
    a22 = float(rng.uniform(0.3, 3.0))
    kappa = float(rng.uniform(0.05, kappa_max))
    phase = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
    t12 = np.sqrt(kappa * a11 * a22) * phase
    return np.array([[a11, t12], [np.conj(t12), a22]])


def test_conditional_q_pdf_matches_closed_form():
    # independent oracle: bivariate density of |z1|^2, |z2|^2 for correlated
    # complex Gaussians has a Bessel closed form
    rng = np.random.default_rng(5)
    for _ in range(5):
        t = _random_t(rng)
        a11, a22 = t[0, 0].real, t[1, 1].real
        kappa = abs(t[0, 1]) ** 2 / (a11 * a22)
        dens = ast.ConditionalQDensity(t, 64)

        def closed(q1, q2):
            u, v = q1 / a11, q2 / a22
            z = 2.0 * np.sqrt(u * v * kappa) / (1.0 - kappa)
            return (np.exp(-(u + v) / (1.0 - kappa) + z) * i0e(z)
                    / (a11 * a22 * (1.0 - kappa)))

        q1 = np.linspace(0.05, 6 * a11, 9)[:, None]
        q2 = np.linspace(0.05, 6 * a22, 9)[None, :]
        ref = closed(q1, q2)
        assert np.max(np.abs(dens(q1, q2) - ref)) < 1e-5 * ref.max()


def test_conditional_q_pdf_normalizes():
    rng = np.random.default_rng(6)
    t = _random_t(rng)
    dens = ast.ConditionalQDensity(t, 40)
    a11, a22 = t[0, 0].real, t[1, 1].real
    xn, xw = leggauss(160)

    def nodes(b):
        return 0.5 * b * (xn + 1.0), 0.5 * b * xw

    y1, w1 = nodes(30 * a11)
    y2, w2 = nodes(30 * a22)
    val = dens(y1[:, None], y2[None, :])
    integral = float(w1 @ val @ w2)
    assert integral == pytest.approx(1.0, abs=1e-3)


def test_conditional_q_pdf_matches_mc_histogram():
    cov1, cov2 = two_cell_covariances([-50.0, 100.0])
    rng = np.random.default_rng(7)
    while True:  # take a direction with converged truncation (see _random_t)
        h1 = ast._draw_rows(ast._covariance_root(cov1), rng, 1)[0]
        v1 = h1 / np.linalg.norm(h1)
        basis = ast.gram_schmidt_basis(v1)
        t = basis @ cov2 @ basis.conj().T
        if abs(t[0, 1]) ** 2 / (t[0, 0].real * t[1, 1].real) < 0.6:
            break
    dens = ast.conditional_q_pdf(v1, cov2, ast.SeriesParams(truncation_r=64))
    a11, a22 = t[0, 0].real, t[1, 1].real

    draws = ast._draw_rows(ast._covariance_root(cov2), rng, 1_000_000)
    q = np.abs(draws @ basis.conj().T) ** 2
    e1 = np.linspace(0, 6 * a11, 41)
    e2 = np.linspace(0, 6 * a22, 41)
    hist, _, _ = np.histogram2d(q[:, 0], q[:, 1], bins=[e1, e2], density=True)
    c1 = 0.5 * (e1[:-1] + e1[1:])
    c2 = 0.5 * (e2[:-1] + e2[1:])
    got = dens(c1[:, None], c2[None, :])
    peak = got.max()
    assert np.max(np.abs(got - hist)) < 0.02 * peak


def test_conditional_q_pdf_rejects_bad_input():
    with pytest.raises(ValueError):
        ast.conditional_q_pdf(np.array([1.0, 0, 0]), np.eye(3, dtype=complex),
                              ast.SeriesParams(n_dims=3))
    # v1 orthogonal to the support of a rank-one cov2 gives a11 = 0
    cov2 = np.diag([1.0, 0.0]).astype(complex)
    with pytest.raises(ValueError):
        ast.conditional_q_pdf(np.array([0.0, 1.0], dtype=complex), cov2,
                              ast.SeriesParams())


def test_semianalytic_uniform_case():
    cov = 0.7 * np.eye(2, dtype=complex)
    x, dens = ast.cos2_pdf_semianalytic(cov, cov, ast.SeriesParams(), 200,
                                        np.random.default_rng(8))
    w = x[1] - x[0]
    assert np.sum(np.abs(dens - 1.0)) * w < 0.02


def test_semianalytic_two_cell_cases():
    # boundary users: uniform; opposite-cell users: mass at small cos^2
    cov1, cov2 = two_cell_covariances([0.0, 0.0])
    x, dens = ast.cos2_pdf_semianalytic(cov1, cov2, ast.SeriesParams(), 200,
                                        np.random.default_rng(9))
    w = x[1] - x[0]
    assert np.sum(np.abs(dens - 1.0)) * w < 0.02

    cov1, cov2 = two_cell_covariances([-100.0, 100.0])
    x, dens = ast.cos2_pdf_semianalytic(cov1, cov2, ast.SeriesParams(), 400,
                                        np.random.default_rng(10))
    p_small = float(np.sum(dens[x < 0.1]) * w)
    p_big = float(np.sum(dens[x > 0.9]) * w)
    assert p_small > p_big
    samples = ast.cos2_mc(cov1, cov2, 200_000, np.random.default_rng(11))
    assert np.mean(samples < 0.1) > np.mean(samples > 0.9)


def test_semianalytic_tables_are_normalized_densities():
    cov1, cov2 = two_cell_covariances([50.0, 100.0])
    x, dens = ast.cos2_pdf_semianalytic(cov1, cov2, ast.SeriesParams(), 150,
                                        np.random.default_rng(12))
    assert np.all(dens > -1e-9)
    w = np.gradient(x)
    assert float(np.sum(dens * w)) == pytest.approx(1.0, abs=1e-3)
