import numpy as np
import pytest
from scipy import integrate, stats

from asha.nn import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    DiagGaussian,
    gaussian_head,
    gaussian_log_prob,
    gaussian_sample,
    kl_diag_gaussians,
    kl_to_standard_normal,
    seeded_rng,
    tanh_squash,
)


def test_degenerate_variance_sample_is_mean():
    g = DiagGaussian(np.array([0.3, -0.7]), np.full(2, -20.0))
    sample, _ = gaussian_sample(g, seeded_rng(0))
    np.testing.assert_allclose(sample, g.mean, atol=1e-7)


def test_monte_carlo_mean_matches():
    g = DiagGaussian(np.array([1.0, -2.0, 0.5]), np.log(np.array([0.5, 1.0, 2.0])))
    rng = seeded_rng(123)
    n = 100_000
    draws = np.stack([gaussian_sample(g, rng)[0] for _ in range(200)])
    draws = np.concatenate([draws, g.mean + g.std * rng.standard_normal((n - 200, 3))])
    err = np.abs(draws.mean(axis=0) - g.mean)
    assert np.all(err <= 3.0 * g.std / np.sqrt(n))


def test_same_seed_identical_samples():
    g = DiagGaussian(np.zeros(4), np.zeros(4))
    s1, n1 = gaussian_sample(g, seeded_rng(99))
    s2, n2 = gaussian_sample(g, seeded_rng(99))
    assert np.array_equal(s1, s2) and np.array_equal(n1, n2)


def test_pathwise_identity_sample_shifts_with_mean():
    g = DiagGaussian(np.zeros(3), np.zeros(3))
    rng = seeded_rng(5)
    sample, noise = gaussian_sample(g, rng)
    shifted = DiagGaussian(g.mean + 0.25, g.log_std)
    np.testing.assert_allclose(shifted.mean + shifted.std * noise, sample + 0.25, rtol=1e-6)


def test_kl_identical_is_exactly_zero():
    p = DiagGaussian(np.array([0.4, -1.2]), np.array([0.1, -0.3]))
    assert kl_diag_gaussians(p, p) == 0.0


def test_kl_unit_shift_is_half():
    p = DiagGaussian(np.array([1.0]), np.array([0.0]))
    q = DiagGaussian(np.array([0.0]), np.array([0.0]))
    assert kl_diag_gaussians(p, q) == pytest.approx(0.5, abs=1e-7)
    # cross-check against a large Monte-Carlo estimate using scipy densities
    rng = seeded_rng(17)
    x = rng.normal(1.0, 1.0, size=1_000_000)
    mc = np.mean(stats.norm.logpdf(x, 1.0, 1.0) - stats.norm.logpdf(x, 0.0, 1.0))
    assert abs(mc - 0.5) < 0.01


def test_kl_closed_form_vs_monte_carlo_random_pairs():
    rng = seeded_rng(31)
    for _ in range(5):
        p = DiagGaussian(rng.normal(size=3), rng.uniform(-0.5, 0.3, size=3))
        q = DiagGaussian(rng.normal(size=3), rng.uniform(-0.5, 0.3, size=3))
        closed = kl_diag_gaussians(p, q)
        x = p.mean + p.std * rng.standard_normal((400_000, 3))
        mc = np.mean(
            stats.norm.logpdf(x, p.mean, p.std).sum(axis=1)
            - stats.norm.logpdf(x, q.mean, q.std).sum(axis=1)
        )
        assert abs(closed - mc) < 0.01


def test_kl_nonnegative_on_random_pairs():
    rng = seeded_rng(77)
    for _ in range(1000):
        d = int(rng.integers(1, 6))
        p = DiagGaussian(rng.normal(size=d), rng.uniform(-2, 1, size=d))
        q = DiagGaussian(rng.normal(size=d), rng.uniform(-2, 1, size=d))
        assert kl_diag_gaussians(p, q) >= 0.0
        assert kl_diag_gaussians(p, p) == 0.0


def test_kl_to_standard_normal_agrees_with_general_form():
    rng = seeded_rng(4)
    p = DiagGaussian(rng.normal(size=(6, 3)), rng.uniform(-1, 0.5, size=(6, 3)))
    q = DiagGaussian(np.zeros(3), np.zeros(3))
    want = np.array([kl_diag_gaussians(DiagGaussian(p.mean[i], p.log_std[i]), q) for i in range(6)])
    np.testing.assert_allclose(kl_to_standard_normal(p), want, rtol=1e-6)


def test_kl_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        kl_diag_gaussians(DiagGaussian(np.zeros(2), np.zeros(2)), DiagGaussian(np.zeros(3), np.zeros(3)))


def test_head_split_and_clamp():
    raw = np.array([0.5, -0.5, -30.0, 5.0])
    g = gaussian_head(raw)
    np.testing.assert_allclose(g.mean, [0.5, -0.5])
    assert g.log_std[0] == LOG_STD_MIN
    assert g.log_std[1] == LOG_STD_MAX


def test_tanh_squash_at_zero():
    action, corrected = tanh_squash(np.zeros(3), 0.0)
    np.testing.assert_allclose(action, np.zeros(3))
    assert corrected == pytest.approx(-3 * np.log(1 + 1e-6), abs=1e-9)


def test_tanh_squash_saturates():
    action, _ = tanh_squash(np.array([50.0, -50.0]), 0.0)
    np.testing.assert_allclose(action, [1.0, -1.0], atol=1e-6)
    assert np.all(np.abs(tanh_squash(np.array([3.0, -2.0]), 0.0)[0]) < 1.0)


def test_tanh_density_integrates_to_one():
    # quadrature oracle: corrected density over raw space, times |da/dr|, integrates to 1
    g = DiagGaussian(np.array([0.4]), np.array([-0.2]))

    def density(r):
        raw_lp = gaussian_log_prob(g, np.array([r]))
        _, lp = tanh_squash(np.array([r]), raw_lp)
        return np.exp(lp) * (1.0 - np.tanh(r) ** 2)

    total, _ = integrate.quad(density, -12, 12, limit=200)
    assert total == pytest.approx(1.0, abs=1e-4)


def test_tanh_density_matches_numerical_change_of_variables():
    g = DiagGaussian(np.array([0.1]), np.array([0.0]))
    for a in [-0.9, -0.3, 0.0, 0.5, 0.8]:
        r = np.arctanh(a)
        raw_lp = gaussian_log_prob(g, np.array([r]))
        _, lp = tanh_squash(np.array([r]), raw_lp)
        oracle = stats.norm.logpdf(r, 0.1, 1.0) - np.log(1 - a**2)
        assert lp == pytest.approx(oracle, abs=1e-5)
