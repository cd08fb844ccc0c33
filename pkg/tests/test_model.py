import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meanshrink.model import (
    ErrorDist,
    build_covariance,
    build_mean,
    generate_sample,
    make_instance,
    psd_sqrt,
    replication_rng,
    sigma1_diagonal,
)


def test_sigma1_ordering():
    np.testing.assert_array_equal(np.diag(build_covariance("sigma1", 10)), [1, 1, 3, 3, 3, 3, 10, 10, 10, 10])


def test_sigma1_needs_p_divisible_by_5():
    with pytest.raises(ValueError, match="divisible by 5"):
        sigma1_diagonal(12)


@pytest.mark.parametrize("kind", ["sigma2", "sigma3"])
def test_rho_zero_reduces_to_sigma1(kind):
    np.testing.assert_array_equal(build_covariance(kind, 20, rho=0.0), build_covariance("sigma1", 20))


def test_sigma3_corner_entry():
    S = build_covariance("sigma3", 5, rho=0.5)
    assert S[0, 4] == pytest.approx(0.5 * np.sqrt(10.0), rel=1e-15)


def test_sigma2_entries_by_hand():
    S = build_covariance("sigma2", 5, rho=0.4)
    lam = sigma1_diagonal(5)
    assert S[1, 3] == pytest.approx(0.4**2 * np.sqrt(lam[1] * lam[3]), rel=1e-15)


@pytest.mark.parametrize("rho", [-0.1, 1.0, None])
def test_rho_out_of_range(rho):
    with pytest.raises(ValueError, match="rho"):
        build_covariance("sigma3", 10, rho=rho)


def test_shuffled_sigma1_is_permutation():
    S = build_covariance("sigma1", 20, shuffle_rng=np.random.default_rng(1))
    assert sorted(np.diag(S)) == sorted(sigma1_diagonal(20))
    assert not np.array_equal(np.diag(S), sigma1_diagonal(20))


def test_custom_covariance_validation():
    with pytest.raises(ValueError, match="not symmetric"):
        build_covariance("custom", 2, matrix=[[1, 0.2], [0.3, 1]])
    with pytest.raises(ValueError, match="positive definite"):
        build_covariance("custom", 2, matrix=[[1, 2], [2, 1]])
    with pytest.raises(ValueError, match="unknown covariance"):
        build_covariance("sigma9", 10)


def test_mu2():
    np.testing.assert_array_equal(build_mean("mu2", 4, tau=0.5), [0.5, 0.5, -0.5, -0.5])


def test_mu1_tau_zero():
    np.testing.assert_array_equal(build_mean("mu1", 7, rng=np.random.default_rng(0), tau=0.0), np.zeros(7))


def test_mu1_law_of_large_numbers():
    m = build_mean("mu1", 10_000, rng=np.random.default_rng(3), tau=1.0)
    assert abs(m.mean()) < 4 / np.sqrt(10_000)
    assert abs(m.var() - 1) < 0.1


def test_constant_and_custom_mean():
    np.testing.assert_array_equal(build_mean("constant", 3, c=2.5), [2.5] * 3)
    np.testing.assert_array_equal(build_mean("custom", 2, values=[1, 2]), [1, 2])
    with pytest.raises(ValueError, match="length 3"):
        build_mean("custom", 3, values=[1, 2])


def test_psd_sqrt_examples():
    np.testing.assert_allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-15)
    np.testing.assert_allclose(psd_sqrt(np.eye(3)), np.eye(3), atol=1e-15)


def test_psd_sqrt_reconstructs_sigma3():
    S = build_covariance("sigma3", 5, rho=0.3)[:4, :4]
    H = psd_sqrt(S)
    np.testing.assert_allclose(H, H.T, atol=0)
    assert np.linalg.norm(H @ H - S) / np.linalg.norm(S) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_psd_sqrt_property(p, seed):
    A = np.random.default_rng(seed).standard_normal((p, p + 2))
    S = A @ A.T
    H = psd_sqrt(S)
    assert np.linalg.norm(H @ H - S) <= 1e-8 * max(np.linalg.norm(S), 1.0)
    assert np.linalg.eigvalsh(H).min() > -1e-10 * max(np.abs(S).max(), 1.0)


def test_instance_sqrt_reconstructs():
    S = build_covariance("sigma2", 10, rho=0.6)
    inst = make_instance(np.zeros(10), S, 5)
    assert np.linalg.norm(inst.sigma_half @ inst.sigma_half - S) / np.linalg.norm(S) < 1e-8
    assert np.linalg.eigvalsh(inst.sigma).min() > 0


def test_make_instance_rejects_bad_input():
    with pytest.raises(ValueError, match="sigma p x p"):
        make_instance(np.zeros(3), np.eye(2), 5)
    with pytest.raises(ValueError, match="n must be >= 1"):
        make_instance(np.zeros(2), np.eye(2), 0)
    with pytest.raises(ValueError, match="positive definite"):
        make_instance(np.zeros(2), np.diag([1.0, 0.0]), 3)


def test_error_dist():
    assert ErrorDist().delta == 0
    assert ErrorDist("t", 5).delta == pytest.approx(6.0)
    with pytest.raises(ValueError, match="df > 4"):
        ErrorDist("t", 4)
    with pytest.raises(ValueError, match="unknown innovation"):
        ErrorDist("laplace")


def test_normal_moments():
    inst = make_instance(np.zeros(2), np.eye(2), 100_000)
    X = generate_sample(inst, replication_rng(1, 0))
    assert np.all(np.abs(X.mean(axis=0)) < 4 / np.sqrt(1e5))
    assert np.all(np.abs(X.var(axis=0, ddof=1) - 1) < 0.02)


def test_scaled_t_moments():
    inst = make_instance(np.zeros(1), np.eye(1), 100_000, ErrorDist("t", 5))
    x = generate_sample(inst, replication_rng(2, 0))[:, 0]
    assert abs(x.var() - 1) < 0.05
    # the fourth moment of t5 is infinite-variance, so the sample kurtosis is noisy
    kurt = np.mean(x**4) / np.mean(x**2) ** 2
    assert 6 < kurt < 14


def test_generate_sample_dense_sigma_covariance():
    S = build_covariance("sigma3", 5, rho=0.4)
    inst = make_instance(np.arange(5.0), S, 200_000)
    X = generate_sample(inst, replication_rng(3, 0))
    np.testing.assert_allclose(np.cov(X.T), S, atol=0.15)
    np.testing.assert_allclose(X.mean(axis=0), np.arange(5.0), atol=0.05)


def test_same_seed_bitwise_identical():
    inst = make_instance(np.ones(5), build_covariance("sigma2", 5, rho=0.3), 9)
    a = generate_sample(inst, replication_rng(9, 4))
    b = generate_sample(inst, replication_rng(9, 4))
    assert a.tobytes() == b.tobytes()
    c = generate_sample(inst, replication_rng(9, 5))
    assert not np.array_equal(a, c)


def test_replication_streams_independent():
    a = replication_rng(5, 0, 0).standard_normal(4)
    b = replication_rng(5, 0, 1).standard_normal(4)
    assert not np.array_equal(a, b)


def test_with_mean():
    inst = make_instance(np.zeros(3), np.eye(3), 4)
    moved = inst.with_mean(np.ones(3))
    np.testing.assert_array_equal(moved.mu, np.ones(3))
    assert moved.sigma is inst.sigma and moved.n == 4
