import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from meanshrink.quadform import make_q
from meanshrink.ustats import YStats, compute_y, shrinkage_coefficients

from oracles import random_instance, y_double_loop


def q_of(kind, A):
    p = A.shape[0]
    if kind == "identity":
        return make_q("identity", p), np.eye(p)
    if kind == "diagonal":
        return make_q("diagonal", p, np.diag(A)), np.diag(np.diag(A))
    return make_q("dense", p, A), A


def test_all_e_rows(backend):
    for n, p in [(2, 1), (3, 4), (7, 10)]:
        y = compute_y(np.ones((n, p)), make_q("identity", p))
        assert (y.y1, y.y2, y.y3, y.y4) == pytest.approx((n, 0, n, 1), abs=1e-12)


def test_hand_example_matches_double_loop(backend):
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    y = compute_y(X, make_q("identity", 2))
    ref = y_double_loop(X, np.eye(2))
    np.testing.assert_allclose([y.y1, y.y2, y.y3, y.y4], ref, rtol=1e-12, atol=1e-12)
    # by hand: sum_{i!=j} x_i'x_j = 2(0 + 1 + 1) = 4
    assert y.y1 == pytest.approx(4 / (2 * 2))


@pytest.mark.parametrize("kind", ["identity", "diagonal", "dense"])
def test_matches_double_loop(kind, backend):
    rng = np.random.default_rng(11)
    for _ in range(20):
        n, p = rng.integers(2, 8, endpoint=True), rng.integers(1, 6, endpoint=True)
        mu, sigma, A = random_instance(rng, p)
        X = rng.multivariate_normal(mu, sigma, size=n)
        Q, Aq = q_of(kind, A)
        y = compute_y(X, Q)
        ref = y_double_loop(X, Aq)
        scale = max(1.0, *map(abs, ref))
        np.testing.assert_allclose([y.y1, y.y2, y.y3, y.y4], ref, rtol=0, atol=1e-10 * scale)
        assert y.num == pytest.approx(ref[0] - ref[2], abs=1e-10 * scale)
        assert y.den == pytest.approx(ref[0] + ref[1] - ref[2], abs=1e-10 * scale)


@pytest.mark.parametrize("c", [3.7, -1.2, 1e4])
def test_shift_invariance(c, backend):
    rng = np.random.default_rng(5)
    X = rng.standard_normal((9, 30))
    Q = make_q("diagonal", 30, rng.uniform(0.5, 2, 30))
    a, b = compute_y(X, Q), compute_y(X + c, Q)
    assert b.num == pytest.approx(a.num, rel=1e-10, abs=1e-10)
    assert b.den == pytest.approx(a.den, rel=1e-10)
    assert b.y2 == pytest.approx(a.y2, rel=1e-10)
    assert b.y4 - a.y4 == pytest.approx(c, rel=1e-12)


def test_scale_covariance(backend):
    rng = np.random.default_rng(6)
    X = rng.standard_normal((6, 12))
    Q = make_q("identity", 12)
    a, b = compute_y(X, Q), compute_y(2.5 * X, Q)
    np.testing.assert_allclose([b.y1, b.y2, b.y3, b.num, b.den], 6.25 * np.array([a.y1, a.y2, a.y3, a.num, a.den]),
                               rtol=1e-12)
    assert b.y4 == pytest.approx(2.5 * a.y4, rel=1e-12)


def test_input_validation():
    Q = make_q("identity", 3)
    with pytest.raises(ValueError, match="at least 2"):
        compute_y(np.ones((1, 3)), Q)
    with pytest.raises(ValueError, match="p=4"):
        compute_y(np.ones((3, 4)), Q)
    with pytest.raises(ValueError, match="2-D"):
        compute_y(np.ones(3), Q)


def test_coefficients_arithmetic():
    c = shrinkage_coefficients(YStats(2, 1, 0, 0.5))
    assert (c.alpha, c.beta, c.degenerate) == (pytest.approx(2 / 3), pytest.approx(1 / 6), False)


def test_negative_alpha_raw_and_clamped():
    y = YStats(0.5, 1, 0.9, 1)
    assert shrinkage_coefficients(y, "raw").alpha == pytest.approx(-2 / 3)
    c = shrinkage_coefficients(y, "clamped")
    assert (c.alpha, c.beta) == (0.0, 1.0)


def test_degenerate_all_e(backend):
    y = compute_y(np.ones((4, 3)), make_q("identity", 3))
    c = shrinkage_coefficients(y)
    assert c.degenerate and c.alpha == 0 and c.beta == pytest.approx(1.0)


def test_degenerate_flag_iff_below_tolerance():
    assert shrinkage_coefficients(YStats(1.0, 0.0, 1.0 - 1e-13, 2.0)).degenerate
    assert not shrinkage_coefficients(YStats(1.0, 0.0, 1.0 - 1e-9, 2.0)).degenerate
    assert shrinkage_coefficients(YStats(1.0, 0.0, 1.0 - 1e-9, 2.0), tol=1e-6).degenerate


def test_unknown_policy_and_nonfinite():
    with pytest.raises(ValueError, match="policy"):
        shrinkage_coefficients(YStats(1, 1, 0, 0), "shrunk")
    with pytest.raises(ValueError, match="finite"):
        shrinkage_coefficients(YStats(np.nan, 1, 0, 0))


def test_unbiasedness_monte_carlo():
    rng = np.random.default_rng(21)
    n, p, R = 6, 5, 6000
    mu, sigma, A = random_instance(rng, p)
    Q = make_q("dense", p, A)
    L = np.linalg.cholesky(sigma)
    ys = np.array([[*compute_y(rng.standard_normal((n, p)) @ L.T + mu, Q).as_dict().values()] for _ in range(R)])
    e = np.ones(p)
    eqe = e @ A @ e
    expect = [n / p * mu @ A @ mu, np.trace(sigma @ A) / p, n * (mu @ A @ e) ** 2 / (p * eqe), (e @ A @ mu) / eqe]
    se = ys.std(axis=0, ddof=1) / np.sqrt(R)
    assert np.all(np.abs(ys.mean(axis=0) - expect) < 4 * se)


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(2, 6), st.integers(1, 5)), elements=st.floats(-50, 50)),
    st.floats(-100, 100),
)
def test_property_double_loop_and_shift(X, c):
    Q = make_q("identity", X.shape[1])
    y = compute_y(X, Q)
    ref = y_double_loop(X, np.eye(X.shape[1]))
    scale = max(1.0, float(np.abs(X).max()) ** 2 * X.shape[0])
    np.testing.assert_allclose([y.y1, y.y2, y.y3, y.y4], ref, atol=1e-9 * scale)
    assert y.y2 > -1e-9 * scale
    ys = compute_y(X + c, Q)
    assert ys.num == pytest.approx(y.num, abs=1e-9 * scale)
    assert ys.y2 == pytest.approx(y.y2, abs=1e-9 * scale)


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(0, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_property_clamped_in_unit_interval(y1, y2, y3, y4):
    c = shrinkage_coefficients(YStats(y1, y2, y3, y4), "clamped")
    assert 0.0 <= c.alpha <= 1.0
    if not c.degenerate:
        assert c.beta == pytest.approx((1 - c.alpha) * y4)
