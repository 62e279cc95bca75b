import math

import numpy as np
import pytest

import hsic_psi


def test_gram_and_estimators_agree():
    rng = np.random.default_rng(0)
    x = rng.normal(size=30)
    y = x**2 + 0.1 * rng.normal(size=30)
    K = hsic_psi.gram(x)
    L = hsic_psi.gram(y)
    assert K.shape == (30, 30)
    assert np.allclose(np.diag(K), 1.0)
    H, summands = hsic_psi.estimate_H(x[:, None], y, "unbiased")
    assert H[0] == pytest.approx(hsic_psi.hsic_unbiased(K, L), abs=1e-12)
    assert summands.size == 0
    H_block, summands = hsic_psi.estimate_H(x[:, None], y, "block:10")
    assert summands.shape == (3, 1)
    assert H_block[0] == pytest.approx(summands.mean(), abs=1e-12)


def test_solve_identity_is_soft_threshold():
    H = np.array([0.8, -0.2, 0.3])
    beta, kkt = hsic_psi.solve(H, np.eye(3), 0.25)
    assert np.allclose(beta, [0.55, 0.0, 0.05], atol=1e-10)
    assert kkt <= 1e-10
    assert hsic_psi.lambda_max(H) == pytest.approx(0.8)


def test_truncated_inference():
    assert hsic_psi.trunc_gauss_cdf(0.0, 0.0, 1.0, -math.inf, math.inf) == pytest.approx(0.5)
    p = hsic_psi.p_value(1.96, 1.0, -math.inf, math.inf, "two")
    assert p == pytest.approx(0.05, abs=1e-3)
    lo, hi = hsic_psi.confidence_interval(0.0, 1.0, -math.inf, math.inf, 0.05, "two")
    assert lo == pytest.approx(-1.959964, abs=1e-5)
    assert hi == pytest.approx(1.959964, abs=1e-5)


def test_events_and_truncation_points():
    M = np.eye(2)
    H = np.array([1.0, 0.1])
    w = np.ones(2)
    beta, _ = hsic_psi.solve(H, M, 0.5, w)
    A, b = hsic_psi.event_full_model(M, [0], 0.5, w)
    assert np.all(A @ H <= b + 1e-10)
    t = hsic_psi.truncation_points(A, b, np.array([1.0, 0.0]), np.eye(2), H)
    assert t["lower"] == pytest.approx(0.5)
    assert math.isinf(t["upper"])
    A1, b1 = hsic_psi.event_single_feature(M, beta, 0, 0.5, w)
    assert A1.shape == (1, 2)


def test_errors_are_raised_as_value_errors():
    with pytest.raises(hsic_psi.HsicPsiError, match="NotSelected"):
        hsic_psi.event_single_feature(np.eye(2), np.zeros(2), 0, 0.5, np.ones(2))
    with pytest.raises(ValueError):
        hsic_psi.gram(np.ones(5), "nonsense")


def test_pipeline_on_synthetic_data():
    X, y = hsic_psi.simulate("M3", n=300, theta=2.0, seed=5)
    assert X.shape == (300, 50)
    report = hsic_psi.run_psi(X, y, seed=11, side="one")
    again = hsic_psi.run_psi(X, y, seed=11, side="one")
    assert report == again
    assert report["rows"] == 300
    assert report["features"] == 50
    assert 0 in report["selected"]
