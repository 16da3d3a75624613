import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid

from gaitrehab.kalman import (
    MEASUREMENT_MATRIX, KalmanConfig, integrate_rate, kf_joint_angle, transition_matrix,
)


def matrix_kf(theta_g, theta_a, ts, cfg):
    """Textbook matrix form of the error-state filter with feedback."""
    F, H = transition_matrix(ts), MEASUREMENT_MATRIX
    Q, R, P = cfg.Q, np.array([[cfg.r]]), cfg.P0.copy()
    angle, b = theta_g[0], 0.0
    out, bias, covs = [], [], []
    for i in range(len(theta_g)):
        if i:
            angle += theta_g[i] - theta_g[i - 1] - b * ts
            P = F @ P @ F.T + Q
        z = angle - theta_a[i]
        S = H @ P @ H.T + R
        K = P @ H.T / S
        x = (K * z).ravel()
        IKH = np.eye(2) - K @ H
        P = IKH @ P @ IKH.T + K @ R @ K.T
        angle -= x[0]
        b += x[1]
        out.append(angle)
        bias.append(b)
        covs.append(P.copy())
    return np.array(out), np.array(bias), np.array(covs)


def drift_case(n=6000, ts=0.01, bias=0.5, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(n) * ts
    truth = 20 * np.sin(2 * np.pi * 0.9 * t) + 5 * np.sin(2 * np.pi * 2.1 * t)
    rate = np.gradient(truth, ts) + bias + rng.normal(0, 0.2, n)
    theta_g = integrate_rate(rate, ts, truth[0])
    theta_a = truth + rng.normal(0, 0.7, n)
    return truth, theta_g, theta_a


@pytest.mark.parametrize("cfg", [KalmanConfig(), KalmanConfig(q_angle=1e-3, r=2.0, p0_bias=1.0)])
def test_matches_matrix_oracle(cfg):
    _, g, a = drift_case(1500)
    res = kf_joint_angle(g, a, 0.01, cfg)
    angle, bias, covs = matrix_kf(g, a, 0.01, cfg)
    np.testing.assert_allclose(res.corrected, angle, rtol=1e-10, atol=1e-9)
    np.testing.assert_allclose(res.bias, bias, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(res.P, covs, rtol=1e-9, atol=1e-15)


def test_covariance_symmetric_positive():
    _, g, a = drift_case(3000)
    P = kf_joint_angle(g, a, 0.01).P
    np.testing.assert_array_equal(P[:, 0, 1], P[:, 1, 0])
    assert np.all(np.linalg.eigvalsh(P) > 0)


def test_removes_drift():
    truth, g, a = drift_case()
    res = kf_joint_angle(g, a, 0.01)
    assert abs(g[-1] - truth[-1]) > 25
    assert np.sqrt(np.mean((res.corrected - truth) ** 2)) < 2.0
    assert res.bias[3000:].mean() == pytest.approx(0.5, rel=0.1)


def test_without_covariance():
    _, g, a = drift_case(200)
    full, lean = kf_joint_angle(g, a, 0.01), kf_joint_angle(g, a, 0.01, keep_covariance=False)
    np.testing.assert_array_equal(full.corrected, lean.corrected)
    assert lean.P.shape == (0, 2, 2)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        kf_joint_angle(np.zeros(5), np.zeros(6), 0.01)


def test_integrate_rate_matches_scipy(rng):
    r = rng.normal(size=400)
    np.testing.assert_allclose(integrate_rate(r, 0.01, 3.0), 3.0 + cumulative_trapezoid(r, dx=0.01, initial=0),
                               atol=1e-12)
    assert integrate_rate([], 0.01).shape == (0,)
