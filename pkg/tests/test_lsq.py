import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acc_sysid.errors import InsufficientDataError, InvalidArgumentError, RankDeficientError
from acc_sysid.lsq import (
    BATCH,
    RECURSIVE,
    RECURSIVE_EXP,
    LsConfig,
    Regression,
    RlsState,
    batch_solve,
    build_regression,
    ls_cost,
    rls_from_prior,
    rls_from_warmup,
    rls_step,
    run_ls,
    run_rls,
    smw_inverse,
)
from acc_sysid.model import CthpParams, PlatoonState, ls_coeffs_from_params
from acc_sysid.simulator import LeaderProfile, SimConfig, leader_series, pe_profile, simulate_platoon
from acc_sysid.trajectory import TRACE_COLUMNS, Trajectory

TRUTH = CthpParams(0.1, 0.2, 1.2)


def _ridge_oracle(H, z, sigma, Rinv=None):
    Rinv = np.eye(len(z)) if Rinv is None else Rinv
    return np.linalg.solve(H.T @ Rinv @ H + sigma * np.eye(H.shape[1]), H.T @ Rinv @ z)


def _random_regression(rng, k):
    H = rng.normal(size=(k, 3)) + np.array([25.0, 25.0, 30.0])
    H += rng.normal(size=(k, 3)) * np.array([2.0, 2.0, 5.0])
    z = H @ np.array([0.968, 0.02, 0.01]) + 0.05 * rng.normal(size=k)
    return Regression(H, z)


def test_build_regression_shift_structure():
    t = Trajectory.from_series([1.0, 2, 3, 4, 5], [10.0, 11, 12, 13, 14], [20.0, 21, 22, 23, 24], 0.1)
    reg = build_regression(t)
    assert reg.H.shape == (4, 3) and reg.z.shape == (4,)
    np.testing.assert_array_equal(reg.H[0], [10, 1, 20])
    np.testing.assert_array_equal(reg.z, [11, 12, 13, 14])


def test_build_regression_needs_four_samples():
    t = Trajectory.from_series([1.0, 2, 3], [1.0, 2, 3], [1.0, 2, 3], 0.1)
    with pytest.raises(InsufficientDataError):
        build_regression(t)


def test_regression_shape_check():
    with pytest.raises(InvalidArgumentError):
        Regression(np.ones((4, 3)), np.ones(3))


def test_equilibrium_regressor_is_rank_deficient():
    cfg = SimConfig(TRUTH, 0.1, 20.0, PlatoonState(24.0, 20.0))
    clean, _ = simulate_platoon(cfg, leader_series(LeaderProfile("constant", 20.0), 20.0, 0.1))
    assert np.linalg.matrix_rank(build_regression(clean).H) < 3


def test_exciting_regressor_is_full_rank(pe_clean):
    short = Trajectory(pe_clean.t[:100], pe_clean.u[:100], pe_clean.v[:100], pe_clean.p[:100], 0.1)
    assert np.linalg.matrix_rank(build_regression(short).H) == 3


def test_batch_recovers_coefficients(pe_clean):
    x = batch_solve(build_regression(pe_clean), sigma=1e-12)
    np.testing.assert_allclose(x.as_array(), ls_coeffs_from_params(TRUTH, 0.1).as_array(), atol=1e-6)


def test_batch_limits(rng):
    reg = _random_regression(rng, 50)
    zero = Regression(reg.H, np.zeros(50))
    assert np.all(batch_solve(zero, sigma=1e-3).as_array() == 0.0)
    assert np.linalg.norm(batch_solve(reg, sigma=1e12).as_array()) < 1e-6


def test_batch_matches_normal_equations(rng):
    reg = _random_regression(rng, 40)
    for sigma in (1e-3, 0.5, 0.0):
        np.testing.assert_allclose(batch_solve(reg, sigma=sigma).as_array(),
                                   _ridge_oracle(reg.H, reg.z, sigma), rtol=1e-9)


def test_batch_weighted(rng):
    reg = _random_regression(rng, 30)
    w = rng.uniform(0.5, 2.0, 30)
    np.testing.assert_allclose(batch_solve(reg, R=w, sigma=1e-3).as_array(),
                               _ridge_oracle(reg.H, reg.z, 1e-3, np.diag(1 / w)), rtol=1e-9)
    A = rng.normal(size=(30, 30))
    R = A @ A.T + 30 * np.eye(30)
    np.testing.assert_allclose(batch_solve(reg, R=R, sigma=1e-3).as_array(),
                               _ridge_oracle(reg.H, reg.z, 1e-3, np.linalg.inv(R)), rtol=1e-8)


def test_batch_argument_errors(rng):
    reg = _random_regression(rng, 10)
    with pytest.raises(InvalidArgumentError):
        batch_solve(reg, sigma=-1.0)
    with pytest.raises(InvalidArgumentError):
        batch_solve(reg, R=-np.ones(10))
    with pytest.raises(InvalidArgumentError):
        batch_solve(reg, R=-np.eye(10))
    with pytest.raises(InvalidArgumentError):
        batch_solve(reg, R=np.eye(3))


def test_rank_deficient_without_ridge():
    H = np.column_stack([np.arange(10.0), np.arange(10.0), np.ones(10)])
    with pytest.raises(RankDeficientError):
        batch_solve(Regression(H, np.ones(10)), sigma=0.0)
    batch_solve(Regression(H, np.ones(10)), sigma=1e-6)


def test_batch_is_optimal(rng):
    reg = _random_regression(rng, 60)
    x = batch_solve(reg, sigma=1e-3).as_array()
    c0 = ls_cost(x, reg, sigma=1e-3)
    for _ in range(100):
        d = rng.normal(size=3)
        d *= 1e-3 / np.linalg.norm(d)
        assert ls_cost(x + d, reg, sigma=1e-3) >= c0


def test_rls_zero_regressor_is_noop():
    s = rls_from_prior([0.98, 0.01, 0.01], 1e-3)
    s2 = rls_step(s, np.zeros(3), 30.0)
    np.testing.assert_array_equal(s2.x, s.x)
    np.testing.assert_array_equal(s2.P, s.P)


def test_rls_step_matches_direct_inversion():
    x0 = np.array([0.98, 0.01, 0.01])
    P0 = 1e-3 * np.eye(3)
    h = np.array([30.0, 28.0, 38.0])
    z, Rk = 29.9, 0.7
    s = rls_step(RlsState(x0, P0), h, z, Rk)
    P_ref = np.linalg.inv(np.linalg.inv(P0) + np.outer(h, h) / Rk)
    np.testing.assert_allclose(s.P, P_ref, rtol=1e-10, atol=1e-16)
    np.testing.assert_allclose(s.x, x0 + P_ref @ h * (z - h @ x0) / Rk, rtol=1e-12)


def test_rls_forgetting_scales_covariance():
    h = np.array([1.0, 2.0, 3.0])
    plain = rls_step(rls_from_prior([0, 0, 0], 1.0, 1.0), h, 1.0)
    exp = rls_step(rls_from_prior([0, 0, 0], 1.0, 1.01), h, 1.0)
    np.testing.assert_allclose(exp.P, plain.P / 1.01, rtol=1e-14)


def test_rls_argument_errors():
    s = rls_from_prior([0, 0, 0], 1.0)
    with pytest.raises(InvalidArgumentError):
        rls_step(s, [np.nan, 0, 0], 1.0)
    with pytest.raises(InvalidArgumentError):
        rls_step(s, [1, 0, 0], 1.0, R_k=0.0)
    with pytest.raises(InvalidArgumentError):
        RlsState(np.zeros(3), np.eye(3), mu=0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(10, 200), st.floats(1e-3, 10.0), st.integers(0, 2**31))
def test_recursive_equals_batch(k, sigma, seed):
    reg = _random_regression(np.random.default_rng(seed), k)
    state, hist = run_rls(reg, RlsState(np.zeros(3), np.eye(3) / sigma))
    x_batch = batch_solve(reg, sigma=sigma).as_array()
    np.testing.assert_allclose(state.x, x_batch, rtol=1e-8)
    assert hist.shape == (k, 3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_rls_keeps_symmetry(seed):
    rng = np.random.default_rng(seed)
    s = rls_from_prior(rng.normal(size=3), float(rng.uniform(1e-4, 10)), float(rng.uniform(1.0, 1.05)))
    for _ in range(20):
        s = rls_step(s, rng.normal(size=3) * 10, float(rng.normal()))
        assert np.max(np.abs(s.P - s.P.T)) <= 1e-10


@settings(max_examples=100)
@given(st.integers(0, 2**31))
def test_smw_identity(seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(3, 3))
    A = M @ M.T + np.eye(3)
    B = np.array([[rng.uniform(0.1, 10.0)]])
    C = rng.normal(size=(3, 1))
    np.testing.assert_allclose(smw_inverse(A, B, C), np.linalg.inv(A + C @ B @ C.T), atol=1e-10, rtol=0)


def test_warmup_continuation_equals_batch(pe_clean):
    reg = build_regression(pe_clean)
    state, _ = run_rls(reg, rls_from_warmup(reg, 10, 1e-12), 10)
    x_batch = batch_solve(reg, sigma=1e-12).as_array()
    np.testing.assert_allclose(state.x, x_batch, rtol=1e-8)


def test_warmup_rows_validated(pe_clean):
    with pytest.raises(InvalidArgumentError):
        rls_from_warmup(build_regression(pe_clean), 0, 1e-3)


def test_run_ls_batch_recovery(pe_clean):
    r = run_ls(pe_clean, BATCH, LsConfig(sigma=1e-12))
    np.testing.assert_allclose(r.params.as_array(), TRUTH.as_array(), rtol=1e-4)
    assert r.mae_velocity < 1e-3 and r.mae_gap < 1e-3


@pytest.mark.parametrize("mode", [RECURSIVE, RECURSIVE_EXP])
def test_run_ls_recursive_noise_free(pe_clean, mode):
    r = run_ls(pe_clean, mode, LsConfig(sigma=1e-3, init="warmup"))
    assert r.mae_velocity < 1e-3
    assert r.coeff_history.shape == (len(pe_clean) - 1 - 10, 3)


def test_run_ls_default_prior_runs(pe_clean):
    for mode in (BATCH, RECURSIVE, RECURSIVE_EXP):
        r = run_ls(pe_clean, mode)
        assert np.all(np.isfinite(r.params.as_array()))
        assert r.p_hat.shape == pe_clean.p.shape


def test_run_ls_rejects_unknown_mode(pe_clean):
    with pytest.raises(InvalidArgumentError):
        run_ls(pe_clean, "qr")
    with pytest.raises(InvalidArgumentError):
        LsConfig(init="zeros")


def test_ls_trace_csv(pe_clean, tmp_path):
    r = run_ls(pe_clean, BATCH)
    r.to_csv(pe_clean, tmp_path / "ls.csv")
    lines = (tmp_path / "ls.csv").read_text().splitlines()
    assert lines[0].split(",") == list(TRACE_COLUMNS)
    assert len(lines) == len(pe_clean) + 1


def test_replay_starts_from_first_measurement(pe_clean):
    r = run_ls(pe_clean, BATCH)
    assert r.p_hat[0] == pe_clean.p[0] and r.v_hat[0] == pe_clean.v[0]


def test_pe_profile_default_base():
    assert pe_profile().base == 25.0
