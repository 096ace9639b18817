import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from complier_dml.errors import ConfigError, ShapeError, WeakFirstStageError
from complier_dml.moments import (TargetSpec, a_matrix, build_v, eta_values, monotone_cdf, psi,
                                  psi_at, solve_theta, v_matrix)


def test_target_validation():
    with pytest.raises(ConfigError):
        TargetSpec("cdf", grid=(1.0, 0.0))
    with pytest.raises(ConfigError):
        TargetSpec("cdf", grid=())
    with pytest.raises(ConfigError):
        TargetSpec("characteristics")
    with pytest.raises(ConfigError):
        TargetSpec("ate")


def test_build_v_examples():
    assert build_v(TargetSpec("late"), 2.5, 1).tolist() == [2.5, 1.0]
    t = TargetSpec("cdf", grid=(0.0, 1.0))
    v = build_v(t, 0.5, 0)
    assert v[0].tolist() == [0, 0, 0] and v[1].tolist() == [-1, 0, 0]
    assert build_v(TargetSpec("characteristics", (1,)), 0.0, 1, [3.0, 7.0]).tolist() == [7.0, 1.0]


def test_v_matrix_interleaves_grid():
    t = TargetSpec("cdf", grid=(0.0, 1.0))
    V = v_matrix(t, [0.5, -1.0], [1, 0], None)
    assert V.tolist() == [[0, 0, -0.0, 1, 1], [-1, 0, -1, 0, 0]]
    assert t.labels() == ["beta@0", "delta@0", "beta@1", "delta@1"]


def test_a_matrix():
    assert a_matrix(TargetSpec("late"), [2.0]).tolist() == [[1, -2]]
    A = a_matrix(TargetSpec("cdf", grid=(0.0,)), [0.3, 0.6])
    assert np.allclose(A, [[1, 0, -0.3], [0, 1, -0.6]])
    with pytest.raises(ShapeError):
        a_matrix(TargetSpec("late"), [1.0, 2.0])


def test_psi_brute_force(rng):
    t = TargetSpec("cdf", grid=(-1.0, 0.0, 1.0))
    n, w = 7, t.width
    V, g1, g0, gz = (rng.normal(size=(n, w)) for _ in range(4))
    alpha = rng.normal(size=n)
    theta = rng.uniform(size=t.dim)
    got = psi(V, g1, g0, gz, alpha, t, theta)
    for i in range(n):
        for k in range(t.dim):
            direct = (g1[i, k] - g0[i, k] + alpha[i] * (V[i, k] - gz[i, k])
                      - theta[k] * (g1[i, -1] - g0[i, -1] + alpha[i] * (V[i, -1] - gz[i, -1])))
            assert got[i, k] == pytest.approx(direct, abs=1e-12)
    eta = eta_values(V, g1, g0, gz, alpha)
    assert np.allclose(psi_at(eta, theta), got, atol=1e-12)


def test_solve_theta_zeroes_the_mean_moment(rng):
    eta = rng.normal(size=(50, 3)) + np.array([0, 0, 1.0])
    theta = solve_theta(eta.mean(axis=0))
    assert np.allclose(psi_at(eta, theta).mean(axis=0), 0, atol=1e-12)


def test_weak_first_stage():
    with pytest.raises(WeakFirstStageError):
        solve_theta([1.0, 1e-12])
    assert solve_theta([1.0, 1e-9])[0] == pytest.approx(1e9)


@given(arrays(float, 8, elements=st.floats(-0.5, 1.5)))
def test_monotone_rearrangement(raw):
    t = TargetSpec("cdf", grid=(0.0, 1.0, 2.0, 3.0))
    out = monotone_cdf(raw, t)
    for idx in (t.beta_index(), t.delta_index()):
        assert np.all(np.diff(out[idx]) >= 0)
        assert np.all((out[idx] >= 0) & (out[idx] <= 1))
