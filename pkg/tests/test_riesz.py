import numpy as np
import pytest
from hypothesis import given, strategies as st

from complier_dml.dictionary import DictionarySpec, simulation_spec, expand, instrument_contrast
from complier_dml.errors import ConfigError, ShapeError
from complier_dml.riesz import (RieszHyper, compute_moments, fit_balancing_weight,
                                fit_balancing_weight_arrays, predict_alpha, split_balance,
                                theoretical_lambda)
from complier_dml.simlab import StepPropensityDesign, generate


def test_moments_hand_example():
    G, M = compute_moments(np.array([[1.0, 0], [1, 1]]), np.array([[0.0, 1], [0, 1]]))
    assert np.allclose(G, [[1, 0.5], [0.5, 0.5]])
    assert np.allclose(M, [0, 1])
    G, M = compute_moments(np.array([[2.0]]), np.array([[3.0]]))
    assert G[0, 0] == 4 and M[0] == 3


def test_moments_brute_force(rng):
    B = rng.normal(size=(30, 4))
    D = rng.normal(size=(30, 4))
    G, M = compute_moments(B, D)
    naive = np.zeros((4, 4))
    for i in range(30):
        for a in range(4):
            for b in range(4):
                naive[a, b] += B[i, a] * B[i, b] / 30
    assert np.allclose(G, naive, atol=1e-12)
    assert np.allclose(M, D.sum(axis=0) / 30, atol=1e-12)


def test_moments_shape_mismatch():
    with pytest.raises(ShapeError):
        compute_moments(np.ones((3, 2)), np.ones((3, 3)))


def test_theoretical_lambda_value():
    assert theoretical_lambda(800, 10) == pytest.approx(2.5758293035489 / np.sqrt(800), abs=1e-12)
    assert theoretical_lambda(800, 10, c1=2.0) == pytest.approx(2 * theoretical_lambda(800, 10))
    assert theoretical_lambda(100, 1, c2=1.0) == 0.0


def test_theoretical_lambda_domain():
    with pytest.raises(ConfigError):
        theoretical_lambda(1, 10)
    with pytest.raises(ConfigError):
        theoretical_lambda(100, 1, c2=3.0)


def test_zero_lambda_is_rejected_by_the_loop():
    # p = 1 and c2 = 1 put the quantile at the median, so lambda is 0
    B = np.ones((100, 1))
    with pytest.raises(ConfigError):
        fit_balancing_weight_arrays(B, B, (0,), RieszHyper(c2=1.0))


def test_hyper_must_be_positive():
    with pytest.raises(ConfigError):
        RieszHyper(c1=0.0)


def test_fold_guard(rng):
    spec = simulation_spec().fit(rng.uniform(size=(15, 1)))
    with pytest.raises(ConfigError):
        fit_balancing_weight(spec, rng.integers(0, 2, 15), rng.uniform(size=(15, 1)))


def test_balance_bound_on_design():
    data = generate(StepPropensityDesign(1000), 3)
    spec = simulation_spec().fit(data.x)
    fit = fit_balancing_weight(spec, data.z, data.x)
    assert fit.lambda_used > 0
    assert fit.converged
    assert fit.balance_sup_norm <= fit.effective_lambda + 1e-8
    assert fit.d_norm.shape == (10,)


def test_predict_alpha_projection():
    spec = DictionarySpec(k=1, degree=2, standardize=False)
    fit = fit_balancing_weight_arrays(spec.basis([0, 1, 1, 0] * 10, np.arange(40.0) / 40),
                                      spec.contrast(np.arange(40.0) / 40), fixed_lambda=0.1)
    for k in range(spec.p):
        fit.coef[:] = 0
        fit.coef[k] = 1
        assert predict_alpha(fit, spec, 1, [0.5]) == expand(spec, 1, [0.5])[k]
    fit.coef[:] = np.arange(spec.p)
    diff = predict_alpha(fit, spec, 1, [0.3]) - predict_alpha(fit, spec, 0, [0.3])
    assert diff == pytest.approx(fit.rho @ instrument_contrast(spec, [0.3]))


def test_fixed_lambda_zero_is_least_squares(rng):
    B = np.column_stack([np.ones(60), rng.integers(0, 2, 60), rng.normal(size=60)])
    D = np.tile([0.0, 1.0, 0.0], (60, 1))
    fit = fit_balancing_weight_arrays(B, D, fixed_lambda=0.0)
    G, M = compute_moments(B, D)
    assert np.allclose(fit.rho, np.linalg.solve(G, M), atol=1e-7)


@given(st.integers(0, 1000))
def test_split_layout_balance(seed):
    data = generate(StepPropensityDesign(400), seed)
    spec = DictionarySpec(k=1, degree=3, layout="split").fit(data.x)
    fit = fit_balancing_weight(spec, data.z, data.x)
    sup1, sup0 = split_balance(spec, data.z, data.x, fit.rho)
    if fit.converged:
        assert max(sup1, sup0) <= fit.effective_lambda + 1e-8
        assert max(sup1, sup0) == pytest.approx(fit.balance_sup_norm, abs=1e-12)
