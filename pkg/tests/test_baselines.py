import numpy as np
import pytest
from hypothesis import given, strategies as st

from complier_dml.baselines import (alpha_from_logit, kappa_estimate, kappa_weights,
                                    kappa_weights_direct, overlap_filter, plugin_alpha)
from complier_dml.crossfit import EstimatorConfig, TrimPolicy, estimate
from complier_dml.dataset import IVDataset
from complier_dml.dictionary import DictionarySpec
from complier_dml.errors import ConfigError, DegenerateWeightsError
from complier_dml.moments import TargetSpec
from oracles import PI0, SUPPORT, alpha0, expect, wald_ratio


def test_plugin_alpha_examples():
    assert plugin_alpha(0.5, 1) == 2.0
    assert plugin_alpha(0.25, 0) == pytest.approx(-4 / 3)
    assert plugin_alpha(1e-15, 1, TrimPolicy("censor", 1e-12)) == pytest.approx(1e12)
    assert plugin_alpha(1e-15, 1, TrimPolicy("trim", 1e-12)) is None


def test_trim_policy_bounds():
    with pytest.raises(ConfigError):
        TrimPolicy("trim", 0.5)
    with pytest.raises(ConfigError):
        TrimPolicy("drop")


@given(st.floats(1e-300, 1 - 1e-16), st.integers(0, 1), st.floats(1e-14, 0.4))
def test_censor_shrinks_the_diverging_side(pi, z, eps):
    # clamping only shrinks the weight whose denominator was pushed toward 0
    raw = plugin_alpha(pi, z)
    cen = plugin_alpha(pi, z, TrimPolicy("censor", eps))
    diverging = (z == 1 and pi < eps) or (z == 0 and pi > 1 - eps)
    if diverging:
        assert abs(cen) <= abs(raw)
    elif eps <= pi <= 1 - eps:
        assert cen == raw


def test_censor_can_grow_the_bounded_side():
    # z = 1 with pi above 1 - eps: 1/pi grows when pi is pulled down
    assert abs(plugin_alpha(0.875, 1, TrimPolicy("censor", 0.25))) > abs(plugin_alpha(0.875, 1))


@given(st.floats(-10, 10), st.integers(0, 1))
def test_logit_path_agrees(eta, z):
    pi = 1 / (1 + np.exp(-eta))
    a, _ = alpha_from_logit(np.array([eta]), np.array([z]))
    assert a[0] == pytest.approx(plugin_alpha(pi, z), rel=1e-9)


def test_logit_path_is_exact_in_the_tail():
    a, keep = alpha_from_logit(np.array([-40.0, 40.0]), np.array([1, 0]))
    assert np.allclose(a, [1 + np.exp(40.0), -(1 + np.exp(40.0))], rtol=1e-15)
    _, keep = alpha_from_logit(np.array([-40.0, 0.0]), np.array([1, 1]), TrimPolicy("trim"))
    assert keep.tolist() == [False, True]


@pytest.mark.parametrize("pi", np.round(np.arange(0.1, 1.0, 0.1), 1))
@pytest.mark.parametrize("d,z", [(0, 0), (0, 1), (1, 0), (1, 1)])
def test_kappa_identity(d, z, pi):
    via_alpha = kappa_weights(d, z, pi)
    direct = kappa_weights_direct(d, z, pi)
    for a, b in zip(via_alpha, direct):
        assert abs(a - b) <= 1e-14


def test_kappa_single_observation():
    k0, k1, k = kappa_weights(1, 1, 0.5)
    assert (k0, k1, k) == (0.0, 2.0, 1.0)


def test_kappa_perfect_compliance():
    y = np.array([3.0, 5.0, 1.0, 2.0])
    z = np.array([1, 1, 0, 0.0])
    data = IVDataset(y, z, z, np.zeros((4, 1)))
    late = kappa_estimate(data, np.full(4, 0.5), TargetSpec("late"))[0]
    assert late == pytest.approx(4.0 - 1.5)


def test_kappa_self_normalisation(rng):
    n = 60
    data = IVDataset(rng.normal(size=n), rng.integers(0, 2, n), rng.integers(0, 2, n),
                     rng.uniform(size=(n, 1)))
    pi = rng.uniform(0.2, 0.8, n)
    t = TargetSpec("characteristics", (0,))
    k0, k1, k = kappa_weights(data.d, data.z, pi)
    direct = (k @ data.x[:, 0]) / k.sum()
    assert kappa_estimate(data, pi, t)[0] == pytest.approx(direct)
    assert (3.7 * k @ data.x[:, 0]) / (3.7 * k.sum()) == pytest.approx(direct)


def test_kappa_zero_weights():
    data = IVDataset(np.ones(4), np.ones(4), np.array([1, 0, 1, 0.0]), np.zeros((4, 1)))
    with pytest.raises(DegenerateWeightsError):
        kappa_estimate(data, np.full(4, 0.5), TargetSpec("characteristics", (0,)))


def test_population_kappa_late_equals_wald_ratio(rng):
    # random conditional laws of D and Y on the four-point (Z, X) support
    for _ in range(10):
        pd = {s: rng.uniform() for s in SUPPORT}
        my = {(s, dd): rng.normal() for s in SUPPORT for dd in (0, 1)}
        # monotonicity is not needed for the algebraic identity
        e_dy = lambda z, x: pd[(z, x)] * my[((z, x), 1)]
        e_d1y = lambda z, x: -(1 - pd[(z, x)]) * my[((z, x), 0)]
        e_d = lambda z, x: pd[(z, x)]
        e_y = lambda z, x: e_dy(z, x) - e_d1y(z, x)
        a = lambda z, x: alpha0(z, x)
        late_kappa = (expect(lambda z, x: a(z, x) * e_dy(z, x)) / expect(lambda z, x: a(z, x) * e_d(z, x))
                      - expect(lambda z, x: a(z, x) * e_d1y(z, x))
                      / expect(lambda z, x: a(z, x) * (e_d(z, x) - 1)))
        wald = (expect(lambda z, x: e_y(1, x) - e_y(0, x)) / expect(lambda z, x: e_d(1, x) - e_d(0, x)))
        assert abs(late_kappa - wald) <= 1e-12 * max(1, abs(wald))


def test_no_covariate_plugin_matches_auto(rng):
    n = 2000
    z = rng.integers(0, 2, n).astype(float)
    d = z * (rng.uniform(size=n) < 0.6)
    y = 2 * d + rng.normal(size=n)
    data = IVDataset(y, d, z, np.ones((n, 1)))
    spec = DictionarySpec(k=1, degree=0)
    auto = estimate(data, TargetSpec("late"), spec, EstimatorConfig(seed=1))
    plug = estimate(data, TargetSpec("late"), spec, EstimatorConfig(method="plugin", seed=1))
    assert abs(auto.theta[0] - plug.theta[0]) <= 2 * auto.se[0]
    assert abs(auto.theta[0] - wald_ratio(y, d, z)) <= 2 * auto.se[0]


def test_trim_reports_dropped_rows(rng):
    n = 400
    x = rng.uniform(size=(n, 1))
    z = (rng.uniform(size=n) < 0.5).astype(float)
    d = z * (rng.uniform(size=n) < 0.7)
    data = IVDataset(rng.normal(size=n) + d, d, z, x)
    cfg = EstimatorConfig(method="plugin", trim=TrimPolicy("trim", 0.45), seed=2)
    rep = estimate(data, TargetSpec("late"), DictionarySpec(k=1, degree=2), cfg)
    assert rep.dropped == rep.n - rep.n_used


def test_overlap_filter_only_drops_control_rows():
    data = IVDataset(np.zeros(5), np.zeros(5), np.array([1, 1, 0, 0, 0.0]), np.zeros((5, 1)))
    keep = overlap_filter(data, np.array([0.3, 0.6, 0.1, 0.5, 0.9]))
    assert keep.tolist() == [0, 1, 3]
