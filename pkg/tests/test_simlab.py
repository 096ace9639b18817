import numpy as np
import pytest

from complier_dml.errors import ConfigError
from complier_dml.simlab import (BETA_GRID, DELTA_GRID, StepPropensityDesign, MCConfig, generate,
                                 order_statistic, run_monte_carlo, truth_oracle)
from oracles import gauss_legendre_truth


def test_propensity_frequency_at_low_x():
    data = generate(StepPropensityDesign(2_000_000), 0)
    low = data.x[:, 0] <= 0.5
    assert StepPropensityDesign.propensity(0.3) == 0.05
    freq = data.z[low].mean()
    assert 0.0493 <= freq <= 0.0507


def test_control_rows_are_untreated():
    data = generate(StepPropensityDesign(5000), 1)
    assert not data.d[data.z == 0].any()


def test_outcome_mean_among_instrumented():
    # E[2X^2 | Z=1] = 2 (0.05/24 + 0.95*7/24) / 0.5 = 67/60
    data = generate(StepPropensityDesign(200_000), 2)
    y1 = data.y[data.z == 1]
    assert abs(y1.mean() - 67 / 60) <= 3 * y1.std() / np.sqrt(y1.size)


def test_generate_is_seeded():
    a, b = generate(StepPropensityDesign(50), 7), generate(StepPropensityDesign(50), 7)
    assert np.array_equal(a.y, b.y) and np.array_equal(a.z, b.z)


def test_design_size_guard():
    with pytest.raises(ConfigError):
        StepPropensityDesign(5)


def test_truth_at_zero():
    beta, delta = truth_oracle([0.0])
    assert beta[0] == pytest.approx(0.618, abs=5e-4)
    assert delta[0] == pytest.approx(0.195, abs=5e-4)


def test_truth_agrees_with_second_rule():
    grid = np.arange(-3, 6, dtype=float)
    b1, d1 = truth_oracle(grid)
    b2, d2 = gauss_legendre_truth(grid)
    assert np.allclose(b1, b2, atol=1e-9) and np.allclose(d1, d2, atol=1e-9)


def test_truth_limits():
    b, d = truth_oracle([8.0, -8.0])
    assert abs(b[0] - 1) < 1e-6 and abs(d[0] - 1) < 1e-6
    assert abs(b[1]) < 1e-6 and abs(d[1]) < 1e-6


@pytest.mark.parametrize("values,prob,out", [([3, 1, 2], 0.5, 2), ([4, 1, 3, 2], 0.5, 2),
                                             (list(range(1, 11)), 0.1, 1), (list(range(1, 11)), 0.9, 9)])
def test_order_statistic(values, prob, out):
    assert order_statistic(values, prob) == out


def test_mc_shape_and_determinism():
    cfg = MCConfig(reps=4, n=300, methods=("auto", "plugin"), seed=3)
    a = run_monte_carlo(cfg)
    b = run_monte_carlo(MCConfig(reps=4, n=300, methods=("auto", "plugin"), seed=3, threads=3))
    assert a.to_csv() == b.to_csv()
    lines = a.to_csv().splitlines()
    assert lines[0] == "method,parameter,y,median,q10,q90,failures"
    assert len(lines) == 1 + 2 * (len(BETA_GRID) + len(DELTA_GRID))
    for r in a.rows:
        assert r["q10"] <= r["median"] <= r["q90"]


def test_mc_counts_failures(monkeypatch):
    from complier_dml import simlab
    from complier_dml.errors import WeakFirstStageError

    real = simlab.estimate
    calls = {"n": 0}

    def flaky(*args, **kw):
        calls["n"] += 1
        if calls["n"] == 2:
            raise WeakFirstStageError("forced")
        return real(*args, **kw)

    monkeypatch.setattr(simlab, "estimate", flaky)
    summary = run_monte_carlo(MCConfig(reps=3, n=300, seed=1))
    assert summary.failures["auto"] == 1
    assert summary.estimates["auto"]["beta"].shape == (2, len(BETA_GRID))


def test_mc_config_validation():
    with pytest.raises(ConfigError):
        MCConfig(reps=1)
    with pytest.raises(ConfigError):
        MCConfig(methods=("lasso",))
