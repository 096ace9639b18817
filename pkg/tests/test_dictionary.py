import numpy as np
import pytest
from hypothesis import given, strategies as st

from complier_dml.dictionary import (DictionarySpec, simulation_spec, expand,
                                     instrument_contrast, sub_dictionary, sub_dictionary_size)
from complier_dml.errors import ConfigError, ShapeError


def test_simulation_spec_width():
    spec = simulation_spec(standardize=False)
    assert spec.p == 10
    b = expand(spec, 1, [0.5])
    assert np.allclose(b, [1, .5, .25, .125, .0625, 1, .5, .25, .125, .0625])
    assert np.allclose(expand(spec, 0, [0.5])[5:], 0)


def test_ordering_with_interactions():
    spec = DictionarySpec(k=2, degree=2, interactions=True, standardize=False)
    q = spec.q(np.array([[2.0, 3.0]]))[0]
    assert q.tolist() == [1, 2, 4, 3, 9, 6]
    assert spec.q_width == 6 and spec.p == 12


def test_split_layout_blocks():
    spec = DictionarySpec(k=1, degree=2, layout="split", standardize=False)
    assert expand(spec, 1, [2.0]).tolist() == [1, 2, 4, 0, 0, 0]
    assert expand(spec, 0, [2.0]).tolist() == [0, 0, 0, 1, 2, 4]
    assert spec.intercept_indices == (0, 3)


@given(st.floats(-3, 3), st.sampled_from(["main-interaction", "split"]))
def test_contrast_is_difference(x, layout):
    spec = DictionarySpec(k=1, degree=3, layout=layout, standardize=False)
    assert np.allclose(instrument_contrast(spec, [x]), expand(spec, 1, [x]) - expand(spec, 0, [x]))


def test_standardize_requires_fit(rng):
    spec = DictionarySpec(k=1)
    with pytest.raises(ConfigError):
        spec.q(rng.normal(size=(5, 1)))
    x = rng.normal(2, 3, size=(50, 1))
    fitted = spec.fit(x)
    q = fitted.q(x)
    assert abs(q[:, 1].mean()) < 1e-12 and abs(q[:, 1].std(ddof=1) - 1) < 1e-12


def test_constant_column_keeps_unit_scale():
    spec = DictionarySpec(k=2).fit(np.column_stack([np.ones(10), np.arange(10.0)]))
    assert spec.scale[0] == 1.0


def test_width_mismatch():
    with pytest.raises(ShapeError):
        expand(DictionarySpec(k=2, standardize=False), 1, [1.0])


def test_bad_layout():
    with pytest.raises(ConfigError):
        DictionarySpec(layout="diagonal")


@pytest.mark.parametrize("p,size", [(10, 2), (80, 2), (81, 3), (400, 10), (2, 2)])
def test_sub_dictionary_size(p, size):
    assert sub_dictionary_size(p) == size
    assert sub_dictionary(p).indices == tuple(range(size))
