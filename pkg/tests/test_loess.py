import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluidiqr.errors import EmptyInput
from fluidiqr.loess import LoessParams, loess_at, loess_smooth, tricube
from oracles import SPIKE_LOESS_AT_3, wls_loess, wls_loess_point


def test_params_validation():
    for bad in [(4, 1), (0, 0), (1, 1), (3, 3)]:
        with pytest.raises(ValueError):
            LoessParams(*bad)
    LoessParams(1, 0)
    LoessParams(3, 2)


def test_tricube_values():
    assert tricube(0.0) == 1.0
    assert tricube(1.0) == 0.0
    assert tricube(0.5) == pytest.approx((7 / 8) ** 3)


def test_spike_matches_oracle_and_frozen_value():
    y = [0, 0, 0, 10, 0, 0, 0]
    out = loess_smooth(y, LoessParams(5, 1))
    assert abs(out[3] - SPIKE_LOESS_AT_3) <= 1e-9
    assert abs(out[3] - wls_loess_point(y, 3, 5, 1)) <= 1e-9


@pytest.mark.parametrize("window, degree", [(1, 0), (3, 0), (3, 1), (3, 2), (7, 1), (7, 2),
                                            (25, 0), (25, 1), (25, 2)])
def test_constant_reproduced(window, degree):
    out = loess_smooth(np.full(30, 3.25), LoessParams(window, degree))
    np.testing.assert_allclose(out, 3.25, atol=1e-12)


def test_line_reproduced():
    j = np.arange(40)
    y = 2 * j + 1
    np.testing.assert_allclose(loess_smooth(y, LoessParams(7, 1)), y, atol=1e-9)


def test_parabola_reproduced_by_degree_two():
    j = np.arange(50, dtype=float)
    y = 0.3 * j**2 - 2 * j + 5
    np.testing.assert_allclose(loess_smooth(y, LoessParams(9, 2)), y, atol=1e-8)


def test_window_larger_than_series_uses_everything():
    y = np.array([1.0, 4.0, 2.0])
    out = loess_smooth(y, LoessParams(11, 0))
    for i in range(3):
        assert out[i] == pytest.approx(wls_loess_point(y, i, 11, 0), abs=1e-12)


def test_empty_input():
    with pytest.raises(EmptyInput):
        loess_smooth([], LoessParams(3, 1))


def test_robustness_length_checked():
    with pytest.raises(ValueError):
        loess_smooth([1.0, 2.0, 3.0], LoessParams(3, 1), robustness=[1.0, 1.0])


def test_zero_robustness_removes_point():
    y = np.array([0.0, 0.0, 0.0, 50.0, 0.0, 0.0, 0.0])
    rob = np.ones(7)
    rob[3] = 0.0
    out = loess_smooth(y, LoessParams(5, 1), robustness=rob)
    np.testing.assert_allclose(out, 0.0, atol=1e-12)


def test_all_weights_zero_falls_back_to_mean():
    y = np.array([1.0, 2.0, 6.0])
    out = loess_smooth(y, LoessParams(3, 1), robustness=np.zeros(3))
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out, 3.0)


def test_locality():
    rng = np.random.default_rng(3)
    y = rng.normal(size=60)
    z = y.copy()
    z[59] += 100.0
    a = loess_smooth(y, LoessParams(7, 1))
    b = loess_smooth(z, LoessParams(7, 1))
    # only targets whose 7-neighbourhood reaches index 59 can change
    np.testing.assert_array_equal(a[:53], b[:53])


def test_extrapolation_past_the_edges():
    y = 2.0 * np.arange(20) + 1
    out = loess_at(y, np.arange(-3, 23), 7, 1)
    np.testing.assert_allclose(out, 2.0 * np.arange(-3, 23) + 1, atol=1e-9)


def test_batch_matches_rows():
    rng = np.random.default_rng(5)
    y = rng.normal(size=(4, 25))
    batch = loess_at(y, np.arange(25), 5, 1)
    for k in range(4):
        np.testing.assert_array_equal(batch[k], loess_at(y[k], np.arange(25), 5, 1))


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20),
       st.sampled_from([3, 5, 7, 9]), st.sampled_from([0, 1]))
def test_matches_wls_oracle(values, window, degree):
    y = np.array(values)
    out = loess_smooth(y, LoessParams(window, degree))
    ref = wls_loess(y, window, degree)
    np.testing.assert_allclose(out, ref, rtol=0, atol=1e-9 * max(1.0, np.abs(y).max()))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=20),
       st.lists(st.floats(0.05, 1), min_size=20, max_size=20),
       st.sampled_from([3, 5, 7, 9]), st.sampled_from([0, 1]))
def test_matches_wls_oracle_with_robustness(values, rob, window, degree):
    y = np.array(values)
    r = np.array(rob[: y.size])
    out = loess_smooth(y, LoessParams(window, degree), robustness=r)
    ref = wls_loess(y, window, degree, r)
    np.testing.assert_allclose(out, ref, rtol=0, atol=1e-9 * max(1.0, np.abs(y).max()))
