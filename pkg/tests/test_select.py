import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from qfluct._select import quickselect, select_rows

finite = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.data(), hnp.arrays(np.float64, st.integers(1, 60), elements=finite))
def test_quickselect_matches_sort(data, values):
    j = data.draw(st.integers(1, values.size))
    seed = data.draw(st.integers(0, 2**31))
    assert quickselect(values, j, seed) == np.sort(values)[j - 1]


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, (5, 17), elements=st.sampled_from([-1.0, 0.0, 2.0, 2.0, 3.5])), st.integers(1, 17))
def test_rows_with_many_ties(x, j):
    assert np.array_equal(select_rows(x, j), np.sort(x, axis=1)[:, j - 1])


def test_input_untouched_and_seed_free():
    x = np.random.default_rng(0).standard_normal((50, 101))
    before = x.copy()
    a = select_rows(x, 51, seed=1)
    b = select_rows(x, 51, seed=99)
    assert np.array_equal(x, before)
    assert np.array_equal(a, b)
    assert np.array_equal(a, np.median(x, axis=1))


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        select_rows(np.zeros(4), 1)
    with pytest.raises(ValueError):
        select_rows(np.zeros((2, 4)), 5)
    with pytest.raises(ValueError):
        select_rows(np.zeros((2, 4)), 0)
    with pytest.raises(ValueError):
        quickselect([1.0, np.nan, 2.0], 1)
