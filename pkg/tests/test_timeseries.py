import numpy as np
import pytest
from hypothesis import given, strategies as st

from sglmidas.timeseries import (
    GroupStructure, HighFrequencySeries, LowFrequencySeries, MixedFrequencyPanel, validate_panel,
)


def test_low_frequency_series_indexing():
    y = LowFrequencySeries([1.0, 2.0, 3.0], first_period=5)
    assert len(y) == 3 and y.last_period == 7
    np.testing.assert_array_equal(y.periods, [5, 6, 7])
    assert y.at(6) == 2.0 and y.has(7) and not y.has(8)
    with pytest.raises(KeyError):
        y.at(4)
    with pytest.raises(ValueError):
        y.values[0] = 1.0
    with pytest.raises(ValueError):
        LowFrequencySeries([])
    with pytest.raises(ValueError):
        LowFrequencySeries([1.0, 2.0], labels=("a",))


def test_high_frequency_positions():
    x = HighFrequencySeries("x", np.arange(12.0), m=3, first_period=1, first_subperiod=2)
    # values[0] is period 1, sub-period 2; offset 0 of period 1 is its sub-period 3
    assert x.position(1, 0) == 1
    assert x.position(2, -2) == 2
    assert x.position(1, -1) == 0
    np.testing.assert_array_equal(x.position(np.array([1, 2]), 0), [1, 4])


@pytest.mark.parametrize("kw", [dict(m=0), dict(delay=-1), dict(lead=4), dict(q=0), dict(first_subperiod=4)])
def test_high_frequency_validation(kw):
    base = dict(name="x", values=np.zeros(6), m=3)
    with pytest.raises(ValueError):
        HighFrequencySeries(**{**base, **kw})


def test_effective_lead():
    assert HighFrequencySeries("x", np.zeros(3), m=3, lead=2, delay=1).effective_lead == 1


def test_panel_names_and_lookup():
    y = LowFrequencySeries(np.zeros(4))
    a = HighFrequencySeries("a", np.zeros(12), m=3)
    panel = MixedFrequencyPanel(y, (a,))
    assert panel.names == ["a"] and panel.covariate("a") is a
    with pytest.raises(KeyError):
        panel.covariate("b")
    with pytest.raises(ValueError):
        MixedFrequencyPanel(y, (a, a))


def test_validate_panel_reports_problems():
    y = LowFrequencySeries([1.0, np.nan, 3.0, 4.0])
    x = HighFrequencySeries("x", np.zeros(9), m=3, first_period=1, lead=3, q=2)
    msgs = [str(v) for v in validate_panel(MixedFrequencyPanel(y, (x,)), ar_lags=0)]
    assert any("non-finite" in s for s in msgs)
    assert any("pre-sample history" in s for s in msgs)
    assert any("ends" in s for s in msgs)
    ok = HighFrequencySeries("x", np.zeros(15), m=3, first_period=0, lead=3, q=1)
    assert validate_panel(MixedFrequencyPanel(LowFrequencySeries([1.0, 2, 3, 4]), (ok,)), 1) == []


def test_group_structure_partition():
    g = GroupStructure.from_sizes([2, 3])
    assert g.names == ("g0", "g1") and g.p == 5
    np.testing.assert_array_equal(g.group_of(), [0, 0, 1, 1, 1])
    lab = GroupStructure.from_labels(["a", "b", "a"])
    np.testing.assert_array_equal(lab.index("a"), [0, 2])
    with pytest.raises(ValueError):
        GroupStructure(("a", "b"), (np.array([0]), np.array([0])))
    with pytest.raises(ValueError):
        GroupStructure(("a", "a"), (np.array([0]), np.array([1])))
    with pytest.raises(ValueError):
        GroupStructure(("a",), (np.array([], dtype=int),))


@given(st.lists(st.integers(1, 6), min_size=1, max_size=10))
def test_from_sizes_is_contiguous_partition(sizes):
    g = GroupStructure.from_sizes(sizes)
    np.testing.assert_array_equal(g.sizes, sizes)
    np.testing.assert_array_equal(np.concatenate(g.indices), np.arange(sum(sizes)))
