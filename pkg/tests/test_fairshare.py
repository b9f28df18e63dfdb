import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autocal.errors import ConfigurationError
from autocal.fairshare import max_min_share


def test_symmetric_link():
    assert max_min_share({"L": 10.0}, [{"L"}, {"L"}]) == pytest.approx([5.0, 5.0])


def test_two_link_progressive_filling():
    rates = max_min_share({"L1": 10.0, "L2": 2.0}, [{"L1"}, {"L1", "L2"}])
    assert rates == pytest.approx([8.0, 2.0])


def test_empty():
    assert max_min_share({"L": 1.0}, []) == []


def test_errors():
    with pytest.raises(ConfigurationError):
        max_min_share({"L": 1.0}, [{"M"}])
    with pytest.raises(ConfigurationError):
        max_min_share({"L": 0.0}, [{"L"}])
    with pytest.raises(ConfigurationError):
        max_min_share({"L": 1.0}, [set()])


@settings(max_examples=150, deadline=None)
@given(
    st.lists(st.floats(min_value=0.1, max_value=100.0), min_size=1, max_size=4),
    st.lists(st.sets(st.integers(0, 3), min_size=1, max_size=3), min_size=1, max_size=8),
)
def test_max_min_invariants(caps, flow_sets):
    capacities = {i: c for i, c in enumerate(caps)}
    flows = [{r % len(caps) for r in fs} for fs in flow_sets]
    rates = max_min_share(capacities, flows)
    # feasibility
    for r, cap in capacities.items():
        load = sum(x for x, f in zip(rates, flows) if r in f)
        assert load <= cap * (1 + 1e-9)
    # every flow crosses a saturated resource on which it has a maximal rate
    for x, f in zip(rates, flows):
        ok = False
        for r in f:
            load = sum(y for y, g in zip(rates, flows) if r in g)
            top = max(y for y, g in zip(rates, flows) if r in g)
            if load >= capacities[r] * (1 - 1e-9) and x >= top * (1 - 1e-9):
                ok = True
        assert ok
