import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from couriersim.observation import (OBS_D_MAX, OBS_LEN, OBS_RANGES,
                                    OBS_SCHEMA_VERSION, SchemaMismatchError,
                                    build_observation, check_schema)


def obs(**overrides):
    base = dict(x=100, y=200, width=786, height=890, status=1, tod=180,
                steps_per_day=360, n_orders_in_scope=3, nearest_order_dist=50.0,
                scope=100.0, congestion=False, weather=False)
    base.update(overrides)
    return build_observation(**base)


def test_length_and_dmax():
    assert len(obs()) == OBS_LEN
    assert OBS_D_MAX == pytest.approx(math.sqrt(15.0))
    assert np.allclose(OBS_RANGES, [1, 1, 1, 2, 2, 1, 1, 1, 1])


def test_components():
    v = obs(x=393, y=445, status=2, tod=90, n_orders_in_scope=4,
            nearest_order_dist=25.0, congestion=True, weather=True)
    assert v[0] == pytest.approx(393 / 786)
    assert v[1] == pytest.approx(445 / 890)
    assert v[2] == pytest.approx(1.0)
    assert v[3] == pytest.approx(math.sin(math.pi / 2))
    assert v[4] == pytest.approx(math.cos(math.pi / 2), abs=1e-12)
    assert v[5] == pytest.approx(0.4)
    assert v[6] == pytest.approx(0.25)
    assert v[7] == 1.0 and v[8] == 1.0


def test_order_count_caps():
    assert obs(n_orders_in_scope=10)[5] == 1.0
    assert obs(n_orders_in_scope=3000)[5] == 1.0


def test_no_nearest_order_saturates():
    assert obs(nearest_order_dist=None)[6] == 1.0
    assert obs(nearest_order_dist=500.0)[6] == 1.0


def test_midnight_continuity():
    # sin/cos encoding keeps 23:59 and 00:00 close
    late = obs(tod=359)
    early = obs(tod=0)
    assert np.linalg.norm(late - early) < 0.05


def test_schema_check():
    check_schema(OBS_SCHEMA_VERSION)
    with pytest.raises(SchemaMismatchError):
        check_schema(OBS_SCHEMA_VERSION + 1)


@given(
    x=st.integers(0, 785), y=st.integers(0, 889), status=st.integers(0, 2),
    tod=st.integers(0, 359), n=st.integers(0, 50),
    near=st.one_of(st.none(), st.floats(0, 300)),
    cong=st.booleans(), wea=st.booleans(),
)
def test_components_within_ranges(x, y, status, tod, n, near, cong, wea):
    v = build_observation(x, y, 786, 890, status, tod, 360, n, near, 100.0,
                          cong, wea)
    lo = np.array([0, 0, 0, -1, -1, 0, 0, 0, 0], dtype=float)
    hi = np.array([1, 1, 1, 1, 1, 1, 1, 1, 1], dtype=float)
    assert np.all(v >= lo - 1e-12) and np.all(v <= hi + 1e-12)
