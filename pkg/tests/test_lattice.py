import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bosecone.lattice import build_chain, build_grid, distance_to_region, enlarge


def test_chain_examples():
    assert len(build_chain(1)) == 1
    lat = build_chain(3)
    assert lat.sites == ((0,), (1,), (2,))
    assert lat.distance(0, 2) == 2
    assert build_chain(9).distance(0, 8) == 8


def test_grid_examples():
    assert build_grid(1, 5) == build_chain(5)
    g = build_grid(2, 3)
    assert len(g) == 9
    assert g.distance(0, 8) == pytest.approx(2 * math.sqrt(2), abs=1e-15)
    assert len(build_grid(2, 1)) == 1
    with pytest.raises(ValueError):
        build_grid(3, 2)


def test_metric_axioms_on_grid():
    d = build_grid(2, 4).distances
    assert np.all(np.diag(d) == 0)
    assert np.array_equal(d, d.T)
    assert np.all(d[:, :, None] <= d[:, None, :] + d.T[None, :, :] + 1e-12)


def test_distance_to_region():
    lat = build_chain(5)
    assert distance_to_region(lat, lat.region([0]), 3) == 3
    assert distance_to_region(lat, lat.region([0, 2]), 2) == 0
    lat9 = build_chain(9)
    assert distance_to_region(lat9, lat9.region([3, 4, 5]), 8) == 3
    with pytest.raises(ValueError):
        distance_to_region(lat, lat.empty(), 0)


def test_enlarge_examples():
    lat = build_chain(9)
    X = lat.region([4])
    assert enlarge(lat, X, 0) == X
    assert enlarge(lat, X, 2).indices == (2, 3, 4, 5, 6)
    assert enlarge(lat, X, lat.diameter) == lat.full()
    with pytest.raises(ValueError):
        enlarge(lat, lat.empty(), 1)


def test_enlarge_grid_diagonal_is_inclusive():
    g = build_grid(2, 3)
    assert 8 in enlarge(g, g.region([0]), 2 * math.sqrt(2))


def test_region_complement_roundtrip():
    lat = build_chain(6)
    X = lat.region([1, 4])
    assert X.complement().complement() == X
    assert X.union(X.complement()) == lat.full()
    with pytest.raises(IndexError):
        lat.region([6])


regions = st.lists(st.integers(0, 15), min_size=1, max_size=6)


@settings(max_examples=60, deadline=None)
@given(regions, st.floats(0, 4), st.floats(0, 4))
def test_enlarge_properties(idx, e1, e2):
    lat = build_grid(2, 4)
    X = lat.region(idx)
    lo, hi = sorted((e1, e2))
    small, big = enlarge(lat, X, lo), enlarge(lat, X, hi)
    assert set(X) <= set(small) <= set(big)
    assert enlarge(lat, small, 0) == small
    dX = distance_to_region(lat, X)
    dXe = distance_to_region(lat, small)
    assert np.all(dXe >= dX - lo - 1e-12)
