import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reach_entropy.boxes import Box, covered, grid_counts, resolve_shared_faces


def test_contains_respects_open_faces():
    b = Box([0.0], [1.0], [True], [False])
    assert b.contains(0.0)
    assert not b.contains(1.0)
    assert b.contains(0.999)
    assert not b.contains(-1e-12)


def test_intersect_of_touching_boxes_is_a_face():
    a, b = Box([0.0, 0.0], [1.0, 1.0]), Box([1.0, 0.0], [2.0, 1.0])
    face = a.intersect(b)
    assert not face.is_empty()
    assert face.is_degenerate()
    b_open = Box([1.0, 0.0], [2.0, 1.0], [False, True], [True, True])
    assert not a.intersects(b_open)


def test_subtract_and_cover():
    big = Box([0.0, 0.0], [2.0, 2.0])
    hole = Box([0.5, 0.5], [1.0, 1.0])
    pieces = big.subtract(hole)
    assert all(not p.intersects(hole) for p in pieces)
    assert big.is_covered_by(pieces + [hole])
    assert not big.is_covered_by(pieces)


def test_covered_family():
    region = [Box([0.0], [1.0]), Box([1.0], [3.0])]
    assert covered([Box([0.5], [2.5])], region)
    assert not covered([Box([0.5], [3.5])], region)


def test_resolve_shared_faces_first_keeps_face():
    a, b = resolve_shared_faces([Box([2.0], [3.75]), Box([3.75], [6.0])])
    assert a.contains(3.75) and not b.contains(3.75)
    assert not a.intersects(b)


def test_resolve_shared_faces_rejects_overlap():
    with pytest.raises(ValueError):
        resolve_shared_faces([Box([0.0], [2.0]), Box([1.0], [3.0])])


def test_grid_counts():
    assert grid_counts([17.4] * 3, [24.0] * 3, [1.2] * 3) == (6, 6, 6)
    assert grid_counts([0.0], [0.6], [0.01]) == (60,)
    assert grid_counts([0.0], [1.0], [0.3]) == (4,)
    with pytest.raises(ValueError):
        grid_counts([0.0], [1.0], [0.0])


def test_repr_marks_open_faces():
    assert repr(Box([0.0], [1.0], [True], [False])) == "[0,1)"


boxes_1d = st.tuples(st.floats(-10, 10), st.floats(0.01, 5)).map(lambda t: Box([t[0]], [t[0] + t[1]]))


@settings(max_examples=200, deadline=None)
@given(boxes_1d, boxes_1d, st.floats(-20, 20))
def test_subtract_partitions_points(a, b, x):
    pieces = a.subtract(b)
    in_pieces = sum(p.contains(x) for p in pieces)
    assert in_pieces <= 1
    assert (in_pieces == 1) == (a.contains(x) and not b.contains(x))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_samples_stay_inside(seed):
    rng = np.random.default_rng(seed)
    b = Box(rng.uniform(-5, 0, 3), rng.uniform(0.1, 5, 3))
    assert all(b.contains(x) for x in b.sample(rng, 20))
    assert all(b.contains(c) for c in b.corners())
