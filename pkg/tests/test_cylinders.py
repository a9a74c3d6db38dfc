from fractions import Fraction

import pytest

from cylinders import (
    ParamCylinder,
    Window,
    cylinder,
    find_regular_neighbor,
    length_bounds,
    orbit_image,
    walk_cylinders,
    walk_words,
)
from errors import DomainError
from expansion import digits_of_one
from recurrence import recurrence_time
from words import walk_self_admissible


def test_window_parsing():
    w = Window.of("1.9", 2)
    assert w.lo == Fraction(19, 10)
    assert w.hi == 2
    assert str(w) == "1.9:2"
    assert Window.of(2, 2).empty
    with pytest.raises(DomainError):
        Window.of(Fraction(1, 2), 2)


def test_golden_cylinder():
    c = cylinder((1, 1), 128)
    assert float(c.left.enclosure) == pytest.approx(1.6180339887, abs=1e-9)
    assert c.right.enclosure.is_point and c.right.enclosure.contains(2)
    assert float(c.length) == pytest.approx(0.3819660113, abs=1e-9)
    assert c.right_word.digits == (2,)
    assert c.tau == 1 and not c.regular
    assert c.contains(Fraction(17, 10))
    assert not c.contains(2)


def test_cylinder_rejects_non_self_admissible():
    with pytest.raises(DomainError):
        ParamCylinder((1, 0, 1, 1))


def test_to_json_keeps_enclosures():
    data = cylinder((1, 0, 1)).to_json()
    assert data["word"] == [1, 0, 1]
    assert data["tau"] == 2
    assert set(data["beta0"]) == {"lo", "hi", "bits"}


def test_length_bounds_golden():
    bounds = length_bounds(cylinder((1, 1), 128))
    assert bounds.applicable and bounds.certified
    assert bounds.upper.contains(Fraction(1, 2))
    assert float(bounds.lower) == pytest.approx(0.0590169944, abs=1e-9)


def test_length_bounds_boundary_cylinder():
    bounds = length_bounds(cylinder((1, 0, 0), 128))
    assert not bounds.applicable
    assert bounds.lower is None
    assert bounds.certified


@pytest.mark.parametrize("n", range(2, 7))
def test_length_bounds_certify_the_equality_case(n):
    bounds = length_bounds(cylinder((2,) + (0,) * (n - 1), 128))
    assert bounds.applicable
    assert bounds.certified
    assert bounds.actual.overlaps(bounds.upper)


def test_length_bounds_hold_at_order_six():
    for w in walk_self_admissible(6, range(1, 3)):
        c = cylinder(w, 192)
        bounds = length_bounds(c)
        if bounds.applicable:
            assert bounds.certified
            assert bounds.lower.certainly_le(bounds.actual)


def test_orbit_image_golden():
    image = orbit_image(cylinder((1, 1), 128))
    assert image.anchored and image.increasing
    assert image.sup.contains(1)


def test_walk_words_small_window():
    words = [w.digits for w in walk_words(2, Window.of("1.6", 2))]
    assert words == [(1, 0), (1, 1), (2, 0)]
    assert [w.digits for w in walk_words(2, Window.of("1.6", "1.99"))] == [(1, 0), (1, 1)]
    assert list(walk_words(2, Window.of(2, 2))) == []


def test_walk_cylinders_tile_the_window():
    cylinders = list(walk_cylinders(5, Window.of("1.5", "2.5"), 128))
    assert cylinders
    for prev, cur in zip(cylinders, cylinders[1:]):
        assert prev.word.digits < cur.word.digits
        assert prev.right.enclosure.overlaps(cur.left.enclosure)
    assert cylinders[0].left.enclosure.lo_fraction < Fraction(3, 2)
    assert cylinders[-1].right.enclosure.hi_fraction > Fraction(5, 2)


def test_one_regular_cylinder_among_consecutive():
    words = list(walk_self_admissible(6, range(1, 3)))
    n = 6
    for i in range(len(words) - n + 1):
        assert any(recurrence_time(w).is_full for w in words[i : i + n])


def test_find_regular_neighbor():
    assert find_regular_neighbor((1, 0, 1)).digits == (1, 0, 0)
    assert find_regular_neighbor((2, 1)).digits == (2, 1)


def _orders(top, fast):
    return [n if n <= fast else pytest.param(n, marks=pytest.mark.slow) for n in range(1, top + 1)]


@pytest.mark.parametrize("n", _orders(12, 7))
def test_length_bounds_sandwich(n):
    for w in walk_self_admissible(n, range(1, 3)):
        bounds = length_bounds(cylinder(w, 256))
        assert bounds.certified, w
        if bounds.applicable:
            assert bounds.lower.certainly_le(bounds.actual), w


@pytest.mark.parametrize("n", _orders(10, 6))
def test_orbit_image_anchored_and_increasing(n):
    for c in walk_cylinders(n, Window.of("1.2", 3), 128):
        image = orbit_image(c)
        assert image.anchored, c.word
        assert image.increasing, c.word


@pytest.mark.parametrize("n", _orders(7, 5))
def test_left_endpoint_expands_one_as_its_word(n):
    for w in walk_self_admissible(n, range(1, 3)):
        c = ParamCylinder(w, 128)
        if c.boundary:
            continue
        assert digits_of_one(c.left, n).record.digits == w, w
