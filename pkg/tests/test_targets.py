from fractions import Fraction

import pytest

from cylinders import Window
from errors import DomainError, OutOfRangeError
from numeric import RealEnclosure
from targets import (
    AffineRate,
    ConstantTarget,
    DimensionEstimator,
    LipschitzTarget,
    TableRate,
    TargetSpec,
    build_cover,
    estimate_dimension,
    hit_depths,
    partition_sum,
)

# piece end where beta**2 - beta - 1 = 1.6**-2
PIECE_END = (1 + (105 / 16) ** 0.5) / 2


def _spec(x0=0, alpha=1):
    return TargetSpec(ConstantTarget(x0), AffineRate(alpha))


def test_rates():
    assert AffineRate(1)(5) == 5
    assert AffineRate(Fraction(1, 2), 1)(3) == 3
    table = TableRate((1, 2, 3))
    assert table(3) == 3
    assert table.alpha == 1
    assert table.alpha_label == "finite-horizon alpha"
    with pytest.raises(OutOfRangeError):
        table(4)
    with pytest.raises(DomainError):
        TableRate(())


def test_targets():
    with pytest.raises(DomainError):
        ConstantTarget(2)
    t = LipschitzTarget(-1, 1)
    assert t.lipschitz == 1
    assert t.at(RealEnclosure.exact(Fraction(3, 2))).contains(Fraction(1, 2))
    assert t.spot_check(Window.of("1.9", 2))
    assert not LipschitzTarget(0, 1).spot_check(Window.of("1.9", 2))
    with pytest.raises(DomainError):
        LipschitzTarget(0, 0, evaluator=lambda beta: beta)


def test_spec_flags():
    assert _spec().flags(5) == []
    assert "rate-not-growing" in _spec(alpha=0).flags(5)
    assert "rate-not-positive" in _spec(alpha=0).flags(5)
    assert _spec().radius(Window.of(2, 3), 3) == Fraction(1, 8)


def test_hit_depths_binary(two):
    records = hit_depths(two, _spec(0), 5)
    assert [r.hit for r in records] == [True] * 5
    records = hit_depths(two, _spec(1), 5)
    assert [r.hit for r in records] == [False] * 5


def test_hit_depths_golden_equality_is_undetermined(golden):
    records = hit_depths(golden, _spec(0), 3)
    assert records[0].hit is None
    assert records[1].hit is True
    assert records[0].to_row()["hit"] == "undetermined"


def test_cover_single_piece():
    report = build_cover(Window.of("1.6", "1.99"), _spec(0), 2)
    assert len(report.pieces) == 1
    piece = report.pieces[0]
    assert piece.word.digits == (1, 1)
    assert float(piece.lo) == pytest.approx(1.6180339887, abs=1e-9)
    assert float(piece.hi) == pytest.approx(PIECE_END, abs=1e-9)
    assert piece.bound_ok is True
    assert not piece.full_cylinder
    row = piece.to_row()
    assert set(row) >= {"word", "n", "lo", "hi", "length"}
    assert Fraction(row["lo"]) < Fraction(row["hi"])


def test_cover_empty():
    report = build_cover(Window.of("1.9", "1.95"), _spec(0), 2)
    assert report.pieces == []
    assert report.to_json()["pieces"] == []


def test_cover_keeps_the_right_window_end(two):
    assert hit_depths(two, _spec(0), 3)[1].hit is True
    report = build_cover(Window.of("1.9", 2), _spec(0), 2)
    assert len(report.pieces) == 1
    piece = report.pieces[0]
    assert piece.word.digits == (2, 0)
    assert piece.lo.contains(2) and piece.hi.contains(2)
    assert piece.length.contains(0)
    assert partition_sum(report, Fraction(1, 2)).contains(0)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_cover_contains_every_sampled_hit(n):
    spec = _spec(0)
    report = build_cover(Window.of("1.6", 2), spec, n)
    hits = 0
    for k in range(1, 40):
        beta = Fraction(160 + k, 100)
        if hit_depths(beta, spec, n)[-1].hit:
            hits += 1
            assert any(p.lo.lo_fraction <= beta <= p.hi.hi_fraction for p in report.pieces), beta
    assert hits > 0


def test_cover_target_one_keeps_whole_clipped_cylinder():
    report = build_cover(Window.of("1.9", 2), _spec(1), 1)
    assert len(report.pieces) == 1
    piece = report.pieces[0]
    assert piece.lo.contains(Fraction(19, 10))
    assert piece.hi.contains(2)


def test_cover_affine_target_is_solved():
    target = LipschitzTarget(Fraction(-1, 2), Fraction(1, 2))
    report = build_cover(Window.of("1.6", 2), TargetSpec(target, AffineRate(1)), 2)
    assert len(report.pieces) == 1
    piece = report.pieces[0]
    assert not piece.full_cylinder
    assert float(piece.hi) == pytest.approx((1.5 + 5.8125**0.5) / 2, abs=1e-9)
    assert piece.bound_ok is True
    assert report.flags == []


def test_cover_target_matching_the_orbit_falls_back_to_the_cylinder():
    report = build_cover(Window.of("1.9", 2), TargetSpec(LipschitzTarget(-1, 1), AffineRate(1)), 1)
    assert [p.word.digits for p in report.pieces] == [(1,), (2,)]
    assert all(p.full_cylinder for p in report.pieces)
    assert "lipschitz-threshold-not-reached" in report.flags
    assert "full-cylinder-pieces:2" in report.flags


def test_cover_custom_target_uses_whole_cylinders():
    target = LipschitzTarget(0, 0, evaluator=lambda beta: beta * 0, constant=0)
    report = build_cover(Window.of("1.6", 2), TargetSpec(target, AffineRate(1)), 2)
    assert "non-affine-target" in report.flags
    assert all(p.full_cylinder for p in report.pieces)


def test_cover_rejects_depth_zero():
    with pytest.raises(DomainError):
        build_cover(Window.of("1.6", 2), _spec(), 0)


def test_partition_sums():
    report = build_cover(Window.of("1.6", "1.99"), _spec(0), 2)
    assert partition_sum(report, 0).contains(1)
    one = partition_sum(report, 1)
    assert float(one) == pytest.approx(PIECE_END - 1.6180339887, abs=1e-9)
    assert Fraction(1) in report.sums
    with pytest.raises(DomainError):
        partition_sum(report, 2)


def test_dimension_estimator_structure():
    estimator = DimensionEstimator(Window.of("1.6", 2), _spec(0), depths=(2, 3))
    estimator.run()
    stats = estimator.get_depth_stats()
    assert stats["depth"].tolist() == [2, 3]
    summary = estimator.get_summary()
    assert {"depth", "s_star", "theory", "window_bound"} <= set(summary)
    assert summary["theory"] == pytest.approx(0.5)
    assert summary["label"] == "empirical critical exponent"
    assert 0.0 <= summary["s_star"] <= 1.0


def test_dimension_estimator_empty_cover():
    summary = estimate_dimension(Window.of("1.9", "1.95"), _spec(0), depths=(2,))
    assert summary["s_star"] == 0.0
    assert summary["depths"][0]["flag"] == "empty-cover"


def test_depths_must_increase():
    with pytest.raises(DomainError):
        DimensionEstimator(Window.of("1.6", 2), _spec(), depths=(3, 2))


@pytest.mark.slow
def test_critical_exponent_near_one_half():
    summary = estimate_dimension(Window.of("1.9", 2), _spec(0), depths=(8, 12, 16, 20), jobs=4)
    assert 0.35 <= summary["s_star"] <= 0.65
    trend = [row["s_star"] for row in summary["depths"]]
    assert abs(trend[-1] - 0.5) <= abs(trend[0] - 0.5)


@pytest.mark.slow
@pytest.mark.parametrize(
    "target", [ConstantTarget(Fraction(1, 2)), LipschitzTarget(-1, 1)], ids=["x0-half", "beta-minus-one"]
)
def test_critical_exponent_for_other_targets(target):
    spec = TargetSpec(target, AffineRate(1))
    summary = estimate_dimension(Window.of("1.9", 2), spec, depths=(8, 12, 16, 20), jobs=4)
    assert 0.35 <= summary["s_star"] <= 0.65


@pytest.mark.parametrize("n", [4, 6])
def test_lipschitz_pieces_respect_the_length_bound(n):
    window = Window.of("1.9", 2)
    report = build_cover(window, TargetSpec(LipschitzTarget(-1, 1), AffineRate(1)), n)
    solved = [p for p in report.pieces if not p.full_cylinder]
    assert solved
    lo = window.lo
    bound = 2 * report.radius / (lo ** (n - 1) - 1)
    # past lo**(n-1) > 2L the bound is at most 4 lo * lo**-(l_n + n)
    assert bound <= 4 * lo * lo ** -(2 * n)
    for piece in solved:
        assert piece.bound == bound
        assert piece.bound_ok is True
    assert not any(flag.startswith("bound-violations") for flag in report.flags)
