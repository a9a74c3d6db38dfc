"""Shrinking targets: hit evidence, covers of the hitting set, partition sums and
critical-exponent estimation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from multiprocessing import Pool
from typing import Callable

import numpy as np
import pandas as pd
from mpmath.libmp import fzero, mpf_cmp, mpf_log, round_ceiling, round_floor, to_float

from cylinders import Window, walk_words
from errors import DomainError, OutOfRangeError
from expansion import digits_of_one
from numeric import (
    CAP_BITS,
    DEFAULT_PREC,
    PolyRoot,
    RealEnclosure,
    as_fraction,
    from_fraction,
    integer_coefficients,
    poly_eval,
    sign_at,
    sign_at_rational,
    solve_unit_equation,
    unit_polynomial,
)
from recurrence import right_endpoint_word
from words import DigitWord

logger = logging.getLogger(__name__)


# --- Targets ---
@dataclass(frozen=True)
class ConstantTarget:
    """Fixed target point x0 in [0, 1]."""

    x0: Fraction

    def __post_init__(self):
        x0 = Fraction(self.x0)
        if not 0 <= x0 <= 1:
            raise DomainError(f"target x0={x0} outside [0, 1]")
        object.__setattr__(self, "x0", x0)

    @property
    def lipschitz(self) -> Fraction:
        return Fraction(0)

    def affine(self) -> tuple:
        return self.x0, Fraction(0)

    def at(self, beta: RealEnclosure) -> RealEnclosure:
        return RealEnclosure.exact(self.x0, beta.prec)

    def describe(self) -> str:
        return f"x0={self.x0}"


@dataclass(frozen=True)
class LipschitzTarget:
    """Moving target x(beta).

    The affine form intercept + slope * beta is the one covers can solve exactly. A custom
    `evaluator` (enclosure -> enclosure) with its own `constant` is accepted for hit checks;
    covers then fall back to whole cylinders.
    """

    intercept: Fraction
    slope: Fraction
    evaluator: Callable | None = None
    constant: Fraction | None = None

    def __post_init__(self):
        object.__setattr__(self, "intercept", Fraction(self.intercept))
        object.__setattr__(self, "slope", Fraction(self.slope))
        if self.constant is not None:
            object.__setattr__(self, "constant", Fraction(self.constant))
        elif self.evaluator is not None:
            raise DomainError("a custom evaluator needs an explicit Lipschitz constant")

    @property
    def lipschitz(self) -> Fraction:
        return self.constant if self.constant is not None else abs(self.slope)

    def affine(self) -> tuple | None:
        if self.evaluator is not None:
            return None
        return self.intercept, self.slope

    def at(self, beta: RealEnclosure) -> RealEnclosure:
        if self.evaluator is not None:
            return self.evaluator(beta)
        return beta * self.slope + self.intercept

    def spot_check(self, window: Window, samples: int = 8) -> bool:
        """False only when sampled values certainly break the Lipschitz bound or leave [0, 1]."""
        points = [window.lo + (window.hi - window.lo) * Fraction(i, samples) for i in range(samples + 1)]
        values = [self.at(RealEnclosure.exact(p)) for p in points]
        for v in values:
            if v.hi_fraction < 0 or v.lo_fraction > 1:
                return False
        for (p, vp), (q, vq) in zip(zip(points, values), zip(points[1:], values[1:])):
            if (vp - vq).abs().lo_fraction > self.lipschitz * (q - p):
                return False
        return True

    def describe(self) -> str:
        if self.evaluator is not None:
            return f"custom(L={self.lipschitz})"
        return f"x(beta)={self.intercept}+{self.slope}*beta"


# --- Rates ---
@dataclass(frozen=True)
class AffineRate:
    """l_n = ceil(alpha * n + offset)."""

    alpha: Fraction
    offset: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        object.__setattr__(self, "offset", Fraction(self.offset))

    def __call__(self, n: int) -> int:
        return math.ceil(self.alpha * n + self.offset)

    @property
    def alpha_label(self) -> str:
        return "liminf"

    def describe(self) -> str:
        return f"ceil({self.alpha}*n+{self.offset})"


@dataclass(frozen=True)
class TableRate:
    """Explicit l_1..l_H; alpha is the minimum of l_n/n over the horizon."""

    values: tuple

    def __post_init__(self):
        values = tuple(int(v) for v in self.values)
        if not values:
            raise DomainError("rate table is empty")
        object.__setattr__(self, "values", values)

    def __call__(self, n: int) -> int:
        if n < 1 or n > len(self.values):
            raise OutOfRangeError(f"rate table covers n=1..{len(self.values)}, asked for {n}")
        return self.values[n - 1]

    @property
    def alpha(self) -> Fraction:
        return min(Fraction(v, n) for n, v in enumerate(self.values, 1))

    @property
    def alpha_label(self) -> str:
        return "finite-horizon alpha"

    def describe(self) -> str:
        return f"table[{len(self.values)}]"


@dataclass(frozen=True)
class TargetSpec:
    target: object
    rate: object

    @property
    def alpha(self) -> Fraction:
        return self.rate.alpha

    def radius(self, window: Window, n: int) -> Fraction:
        """Ball radius lo**-l_n at the window infimum."""
        return Fraction(1) / window.lo ** self.rate(n)

    def flags(self, horizon: int) -> list:
        flags = []
        values = [self.rate(n) for n in range(1, horizon + 1)]
        if any(v < 1 for v in values):
            flags.append("rate-not-positive")
        if isinstance(self.rate, AffineRate):
            if self.rate.alpha <= 0:
                flags.append("rate-not-growing")
        elif values[-1] <= values[0]:
            flags.append("rate-not-growing")
        return flags

    def describe(self) -> str:
        return f"{self.target.describe()}, l_n={self.rate.describe()}"


# --- Hits ---
@dataclass(frozen=True)
class HitRecord:
    n: int
    ell: int
    distance: RealEnclosure
    radius: RealEnclosure
    hit: bool | None

    def to_row(self) -> dict:
        return {
            "n": self.n,
            "ell": self.ell,
            "distance": self.distance.render(),
            "radius": self.radius.render(),
            "hit": "undetermined" if self.hit is None else self.hit,
        }


def hit_depths(beta, spec: TargetSpec, N: int, prec: int = DEFAULT_PREC) -> list:
    """Certified comparison of |T^n 1 - x(beta)| with beta**-l_n for n = 1..N."""
    expansion = digits_of_one(beta, N, prec)
    beta_enc = expansion.record.beta_enclosure
    x = spec.target.at(beta_enc)
    records = []
    for n, point in enumerate(expansion.record.orbit[:N], 1):
        ell = spec.rate(n)
        distance = (point - x).abs()
        radius = beta_enc ** (-ell)
        if distance.certainly_lt(radius):
            hit = True
        elif radius.certainly_le(distance):
            hit = False
        else:
            hit = None
        records.append(HitRecord(n, ell, distance, radius, hit))
    return records


# --- Covers ---
@dataclass(frozen=True)
class Piece:
    """Part of a cylinder whose orbit point falls in the target ball."""

    word: DigitWord
    lo: RealEnclosure
    hi: RealEnclosure
    length: RealEnclosure
    bound: Fraction | None
    full_cylinder: bool = False

    @property
    def bound_ok(self) -> bool | None:
        if self.bound is None:
            return None
        return self.length.hi_fraction <= self.bound

    def to_row(self, digits: int = 20) -> dict:
        return {
            "word": str(self.word),
            "n": len(self.word),
            "lo": self.lo.decimal_bounds(digits)[0],
            "hi": self.hi.decimal_bounds(digits)[1],
            "length": self.length.render(),
            "bound_ok": self.bound_ok,
        }


@dataclass
class CoverReport:
    window: Window
    depth: int
    spec: TargetSpec
    radius: Fraction
    pieces: list
    prec: int
    sums: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def to_rows(self) -> list:
        return [p.to_row() for p in self.pieces]

    def to_json(self) -> dict:
        return {
            "window": str(self.window),
            "depth": self.depth,
            "target": self.spec.describe(),
            "ell": self.spec.rate(self.depth),
            "radius": RealEnclosure.exact(self.radius, self.prec).to_json(),
            "pieces": self.to_rows(),
            "flags": self.flags,
        }


@dataclass(frozen=True)
class _CoverContext:
    window: Window
    affine: tuple | None
    lipschitz: Fraction
    n: int
    radius: Fraction
    prec: int


def _piece_bound(ctx: _CoverContext) -> Fraction | None:
    """Upper bound for a piece: 2r / (lo**(n-1) - L) once the slope is dominated."""
    slope_floor = ctx.window.lo ** (ctx.n - 1) - ctx.lipschitz
    if slope_floor <= 0:
        return None
    return 2 * ctx.radius / slope_floor


def _shifted(coeffs: tuple, constant: Fraction, slope: Fraction) -> tuple:
    """Integer polynomial f(beta) - slope * beta + constant (positively rescaled)."""
    c = [Fraction(v) for v in coeffs]
    c[-1] += constant
    c[-2] -= slope
    return integer_coefficients(c)


def _upper_guess(start: RealEnclosure, ctx: _CoverContext, x_max: Fraction, slope_min: Fraction, end_hi):
    """Point past every crossing: start + (x_max + r) / (min slope), capped at the end."""
    guess = start.hi_fraction + (x_max + ctx.radius) / slope_min
    point = from_fraction(guess, ctx.prec, round_ceiling)
    return point if mpf_cmp(point, end_hi) < 0 else end_hi


def _crossing(coeffs, lo, hi, guess, prec) -> RealEnclosure:
    if mpf_cmp(guess, lo) > 0 and sign_at(coeffs, guess, prec) > 0:
        hi = guess
    return PolyRoot.bracket(coeffs, lo, hi, prec).enclosure


def _cover_word(w: DigitWord, ctx: _CoverContext) -> Piece | None:
    window, prec, n = ctx.window, ctx.prec, ctx.n
    a, b = window.lo, window.hi
    f = unit_polynomial(w)
    left = solve_unit_equation(w, prec, bracket=(1, b))
    left_q = as_fraction(left.lo)

    # Region [start, end] = cylinder clipped to the window.
    if left_q > a:
        start = left.enclosure
    elif left.enclosure.hi_fraction <= a:
        start = RealEnclosure.exact(a, prec)
    else:
        start = left.enclosure.hull(RealEnclosure.exact(a, prec))
    right_word = right_endpoint_word(w)
    if sign_at_rational(unit_polynomial(right_word), b) >= 0:
        hint = (left_q, left.enclosure.hi_fraction + 1 / left_q ** (n - 1))
        end = solve_unit_equation(right_word, prec, bracket=hint).enclosure
    else:
        end = RealEnclosure.exact(b, prec)

    bound = _piece_bound(ctx)
    if ctx.affine is None or ctx.affine[1] >= left_q ** (n - 1):
        # No monotone crossing to solve for: keep the whole clipped cylinder.
        length = end - start
        return Piece(w, start, end, length, None, full_cylinder=True)

    x_a, x_b = ctx.affine
    h_minus = _shifted(f, ctx.radius - x_a, x_b)
    h_plus = _shifted(f, -ctx.radius - x_a, x_b)

    if poly_eval(h_minus, end).hi_fraction <= 0 or poly_eval(h_plus, start).lo_fraction >= 0:
        return None

    x_max = x_a + max(x_b * a, x_b * b)
    slope_min = as_fraction(left.lo) ** (n - 1) - x_b
    guess = _upper_guess(start, ctx, x_max, slope_min, end.hi)

    lo_enc = start
    if poly_eval(h_minus, start).hi_fraction < 0:
        if sign_at(h_minus, end.hi, prec) <= 0:
            return None
        root = _crossing(h_minus, start.lo, end.hi, guess, prec)
        if not root.certainly_lt(end):
            if end.certainly_le(root):
                return None
            root = root.hull(end)
        lo_enc = root

    hi_enc = end
    if poly_eval(h_plus, end).lo_fraction > 0 and poly_eval(h_plus, start).hi_fraction < 0:
        hi_enc = _crossing(h_plus, start.lo, end.hi, guess, prec)

    length = hi_enc - lo_enc
    # A zero-length piece is the single base where a cylinder touches the window end.
    if mpf_cmp(length.hi, fzero) < 0:
        return None
    if mpf_cmp(length.lo, fzero) < 0:
        length = RealEnclosure(fzero, length.hi, length.prec)
    return Piece(w, lo_enc, hi_enc, length, bound)


def _cover_chunk(args) -> list:
    words, ctx = args
    pieces = []
    for w in words:
        piece = _cover_word(w, ctx)
        if piece is not None:
            pieces.append(piece)
    return pieces


def cover_precision(window: Window, spec: TargetSpec, n: int, prec: int = DEFAULT_PREC) -> int:
    """Bits needed to resolve pieces of length about lo**-(l_n + n)."""
    ell = max(spec.rate(n), 0)
    scale = math.log2(float(window.hi)) if window.hi > 1 else 1.0
    return min(prec + math.ceil((ell + n) * scale) + 16, CAP_BITS)


def build_cover(window: Window, spec: TargetSpec, n: int, prec: int = DEFAULT_PREC, jobs: int = 1, chunk_size: int = 512) -> CoverReport:
    """All nonempty pieces of order-n cylinders that meet the window.

    A piece is the set of bases in the cylinder with T^n 1 inside B(x(beta), lo**-l_n);
    on each cylinder T^n 1 is an increasing polynomial, so the piece ends solve
    f(beta) = x(beta) -+ r exactly.
    """
    if n < 1:
        raise DomainError("cover depth must be >= 1")
    flags = spec.flags(n)
    target = spec.target
    affine = target.affine()
    radius = spec.radius(window, n)
    bits = cover_precision(window, spec, n, prec)
    ctx = _CoverContext(window, affine, target.lipschitz, n, radius, bits)
    if affine is None:
        flags.append("non-affine-target")
    if target.lipschitz > 0 and window.lo ** (n - 1) <= 2 * target.lipschitz:
        flags.append("lipschitz-threshold-not-reached")

    words = list(walk_words(n, window))
    chunks = [words[i : i + chunk_size] for i in range(0, len(words), chunk_size)]
    payloads = [(chunk, ctx) for chunk in chunks]
    pieces = []
    if jobs > 1 and len(chunks) > 1 and affine is not None:
        with Pool(processes=jobs) as pool:
            for part in pool.imap(_cover_chunk, payloads):
                pieces.extend(part)
    else:
        for payload in payloads:
            pieces.extend(_cover_chunk(payload))

    full = sum(p.full_cylinder for p in pieces)
    if full:
        flags.append(f"full-cylinder-pieces:{full}")
    violations = sum(p.bound_ok is False for p in pieces)
    if violations:
        flags.append(f"bound-violations:{violations}")
        logger.warning("%d pieces exceed the length bound at depth %d", violations, n)
    logger.info("Cover at depth %d: %d cylinders, %d pieces (%d bits)", n, len(words), len(pieces), bits)
    return CoverReport(window, n, spec, radius, pieces, bits, flags=flags)


def partition_sum(report: CoverReport, s) -> RealEnclosure:
    """Outward enclosure of sum |piece|**s."""
    s = Fraction(s)
    if s < 0 or s > 1:
        raise DomainError(f"exponent {s} outside [0, 1]")
    if s in report.sums:
        return report.sums[s]
    total = RealEnclosure.exact(0, report.prec)
    for piece in report.pieces:
        total = total + piece.length.pow_real(s)
    report.sums[s] = total
    return total


# --- Dimension estimation ---
def _log_length(raw) -> float:
    if mpf_cmp(raw, fzero) <= 0:
        return -math.inf
    return to_float(mpf_log(raw, 53, round_floor))


class DimensionEstimator:
    """Empirical critical exponent of the covers over a depth schedule."""

    def __init__(self, window: Window, spec: TargetSpec, depths=(8, 12, 16, 20), prec: int = DEFAULT_PREC, jobs: int = 1, tol: float = 1e-3):
        depths = list(depths)
        if not depths or any(b <= a for a, b in zip(depths, depths[1:])):
            raise DomainError(f"depths must be increasing, got {depths}")
        self.window = window
        self.spec = spec
        self.depths = depths
        self.prec = prec
        self.jobs = jobs
        self.tol = tol
        self.covers = {}
        self.depth_stats = []

    @property
    def theory(self) -> float:
        return 1.0 / (1.0 + float(self.spec.alpha))

    @property
    def window_bound(self) -> float:
        if self.window.lo <= 1:
            return math.inf
        return self.theory * math.log(float(self.window.hi)) / math.log(float(self.window.lo))

    def _critical_exponent(self, report: CoverReport) -> dict:
        row = {"depth": report.depth, "pieces": len(report.pieces), "flag": ""}
        if not report.pieces:
            row.update(s_star=0.0, certified=False, flag="empty-cover")
            return row
        logs = np.array([_log_length(p.length.hi) for p in report.pieces])
        logs = logs[np.isfinite(logs)]

        def total(s):
            return np.exp(s * logs).sum()

        if total(1.0) >= 1.0:
            row.update(s_star=1.0, certified=partition_sum(report, 1).lo_fraction >= 1, flag="sum-exceeds-one")
            return row
        lo, hi = 0.0, 1.0
        while hi - lo > self.tol / 4:
            mid = (lo + hi) / 2
            if total(mid) >= 1.0:
                lo = mid
            else:
                hi = mid
        s_star = (lo + hi) / 2
        below = max(0.0, s_star - self.tol)
        above = min(1.0, s_star + self.tol)
        certified = partition_sum(report, below).lo_fraction >= 1 and partition_sum(report, above).hi_fraction <= 1
        row.update(s_star=s_star, certified=certified)
        return row

    def run(self):
        """Build one cover per depth and locate where its partition sum crosses 1."""
        self.depth_stats = []
        for n in self.depths:
            report = build_cover(self.window, self.spec, n, self.prec, self.jobs)
            self.covers[n] = report
            row = self._critical_exponent(report)
            lengths = [float(p.length.hi_fraction) for p in report.pieces]
            row["mean_length"] = float(np.mean(lengths)) if lengths else 0.0
            row["theory"] = self.theory
            row["window_bound"] = self.window_bound
            row["cover_flags"] = ";".join(report.flags)
            logger.info("Depth %d: s*=%.4f over %d pieces", n, row["s_star"], row["pieces"])
            self.depth_stats.append(row)
        return self

    def get_depth_stats(self) -> pd.DataFrame:
        return pd.DataFrame(self.depth_stats)

    def cover_slope(self) -> float | None:
        """Slope of log(piece count) against -log(mean piece length) across depths."""
        df = self.get_depth_stats()
        df = df[(df["pieces"] > 0) & (df["mean_length"] > 0)]
        if len(df) < 2:
            return None
        slope, _ = np.polyfit(-np.log(df["mean_length"]), np.log(df["pieces"]), 1)
        return float(slope)

    def get_summary(self) -> dict:
        stats = self.depth_stats
        last = stats[-1] if stats else {}
        return {
            "label": "empirical critical exponent",
            "window": str(self.window),
            "target": self.spec.describe(),
            "alpha": float(self.spec.alpha),
            "alpha_kind": self.spec.rate.alpha_label,
            "theory": self.theory,
            "window_bound": self.window_bound,
            "s_star": last.get("s_star"),
            "depth": last.get("depth"),
            "cover_slope": self.cover_slope(),
            "depths": [
                {k: row[k] for k in ("depth", "pieces", "s_star", "certified", "flag")} for row in stats
            ],
        }


def estimate_dimension(window: Window, spec: TargetSpec, depths=(8, 12, 16, 20), prec: int = DEFAULT_PREC, jobs: int = 1, tol: float = 1e-3) -> dict:
    return DimensionEstimator(window, spec, depths, prec, jobs, tol).run().get_summary()
