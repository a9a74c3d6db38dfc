"""Parameter-space cylinders: the set of bases whose expansion of 1 starts with a word."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterator

from mpmath.libmp import from_man_exp, fzero, mpf_add, mpf_cmp, mpf_neg, mpf_shift, round_floor

from errors import BoundaryError, CertificationError, DomainError
from numeric import (
    CAP_BITS,
    DEFAULT_PREC,
    PolyRoot,
    RealEnclosure,
    UnitRoot,
    as_fraction,
    from_fraction,
    poly_derivative,
    poly_eval,
    sign_at_rational,
    solve_unit_equation,
    unit_polynomial,
)
from recurrence import RecurrenceInfo, recurrence_time, right_endpoint_word
from words import DigitWord, adjacent_self_admissible, as_word, is_self_admissible, walk_self_admissible

logger = logging.getLogger(__name__)


# --- Windows ---
@dataclass(frozen=True)
class Window:
    """Half-open range of bases (lo, hi] with exact rational ends."""

    lo: Fraction
    hi: Fraction

    @classmethod
    def of(cls, lo, hi) -> "Window":
        """Build from numbers, decimal strings or enclosures (enclosures widen outward)."""

        def _end(v, upper):
            if isinstance(v, PolyRoot):
                v = v.enclosure
            if isinstance(v, RealEnclosure):
                return v.hi_fraction if upper else v.lo_fraction
            return Fraction(v.strip()) if isinstance(v, str) else Fraction(v)

        window = cls(_end(lo, False), _end(hi, True))
        if window.lo < 1:
            raise DomainError(f"window must lie in (1, inf), got lo={window.lo}")
        return window

    @property
    def empty(self) -> bool:
        return self.lo >= self.hi

    def __str__(self):
        return f"{float(self.lo):g}:{float(self.hi):g}"


@dataclass(frozen=True)
class ParamCylinder:
    """Cylinder [beta0, beta1) of a self-admissible word; endpoints are solved on first use."""

    word: DigitWord
    prec: int = DEFAULT_PREC

    def __post_init__(self):
        object.__setattr__(self, "word", as_word(self.word))
        if not is_self_admissible(self.word):
            raise DomainError(f"{self.word} is not self-admissible")

    @property
    def n(self) -> int:
        return len(self.word)

    @cached_property
    def left(self) -> UnitRoot:
        return solve_unit_equation(self.word, self.prec)

    @cached_property
    def right_word(self) -> DigitWord:
        return right_endpoint_word(self.word)

    @cached_property
    def right(self) -> UnitRoot:
        return solve_unit_equation(self.right_word, self.prec)

    @cached_property
    def recurrence(self) -> RecurrenceInfo:
        return recurrence_time(self.word)

    @property
    def tau(self) -> int:
        return self.recurrence.tau

    @property
    def regular(self) -> bool:
        return self.recurrence.is_full

    @property
    def boundary(self) -> bool:
        return self.left.at_boundary

    @property
    def length(self) -> RealEnclosure:
        return self.right.enclosure - self.left.enclosure

    def contains(self, beta) -> bool:
        """True when the whole enclosure of beta certainly lies in [beta0, beta1)."""
        beta = RealEnclosure.coerce(beta, self.prec)
        return self.left.enclosure.certainly_le(beta) and beta.certainly_lt(self.right.enclosure)

    def to_row(self) -> dict:
        return {
            "word": str(self.word),
            "n": self.n,
            "tau": self.tau,
            "beta0": self.left.enclosure.render(),
            "beta1": self.right.enclosure.render(),
            "length": self.length.render(),
            "regular": self.regular,
        }

    def to_json(self) -> dict:
        return {
            "word": self.word.to_json(),
            "n": self.n,
            "tau": self.tau,
            "regular": self.regular,
            "boundary": self.boundary,
            "beta0": self.left.enclosure.to_json(),
            "beta1": self.right.enclosure.to_json(),
            "length": self.length.to_json(),
        }


def cylinder(w, prec: int = DEFAULT_PREC) -> ParamCylinder:
    """Cylinder of a self-admissible word with certified, separated endpoints."""
    w = as_word(w)
    bits = prec
    while True:
        c = ParamCylinder(w, bits)
        if c.left.enclosure.certainly_lt(c.right.enclosure):
            return c
        if bits >= CAP_BITS:
            raise CertificationError(f"endpoints of {w} not separated at {bits} bits")
        bits = min(2 * bits, CAP_BITS)


# --- Lengths ---
@dataclass(frozen=True)
class LengthBounds:
    lower: RealEnclosure | None
    upper: RealEnclosure
    actual: RealEnclosure
    applicable: bool
    certified: bool

    def to_json(self) -> dict:
        return {
            "lower": self.lower.to_json() if self.lower is not None else None,
            "upper": self.upper.to_json(),
            "actual": self.actual.to_json(),
            "applicable": self.applicable,
            "certified": self.certified,
        }


def _tail_factor(word: tuple, k: int, n: int, beta1: RealEnclosure) -> RealEnclosure:
    """sum_{j=t+1..k} e_j beta1**-(j-t) + beta1**-(k-t), with t = n - l*k in (0, k]."""
    t = n - ((n - 1) // k) * k
    inv = RealEnclosure.exact(1, beta1.prec) / beta1
    acc = inv ** (k - t)
    for j in range(t + 1, k + 1):
        acc = acc + inv ** (j - t) * word[j - 1]
    return acc


def _meets_upper_bound(c: ParamCylinder) -> bool:
    """(d, 0, ..., 0) with right word (d, 0, ..., 0, 1): beta1**(n-1) * (beta1 - d) = 1 exactly."""
    w = c.word.digits
    return not any(w[1:]) and c.right_word.digits == w[:-1] + (w[-1] + 1,)


def length_bounds(c: ParamCylinder) -> LengthBounds:
    """Lower and upper length bounds next to the certified actual length."""
    n = c.n
    b1 = c.right.enclosure
    actual = c.length
    upper = b1 ** (-(n - 1)) if n > 1 else RealEnclosure.exact(1, b1.prec)
    below_upper = _meets_upper_bound(c) or actual.certainly_le(upper)
    if c.boundary:
        return LengthBounds(None, upper, actual, applicable=False, certified=below_upper)
    b0 = c.left.enclosure
    const = (b0 - 1) ** 2 / b0
    lower = const * b1 ** (-n) * _tail_factor(c.word.digits, c.tau, n, b1)
    certified = lower.certainly_le(actual) and below_upper
    if not certified:
        logger.warning("Length bounds of %s not certified at %d bits", c.word, c.prec)
    return LengthBounds(lower, upper, actual, applicable=True, certified=certified)


# --- Orbit image ---
@dataclass(frozen=True)
class OrbitImage:
    """Image [0, sup) of beta -> T^n 1 over a cylinder, with its certificates."""

    sup: RealEnclosure
    left_value: RealEnclosure
    anchored: bool
    increasing: bool

    def to_json(self) -> dict:
        return {
            "sup": self.sup.to_json(),
            "left_value": self.left_value.to_json(),
            "anchored": self.anchored,
            "increasing": self.increasing,
        }


def _derivative_positive(dcoeffs, lo, hi, prec, depth=0) -> bool:
    value = poly_eval(dcoeffs, RealEnclosure(lo, hi, prec))
    if mpf_cmp(value.lo, fzero) > 0:
        return True
    if depth >= 24:
        return False
    mid = mpf_shift(mpf_add(lo, hi), -1)
    return _derivative_positive(dcoeffs, lo, mid, prec, depth + 1) and _derivative_positive(
        dcoeffs, mid, hi, prec, depth + 1
    )


def orbit_image(c: ParamCylinder, samples: int = 16) -> OrbitImage:
    """sup of T^n 1 over the cylinder; f(beta0) = 0 and f' > 0 are checked along the way."""
    coeffs = unit_polynomial(c.word)
    sup = poly_eval(coeffs, c.right.enclosure)
    left_value = poly_eval(coeffs, c.left.enclosure)
    tiny = RealEnclosure(mpf_neg(from_man_exp(1, -100)), from_man_exp(1, -100), c.prec)
    anchored = left_value.contains_zero() and tiny.contains(left_value)
    dcoeffs = poly_derivative(coeffs)
    lo_q, hi_q = as_fraction(c.left.lo), as_fraction(c.right.hi)
    inner = [from_fraction(lo_q + (hi_q - lo_q) * i / samples, c.prec + 8, round_floor) for i in range(1, samples)]
    cuts = [c.left.lo, *inner, c.right.hi]
    increasing = all(_derivative_positive(dcoeffs, a, b, c.prec) for a, b in zip(cuts, cuts[1:]))
    return OrbitImage(sup=sup, left_value=left_value, anchored=anchored, increasing=increasing)


# --- Walks ---
def walk_words(n: int, window: Window) -> Iterator[DigitWord]:
    """Self-admissible words of length n whose cylinders meet the window (lo, hi], increasing.

    Intersection is decided exactly: beta0(p) <= hi iff the unit polynomial of p is
    nonnegative at hi, and beta1(p) > lo iff the polynomial of its right word is negative at lo.
    """
    if window.empty:
        return iter(())
    a, b = window.lo, window.hi

    def _keep(p):
        if sign_at_rational(unit_polynomial(p), b) < 0:
            return False
        return sign_at_rational(unit_polynomial(right_endpoint_word(p)), a) < 0

    first = range(max(1, math.floor(a)), math.floor(b) + 1)
    return walk_self_admissible(n, first, _keep)


def _adjacent(prev: ParamCylinder, cur: ParamCylinder) -> bool:
    right, left = prev.right, cur.left
    for _ in range(4):
        if right.enclosure.overlaps(left.enclosure):
            return True
        bits = 2 * max(right.prec, left.prec)
        right, left = right.refine(bits), left.refine(bits)
    return right.enclosure.overlaps(left.enclosure)


def walk_cylinders(n: int, window: Window, prec: int = DEFAULT_PREC, check_adjacent: bool = True) -> Iterator[ParamCylinder]:
    """Order-n cylinders meeting the window, in increasing order, sharing endpoints."""
    prev = None
    count = 0
    for w in walk_words(n, window):
        cur = ParamCylinder(w, prec)
        if check_adjacent and prev is not None and not _adjacent(prev, cur):
            raise CertificationError(f"gap between the cylinders of {prev.word} and {cur.word}")
        prev = cur
        count += 1
        yield cur
    logger.info("Walked %d cylinders of order %d in %s", count, n, window)


def find_regular_neighbor(w) -> DigitWord:
    """Nearest full-recurrence word among the n-1 predecessors, then the n-1 successors."""
    w = as_word(w)
    if not is_self_admissible(w):
        raise DomainError(f"{w} is not self-admissible")
    n = len(w)
    if recurrence_time(w).is_full:
        return w
    for direction in ("pred", "succ"):
        cur = w
        for _ in range(n - 1):
            cur = adjacent_self_admissible(cur, direction)
            if cur is None:
                break
            if recurrence_time(cur).is_full:
                return cur
    raise BoundaryError(f"no full-recurrence word within {n - 1} neighbours of {w}")
