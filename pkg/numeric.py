"""Certified real arithmetic on dyadic enclosures.

Endpoints are raw ``mpmath.libmp`` floats (sign, mantissa, exponent, bitcount). Every
operation rounds its lower endpoint toward -inf and its upper endpoint toward +inf, so
the exact result always lies inside. No global mpmath context is touched; precision
travels with each enclosure.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

from mpmath import libmp
from mpmath.libmp import (
    fone,
    from_int,
    from_man_exp,
    from_rational,
    fzero,
    mpf_add,
    mpf_cmp,
    mpf_div,
    mpf_exp,
    mpf_floor,
    mpf_log,
    mpf_mul,
    mpf_neg,
    mpf_shift,
    mpf_sub,
    round_ceiling,
    round_floor,
    round_nearest,
    to_float,
    to_int,
)

from errors import CertificationError, DomainError
from words import DigitWord, as_word

logger = logging.getLogger(__name__)

# --- Constants ---
DEFAULT_PREC = 128
CAP_BITS = 4096


# --- Raw dyadic helpers ---
def as_fraction(x) -> Fraction:
    """Exact value of a raw finite mpf."""
    sign, man, exp, _ = x
    man = int(man)
    if not man:
        return Fraction(0)
    value = Fraction(man << exp) if exp >= 0 else Fraction(man, 1 << -exp)
    return -value if sign else value


def from_fraction(q, prec: int, rnd) -> tuple:
    q = Fraction(q)
    den = q.denominator
    if den & (den - 1) == 0:
        return from_man_exp(q.numerator, -(den.bit_length() - 1))
    return from_rational(q.numerator, den, prec, rnd)


def _signed_man_exp(x):
    sign, man, exp, _ = x
    man = int(man)
    return (-man if sign else man), exp


def _magnitude(x) -> int:
    """Smallest e with |x| < 2**e (0 for zero)."""
    _, man, exp, bc = x
    return exp + bc if man else 0


def _min(a, b):
    return a if mpf_cmp(a, b) <= 0 else b


def _max(a, b):
    return a if mpf_cmp(a, b) >= 0 else b


def _decimal(q: Fraction, digits: int, up: bool) -> str:
    scale = 10**digits
    scaled = q * scale
    n = math.ceil(scaled) if up else math.floor(scaled)
    sign = "-" if n < 0 else ""
    n = abs(n)
    whole, frac = divmod(n, scale)
    return f"{sign}{whole}.{frac:0{digits}d}" if digits else f"{sign}{whole}"


@dataclass(frozen=True)
class RealEnclosure:
    """Certified interval [lo, hi] with its working precision in bits."""

    lo: tuple
    hi: tuple
    prec: int = DEFAULT_PREC

    def __post_init__(self):
        if mpf_cmp(self.lo, self.hi) > 0:
            raise DomainError("enclosure with lo > hi")

    # --- Constructors ---
    @classmethod
    def exact(cls, value, prec: int = DEFAULT_PREC) -> "RealEnclosure":
        """Enclosure of an int, Fraction, decimal string or float (exact if dyadic)."""
        q = Fraction(value) if not isinstance(value, str) else Fraction(value.strip())
        return cls(from_fraction(q, prec, round_floor), from_fraction(q, prec, round_ceiling), prec)

    @classmethod
    def from_bounds(cls, lo, hi, prec: int = DEFAULT_PREC) -> "RealEnclosure":
        return cls(
            from_fraction(Fraction(lo), prec, round_floor),
            from_fraction(Fraction(hi), prec, round_ceiling),
            prec,
        )

    @classmethod
    def coerce(cls, value, prec: int = DEFAULT_PREC) -> "RealEnclosure":
        if isinstance(value, RealEnclosure):
            return value
        if isinstance(value, PolyRoot):
            return value.enclosure
        return cls.exact(value, prec)

    def with_prec(self, prec: int) -> "RealEnclosure":
        return replace(self, prec=prec)

    # --- Views ---
    @property
    def lo_fraction(self) -> Fraction:
        return as_fraction(self.lo)

    @property
    def hi_fraction(self) -> Fraction:
        return as_fraction(self.hi)

    @property
    def width(self) -> Fraction:
        return self.hi_fraction - self.lo_fraction

    @property
    def mid(self) -> Fraction:
        return (self.lo_fraction + self.hi_fraction) / 2

    @property
    def is_point(self) -> bool:
        return mpf_cmp(self.lo, self.hi) == 0

    def __float__(self):
        return (to_float(self.lo) + to_float(self.hi)) / 2

    # --- Arithmetic ---
    def _other(self, other):
        if isinstance(other, RealEnclosure):
            return other
        if isinstance(other, (int, Fraction)):
            return RealEnclosure.exact(other, self.prec)
        return None

    def __add__(self, other):
        other = self._other(other)
        if other is None:
            return NotImplemented
        p = max(self.prec, other.prec)
        return RealEnclosure(
            mpf_add(self.lo, other.lo, p, round_floor),
            mpf_add(self.hi, other.hi, p, round_ceiling),
            p,
        )

    __radd__ = __add__

    def __neg__(self):
        return RealEnclosure(mpf_neg(self.hi), mpf_neg(self.lo), self.prec)

    def __sub__(self, other):
        other = self._other(other)
        if other is None:
            return NotImplemented
        p = max(self.prec, other.prec)
        return RealEnclosure(
            mpf_sub(self.lo, other.hi, p, round_floor),
            mpf_sub(self.hi, other.lo, p, round_ceiling),
            p,
        )

    def __rsub__(self, other):
        other = self._other(other)
        if other is None:
            return NotImplemented
        return other - self

    def __mul__(self, other):
        other = self._other(other)
        if other is None:
            return NotImplemented
        p = max(self.prec, other.prec)
        a, b = self, other
        if mpf_cmp(a.lo, fzero) >= 0 and mpf_cmp(b.lo, fzero) >= 0:
            return RealEnclosure(
                mpf_mul(a.lo, b.lo, p, round_floor), mpf_mul(a.hi, b.hi, p, round_ceiling), p
            )
        pairs = [(a.lo, b.lo), (a.lo, b.hi), (a.hi, b.lo), (a.hi, b.hi)]
        lo = hi = None
        for x, y in pairs:
            down = mpf_mul(x, y, p, round_floor)
            up = mpf_mul(x, y, p, round_ceiling)
            lo = down if lo is None else _min(lo, down)
            hi = up if hi is None else _max(hi, up)
        return RealEnclosure(lo, hi, p)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._other(other)
        if other is None:
            return NotImplemented
        if other.contains_zero():
            raise DomainError("division by an enclosure containing 0")
        p = max(self.prec, other.prec)
        lo = hi = None
        for x in (self.lo, self.hi):
            for y in (other.lo, other.hi):
                down = mpf_div(x, y, p, round_floor)
                up = mpf_div(x, y, p, round_ceiling)
                lo = down if lo is None else _min(lo, down)
                hi = up if hi is None else _max(hi, up)
        return RealEnclosure(lo, hi, p)

    def __rtruediv__(self, other):
        other = self._other(other)
        if other is None:
            return NotImplemented
        return other / self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return RealEnclosure.exact(1, self.prec) / (self ** (-k))
        if mpf_cmp(self.lo, fzero) >= 0:
            return RealEnclosure(
                _pow_directed(self.lo, k, self.prec, round_floor),
                _pow_directed(self.hi, k, self.prec, round_ceiling),
                self.prec,
            )
        result = RealEnclosure(fone, fone, self.prec)
        for _ in range(k):
            result = result * self
        return result

    def abs(self) -> "RealEnclosure":
        if mpf_cmp(self.lo, fzero) >= 0:
            return self
        if mpf_cmp(self.hi, fzero) <= 0:
            return -self
        return RealEnclosure(fzero, _max(mpf_neg(self.lo), self.hi), self.prec)

    def pow_real(self, s) -> "RealEnclosure":
        """Outward enclosure of x**s for a nonnegative enclosure and real s >= 0.

        log/exp are evaluated 24 bits above the working precision and the result is
        widened by a relative 2**-prec on each side.
        """
        s = Fraction(s)
        if s < 0:
            raise DomainError("exponent must be nonnegative")
        if mpf_cmp(self.lo, fzero) < 0:
            raise DomainError("real powers need a nonnegative base")
        if s == 0:
            return RealEnclosure(fone, fone, self.prec)
        if s == 1:
            return self
        p = self.prec
        wp = p + 24
        s_lo = from_fraction(s, wp, round_floor)
        s_hi = from_fraction(s, wp, round_ceiling)
        shrink = mpf_sub(fone, from_man_exp(1, -p), wp, round_floor)
        grow = mpf_add(fone, from_man_exp(1, -p), wp, round_ceiling)

        def _power(x, sv, rnd, factor):
            if not x[1]:
                return fzero
            t = mpf_mul(sv, mpf_log(x, wp, rnd), wp, rnd)
            return mpf_mul(mpf_exp(t, wp, rnd), factor, p, rnd)

        # Below 1 the power decreases in s.
        lo = _power(self.lo, s_hi if mpf_cmp(self.lo, fone) < 0 else s_lo, round_floor, shrink)
        hi = _power(self.hi, s_lo if mpf_cmp(self.hi, fone) < 0 else s_hi, round_ceiling, grow)
        return RealEnclosure(lo, hi, p)

    # --- Set operations and comparisons ---
    def contains(self, value) -> bool:
        if isinstance(value, RealEnclosure):
            return mpf_cmp(self.lo, value.lo) <= 0 and mpf_cmp(value.hi, self.hi) <= 0
        q = Fraction(value)
        return self.lo_fraction <= q <= self.hi_fraction

    def contains_zero(self) -> bool:
        return mpf_cmp(self.lo, fzero) <= 0 <= mpf_cmp(self.hi, fzero)

    def overlaps(self, other: "RealEnclosure") -> bool:
        return mpf_cmp(self.lo, other.hi) <= 0 and mpf_cmp(other.lo, self.hi) <= 0

    def certainly_lt(self, other) -> bool:
        other = RealEnclosure.coerce(other, self.prec)
        return mpf_cmp(self.hi, other.lo) < 0

    def certainly_le(self, other) -> bool:
        other = RealEnclosure.coerce(other, self.prec)
        return mpf_cmp(self.hi, other.lo) <= 0

    def hull(self, other: "RealEnclosure") -> "RealEnclosure":
        return RealEnclosure(_min(self.lo, other.lo), _max(self.hi, other.hi), max(self.prec, other.prec))

    def intersect(self, other: "RealEnclosure") -> "RealEnclosure":
        lo, hi = _max(self.lo, other.lo), _min(self.hi, other.hi)
        if mpf_cmp(lo, hi) > 0:
            raise CertificationError("enclosures do not intersect")
        return RealEnclosure(lo, hi, max(self.prec, other.prec))

    def clip_unit(self) -> "RealEnclosure":
        """Intersect with [0, 1], where orbit points are known to live."""
        return self.intersect(RealEnclosure(fzero, fone, self.prec))

    def floor(self) -> int | None:
        """Certified integer floor, or None when an integer may lie in (lo, hi]."""
        f_lo = mpf_floor(self.lo)
        f_hi = mpf_floor(self.hi)
        if mpf_cmp(f_lo, f_hi) != 0:
            return None
        return int(to_int(f_lo))

    # --- Rendering ---
    def render(self) -> str:
        """Decimal midpoint with explicit radius, e.g. "1.61803398874989~±~2e-15"."""
        radius = self.width / 2
        if radius == 0:
            digits = max(1, int(self.prec * 0.30103))
            return f"{libmp.to_str(self.lo, digits)}~±~0"
        digits = max(1, min(int(self.prec * 0.30103), 1 - math.floor(math.log10(radius))))
        mid = from_fraction(self.mid, self.prec + 8, round_nearest)
        return f"{libmp.to_str(mid, digits)}~±~{float(radius):.0e}"

    def decimal_bounds(self, digits: int | None = None) -> tuple:
        """(lo, hi) as decimal strings rounded outward to `digits` places."""
        if digits is None:
            digits = int(self.prec * 0.30103) + 1
        return _decimal(self.lo_fraction, digits, up=False), _decimal(self.hi_fraction, digits, up=True)

    def to_json(self) -> dict:
        lo, hi = self.decimal_bounds()
        return {"lo": lo, "hi": hi, "bits": self.prec}


def _pow_directed(x, k: int, prec: int, rnd):
    result = fone
    base = x
    while k:
        if k & 1:
            result = mpf_mul(result, base, prec, rnd)
        k >>= 1
        if k:
            base = mpf_mul(base, base, prec, rnd)
    return result


# --- Polynomials ---
def integer_coefficients(coeffs: Sequence) -> tuple:
    """Scale rational coefficients (leading first) by a positive integer to make them integral."""
    fracs = [Fraction(c) for c in coeffs]
    scale = 1
    for c in fracs:
        scale = scale * c.denominator // math.gcd(scale, c.denominator)
    return tuple(int(c * scale) for c in fracs)


def poly_derivative(coeffs: Sequence[int]) -> tuple:
    deg = len(coeffs) - 1
    return tuple(c * (deg - j) for j, c in enumerate(coeffs[:-1])) or (0,)


def poly_eval(coeffs: Sequence, x: RealEnclosure) -> RealEnclosure:
    """Interval Horner evaluation (coefficients leading first)."""
    acc = RealEnclosure.exact(coeffs[0], x.prec)
    for c in coeffs[1:]:
        acc = acc * x + c
    return acc


def _exact_sign(coeffs: Sequence[int], x) -> int:
    man, exp = _signed_man_exp(x)
    if exp >= 0:
        value = man << exp
        acc = 0
        for c in coeffs:
            acc = acc * value + c
    else:
        s = -exp
        acc = coeffs[0]
        for k, c in enumerate(coeffs[1:], 1):
            acc = acc * man + (c << (s * k))
    return (acc > 0) - (acc < 0)


def _point_horner(coeffs, x, prec):
    """Directed Horner bounds at a point x >= 0."""
    lo = hi = from_int(coeffs[0])
    for c in coeffs[1:]:
        c = from_int(c)
        lo = mpf_add(mpf_mul(lo, x, prec, round_floor), c, prec, round_floor)
        hi = mpf_add(mpf_mul(hi, x, prec, round_ceiling), c, prec, round_ceiling)
    return lo, hi


def sign_at(coeffs: Sequence[int], x, prec: int) -> int:
    """Certified sign of an integer polynomial at the dyadic point x (raw mpf)."""
    deg = len(coeffs) - 1
    wp = prec + deg * max(1, _magnitude(x)) + 32
    if mpf_cmp(x, fzero) >= 0:
        lo, hi = _point_horner(coeffs, x, wp)
    else:
        value = poly_eval(coeffs, RealEnclosure(x, x, wp))
        lo, hi = value.lo, value.hi
    if mpf_cmp(lo, fzero) > 0:
        return 1
    if mpf_cmp(hi, fzero) < 0:
        return -1
    logger.debug("Sign at %d-bit working precision inconclusive, falling back to exact arithmetic", wp)
    return _exact_sign(coeffs, x)


def sign_at_rational(coeffs: Sequence[int], q) -> int:
    """Exact sign of an integer polynomial at a rational point."""
    q = Fraction(q)
    num, den = q.numerator, q.denominator
    acc, scale = coeffs[0], 1
    for c in coeffs[1:]:
        scale *= den
        acc = acc * num + c * scale
    return (acc > 0) - (acc < 0)


def _horner_nearest(coeffs, x, prec):
    acc = from_int(coeffs[0])
    for c in coeffs[1:]:
        acc = mpf_add(mpf_mul(acc, x, prec, round_nearest), from_int(c), prec, round_nearest)
    return acc


def _newton_proposal(coeffs, dcoeffs, x, prec):
    dv = _horner_nearest(dcoeffs, x, prec)
    if not dv[1]:
        return None
    v = _horner_nearest(coeffs, x, prec)
    return mpf_sub(x, mpf_div(v, dv, prec, round_nearest), prec, round_nearest)


def _lt(a, b):
    return mpf_cmp(a, b) < 0


@dataclass(frozen=True)
class PolyRoot:
    """A root of an integer polynomial held by a sign-certified bracket.

    ``lo_sign`` is the sign of the polynomial at ``lo``; the sign at ``hi`` is its
    opposite. ``lo_sign == 0`` marks an exact dyadic root with ``lo == hi``.
    """

    coeffs: tuple
    lo: tuple
    hi: tuple
    lo_sign: int
    prec: int

    @property
    def enclosure(self) -> RealEnclosure:
        return RealEnclosure(self.lo, self.hi, self.prec)

    @classmethod
    def bracket(cls, coeffs, lo, hi, prec: int = DEFAULT_PREC) -> "PolyRoot":
        """Isolate the root between raw dyadic points lo < hi and narrow it to prec bits."""
        coeffs = tuple(int(c) for c in coeffs)
        s_lo = sign_at(coeffs, lo, prec)
        if s_lo == 0:
            return cls(coeffs, lo, lo, 0, prec)
        s_hi = sign_at(coeffs, hi, prec)
        if s_hi == 0:
            return cls(coeffs, hi, hi, 0, prec)
        if s_lo == s_hi:
            raise CertificationError("no sign change on the proposed bracket")
        root = cls(coeffs, lo, hi, s_lo, prec)
        return root.refine(prec)

    def _target(self, bits: int):
        return from_man_exp(1, max(_magnitude(self.hi), 1) - bits)

    def narrowed(self) -> "PolyRoot":
        """One bisection step: the bracket width at least halves."""
        if self.lo_sign == 0:
            return self
        mid = mpf_shift(mpf_add(self.lo, self.hi), -1)
        s = sign_at(self.coeffs, mid, self.prec)
        if s == 0:
            return replace(self, lo=mid, hi=mid, lo_sign=0)
        if s == self.lo_sign:
            return replace(self, lo=mid)
        return replace(self, hi=mid)

    def refine(self, bits: int) -> "PolyRoot":
        """Narrow the bracket below a relative width of 2**-bits."""
        prec = max(self.prec, bits)
        if self.lo_sign == 0:
            return replace(self, prec=prec)
        target = self._target(bits)
        lo, hi, coeffs = self.lo, self.hi, self.coeffs
        dcoeffs = poly_derivative(coeffs)
        half = mpf_shift(target, -1)
        wp = bits + 16
        while mpf_cmp(mpf_sub(hi, lo), target) > 0:
            mid = mpf_shift(mpf_add(lo, hi), -1)
            # Newton proposals only count once their sign is checked.
            c = _newton_proposal(coeffs, dcoeffs, mid, wp)
            if c is not None and _lt(lo, c) and _lt(c, hi):
                s = sign_at(coeffs, c, prec)
                if s == 0:
                    return replace(self, lo=c, hi=c, lo_sign=0, prec=prec)
                if s == self.lo_sign:
                    lo = c
                    step = mpf_add(c, half)
                else:
                    hi = c
                    step = mpf_sub(c, half)
                if _lt(lo, step) and _lt(step, hi):
                    sp = sign_at(coeffs, step, prec)
                    if sp == 0:
                        return replace(self, lo=step, hi=step, lo_sign=0, prec=prec)
                    if sp == self.lo_sign:
                        lo = step
                    else:
                        hi = step
            if mpf_cmp(mpf_sub(hi, lo), target) <= 0:
                break
            mid = mpf_shift(mpf_add(lo, hi), -1)
            s = sign_at(coeffs, mid, prec)
            if s == 0:
                return replace(self, lo=mid, hi=mid, lo_sign=0, prec=prec)
            if s == self.lo_sign:
                lo = mid
            else:
                hi = mid
        return replace(self, lo=lo, hi=hi, prec=prec)


@dataclass(frozen=True)
class UnitRoot(PolyRoot):
    """The root >= 1 of 1 = sum(e_i * beta**-i) for a digit word with e_1 >= 1."""

    word: DigitWord = None
    at_boundary: bool = False


def unit_polynomial(w) -> tuple:
    """Coefficients of beta**n - e_1 beta**(n-1) - ... - e_n."""
    return (1,) + tuple(-d for d in as_word(w))


def solve_unit_equation(w, prec: int = DEFAULT_PREC, bracket=None) -> UnitRoot:
    """Certified root of the unit equation of w.

    Args:
        w: digit word with first digit >= 1.
        prec: relative width of the returned enclosure, in bits.
        bracket: optional (lo, hi) pair of numbers known to enclose the root.
    """
    w = as_word(w)
    if w[0] < 1:
        raise DomainError(f"{w} starts with 0; its unit equation has no root above 1")
    coeffs = unit_polynomial(w)
    if sum(w) == 1:
        return UnitRoot(coeffs, fone, fone, 0, prec, word=w, at_boundary=True)
    lo, hi = fone, from_int(1 + max(w))
    if bracket is not None:
        b_lo = from_fraction(Fraction(bracket[0]), prec, round_floor)
        b_hi = from_fraction(Fraction(bracket[1]), prec, round_ceiling)
        if sign_at(coeffs, b_lo, prec) <= 0 <= sign_at(coeffs, b_hi, prec):
            lo, hi = _max(lo, b_lo), _min(hi, b_hi)
        else:
            logger.debug("Bracket %s does not enclose the root of %s, using [1, %d]", bracket, w, 1 + max(w))
    root = PolyRoot.bracket(coeffs, lo, hi, prec)
    return UnitRoot(root.coeffs, root.lo, root.hi, root.lo_sign, root.prec, word=w)


def _require_above_one(beta: RealEnclosure):
    if mpf_cmp(beta.lo, fone) <= 0:
        raise DomainError("beta enclosure must lie above 1")


def eval_power_sum(w, beta: RealEnclosure) -> RealEnclosure:
    """Enclosure of sum(e_i * beta**-i)."""
    w = as_word(w)
    beta = RealEnclosure.coerce(beta)
    _require_above_one(beta)
    inv = RealEnclosure.exact(1, beta.prec) / beta
    acc = RealEnclosure.exact(w[-1], beta.prec)
    for d in reversed(w.digits[:-1]):
        acc = acc * inv + d
    return acc * inv


def eval_orbit_polynomial(w, beta: RealEnclosure) -> RealEnclosure:
    beta = RealEnclosure.coerce(beta)
    _require_above_one(beta)
    return poly_eval(unit_polynomial(w), beta)


def eval_orbit_derivative(w, beta: RealEnclosure) -> RealEnclosure:
    beta = RealEnclosure.coerce(beta)
    _require_above_one(beta)
    return poly_eval(poly_derivative(unit_polynomial(w)), beta)
