from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from itertools import cycle, islice
from typing import Iterator

import pandas as pd
from mpmath.libmp import fone, fzero, mpf_cmp, mpf_floor, to_int

from errors import BoundaryUndetermined, CertificationError, DomainError
from numeric import CAP_BITS, DEFAULT_PREC, PolyRoot, RealEnclosure, UnitRoot
from words import DigitWord

logger = logging.getLogger(__name__)


class OrbitStart(Enum):
    ONE = "1"


ONE = OrbitStart.ONE

MAX_LOOKAHEAD = 4096


# --- Working enclosures ---
def _beta_at(beta, bits: int) -> RealEnclosure:
    if isinstance(beta, PolyRoot):
        if isinstance(beta, UnitRoot) and beta.at_boundary:
            raise DomainError(f"root of {beta.word} is the boundary value 1")
        enc = beta.refine(bits).enclosure
    else:
        enc = RealEnclosure.coerce(beta, bits)
        enc = enc.with_prec(max(bits, enc.prec))
    if mpf_cmp(enc.lo, fone) <= 0:
        raise DomainError("beta enclosure must lie above 1")
    return enc


def _point_at(x, bits: int) -> RealEnclosure:
    if x is ONE:
        return RealEnclosure.exact(1, bits)
    if isinstance(x, PolyRoot):
        return x.refine(bits).enclosure
    enc = RealEnclosure.coerce(x, bits)
    return enc.with_prec(max(bits, enc.prec))


def _strip_zeros(digits: tuple) -> tuple:
    end = len(digits)
    while end and digits[end - 1] == 0:
        end -= 1
    return digits[:end]


@dataclass(frozen=True)
class OrbitRecord:
    """Certified digits and orbit enclosures of a point under the greedy beta map."""

    beta: object
    point: object
    digits: DigitWord
    orbit: tuple
    certified_depth: int
    bits: int
    beta_enclosure: RealEnclosure
    zero_at: int | None = None

    def to_json(self) -> dict:
        return {
            "beta": self.beta_enclosure.to_json(),
            "digits": self.digits.to_json(),
            "orbit": [x.to_json() for x in self.orbit],
            "certified_depth": self.certified_depth,
        }


def _iterate(beta_enc, x_enc, n, identity):
    """Run the greedy map n times; returns (digits, orbit, zero_at, ambiguous index)."""
    digits, orbit = [], []
    zero = RealEnclosure.exact(0, beta_enc.prec)
    cur, zero_at = x_enc, None
    for k in range(1, n + 1):
        if zero_at is not None:
            digits.append(0)
            orbit.append(zero)
            continue
        y = beta_enc * cur
        d = y.floor()
        if d is None:
            c = int(to_int(mpf_floor(y.hi)))
            # The unit equation forces beta * T^(k-1) 1 to be exactly the last digit.
            if identity is not None and tuple(digits) + (c,) == identity:
                digits.append(c)
                orbit.append(zero)
                zero_at = k
                continue
            return digits, orbit, zero_at, k
        cur = (y - d).clip_unit()
        digits.append(d)
        orbit.append(cur)
        if cur.is_point and not cur.lo[1]:
            zero_at = k
    return digits, orbit, zero_at, None


def _expand(beta, x, n: int, prec: int, cap: int) -> OrbitRecord:
    if n < 1:
        raise DomainError("depth must be >= 1")
    identity = None
    if x is ONE and isinstance(beta, UnitRoot) and beta.word is not None:
        identity = _strip_zeros(beta.word.digits)
    coarse = _beta_at(beta, prec)
    growth = math.ceil(n * math.log2(max(float(coarse.hi_fraction), 2.0)))
    bits = min(max(prec, 64) + growth + 32, cap)
    while True:
        beta_enc = _beta_at(beta, bits)
        digits, orbit, zero_at, bad = _iterate(beta_enc, _point_at(x, bits), n, identity)
        if bad is None:
            return OrbitRecord(
                beta=beta,
                point=x,
                digits=DigitWord(tuple(digits)),
                orbit=tuple(orbit),
                certified_depth=n,
                bits=bits,
                beta_enclosure=beta_enc,
                zero_at=zero_at,
            )
        if bits >= cap:
            raise BoundaryUndetermined(
                f"digit {bad} stays ambiguous at {cap} bits", index=bad, bits=cap
            )
        logger.info("Floor at digit %d ambiguous at %d bits, doubling precision", bad, bits)
        bits = min(2 * bits, cap)


def digits_of_x(beta, x, n: int, prec: int = DEFAULT_PREC, cap: int = CAP_BITS) -> OrbitRecord:
    """First n greedy digits of x in [0, 1) in base beta, each floor certified."""
    enc = _point_at(x, prec)
    if enc.lo_fraction < 0 or enc.hi_fraction >= 1:
        raise DomainError("x must lie in [0, 1)")
    return _expand(beta, x, n, prec, cap)


@dataclass(frozen=True)
class ExpansionOfOne:
    """Expansion of 1: raw digits, simple Parry status and the infinite expansion."""

    beta: object
    raw_digits: DigitWord
    is_simple_parry: bool | None
    depth: int
    record: OrbitRecord
    prec: int = DEFAULT_PREC
    cap: int = CAP_BITS

    @property
    def star_period(self) -> tuple | None:
        if not self.is_simple_parry:
            return None
        d = self.raw_digits.digits
        return d[:-1] + (d[-1] - 1,)

    def star_stream(self) -> Iterator[int]:
        """Infinite expansion of 1, extended on demand for non simple Parry bases."""
        if self.is_simple_parry:
            yield from cycle(self.star_period)
            return
        emitted, current = 0, self
        while not current.is_simple_parry:
            for d in current.raw_digits.digits[emitted:]:
                yield d
            emitted = len(current.raw_digits)
            current = digits_of_one(self.beta, 2 * emitted, self.prec, self.cap)
        # A deeper run landed on 0; the periodic form agrees with what was emitted.
        yield from islice(current.star_stream(), emitted, None)

    def star_digits(self, count: int) -> tuple:
        if self.is_simple_parry:
            period = self.star_period
            return tuple(period[i % len(period)] for i in range(count))
        if count <= len(self.raw_digits):
            return self.raw_digits.digits[:count]
        return digits_of_one(self.beta, count, self.prec, self.cap).star_digits(count)

    def to_json(self) -> dict:
        return {
            "beta": self.record.beta_enclosure.to_json(),
            "digits": self.raw_digits.to_json(),
            "orbit": [x.to_json() for x in self.record.orbit],
            "certified_depth": self.record.certified_depth,
            "simple_parry": self.is_simple_parry,
            "star_period": list(self.star_period) if self.is_simple_parry else None,
        }


def digits_of_one(beta, n: int, prec: int = DEFAULT_PREC, cap: int = CAP_BITS) -> ExpansionOfOne:
    """Expansion of 1 to depth n.

    Simple Parry status is True only when the orbit provably lands on 0; otherwise it is
    None, meaning undetermined at this depth.
    """
    record = _expand(beta, ONE, n, prec, cap)
    if record.zero_at is not None:
        m = record.zero_at
        return ExpansionOfOne(beta, DigitWord(record.digits.digits[:m]), True, n, record, prec, cap)
    return ExpansionOfOne(beta, record.digits, None, n, record, prec, cap)


def tail_enclosure(beta_enc: RealEnclosure, star: tuple, n: int, terms: int) -> RealEnclosure:
    """Enclosure of sum_{k>=1} star[n+k] beta**-k from `terms` digits plus a remainder bound."""
    inv = RealEnclosure.exact(1, beta_enc.prec) / beta_enc
    acc = RealEnclosure.exact(0, beta_enc.prec)
    for d in reversed(star[n : n + terms]):
        acc = (acc + d) * inv
    top = max(star) if star else 0
    remainder = inv**terms * top / (beta_enc - 1)
    return acc + RealEnclosure(fzero, remainder.hi, beta_enc.prec)


def orbit_of_one(beta, n: int, prec: int = DEFAULT_PREC, cap: int = CAP_BITS, check_tail: bool = True) -> tuple:
    """Enclosures of T^k 1 for k = 1..n.

    For bases whose orbit never lands on 0 the iterates are cross-checked against the
    tail series of the infinite expansion.
    """
    terms = 48
    expansion = digits_of_one(beta, n + terms if check_tail else n, prec, cap)
    orbit = expansion.record.orbit[:n]
    if check_tail and not expansion.is_simple_parry:
        star = expansion.raw_digits.digits
        beta_enc = expansion.record.beta_enclosure
        for k in range(1, n + 1):
            if not orbit[k - 1].overlaps(tail_enclosure(beta_enc, star, k, terms)):
                raise CertificationError(f"iterate {k} disagrees with the tail series")
    return tuple(orbit)


# --- Zero runs ---
def _runs(star: tuple, N: int) -> list | None:
    runs = []
    for n in range(1, N + 1):
        k = 0
        while n + k < len(star) and star[n + k] == 0:
            k += 1
        if n + k >= len(star):
            return None
        runs.append(k)
    return runs


def zero_runs(beta, N: int, prec: int = DEFAULT_PREC, cap: int = CAP_BITS) -> pd.DataFrame:
    """Longest zero run right after each digit n <= N of the infinite expansion of 1.

    Returns:
        pd.DataFrame: columns n, ell, ratio (ell/n), running_max (of ratio).
    """
    look = 32
    expansion = digits_of_one(beta, N + look, prec, cap)
    while True:
        if expansion.is_simple_parry:
            look = max(look, 2 * len(expansion.star_period))
        runs = _runs(expansion.star_digits(N + look), N)
        if runs is not None:
            break
        if look > MAX_LOOKAHEAD:
            raise BoundaryUndetermined(f"zero run after digit {N} not closed", index=N, bits=cap)
        look *= 2
        expansion = digits_of_one(beta, N + look, prec, cap)
    df = pd.DataFrame({"n": range(1, N + 1), "ell": runs})
    df["ratio"] = df["ell"] / df["n"]
    df["running_max"] = df["ratio"].cummax()
    return df


def classify_zero_growth(beta, N: int, alpha_grid=(0.25, 0.5, 1.0), prec: int = DEFAULT_PREC) -> dict:
    """Descriptive zero-run statistics; a finite-depth heuristic, never a limit claim."""
    df = zero_runs(beta, N, prec)
    half = N // 2
    early = int(df["ell"].iloc[:half].max()) if half else 0
    late = int(df["ell"].iloc[half:].max())
    unbounded = late > early
    idx = int(df["ratio"].idxmax())
    tail_ratio = float(df["ratio"].iloc[half:].max())
    if not unbounded:
        hint = "A0"
    elif tail_ratio >= min(alpha_grid):
        hint = "A2"
    else:
        hint = "A1"
    return {
        "label": "finite-depth heuristic",
        "N": N,
        "status": "unbounded-evidence" if unbounded else "bounded-so-far",
        "sup_ratio": float(df["ratio"].max()),
        "argmax_n": int(df["n"].iloc[idx]),
        "max_run": int(df["ell"].max()),
        "class_hint": hint,
        "level_sets": {
            str(alpha): int((df["ell"] >= alpha * df["n"]).sum()) for alpha in alpha_grid
        },
    }
