from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import IntEnum
from itertools import islice
from typing import Callable, Iterable, Iterator, Sequence

from errors import CountOverflowError, DomainError, OutOfRangeError

logger = logging.getLogger(__name__)

# --- Constants ---
DIGIT_CEILING = 2**16 - 1
# Counts land in int64 report columns.
COUNT_LIMIT = 2**63 - 1


class Ordering(IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


@dataclass(frozen=True)
class DigitWord:
    """Finite digit word (e1, ..., en) with n >= 1 and 0 <= ei <= DIGIT_CEILING."""

    digits: tuple

    def __post_init__(self):
        digits = tuple(int(d) for d in self.digits)
        if not digits:
            raise DomainError("a digit word needs at least one digit")
        for d in digits:
            if d < 0 or d > DIGIT_CEILING:
                raise DomainError(f"digit {d} outside [0, {DIGIT_CEILING}]")
        object.__setattr__(self, "digits", digits)

    @classmethod
    def parse(cls, text: str) -> "DigitWord":
        """Parse the comma separated form, e.g. "1,0,2"."""
        try:
            return cls(tuple(int(tok) for tok in str(text).split(",") if tok.strip() != ""))
        except ValueError as e:
            raise DomainError(f"cannot parse digit word {text!r}: {e}") from e

    def __len__(self):
        return len(self.digits)

    def __iter__(self):
        return iter(self.digits)

    def __getitem__(self, item):
        return self.digits[item]

    def __add__(self, other):
        return DigitWord(self.digits + tuple(other))

    def __str__(self):
        return ",".join(str(d) for d in self.digits)

    def prefix(self, k: int) -> "DigitWord":
        return DigitWord(self.digits[:k])

    def to_json(self) -> list:
        return list(self.digits)


def as_word(w) -> DigitWord:
    if isinstance(w, DigitWord):
        return w
    if isinstance(w, str):
        return DigitWord.parse(w)
    return DigitWord(tuple(w))


def take(stream: Iterable[int], n: int) -> tuple:
    """First n digits of a (possibly infinite) digit stream."""
    head = tuple(islice(iter(stream), n))
    if len(head) < n:
        raise DomainError(f"digit stream ended after {len(head)} of {n} digits")
    return head


# --- Order and shift ---
def lex_compare(a, b) -> Ordering:
    a, b = tuple(a), tuple(b)
    size = max(len(a), len(b))
    a = a + (0,) * (size - len(a))
    b = b + (0,) * (size - len(b))
    if a < b:
        return Ordering.LESS
    if a > b:
        return Ordering.GREATER
    return Ordering.EQUAL


def shift(w, i: int) -> DigitWord:
    w = as_word(w)
    if i < 0 or i >= len(w):
        raise OutOfRangeError(f"shift {i} out of range for a word of length {len(w)}")
    return DigitWord(w.digits[i:])


# --- Admissibility ---
def _self_admissible(d: tuple) -> bool:
    n = len(d)
    if n == 0 or d[0] < 1:
        return False
    return all(d[i:] <= d[: n - i] for i in range(1, n))


def is_self_admissible(w) -> bool:
    return _self_admissible(tuple(w))


def is_admissible(w, ceiling: Iterable[int]) -> bool:
    """Parry's criterion against the first len(w) digits of the infinite expansion of 1."""
    d = tuple(w)
    n = len(d)
    c = take(ceiling, n)
    return all(d[i:] <= c[: n - i] for i in range(n))


def count_admissible(ceiling: Iterable[int], n: int) -> int:
    """Exact number of admissible words of length n.

    Dynamic programming over the follower automaton: state j means the word currently
    ends with the ceiling prefix c1..cj and no longer match is pending.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    c = take(ceiling, n)
    counts = [0] * (n + 1)
    counts[0] = 1
    for _ in range(n):
        nxt = [0] * (n + 1)
        for j in range(n):
            if counts[j] == 0:
                continue
            nxt[0] += counts[j] * c[j]
            nxt[j + 1] += counts[j]
        counts = nxt
    total = sum(counts)
    if total > COUNT_LIMIT:
        logger.warning("Admissible count at length %d passed the limit of %d", n, COUNT_LIMIT)
        raise CountOverflowError(f"count of length-{n} words exceeds {COUNT_LIMIT}")
    return total


def enumerate_admissible(ceiling: Iterable[int], n: int) -> Iterator[DigitWord]:
    """All admissible words of length n in increasing lexicographic order."""
    c = take(ceiling, n)
    prefix = []

    def _grow(state):
        if len(prefix) == n:
            yield DigitWord(tuple(prefix))
            return
        for d in range(c[state] + 1):
            prefix.append(d)
            yield from _grow(state + 1 if d == c[state] else 0)
            prefix.pop()

    yield from _grow(0)


# --- Self-admissible enumeration ---
def walk_self_admissible(
    n: int,
    first_digits: Sequence[int],
    keep: Callable[[tuple], bool] | None = None,
    reverse: bool = False,
) -> Iterator[DigitWord]:
    """Depth-first stream of self-admissible words of length n.

    Prefixes are pruned on the fly: a word is self-admissible only if every prefix is,
    and `keep(prefix)` may reject a prefix together with all of its extensions.
    `first_digits` lists the candidate leading digits in visiting order.
    """
    prefix = []

    def _grow(borders):
        m = len(prefix)
        if m == n:
            yield DigitWord(tuple(prefix))
            return
        cap = prefix[0]
        for i in borders:
            cap = min(cap, prefix[m - i])
        digits = range(cap, -1, -1) if reverse else range(cap + 1)
        for d in digits:
            prefix.append(d)
            if keep is None or keep(tuple(prefix)):
                nxt = [i for i in borders if d == prefix[m - i]]
                if d == prefix[0]:
                    nxt.append(m)
                yield from _grow(nxt)
            prefix.pop()

    for d in first_digits:
        if d < 1:
            continue
        prefix.append(d)
        if keep is None or keep(tuple(prefix)):
            yield from _grow([])
        prefix.pop()


def enumerate_self_admissible(n: int, lo, hi) -> Iterator[DigitWord]:
    """Self-admissible words w of length n with lo <= w <= hi, increasing."""
    lo, hi = tuple(as_word(lo)), tuple(as_word(hi))
    if len(lo) != n or len(hi) != n:
        raise DomainError("bounds must have length n")
    if lo > hi:
        return iter(())

    def _keep(p):
        m = len(p)
        return lo[:m] <= p <= hi[:m]

    return walk_self_admissible(n, range(max(lo[0], 1), hi[0] + 1), _keep)


def adjacent_self_admissible(w, direction: str) -> DigitWord | None:
    """Immediate self-admissible neighbor of w ("pred" or "succ"), or None at the boundary."""
    w = as_word(w)
    if not is_self_admissible(w):
        raise DomainError(f"{w} is not self-admissible")
    d = w.digits
    n = len(d)
    if direction == "succ":
        stream = walk_self_admissible(
            n, range(d[0], DIGIT_CEILING + 1), lambda p: p >= d[: len(p)]
        )
    elif direction == "pred":
        stream = walk_self_admissible(
            n, range(d[0], 0, -1), lambda p: p <= d[: len(p)], reverse=True
        )
    else:
        raise DomainError(f"direction must be 'pred' or 'succ', got {direction!r}")
    for candidate in stream:
        if candidate.digits != d:
            return candidate
    logger.debug("No %s neighbor of %s among self-admissible words of length %d", direction, w, n)
    return None
