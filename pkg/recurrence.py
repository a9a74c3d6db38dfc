from __future__ import annotations

from dataclasses import dataclass

from errors import DomainError
from words import DigitWord, _self_admissible, as_word


@dataclass(frozen=True)
class RecurrenceInfo:
    word: DigitWord
    tau: int
    is_full: bool


def _tau(d: tuple) -> int:
    n = len(d)
    for k in range(1, n):
        if d[k:] == d[: n - k]:
            return k
    return n


def recurrence_time(w) -> RecurrenceInfo:
    """Least k >= 1 with the k-th shift equal to the prefix of length n-k (n if none)."""
    w = as_word(w)
    tau = _tau(w.digits)
    return RecurrenceInfo(word=w, tau=tau, is_full=tau == len(w))


def _require_self_admissible(w: DigitWord):
    if not _self_admissible(w.digits):
        raise DomainError(f"{w} is not self-admissible")


def maximal_extension(w, m: int) -> DigitWord:
    """Largest self-admissible word of length m starting with w.

    It repeats the first tau(w) digits periodically; a trailing partial period covers
    the residues 0 <= l < tau, with l = 0 read as a whole period.
    """
    w = as_word(w)
    _require_self_admissible(w)
    if m < len(w):
        raise DomainError(f"extension length {m} shorter than the word ({len(w)})")
    k = _tau(w.digits)
    return DigitWord(tuple(w.digits[i % k] for i in range(m)))


def right_endpoint_word(w) -> DigitWord:
    """Expansion of 1 at the right end of the parameter cylinder of w."""
    w = as_word(w)
    _require_self_admissible(w)
    k = _tau(w.digits)
    bumped = w.digits[: k - 1] + (w.digits[k - 1] + 1,)
    if not _self_admissible(bumped):
        raise AssertionError(f"right endpoint word {bumped} of {w} is not self-admissible")
    return DigitWord(bumped)


def is_valid_block(u, w) -> bool:
    """True iff every shift of u stays below the matching prefix of w.

    Valid blocks may follow the full-recurrence word w, in any number and order,
    without breaking self-admissibility.
    """
    u, w = as_word(u), as_word(w)
    if len(u) != len(w):
        raise DomainError(f"block length {len(u)} differs from word length {len(w)}")
    _require_self_admissible(w)
    if _tau(w.digits) != len(w):
        raise DomainError(f"{w} does not have full recurrence time")
    m = len(w)
    return all(u.digits[i:] <= w.digits[: m - i] for i in range(m))


def branch_full_recurrence(w) -> bool:
    """True iff w with its last digit incremented is still self-admissible.

    When it holds, w has full recurrence time; the increment is never emitted, so it
    skips the digit ceiling.
    """
    w = as_word(w)
    _require_self_admissible(w)
    bumped = w.digits[:-1] + (w.digits[-1] + 1,)
    branches = _self_admissible(bumped)
    if branches and _tau(w.digits) != len(w):
        raise AssertionError(f"{w} branches but has tau < n")
    return branches
