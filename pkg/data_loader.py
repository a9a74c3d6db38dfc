"""Text and file inputs: digit words, windows, bases, rate rules, rate tables and targets."""

import logging
import os
import re
from fractions import Fraction

import pandas as pd

from cylinders import Window
from errors import DomainError
from numeric import solve_unit_equation
from targets import AffineRate, ConstantTarget, LipschitzTarget, TableRate
from words import DigitWord

logger = logging.getLogger(__name__)

_TERM = re.compile(r"([+-]?)([^+-]+)")


def _fraction(text, what):
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as e:
        raise DomainError(f"cannot parse {what} {text!r}") from e


def parse_word(text) -> DigitWord:
    """Accepts "1,0,1" (commas) or a list of ints."""
    if isinstance(text, (list, tuple)):
        return DigitWord(tuple(int(d) for d in text))
    return DigitWord.parse(text)


def parse_window(text) -> Window:
    """
    Parses a base window.
    Args:
        text (str): "lo:hi" with decimal or rational ends, e.g. "1.9:2" or "8/5:2"
    Returns:
        Window
    """
    parts = str(text).split(":")
    if len(parts) != 2:
        raise DomainError(f"window must look like lo:hi, got {text!r}")
    lo, hi = (_fraction(p, "window end") for p in parts)
    window = Window.of(lo, hi)
    if window.lo <= 1:
        raise DomainError(f"window must satisfy lo > 1, got {text!r}")
    if window.empty:
        logger.warning("Window %s is empty", text)
    return window


def parse_beta(text, prec: int):
    """A decimal/rational base, or a digit word naming the root of its unit equation.

    "1.8" and "9/5" give a Fraction; "1,1" or "word:1,1" give the UnitRoot of that word.
    """
    text = str(text).strip()
    if text.startswith("word:"):
        text = text[len("word:") :]
    elif "," not in text:
        beta = _fraction(text, "base")
        if beta <= 1:
            raise DomainError(f"base must exceed 1, got {text}")
        return beta
    return solve_unit_equation(parse_word(text), prec)


def parse_rate(text) -> AffineRate:
    """ "alpha:1" or "alpha:1/2,c:3" -> l_n = ceil(alpha*n + c)."""
    fields = {}
    for item in str(text).split(","):
        if not item.strip():
            continue
        key, sep, value = item.partition(":")
        key = key.strip().lower()
        if not sep or key not in ("alpha", "c"):
            raise DomainError(f"rate must look like alpha:A[,c:C], got {text!r}")
        fields[key] = _fraction(value, "rate " + key)
    if "alpha" not in fields:
        raise DomainError(f"rate {text!r} has no alpha")
    return AffineRate(fields["alpha"], fields.get("c", Fraction(0)))


def load_rate_file(path) -> TableRate:
    """Rate table with one integer l_n per line, n = 1, 2, ..."""
    if not os.path.exists(path):
        raise DomainError(f"rate file {path} not found")
    try:
        df = pd.read_csv(path, header=None, comment="#", skip_blank_lines=True)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise DomainError(f"cannot read rate file {path}: {e}") from e
    column = pd.to_numeric(df.iloc[:, 0], errors="coerce")
    if column.isna().any() or (column != column.round()).any():
        raise DomainError(f"rate file {path} must hold one integer per line")
    logger.info("Loaded %d rate values from %s", len(column), path)
    return TableRate(tuple(int(v) for v in column))


def parse_affine(text) -> tuple:
    """ "a+b*beta" in any term order -> (intercept, slope) as Fractions."""
    compact = str(text).replace(" ", "").lower()
    if not compact:
        raise DomainError("empty target expression")
    intercept, slope = Fraction(0), Fraction(0)
    consumed = 0
    for match in _TERM.finditer(compact):
        if match.start() != consumed:
            break
        consumed = match.end()
        sign = -1 if match.group(1) == "-" else 1
        body = match.group(2)
        if body.endswith("beta"):
            coeff = body[: -len("beta")].rstrip("*")
            slope += sign * (_fraction(coeff, "slope") if coeff else Fraction(1))
        else:
            intercept += sign * _fraction(body, "intercept")
    if consumed != len(compact):
        raise DomainError(f"cannot parse target {text!r}; expected a+b*beta")
    return intercept, slope


def parse_target(x0=None, lipschitz=None):
    """ConstantTarget from --x0, or an affine LipschitzTarget from --target-lipschitz."""
    if lipschitz:
        if x0 not in (None, ""):
            raise DomainError("give either a constant x0 or a Lipschitz target, not both")
        return LipschitzTarget(*parse_affine(lipschitz))
    return ConstantTarget(_fraction(0 if x0 in (None, "") else x0, "x0"))


def parse_depths(text) -> list:
    if isinstance(text, (list, tuple)):
        return [int(d) for d in text]
    try:
        return [int(tok) for tok in str(text).split(",") if tok.strip()]
    except ValueError as e:
        raise DomainError(f"cannot parse depths {text!r}") from e
