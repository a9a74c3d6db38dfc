import math
from fractions import Fraction

import pytest

from numeric import solve_unit_equation


@pytest.fixture
def golden():
    return solve_unit_equation((1, 1), 160)


@pytest.fixture
def tribonacci():
    return solve_unit_equation((1, 1, 1), 160)


@pytest.fixture
def two():
    return solve_unit_equation((2,), 128)


@pytest.fixture(autouse=True)
def _no_prec_override(monkeypatch):
    monkeypatch.delenv("BETAKIT_PREC_BITS", raising=False)


class QuadraticOracle:
    """Exact greedy digits in Q(sqrt d); numbers are pairs (u, v) meaning u + v*sqrt(d)."""

    def __init__(self, d, beta):
        self.d = d
        self.beta = tuple(Fraction(c) for c in beta)

    def _sign(self, u, v):
        su, sv = (u > 0) - (u < 0), (v > 0) - (v < 0)
        if su >= 0 and sv >= 0:
            return 1 if su or sv else 0
        if su <= 0 and sv <= 0:
            return -1
        return su if u * u > v * v * self.d else sv

    def _floor(self, u, v):
        k = math.floor(float(u) + float(v) * math.sqrt(self.d))
        while self._sign(u - k, v) < 0:
            k -= 1
        while self._sign(u - k - 1, v) >= 0:
            k += 1
        return k

    def digits(self, x, n):
        a, b = self.beta
        u, v = Fraction(x), Fraction(0)
        out = []
        for _ in range(n):
            u, v = u * a + v * b * self.d, u * b + v * a
            k = self._floor(u, v)
            out.append(k)
            u -= k
        return tuple(out)


@pytest.fixture
def golden_oracle():
    return QuadraticOracle(5, (Fraction(1, 2), Fraction(1, 2)))


@pytest.fixture
def silver_oracle():
    return QuadraticOracle(2, (1, 1))


class CubicOracle:
    """Exact greedy digits in Q(beta) for beta**3 = a2*beta**2 + a1*beta + a0.

    Numbers are triples (c0, c1, c2) meaning c0 + c1*beta + c2*beta**2; signs are decided
    by narrowing a rational bracket [lo, hi] around beta until the value clears zero.
    """

    def __init__(self, coeffs, lo, hi):
        self.a0, self.a1, self.a2 = (Fraction(c) for c in coeffs)
        self.lo, self.hi = Fraction(lo), Fraction(hi)

    def _min_poly(self, t):
        return t**3 - self.a2 * t * t - self.a1 * t - self.a0

    def _narrow(self):
        mid = (self.lo + self.hi) / 2
        if self._min_poly(mid) > 0:
            self.hi = mid
        else:
            self.lo = mid

    def _sign(self, c):
        if not any(c):
            return 0
        while True:
            low, high = c[0], c[0]
            for coeff, (t_lo, t_hi) in ((c[1], (self.lo, self.hi)), (c[2], (self.lo**2, self.hi**2))):
                ends = (coeff * t_lo, coeff * t_hi)
                low, high = low + min(ends), high + max(ends)
            if low > 0:
                return 1
            if high < 0:
                return -1
            self._narrow()

    def _times_beta(self, c):
        c0, c1, c2 = c
        return (self.a0 * c2, c0 + self.a1 * c2, c1 + self.a2 * c2)

    def _floor(self, c):
        b = float(self.lo)
        k = math.floor(float(c[0]) + float(c[1]) * b + float(c[2]) * b * b)
        while self._sign((c[0] - k, c[1], c[2])) < 0:
            k -= 1
        while self._sign((c[0] - k - 1, c[1], c[2])) >= 0:
            k += 1
        return k

    def digits(self, x, n):
        c = (Fraction(x), Fraction(0), Fraction(0))
        out = []
        for _ in range(n):
            c = self._times_beta(c)
            k = self._floor(c)
            out.append(k)
            c = (c[0] - k, c[1], c[2])
        return tuple(out)


@pytest.fixture
def tribonacci_oracle():
    return CubicOracle((1, 1, 1), "1.8", "1.9")
