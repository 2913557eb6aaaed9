"""Exact rational helpers.

Everything measure- or cocycle-valued in the package is a
:class:`fractions.Fraction`.  Logarithmic statements (``|log q - t| < eps``)
are certified with rational brackets of ``exp`` so that no floating point
decision ever leaks into a result; floats are only used to *guess* an
integer exponent that is then verified exactly.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

from sympy import factorint

__all__ = [
    "RationalParseError",
    "parse_rational",
    "fmt",
    "dual",
    "flog",
    "exp_bracket",
    "log_within",
    "log_outside",
    "power_of",
    "nearest_power",
    "exponent_vector",
]


class RationalParseError(ValueError):
    pass


def parse_rational(text: str) -> Fraction:
    """Parse ``"p/q"`` or an integer string; reject zero denominators and floats."""
    s = text.strip()
    if not s:
        raise RationalParseError("empty rational")
    if "/" in s:
        num, _, den = s.partition("/")
        try:
            n, d = int(num), int(den)
        except ValueError:
            raise RationalParseError(f"not a rational: {text!r}") from None
        if d == 0:
            raise RationalParseError(f"zero denominator in {text!r}")
        return Fraction(n, d)
    try:
        return Fraction(int(s))
    except ValueError:
        raise RationalParseError(f"not a rational: {text!r}") from None


def fmt(q: Fraction) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def dual(q: Fraction) -> dict:
    """Exact ``p/q`` plus a decimal that is explicitly tagged approximate."""
    return {"exact": fmt(q), "approx": float(q)}


def flog(q: Fraction) -> float:
    """Float log of a positive rational, safe for huge numerators."""
    q = Fraction(q)
    return math.log(q.numerator) - math.log(q.denominator)


def _exp_series_nonneg(x: Fraction) -> tuple[Fraction, Fraction]:
    terms = 12 + 3 * math.ceil(x)
    s = Fraction(0)
    t = Fraction(1)
    for k in range(terms + 1):
        s += t
        t = t * x / (k + 1)
    # Lagrange remainder: e^xi x^(N+1)/(N+1)! <= 3^ceil(x) * next term
    return s, s + t * 3 ** math.ceil(x)


@lru_cache(maxsize=512)
def exp_bracket(x: Fraction) -> tuple[Fraction, Fraction]:
    """Rationals ``lo <= e**x <= hi``; ``lo`` is strictly below for ``x > 0``."""
    x = Fraction(x)
    if x >= 0:
        return _exp_series_nonneg(x)
    lo, hi = _exp_series_nonneg(-x)
    return 1 / hi, 1 / lo


def log_within(q: Fraction, center: Fraction, eps: Fraction) -> bool:
    """Certify ``|log q - log center| < eps`` (conservative: may say False near the edge)."""
    if eps <= 0:
        return False
    r = Fraction(q) / Fraction(center)
    lo, _ = exp_bracket(Fraction(eps))
    return 1 / lo <= r <= lo


def log_outside(q: Fraction, a: Fraction, b: Fraction) -> bool:
    """Certify ``log q`` lies outside the closed interval ``[a, b]``."""
    lo_a, _ = exp_bracket(Fraction(a))
    _, hi_b = exp_bracket(Fraction(b))
    return q < lo_a or q > hi_b


def power_of(q: Fraction, base: Fraction) -> int | None:
    """Integer ``n`` with ``base**n == q`` exactly, or ``None``."""
    q, base = Fraction(q), Fraction(base)
    if q <= 0 or base <= 0 or base == 1:
        return 0 if q == 1 else None
    guess = round(flog(q) / flog(base))
    for n in (guess, guess - 1, guess + 1):
        if base**n == q:
            return n
    return None


def nearest_power(q: Fraction, base: Fraction) -> int:
    """Integer ``n`` minimising ``|log q - n log base|`` (ties broken towards 0)."""
    x = flog(q) / flog(base)
    lo = math.floor(x)
    best = None
    for n in (lo, lo + 1):
        d = abs(x - n)
        if best is None or d < best[0] - 1e-12 or (abs(d - best[0]) <= 1e-12 and abs(n) < abs(best[1])):
            best = (d, n)
    return best[1]


@lru_cache(maxsize=4096)
def _factor(n: int) -> tuple[tuple[int, int], ...]:
    return tuple(sorted(factorint(n).items()))


def exponent_vector(q: Fraction) -> dict[int, int]:
    """Prime-exponent map of a positive rational (``{2: -1}`` for 1/2)."""
    q = Fraction(q)
    if q <= 0:
        raise ValueError("exponent_vector needs a positive rational")
    out: dict[int, int] = {}
    for p, e in _factor(q.numerator):
        out[p] = out.get(p, 0) + e
    for p, e in _factor(q.denominator):
        out[p] = out.get(p, 0) - e
    return {p: e for p, e in out.items() if e}
