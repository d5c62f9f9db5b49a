"""Exact rational helpers.

All exact quantities are ``gmpy2.mpq`` values: arbitrary precision and always
in lowest terms.  They compare equal to ``int`` and ``fractions.Fraction``.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

import gmpy2

Q = gmpy2.mpq
ZERO = Q(0)
ONE = Q(1)


def as_rational(value) -> gmpy2.mpq:
    """Coerce ``value`` to an exact rational.

    Accepts ints, Fractions, mpq values and strings such as ``"3/2"``,
    ``"-1/4"`` or ``"2"``.  Floats are rejected so that binary64 values
    never leak silently into exact computations.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if type(value) is type(ONE):
        return value
    if isinstance(value, (int, Fraction, Rational)):
        return Q(value.numerator, value.denominator)
    if isinstance(value, str):
        return parse_rational(value)
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


def parse_rational(text: str) -> gmpy2.mpq:
    s = text.strip()
    if not s:
        raise ValueError("empty rational string")
    num, sep, den = s.partition("/")
    try:
        n = int(num)
        d = int(den) if sep else 1
    except ValueError:
        raise ValueError(f"malformed rational {text!r}") from None
    if d == 0:
        raise ValueError(f"zero denominator in {text!r}")
    return Q(n, d)


def format_rational(value) -> str:
    """Serialize as ``"p/q"`` in lowest terms (sign on the numerator).

    Integers are written without a denominator, e.g. ``"1"``.
    """
    q = as_rational(value)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"
