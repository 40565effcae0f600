"""Certified evaluation of integer polynomials at an algebraic point.

The sampling probability of a forest is ``p = (num/den) ** (1/h)``, which is
irrational in general. We bracket it between consecutive dyadic rationals
``r / 2**k`` with exact integer roots, evaluate integer polynomials over the
bracket with exact integer arithmetic, and widen ``k`` until the sign of the
result is decided.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import gmpy2

log = logging.getLogger(__name__)

DEFAULT_START_BITS = 128
DEFAULT_MAX_BITS = 2048


@dataclass(frozen=True)
class CertifiedReal:
    """A closed interval ``[lo, hi]`` with dyadic endpoints."""

    lo: Fraction
    hi: Fraction
    bits: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("empty interval")

    @classmethod
    def exact(cls, value) -> "CertifiedReal":
        v = Fraction(value)
        return cls(v, v, 0)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return float((self.lo + self.hi) / 2)

    def __contains__(self, value) -> bool:
        return self.lo <= value <= self.hi

    def __float__(self):
        return self.mid

    def __add__(self, other):
        other = other if isinstance(other, CertifiedReal) else CertifiedReal.exact(other)
        return CertifiedReal(self.lo + other.lo, self.hi + other.hi, max(self.bits, other.bits))

    def __sub__(self, other):
        other = other if isinstance(other, CertifiedReal) else CertifiedReal.exact(other)
        return CertifiedReal(self.lo - other.hi, self.hi - other.lo, max(self.bits, other.bits))

    def scale(self, c: Fraction) -> "CertifiedReal":
        c = Fraction(c)
        a, b = self.lo * c, self.hi * c
        return CertifiedReal(min(a, b), max(a, b), self.bits)


class AlgebraicPoint:
    """The positive real ``(num/den) ** (1/h)`` with ``0 < num/den <= 1``."""

    def __init__(self, num: int, den: int, h: int):
        if not (num > 0 and den > 0 and h >= 1 and num <= den):
            raise ValueError("need 0 < num/den <= 1 and h >= 1")
        self.num, self.den, self.h = num, den, h

    def __repr__(self):
        return f"({self.num}/{self.den})^(1/{self.h})"

    def __float__(self):
        return (self.num / self.den) ** (1.0 / self.h)

    @lru_cache(maxsize=16)
    def bracket(self, bits: int) -> tuple[int, int]:
        """``(r, exact)`` with ``r = floor(p * 2**bits)``; ``exact`` iff ``p = r / 2**bits``."""
        scaled = (self.num << (bits * self.h)) // self.den
        r, _ = gmpy2.iroot(gmpy2.mpz(scaled), self.h)
        r = int(r)
        exact = r ** self.h * self.den == self.num << (bits * self.h)
        return r, exact

    def interval(self, bits: int) -> CertifiedReal:
        r, exact = self.bracket(bits)
        lo = Fraction(r, 1 << bits)
        return CertifiedReal(lo, lo if exact else Fraction(r + 1, 1 << bits), bits)


def _scaled_eval(coeffs, r: int, bits: int) -> int:
    """``Q(r / 2**bits) * 2**(bits * deg)`` for nonnegative-coefficient ``Q``."""
    deg = len(coeffs) - 1
    acc = coeffs[deg]
    for i in range(deg - 1, -1, -1):
        acc = acc * r + (coeffs[i] << (bits * (deg - i)))
    return acc


def eval_interval(coeffs, point: AlgebraicPoint, bits: int) -> CertifiedReal:
    """Enclosure of ``sum(c_i * p**i)`` at the given dyadic precision."""
    coeffs = list(coeffs)
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    if not coeffs:
        return CertifiedReal(Fraction(0), Fraction(0), bits)
    deg = len(coeffs) - 1
    pos = [c if c > 0 else 0 for c in coeffs]
    neg = [-c if c < 0 else 0 for c in coeffs]
    r, exact = point.bracket(bits)
    r_hi = r if exact else r + 1
    scale = 1 << (bits * deg)
    lo = _scaled_eval(pos, r, bits) - _scaled_eval(neg, r_hi, bits)
    hi = _scaled_eval(pos, r_hi, bits) - _scaled_eval(neg, r, bits)
    return CertifiedReal(Fraction(lo, scale), Fraction(hi, scale), bits)


def reduce_poly(coeffs, point: AlgebraicPoint) -> list[int]:
    """Remainder of ``Q`` modulo ``den * x**h - num``, scaled to integers.

    The result has degree below ``h`` and the same sign as ``Q`` at ``point``
    (scaling is by a positive power of ``den``).
    """
    c = [int(v) for v in coeffs]
    h, num, den = point.h, point.num, point.den
    if len(c) <= h:
        return c
    # carry the top coefficient down: c_i x^i = c_i (num/den) x^(i-h).
    # Multiply everything by den first so the carry stays integral.
    for i in range(len(c) - 1, h - 1, -1):
        if c[i]:
            top = c[i]
            c = [v * den for v in c]
            c[i] = 0
            c[i - h] += top * num
        c.pop()
    return c


def poly_sign(coeffs, point: AlgebraicPoint, start_bits: int = DEFAULT_START_BITS,
              max_bits: int = DEFAULT_MAX_BITS) -> tuple[int, int]:
    """Certified sign of an integer polynomial at ``point``.

    Returns ``(sign, bits)`` where ``sign`` is -1, 0 or 1 and ``bits`` the
    precision at which it was decided. ``sign == 0`` means the value is
    exactly zero (detected algebraically or at a rational point) or the
    enclosure still straddles zero at ``max_bits``.
    """
    coeffs = reduce_poly(coeffs, point)
    if not any(coeffs):
        return 0, 0
    bits = start_bits
    while True:
        iv = eval_interval(coeffs, point, bits)
        if iv.lo > 0:
            return 1, bits
        if iv.hi < 0:
            return -1, bits
        if iv.lo == iv.hi:
            return 0, bits
        if bits >= max_bits:
            log.info("sign undecided at %d bits; treating as tie", bits)
            return 0, bits
        bits = min(2 * bits, max_bits)


def certified_value(coeffs, point: AlgebraicPoint, denominator: int = 1,
                    bits: int = DEFAULT_START_BITS) -> CertifiedReal:
    """Enclosure of ``Q(p) / denominator``."""
    return eval_interval(coeffs, point, bits).scale(Fraction(1, denominator))
