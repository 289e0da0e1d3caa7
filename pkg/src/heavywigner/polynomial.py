"""Exact multivariate polynomials with rational coefficients.

A :class:`MomentPolynomial` maps monomials to :class:`fractions.Fraction`
coefficients.  Monomials are tuples of ``(symbol, exponent)`` pairs sorted by
:func:`symbol_key`, so two equal polynomials always have equal term tables.
Symbols are plain strings such as ``"a[1,2]"`` or ``"phi[y1^2]"``.
"""
from __future__ import annotations

import re
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Union

Monomial = tuple[tuple[str, int], ...]
Scalar = Union[int, Fraction]

_NUM_RE = re.compile(r"(\d+)")


def symbol_key(symbol: str) -> tuple:
    """Natural sort key: ``a[1,10]`` sorts after ``a[1,9]``."""
    parts = _NUM_RE.split(symbol)
    return tuple(int(p) if p.isdigit() else p for p in parts)


def to_fraction(value) -> Fraction:
    """Convert ints, Fractions, decimal strings and ``"p/q"`` strings exactly.

    Floats are converted through ``repr`` so ``0.1`` becomes ``1/10``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot convert {value!r} to an exact rational")


def format_fraction(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _mul_monomials(m1: Monomial, m2: Monomial) -> Monomial:
    if not m1:
        return m2
    if not m2:
        return m1
    exps = dict(m1)
    for s, e in m2:
        exps[s] = exps.get(s, 0) + e
    return tuple(sorted(exps.items(), key=lambda item: symbol_key(item[0])))


class MomentPolynomial:
    """Immutable polynomial over named symbols with exact rational coefficients."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Scalar] | None = None):
        clean: dict[Monomial, Fraction] = {}
        if terms:
            for mono, coeff in terms.items():
                c = to_fraction(coeff)
                if c:
                    key = tuple(sorted(((s, e) for s, e in mono if e), key=lambda it: symbol_key(it[0])))
                    clean[key] = clean.get(key, Fraction(0)) + c
                    if not clean[key]:
                        del clean[key]
        self._terms = clean
        self._hash = None

    # -- constructors -------------------------------------------------
    @classmethod
    def constant(cls, value) -> "MomentPolynomial":
        return cls({(): value})

    @classmethod
    def symbol(cls, name: str) -> "MomentPolynomial":
        return cls({((name, 1),): 1})

    @classmethod
    def zero(cls) -> "MomentPolynomial":
        return cls()

    @classmethod
    def one(cls) -> "MomentPolynomial":
        return cls({(): 1})

    @classmethod
    def _raw(cls, terms: dict[Monomial, Fraction]) -> "MomentPolynomial":
        obj = cls.__new__(cls)
        obj._terms = terms
        obj._hash = None
        return obj

    # -- inspection ---------------------------------------------------
    @property
    def terms(self) -> dict[Monomial, Fraction]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not mono for mono in self._terms)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"polynomial {self} is not constant")
        return self._terms.get((), Fraction(0))

    def symbols(self) -> set[str]:
        return {s for mono in self._terms for s, _ in mono}

    def degree(self) -> int:
        return max((sum(e for _, e in mono) for mono in self._terms), default=0)

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        """Terms in graded order: total degree descending, then lexicographic."""

        def key(item):
            mono, _ = item
            deg = sum(e for _, e in mono)
            return (-deg, tuple((symbol_key(s), -e) for s, e in mono))

        return sorted(self._terms.items(), key=key)

    # -- arithmetic ---------------------------------------------------
    @staticmethod
    def _coerce(other) -> "MomentPolynomial":
        if isinstance(other, MomentPolynomial):
            return other
        return MomentPolynomial.constant(other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self._terms)
        for mono, c in other._terms.items():
            v = out.get(mono, Fraction(0)) + c
            if v:
                out[mono] = v
            else:
                out.pop(mono, None)
        return MomentPolynomial._raw(out)

    __radd__ = __add__

    def __neg__(self):
        return MomentPolynomial._raw({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        if not self._terms or not other._terms:
            return MomentPolynomial._raw({})
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                mono = _mul_monomials(m1, m2)
                v = out.get(mono, Fraction(0)) + c1 * c2
                if v:
                    out[mono] = v
                else:
                    out.pop(mono, None)
        return MomentPolynomial._raw(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative powers are not polynomials")
        result = MomentPolynomial.one()
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = MomentPolynomial.constant(other)
        if not isinstance(other, MomentPolynomial):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # -- evaluation ---------------------------------------------------
    def substitute(self, values: Mapping[str, object]) -> "MomentPolynomial":
        """Replace the given symbols by exact values (or polynomials)."""
        out = MomentPolynomial.zero()
        for mono, c in self._terms.items():
            term = MomentPolynomial.constant(c)
            rest = []
            for s, e in mono:
                if s in values:
                    v = values[s]
                    v = v if isinstance(v, MomentPolynomial) else MomentPolynomial.constant(to_fraction(v))
                    term = term * v**e
                else:
                    rest.append((s, e))
            out = out + term * MomentPolynomial({tuple(rest): 1})
        return out

    def evaluate(self, values: Mapping[str, object]) -> Fraction:
        result = self.substitute(values)
        missing = result.symbols()
        if missing:
            raise KeyError(f"no value for symbols {sorted(missing, key=symbol_key)}")
        return result.constant_value()

    # -- rendering ----------------------------------------------------
    def __str__(self) -> str:
        if not self._terms:
            return "0"
        pieces = []
        for i, (mono, c) in enumerate(self.sorted_terms()):
            sign = "-" if c < 0 else "+"
            mag = abs(c)
            factors = [s if e == 1 else f"{s}^{e}" for s, e in mono]
            if not factors:
                body = format_fraction(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = "*".join([format_fraction(mag)] + factors)
            if i == 0:
                pieces.append(body if sign == "+" else f"-{body}")
            else:
                pieces.append(f"{sign} {body}")
        return " ".join(pieces)

    def __repr__(self) -> str:
        return f"MomentPolynomial({str(self)!r})"

    def to_json(self) -> dict:
        return {
            "terms": [
                {"coeff": format_fraction(c), "monomial": {s: e for s, e in mono}}
                for mono, c in self.sorted_terms()
            ]
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "MomentPolynomial":
        terms: dict[Monomial, Fraction] = {}
        for t in data["terms"]:
            mono = tuple(sorted(((s, int(e)) for s, e in t["monomial"].items()), key=lambda it: symbol_key(it[0])))
            terms[mono] = terms.get(mono, Fraction(0)) + Fraction(t["coeff"])
        return cls(terms)


def poly_sum(items: Iterable[MomentPolynomial]) -> MomentPolynomial:
    out: dict[Monomial, Fraction] = {}
    for p in items:
        for mono, c in p._terms.items():
            v = out.get(mono, Fraction(0)) + c
            if v:
                out[mono] = v
            else:
                out.pop(mono, None)
    return MomentPolynomial._raw(out)


def poly_prod(items: Iterable[MomentPolynomial]) -> MomentPolynomial:
    result = MomentPolynomial.one()
    for p in items:
        result = result * p
        if result.is_zero():
            break
    return result


ZERO = MomentPolynomial.zero()
ONE = MomentPolynomial.one()
