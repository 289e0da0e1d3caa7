"""Truncated parameter sequences (a_{j,k}) of heavy Wigner matrices."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import DomainError, TruncationError
from .polynomial import MomentPolynomial, to_fraction

DEFAULT_KMAX = 32


def param_symbol(color: int, k: int) -> str:
    return f"a[{color},{k}]"


@dataclass(frozen=True)
class HeavyParams:
    """Per-color sequences a_{j,1..k_max}.

    Each entry is either an exact :class:`Fraction` or ``None``; ``None`` means
    the entry stays symbolic and is rendered as ``a[j,k]``.
    """

    values: tuple[tuple[int, tuple[Fraction | None, ...]], ...]
    k_max: int

    def __post_init__(self):
        if self.k_max < 1:
            raise DomainError("k_max must be at least 1")
        for color, seq in self.values:
            if len(seq) != self.k_max:
                raise DomainError(f"sequence for color {color} has length {len(seq)}, expected {self.k_max}")
            first = seq[0]
            if first is not None and first < 0:
                raise DomainError(f"a[{color},1] must be non-negative, got {first}")

    # -- constructors -------------------------------------------------
    @classmethod
    def build(cls, table: Mapping[int, Sequence[object | None]], k_max: int | None = None) -> "HeavyParams":
        """Numeric (or partly symbolic) parameters from ``{color: [a_1, a_2, ...]}``.

        Sequences shorter than ``k_max`` are padded with zeros.
        """
        if k_max is None:
            k_max = max((len(s) for s in table.values()), default=1)
        vals = []
        for color in sorted(table):
            seq = [None if v is None else to_fraction(v) for v in table[color]]
            if len(seq) > k_max:
                raise DomainError(f"color {color} has {len(seq)} entries but k_max={k_max}")
            seq += [Fraction(0)] * (k_max - len(seq))
            vals.append((int(color), tuple(seq)))
        return cls(tuple(vals), k_max)

    @classmethod
    def symbolic(cls, colors: Iterable[int] = (1,), k_max: int = DEFAULT_KMAX) -> "HeavyParams":
        return cls(tuple((int(c), (None,) * k_max) for c in sorted(set(colors))), k_max)

    @classmethod
    def trivial(cls, colors: Iterable[int] = (1,), a: object | None = None, k_max: int = DEFAULT_KMAX) -> "HeavyParams":
        """Classical Wigner parameter (a, 0, 0, ...); ``a=None`` keeps a[j,1] symbolic."""
        first = None if a is None else to_fraction(a)
        seq = (first,) + (Fraction(0),) * (k_max - 1)
        return cls(tuple((int(c), seq) for c in sorted(set(colors))), k_max)

    @classmethod
    def constant(cls, colors: Iterable[int] = (1,), a: object = 1, k_max: int = DEFAULT_KMAX) -> "HeavyParams":
        """a_k = a for every k (sparse Erdos-Renyi type)."""
        seq = (to_fraction(a),) * k_max
        return cls(tuple((int(c), seq) for c in sorted(set(colors))), k_max)

    def merged(self, other: "HeavyParams") -> "HeavyParams":
        """Union of two parameter tables; colors must be disjoint."""
        mine = dict(self.values)
        theirs = dict(other.values)
        if set(mine) & set(theirs):
            raise DomainError(f"colors overlap: {sorted(set(mine) & set(theirs))}")
        k_max = min(self.k_max, other.k_max)
        table = {c: s[:k_max] for c, s in {**mine, **theirs}.items()}
        return HeavyParams(tuple(sorted(table.items())), k_max)

    # -- access -------------------------------------------------------
    @property
    def colors(self) -> tuple[int, ...]:
        return tuple(c for c, _ in self.values)

    def sequence(self, color: int) -> tuple[Fraction | None, ...]:
        for c, seq in self.values:
            if c == color:
                return seq
        raise DomainError(f"no parameter sequence for matrix x{color}")

    def a(self, color: int, k: int) -> MomentPolynomial:
        """a_{color,k} as a polynomial (a constant when numeric)."""
        seq = self.sequence(color)
        if k < 1:
            raise DomainError(f"parameter index k must be >= 1, got {k}")
        if k > self.k_max:
            raise TruncationError(color, k, self.k_max)
        v = seq[k - 1]
        if v is None:
            return MomentPolynomial.symbol(param_symbol(color, k))
        return MomentPolynomial.constant(v)

    def is_numeric(self) -> bool:
        return all(v is not None for _, seq in self.values for v in seq)

    def to_json(self) -> dict:
        return {
            "k_max": self.k_max,
            "matrices": [
                {"name": f"x{c}", "a": [None if v is None else str(v) for v in seq]}
                for c, seq in self.values
            ],
        }
