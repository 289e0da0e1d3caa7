"""Monomial words, interleaved x/y words and models for the y matrices.

Letters are strings ``"x<j>"`` (heavy Wigner matrices) and ``"y<j>"`` (the
other family).  A monomial is a tuple of letters; the empty tuple is the
identity.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .errors import DomainError, ParseError, UnsupportedModelError
from .graphs import (
    Edge,
    StarTestGraph,
    injective_from_trace,
    limit_injective_trace,
    trace_from_injective,
)
from .params import HeavyParams
from .polynomial import ONE, ZERO, MomentPolynomial, symbol_key, to_fraction

Word = tuple[str, ...]

_TOKEN = re.compile(r"([xy])(\d*)(?:\^(\d+))?")


def parse_word(text: str) -> Word:
    """Parse ``"x1^2 y1 x2"`` into ``("x1", "x1", "y1", "x2")``.

    ``x`` and ``y`` without an index mean ``x1`` and ``y1``; a lone ``1`` is the
    identity.  Whitespace between tokens is optional.
    """
    letters: list[str] = []
    pos = 0
    text = text.rstrip()
    if text.strip() == "1":
        return ()
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r} in word {text!r}", pos)
        kind, idx, exp = m.groups()
        idx = int(idx) if idx else 1
        if idx < 1:
            raise ParseError(f"letter index must be >= 1 in {text!r}", pos)
        n = int(exp) if exp is not None else 1
        letters.extend([f"{kind}{idx}"] * n)
        pos = m.end()
    if not letters:
        raise ParseError(f"empty word {text!r}", 0)
    return tuple(letters)


def render_word(word: Sequence[str]) -> str:
    """Inverse of :func:`parse_word` with runs compressed: ``x1^2 y1``."""
    if not word:
        return "1"
    out = []
    i = 0
    while i < len(word):
        j = i
        while j < len(word) and word[j] == word[i]:
            j += 1
        out.append(word[i] if j - i == 1 else f"{word[i]}^{j - i}")
        i = j
    return " ".join(out)


def is_x(letter: str) -> bool:
    return letter.startswith("x")


def letter_index(letter: str) -> int:
    return int(letter[1:])


def y_label(word: Sequence[str]) -> str:
    """Edge label for a y-word: letters separated by spaces, ``"1"`` when empty."""
    return " ".join(word) if word else "1"


def label_word(label: str) -> Word:
    return () if label == "1" else tuple(label.split())


@dataclass(frozen=True)
class InterleavedWord:
    """P = Q_0 x_{c_1} P_1 x_{c_2} P_2 ... x_{c_L} P_L.

    ``head`` is the y-word Q_0 before the first heavy letter; ``slots[n]`` is
    the y-word following the n-th heavy letter.  With ``L = 0`` the whole word
    is ``head``.
    """

    colors: tuple[int, ...]
    slots: tuple[Word, ...]
    head: Word = ()

    def __post_init__(self):
        if len(self.colors) != len(self.slots):
            raise DomainError("need exactly one y-slot per heavy letter")

    @classmethod
    def from_letters(cls, letters: Sequence[str]) -> "InterleavedWord":
        head: list[str] = []
        colors: list[int] = []
        slots: list[list[str]] = []
        for letter in letters:
            if is_x(letter):
                colors.append(letter_index(letter))
                slots.append([])
            elif slots:
                slots[-1].append(letter)
            else:
                head.append(letter)
        return cls(tuple(colors), tuple(tuple(s) for s in slots), tuple(head))

    @classmethod
    def parse(cls, text: str) -> "InterleavedWord":
        return cls.from_letters(parse_word(text))

    @classmethod
    def pure_x(cls, colors: Sequence[int]) -> "InterleavedWord":
        return cls(tuple(colors), tuple(() for _ in colors))

    @property
    def length(self) -> int:
        return len(self.colors)

    def letters(self) -> Word:
        out = list(self.head)
        for c, s in zip(self.colors, self.slots):
            out.append(f"x{c}")
            out.extend(s)
        return tuple(out)

    def is_identity(self) -> bool:
        return not self.colors and not self.head

    def has_y(self) -> bool:
        return bool(self.head) or any(self.slots)

    def head_rotated(self) -> "InterleavedWord":
        """Move the leading y-block to the end of the last slot (trace-preserving for K = 1)."""
        if not self.head or not self.colors:
            return self
        slots = list(self.slots)
        slots[-1] = slots[-1] + self.head
        return InterleavedWord(self.colors, tuple(slots), ())

    def __str__(self) -> str:
        return render_word(self.letters())


def as_interleaved(word) -> InterleavedWord:
    if isinstance(word, InterleavedWord):
        return word
    if isinstance(word, str):
        return InterleavedWord.parse(word)
    return InterleavedWord.from_letters(tuple(word))


# ---------------------------------------------------------------------------
# y models
# ---------------------------------------------------------------------------

def canonical_diagonal_word(word: Iterable[str]) -> Word:
    return tuple(sorted(word, key=symbol_key))


def moment_symbol(word: Sequence[str]) -> str:
    return f"phi[{render_word(canonical_diagonal_word(word))}]"


@dataclass(frozen=True, eq=False)
class YModel:
    """How the y matrices enter: absent, diagonal, or through a traffic oracle.

    * ``none``: every y-slot must be the identity.
    * ``diagonal``: y matrices are diagonal; any test graph reduces to the
      moment functional of the product of its labels.  Missing moments stay
      symbolic (``phi[y1^2]``) unless ``symbolic`` is false.
    * ``traffic``: ``oracle(T)`` returns the limiting (non-injective) trace of a
      connected test graph whose labels are y-words.
    """

    kind: str
    moments: Mapping[Word, Fraction] = field(default_factory=dict)
    symbolic: bool = True
    oracle: Callable[[StarTestGraph], MomentPolynomial] | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("none", "diagonal", "traffic"):
            raise DomainError(f"unknown y-model kind {self.kind!r}")
        if self.kind == "traffic" and self.oracle is None:
            raise DomainError("a traffic y-model needs an oracle")
        object.__setattr__(self, "_cache", {})

    # -- constructors -------------------------------------------------
    @classmethod
    def none(cls) -> "YModel":
        return cls("none")

    @classmethod
    def diagonal(cls, moments: Mapping | None = None, symbolic: bool = True) -> "YModel":
        table: dict[Word, Fraction] = {}
        for key, value in (moments or {}).items():
            word = parse_word(key) if isinstance(key, str) else tuple(key)
            if any(is_x(l) for l in word):
                raise DomainError(f"diagonal moment key {key!r} contains a heavy letter")
            table[canonical_diagonal_word(word)] = to_fraction(value)
        return cls("diagonal", table, symbolic)

    @classmethod
    def diagonal_power_moments(cls, moments: Sequence, letter: str = "y1", symbolic: bool = True) -> "YModel":
        """Moments m_1, m_2, ... of a single diagonal matrix."""
        return cls.diagonal({(letter,) * (i + 1): m for i, m in enumerate(moments)}, symbolic)

    @classmethod
    def traffic(cls, oracle: Callable[[StarTestGraph], MomentPolynomial], name: str = "traffic") -> "YModel":
        return cls("traffic", oracle=oracle, name=name)

    @classmethod
    def heavy(cls, params: HeavyParams, letters: Mapping[str, int] | None = None) -> "YModel":
        """y letters are independent heavy Wigner matrices; ``letters`` maps ``y<j>`` to a color of ``params``."""
        letters = dict(letters or {f"y{c}": c for c in params.colors})
        cache: dict[StarTestGraph, MomentPolynomial] = {}

        def color_of(label: str) -> int:
            try:
                return letters[label]
            except KeyError:
                raise UnsupportedModelError(f"y letter {label!r} has no heavy parameter") from None

        def injective(G: StarTestGraph) -> MomentPolynomial:
            return limit_injective_trace(G, params, color_of)

        def oracle(T: StarTestGraph) -> MomentPolynomial:
            G = expand_word_labels(T)
            if G not in cache:
                cache[G] = trace_from_injective(G, injective)
            return cache[G]

        return cls("traffic", oracle=oracle, name="heavy")

    # -- evaluation ---------------------------------------------------
    def phi(self, word: Sequence[str]) -> MomentPolynomial:
        """Limiting normalized trace of a pure y-word."""
        return self.trace(StarTestGraph(1, (Edge(0, 0, y_label(tuple(word))),)) if word else StarTestGraph(1, ()))

    def diagonal_moment(self, word: Iterable[str]) -> MomentPolynomial:
        key = canonical_diagonal_word(word)
        if not key:
            return ONE
        if key in self.moments:
            return MomentPolynomial.constant(self.moments[key])
        if self.symbolic:
            return MomentPolynomial.symbol(moment_symbol(key))
        raise DomainError(f"no moment supplied for {render_word(key)}")

    def trace(self, T: StarTestGraph) -> MomentPolynomial:
        """tau[T] for a connected graph labelled by y-words."""
        if self.kind == "none":
            if any(e.label != "1" for e in T.edges):
                raise UnsupportedModelError("y letters need a diagonal or traffic y-model")
            return ONE
        if self.kind == "diagonal":
            letters: list[str] = []
            for e in T.edges:
                letters.extend(label_word(e.label))
            return self.diagonal_moment(letters)
        return self.oracle(T)

    def injective(self, T: StarTestGraph) -> MomentPolynomial:
        """tau0[T]: the injective version of :meth:`trace`."""
        if self.kind in ("none", "diagonal"):
            return self.trace(T) if T.n == 1 else ZERO
        cache = self._cache
        if T not in cache:
            cache[T] = injective_from_trace(T, self.trace)
        return cache[T]


def expand_word_labels(T: StarTestGraph) -> StarTestGraph:
    """Replace each edge labelled by a y-word with a directed path of single letters.

    Identity edges (label ``"1"``) identify their endpoints.  Star flags reverse
    and star the path, which only matters for non-symmetric letters.
    """
    n = T.n
    edges: list[Edge] = []
    merges: list[tuple[int, int]] = []
    for e in T.edges:
        word = label_word(e.label)
        if not word:
            merges.append((e.src, e.dst))
            continue
        if e.star:
            word = tuple(reversed(word))
        path = [e.src] + list(range(n, n + len(word) - 1)) + [e.dst]
        n += len(word) - 1
        for a, b, letter in zip(path, path[1:], word):
            edges.append(Edge(a, b, letter, e.star))
    G = StarTestGraph(n, tuple(edges)) if not merges else None
    if G is not None:
        return G
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in merges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    blocks: dict[int, list[int]] = {}
    for v in range(n):
        blocks.setdefault(find(v), []).append(v)
    # the unmerged multigraph may be disconnected; quotient through an explicit relabel
    order = sorted(blocks.values())
    block_of = {v: i for i, b in enumerate(order) for v in b}
    return StarTestGraph(len(order), tuple(Edge(block_of[e.src], block_of[e.dst], e.label, e.star) for e in edges))
