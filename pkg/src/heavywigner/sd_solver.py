"""Schwinger-Dyson recursion for Phi^(K) and the resolvent-type power series.

The recursion pivots on the first heavy letter x_j of the first argument:

    Phi^(K)(x_j P_1, P_2, ..., P_K)
        = sum_k a_{j,k} sum_{(L, R)} Phi^(k)(L_1, ..., L_k) Phi^(k+K-1)(R_1, ..., R_{k+K-1})

where (L, R) runs over the ways of selecting 2k occurrences of x_j (the
leading one included), pairing them consecutively inside each word, and
cutting out the blocks between paired letters (L) and the rest (R).  Only
diagonal (or absent) y matrices are supported.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterator, Sequence

from .errors import DomainError, ResourceError, UnsupportedModelError
from .params import HeavyParams
from .polynomial import ONE, ZERO, MomentPolynomial, poly_sum
from .words import Word, YModel, as_interleaved, canonical_diagonal_word, is_x

MAX_SERIES_ORDER = 64
MAX_SERIES_K = 64

Decomposition = tuple[tuple[Word, ...], tuple[Word, ...]]


def _letters(word) -> Word:
    return as_interleaved(word).letters()


# ---------------------------------------------------------------------------
# decompositions
# ---------------------------------------------------------------------------

def _compositions(total: int, parts: int, first_min: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        if total >= first_min:
            yield (total,)
        return
    for s in range(first_min, total + 1):
        for rest in _compositions(total - s, parts - 1, 0):
            yield (s,) + rest


def _cut(word: Word, chosen: Sequence[int], with_prefix: bool) -> tuple[list[Word], list[Word]]:
    Ls, Rs = [], []
    if with_prefix:
        Rs.append(word[: chosen[0]] if chosen else word)
    for i in range(0, len(chosen), 2):
        p, q = chosen[i], chosen[i + 1]
        Ls.append(word[p + 1 : q])
        end = chosen[i + 2] if i + 2 < len(chosen) else len(word)
        Rs.append(word[q + 1 : end])
    return Ls, Rs


def enumerate_decompositions(words: Sequence, j: int, k: int) -> list[Decomposition]:
    """All (L, R) families for pivot letter x_j and k selected pairs; |L| = k, |R| = k + K - 1."""
    ws = [_letters(w) for w in words]
    letter = f"x{j}"
    if not ws or not ws[0] or ws[0][0] != letter:
        raise DomainError(f"the first word must begin with {letter}")
    K = len(ws)
    positions = [[i for i, l in enumerate(w) if l == letter] for w in ws]
    out: list[Decomposition] = []
    for sizes in _compositions(k, K, 1):
        per_word = []
        for m, s in enumerate(sizes):
            if m == 0:
                choices = [(0,) + c for c in combinations(positions[0][1:], 2 * s - 1)]
            else:
                choices = list(combinations(positions[m], 2 * s))
            if not choices:
                break
            per_word.append(choices)
        else:
            for pick in _product(per_word):
                Ls: list[Word] = []
                Rs: list[Word] = []
                for m, chosen in enumerate(pick):
                    l_blocks, r_blocks = _cut(ws[m], chosen, with_prefix=m > 0)
                    Ls += l_blocks
                    Rs += r_blocks
                out.append((tuple(Ls), tuple(Rs)))
    return out


def _product(lists):
    if not lists:
        yield ()
        return
    for head in lists[0]:
        for rest in _product(lists[1:]):
            yield (head,) + rest


# ---------------------------------------------------------------------------
# canonical keys
# ---------------------------------------------------------------------------

def _blocks(word: Word) -> tuple[Word, tuple[tuple[str, Word], ...]]:
    """Split into the leading y-block and (heavy letter, following sorted y-block) pairs."""
    head: list[str] = []
    pairs: list[list] = []
    for l in word:
        if is_x(l):
            pairs.append([l, []])
        elif pairs:
            pairs[-1][1].append(l)
        else:
            head.append(l)
    return tuple(head), tuple((x, tuple(ys)) for x, ys in pairs)


def _flatten(pairs) -> Word:
    out: list[str] = []
    for x, ys in pairs:
        out.append(x)
        out.extend(ys)
    return tuple(out)


def _diag_form(word: Word) -> Word:
    """Move the leading y-block to the end and sort every y-block (diagonal y)."""
    head, pairs = _blocks(word)
    if head:
        x, ys = pairs[-1]
        pairs = pairs[:-1] + ((x, ys + head),)
    return _flatten((x, canonical_diagonal_word(ys)) for x, ys in pairs)


def _canonical_single(word: Word) -> Word:
    best = None
    for w in (word, tuple(reversed(word))):
        _, pairs = _blocks(_diag_form(w))
        for r in range(len(pairs)):
            cand = _flatten(pairs[r:] + pairs[:r])
            if best is None or cand < best:
                best = cand
    return best


def _canonical_member(word: Word) -> Word:
    return min(_diag_form(word), _diag_form(tuple(reversed(word))))


def moment_key(words: Sequence) -> tuple[Word, ...] | tuple[str, Word]:
    """Canonical form of an argument tuple of Phi^(K) for diagonal y.

    Returns a tuple of words (each starting with a heavy letter), or
    ``("y", w)`` when only y letters remain, in which case the value is the
    diagonal moment of ``w``.  Identity arguments disappear, pure y-words are
    absorbed into a heavy word, y-blocks commute, a single word is reduced up to
    rotation and reversal, several words up to reversal of each and order.
    """
    ws = [_letters(w) for w in words]
    ws = [w for w in ws if w]
    pure = [w for w in ws if not any(is_x(l) for l in w)]
    heavy = [w for w in ws if any(is_x(l) for l in w)]
    if not heavy:
        return ("y", canonical_diagonal_word(l for w in pure for l in w))
    extra = tuple(l for w in pure for l in w)
    heavy[0] = heavy[0] + extra
    if len(heavy) == 1:
        return (_canonical_single(heavy[0]),)
    return tuple(sorted(_canonical_member(w) for w in heavy))


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

class SDSolver:
    """Memoized evaluation of Phi^(K) by the Schwinger-Dyson recursion."""

    def __init__(self, params: HeavyParams, y: YModel | None = None):
        y = y or YModel.none()
        if y.kind == "traffic":
            raise UnsupportedModelError("the Schwinger-Dyson solver needs diagonal (or no) y matrices")
        self.params = params
        self.y = y
        self._memo: dict = {}
        self._lock = threading.Lock()

    def clear_cache(self) -> None:
        with self._lock:
            self._memo.clear()

    @property
    def cache_size(self) -> int:
        return len(self._memo)

    def phi(self, word) -> MomentPolynomial:
        return self.phi_k([word])

    def phi_k(self, words: Sequence) -> MomentPolynomial:
        return self._eval(moment_key(words))

    def _eval(self, key) -> MomentPolynomial:
        if key and key[0] == "y":
            if key[1] and self.y.kind == "none":
                raise UnsupportedModelError("y letters need a diagonal y-model")
            return self.y.diagonal_moment(key[1]) if key[1] else ONE
        if not key:
            return ONE
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        value = self._recurse(key)
        with self._lock:
            self._memo.setdefault(key, value)
        return value

    def _recurse(self, key: tuple[Word, ...]) -> MomentPolynomial:
        counts: dict[str, int] = {}
        for w in key:
            for l in w:
                if is_x(l):
                    counts[l] = counts.get(l, 0) + 1
        if any(c % 2 for c in counts.values()):
            return ZERO
        pivot = key[0][0]
        j = int(pivot[1:])
        terms = []
        for k in range(1, counts[pivot] // 2 + 1):
            decomps = enumerate_decompositions(key, j, k)
            if not decomps:
                continue
            inner = []
            for Ls, Rs in decomps:
                left = self._eval(moment_key(Ls))
                if left.is_zero():
                    continue
                inner.append(left * self._eval(moment_key(Rs)))
            if inner:
                terms.append(self.params.a(j, k) * poly_sum(inner))
        return poly_sum(terms)


def sd_phi(words, params: HeavyParams, y: YModel | None = None) -> MomentPolynomial:
    """Phi^(K) of a list of words (or Phi of a single word given as a string)."""
    if isinstance(words, str):
        words = [words]
    return SDSolver(params, y).phi_k(words)


# ---------------------------------------------------------------------------
# power series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeriesTable:
    """c_K[m], the coefficient of lambda^-(K+m) in G(K), for K = 0..K_max and m = 0..order."""

    color: int
    K_max: int
    order: int
    coefficients: tuple[tuple[MomentPolynomial, ...], ...]

    def c(self, K: int, m: int) -> MomentPolynomial:
        return self.coefficients[K][m]

    def to_json(self) -> list[dict]:
        return [
            {"K": K, "coefficients": [{"m": m, "value": v.to_json()} for m, v in enumerate(row)]}
            for K, row in enumerate(self.coefficients)
            if K >= 1
        ]


def series_g(params: HeavyParams, K_max: int, order: int, color: int | None = None) -> SeriesTable:
    """Coefficients of the series G(K) defined by G(0) = 1 and

        G(K) = (1/lambda) (G(K-1) + sum_k a_k binom(K+k-2, K-1) G(k) G(k+K-1)).

    Tables for K above ``K_max`` (up to K_max + order/2) are computed on the way.
    """
    if K_max < 0 or order < 0:
        raise DomainError("K_max and order must be non-negative")
    if order > MAX_SERIES_ORDER or K_max > MAX_SERIES_K:
        raise ResourceError(f"series limited to order <= {MAX_SERIES_ORDER} and K <= {MAX_SERIES_K}")
    color = params.colors[0] if color is None else color
    a = {k: params.a(color, k) for k in range(1, min(order // 2, params.k_max) + 1)}

    @lru_cache(maxsize=None)
    def c(K: int, m: int) -> MomentPolynomial:
        if K == 0:
            return ONE if m == 0 else ZERO
        total = [c(K - 1, m)]
        for k in range(1, m // 2 + 1):
            if k not in a:
                params.a(color, k)  # raises the truncation error
            inner = poly_sum(c(k, i) * c(k + K - 1, m - 2 * k - i) for i in range(m - 2 * k + 1))
            if not inner.is_zero():
                total.append(a[k] * math.comb(K + k - 2, K - 1) * inner)
        return poly_sum(total)

    rows = tuple(tuple(c(K, m) for m in range(order + 1)) for K in range(K_max + 1))
    return SeriesTable(color, K_max, order, rows)


@dataclass(frozen=True)
class SeriesReport:
    ok: bool
    checked: int
    mismatch: tuple[int, int, MomentPolynomial, MomentPolynomial] | None = None  # (K, m, series, sd)

    def to_json(self) -> dict:
        out = {"ok": self.ok, "checked": self.checked}
        if self.mismatch:
            K, m, s, d = self.mismatch
            out["mismatch"] = {"K": K, "m": m, "series": str(s), "sd": str(d)}
        return out


def _tuples(m: int, K: int) -> Iterator[tuple[int, ...]]:
    if K == 1:
        yield (m,)
        return
    for first in range(m + 1):
        for rest in _tuples(m - first, K - 1):
            yield (first,) + rest


def series_vs_sd_report(params: HeavyParams, degree: int, K_max: int = 2, color: int | None = None) -> SeriesReport:
    """Check c_K[m] = sum over n_1 + ... + n_K = m of Phi^(K)(x^n_1, ..., x^n_K) for m <= degree."""
    color = params.colors[0] if color is None else color
    table = series_g(params, K_max, degree, color)
    solver = SDSolver(params)
    letter = f"x{color}"
    checked = 0
    for K in range(1, K_max + 1):
        for m in range(degree + 1):
            sd = poly_sum(solver.phi_k([(letter,) * n for n in ns]) for ns in _tuples(m, K))
            checked += 1
            if sd != table.c(K, m):
                return SeriesReport(False, checked, (K, m, table.c(K, m), sd))
    return SeriesReport(True, checked)
