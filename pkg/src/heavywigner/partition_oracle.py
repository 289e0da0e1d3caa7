"""Brute-force moments: sum over all vertex partitions of the word's cycle graph.

The word (or K words sharing a base vertex) is drawn as a directed cycle
alternating x-edges and y-slot edges.  For every partition of its vertices
the quotient must be a free product of the label families (one family per
heavy letter, one for all y letters); its value is the product of the
limiting injective traces of the single-family components.

This path shares no code with the tree enumeration beyond the graph
primitives, which makes it a useful independent check.
"""
from __future__ import annotations

from typing import Iterator, Sequence

from .errors import ResourceError
from .graphs import (
    DEFAULT_PARTITION_CAP,
    Edge,
    StarTestGraph,
    _incidence_is_tree,
    bell_number,
    component_subgraph,
    family_components,
    limit_injective_trace,
    quotient_graph,
)
from .params import HeavyParams
from .polynomial import ZERO, MomentPolynomial, poly_prod, poly_sum
from .words import YModel, as_interleaved, y_label


def word_graph(words: Sequence) -> StarTestGraph:
    """Cycle graph of P_1, ..., P_K glued at vertex 0.

    Each heavy letter gives an x-edge tail -> head; the y-slot after it runs
    from that head to the next tail (the last slot returns to vertex 0).  A
    leading y-block runs from 0 to the first tail; a pure y-word is a loop.
    """
    n = 1
    edges: list[Edge] = []
    for w in words:
        w = as_interleaved(w)
        if w.is_identity():
            continue
        if not w.colors:
            edges.append(Edge(0, 0, y_label(w.head)))
            continue
        if w.head:
            tail = n
            n += 1
            edges.append(Edge(0, tail, y_label(w.head)))
        else:
            tail = 0
        for i, (c, slot) in enumerate(zip(w.colors, w.slots)):
            head = n
            n += 1
            edges.append(Edge(tail, head, f"x{c}"))
            if i == w.length - 1:
                nxt = 0
            else:
                nxt = n
                n += 1
            edges.append(Edge(head, nxt, y_label(slot)))
            tail = nxt
    return StarTestGraph(n, tuple(edges))


def _family(label: str):
    return int(label[1:]) if label.startswith("x") and label[1:].isdigit() else "y"


def _partitions_avoiding(n: int, forbidden: Sequence[tuple[int, int]]) -> Iterator[tuple[int, ...]]:
    """Restricted growth strings of length n with rgs[a] != rgs[b] for every forbidden pair.

    A quotient that turns an x-edge into a loop has injective trace 0, so
    those partitions are skipped without changing the sum.
    """
    before: list[list[int]] = [[] for _ in range(n)]
    for a, b in forbidden:
        if a == b:
            return
        lo, hi = min(a, b), max(a, b)
        before[hi].append(lo)
    rgs = [0] * n

    def rec(i, m):
        if i == n:
            yield tuple(rgs)
            return
        for v in range(m + 2):
            if any(rgs[j] == v for j in before[i]):
                continue
            rgs[i] = v
            yield from rec(i + 1, max(m, v))

    if n == 0:
        yield ()
        return
    yield from rec(1, 0)


def _score(Q: StarTestGraph, params: HeavyParams, y: YModel) -> MomentPolynomial:
    comps = family_components(Q, _family)
    if not _incidence_is_tree(comps):
        return ZERO
    factors = []
    for fam, verts, eids in comps:
        sub = component_subgraph(Q, verts, eids)
        if fam == "y":
            factors.append(y.injective(sub))
        else:
            factors.append(limit_injective_trace(sub, params))
        if factors[-1].is_zero():
            return ZERO
    return poly_prod(factors)


def _contract(T: StarTestGraph, which: Sequence[int]) -> StarTestGraph:
    parent = list(range(T.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in which:
        a, b = find(T.edges[i].src), find(T.edges[i].dst)
        if a != b:
            parent[max(a, b)] = min(a, b)
    return quotient_graph(T, _blocks(T.n, find))


def _blocks(n, find):
    groups: dict[int, list[int]] = {}
    for v in range(n):
        groups.setdefault(find(v), []).append(v)
    return list(groups.values())


def phi_bruteforce_k(words: Sequence, params: HeavyParams, y: YModel | None = None, *,
                     cap: int | None = DEFAULT_PARTITION_CAP) -> MomentPolynomial:
    """Phi^(K) of the words by summing over partitions of their glued cycle graph.

    For the ``none`` and ``diagonal`` y-models a y-component has a nonzero
    injective trace only on a single vertex, so the y-edges are contracted
    first and only the remaining vertices are partitioned.
    """
    y = y or YModel.none()
    T = word_graph(words)
    y_edges = [i for i, e in enumerate(T.edges) if _family(e.label) == "y"]
    if y.kind in ("none", "diagonal"):
        T = _contract(T, y_edges)
    if cap is not None and bell_number(T.n) > cap:
        raise ResourceError(f"Bell({T.n}) = {bell_number(T.n)} partitions exceeds the cap {cap}")
    forbidden = [(e.src, e.dst) for e in T.edges if _family(e.label) != "y"]
    terms = []
    for rgs in _partitions_avoiding(T.n, forbidden):
        blocks: list[list[int]] = [[] for _ in range(max(rgs) + 1)] if rgs else [[]]
        for v, b in enumerate(rgs):
            blocks[b].append(v)
        Q = quotient_graph(T, blocks)
        terms.append(_score(Q, params, y))
    if not terms:
        return ZERO
    return poly_sum(terms)


def phi_bruteforce(word, params: HeavyParams, y: YModel | None = None, *,
                   cap: int | None = DEFAULT_PARTITION_CAP) -> MomentPolynomial:
    return phi_bruteforce_k([word], params, y, cap=cap)
