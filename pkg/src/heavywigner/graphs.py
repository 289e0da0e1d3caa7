"""Test graphs: quotients, Mobius inversion, bridges, fat trees, free products.

A :class:`StarTestGraph` is a finite connected directed multigraph on the
vertices ``0..n-1`` whose edges carry a string label (``"x1"``, a y-word such
as ``"y1 y1"``, or ``"1"`` for the identity) and a star flag.  All objects are
immutable; every operation here is a pure function.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, NamedTuple, Sequence

from .errors import DomainError, ParseError, ResourceError, TruncationError
from .params import HeavyParams
from .polynomial import ONE, ZERO, MomentPolynomial, poly_prod

Partition = tuple[tuple[int, ...], ...]

DEFAULT_PARTITION_CAP = 10**6

_X_LABEL = re.compile(r"^x(\d+)$")


class Edge(NamedTuple):
    src: int
    dst: int
    label: str
    star: bool = False


@dataclass(frozen=True)
class StarTestGraph:
    n: int
    edges: tuple[Edge, ...]

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("a test graph needs at least one vertex")
        edges = tuple(Edge(*e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        for e in edges:
            if not (0 <= e.src < self.n and 0 <= e.dst < self.n):
                raise DomainError(f"edge {e} has an endpoint outside 0..{self.n - 1}")
        if not _is_connected(self.n, edges):
            raise DomainError("test graph must be connected")

    @classmethod
    def from_edges(cls, edges: Sequence[Sequence], n: int | None = None) -> "StarTestGraph":
        es = [Edge(int(e[0]), int(e[1]), str(e[2]), bool(e[3]) if len(e) > 3 else False) for e in edges]
        if n is None:
            n = 1 + max((max(e.src, e.dst) for e in es), default=0)
        return cls(n, tuple(es))

    @classmethod
    def from_json(cls, data: Mapping) -> "StarTestGraph":
        try:
            n = int(data["vertices"])
            edges = [Edge(int(s), int(d), str(lab), bool(star)) for s, d, lab, star in data["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed graph JSON: {exc}") from exc
        return cls(n, tuple(edges))

    def to_json(self) -> dict:
        return {"vertices": self.n, "edges": [[e.src, e.dst, e.label, e.star] for e in self.edges]}

    def labels(self) -> set[str]:
        return {e.label for e in self.edges}

    def degree_balance(self) -> list[int]:
        """out-degree minus in-degree per vertex (loops contribute zero)."""
        bal = [0] * self.n
        for e in self.edges:
            bal[e.src] += 1
            bal[e.dst] -= 1
        return bal


def _is_connected(n: int, edges: Sequence[Edge]) -> bool:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    comps = n
    for e in edges:
        a, b = find(e.src), find(e.dst)
        if a != b:
            parent[a] = b
            comps -= 1
    return comps == 1


def x_color(label: str) -> int:
    """Color index j of a heavy-Wigner label ``x<j>``."""
    m = _X_LABEL.match(label)
    if not m:
        raise DomainError(f"label {label!r} is not a heavy Wigner letter x<j>")
    return int(m.group(1))


# ---------------------------------------------------------------------------
# partitions
# ---------------------------------------------------------------------------

def bell_number(n: int) -> int:
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def restricted_growth_strings(n: int) -> Iterator[tuple[int, ...]]:
    """All restricted growth strings of length n in lexicographic order."""
    if n == 0:
        yield ()
        return
    rgs = [0] * n

    def rec(i: int, m: int):
        if i == n:
            yield tuple(rgs)
            return
        for v in range(m + 2):
            rgs[i] = v
            yield from rec(i + 1, max(m, v))

    rgs[0] = 0
    yield from rec(1, 0)


def rgs_to_partition(rgs: Sequence[int]) -> Partition:
    blocks: list[list[int]] = []
    for i, b in enumerate(rgs):
        if b == len(blocks):
            blocks.append([])
        blocks[b].append(i)
    return tuple(tuple(b) for b in blocks)


def set_partitions(n: int, cap: int | None = DEFAULT_PARTITION_CAP) -> Iterator[Partition]:
    """Partitions of ``range(n)``; blocks ordered by their least element."""
    if cap is not None and bell_number(n) > cap:
        raise ResourceError(f"Bell({n}) = {bell_number(n)} partitions exceeds the cap {cap}")
    for rgs in restricted_growth_strings(n):
        yield rgs_to_partition(rgs)


def canonical_partition(blocks, n: int) -> Partition:
    """Validate ``blocks`` as a partition of ``range(n)`` and put it in canonical order."""
    seen: set[int] = set()
    out = []
    for b in blocks:
        b = tuple(sorted(int(v) for v in b))
        if not b:
            raise DomainError("partition blocks must be nonempty")
        if seen.intersection(b):
            raise DomainError("partition blocks overlap")
        seen.update(b)
        out.append(b)
    if seen != set(range(n)):
        raise DomainError(f"partition does not cover exactly the vertices 0..{n - 1}")
    return tuple(sorted(out))


def partition_mobius(partition: Partition) -> int:
    """Mobius function mu(0_n, pi) of the partition lattice."""
    out = 1
    for b in partition:
        k = len(b)
        out *= (-1) ** (k - 1) * math.factorial(k - 1)
    return out


def quotient_graph(T: StarTestGraph, partition) -> StarTestGraph:
    """Identify the vertices inside each block; blocks become vertices in order of least element."""
    partition = canonical_partition(partition, T.n)
    block_of = [0] * T.n
    for i, b in enumerate(partition):
        for v in b:
            block_of[v] = i
    edges = tuple(Edge(block_of[e.src], block_of[e.dst], e.label, e.star) for e in T.edges)
    return StarTestGraph(len(partition), edges)


def injective_from_trace(T: StarTestGraph, trace_oracle: Callable[[StarTestGraph], object],
                         cap: int | None = DEFAULT_PARTITION_CAP):
    """tau0[T] = sum over partitions pi of tau[T^pi] * mu(pi)."""
    total = None
    for pi in set_partitions(T.n, cap):
        term = trace_oracle(quotient_graph(T, pi)) * partition_mobius(pi)
        total = term if total is None else total + term
    return total


def trace_from_injective(T: StarTestGraph, injective_oracle: Callable[[StarTestGraph], object],
                         cap: int | None = DEFAULT_PARTITION_CAP):
    """tau[T] = sum over partitions pi of tau0[T^pi]."""
    total = None
    for pi in set_partitions(T.n, cap):
        term = injective_oracle(quotient_graph(T, pi))
        total = term if total is None else total + term
    return total


# ---------------------------------------------------------------------------
# two-edge-connected structure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoEdgeStructure:
    components: tuple[tuple[int, ...], ...]
    bridges: tuple[int, ...]  # indices into T.edges
    component_tree: tuple[tuple[int, int], ...]  # pairs of component indices, one per bridge
    leaf_count: int


def find_bridges(n: int, edges: Sequence[Edge]) -> list[int]:
    """Indices of cut edges of the undirected multigraph (iterative Tarjan lowpoint)."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for idx, e in enumerate(edges):
        if e.src == e.dst:
            continue
        adj[e.src].append((e.dst, idx))
        adj[e.dst].append((e.src, idx))
    disc = [-1] * n
    low = [0] * n
    bridges = []
    clock = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = clock
        clock += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            v, via, it = stack[-1]
            advanced = False
            for w, idx in it:
                if idx == via:
                    continue
                if disc[w] == -1:
                    disc[w] = low[w] = clock
                    clock += 1
                    stack.append((w, idx, iter(adj[w])))
                    advanced = True
                    break
                low[v] = min(low[v], disc[w])
            if advanced:
                continue
            stack.pop()
            if stack:
                parent = stack[-1][0]
                low[parent] = min(low[parent], low[v])
                if low[v] > disc[parent]:
                    bridges.append(via)
    return sorted(bridges)


def two_edge_structure(T: StarTestGraph) -> TwoEdgeStructure:
    bridges = find_bridges(T.n, T.edges)
    bridge_set = set(bridges)
    parent = list(range(T.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for idx, e in enumerate(T.edges):
        if idx not in bridge_set:
            a, b = find(e.src), find(e.dst)
            if a != b:
                parent[max(a, b)] = min(a, b)
    groups: dict[int, list[int]] = {}
    for v in range(T.n):
        groups.setdefault(find(v), []).append(v)
    components = tuple(sorted(tuple(g) for g in groups.values()))
    comp_of = {v: i for i, comp in enumerate(components) for v in comp}
    tree = tuple((comp_of[T.edges[i].src], comp_of[T.edges[i].dst]) for i in bridges)
    if len(components) == 1:
        leaves = 2
    else:
        deg = [0] * len(components)
        for a, b in tree:
            deg[a] += 1
            deg[b] += 1
        leaves = sum(1 for d in deg if d == 1)
    return TwoEdgeStructure(components, tuple(bridges), tree, leaves)


# ---------------------------------------------------------------------------
# cyclicity, fat trees, limiting injective trace
# ---------------------------------------------------------------------------

def is_cyclic(T: StarTestGraph) -> bool:
    """True iff an orientation-respecting circuit uses every edge once."""
    return all(b == 0 for b in T.degree_balance())


@dataclass(frozen=True)
class FatEdge:
    u: int
    v: int
    multiplicity: int
    labels: tuple[str, ...]  # sorted distinct labels on this undirected edge


@dataclass(frozen=True)
class FatTreeProfile:
    edges: tuple[FatEdge, ...]

    def is_regular(self) -> bool:
        """All multiplicities even and one label per undirected edge."""
        return all(fe.multiplicity % 2 == 0 and len(fe.labels) == 1 for fe in self.edges)

    def type_by_label(self) -> dict[str, tuple[int, ...]]:
        """q_k counts (multiplicity 2k) per label; requires :meth:`is_regular`."""
        if not self.is_regular():
            raise DomainError("type is defined only for even, single-label fat trees")
        out: dict[str, list[int]] = {}
        for fe in self.edges:
            k = fe.multiplicity // 2
            q = out.setdefault(fe.labels[0], [])
            q.extend([0] * (k - len(q)))
            q[k - 1] += 1
        return {lab: tuple(q) for lab, q in sorted(out.items())}

    def type(self) -> tuple[int, ...]:
        """(q_1, q_2, ...) over all labels together."""
        q: list[int] = []
        for counts in self.type_by_label().values():
            q.extend([0] * (len(counts) - len(q)))
            for i, c in enumerate(counts):
                q[i] += c
        return tuple(q)


def fat_tree_profile(T: StarTestGraph) -> FatTreeProfile | None:
    """Profile of T if its underlying simple undirected graph is a loop-free tree."""
    mult: dict[tuple[int, int], int] = {}
    labs: dict[tuple[int, int], set[str]] = {}
    for e in T.edges:
        if e.src == e.dst:
            return None
        key = (min(e.src, e.dst), max(e.src, e.dst))
        mult[key] = mult.get(key, 0) + 1
        labs.setdefault(key, set()).add(e.label)
    if len(mult) != T.n - 1:
        return None  # connected with n-1 distinct pairs <=> tree
    return FatTreeProfile(tuple(FatEdge(u, v, mult[(u, v)], tuple(sorted(labs[(u, v)]))) for u, v in sorted(mult)))


def limit_injective_trace(T: StarTestGraph, params: HeavyParams,
                          color_of: Callable[[str], int] = x_color) -> MomentPolynomial:
    """Limiting injective trace of independent heavy Wigner matrices on T.

    Nonzero only for loop-free fat trees whose undirected edges have even
    multiplicity 2k and a single label x_j; the value is the product of a_{j,k}.
    """
    for lab in T.labels():
        color_of(lab)  # rejects foreign labels early
    profile = fat_tree_profile(T)
    if profile is None or not profile.is_regular():
        return ZERO
    factors = []
    for fe in profile.edges:
        k = fe.multiplicity // 2
        color = color_of(fe.labels[0])
        if k > params.k_max:
            raise TruncationError(color, k, params.k_max)
        factors.append(params.a(color, k))
    return poly_prod(factors) if factors else ONE


# ---------------------------------------------------------------------------
# free products
# ---------------------------------------------------------------------------

def family_components(T: StarTestGraph, family_of: Callable[[str], object]) -> list[tuple[object, tuple[int, ...], tuple[int, ...]]]:
    """Connected components of single-family edge sets as (family, vertices, edge indices)."""
    by_family: dict[object, list[int]] = {}
    for idx, e in enumerate(T.edges):
        by_family.setdefault(family_of(e.label), []).append(idx)
    out = []
    for fam in sorted(by_family, key=repr):
        idxs = by_family[fam]
        parent: dict[int, int] = {}

        def find(x):
            parent.setdefault(x, x)
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i in idxs:
            e = T.edges[i]
            a, b = find(e.src), find(e.dst)
            if a != b:
                parent[max(a, b)] = min(a, b)
        groups: dict[int, tuple[list[int], list[int]]] = {}
        for i in idxs:
            r = find(T.edges[i].src)
            groups.setdefault(r, ([], []))[1].append(i)
        for v in list(parent):
            r = find(v)
            groups.setdefault(r, ([], []))[0].append(v)
        for r in sorted(groups):
            verts, eids = groups[r]
            out.append((fam, tuple(sorted(set(verts))), tuple(sorted(eids))))
    return out


def is_free_product(T: StarTestGraph, family_of: Callable[[str], object] | Mapping[str, object]) -> bool:
    """True iff the incidence graph of single-family components and shared vertices is a tree."""
    if isinstance(family_of, Mapping):
        mapping = family_of

        def family_of(label, _m=mapping):
            try:
                return _m[label]
            except KeyError:
                raise DomainError(f"label {label!r} has no family") from None

    comps = family_components(T, family_of)
    return _incidence_is_tree(comps)


def _incidence_is_tree(comps) -> bool:
    if len(comps) <= 1:
        return True
    count: dict[int, int] = {}
    for _, verts, _ in comps:
        for v in verts:
            count[v] = count.get(v, 0) + 1
    shared = [v for v, c in count.items() if c >= 2]
    nodes = len(comps) + len(shared)
    links = sum(c for c in count.values() if c >= 2)
    # T connected => incidence graph connected, so tree <=> |E| = |V| - 1
    return links == nodes - 1


def component_subgraph(T: StarTestGraph, verts: Sequence[int], eids: Sequence[int]) -> StarTestGraph:
    index = {v: i for i, v in enumerate(verts)}
    return StarTestGraph(len(verts), tuple(
        Edge(index[T.edges[i].src], index[T.edges[i].dst], T.edges[i].label, T.edges[i].star) for i in eids))


def cycle_graph(labels: Sequence[str]) -> StarTestGraph:
    """Directed cycle 0 -> 1 -> ... -> 0 with the given edge labels (a single loop for one label)."""
    L = len(labels)
    if L == 0:
        return StarTestGraph(1, ())
    return StarTestGraph(L, tuple(Edge(i, (i + 1) % L, lab) for i, lab in enumerate(labels)))


def euler_circuit(T: StarTestGraph) -> list[int] | None:
    """Edge indices of an orientation-respecting circuit through every edge, or None."""
    if not is_cyclic(T):
        return None
    if not T.edges:
        return []
    out_edges: list[list[int]] = [[] for _ in range(T.n)]
    for idx, e in enumerate(T.edges):
        out_edges[e.src].append(idx)
    for lst in out_edges:
        lst.reverse()
    start = T.edges[0].src
    stack: list[tuple[int, int | None]] = [(start, None)]
    circuit: list[int] = []
    while stack:
        v, via = stack[-1]
        if out_edges[v]:
            idx = out_edges[v].pop()
            stack.append((T.edges[idx].dst, idx))
        else:
            stack.pop()
            if via is not None:
                circuit.append(via)
    circuit.reverse()
    return circuit
