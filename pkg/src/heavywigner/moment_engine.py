"""Limiting moments by enumeration of colored closed walks on plane trees.

Every moment is a sum over pairs (G, c): a rooted plane tree G and a closed
walk c from the root that visits every vertex, discovers children from left
to right and uses each edge with a single color.  The weight of (G, c) is the
product of a heavy Wigner part (one parameter a_{j,k} per edge visited 2k
times) and a traffic part built from the y-words read around each vertex.

Vertices are numbered in order of first visit, so a tree is stored as the
tuple of parents and a walk as the sequence of visited vertices.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from itertools import accumulate
from typing import Callable, Sequence

from .errors import DomainError, ResourceError, UnsupportedModelError
from .graphs import Edge, StarTestGraph
from .params import HeavyParams
from .polynomial import ONE, ZERO, MomentPolynomial, poly_prod, poly_sum
from .words import InterleavedWord, Word, YModel, as_interleaved, y_label

DEFAULT_NODE_CAP = 10**8


@dataclass(frozen=True)
class ColoredCycleOnTree:
    parents: tuple[int, ...]  # parents[0] == -1
    path: tuple[int, ...]  # visited vertices, starts and ends at the root 0
    colors: tuple[int, ...]  # color of each step

    @property
    def length(self) -> int:
        return len(self.colors)

    @property
    def vertex_count(self) -> int:
        return len(self.parents)

    def step_edge(self, n: int) -> int:
        """Edge used by step n, named by its child endpoint."""
        a, b = self.path[n], self.path[n + 1]
        return b if self.parents[b] == a else a

    def is_descent(self, n: int) -> bool:
        return self.parents[self.path[n + 1]] == self.path[n]

    def edge_visits(self) -> dict[int, int]:
        visits = {v: 0 for v in range(1, self.vertex_count)}
        for n in range(self.length):
            visits[self.step_edge(n)] += 1
        return visits

    def edge_colors(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for n in range(self.length):
            out.setdefault(self.step_edge(n), self.colors[n])
        return out

    def children(self, v: int) -> tuple[int, ...]:
        return tuple(w for w in range(1, self.vertex_count) if self.parents[w] == v)

    def depth(self, v: int) -> int:
        d = 0
        while v:
            v = self.parents[v]
            d += 1
        return d

    def is_double_tree(self) -> bool:
        """Every edge is visited exactly twice."""
        return all(c == 2 for c in self.edge_visits().values())


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

def _next_boundary(L: int, chain: Sequence[int] | None) -> tuple[int, ...]:
    """For each step n, the first prefix boundary b >= n + 1 where the walk must be at the root."""
    bounds = sorted(set(accumulate(chain))) if chain else [L]
    out = []
    i = 0
    for n in range(L):
        while bounds[i] < n + 1:
            i += 1
        out.append(bounds[i])
    return tuple(out)


class _Search:
    """Depth-first generation of walk prefixes with backtracking."""

    def __init__(self, gamma, nxt, stop_at, cap):
        self.gamma = gamma
        self.nxt = nxt
        self.L = len(gamma)
        self.stop_at = stop_at
        self.cap = cap
        self.nodes = 0
        self.out: list = []

    def run(self, state):
        parents, ecol, children, depth, path = state
        self.parents = list(parents)
        self.ecol = list(ecol)
        self.children = [list(c) for c in children]
        self.depth = list(depth)
        self.path = list(path)
        self._rec(len(path) - 1, path[-1])
        return self.out

    def _snapshot(self):
        return (tuple(self.parents), tuple(self.ecol), tuple(tuple(c) for c in self.children),
                tuple(self.depth), tuple(self.path))

    def _visit(self, n, w):
        self.path.append(w)
        self._rec(n + 1, w)
        self.path.pop()

    def _rec(self, n, cur):
        self.nodes += 1
        if self.cap is not None and self.nodes > self.cap:
            raise ResourceError(f"cycle enumeration exceeded {self.cap} search nodes")
        if n == self.L:
            if cur == 0:
                self.out.append(ColoredCycleOnTree(tuple(self.parents), tuple(self.path), self.gamma))
            return
        if n == self.stop_at:
            self.out.append(self._snapshot())
            return
        c = self.gamma[n]
        budget = self.nxt[n] - (n + 1)
        if cur and self.ecol[cur] == c and self.depth[cur] - 1 <= budget:
            self._visit(n, self.parents[cur])
        for ch in self.children[cur]:
            if self.ecol[ch] == c and self.depth[ch] <= budget:
                self._visit(n, ch)
        if self.depth[cur] + 1 <= budget:
            w = len(self.parents)
            self.parents.append(cur)
            self.ecol.append(c)
            self.children.append([])
            self.depth.append(self.depth[cur] + 1)
            self.children[cur].append(w)
            self._visit(n, w)
            self.children[cur].pop()
            self.depth.pop()
            self.children.pop()
            self.ecol.pop()
            self.parents.pop()


_ROOT_STATE = ((-1,), (0,), ((),), (0,), (0,))


def _expand_branch(args):
    gamma, nxt, state, cap = args
    return _Search(gamma, nxt, None, cap).run(state)


@lru_cache(maxsize=4096)
def _enumerate_cached(gamma, chain, cap):
    nxt = _next_boundary(len(gamma), chain)
    return tuple(_Search(gamma, nxt, None, cap).run(_ROOT_STATE))


def enumerate_cycles(gamma: Sequence[int], chain: Sequence[int] | None = None, *,
                     workers: int = 1, split_depth: int = 4,
                     node_cap: int | None = DEFAULT_NODE_CAP) -> list[ColoredCycleOnTree]:
    """All colored closed walks on plane trees with step colors ``gamma``.

    With ``chain = (L_1, ..., L_K)`` the walk must also be back at the root
    after each prefix L_1, L_1 + L_2, ...  The order is deterministic.  With
    ``workers > 1`` the search tree is cut at ``split_depth`` steps and the
    branches are expanded in separate processes; results are concatenated in
    branch order, so the output is identical to the serial run.
    """
    gamma = tuple(int(c) for c in gamma)
    L = len(gamma)
    if chain is not None:
        chain = tuple(int(x) for x in chain)
        if any(x < 0 for x in chain) or sum(chain) != L:
            raise DomainError(f"chain {chain} does not sum to the walk length {L}")
        if len(chain) == 1:
            chain = None
    if L % 2:
        return []
    if workers <= 1 or L <= split_depth:
        return list(_enumerate_cached(gamma, chain, node_cap))
    nxt = _next_boundary(L, chain)
    frontier = _Search(gamma, nxt, split_depth, node_cap).run(_ROOT_STATE)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_expand_branch, [(gamma, nxt, s, node_cap) for s in frontier])
        return [gc for part in parts for gc in part]


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

def hw_weight(gc: ColoredCycleOnTree, params: HeavyParams) -> MomentPolynomial:
    """Product over edges of a_{j(e), k(e)}, the edge being visited 2k(e) times."""
    colors = gc.edge_colors()
    factors = []
    for e, visits in sorted(gc.edge_visits().items()):
        factors.append(params.a(colors[e], visits // 2))
    return poly_prod(factors)


def _chain_successor(L: int, chain: Sequence[int] | None) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Next step within the same chain (wrapping to the chain start) and the chain start steps."""
    chain = tuple(chain) if chain else (L,)
    succ = [0] * L
    starts = []
    pos = 0
    for length in chain:
        if length:
            starts.append(pos)
            for i in range(length):
                succ[pos + i] = pos + (i + 1) % length
        pos += length
    return tuple(succ), tuple(starts)


def vertex_graphs(gc: ColoredCycleOnTree, y_slots: Sequence[Word], chain: Sequence[int] | None = None,
                  root_loops: Sequence[Word] = ()) -> list[StarTestGraph]:
    """The y-labelled test graph T_v around every tree vertex v.

    Nodes of T_v are the tree edges incident to v.  Each step n ending at v
    adds an edge labelled by its y-slot from the node of its own edge to the
    node of the next step's edge.  With several chains, the nodes of all
    chain-start edges at the root coincide (they share the Hadamard index);
    pure y-words in ``root_loops`` become loops at that node.
    """
    L = gc.length
    if len(y_slots) != L:
        raise DomainError("need one y-slot per step")
    succ, starts = _chain_successor(L, chain)
    edge = [gc.step_edge(n) for n in range(L)]
    ending: dict[int, list[int]] = {}
    for n in range(L):
        ending.setdefault(gc.path[n + 1], []).append(n)
    out = []
    for v in range(gc.vertex_count):
        node_key: dict[int, int] = {}
        if v == 0:
            glue = edge[starts[0]]
            for s in starts:
                node_key[edge[s]] = glue
        steps = ending.get(v, [])
        keys = sorted({node_key.get(edge[n], edge[n]) for n in steps}
                      | {node_key.get(edge[succ[n]], edge[succ[n]]) for n in steps})
        index = {k: i for i, k in enumerate(keys)}

        def node(e):
            return index[node_key.get(e, e)]

        edges = [Edge(node(edge[n]), node(edge[succ[n]]), y_label(y_slots[n])) for n in steps]
        if v == 0:
            edges += [Edge(node(edge[starts[0]]), node(edge[starts[0]]), y_label(w)) for w in root_loops]
        out.append(StarTestGraph(len(keys), tuple(edges)))
    return out


def traffic_weight(gc: ColoredCycleOnTree, y_slots: Sequence[Word], y: YModel,
                   chain: Sequence[int] | None = None, root_loops: Sequence[Word] = ()) -> MomentPolynomial:
    """Product over tree vertices v of tau[T_v] under the y-model."""
    if all(not s for s in y_slots) and not root_loops:
        return ONE
    if y.kind == "none":
        raise UnsupportedModelError("y letters need a diagonal or traffic y-model")
    if y.kind == "diagonal":
        # every T_v collapses to the moment of the product of its labels
        letters: dict[int, list[str]] = {}
        for n, slot in enumerate(y_slots):
            letters.setdefault(gc.path[n + 1], []).extend(slot)
        for w in root_loops:
            letters.setdefault(0, []).extend(w)
        return poly_prod(y.diagonal_moment(ls) for _, ls in sorted(letters.items()))
    return poly_prod(y.trace(T) for T in vertex_graphs(gc, y_slots, chain, root_loops))


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def normalize_arguments(words, y: YModel) -> tuple[list[InterleavedWord], list[Word]]:
    """Drop identities, move leading y-blocks behind the last heavy letter, split off pure y-words."""
    ws = [as_interleaved(w) for w in words]
    ws = [w for w in ws if not w.is_identity()]
    heavy, pure = [], []
    for w in ws:
        if not w.colors:
            pure.append(w.head)
            continue
        if w.head:
            if len(ws) > 1 and y.kind == "traffic":
                raise UnsupportedModelError(
                    "a y-block before the first heavy letter is only supported for a single word or diagonal y")
            w = w.head_rotated()
        heavy.append(w)
    return heavy, pure


def phi_k(words: Sequence, params: HeavyParams, y: YModel | None = None, *,
          workers: int = 1) -> MomentPolynomial:
    """Phi^(K)(P_1, ..., P_K): limit of E (1/N) Tr[P_1 o ... o P_K] (Hadamard product)."""
    y = y or YModel.none()
    heavy, pure = normalize_arguments(words, y)
    if not heavy:
        if not pure:
            return ONE
        return y.trace(StarTestGraph(1, tuple(Edge(0, 0, y_label(w)) for w in pure)))
    gamma = tuple(c for w in heavy for c in w.colors)
    chain = tuple(w.length for w in heavy)
    slots = tuple(s for w in heavy for s in w.slots)
    terms = []
    for gc in enumerate_cycles(gamma, chain, workers=workers):
        hw = hw_weight(gc, params)
        if hw.is_zero():
            continue
        terms.append(hw * traffic_weight(gc, slots, y, chain, pure))
    return poly_sum(terms)


def phi(word, params: HeavyParams, y: YModel | None = None, *, workers: int = 1) -> MomentPolynomial:
    """Phi(P): limit of E (1/N) Tr P for an interleaved word P."""
    return phi_k([word], params, y, workers=workers)


# ---------------------------------------------------------------------------
# unfolding
# ---------------------------------------------------------------------------

def _canonical(path: Sequence[int], parent_of: dict[int, int], colors) -> ColoredCycleOnTree:
    """Renumber vertices by first visit; the walk fixes the plane embedding."""
    ids = {}
    for v in path:
        ids.setdefault(v, len(ids))
    parents = [-1] * len(ids)
    for v, i in ids.items():
        if i:
            parents[i] = ids[parent_of[v]]
    return ColoredCycleOnTree(tuple(parents), tuple(ids[v] for v in path), tuple(colors))


def unfold_step(gc: ColoredCycleOnTree) -> ColoredCycleOnTree:
    """Split off the first excursion that re-enters an already visited edge.

    The excursion is moved onto a fresh copy of the subtree, hung as a new
    child of the same vertex; vertices no longer visited disappear.  Returns
    ``gc`` unchanged when every edge is entered only once.
    """
    seen = set()
    for n in range(gc.length):
        if not gc.is_descent(n):
            continue
        e = gc.path[n + 1]
        if e not in seen:
            seen.add(e)
            continue
        u = gc.path[n]
        m = n + 1
        while not (gc.path[m] == e and gc.path[m + 1] == u):
            m += 1
        fresh = gc.vertex_count
        copy: dict[int, int] = {}
        parent_of = {v: gc.parents[v] for v in range(1, gc.vertex_count)}
        path = list(gc.path)
        for i in range(n + 1, m + 1):
            v = gc.path[i]
            if v not in copy:
                copy[v] = fresh
                fresh += 1
            path[i] = copy[v]
        for v, c in copy.items():
            parent_of[c] = u if v == e else copy[gc.parents[v]]
        return _canonical(path, parent_of, gc.colors)
    return gc


def unfold(gc: ColoredCycleOnTree) -> ColoredCycleOnTree:
    """Iterate :func:`unfold_step` to its fixed point, a walk visiting every edge twice."""
    while True:
        nxt = unfold_step(gc)
        if nxt == gc:
            return gc
        gc = nxt


def unfold_by_depth(gc: ColoredCycleOnTree) -> ColoredCycleOnTree:
    """Direct construction: replay the depth profile, every descent creating a new child."""
    parents = [-1]
    path = [0]
    cur = 0
    for n in range(gc.length):
        if gc.is_descent(n):
            parents.append(cur)
            cur = len(parents) - 1
        else:
            cur = parents[cur]
        path.append(cur)
    return ColoredCycleOnTree(tuple(parents), tuple(path), gc.colors)


def unfold_fibers(gamma: Sequence[int]) -> dict[ColoredCycleOnTree, list[ColoredCycleOnTree]]:
    """Group the walks with colors ``gamma`` by their unfolding, in enumeration order."""
    fibers: dict[ColoredCycleOnTree, list[ColoredCycleOnTree]] = {}
    for gc in enumerate_cycles(gamma):
        fibers.setdefault(unfold(gc), []).append(gc)
    return fibers


# ---------------------------------------------------------------------------
# freeness defect
# ---------------------------------------------------------------------------

def _centered_square_product(x: str, yl: str, phi_x2: MomentPolynomial, phi_y2: MomentPolynomial):
    """Expand (x^2 - a)(y^2 - b)(x^2 - a)(y^2 - b) into {word: coefficient}."""
    factors = [((x, x), phi_x2), ((yl, yl), phi_y2), ((x, x), phi_x2), ((yl, yl), phi_y2)]
    expansion: dict[tuple[str, ...], MomentPolynomial] = {(): ONE}
    for letters, centre in factors:
        nxt: dict[tuple[str, ...], MomentPolynomial] = {}
        for w, c in expansion.items():
            for add, coeff in ((letters, c), ((), -c * centre)):
                key = w + add
                nxt[key] = nxt.get(key, ZERO) + coeff
        expansion = nxt
    return expansion


def freeness_defect(params: HeavyParams, y: YModel | None = None, *, x: str = "x1", y_letter: str = "y1",
                    phi_fn: Callable | None = None, phi_k_fn: Callable | None = None
                    ) -> tuple[MomentPolynomial, MomentPolynomial]:
    """(f, g) with f = Phi((x^2 - Phi x^2)(y^2 - Phi y^2)(x^2 - Phi x^2)(y^2 - Phi y^2))
    and g = Phi^(2)(y^2, y^2) - Phi(y^2)^2.

    ``y_letter`` may itself be a heavy letter such as ``"x2"``.  ``phi_fn`` and
    ``phi_k_fn`` select the engine (default: tree enumeration); they take a
    letter tuple (resp. a list of letter tuples), ``params`` and ``y``.
    """
    phi_fn = phi_fn or phi
    phi_k_fn = phi_k_fn or phi_k
    px2 = phi_fn((x, x), params, y)
    py2 = phi_fn((y_letter, y_letter), params, y)
    expansion = _centered_square_product(x, y_letter, px2, py2)
    f = poly_sum(c * phi_fn(w, params, y) for w, c in expansion.items() if not c.is_zero())
    g = phi_k_fn([(y_letter, y_letter), (y_letter, y_letter)], params, y) - py2 * py2
    return f, g
