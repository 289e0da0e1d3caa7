"""Acceptance criteria 1-7.  Each criterion computes a JSON-serialisable record;
criterion 7 recomputes all of them and compares the serialised bytes."""
import itertools
import json
import random
import time
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest

from heavywigner.graphs import (
    Edge,
    StarTestGraph,
    _is_connected,
    injective_from_trace,
    quotient_graph,
    set_partitions,
    trace_from_injective,
)
from heavywigner.matrix_lab import (
    EnsembleSpec,
    empirical_traffic_trace,
    ms_bound_check,
    simulate_phi,
    validate_parameter,
)
from heavywigner.moment_engine import enumerate_cycles, freeness_defect, hw_weight, phi, phi_k, unfold, unfold_fibers
from heavywigner.params import HeavyParams
from heavywigner.partition_oracle import phi_bruteforce, phi_bruteforce_k
from heavywigner.polynomial import poly_sum
from heavywigner.sd_solver import SDSolver, sd_phi, series_g
from heavywigner.words import YModel, parse_word

from _support import a

SYM = HeavyParams.symbolic((1, 2), 8)

# Monte Carlo fixture: base seed and the c/N finite-size allowances.  The
# allowances come from the exact finite-N expectations 1 - 2/N (x^2) and
# 3 - 15/N (x^4) for Erdos-Renyi with alpha = 1, and 1 - 2/N for the
# truncated Levy x^2.
MC_SEED = 20240917
MC_N = 2000
MC_REPS = 100
MC_ALLOWANCE = {"er_x2": 2.0, "er_x4": 16.0, "levy_x2": 2.0}

_records: dict[int, str] = {}


def _engines(words):
    words = [parse_word(w) for w in words]
    return {"tree": phi_k(words, SYM), "partition": phi_bruteforce_k(words, SYM), "sd": sd_phi(words, SYM)}


def _same(values):
    first = next(iter(values.values()))
    return all(v == first for v in values.values()), first


# -- criterion computations ------------------------------------------------------

def criterion_1():
    golden = {
        ("x1",): 0 * a(1, 1),
        ("x1^2",): a(1, 1),
        ("x1^4",): 2 * a(1, 1) ** 2 + a(1, 2),
        ("x1^2 x2^2 x1^2 x2^2",): 3 * a(1, 1) ** 2 * a(2, 1) ** 2 + a(1, 2) * a(2, 1) ** 2
        + a(1, 1) ** 2 * a(2, 2) + a(1, 2) * a(2, 2),
        ("x1^2", "x1^2"): a(1, 1) ** 2 + a(1, 2),
    }
    record, ok = {}, True
    for words, expected in golden.items():
        agree, value = _same(_engines(words))
        ok &= agree and value == expected
        record[" | ".join(words)] = str(value)
    engines = {
        "tree": (phi, phi_k),
        "partition": (phi_bruteforce, phi_bruteforce_k),
        "sd": (lambda w, p, y=None: sd_phi([w], p, y), lambda ws, p, y=None: sd_phi(ws, p, y)),
    }
    defects = {name: freeness_defect(SYM, None, x="x1", y_letter="x2", phi_fn=f, phi_k_fn=g)[0]
               for name, (f, g) in engines.items()}
    agree, f = _same(defects)
    ok &= agree and f == a(1, 2) * a(2, 2)
    record["f(x1,x2)"] = str(f)
    return ok, record


def criterion_2():
    agree, value = _same(_engines(["x1^6"]))
    expected = 5 * a(1, 1) ** 3 + 6 * a(1, 1) * a(1, 2) + a(1, 3)
    return agree and value == expected, {"x1^6": str(value)}


def _y_sweep_words():
    """Words over x1, x2, y1 of length <= 6 whose y-runs have length <= 2."""
    for L in range(1, 7):
        for word in itertools.product(["x1", "x2", "y1"], repeat=L):
            if "y1 y1 y1" in " ".join(word):
                continue
            yield word


def criterion_3():
    solver = SDSolver(SYM)
    pure = mismatches = 0
    for L in range(1, 9):
        for word in itertools.product(["x1", "x2"], repeat=L):
            pure += 1
            t, p, s = phi(word, SYM), phi_bruteforce(word, SYM), solver.phi(word)
            mismatches += not (t == p == s)
    y = YModel.diagonal()
    ysolver = SDSolver(SYM, y)
    mixed = 0
    for word in _y_sweep_words():
        mixed += 1
        t, p, s = phi(word, SYM, y), phi_bruteforce(word, SYM, y), ysolver.phi(word)
        mismatches += not (t == p == s)
    return mismatches == 0, {"pure_words": pure, "y_words": mixed, "mismatches": mismatches}


def criterion_4():
    params = HeavyParams.symbolic((1,), 6)
    table = series_g(params, 1, 12)
    solver = SDSolver(params)
    ok = all(table.c(1, n) == solver.phi(("x1",) * n) for n in range(13))
    trivial = series_g(HeavyParams.trivial((1,), None, 6), 1, 12)
    catalan = [1, 1, 2, 5, 14, 42, 132]
    ok &= all(trivial.c(1, 2 * k) == catalan[k] * a(1, 1) ** k for k in range(7))
    ok &= all(trivial.c(1, 2 * k + 1).is_zero() for k in range(6))
    return ok, {"c_1": [str(table.c(1, n)) for n in range(13)],
                "trivial": [str(trivial.c(1, n)) for n in range(13)]}


def _mc(spec, word, key):
    res = simulate_phi(spec, ("x1",) * word, MC_N, MC_REPS, MC_SEED)
    target = {2: 1.0, 4: 3.0}[word]
    slack = 4 * res.stderr + MC_ALLOWANCE[key] / MC_N
    return abs(res.mean - target) <= slack, {"mean": res.mean, "stderr": res.stderr, "target": target,
                                             "allowance": MC_ALLOWANCE[key], "N": MC_N, "reps": MC_REPS,
                                             "seed": MC_SEED}


def criterion_5():
    er = EnsembleSpec("erdos_renyi", alpha=1)
    levy = EnsembleSpec("truncated_levy", alpha_stable=1, cutoff=1)
    checks = {"er_x2": _mc(er, 2, "er_x2"), "er_x4": _mc(er, 4, "er_x4"), "levy_x2": _mc(levy, 2, "levy_x2")}
    return all(ok for ok, _ in checks.values()), {k: v for k, (_, v) in checks.items()}


def _iso_classes(n):
    pairs = list(itertools.combinations(range(n), 2))
    perms = list(itertools.permutations(range(n)))
    seen, out = set(), []
    for mask in range(1 << len(pairs)):
        es = [p for i, p in enumerate(pairs) if mask >> i & 1]
        if not _is_connected(n, [Edge(u, v, "x1") for u, v in es]):
            continue
        key = min(tuple(sorted(tuple(sorted((s[u], s[v]))) for u, v in es)) for s in perms)
        if key not in seen:
            seen.add(key)
            out.append(StarTestGraph(n, tuple(Edge(u, v, "x1") for u, v in key)))
    return out


def _round_trip(T, rng):
    table = {}

    def trace(Q):
        if Q not in table:
            table[Q] = Fraction(rng.randint(-50, 50), rng.randint(1, 9))
        return table[Q]

    @lru_cache(maxsize=None)
    def injective(Q):
        return injective_from_trace(Q, trace)

    return trace_from_injective(T, injective) == trace(T)


def _rational_matrix(rng, N):
    M = np.empty((N, N), dtype=object)
    for i in range(N):
        for j in range(N):
            M[i, j] = Fraction(rng.randint(-3, 3), rng.randint(1, 3))
    return M


def criterion_6():
    rng = random.Random(6)
    record = {}
    # Mobius round trip on every connected graph with <= 5 vertices (up to isomorphism)
    graphs = [T for n in range(1, 6) for T in _iso_classes(n)]
    record["round_trip_graphs"] = len(graphs)
    ok = all(_round_trip(T, rng) for T in graphs)
    # finite-N identity, exact rationals, every <= 4-vertex class with random labels and orientation
    small = [T for n in range(1, 5) for T in _iso_classes(n)]
    checked = 0
    for T in small:
        edges = tuple(Edge(*((e.src, e.dst) if rng.random() < 0.5 else (e.dst, e.src)),
                           rng.choice(["x1", "x2"])) for e in T.edges)
        T = StarTestGraph(T.n, edges + (Edge(0, 0, "x2"),))
        for N in range(1, 7):
            mats = (_rational_matrix(rng, N), _rational_matrix(rng, N))
            lhs = empirical_traffic_trace(mats, T, method="direct")
            rhs = sum(empirical_traffic_trace(mats, quotient_graph(T, pi), injective=True, method="direct")
                      for pi in set_partitions(T.n))
            ok &= lhs == rhs
            checked += 1
    record["finite_n_checks"] = checked
    # operator-norm bound on 100 randomized norm-bounded instances
    nrng = np.random.default_rng(35)
    violations = 0
    for _ in range(100):
        n = int(nrng.integers(1, 5))
        N = int(nrng.integers(2, 9))
        edges = [Edge(i - 1, i, "x1") for i in range(1, n)]
        edges += [Edge(int(nrng.integers(n)), int(nrng.integers(n)), f"x{int(nrng.integers(1, 3))}",
                       bool(nrng.integers(2))) for _ in range(int(nrng.integers(0, 4)))]
        mats = []
        for _ in range(2):
            A = nrng.standard_normal((N, N)) * nrng.uniform(0.1, 3)
            mats.append(A / max(1.0, np.linalg.norm(A, 2)))
        violations += not ms_bound_check(StarTestGraph(n, tuple(edges)), mats).satisfied
    ok &= violations == 0
    record["ms_violations"] = violations
    # unfold fibers partition the walks and reproduce phi, for every color word of length <= 6
    fibers_checked = 0
    for L in range(0, 7, 2):
        for gamma in itertools.product((1, 2), repeat=L):
            fibers = unfold_fibers(gamma)
            members = [gc for f in fibers.values() for gc in f]
            word = tuple(f"x{c}" for c in gamma)
            ok &= len(members) == len(set(members)) == len(enumerate_cycles(gamma))
            ok &= all(b.is_double_tree() and unfold(b) == b for b in fibers)
            ok &= poly_sum(hw_weight(gc, SYM) for gc in members) == phi(word, SYM)
            fibers_checked += 1
    record["unfold_words"] = fibers_checked
    record["x6_fiber_sizes"] = sorted(len(f) for f in unfold_fibers((1,) * 6).values())
    bad = validate_parameter([1, 2, 1])
    ok &= not bad.valid and bad.determinant == -3
    ok &= all(validate_parameter([alpha] * 4).valid for alpha in (0, Fraction(1, 2), 1, 5))
    record["validity"] = bad.to_json()
    return ok, record


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6}
LIMITS = {1: 10, 3: 300, 4: 60, 5: 300}


def _serialise(record):
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def _run(n):
    start = time.perf_counter()
    ok, record = CRITERIA[n]()
    elapsed = time.perf_counter() - start
    _records[n] = _serialise(record)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f} s) {_records[n][:200]}")
    assert ok, record
    if n in LIMITS:
        assert elapsed < LIMITS[n], f"criterion {n} took {elapsed:.1f} s, limit {LIMITS[n]} s"


@pytest.mark.criterion(1)
def test_criterion_1_golden_moments():
    _run(1)


@pytest.mark.criterion(2)
def test_criterion_2_degree_six():
    _run(2)


@pytest.mark.criterion(3)
def test_criterion_3_cross_engine_sweep():
    _run(3)


@pytest.mark.criterion(4)
def test_criterion_4_series():
    _run(4)


@pytest.mark.criterion(5)
def test_criterion_5_monte_carlo():
    _run(5)


@pytest.mark.criterion(6)
def test_criterion_6_property_suites():
    _run(6)


@pytest.mark.criterion(7)
def test_criterion_7_determinism():
    for n in CRITERIA:
        if n not in _records:  # the criterion itself was deselected
            _records[n] = _serialise(CRITERIA[n]()[1])
        again = _serialise(CRITERIA[n]()[1])
        assert again == _records[n], f"criterion {n} output changed between runs"
