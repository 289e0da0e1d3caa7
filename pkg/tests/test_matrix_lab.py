import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heavywigner.errors import DomainError, ResourceError
from heavywigner.graphs import Edge, StarTestGraph, cycle_graph, quotient_graph, set_partitions
from heavywigner.matrix_lab import (
    EnsembleSpec,
    empirical_phi,
    empirical_traffic_trace,
    ensemble_parameter,
    export_sample,
    ms_bound_check,
    normalized_hadamard_trace,
    replicate_seed,
    sample_matrix,
    simulate_phi,
    validate_parameter,
)

ER = EnsembleSpec("erdos_renyi", alpha=1)
LEVY = EnsembleSpec("truncated_levy", alpha_stable=1, cutoff=1)


def _uniform(rng, size):
    return rng.uniform(-1, 1, size) / 10


ENSEMBLES = [
    ER,
    EnsembleSpec("erdos_renyi", alpha=3),
    EnsembleSpec("network", alpha=2, weight="gaussian"),
    EnsembleSpec("network", alpha=2, weight="uniform"),
    LEVY,
    EnsembleSpec("truncated_levy", alpha_stable=1.5, cutoff=2),
    EnsembleSpec("custom", sampler=_uniform, table=(1,)),
]


# -- parameters -------------------------------------------------------------------

def test_ensemble_parameter_examples():
    assert ensemble_parameter(EnsembleSpec("erdos_renyi", alpha=2), 4).sequence(1) == (2, 2, 2, 2)
    assert ensemble_parameter(LEVY, 3).sequence(1) == (1, Fraction(1, 3), Fraction(1, 5))
    rad = ensemble_parameter(EnsembleSpec("network", alpha=Fraction(1, 2)), 3)
    assert rad.sequence(1) == (Fraction(1, 2),) * 3
    gauss = ensemble_parameter(EnsembleSpec("network", alpha=1, weight="gaussian"), 3)
    assert gauss.sequence(1) == (1, 3, 15)


def test_spec_validation():
    for bad in [dict(kind="erdos_renyi"), dict(kind="network", alpha=1, weight="cauchy"),
                dict(kind="truncated_levy", alpha_stable=2, cutoff=1), dict(kind="bogus")]:
        with pytest.raises(DomainError):
            EnsembleSpec(**bad)
    with pytest.raises(DomainError):
        sample_matrix(EnsembleSpec("erdos_renyi", alpha=5), 4, 0)
    assert EnsembleSpec.from_json({"kind": "erdos-renyi", "alpha": 1}) == ER


# -- sampling ------------------------------------------------------------------------

def test_erdos_renyi_values():
    M = sample_matrix(ER, 4, 11).entries
    assert np.array_equal(M, M.T) and not np.diagonal(M).any()
    off = M[~np.eye(4, dtype=bool)]
    assert set(off.tolist()) <= {-0.25, 0.75}


@pytest.mark.parametrize("spec", ENSEMBLES, ids=lambda s: s.kind)
def test_symmetry_and_determinism(spec):
    a = sample_matrix(spec, 30, replicate_seed(5, 1)).entries
    b = sample_matrix(spec, 30, replicate_seed(5, 1)).entries
    assert np.array_equal(a, b) and np.array_equal(a, a.T)


@pytest.mark.parametrize("spec", ENSEMBLES, ids=lambda s: s.kind)
def test_entries_are_centered(spec):
    vals = np.concatenate([sample_matrix(spec, 60, replicate_seed(17, r)).entries[np.triu_indices(60, 1)]
                           for r in range(6)])
    assert len(vals) >= 10**4
    stderr = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean()) <= 5 * stderr


def test_replicate_seeds_give_distinct_matrices():
    mats = [sample_matrix(ER, 40, replicate_seed(2024, r)).entries.tobytes() for r in range(200)]
    assert len(set(mats)) == len(mats)
    other = sample_matrix(ER, 40, replicate_seed(2024, 0, 1)).entries.tobytes()
    assert other not in mats


# -- empirical moments ---------------------------------------------------------------

def test_normalized_hadamard_trace():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((5, 5))
    A = A + A.T
    B = rng.standard_normal((5, 5))
    B = B + B.T
    D = rng.standard_normal(5)
    assert normalized_hadamard_trace((A, B), [("x1", "x2", "x1")]) == pytest.approx(np.trace(A @ B @ A) / 5)
    hadamard = np.trace((A @ A) * (B @ B)) / 5
    assert normalized_hadamard_trace((A, B), [("x1", "x1"), ("x2", "x2")]) == pytest.approx(hadamard)
    bound = {"x1": A, "y1": D}
    assert normalized_hadamard_trace(bound, [("x1", "y1", "x1")]) == pytest.approx(np.trace(A @ np.diag(D) @ A) / 5)
    with pytest.raises(DomainError):
        normalized_hadamard_trace((A, np.eye(3)), [("x1", "x2")])


def test_empirical_phi_summary():
    samples = [(sample_matrix(ER, 50, replicate_seed(1, r)).entries,) for r in range(8)]
    res = empirical_phi(samples, ("x1", "x1"))
    vals = [np.trace(s[0] @ s[0]) / 50 for s in samples]
    assert res.replicates == 8 and res.mean == pytest.approx(np.mean(vals))
    assert res.stderr == pytest.approx(np.std(vals, ddof=1) / math.sqrt(8))


def test_simulation_is_thread_independent():
    one = simulate_phi(ER, ("x1",) * 4, 80, 12, 99, threads=1)
    many = simulate_phi(ER, ("x1",) * 4, 80, 12, 99, threads=4)
    assert one.values == many.values and one.mean == many.mean


def _er_exact_moment(N, alpha, power):
    """E (1/N) Tr X^power by summing over all 2^(N(N-1)/2) adjacency patterns."""
    p = Fraction(alpha, N)
    pairs = list(itertools.combinations(range(N), 2))
    total = Fraction(0)
    for hits in itertools.product((0, 1), repeat=len(pairs)):
        prob = Fraction(1)
        M = [[Fraction(0)] * N for _ in range(N)]
        for (i, j), h in zip(pairs, hits):
            prob *= p if h else 1 - p
            M[i][j] = M[j][i] = (1 - p) if h else -p
        P = M
        for _ in range(power - 1):
            P = [[sum(P[i][k] * M[k][j] for k in range(N)) for j in range(N)] for i in range(N)]
        total += prob * sum(P[i][i] for i in range(N))
    return total / N


def er_moment_formula(N, alpha, power):
    p = Fraction(alpha, N)
    s2 = p * (1 - p)
    m4 = p * (1 - p) ** 4 + (1 - p) * p**4
    return (N - 1) * s2 if power == 2 else (N - 1) * m4 + 2 * (N - 1) * (N - 2) * s2**2


@pytest.mark.parametrize("N", [3, 4])
def test_finite_size_formulas_match_enumeration(N):
    for power in (2, 4):
        assert _er_exact_moment(N, 1, power) == er_moment_formula(N, 1, power)


def test_convergence_trend_x4():
    errors = {}
    for N in (250, 2000):
        res = simulate_phi(ER, ("x1",) * 4, N, 20, 4242)
        errors[N] = sum(abs(v - 3) for v in res.values) / len(res.values)
    assert errors[2000] < errors[250]


# -- traffic traces ----------------------------------------------------------------------

def _rational_matrix(rng, N, symmetric=True):
    M = np.empty((N, N), dtype=object)
    for i in range(N):
        for j in range(N):
            M[i, j] = Fraction(int(rng.integers(-3, 4)), int(rng.integers(1, 4)))
    if symmetric:
        for i in range(N):
            for j in range(i):
                M[i, j] = M[j, i]
    return M


def test_traffic_trace_examples():
    rng = np.random.default_rng(3)
    X = sample_matrix(ER, 6, 1).entries + np.diag(rng.standard_normal(6))
    loop = StarTestGraph(1, (Edge(0, 0, "x1"),))
    assert empirical_traffic_trace((X,), loop) == pytest.approx(np.trace(X) / 6)
    four = cycle_graph(["x1"] * 4)
    word = np.trace(np.linalg.matrix_power(X, 4)) / 6
    assert empirical_traffic_trace((X,), four) == pytest.approx(word)
    assert empirical_traffic_trace((X,), four, method="direct") == pytest.approx(word)


def test_cyclic_non_simple_graph_uses_direct_sum():
    rng = np.random.default_rng(8)
    X = _rational_matrix(rng, 4)
    figure_eight = StarTestGraph(3, (Edge(0, 1, "x1"), Edge(1, 0, "x1"), Edge(0, 2, "x1"), Edge(2, 0, "x1")))
    assert empirical_traffic_trace((X,), figure_eight) == empirical_traffic_trace((X,), figure_eight, method="direct")


def test_doubled_edge_on_erdos_renyi():
    T = StarTestGraph(2, (Edge(0, 1, "x1"), Edge(1, 0, "x1")))
    X = sample_matrix(ER, 1000, replicate_seed(8, 0)).entries
    assert empirical_traffic_trace((X,), T) == pytest.approx(1, abs=0.15)


small_graphs = st.integers(1, 4).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.sampled_from(["x1", "x2"]),
                       st.booleans()), max_size=3),
))


def _small_graph(n, extra):
    edges = [Edge(i - 1, i, "x1") for i in range(1, n)] + [Edge(*e) for e in extra]
    return StarTestGraph(n, tuple(edges))


@settings(max_examples=60, deadline=None)
@given(small_graphs, st.integers(1, 6), st.integers(0, 10**6))
def test_finite_n_mobius_consistency(spec, N, seed):
    T = _small_graph(*spec)
    rng = np.random.default_rng(seed)
    mats = (_rational_matrix(rng, N, symmetric=False), _rational_matrix(rng, N))
    trace = empirical_traffic_trace(mats, T, method="direct")
    assert isinstance(trace, Fraction)
    total = sum(empirical_traffic_trace(mats, quotient_graph(T, pi), injective=True, method="direct")
                for pi in set_partitions(T.n))
    assert total == trace
    assert empirical_traffic_trace(mats, T, injective=True) == \
        empirical_traffic_trace(mats, T, injective=True, method="direct")


def test_direct_sum_cap():
    T = StarTestGraph(7, tuple(Edge(i, i + 1, "x1") for i in range(6)))
    with pytest.raises(ResourceError):
        empirical_traffic_trace((np.eye(2),), T, method="direct")


# -- norm bound -----------------------------------------------------------------------------

def test_ms_bound_examples():
    rng = np.random.default_rng(1)
    mats = []
    for _ in range(3):
        A = rng.standard_normal((64, 64))
        A = A + A.T
        mats.append(A / np.linalg.norm(A, 2))
    star = StarTestGraph(4, (Edge(0, 1, "x1"), Edge(0, 2, "x2"), Edge(0, 3, "x3")))
    res = ms_bound_check(star, mats)
    assert res.satisfied and res.leaf_count == 3 and res.bound == pytest.approx(8.0)
    cyc = ms_bound_check(cycle_graph(["x1", "x2", "x3"]), mats)
    assert cyc.satisfied and cyc.leaf_count == 2
    assert ms_bound_check(StarTestGraph(2, (Edge(0, 1, "x1"), Edge(1, 0, "x1"))), mats).satisfied


def test_ms_bound_randomized_suite():
    rng = np.random.default_rng(20240601)
    for trial in range(100):
        n = int(rng.integers(1, 5))
        N = int(rng.integers(2, 9))
        extra = [(int(rng.integers(n)), int(rng.integers(n)), f"x{int(rng.integers(1, 3))}", bool(rng.integers(2)))
                 for _ in range(int(rng.integers(0, 4)))]
        T = _small_graph(n, extra)
        mats = []
        for _ in range(2):
            A = rng.standard_normal((N, N)) * rng.uniform(0.1, 3)
            mats.append(A / max(1.0, np.linalg.norm(A, 2)))
        assert ms_bound_check(T, mats).satisfied, (trial, T)


# -- parameter validity ------------------------------------------------------------------

def test_validate_parameter_examples():
    bad = validate_parameter([1, 2, 1])
    assert not bad.valid and bad.determinant == -3
    assert bad.witness == ((1, 2), (2, 1)) and bad.block == "odd"
    for alpha in [0, Fraction(1, 3), 1, 7]:
        assert validate_parameter([alpha] * 4).valid
    assert validate_parameter([2, 0, 0, 0, 0]).valid
    assert not validate_parameter([-1, 0, 0]).valid
    assert validate_parameter([1, 2, 1], m=1).valid


@given(st.lists(st.fractions(min_value=0, max_value=5, max_denominator=4), min_size=1, max_size=6))
def test_measures_give_valid_parameters(weights):
    # a_k = sum_i w_i t_i^(2k-2) is the moment sequence of a positive measure
    ts = [Fraction(i, 2) for i in range(len(weights))]
    seq = [sum(w * t ** (2 * k - 2) for w, t in zip(weights, ts)) for k in range(1, 7)]
    assert validate_parameter(seq).valid


# -- export ----------------------------------------------------------------------------------

def test_export_csv_and_npy(tmp_path):
    s = sample_matrix(ER, 5, replicate_seed(1, 2))
    path = tmp_path / "m.csv"
    export_sample(s, str(path))
    lines = path.read_text().splitlines()
    header = json.loads(lines[0][2:])
    assert header["N"] == 5 and header["ensemble"] == {"alpha": 1, "kind": "erdos_renyi"}
    back = np.loadtxt(path, delimiter=",", comments="#")
    assert np.array_equal(back, s.entries)
    export_sample(s, str(tmp_path / "m.npy"), "npy")
    assert np.array_equal(np.load(tmp_path / "m.npy"), s.entries)
    with pytest.raises(DomainError):
        export_sample(s, str(tmp_path / "m.txt"), "txt")
