"""Finite-N samplers, empirical traces and finite-N checks.

Random numbers come from numpy's Philox counter-based generator.  Replicate r
of a run with base seed s uses ``SeedSequence([s, r, i])`` for the i-th
matrix of the replicate, so results do not depend on scheduling or thread
count.  All ensembles are real symmetric with zero diagonal.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DomainError, ParseError, ResourceError
from .graphs import (
    StarTestGraph,
    euler_circuit,
    partition_mobius,
    quotient_graph,
    set_partitions,
    two_edge_structure,
)
from .params import HeavyParams
from .polynomial import to_fraction
from .words import as_interleaved, label_word

# even moments m_{2k} of the supported centered weight laws (unit variance)
WEIGHT_LAWS: dict[str, Callable[[int], Fraction]] = {
    "rademacher": lambda k: Fraction(1),
    "gaussian": lambda k: Fraction(math.prod(range(1, 2 * k, 2))),
    "uniform": lambda k: Fraction(3**k, 2 * k + 1),
}

DIRECT_VERTEX_CAP = 6


@dataclass(frozen=True)
class EnsembleSpec:
    """Sampling recipe for a heavy Wigner ensemble.

    ``erdos_renyi``: entries 1 - alpha/N with probability alpha/N, else -alpha/N.
    ``network``: Erdos-Renyi indicator times an independent centered weight.
    ``truncated_levy``: symmetric Pareto variables with P(|x| >= u) = u^-alpha_s
    (u >= 1), divided by B N^(1/alpha_s) and set to zero beyond that level.
    ``custom``: ``sampler(rng, size)`` returns off-diagonal entries at matrix
    scale and ``table`` lists a_1, a_2, ...
    """

    kind: str
    alpha: float | None = None
    weight: str = "rademacher"
    alpha_stable: float | None = None
    cutoff: float | None = None
    sampler: Callable | None = field(default=None, compare=False)
    table: tuple = ()

    def __post_init__(self):
        if self.kind == "erdos_renyi" or self.kind == "network":
            if self.alpha is None or not self.alpha > 0:
                raise DomainError(f"{self.kind} needs alpha > 0")
            if self.kind == "network" and self.weight not in WEIGHT_LAWS:
                raise DomainError(f"unknown weight law {self.weight!r}; known: {sorted(WEIGHT_LAWS)}")
        elif self.kind == "truncated_levy":
            if self.alpha_stable is None or not 0 < self.alpha_stable < 2:
                raise DomainError("truncated_levy needs 0 < alpha_stable < 2")
            if self.cutoff is None or not self.cutoff > 0:
                raise DomainError("truncated_levy needs cutoff > 0")
        elif self.kind == "custom":
            if self.sampler is None or not self.table:
                raise DomainError("custom ensembles need a sampler and a parameter table")
        else:
            raise DomainError(f"unknown ensemble kind {self.kind!r}")

    @classmethod
    def from_json(cls, data: Mapping) -> "EnsembleSpec":
        data = dict(data)
        kind = str(data.pop("kind", "")).replace("-", "_")
        allowed = {"alpha", "weight", "alpha_stable", "cutoff"}
        unknown = set(data) - allowed
        if unknown:
            raise ParseError(f"unknown ensemble fields {sorted(unknown)}")
        return cls(kind, **data)

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind in ("erdos_renyi", "network"):
            out["alpha"] = self.alpha
        if self.kind == "network":
            out["weight"] = self.weight
        if self.kind == "truncated_levy":
            out["alpha_stable"] = self.alpha_stable
            out["cutoff"] = self.cutoff
        if self.kind == "custom":
            out["table"] = [str(to_fraction(v)) for v in self.table]
        return out


def ensemble_parameter(spec: EnsembleSpec, k_max: int, color: int = 1) -> HeavyParams:
    """Closed-form limiting parameter a_1..a_{k_max} of the ensemble."""
    if spec.kind == "erdos_renyi":
        seq = [to_fraction(spec.alpha)] * k_max
    elif spec.kind == "network":
        seq = [to_fraction(spec.alpha) * WEIGHT_LAWS[spec.weight](k) for k in range(1, k_max + 1)]
    elif spec.kind == "truncated_levy":
        a = to_fraction(spec.alpha_stable)
        B = to_fraction(spec.cutoff)
        if a.denominator == 1 or B == 1:
            Ba = B ** a.numerator if a.denominator == 1 else Fraction(1)
            seq = [a / ((2 * k - a) * Ba) for k in range(1, k_max + 1)]
        else:  # B^alpha is irrational in general
            seq = [to_fraction(float(a) / ((2 * k - float(a)) * float(B) ** float(a))) for k in range(1, k_max + 1)]
    else:
        if len(spec.table) < k_max:
            raise DomainError(f"custom table has {len(spec.table)} entries, need {k_max}")
        seq = [to_fraction(v) for v in spec.table[:k_max]]
    return HeavyParams.build({color: seq}, k_max)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MatrixSample:
    N: int
    entries: np.ndarray
    seed: tuple[int, ...]
    ensemble: EnsembleSpec


def replicate_seed(base_seed: int, replicate: int, index: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(base_seed), int(replicate), int(index)])


def _generator(seed) -> np.random.Generator:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def _offdiagonal(spec: EnsembleSpec, N: int, rng: np.random.Generator, size: int) -> np.ndarray:
    if spec.kind in ("erdos_renyi", "network"):
        p = spec.alpha / N
        if p > 1:
            raise DomainError(f"alpha/N = {p} exceeds 1")
        hit = rng.random(size) < p
        if spec.kind == "erdos_renyi":
            return np.where(hit, 1.0 - p, -p)
        if spec.weight == "rademacher":
            w = rng.choice(np.array([-1.0, 1.0]), size)
        elif spec.weight == "gaussian":
            w = rng.standard_normal(size)
        else:
            w = rng.uniform(-math.sqrt(3), math.sqrt(3), size)
        return np.where(hit, w, 0.0)
    if spec.kind == "truncated_levy":
        a = spec.alpha_stable
        level = spec.cutoff * N ** (1.0 / a)
        u = 1.0 - rng.random(size)  # in (0, 1]
        x = u ** (-1.0 / a)
        sign = rng.choice(np.array([-1.0, 1.0]), size)
        return np.where(x <= level, sign * x / level, 0.0)
    return np.asarray(spec.sampler(rng, size), dtype=float)


def sample_matrix(spec: EnsembleSpec, N: int, seed) -> MatrixSample:
    """Real symmetric N x N sample, deterministic in (spec, N, seed)."""
    if N < 2:
        raise DomainError("N must be at least 2")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = _generator(ss)
    iu = np.triu_indices(N, 1)
    vals = _offdiagonal(spec, N, rng, len(iu[0]))
    M = np.zeros((N, N))
    M[iu] = vals
    M = M + M.T
    return MatrixSample(N, M, tuple(int(v) for v in np.atleast_1d(ss.entropy)) + tuple(ss.spawn_key), spec)


# ---------------------------------------------------------------------------
# empirical moments
# ---------------------------------------------------------------------------

def _binding(matrices, letter: str) -> np.ndarray:
    if isinstance(matrices, Mapping):
        if letter not in matrices:
            raise DomainError(f"no matrix bound to {letter}")
        m = matrices[letter]
    else:
        if not letter.startswith("x"):
            raise DomainError(f"positional bindings only cover heavy letters, not {letter}")
        idx = int(letter[1:]) - 1
        if idx >= len(matrices):
            raise DomainError(f"no matrix bound to {letter}")
        m = matrices[idx]
    return m.entries if isinstance(m, MatrixSample) else np.asarray(m)


def _dimension(matrices) -> int:
    items = matrices.values() if isinstance(matrices, Mapping) else matrices
    dims = {(_m.entries if isinstance(_m, MatrixSample) else np.asarray(_m)).shape[0] for _m in items}
    if len(dims) != 1:
        raise DomainError(f"bound matrices have different sizes {sorted(dims)}")
    return dims.pop()


class _WordProducts:
    """Products of sub-words for one set of bound matrices (1-D arrays are diagonal matrices)."""

    def __init__(self, matrices, N: int):
        self.matrices = matrices
        self.N = N
        self.cache: dict = {}

    def product(self, word: tuple[str, ...]):
        if not word:
            return None  # identity
        if word in self.cache:
            return self.cache[word]
        if len(word) == 1:
            value = _binding(self.matrices, word[0])
        else:
            mid = len(word) // 2
            value = _mul(self.product(word[:mid]), self.product(word[mid:]))
        self.cache[word] = value
        return value

    def diagonal(self, word: tuple[str, ...]) -> np.ndarray:
        if not word:
            return np.ones(self.N)
        if len(word) == 1:
            m = self.product(word)
            return m if m.ndim == 1 else np.diagonal(m).copy()
        mid = len(word) // 2
        A, B = self.product(word[:mid]), self.product(word[mid:])
        if A.ndim == 1 or B.ndim == 1:
            m = _mul(A, B)
            return m if m.ndim == 1 else np.diagonal(m).copy()
        return np.einsum("ij,ji->i", A, B)


def _mul(A, B):
    if A is None:
        return B
    if B is None:
        return A
    if A.ndim == 1 and B.ndim == 1:
        return A * B
    if A.ndim == 1:
        return A[:, None] * B
    if B.ndim == 1:
        return A * B[None, :]
    return A @ B


def normalized_hadamard_trace(matrices, words: Sequence) -> float:
    """(1/N) Tr[P_1 o ... o P_K] for one set of bound matrices."""
    N = _dimension(matrices)
    prods = _WordProducts(matrices, N)
    diag = np.ones(N)
    for w in words:
        diag = diag * prods.diagonal(as_interleaved(w).letters())
    return math.fsum(diag.tolist()) / N


@dataclass(frozen=True)
class EmpiricalResult:
    mean: float
    stderr: float
    replicates: int
    N: int
    seed: int | None = None
    values: tuple[float, ...] = ()

    def to_json(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "replicates": self.replicates, "N": self.N, "seed": self.seed}


def summarize(values: Sequence[float], N: int, seed: int | None = None) -> EmpiricalResult:
    n = len(values)
    mean = math.fsum(values) / n
    if n >= 2:
        var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
        stderr = math.sqrt(var / n)
    else:
        stderr = math.nan
    return EmpiricalResult(mean, stderr, n, N, seed, tuple(values))


def empirical_phi(samples: Sequence, words, threads: int | None = None) -> EmpiricalResult:
    """Mean and standard error of (1/N) Tr[P_1 o ... o P_K] over replicates.

    ``samples`` holds one binding per replicate: a tuple of matrices (x1, x2,
    ...) or a mapping from letters to matrices; 1-D arrays bind diagonal
    matrices.  ``words`` is a single word or a list of Hadamard factors.
    """
    words = words if isinstance(words, list) else [words]
    if not samples:
        raise DomainError("no samples")
    N = _dimension(samples[0])

    def one(binding):
        if _dimension(binding) != N:
            raise DomainError("replicates have different sizes")
        return normalized_hadamard_trace(binding, words)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        values = list(pool.map(one, samples))
    return summarize(values, N)


def simulate_phi(specs: EnsembleSpec | Mapping[str, EnsembleSpec], words, N: int, replicates: int,
                 base_seed: int, threads: int | None = None,
                 diagonals: Mapping[str, np.ndarray] | None = None) -> EmpiricalResult:
    """Sample ``replicates`` independent bindings and evaluate the word on each.

    Matrices are drawn inside the workers and discarded after evaluation.
    Replicate values are combined in replicate order, so the result is the
    same for any number of threads.
    """
    if isinstance(specs, EnsembleSpec):
        specs = {"x1": specs}
    words = words if isinstance(words, list) else [words]
    letters = sorted(specs)

    def one(r):
        binding = {l: sample_matrix(specs[l], N, replicate_seed(base_seed, r, i)).entries
                   for i, l in enumerate(letters)}
        binding.update(diagonals or {})
        return normalized_hadamard_trace(binding, words)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        values = list(pool.map(one, range(replicates)))
    return summarize(values, N, base_seed)


# ---------------------------------------------------------------------------
# traffic traces
# ---------------------------------------------------------------------------

def _edge_matrix(matrices, label: str, star: bool, N: int):
    word = label_word(label)
    if not word:
        M = np.eye(N, dtype=object) if _is_exact(matrices) else np.eye(N)
    else:
        M = None
        for l in word:
            B = _binding(matrices, l)
            B = np.diag(B) if B.ndim == 1 else B
            M = B if M is None else M @ B
    return M.T if star else M


def _is_exact(matrices) -> bool:
    items = matrices.values() if isinstance(matrices, Mapping) else matrices
    return any(np.asarray(m.entries if isinstance(m, MatrixSample) else m).dtype == object for m in items)


_SUBSCRIPTS = "abcdefghijklmnopqrstuvwxyz"


def _direct_sum(T: StarTestGraph, mats: list, N: int, injective: bool, exact: bool):
    if T.n > DIRECT_VERTEX_CAP:
        raise ResourceError(f"direct summation limited to {DIRECT_VERTEX_CAP} vertices")
    if exact:
        total = Fraction(0)
        labelings = itertools.permutations(range(N), T.n) if injective else itertools.product(range(N), repeat=T.n)
        for lab in labelings:
            prod = Fraction(1)
            for e, M in zip(T.edges, mats):
                prod *= M[lab[e.src], lab[e.dst]]
                if not prod:
                    break
            total += prod
        return total / N
    subs = ",".join(_SUBSCRIPTS[e.src] + _SUBSCRIPTS[e.dst] for e in T.edges)
    out = _SUBSCRIPTS[: T.n]
    if not injective:
        if not T.edges:
            return float(N ** T.n) / N
        return float(np.einsum(subs + "->", *mats, optimize=True)) / N
    full = np.einsum(subs + "->" + out, *mats, optimize=True) if T.edges else np.ones((N,) * T.n)
    idx = np.indices((N,) * T.n)
    mask = np.ones((N,) * T.n, dtype=bool)
    for a, b in itertools.combinations(range(T.n), 2):
        mask &= idx[a] != idx[b]
    return float(full[mask].sum()) / N


def _is_simple_cycle(T: StarTestGraph) -> bool:
    """Each vertex has one outgoing and one incoming edge, so the circuit word visits it once."""
    outs = [0] * T.n
    ins = [0] * T.n
    for e in T.edges:
        outs[e.src] += 1
        ins[e.dst] += 1
    return all(o == 1 for o in outs) and all(i == 1 for i in ins)


def empirical_traffic_trace(matrices, T: StarTestGraph, injective: bool = False, *,
                            method: str = "auto"):
    """tau_N[T] = (1/N) sum over vertex labelings of the product of entries (tau0_N: injective labelings).

    ``method`` is ``auto`` (simple directed cycles through the normalized
    trace of their word, others by direct summation; injective values by Mobius inversion
    over quotients), ``direct`` (always direct summation, the oracle) or
    ``mobius``.  Object arrays of Fractions give exact results.
    """
    N = _dimension(matrices)
    exact = _is_exact(matrices)
    if injective and method == "direct":
        mats = [_edge_matrix(matrices, e.label, e.star, N) for e in T.edges]
        return _direct_sum(T, mats, N, True, exact)
    if injective:
        total = Fraction(0) if exact else 0.0
        for pi in set_partitions(T.n):
            total += partition_mobius(pi) * empirical_traffic_trace(matrices, quotient_graph(T, pi), method=method)
        return total
    if method != "direct" and _is_simple_cycle(T):
        circuit = euler_circuit(T)
        if circuit is not None:
            if not circuit:
                return Fraction(N, N) if exact else 1.0
            M = None
            for i in circuit:
                e = T.edges[i]
                B = _edge_matrix(matrices, e.label, e.star, N)
                M = B if M is None else M @ B
            tr = sum(M[i, i] for i in range(N)) if exact else float(np.trace(M))
            return Fraction(tr) / N if exact else tr / N
    mats = [_edge_matrix(matrices, e.label, e.star, N) for e in T.edges]
    return _direct_sum(T, mats, N, False, exact)


# ---------------------------------------------------------------------------
# norm bound, parameter validity, export
# ---------------------------------------------------------------------------

def operator_norm(M: np.ndarray) -> float:
    M = np.asarray(M, dtype=float)
    return float(np.max(np.abs(M))) if M.ndim == 1 else float(np.linalg.norm(M, 2))


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    bound: float
    satisfied: bool
    leaf_count: int


def ms_bound_check(T: StarTestGraph, matrices) -> BoundCheck:
    """|tau_N[T]| against N^(r(T)/2 - 1) times the product of the edge operator norms."""
    N = _dimension(matrices)
    lhs = abs(float(empirical_traffic_trace(matrices, T)))
    r = two_edge_structure(T).leaf_count
    norms = math.prod(operator_norm(_edge_matrix(matrices, e.label, e.star, N)) for e in T.edges)
    bound = N ** (r / 2 - 1) * norms
    return BoundCheck(lhs, bound, lhs <= bound * (1 + 1e-9), r)


@dataclass(frozen=True)
class ParameterValidity:
    valid: bool
    witness: tuple[tuple[Fraction, ...], ...] | None = None
    determinant: Fraction | None = None
    block: str | None = None

    def to_json(self) -> dict:
        out: dict = {"valid": self.valid}
        if not self.valid:
            out["block"] = self.block
            out["witness"] = [[str(v) for v in row] for row in self.witness]
            out["determinant"] = str(self.determinant)
        return out


def _det(rows: Sequence[Sequence[Fraction]]) -> Fraction:
    A = [list(r) for r in rows]
    n = len(A)
    det = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if A[r][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            A[c], A[p] = A[p], A[c]
            det = -det
        det *= A[c][c]
        for r in range(c + 1, n):
            f = A[r][c] / A[c][c]
            if f:
                for k in range(c, n):
                    A[r][k] -= f * A[c][k]
    return det


def validate_parameter(a: Sequence, m: int | None = None) -> ParameterValidity:
    """Exact positive-semidefiniteness test of the Hankel blocks [a_{i+j+1}] and [a_{i+j+2}].

    Leading principal minors are tried first, then all principal minors; the
    first negative one is returned as the witness.  Block sizes are the
    largest the sequence supports (capped at ``m``).
    """
    a = [to_fraction(v) for v in a]
    if not a:
        raise DomainError("empty parameter sequence")
    sizes = {"odd": (len(a) + 1) // 2, "even": len(a) // 2}
    if m is not None:
        sizes = {k: min(v, m) for k, v in sizes.items()}
    blocks = {
        "odd": [[a[i + j] for j in range(sizes["odd"])] for i in range(sizes["odd"])],
        "even": [[a[i + j + 1] for j in range(sizes["even"])] for i in range(sizes["even"])],
    }
    for leading_only in (True, False):
        for name in ("odd", "even"):
            H = blocks[name]
            n = len(H)
            if leading_only:
                subsets = [tuple(range(s)) for s in range(1, n + 1)]
            else:
                subsets = [c for s in range(1, n + 1) for c in itertools.combinations(range(n), s)]
            for idx in subsets:
                sub = tuple(tuple(H[i][j] for j in idx) for i in idx)
                d = _det(sub)
                if d < 0:
                    return ParameterValidity(False, sub, d, name)
    return ParameterValidity(True)


def export_sample(sample: MatrixSample, path: str, fmt: str = "csv") -> None:
    """Write a sample as CSV (one comment header line, then rows) or as a .npy file."""
    if fmt == "npy":
        np.save(path, sample.entries)
        return
    if fmt != "csv":
        raise DomainError(f"unknown sample format {fmt!r}")
    header = {"N": sample.N, "seed": list(sample.seed), "ensemble": sample.ensemble.to_json(), "layout": "row-major"}
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        for row in sample.entries:
            writer.writerow([repr(float(v)) for v in row])
