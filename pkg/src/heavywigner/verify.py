"""Cross-engine verification suite behind ``heavywigner verify``."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .matrix_lab import validate_parameter
from .moment_engine import enumerate_cycles, hw_weight, phi, unfold, unfold_by_depth, unfold_fibers
from .params import HeavyParams
from .partition_oracle import phi_bruteforce
from .polynomial import MomentPolynomial, poly_sum
from .sd_solver import SDSolver, series_vs_sd_report
from .words import render_word

PARTITION_DEGREE_CAP = 8
UNFOLD_DEGREE_CAP = 8

EngineFn = Callable[[tuple, HeavyParams], MomentPolynomial]


@dataclass
class CheckResult:
    name: str
    ok: bool
    checked: int = 0
    counterexample: str | None = None
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"name": self.name, "ok": self.ok, "checked": self.checked}
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class VerificationReport:
    checks: list[CheckResult]
    moments: list[str]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def first_counterexample(self) -> str | None:
        for c in self.checks:
            if not c.ok:
                return c.counterexample
        return None

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "first_counterexample": self.first_counterexample,
            "moments": self.moments,
            "checks": [c.to_json() for c in self.checks],
        }


def _words(colors, degree):
    letters = [f"x{c}" for c in colors]
    for d in range(1, degree + 1):
        yield from itertools.product(letters, repeat=d)


def _check_engines(params, degree, tree_fn) -> CheckResult:
    solver = SDSolver(params)
    colors = params.colors[:2]
    n = 0
    for w in _words(colors, degree):
        tree = tree_fn(w, params)
        sd = solver.phi(w)
        values = {"tree": str(tree), "sd": str(sd)}
        same = tree == sd
        if len(w) <= PARTITION_DEGREE_CAP:
            part = phi_bruteforce(w, params)
            values["partition"] = str(part)
            same = same and part == tree
        n += 1
        if not same:
            return CheckResult("engines", False, n, render_word(w), values)
    return CheckResult("engines", True, n)


def _check_odd(params, degree, tree_fn) -> CheckResult:
    n = 0
    for w in _words(params.colors[:2], degree):
        if all(w.count(l) % 2 == 0 for l in set(w)):
            continue
        n += 1
        v = tree_fn(w, params)
        if not v.is_zero():
            return CheckResult("odd_vanishing", False, n, render_word(w), {"value": str(v)})
    return CheckResult("odd_vanishing", True, n)


def _check_catalan(degree, tree_fn) -> CheckResult:
    trivial = HeavyParams.trivial((1,), None, max(1, degree // 2))
    a = MomentPolynomial.symbol("a[1,1]")
    n = 0
    for k in range(1, degree // 2 + 1):
        w = ("x1",) * (2 * k)
        cat = math.comb(2 * k, k) // (k + 1)
        n += 1
        v = tree_fn(w, trivial)
        doubles = sum(1 for gc in enumerate_cycles((1,) * (2 * k)) if gc.is_double_tree())
        if v != cat * a**k or doubles != cat:
            return CheckResult("catalan", False, n, render_word(w), {"value": str(v), "double_trees": doubles})
    return CheckResult("catalan", True, n)


def _check_series(params, degree) -> CheckResult:
    report = series_vs_sd_report(params, degree, K_max=2)
    if report.ok:
        return CheckResult("series", True, report.checked)
    K, m, s, d = report.mismatch
    return CheckResult("series", False, report.checked, f"K={K} m={m}", {"series": str(s), "sd": str(d)})


def _check_unfold(params, degree) -> CheckResult:
    n = 0
    for L in range(2, min(degree, UNFOLD_DEGREE_CAP) + 1, 2):
        gamma = (1,) * L
        fibers = unfold_fibers(gamma)
        members = [gc for fib in fibers.values() for gc in fib]
        total = poly_sum(hw_weight(gc, params) for gc in members)
        ok = (
            len(members) == len(set(members)) == len(enumerate_cycles(gamma))
            and all(base.is_double_tree() and unfold(base) == base and base in fib for base, fib in fibers.items())
            and all(unfold(gc) == unfold_by_depth(gc) for gc in members)
            and total == phi(gamma_word(L), params)
        )
        n += 1
        if not ok:
            return CheckResult("unfold", False, n, render_word(gamma_word(L)))
    return CheckResult("unfold", True, n)


def gamma_word(L: int) -> tuple[str, ...]:
    return ("x1",) * L


def _check_validity() -> CheckResult:
    bad = validate_parameter([1, 2, 1])
    good = validate_parameter([Fraction(3, 2)] * 4)
    trivial = validate_parameter([2, 0, 0, 0])
    ok = (not bad.valid and bad.determinant == -3 and good.valid and trivial.valid
          and not validate_parameter([-1, 0, 0]).valid)
    return CheckResult("parameter_validity", ok, 4, None if ok else "(1,2,1)")


def run_verification(params: HeavyParams, degree: int = 8, tree_fn: EngineFn | None = None) -> VerificationReport:
    """Run every cross-check up to ``degree``.

    ``tree_fn(word, params)`` replaces the tree engine, which lets a test feed a
    deliberately broken engine and observe the reported counterexample.
    """
    tree_fn = tree_fn or (lambda w, p: phi(w, p))
    color = params.colors[0]
    moments = [str(tree_fn((f"x{color}",) * n, params)) for n in range(degree + 1)]
    checks = [
        _check_engines(params, degree, tree_fn),
        _check_odd(params, degree, tree_fn),
        _check_series(params, degree),
        _check_catalan(degree, tree_fn),
        _check_unfold(params, degree),
        _check_validity(),
    ]
    return VerificationReport(checks, moments)
