"""Builtin table of reference checks against published worked examples.

Each check returns a row ``(check_id, topic, expected, observed, passed)``.
A check that raises is recorded as a failed row carrying the error text.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .diagnostics import ultrafeller_counterexample_tv, ultrafeller_pf
from .errors import QuasiMarkovError
from .noise import sample_stationary_paths
from .prediction import interpolate_two_sided
from .skew import SkewSystem, binary_example_blocks, block_tv, evolve
from .spectral import (
    SpectralModel,
    Trilean,
    classify,
    covariance_from_spectrum,
    interpolation_variance,
    off_white_test,
    quasi_markov_test,
)

__all__ = ["VerificationRow", "verify_paper", "format_table", "CHECKS"]


@dataclass
class VerificationRow:
    check_id: str
    topic: str
    expected: str
    observed: str
    passed: bool
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "topic": self.topic,
            "expected": self.expected,
            "observed": self.observed,
            "pass": self.passed,
        }


def _ar1_covariance():
    c = covariance_from_spectrum(SpectralModel.ar1(0.5), 8).lags
    err = float(np.max(np.abs(c - 0.5 ** np.arange(9))))
    return "C_n = 0.5^n (|err| < 1e-10)", f"max |err| = {err:.2e}", err < 1e-10


def _ma1_quasi_markov():
    res = quasi_markov_test(SpectralModel.ma1())
    return "no", res.verdict.value, res.verdict is Trilean.NO


def _ma1_classification():
    c = classify(SpectralModel.ma1())
    obs = f"ergodic={c.ergodic}, sigma2={c.sigma2:.6f}, qm={c.quasi_markov.value}, ow={c.off_white.value}"
    ok = c.ergodic and abs(c.sigma2 - 1.0) < 1e-4 and c.quasi_markov is Trilean.NO and c.off_white is Trilean.NO
    return "ergodic=True, sigma2=1, qm=no, ow=no", obs, ok


def _ma1_interpolation_zero():
    v = interpolation_variance(SpectralModel.ma1())
    return "0", f"{v:g}", v == 0.0


def _ma1_interpolation_decreasing():
    cov = covariance_from_spectrum(SpectralModel.ma1(), 1000)
    errs = [interpolate_two_sided(cov, n).error_variance for n in (50, 100, 500)]
    ok = errs[-1] <= 0.01 and errs[0] > errs[1] > errs[2]
    return "<= 0.01 at N=500, decreasing", ", ".join(f"{e:.5f}" for e in errs), ok


def _ma1_empirical_c2():
    vals, _ = sample_stationary_paths(SpectralModel.ma1(), 100_000, 1, 20240601)
    x = vals[0]
    c2 = float(np.mean(x[:-2] * x[2:]))
    return "C_2 in 0 +- 0.015", f"{c2:+.5f}", abs(c2) < 0.015


def _power_law_quasi_markov():
    c = classify(SpectralModel.power_law(0.75))
    obs = f"qm={c.quasi_markov.value}, ow={c.off_white.value}"
    return "qm=yes, ow=no", obs, c.quasi_markov is Trilean.YES and c.off_white is Trilean.NO


def _power_law_off_white():
    res = off_white_test(SpectralModel.power_law(0.75))
    return "no", res.verdict.value, res.verdict is Trilean.NO


def _binary_uniform():
    worst = 0.0
    uniform = np.full(1 << 8, 1.0 / (1 << 8))
    for which in ("aligned", "anti"):
        law = binary_example_blocks(0.5, which, 8)
        worst = max(worst, 0.5 * float(np.sum(np.abs(law.probabilities - uniform))))
    return "TV to uniform < 1e-12 (k=8)", f"{worst:.2e}", worst < 1e-12


def _binary_distinct():
    tv = block_tv(binary_example_blocks(0.3, "aligned", 8), binary_example_blocks(0.3, "anti", 8))
    return "aligned vs anti TV > 0.05 (p=0.3, k=8)", f"{tv:.4f}", tv > 0.05


def _binary_invariant_set():
    sys = SkewSystem.binary_example(0.3)
    past = np.array([1, 0], dtype=np.int8)
    traj = evolve(sys, int(past[-1]), past, 200, 7)
    ok = bool(np.array_equal(traj.states[1:], traj.noise))
    return "x_n = w_n for all n", "holds" if ok else "violated", ok


def _ultrafeller_tv():
    tv = ultrafeller_counterexample_tv([1e-3]).tv[0]
    gap = abs(tv - 2.0 / math.pi)
    return "|TV(1e-3) - 2/pi| < 0.01", f"TV = {tv:.5f}, gap = {gap:.5f}", gap < 0.01


def _ultrafeller_pf():
    # exact gap is x (a - e/2) / (1 + x e) with a, e in [0, 2], so it sits under 2x
    xs = (1e-1, 1e-2, 1e-3)
    gaps = [abs(ultrafeller_pf(x) - ultrafeller_pf(0.0)) for x in xs]
    ok = all(g <= 2.0 * x for g, x in zip(gaps, xs)) and gaps[-1] < 0.02
    return "|Pf(x) - 1/2| <= 2x, < 0.02 at 1e-3", ", ".join(f"{g:.2e}" for g in gaps), ok


CHECKS: list[tuple[str, str, Callable[[], tuple[str, str, bool]]]] = [
    ("ar1-covariance", "autoregressive example", _ar1_covariance),
    ("ma1-quasi-markov", "MA(1) example", _ma1_quasi_markov),
    ("ma1-classify", "MA(1) example", _ma1_classification),
    ("ma1-interpolation-zero", "MA(1) example", _ma1_interpolation_zero),
    ("ma1-interpolation-window", "MA(1) example", _ma1_interpolation_decreasing),
    ("ma1-empirical-c2", "MA(1) example", _ma1_empirical_c2),
    ("power-law-classify", "power-law example", _power_law_quasi_markov),
    ("power-law-off-white", "power-law example", _power_law_off_white),
    ("binary-uniform-blocks", "binary example", _binary_uniform),
    ("binary-distinct-blocks", "binary example", _binary_distinct),
    ("binary-invariant-set", "binary example", _binary_invariant_set),
    ("ultrafeller-tv-limit", "counterexample kernel", _ultrafeller_tv),
    ("ultrafeller-pf-continuity", "counterexample kernel", _ultrafeller_pf),
]


def verify_paper(only: list[str] | None = None) -> list[VerificationRow]:
    """Run every reference check; failures and exceptions become rows."""
    rows = []
    for cid, topic, fn in CHECKS:
        if only and cid not in only:
            continue
        t0 = time.perf_counter()
        try:
            expected, observed, ok = fn()
        except (QuasiMarkovError, ArithmeticError, ValueError) as exc:
            expected, observed, ok = "completes", f"{type(exc).__name__}: {exc}", False
        rows.append(VerificationRow(cid, topic, expected, observed, bool(ok), time.perf_counter() - t0))
    return rows


def format_table(rows: list[VerificationRow]) -> str:
    head = ("check", "topic", "expected", "observed", "result")
    body = [(r.check_id, r.topic, r.expected, r.observed, "PASS" if r.passed else "FAIL") for r in rows]
    widths = [max(len(str(x[i])) for x in [head, *body]) for i in range(5)]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(line, widths)) for line in [head, *body]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
