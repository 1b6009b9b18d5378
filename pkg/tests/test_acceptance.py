"""The eight acceptance criteria, each at its stated tolerance and time
budget.  One PASS/FAIL line per criterion is printed and repeated in the
terminal summary."""

import time
from pathlib import Path

import pytest

from conftest import ACCEPTANCE_LINES
from hsfl import verify

DESK = Path(__file__).resolve().parents[1] / "configs" / "desk.toml"


def check(number, title, run, budget):
    start = time.perf_counter()
    results = run()
    elapsed = time.perf_counter() - start
    ok = all(r.passed for r in results) and elapsed < budget
    detail = "; ".join(f"{r.name}: {r.detail}" for r in results)
    line = (f"{'PASS' if ok else 'FAIL'} criterion {number} ({title}) "
            f"{elapsed:.1f} s / {budget:g} s: {detail}")
    print(line)
    ACCEPTANCE_LINES.append(line)
    for r in results:
        assert r.passed, r.line()
    assert elapsed < budget, f"took {elapsed:.1f} s, budget {budget} s"


def test_criterion_1_latency_model():
    check(1, "latency model vs scalar recomputation", lambda: verify.latency_suite(1000), 10)


def test_criterion_2_frequency_allocator():
    check(2, "frequency allocator vs grid", lambda: verify.freq_suite(200), 60)


def test_criterion_3_power_allocator():
    check(3, "power allocator vs enumeration", lambda: verify.power_suite(200), 300)


def test_criterion_4_ga_vs_enumeration():
    check(4, "GA+SAA vs exhaustive cuts", lambda: verify.ga_suite(100), 300)


def test_criterion_5_split_equivalence():
    check(5, "split/unsplit training", verify.split_suite, 30)


def test_criterion_6_aggregation():
    check(6, "common-layer aggregation", verify.aggregation_suite, 5)


@pytest.mark.slow
def test_criterion_7_shape():
    check(7, "latency shape at desk scale", lambda: verify.shape_suite(DESK), 600)


def test_criterion_8_convergence():
    check(8, "toy convergence", verify.convergence_suite, 120)
