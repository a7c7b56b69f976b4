"""Acceptance criteria, one test each, every one printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -s`` (or execute this file directly)
to see the summary lines.
"""
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.linalg import expm as scipy_expm

from expkrylov.bseries import REFERENCE_COEFFICIENTS, TW_TREES, classify_order, scheme_bseries
from expkrylov.checks import lemma_krylov_powers, lemma_powers, lemma_reduced_phi, LEMMA_TOLERANCES
from expkrylov.cli import DEFAULT_M, observed_order, reference_solution
from expkrylov.integrators import SchemeSpec, integrate, step
from expkrylov.problems import allen_cahn, linear_problem, lorenz96, shallow_water
from expkrylov.tableaux import check_expk_order4, expk4_tableau

METHODS = ["expK", "exp4", "exp4k", "exp4sp", "erow4", "erow4k", "erow4sp"]
LORENZ_ORDERS = {"expK": 3.99, "exp4": 3.98, "exp4k": 3.97, "exp4sp": 2.97,
                 "erow4": 4.00, "erow4k": 2.97, "erow4sp": 2.96}


def report(number, title, ok, detail, elapsed, limit):
    in_time = elapsed < limit
    passed = ok and in_time
    tag = "PASS" if passed else "FAIL"
    timing = f"{elapsed:.2f}s < {limit:g}s" if in_time else f"{elapsed:.2f}s exceeds {limit:g}s"
    return passed, f"[{tag}] criterion {number}: {title}: {detail} ({timing})"


@pytest.fixture
def emit(capsys):
    def _emit(result):
        passed, line = result
        with capsys.disabled():
            print("\n" + line)
        assert passed, line

    return _emit


def criterion_1():
    t0 = time.perf_counter()
    rep = check_expk_order4(expk4_tableau())
    ok = rep.passed and all(isinstance(r, Fraction) for r in rep.residuals)
    detail = "all nine residuals exactly 0" if ok else f"nonzero: {rep.failures()}"
    return report(1, "exact order-4 conditions", ok, detail, time.perf_counter() - t0, 1)


def criterion_2():
    t0 = time.perf_counter()
    mismatches = []
    for name, listed in REFERENCE_COEFFICIENTS.items():
        got = scheme_bseries(name)
        mismatches += [(name, t.id) for t in TW_TREES if got[t.id] != listed[t.id - 1]]
    n = len(REFERENCE_COEFFICIENTS) * len(TW_TREES)
    detail = f"{n - len(mismatches)}/{n} reference entries reproduced"
    return report(2, "B-series table reproduction", not mismatches and n == 84, detail,
                  time.perf_counter() - t0, 5)


def criterion_3():
    t0 = time.perf_counter()
    want = {"expK": 4, "exp4k": 4, "exp4sp": 3, "erow4k": 3, "erow4sp": 3}
    got = {name: classify_order(scheme_bseries(name), 4) for name in want}
    detail = ", ".join(f"{k}={v}" for k, v in got.items())
    return report(3, "order classification", got == want, detail, time.perf_counter() - t0, 5)


def criterion_4():
    t0 = time.perf_counter()
    p = lorenz96()
    y0 = p.initial_state()
    hs = [0.3 / n for n in (20, 40, 80, 160)]
    ref = reference_solution(p, min(hs), cache_dir=None)
    slopes = {}
    for name in METHODS:
        spec = SchemeSpec.parse(name, M=DEFAULT_M[("lorenz96", 40)])
        errs = [np.linalg.norm(integrate(p, spec, h, 0.0, 0.3, y0)[0] - ref) / np.linalg.norm(ref)
                for h in hs]
        slopes[name] = observed_order(hs, errs)
    ok = all(abs(slopes[k] - v) <= 0.2 for k, v in LORENZ_ORDERS.items())
    detail = ", ".join(f"{k} {slopes[k]:.2f} (target {v:.2f})" for k, v in LORENZ_ORDERS.items())
    return report(4, "Lorenz-96 observed orders within 0.2", ok, detail, time.perf_counter() - t0, 120)


def criterion_5():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = {"powers": lemma_powers(rng, 100), "reduced phi": lemma_reduced_phi(rng, 100),
             "Krylov powers": lemma_krylov_powers(rng, 100)}
    ok = all(worst[k] <= LEMMA_TOLERANCES[k] for k in worst)
    detail = ", ".join(f"{k} {v:.1e} <= {LEMMA_TOLERANCES[k]:.0e}" for k, v in worst.items())
    return report(5, "lemma suites on 100 random instances", ok, detail, time.perf_counter() - t0, 30)


def criterion_6():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(10):
        N = int(rng.integers(2, 21))
        J = rng.standard_normal((N, N))
        y0 = rng.standard_normal(N)
        h = float(rng.uniform(0.05, 0.5))
        ref = scipy_expm(h * J) @ y0
        for name in METHODS:
            y, _ = step(linear_problem(J, y0), y0, h, SchemeSpec.parse(name, M=N))
            worst = max(worst, np.linalg.norm(y - ref) / np.linalg.norm(ref))
    return report(6, "linear exactness with M = N", worst <= 1e-9,
                  f"worst relative error {worst:.1e} over 10 systems x 7 methods",
                  time.perf_counter() - t0, 60)


def criterion_7():
    t0 = time.perf_counter()
    p = lorenz96()
    y = p.initial_state()
    want = {"expK": 1, "exp4k": 1, "exp4sp": 1, "erow4k": 1, "erow4sp": 1, "exp4": 3, "erow4": 3}
    got = {}
    for name in want:
        _, st = step(p, y, 0.01, SchemeSpec.parse(name, M=5))
        got[name] = st.krylov_projections
    detail = ", ".join(f"{k}={v}" for k, v in got.items())
    return report(7, "Krylov projections per step", got == want, detail, time.perf_counter() - t0, 10)


def criterion_8():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    eps = 1e-6
    worst = 0.0
    sw = shallow_water(32, 32)
    for p in (lorenz96(), sw, allen_cahn(50)):
        for _ in range(3):
            y = p.initial_state() + 0.05 * rng.standard_normal(p.dim)
            v = rng.standard_normal(p.dim)
            jv = p.jvp(0, y, v)
            fd = (p.rhs(0, y + eps * v) - p.rhs(0, y - eps * v)) / (2 * eps)
            worst = max(worst, np.linalg.norm(jv - fd) / np.linalg.norm(jv))
    n = sw.dim // 3
    mass = abs(sw.rhs(0, sw.initial_state() + 0.01 * rng.standard_normal(sw.dim))[2 * n:].sum())
    ok = worst <= 1e-6 and mass < 1e-12 * sw.dim
    detail = f"worst jvp mismatch {worst:.1e} <= 1e-06, mass drift {mass:.1e} < {1e-12 * sw.dim:.1e}"
    return report(8, "Jacobian consistency", ok, detail, time.perf_counter() - t0, 60)


def _pde_sweep(p, M, steps):
    t0_, tF = p.tspan
    hs = [(tF - t0_) / n for n in steps]
    y0 = p.initial_state()
    ref = reference_solution(p, min(hs), cache_dir=None)
    errors = {}
    for name in METHODS:
        spec = SchemeSpec.parse(name, M=M)
        errors[name] = [np.linalg.norm(integrate(p, spec, h, t0_, tF, y0)[0] - ref)
                        / np.linalg.norm(ref) for h in hs]
    return errors


def criterion_9():
    t0 = time.perf_counter()
    failures = []
    lines = []
    for p, key in ((shallow_water(32, 32), ("shallow_water", 32)), (allen_cahn(50), ("allen_cahn", 50))):
        try:
            errors = _pde_sweep(p, DEFAULT_M[key], (10, 20, 40, 80))
        except Exception as exc:  # instability or no convergence counts as failure
            failures.append(f"{p.name}: {type(exc).__name__}: {exc}")
            continue
        for name, errs in errors.items():
            if not all(b < a for a, b in zip(errs, errs[1:])):
                failures.append(f"{p.name} {name}: errors not decreasing {errs}")
        lines.append(f"{p.name} {len(errors)} methods x 4 step sizes")
    detail = "; ".join(lines) + (" | " + "; ".join(failures) if failures else ", all monotone")
    return report(9, "PDE work-precision smoke runs", not failures, detail,
                  time.perf_counter() - t0, 900)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda c: c.__name__)
def test_acceptance(criterion, emit):
    emit(criterion())


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    for _, line in results:
        print(line)
    raise SystemExit(0 if all(ok for ok, _ in results) else 1)
