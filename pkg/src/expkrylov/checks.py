"""Verification suites shared by the ``verify`` subcommand and the tests."""
from dataclasses import dataclass

import numpy as np

from .bseries import TW_TREES, classify_order, scheme_bseries, reference_discrepancies, REFERENCE_COEFFICIENTS
from .krylov import apply_approx_jacobian, arnoldi, reduced_phi_apply
from .linalg import phi_matrix
from .tableaux import check_expk_order4, check_tk_conditions, expk4_tableau

EXPECTED_ORDERS = {"expK": 4, "exp4": 4, "exp4k": 4, "exp4sp": 3,
                   "erow4": 4, "erow4k": 3, "erow4sp": 3}


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str = ""

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.suite}: {self.name}" + (f" ({self.detail})" if self.detail else "")


def tableau_checks(tableau=None):
    t = tableau or expk4_tableau()
    out = []
    for label, r in check_expk_order4(t):
        out.append(CheckResult("tableaux", f"order-4 condition ({label})", r == 0,
                               "" if r == 0 else f"residual {r}"))
    tk = check_tk_conditions(t, 4)
    out.append(CheckResult("tableaux", "TK-tree conditions up to order 4", tk.passed,
                           ", ".join(f"{lab}: {r}" for lab, r in tk.failures())))
    order = classify_order(scheme_bseries(t), 4)
    out.append(CheckResult("tableaux", "B-series order of the tableau", order == 4, f"order {order}"))
    return out


def bseries_checks():
    out = []
    bad = reference_discrepancies()
    out.append(CheckResult("bseries", f"{len(REFERENCE_COEFFICIENTS)}x{len(TW_TREES)} reference coefficients",
                           not bad, "; ".join(f"{n} tree {i}: listed {p}, computed {c}"
                                              for n, i, p, c in bad)))
    for name, want in EXPECTED_ORDERS.items():
        got = classify_order(scheme_bseries(name), 4)
        out.append(CheckResult("bseries", f"order of {name}", got == want,
                               f"expected {want}, got {got}"))
    return out


def _instance(rng):
    n = int(rng.integers(4, 11))
    J = rng.standard_normal((n, n))
    b = rng.standard_normal(n)
    M = int(rng.integers(2, n + 1))
    return J, b, arnoldi(lambda v: J @ v, b, M)


def lemma_powers(rng, trials=100):
    """Worst relative gap between ``(V H V^T)^k x`` and ``V H^k V^T x``, k = 1..m."""
    worst = 0.0
    for _ in range(trials):
        J, b, basis = _instance(rng)
        V, H = basis.V, basis.H
        x = rng.standard_normal(J.shape[0])
        lhs = x
        for k in range(1, basis.m + 1):
            lhs = apply_approx_jacobian(basis, lhs)
            rhs = V @ (np.linalg.matrix_power(H, k) @ (V.T @ x))
            scale = np.linalg.norm(H, 2) ** k * np.linalg.norm(x)
            worst = max(worst, np.linalg.norm(lhs - rhs) / scale)
    return worst


def lemma_reduced_phi(rng, trials=100):
    """Worst relative gap between the reduced formula and a dense ``phi_k(s V H V^T) w``."""
    worst = 0.0
    for _ in range(trials):
        J, b, basis = _instance(rng)
        A = basis.V @ basis.H @ basis.V.T
        w = rng.standard_normal(J.shape[0])
        k = int(rng.integers(1, 5))
        s = float(rng.uniform(0.05, 1.0))
        dense = phi_matrix(k, s * A) @ w
        got = reduced_phi_apply(basis, k, s, w)
        worst = max(worst, np.linalg.norm(got - dense) / np.linalg.norm(dense))
    return worst


def lemma_krylov_powers(rng, trials=100):
    """Worst relative gap between ``A^k b`` and ``J^k b`` for k < m."""
    worst = 0.0
    for _ in range(trials):
        J, b, basis = _instance(rng)
        a = j = b
        for _k in range(1, basis.m):
            a = apply_approx_jacobian(basis, a)
            j = J @ j
            worst = max(worst, np.linalg.norm(a - j) / np.linalg.norm(j))
    return worst


LEMMA_TOLERANCES = {"powers": 1e-10, "reduced phi": 1e-10, "Krylov powers": 1e-9}


def lemma_checks(seed=0, trials=100):
    rng = np.random.default_rng(seed)
    out = []
    for name, fn in (("powers", lemma_powers), ("reduced phi", lemma_reduced_phi),
                     ("Krylov powers", lemma_krylov_powers)):
        worst = fn(rng, trials)
        tol = LEMMA_TOLERANCES[name]
        out.append(CheckResult("lemmas", f"{name} on {trials} random instances", worst <= tol,
                               f"worst {worst:.2e} vs {tol:.0e}"))
    return out
