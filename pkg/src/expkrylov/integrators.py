"""Exponential time steppers and a fixed-step driver with work accounting.

Three implementations of exp4 / erow4 are provided:

``standard``
    one adaptive Krylov projection of the exact Jacobian per vector that
    a phi function acts on (three per step);
``ktype``
    one fixed-size projection from ``f(y_n)``; all algebra, Jacobian
    products included, is done with ``A = V H V^T`` in the reduced space;
``sp``
    one fixed-size projection as in ``ktype`` but the correction terms
    ``d = f(u) - f(y_n) - h J w`` use exact Jacobian-vector products.

``expK`` is the tableau-driven exponential-K scheme, single projection by
construction.
"""
import time
from dataclasses import dataclass, fields
from math import factorial

import numpy as np

from .errors import InstabilityError, NoConvergenceError, UnknownSchemeError
from .krylov import ArnoldiProcess, arnoldi
from .linalg import phi_matrix, phi_via_augmented
from .tableaux import expk4_tableau

FAMILIES = ("expK", "exp4", "erow4")
VARIANTS = ("standard", "ktype", "sp")


@dataclass
class StepStats:
    f_evals: int = 0
    jv_products: int = 0
    arnoldi_vectors: int = 0
    phi_evals: int = 0
    krylov_projections: int = 0
    wall_time: float = 0.0

    def __iadd__(self, other):
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))
        return self


@dataclass(frozen=True)
class AdaptiveKrylov:
    """Basis-size control for the standard implementations."""

    m_min: int = 4
    m_max: int = 100
    tol: float = 1e-12


@dataclass(frozen=True)
class SchemeSpec:
    family: str
    variant: str = "standard"
    M: int = None
    adaptive: AdaptiveKrylov = AdaptiveKrylov()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UnknownSchemeError(f"unknown method family {self.family!r}")
        if self.variant not in VARIANTS:
            raise UnknownSchemeError(f"unknown variant {self.variant!r}")
        if self.family == "expK" and self.variant != "ktype":
            raise UnknownSchemeError("expK exists only as a single-projection (ktype) scheme")
        if self.variant != "standard" and (self.M is None or self.M < 1):
            raise ValueError(f"{self.name} needs a fixed Krylov dimension M >= 1")

    @property
    def name(self):
        if self.family == "expK":
            return "expK"
        return self.family + {"standard": "", "ktype": "k", "sp": "sp"}[self.variant]

    @classmethod
    def parse(cls, name, M=None, adaptive=None):
        """Build from a method id such as ``"exp4k"`` or ``"erow4"``."""
        adaptive = adaptive or AdaptiveKrylov()
        if name in ("expK", "expk"):
            return cls("expK", "ktype", M, adaptive)
        for fam in ("exp4", "erow4"):
            if name.startswith(fam):
                suffix = name[len(fam):].lower()
                variant = {"": "standard", "k": "ktype", "sp": "sp"}.get(suffix)
                if variant is None:
                    break
                return cls(fam, variant, M if variant != "standard" else None, adaptive)
        raise UnknownSchemeError(f"unknown method {name!r}")


class _Counted:
    """Problem wrapper that tallies right-hand-side and Jv evaluations."""

    def __init__(self, problem, stats, t):
        self.problem = problem
        self.stats = stats
        self.t = t

    def f(self, y):
        self.stats.f_evals += 1
        return self.problem.rhs(self.t, y)

    def jv(self, y, v):
        self.stats.jv_products += 1
        return self.problem.jvp(self.t, y, v)


class _PhiCache:
    """phi_k(scale * H) matrices, evaluated once per distinct (k, scale)."""

    def __init__(self, H, stats):
        self.H = H
        self.stats = stats
        self._cache = {}

    def __call__(self, k, scale):
        key = (k, scale)
        if key not in self._cache:
            self.stats.phi_evals += 1
            self._cache[key] = phi_matrix(k, scale * self.H)
        return self._cache[key]


def _single_basis(cp, y, f0, M, stats):
    basis = arnoldi(lambda v: cp.jv(y, v), f0, M)
    stats.krylov_projections += 1
    stats.arnoldi_vectors += basis.m
    return basis


def _timed(fn):
    def wrapper(problem, y, h, *args, t=0.0, **kwargs):
        stats = StepStats()
        start = time.perf_counter()
        y = np.asarray(y, dtype=float)
        if h == 0:
            return y.copy(), stats
        out = fn(_Counted(problem, stats, t), y, h, *args, stats=stats, **kwargs)
        stats.wall_time = time.perf_counter() - start
        return out, stats

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def step_expk(cp, y, h, tableau=None, M=5, *, stats):
    """One step of the autonomous exponential-K scheme.

    ``lambda_i = phi_1(h g H)(h psi_i + h H sum_j gamma_ij lambda_j)``,
    ``k_i = V lambda_i + h (F_i - V psi_i)``.
    """
    tab = tableau or expk4_tableau()
    s = tab.s
    alpha = np.array(tab.alpha, dtype=float)
    gam = np.array(tab.gammaM, dtype=float)
    b = np.array(tab.b, dtype=float)
    f0 = cp.f(y)
    if not np.any(f0):
        return y.copy()
    basis = _single_basis(cp, y, f0, M, stats)
    V, H = basis.V, basis.H
    phi = phi_matrix(1, h * float(tab.gamma) * H)
    stats.phi_evals += 1
    ks, lams = [], []
    for i in range(s):
        Fi = f0 if i == 0 else cp.f(y + sum(alpha[i, j] * ks[j] for j in range(i)))
        psi = V.T @ Fi
        acc = sum((gam[i, j] * lams[j] for j in range(i)), np.zeros_like(psi))
        lam = phi @ (h * psi + h * (H @ acc))
        lams.append(lam)
        ks.append(V @ lam + h * (Fi - V @ psi))
    return y + sum(b[i] * ks[i] for i in range(s))


def _adaptive_actions(jvp, b, requests, adaptive, stats, m_cap=None):
    """``||b|| V phi_k(scale H) e_1`` for every ``(k, scale)`` in ``requests``.

    The basis grows until each residual estimate
    ``||b|| h_{m+1,m} |e_m^T phi_k(scale H) e_1|`` is below ``adaptive.tol``.
    """
    b = np.asarray(b, dtype=float)
    if not np.any(b):
        return [np.zeros_like(b) for _ in requests], 0
    m_max = adaptive.m_max if m_cap is None else min(adaptive.m_max, m_cap)
    proc = ArnoldiProcess(jvp, b, m_max)
    by_scale = {}
    for k, scale in requests:
        by_scale[scale] = max(by_scale.get(scale, 0), k)

    def reduced(H):
        e1 = np.zeros(H.shape[0])
        e1[0] = 1.0
        return {sc: phi_via_augmented(H, e1, kmax, sc) for sc, kmax in by_scale.items()}

    target = min(adaptive.m_min, m_max)
    while True:
        while proc.m < target and proc.step():
            pass
        basis = proc.basis()
        m = basis.m
        vals = reduced(basis.H)
        if proc.breakdown:
            break
        est = max(proc.beta * proc.residual * abs(vals[sc][k - 1][-1]) for k, sc in requests)
        if est <= adaptive.tol:
            break
        if m >= m_max:
            raise NoConvergenceError(
                f"Krylov phi action did not reach tol={adaptive.tol:g} with m={m} (estimate {est:.3g})")
        target = m + max(1, m // 8)
    stats.krylov_projections += 1
    stats.arnoldi_vectors += m
    stats.phi_evals += len(requests)
    return [proc.beta * (basis.V @ vals[sc][k - 1]) for k, sc in requests], m


def adaptive_phi_action(jvp, b, scale, k=1, tol=1e-12, m_min=1, m_max=100):
    """``phi_k(scale * J) b`` by an adaptively sized Krylov projection.

    Returns ``(vector, used_dimension)``.
    """
    stats = StepStats()
    (vec,), m = _adaptive_actions(jvp, b, [(k, scale)], AdaptiveKrylov(m_min, m_max, tol), stats)
    return vec, m


# exp4 coefficients, shared by all three forms.
_W4 = (-7 / 300, 97 / 150, -37 / 300)
_W7 = (59 / 300, -7 / 75, 269 / 300, 2 / 3, 2 / 3, 2 / 3)
_Y1_EXP4 = (1.0, 1.0, -4 / 3, 1.0, 1 / 6)  # k3, k4, k5, k6, k7
_Y1_EROW4 = (1.0, 16.0, -48.0, -2.0, 12.0)  # k2, k4, k5, k6, k7


def _lin(coeffs, vecs):
    return sum(c * v for c, v in zip(coeffs, vecs))


def _exp4_standard(cp, y, h, adaptive, stats):
    jv = lambda v: cp.jv(y, v)
    N = y.shape[0]
    f0 = cp.f(y)
    thirds = ((1, h / 3), (1, 2 * h / 3), (1, h))
    (k1, k2, k3), _ = _adaptive_actions(jv, f0, thirds, adaptive, stats, N)
    w4 = _lin(_W4, (k1, k2, k3))
    d4 = cp.f(y + h * w4) - f0 - h * jv(w4)
    (k4, k5, k6), _ = _adaptive_actions(jv, d4, thirds, adaptive, stats, N)
    w7 = _lin(_W7, (k1, k2, k3, k4, k5, k6))
    d7 = cp.f(y + h * w7) - f0 - h * jv(w7)
    (k7,), _ = _adaptive_actions(jv, d7, [(1, h / 3)], adaptive, stats, N)
    return y + h * _lin(_Y1_EXP4, (k3, k4, k5, k6, k7))


def _exp4_projected(cp, y, h, M, stats, exact_d):
    f0 = cp.f(y)
    if not np.any(f0):
        return y.copy()
    basis = _single_basis(cp, y, f0, M, stats)
    V, H = basis.V, basis.H
    phi = _PhiCache(H, stats)
    scales = (h / 3, 2 * h / 3, h)
    psi0 = V.T @ f0
    perp0 = f0 - V @ psi0
    lam123 = [phi(1, sc) @ psi0 for sc in scales]
    k123 = [V @ lam + perp0 for lam in lam123]
    w4 = _lin(_W4, k123)
    if exact_d:
        d4 = cp.f(y + h * w4) - f0 - h * cp.jv(y, w4)
        psi4 = V.T @ d4
        perp4 = d4 - V @ psi4
    else:
        sigma4 = _lin(_W4, lam123)
        f4 = cp.f(y + h * w4)
        p4 = V.T @ f4
        psi4 = p4 - psi0 - h * (H @ sigma4)
        perp4 = (f4 - V @ p4) - perp0
    lam456 = [phi(1, sc) @ psi4 for sc in scales]
    k456 = [V @ lam + perp4 for lam in lam456]
    w7 = _lin(_W7, k123 + k456)
    if exact_d:
        d7 = cp.f(y + h * w7) - f0 - h * cp.jv(y, w7)
        psi7 = V.T @ d7
        perp7 = d7 - V @ psi7
    else:
        sigma7 = _lin(_W7, lam123 + lam456)
        f7 = cp.f(y + h * w7)
        p7 = V.T @ f7
        psi7 = p7 - psi0 - h * (H @ sigma7)
        perp7 = (f7 - V @ p7) - perp0
    k7 = V @ (phi(1, h / 3) @ psi7) + perp7
    return y + h * _lin(_Y1_EXP4, (k123[2], *k456, k7))


def _erow4_standard(cp, y, h, adaptive, stats):
    jv = lambda v: cp.jv(y, v)
    N = y.shape[0]
    f0 = cp.f(y)
    (k1, k2), _ = _adaptive_actions(jv, f0, [(1, h / 2), (1, h)], adaptive, stats, N)
    w2 = 0.5 * k1
    d2 = cp.f(y + h * w2) - f0 - h * jv(w2)
    (k3, k4, k5), _ = _adaptive_actions(jv, d2, [(1, h), (3, h), (4, h)], adaptive, stats, N)
    w4 = k2 + k3
    d4 = cp.f(y + h * w4) - f0 - h * jv(w4)
    (k6, k7), _ = _adaptive_actions(jv, d4, [(3, h), (4, h)], adaptive, stats, N)
    return y + h * _lin(_Y1_EROW4, (k2, k4, k5, k6, k7))


def _erow4_projected(cp, y, h, M, stats, exact_d):
    f0 = cp.f(y)
    if not np.any(f0):
        return y.copy()
    basis = _single_basis(cp, y, f0, M, stats)
    V, H = basis.V, basis.H
    phi = _PhiCache(H, stats)
    psi0 = V.T @ f0
    perp0 = f0 - V @ psi0
    lam1 = phi(1, h / 2) @ psi0
    k1 = V @ lam1 + perp0

    def correction(w, sigma):
        # reduced and orthogonal parts of d = f(y + h w) - f(y) - h A w
        if exact_d:
            d = cp.f(y + h * w) - f0 - h * cp.jv(y, w)
            psi = V.T @ d
            return psi, d - V @ psi
        fu = cp.f(y + h * w)
        p = V.T @ fu
        return p - psi0 - h * (H @ sigma), (fu - V @ p) - perp0

    psi2, perp2 = correction(0.5 * k1, 0.5 * lam1)
    lam2 = phi(1, h) @ psi0
    k2 = V @ lam2 + perp0
    lam3 = phi(1, h) @ psi2
    k3 = V @ lam3 + perp2
    psi4, perp4 = correction(k2 + k3, lam2 + lam3)
    k4 = V @ (phi(3, h) @ psi2) + perp2 / factorial(3)
    k5 = V @ (phi(4, h) @ psi2) + perp2 / factorial(4)
    k6 = V @ (phi(3, h) @ psi4) + perp4 / factorial(3)
    k7 = V @ (phi(4, h) @ psi4) + perp4 / factorial(4)
    return y + h * _lin(_Y1_EROW4, (k2, k4, k5, k6, k7))


@_timed
def step_exp4(cp, y, h, variant="standard", M=None, adaptive=None, *, stats):
    """One exp4 step in the requested implementation."""
    if variant == "standard":
        return _exp4_standard(cp, y, h, adaptive or AdaptiveKrylov(), stats)
    if variant in ("ktype", "sp"):
        return _exp4_projected(cp, y, h, M, stats, exact_d=variant == "sp")
    raise UnknownSchemeError(f"unknown exp4 variant {variant!r}")


@_timed
def step_erow4(cp, y, h, variant="standard", M=None, adaptive=None, *, stats):
    """One erow4 step in the requested implementation."""
    if variant == "standard":
        return _erow4_standard(cp, y, h, adaptive or AdaptiveKrylov(), stats)
    if variant in ("ktype", "sp"):
        return _erow4_projected(cp, y, h, M, stats, exact_d=variant == "sp")
    raise UnknownSchemeError(f"unknown erow4 variant {variant!r}")


def step(problem, y, h, scheme, t=0.0):
    """Dispatch one step of ``scheme`` (a :class:`SchemeSpec`)."""
    if scheme.family == "expK":
        return step_expk(problem, y, h, None, scheme.M, t=t)
    fn = step_exp4 if scheme.family == "exp4" else step_erow4
    return fn(problem, y, h, scheme.variant, scheme.M, scheme.adaptive, t=t)


def _num_steps(h, t0, tF):
    span = tF - t0
    if span == 0:
        return 0
    if h <= 0:
        raise ValueError("step size must be positive")
    n = round(span / h)
    if n < 1 or abs(n * h - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError(f"step size {h!r} does not divide the interval [{t0}, {tF}]")
    return n


def integrate(problem, scheme, h, t0, tF, y0):
    """Fixed-step integration; returns ``(y(tF), cumulative StepStats)``."""
    n = _num_steps(h, t0, tF)
    y = np.array(y0, dtype=float, copy=True)
    total = StepStats()
    for i in range(n):
        try:
            y, st = step(problem, y, h, scheme, t=t0 + i * h)
        except InstabilityError as exc:
            raise InstabilityError(f"{scheme.name}, h={h:g}: {exc} at step {i}", step=i) from exc
        total += st
        if not np.all(np.isfinite(y)):
            raise InstabilityError(f"{scheme.name}, h={h:g}: non-finite state at step {i}", step=i)
    return y, total


def rk4_integrate(problem, h, t0, tF, y0):
    """Classical fourth-order Runge-Kutta, used for reference solutions."""
    n = _num_steps(h, t0, tF)
    y = np.array(y0, dtype=float, copy=True)
    f = problem.rhs
    for i in range(n):
        t = t0 + i * h
        a = f(t, y)
        b = f(t + h / 2, y + h / 2 * a)
        c = f(t + h / 2, y + h / 2 * b)
        d = f(t + h, y + h * c)
        y = y + h / 6 * (a + 2 * b + 2 * c + d)
        if not np.all(np.isfinite(y)):
            raise InstabilityError(f"rk4 reference: non-finite state at step {i}", step=i)
    return y
