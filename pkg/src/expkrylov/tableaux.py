"""Exponential-K/W coefficient sets and exact order-condition checks."""
from dataclasses import dataclass, field, replace
from fractions import Fraction

from . import kvformat
from .bseries import FAT, TW_TREES
from .errors import StageCountError

F = Fraction


@dataclass(frozen=True)
class ExpKTableau:
    """Coefficients of ``k_i = phi(h g A)(h F_i + h A sum_j gamma_ij k_j)``.

    ``alpha`` and ``gammaM`` are strictly lower triangular ``s x s``
    nested tuples (0-based storage); ``b_hat`` is stored but no step-size
    controller uses it.
    """

    gamma: Fraction
    alpha: tuple
    gammaM: tuple
    b: tuple
    b_hat: tuple = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        s = len(self.b)
        conv = lambda rows: tuple(tuple(F(x) for x in row) for row in rows)
        object.__setattr__(self, "gamma", F(self.gamma))
        object.__setattr__(self, "alpha", conv(self.alpha))
        object.__setattr__(self, "gammaM", conv(self.gammaM))
        object.__setattr__(self, "b", tuple(F(x) for x in self.b))
        bh = self.b_hat if self.b_hat is not None else (0,) * s
        object.__setattr__(self, "b_hat", tuple(F(x) for x in bh))
        for mat, nm in ((self.alpha, "alpha"), (self.gammaM, "gamma")):
            if len(mat) != s or any(len(r) != s for r in mat):
                raise ValueError(f"{nm} must be {s}x{s}")
            if any(mat[i][j] != 0 for i in range(s) for j in range(i, s)):
                raise ValueError(f"{nm} must be strictly lower triangular")
        if len(self.b_hat) != s:
            raise ValueError("b_hat must have one entry per stage")
        g = self.gamma
        if g <= 0 or g.numerator != 1:
            raise ValueError("gamma must be the reciprocal of a positive integer")

    @property
    def s(self):
        return len(self.b)

    @property
    def beta(self):
        return tuple(tuple(a + g for a, g in zip(ra, rg)) for ra, rg in zip(self.alpha, self.gammaM))

    @property
    def beta_prime(self):
        return tuple(sum(r, F(0)) for r in self.beta)

    @property
    def alpha_sum(self):
        return tuple(sum(r, F(0)) for r in self.alpha)

    def with_b(self, b):
        return replace(self, b=tuple(b))

    # -- key = value serialization ---------------------------------------
    def dumps(self):
        items = []
        if self.name:
            items.append(("name", self.name))
        items += [("s", str(self.s)), ("gamma", kvformat.rational_str(self.gamma))]
        for key, mat in (("alpha", self.alpha), ("gamma", self.gammaM)):
            for i in range(self.s):
                for j in range(i):
                    items.append((f"{key}.{i + 1}.{j + 1}", kvformat.rational_str(mat[i][j])))
        for key, vec in (("b", self.b), ("b_hat", self.b_hat)):
            for i, x in enumerate(vec):
                items.append((f"{key}.{i + 1}", kvformat.rational_str(x)))
        return kvformat.dumps(items)

    @classmethod
    def loads(cls, text):
        kv = kvformat.loads(text)
        s = int(kv["s"])
        alpha = [[F(0)] * s for _ in range(s)]
        gm = [[F(0)] * s for _ in range(s)]
        b = [F(0)] * s
        bh = [F(0)] * s
        for key, val in kv.items():
            parts = key.split(".")
            if key in ("s", "name", "gamma"):
                continue
            if parts[0] in ("alpha", "gamma") and len(parts) == 3:
                i, j = int(parts[1]) - 1, int(parts[2]) - 1
                if not 0 <= j < i < s:
                    raise ValueError(f"{key}: index outside the strict lower triangle")
                (alpha if parts[0] == "alpha" else gm)[i][j] = kvformat.fraction(val)
            elif parts[0] in ("b", "b_hat") and len(parts) == 2:
                (b if parts[0] == "b" else bh)[int(parts[1]) - 1] = kvformat.fraction(val)
            else:
                raise ValueError(f"unknown tableau key {key!r}")
        return cls(kvformat.fraction(kv["gamma"]), alpha, gm, b, bh, name=kv.get("name", ""))


def _lower(entries, s):
    m = [[F(0)] * s for _ in range(s)]
    for (i, j), v in entries.items():
        m[i - 1][j - 1] = F(v)
    return m


def expk4_tableau():
    """Four-stage, fourth-order exponential-K scheme.

    alpha_{3,2} is -1/80; with +1/80 the set misses the order conditions
    (see :func:`expk4_tableau_as_printed`).
    """
    alpha = _lower({(2, 1): 1, (3, 1): F(41, 80), (3, 2): F(-1, 80),
                    (4, 1): F(1, 4), (4, 2): F(1, 12), (4, 3): F(1, 6)}, 4)
    gm = _lower({(2, 1): F(7, 8), (3, 1): F(1, 16), (3, 2): 0,
                 (4, 1): F(-1, 32), (4, 2): F(1, 24), (4, 3): F(-5, 12)}, 4)
    return ExpKTableau(F(1, 4), alpha, gm, (F(1, 6), F(1, 6), 0, F(2, 3)),
                       (F(8, 3), 1, F(-8, 3), 0), name="expK")


def expk4_tableau_as_printed():
    """The variant with alpha_{3,2} = +1/80, kept to show it fails the conditions."""
    t = expk4_tableau()
    alpha = [list(r) for r in t.alpha]
    alpha[2][1] = F(1, 80)
    return replace(t, alpha=tuple(tuple(r) for r in alpha), name="expK-as-printed")


@dataclass(frozen=True)
class ConditionReport:
    labels: tuple
    residuals: tuple

    @property
    def passed(self):
        return all(r == 0 for r in self.residuals)

    def failures(self):
        return [(lab, r) for lab, r in zip(self.labels, self.residuals) if r != 0]

    def first_failure(self):
        f = self.failures()
        return f[0][0] if f else None

    def __iter__(self):
        return iter(zip(self.labels, self.residuals))


def p21(g):
    return F(1, 2) * (1 - g)


def p32(g):
    return F(1, 3) * (F(1, 2) - g) * (1 - g)


def p42(g):
    return F(1, 8) - g / 6


def p44(g):
    return F(1, 4) * (F(1, 3) - g) * (F(1, 2) - g) * (1 - g)


def check_expk_order4(t):
    """The nine four-stage, fourth-order exponential-K equations, written out per stage."""
    if t.s != 4:
        raise StageCountError(f"order-4 system is for 4 stages, got {t.s}")
    b1, b2, b3, b4 = t.b
    B = t.beta
    A = t.alpha
    G = t.gammaM
    bp = (None,) + t.beta_prime  # 1-based
    al = (None,) + t.alpha_sum
    a = lambda i, j: A[i - 1][j - 1]
    be = lambda i, j: B[i - 1][j - 1]
    ga = lambda i, j: G[i - 1][j - 1]
    g = t.gamma
    lhs_rhs = [
        ("a", b1 + b2 + b3 + b4, F(1)),
        ("b", b2 * bp[2] + b3 * bp[3] + b4 * bp[4], p21(g)),
        ("c", b2 * al[2] ** 2 + b3 * al[3] ** 2 + b4 * al[4] ** 2, F(1, 3)),
        ("d", b3 * be(3, 2) * bp[2] + b4 * (be(4, 2) * bp[2] + be(4, 3) * bp[3]), p32(g)),
        ("e", b2 * al[2] ** 3 + b3 * al[3] ** 3 + b4 * al[4] ** 3, F(1, 4)),
        ("f", b3 * al[3] * a(3, 2) * bp[2]
         + b4 * al[4] * (a(4, 2) * bp[2] + a(4, 3) * bp[3]), p42(g)),
        ("g1", b3 * a(3, 2) * al[2] ** 2 + b4 * (a(4, 2) * al[2] ** 2 + a(4, 3) * al[3] ** 2),
         F(1, 12)),
        ("g2", b3 * ga(3, 2) * al[2] ** 2 + b4 * (ga(4, 2) * al[2] ** 2 + ga(4, 3) * al[3] ** 2),
         -g / 6),
        ("h", b4 * be(4, 3) * be(3, 2) * bp[2], p44(g)),
    ]
    return ConditionReport(tuple(x[0] for x in lhs_rhs), tuple(l - r for _, l, r in lhs_rhs))


def _sum(s, fn):
    return sum((fn(j) for j in range(s)), F(0))


# (label, order, Phi_j, P(gamma)); Phi_j takes (tableau, j) with 0-based j.
def _tk_rows():
    def al(t, j):
        return t.alpha_sum[j]

    def bp(t, j):
        return t.beta_prime[j]

    return [
        ("f", 1, lambda t, j: F(1), lambda g: F(1)),
        ("f'f", 2, lambda t, j: bp(t, j), p21),
        ("f''(f,f)", 3, lambda t, j: al(t, j) ** 2, lambda g: F(1, 3)),
        ("f'f'f", 3, lambda t, j: _sum(t.s, lambda k: t.beta[j][k] * bp(t, k)), p32),
        ("f'''(f,f,f)", 4, lambda t, j: al(t, j) ** 3, lambda g: F(1, 4)),
        ("f''(f,f'f)", 4,
         lambda t, j: al(t, j) * _sum(t.s, lambda k: t.alpha[j][k] * bp(t, k)), p42),
        ("f'f''(f,f)", 4,
         lambda t, j: _sum(t.s, lambda k: t.alpha[j][k] * al(t, k) ** 2), lambda g: F(1, 12)),
        ("Af''(f,f)", 4,
         lambda t, j: _sum(t.s, lambda k: t.gammaM[j][k] * al(t, k) ** 2), lambda g: -g / 6),
        ("f'f'f'f", 4,
         lambda t, j: _sum(t.s, lambda k: t.beta[j][k]
                           * _sum(t.s, lambda m: t.beta[k][m] * bp(t, m))), p44),
    ]


TK_ROWS = _tk_rows()


def check_tk_conditions(t, p=4):
    """``sum_j b_j Phi_j(tau) - P_tau(gamma)`` for every TK tree of order <= p."""
    if p not in (1, 2, 3, 4):
        raise ValueError("order must be 1..4")
    labels, res = [], []
    for label, order, phi, P in TK_ROWS:
        if order > p:
            continue
        labels.append(label)
        res.append(_sum(t.s, lambda j: t.b[j] * phi(t, j)) - P(t.gamma))
    return ConditionReport(tuple(labels), tuple(res))


# Right-hand sides of the 21 exponential-W conditions, tree ids 1..21.
def _w_rhs(g):
    return (F(1), F(1, 2), -g / 2, F(1, 3), F(1, 6), -g / 4, -g / 4, g ** 2 / 3,
            F(1, 4), F(1, 8), -g / 6, F(1, 12), -g / 6, F(1, 24), -g / 12, -g / 12,
            g ** 2 / 6, -g / 12, g ** 2 / 8, g ** 2 / 6, -g ** 3 / 4)


def elementary_weight(t, structure, j):
    """``Phi_j`` for a two-coloured tree rooted at stage ``j``.

    Each edge contributes ``alpha`` below a meagre parent and ``gamma_ij``
    below a fat parent.
    """
    color, children = structure
    mat = t.gammaM if color == FAT else t.alpha
    out = F(1)
    for child in children:
        out *= _sum(t.s, lambda k: mat[j][k] * elementary_weight(t, child, k))
    return out


def check_expw_conditions(t, p=4):
    """All exponential-W conditions up to order ``p`` (rows ordered as the tree catalogue)."""
    if p not in (1, 2, 3, 4):
        raise ValueError("order must be 1..4")
    rhs = _w_rhs(t.gamma)
    labels, res = [], []
    for tree in TW_TREES:
        if tree.order > p:
            continue
        labels.append(str(tree.id))
        lhs = _sum(t.s, lambda j: t.b[j] * elementary_weight(t, tree.structure, j))
        res.append(lhs - rhs[tree.id - 1])
    return ConditionReport(tuple(labels), tuple(res))
