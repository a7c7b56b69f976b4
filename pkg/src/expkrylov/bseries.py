"""Exact B-series over the 21 two-coloured trees of order <= 4.

Meagre nodes stand for derivatives of ``f`` (the exact Jacobian when
singly branched), fat nodes for the approximate Jacobian ``A``.  A series
is stored as the coefficient of the empty tree plus one coefficient per
catalogued tree, with the usual ``h^|t| / sigma(t)`` normalization, so
``h f(B(a, y))`` has coefficient ``prod a(children)`` on a meagre-rooted
tree.

Coefficients are :class:`fractions.Fraction` throughout; any numeric type
supporting ``+`` and ``*`` also works (used by float-based tests).
"""
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

from .errors import NormalizationError, UnknownSchemeError

MEAGRE = "m"
FAT = "f"
MAX_ORDER = 4


def _node(color, *children):
    return (color, tuple(sorted(children)))


_LEAF = _node(MEAGRE)


def _catalog():
    m, f, L = MEAGRE, FAT, _LEAF
    trees = [
        L,
        _node(m, L),
        _node(f, L),
        _node(m, L, L),
        _node(m, _node(m, L)),
        _node(m, _node(f, L)),
        _node(f, _node(m, L)),
        _node(f, _node(f, L)),
        _node(m, L, L, L),
        _node(m, L, _node(m, L)),
        _node(m, L, _node(f, L)),
        _node(m, _node(m, L, L)),
        _node(f, _node(m, L, L)),
    ]
    for a in (m, f):
        for b in (m, f):
            for c in (m, f):
                trees.append(_node(a, _node(b, _node(c, L))))
    return trees


def _order(t):
    return 1 + sum(_order(c) for c in t[1])


def _density(t):
    d = _order(t)
    for c in t[1]:
        d *= _density(c)
    return d


def _symmetry(t):
    s = 1
    children = t[1]
    for c in set(children):
        n = children.count(c)
        s *= factorial(n) * _symmetry(c) ** n
    return s


def _is_linear(t):
    while t[1]:
        if len(t[1]) > 1:
            return False
        t = t[1][0]
    return True


def _label(t):
    color, children = t
    if not children:
        return "f"
    if color == FAT:
        return "A" + _label(children[0])
    primes = "'" * len(children)
    if len(children) == 1:
        return "f" + primes + _label(children[0])
    return "f" + primes + "(" + ",".join(sorted((_label(c) for c in children), key=len)) + ")"


@dataclass(frozen=True)
class TwTree:
    id: int
    structure: tuple
    order: int
    symmetry: int
    density: int
    label: str

    @property
    def root_color(self):
        return self.structure[0]

    @property
    def is_linear(self):
        return _is_linear(self.structure)

    @property
    def colors(self):
        out = []
        stack = [self.structure]
        while stack:
            c, ch = stack.pop()
            out.append(c)
            stack.extend(ch)
        return tuple(out)

    @property
    def meagre(self):
        return FAT not in self.colors


TW_TREES = tuple(
    TwTree(i + 1, s, _order(s), _symmetry(s), _density(s), _label(s))
    for i, s in enumerate(_catalog())
)
NTREES = len(TW_TREES)
_INDEX = {t.structure: t.id - 1 for t in TW_TREES}


def tree_id(structure):
    return _INDEX[structure] + 1


@dataclass(frozen=True)
class BSeries:
    empty: object
    coeff: tuple

    def __post_init__(self):
        if len(self.coeff) != NTREES:
            raise ValueError(f"a B-series needs {NTREES} tree coefficients")

    @classmethod
    def zero(cls, empty=0):
        return cls(Fraction(empty), (Fraction(0),) * NTREES)

    @classmethod
    def from_dict(cls, values, empty=0):
        c = [Fraction(0)] * NTREES
        for k, v in values.items():
            c[k - 1] = v
        return cls(empty, tuple(c))

    def __getitem__(self, tree_id):
        return self.coeff[tree_id - 1]

    def at(self, structure):
        i = _INDEX.get(structure)
        return 0 if i is None else self.coeff[i]

    def __add__(self, other):
        return BSeries(self.empty + other.empty, tuple(x + y for x, y in zip(self.coeff, other.coeff)))

    def __sub__(self, other):
        return self + (-1) * other

    def __rmul__(self, c):
        return BSeries(c * self.empty, tuple(c * x for x in self.coeff))

    def __neg__(self):
        return (-1) * self

    def as_list(self):
        return list(self.coeff)


def combine(*terms):
    """Linear combination ``sum c_i a_i`` of ``(c_i, a_i)`` pairs."""
    out = BSeries.zero()
    for c, a in terms:
        out = out + c * a
    return out


@dataclass(frozen=True)
class SeriesOperator:
    """Truncated power series ``p(hA) = sum_k d_k (hA)^k`` of a matrix function."""

    d: tuple

    def __post_init__(self):
        if len(self.d) != MAX_ORDER + 1:
            raise ValueError("a series operator stores exactly five coefficients d_0..d_4")


def phi_operator(k=1, gamma=1):
    """Taylor coefficients of ``phi_k(gamma z)``: ``d_n = gamma^n / (n + k)!``."""
    g = Fraction(gamma)
    return SeriesOperator(tuple(g ** n / factorial(n + k) for n in range(MAX_ORDER + 1)))


def rosenbrock_operator(gamma):
    """``1 / (1 - gamma z)``."""
    g = Fraction(gamma)
    return SeriesOperator(tuple(g ** n for n in range(MAX_ORDER + 1)))


IDENTITY = SeriesOperator((Fraction(1),) + (Fraction(0),) * MAX_ORDER)


def compose_f(a):
    """Series of ``h f(B(a, y))``; requires ``a.empty == 1``."""
    if a.empty != 1:
        raise NormalizationError("compose_f needs a series around y (empty-tree coefficient 1)")
    out = []
    for t in TW_TREES:
        color, children = t.structure
        if color != MEAGRE:
            out.append(Fraction(0))
            continue
        p = Fraction(1)
        for c in children:
            p = p * a.at(c)
        out.append(p)
    return BSeries(Fraction(0), tuple(out))


def _mult(color, a):
    out = []
    for t in TW_TREES:
        c, children = t.structure
        out.append(a.at(children[0]) if c == color and len(children) == 1 else Fraction(0))
    return BSeries(Fraction(0), tuple(out))


def mult_A(a):
    """Series of ``h A B(a, y)`` (fat root grafted on)."""
    return _mult(FAT, a)


def mult_J(a):
    """Series of ``h J B(a, y)`` with the exact Jacobian (meagre singly-branched root)."""
    return _mult(MEAGRE, a)


def mult_phi(op, a, color=FAT):
    """Series of ``p(hA) B(a, y)`` for the operator ``op``.

    Each output tree collects ``d_k a(t')`` over the ways of writing it as a
    chain of ``k`` singly-branched ``color`` nodes on top of ``t'``.  With
    ``color=MEAGRE`` the function is taken of the exact Jacobian.
    """
    out = []
    for t in TW_TREES:
        s = 0
        cur = t.structure
        k = 0
        while True:
            s = s + op.d[k] * a.at(cur)
            if cur[0] == color and len(cur[1]) == 1:
                cur = cur[1][0]
                k += 1
            else:
                break
        out.append(s)
    return BSeries(op.d[0] * a.empty, tuple(out))


def exact_solution_bseries():
    """``y(t0 + h)``: ``1/density`` on meagre trees, 0 wherever ``A`` appears."""
    return BSeries(
        Fraction(1),
        tuple(Fraction(1, t.density) if t.meagre else Fraction(0) for t in TW_TREES),
    )


def _canonical(structure, M):
    """Recolour linear subtrees of order <= M to all-meagre."""
    if _is_linear(structure) and _order(structure) <= M:
        t = _LEAF
        for _ in range(_order(structure) - 1):
            t = _node(MEAGRE, t)
        return t
    color, children = structure
    return _node(color, *(_canonical(c, M) for c in children))


def tk_classes(M=MAX_ORDER):
    """Group tree ids that denote the same elementary differential under ``A = V H V^T``.

    Keys are canonical structures in catalogue order; values are the
    member tree ids.
    """
    classes = {}
    for t in TW_TREES:
        classes.setdefault(_canonical(t.structure, M), []).append(t.id)
    return classes


def class_sums(a, M=MAX_ORDER):
    return {key: sum((a[i] for i in ids), Fraction(0)) for key, ids in tk_classes(M).items()}


def classify_order(a, M):
    """Largest ``p <= min(4, M)`` whose TK-class sums all match the exact solution."""
    if M < 1:
        raise ValueError("Krylov dimension must be >= 1")
    exact = exact_solution_bseries()
    classes = tk_classes(M)
    if a.empty != 1:
        return 0
    p_max = min(MAX_ORDER, M)
    for p in range(1, p_max + 1):
        for key, ids in classes.items():
            if _order(key) != p:
                continue
            if sum(a[i] for i in ids) != sum(exact[i] for i in ids):
                return p - 1
    return p_max


def tableau_bseries(tableau, jacobian=FAT):
    """Numerical-solution series of a general-form method driven by ``tableau``.

    Stage recursion: ``u = a0 + sum alpha_ij k_j``,
    ``q = hf(u) + sum gamma_ij hA k_j``, ``k_i = phi_1(h gamma A) q``;
    the step is ``a0 + sum b_i k_i``.  ``jacobian=MEAGRE`` swaps the
    approximate Jacobian for the exact one.
    """
    a0 = BSeries.zero(1)
    mult = mult_A if jacobian == FAT else mult_J
    op = phi_operator(1, tableau.gamma)
    ks = []
    for i in range(tableau.s):
        u = a0 + combine(*((tableau.alpha[i][j], ks[j]) for j in range(i)))
        q = compose_f(u) + combine(*((tableau.gammaM[i][j], mult(ks[j])) for j in range(i)))
        ks.append(mult_phi(op, q, jacobian))
    return a0 + combine(*zip(tableau.b, ks))


def _exp4_bseries(phi_color, d_color):
    a0 = BSeries.zero(1)
    mult = mult_A if d_color == FAT else mult_J
    F = Fraction

    def phi(k, scale, a):
        return mult_phi(phi_operator(k, scale), a, phi_color)

    hf0 = compose_f(a0)
    k1, k2, k3 = (phi(1, s, hf0) for s in (F(1, 3), F(2, 3), F(1)))
    w4 = combine((F(-7, 300), k1), (F(97, 150), k2), (F(-37, 300), k3))
    d4 = compose_f(a0 + w4) - hf0 - mult(w4)
    k4, k5, k6 = (phi(1, s, d4) for s in (F(1, 3), F(2, 3), F(1)))
    w7 = combine((F(59, 300), k1), (F(-7, 75), k2), (F(269, 300), k3),
                 (F(2, 3), k4), (F(2, 3), k5), (F(2, 3), k6))
    d7 = compose_f(a0 + w7) - hf0 - mult(w7)
    k7 = phi(1, F(1, 3), d7)
    return a0 + combine((1, k3), (1, k4), (F(-4, 3), k5), (1, k6), (F(1, 6), k7))


def _erow4_bseries(phi_color, d_color):
    a0 = BSeries.zero(1)
    mult = mult_A if d_color == FAT else mult_J
    F = Fraction

    def phi(k, scale, a):
        return mult_phi(phi_operator(k, scale), a, phi_color)

    hf0 = compose_f(a0)
    k1 = phi(1, F(1, 2), hf0)
    w2 = F(1, 2) * k1
    d2 = compose_f(a0 + w2) - hf0 - mult(w2)
    k2 = phi(1, 1, hf0)
    k3 = phi(1, 1, d2)
    w4 = k2 + k3
    d4 = compose_f(a0 + w4) - hf0 - mult(w4)
    k4, k5 = phi(3, 1, d2), phi(4, 1, d2)
    k6, k7 = phi(3, 1, d4), phi(4, 1, d4)
    return a0 + combine((1, k2), (16, k4), (-48, k5), (-2, k6), (12, k7))


# K-type forms apply every phi and every d-correction with A = V H V^T, so
# their series has fat nodes throughout; single-projection forms keep the
# exact Jacobian in the d-corrections; standard forms use J everywhere.
_SCHEMES = {
    "exp4": lambda: _exp4_bseries(MEAGRE, MEAGRE),
    "exp4k": lambda: _exp4_bseries(FAT, FAT),
    "exp4sp": lambda: _exp4_bseries(FAT, MEAGRE),
    "erow4": lambda: _erow4_bseries(MEAGRE, MEAGRE),
    "erow4k": lambda: _erow4_bseries(FAT, FAT),
    "erow4sp": lambda: _erow4_bseries(FAT, MEAGRE),
}

SCHEME_NAMES = ("expK",) + tuple(_SCHEMES)


def scheme_bseries(scheme):
    """B-series of one step of ``scheme``.

    ``scheme`` is a name (``"exp4k"``), anything with a ``name`` attribute,
    or an :class:`~expkrylov.tableaux.ExpKTableau`.
    """
    if hasattr(scheme, "gammaM"):
        return tableau_bseries(scheme)
    name = getattr(scheme, "name", scheme)
    if name == "expK":
        from .tableaux import expk4_tableau
        return tableau_bseries(expk4_tableau())
    try:
        build = _SCHEMES[name]
    except KeyError:
        raise UnknownSchemeError(f"no B-series construction for scheme {name!r}") from None
    return build()


# Reference coefficients of the four single-projection schemes, tree ids 1..21.
def _q(*xs):
    return tuple(Fraction(x) for x in xs)


REFERENCE_COEFFICIENTS = {
    "exp4k": _q(1, "1/2", 0, "1/3", "1/6", "1/120", "-1/36", "7/360", "1/4", "1/6", "-1/24",
                "1/12", 0, 0, "1/20", "1/18", "-1537/24300", "1/36", "-23/720", "-1/27",
                "3943/97200"),
    "exp4sp": _q(1, 0, "1/2", "1/3", 0, 0, 0, "1/6", "1/4", 0, "1/8", 0, "1/12", 0, 0, 0, 0,
                 0, 0, 0, "1/24"),
    "erow4k": _q(1, "1/2", 0, "1/3", "1/12", "1/12", "1/15", "-1/15", "1/4", "1/12", "1/24",
                 "1/24", "1/24", 0, "1/48", "1/24", "-1/48", "1/120", "1/80", "-1/60",
                 "-1/240"),
    "erow4sp": _q(1, 0, "1/2", "1/3", 0, 0, 0, "1/6", "1/4", 0, "1/8", 0, "1/12", 0, 0, 0,
                  0, 0, 0, 0, "1/24"),
}


def reference_discrepancies():
    """``[(scheme, tree_id, listed, computed), ...]`` where recomputation differs."""
    out = []
    for name, listed in REFERENCE_COEFFICIENTS.items():
        computed = scheme_bseries(name)
        for t in TW_TREES:
            if computed[t.id] != listed[t.id - 1]:
                out.append((name, t.id, listed[t.id - 1], computed[t.id]))
    return out
