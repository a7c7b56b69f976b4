"""Plain-text ``key = value`` files shared by tableaux and run configs.

Keys may carry dotted sections (``alpha.2.1``, ``problem.name``).  Blank
lines and ``#`` comments are ignored.  Values stay strings; callers
convert them.
"""
from fractions import Fraction


def loads(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def dumps(items):
    return "".join(f"{k} = {v}\n" for k, v in items)


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def fraction(text):
    """Parse ``"num/den"`` or an integer into an exact :class:`Fraction`."""
    text = text.strip()
    if any(c in text for c in ".eE") and "/" not in text:
        raise ValueError(f"expected an exact rational, got {text!r}")
    return Fraction(text)


def rational_str(q):
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"
