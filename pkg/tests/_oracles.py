"""Independent reference implementations used as test oracles.

Deliberately naive: pure Python, exact rational arithmetic, no shared code
with the package.
"""

from __future__ import annotations

from fractions import Fraction


def _sse(ys):
    if not ys:
        return Fraction(0)
    m = sum(ys, Fraction(0)) / len(ys)
    return sum(((v - m) ** 2 for v in ys), Fraction(0))


def midpoint(a: float, b: float) -> float:
    t = 0.5 * (a + b)
    return a if t >= b else t


def brute_split(X, y, features):
    """Exhaustive best split as ``(feature, threshold)`` or ``None``.

    Every candidate is scored exactly; the first minimum in (feature,
    threshold) order wins.
    """
    ys = [Fraction(v) for v in y]
    parent = _sse(ys)
    best = None
    for f in sorted(features):
        col = [row[f] for row in X]
        distinct = sorted(set(col))
        for a, b in zip(distinct, distinct[1:]):
            left = [yy for c, yy in zip(col, ys) if c <= a]
            right = [yy for c, yy in zip(col, ys) if c > a]
            s = _sse(left) + _sse(right)
            if best is None or s < best[0]:
                best = (s, f, midpoint(a, b))
    if best is None or not best[0] < parent:
        return None
    return best[1], best[2]


def brute_tree(X, y, min_node_size=1):
    """Nested tuples: ``("L", mean)`` or ``("S", f, t, left, right)`` with mtry = p."""
    n = len(y)
    p = len(X[0])
    if n < 2 * min_node_size or len(set(y)) == 1:
        return ("L", float(sum(Fraction(v) for v in y) / n))
    split = brute_split(X, y, range(p))
    if split is None:
        return ("L", float(sum(Fraction(v) for v in y) / n))
    f, t = split
    li = [i for i in range(n) if X[i][f] <= t]
    ri = [i for i in range(n) if X[i][f] > t]
    return (
        "S",
        f,
        t,
        brute_tree([X[i] for i in li], [y[i] for i in li], min_node_size),
        brute_tree([X[i] for i in ri], [y[i] for i in ri], min_node_size),
    )


def normal_equations(y, x):
    """Slope and intercept from the 2x2 normal equations, exactly."""
    n = len(y)
    sx = sum(Fraction(v) for v in x)
    sy = sum(Fraction(v) for v in y)
    sxx = sum(Fraction(v) ** 2 for v in x)
    sxy = sum(Fraction(a) * Fraction(b) for a, b in zip(x, y))
    det = n * sxx - sx * sx
    slope = (n * sxy - sx * sy) / det
    intercept = (sy - slope * sx) / n
    return float(slope), float(intercept)
