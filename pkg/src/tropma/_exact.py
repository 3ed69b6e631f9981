"""Small exact linear-algebra helpers over :class:`fractions.Fraction`.

Matrices are tuples of row tuples. Everything here is dimension-agnostic but
meant for the d <= 3 sizes the package works with.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

Vec = tuple[Fraction, ...]
Mat = tuple[Vec, ...]


def frac(value) -> Fraction:
    """Parse ``value`` as an exact rational.

    Accepts ints, Fractions, strings like ``"3/4"`` or ``"0.25"``; floats are
    converted exactly (binary expansion), so prefer strings for data input.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, (int, float, str)):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a rational")


def vec(values: Iterable) -> Vec:
    return tuple(frac(v) for v in values)


def mat(rows: Iterable[Iterable]) -> Mat:
    return tuple(vec(r) for r in rows)


def fmt(q: Fraction) -> str:
    """Canonical ``"p/q"`` string (``"p"`` when the denominator is 1)."""
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def dot(u: Sequence[Fraction], v: Sequence[Fraction]) -> Fraction:
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


def add(u: Sequence[Fraction], v: Sequence[Fraction]) -> Vec:
    return tuple(a + b for a, b in zip(u, v))


def sub(u: Sequence[Fraction], v: Sequence[Fraction]) -> Vec:
    return tuple(a - b for a, b in zip(u, v))


def scale(s: Fraction, u: Sequence[Fraction]) -> Vec:
    return tuple(s * a for a in u)


def matvec(m: Mat, v: Sequence[Fraction]) -> Vec:
    return tuple(dot(row, v) for row in m)


def vecmat(v: Sequence[Fraction], m: Mat) -> Vec:
    """Row vector times matrix."""
    n = len(m[0])
    return tuple(sum((v[i] * m[i][j] for i in range(len(v))), Fraction(0)) for j in range(n))


def transpose(m: Mat) -> Mat:
    return tuple(zip(*m))


def det(m: Sequence[Sequence[Fraction]]) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination."""
    a = [list(map(Fraction, row)) for row in m]
    n = len(a)
    sign = 1
    result = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            sign = -sign
        p = a[col][col]
        result *= p
        for r in range(col + 1, n):
            factor = a[r][col] / p
            if factor:
                for c in range(col, n):
                    a[r][c] -= factor * a[col][c]
    return sign * result


def solve(m: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]) -> Vec | None:
    """Solve ``m x = rhs`` exactly; ``None`` when ``m`` is singular."""
    n = len(m)
    a = [list(map(Fraction, row)) + [Fraction(rhs[i])] for i, row in enumerate(m)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return None
        a[col], a[pivot] = a[pivot], a[col]
        p = a[col][col]
        for r in range(n):
            if r != col and a[r][col] != 0:
                factor = a[r][col] / p
                for c in range(col, n + 1):
                    a[r][c] -= factor * a[col][c]
    return tuple(a[i][n] / a[i][i] for i in range(n))


def inverse(m: Mat) -> Mat:
    n = len(m)
    cols = []
    for k in range(n):
        e = [Fraction(int(i == k)) for i in range(n)]
        x = solve(m, e)
        if x is None:
            raise ZeroDivisionError("singular matrix")
        cols.append(x)
    return transpose(tuple(cols))


def affine_rank(points: Sequence[Sequence[Fraction]]) -> int:
    """Dimension of the affine hull of ``points`` (-1 for the empty set)."""
    if not points:
        return -1
    base = points[0]
    rows = [list(sub(p, base)) for p in points[1:]]
    rank = 0
    ncols = len(base)
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        p = rows[rank][col]
        for r in range(rank + 1, len(rows)):
            factor = rows[r][col] / p
            if factor:
                for c in range(col, ncols):
                    rows[r][c] -= factor * rows[rank][c]
        rank += 1
    return rank


def floor_to(x: float | Fraction, denom: int) -> Fraction:
    """Largest multiple of ``1/denom`` that is ``<= x``."""
    if isinstance(x, Fraction):
        return Fraction(math.floor(x * denom), denom)
    return Fraction(math.floor(Fraction(x) * denom), denom)


def round_to(x: float | Fraction, denom: int) -> Fraction:
    """Nearest multiple of ``1/denom`` (ties toward -inf, deterministic)."""
    y = Fraction(x) * denom
    lo = math.floor(y)
    return Fraction(lo if y - lo <= Fraction(1, 2) else lo + 1, denom)
