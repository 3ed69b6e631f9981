"""Exact convex hulls and volumes of small sets of rational points (d <= 3).

Dimensions 1 and 2 are handled by exact algorithms. In dimension 3 Qhull
proposes the facets in floating point and every facet is then verified in
rational arithmetic; a failed verification raises :class:`ConstructionError`
rather than returning a wrong volume.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import _exact as ex
from .errors import ConstructionError, DegeneratePolytopeError

MAX_EXACT_DIM = 3


def _cross2(o, a, b) -> Fraction:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def hull_2d(points: Sequence[ex.Vec]) -> list[ex.Vec]:
    """Extreme points in counter-clockwise order (Andrew's monotone chain)."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    lower: list[ex.Vec] = []
    for p in pts:
        while len(lower) >= 2 and _cross2(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[ex.Vec] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross2(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _det3(a, b, c) -> Fraction:
    return (a[0] * (b[1] * c[2] - b[2] * c[1])
            - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0]))


def _facets_3d(pts: list[ex.Vec]) -> list[tuple[int, int, int]]:
    """Outward-oriented triangles covering the hull boundary, verified exactly."""
    try:
        hull = ConvexHull(np.array(pts, dtype=float))
    except QhullError as err:
        raise DegeneratePolytopeError(f"Qhull failed: {err}") from err
    centroid = tuple(sum(p[i] for p in pts) / len(pts) for i in range(3))
    facets = []
    for simplex in hull.simplices:
        i, j, k = (int(s) for s in simplex)
        a, b, c = pts[i], pts[j], pts[k]
        orient = _det3(ex.sub(b, a), ex.sub(c, a), ex.sub(centroid, a))
        if orient == 0:
            raise ConstructionError("degenerate hull facet in exact verification")
        if orient > 0:
            j, k = k, j
            b, c = c, b
        ab, ac = ex.sub(b, a), ex.sub(c, a)
        if any(_det3(ab, ac, ex.sub(p, a)) > 0 for p in pts):
            raise ConstructionError("Qhull facet is not supporting in exact arithmetic")
        facets.append((i, j, k))
    # closed surface: oriented area vectors must cancel
    total = [Fraction(0)] * 3
    for i, j, k in facets:
        u, v = ex.sub(pts[j], pts[i]), ex.sub(pts[k], pts[i])
        n = (u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0])
        total = [t + x for t, x in zip(total, n)]
    if any(total):
        raise ConstructionError("hull boundary is not closed in exact arithmetic")
    return facets


def hull_vertices(points: Sequence[Sequence]) -> list[ex.Vec]:
    """Extreme points of the convex hull (sorted for d != 2)."""
    pts = sorted(set(ex.vec(p) for p in points))
    d = len(pts[0])
    if d == 1:
        return [pts[0]] if len(pts) == 1 else [pts[0], pts[-1]]
    if d == 2:
        return hull_2d(pts)
    if d == 3:
        if ex.affine_rank(pts) < 3:
            raise DegeneratePolytopeError("point set is not full-dimensional")
        used = sorted({i for f in _facets_3d(pts) for i in f})
        # triangulated coplanar facets may use non-extreme points; drop them
        extreme = []
        for i in used:
            others = [pts[j] for j in used if j != i]
            if not _in_hull_3d(pts[i], others):
                extreme.append(pts[i])
        return extreme
    raise ValueError(f"exact hulls supported for d <= {MAX_EXACT_DIM}")


def _in_hull_3d(p: ex.Vec, others: list[ex.Vec]) -> bool:
    if ex.affine_rank(others) < 3:
        return False
    for i, j, k in _facets_3d(others):
        a = others[i]
        if _det3(ex.sub(others[j], a), ex.sub(others[k], a), ex.sub(p, a)) > 0:
            return False
    return True


def hull_volume(points: Sequence[Sequence]) -> Fraction:
    """Exact Lebesgue volume of the convex hull of rational points."""
    pts = sorted(set(ex.vec(p) for p in points))
    if not pts:
        raise DegeneratePolytopeError("empty point set")
    d = len(pts[0])
    if d == 1:
        vol = pts[-1][0] - pts[0][0]
    elif d == 2:
        poly = hull_2d(pts)
        vol = Fraction(0)
        if len(poly) >= 3:
            for a, b in zip(poly, poly[1:] + poly[:1]):
                vol += a[0] * b[1] - a[1] * b[0]
        vol = abs(vol) / 2
    elif d == 3:
        if ex.affine_rank(pts) < 3:
            raise DegeneratePolytopeError("point set is not full-dimensional")
        centroid = tuple(sum(p[i] for p in pts) / len(pts) for i in range(3))
        vol = Fraction(0)
        for i, j, k in _facets_3d(pts):
            vol += abs(_det3(ex.sub(pts[i], centroid), ex.sub(pts[j], centroid),
                             ex.sub(pts[k], centroid)))
        vol /= 6
    else:
        raise ValueError(f"exact volumes supported for d <= {MAX_EXACT_DIM}")
    if vol == 0:
        raise DegeneratePolytopeError("point set is not full-dimensional")
    return vol


def diameter_sq(points: Sequence[Sequence]) -> Fraction:
    pts = [ex.vec(p) for p in points]
    return max((ex.dot(ex.sub(p, q), ex.sub(p, q)) for p, q in itertools.combinations(pts, 2)),
               default=Fraction(0))
