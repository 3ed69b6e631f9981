"""Rational piecewise-linear convex approximations of strictly convex Green functions.

For a subdivision integer ``N`` we take one tangent plane of ``g`` at every
anchor ``lambda_j = (j/N) @ basis`` of the fundamental domain, lower it
slightly so its value and slope become rational (denominators ``N^3`` and
``N^2``), and extend to all anchors by the cocycle rule

    P_{j + lam}(y) = P_j(y - lam) + z_lam(y - lam).

``g^(N)`` is the pointwise maximum of all these planes. It is convex,
quasi-periodic in exact arithmetic, and its maximal affine regions form a
Lambda-periodic rational polytopal decomposition, computed here from the
lower convex hull of the lifted points ``(slope, -intercept)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import _exact as ex
from . import polytope
from .errors import (
    ConstructionError,
    DegeneratePolytopeError,
    InputError,
    RefineNError,
    StrictConvexityError,
)
from .green import GreenData, GreenFunction, HessianBounds
from .lattice import Lattice, domain_constants, reduce_coords, reduce_f

Label = tuple[int, tuple[int, ...]]  # (base piece index, lattice-coordinate shift)

_FLOAT_GUARD = 64 * np.finfo(float).eps
_ACTIVE_TOL = 1e-9


@dataclass(frozen=True)
class AffinePiece:
    """Affine function ``x -> slope . x + intercept`` tangent-ish at ``anchor``."""

    slope: ex.Vec
    intercept: Fraction
    anchor: ex.Vec
    label: Label = field(default=None, compare=False)

    def __call__(self, x: Sequence) -> Fraction:
        return ex.dot(self.slope, ex.vec(x)) + self.intercept


def lemma_value_bound(N: int, diameter: float, H_g: float) -> float:
    """Upper bound on ``g - g^(N)``: ``(R^2 H + 2R + 2) / (2 N^2)``."""
    return (diameter**2 * H_g + 2 * diameter + 2) / (2 * N**2)


def injectivity_threshold(bounds: HessianBounds, diameter: float, inradius: float) -> int:
    """Smallest ``N`` with ``4/h * sqrt(B(N) * H) < 2 r_F``, ``B`` the value bound."""
    h, H = bounds.h_g, bounds.H_g
    # B(N) = C / N^2, so the inequality reads 4/h * sqrt(C H) / N < 2 r_F
    c = (diameter**2 * H + 2 * diameter + 2) / 2
    return math.floor(4 / h * math.sqrt(c * H) / (2 * inradius)) + 1


@dataclass(frozen=True, eq=False)
class PLGreenFunction:
    data: GreenData
    N: int
    pieces: tuple[AffinePiece, ...]
    bounds: HessianBounds
    value_eps: tuple[float, ...] = ()
    slope_eps: tuple[float, ...] = ()

    @property
    def lattice(self) -> Lattice:
        return self.data.lattice

    @property
    def dim(self) -> int:
        return self.data.dim

    @cached_property
    def domain(self):
        return domain_constants(self.lattice)

    @cached_property
    def value_bound(self) -> float:
        return lemma_value_bound(self.N, self.domain.diameter, self.bounds.H_g)

    @cached_property
    def locality_radius(self) -> float:
        """Anchors farther than this from ``x`` cannot carry the maximum at ``x``.

        Active pieces satisfy ``h/2 u^2 - u/N < B`` with ``u`` the anchor
        distance and ``B`` the value bound; this is the positive root.
        """
        h, n = self.bounds.h_g, self.N
        root = (1 / n + math.sqrt(1 / n**2 + 2 * h * self.value_bound)) / h
        return root * (1 + 1e-6) + 1e-12

    @cached_property
    def injectivity_threshold(self) -> int:
        return injectivity_threshold(self.bounds, self.domain.diameter, self.domain.inradius)

    def piece(self, label: Label) -> AffinePiece:
        """Translate base piece ``j`` by the lattice vector with coordinates ``k``."""
        j, k = label
        base = self.pieces[j]
        if not any(k):
            return AffinePiece(base.slope, base.intercept, base.anchor, (j, tuple(k)))
        lam = self.lattice.point(k)
        slope = ex.add(base.slope, ex.matvec(self.data.b, lam))
        intercept = (base.intercept - ex.dot(base.slope, lam)
                     + self.data.c_lin(lam) - self.data.q(lam))
        return AffinePiece(slope, intercept, ex.add(base.anchor, lam), (j, tuple(k)))

    @cached_property
    def _base_f(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s = np.array([p.slope for p in self.pieces], dtype=float)
        b = np.array([float(p.intercept) for p in self.pieces])
        t = np.array([self.lattice.coords(p.anchor) for p in self.pieces], dtype=float)
        return s, b, t

    def window(self, radius: float) -> "PieceWindow":
        """All pieces whose anchors lie within ``radius`` of the closed domain.

        Selection is by a lattice-coordinate box, so it is a superset.
        """
        lat = self.lattice
        dual = np.linalg.norm(lat.inverse_f, axis=0)
        ext = radius * dual
        s0, b0, t0 = self._base_f
        bf, lam_f = self.data.b_f, lat.basis_f
        ranges = [range(math.floor(-e) - 1, math.ceil(1 + e) + 1) for e in ext]
        labels, slopes, inters, anchors = [], [], [], []
        for k in itertools.product(*ranges):
            ka = np.array(k, dtype=float)
            t = t0 + ka
            keep = np.all((t >= -ext - 1e-12) & (t <= 1 + ext + 1e-12), axis=1)
            if not keep.any():
                continue
            lam = ka @ lam_f
            blam = bf @ lam
            z0 = self.data.c_slope_f @ lam - 0.5 * lam @ blam
            for j in np.nonzero(keep)[0]:
                labels.append((int(j), k))
                slopes.append(s0[j] + blam)
                inters.append(b0[j] - s0[j] @ lam + z0)
                anchors.append(t[j] @ lam_f)
        return PieceWindow(self, labels, np.array(slopes), np.array(inters), np.array(anchors))

    @cached_property
    def _eval_window(self) -> "PieceWindow":
        return self.window(self.locality_radius)

    def value_f(self, x: np.ndarray) -> np.ndarray:
        """Float evaluation at points of shape ``(P, d)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x0, k = reduce_f(x, self.lattice)
        w = self._eval_window
        vals = (x0 @ w.slopes.T + w.intercepts).max(axis=1)
        lam = k @ self.lattice.basis_f
        return vals + self.data.z_f(lam, x0)

    def add_affine(self, slope: Sequence, constant=0) -> "PLGreenFunction":
        """``g^(N) + slope . x + constant`` as a PL Green function of the shifted data."""
        slope, constant = ex.vec(slope), Fraction(constant)
        c = tuple(ci + ex.dot(slope, lam) for ci, lam in zip(self.data.c, self.lattice.basis))
        data = GreenData(self.lattice, self.data.b, c)
        pieces = tuple(AffinePiece(ex.add(p.slope, slope), p.intercept + constant, p.anchor, p.label)
                       for p in self.pieces)
        return PLGreenFunction(data, self.N, pieces, self.bounds, self.value_eps, self.slope_eps)

    def to_json(self) -> dict:
        return {
            "green_data": self.data.to_json(),
            "N": self.N,
            "pieces": [{"anchor": [ex.fmt(v) for v in p.anchor],
                        "slope": [ex.fmt(v) for v in p.slope],
                        "intercept": ex.fmt(p.intercept)} for p in self.pieces],
        }


@dataclass(eq=False)
class PieceWindow:
    owner: PLGreenFunction
    labels: list[Label]
    slopes: np.ndarray
    intercepts: np.ndarray
    anchors: np.ndarray

    def exact(self, i: int) -> AffinePiece:
        return self.owner.piece(self.labels[i])

    def active_exact(self, x: ex.Vec, radius: float) -> tuple[Fraction, list[AffinePiece]]:
        """Exact max and maximizers at rational ``x`` among pieces near ``x``."""
        xf = np.array(x, dtype=float)
        near = np.nonzero(np.linalg.norm(self.anchors - xf, axis=1) <= radius)[0]
        vals = self.slopes[near] @ xf + self.intercepts[near]
        top = vals.max()
        scale = 1 + abs(top) + float(np.abs(xf).sum()) * float(np.abs(self.slopes[near]).max())
        close = near[vals >= top - _ACTIVE_TOL * scale]
        exact = [(p(x), p) for p in (self.exact(i) for i in close)]
        best = max(v for v, _ in exact)
        return best, [p for v, p in exact if v == best]


def build_pl_approx(g: GreenFunction, N: int, bounds: HessianBounds) -> PLGreenFunction:
    """Rationalized tangent planes of ``g`` at the ``(1/N)``-grid of the domain.

    Slopes are rounded to the nearest multiple of ``1/N^2``; the value is then
    lowered by ``|slope error|^2 / (2 h_g)`` (so the plane stays below ``g``
    by strong convexity) and floored to a multiple of ``1/N^3``.
    """
    if N < 1:
        raise InputError("N must be >= 1")
    if not bounds.h_g > 0:
        raise StrictConvexityError("build_pl_approx needs h_g > 0")
    if g.smoothness < 2:
        raise InputError("Green function must be C^2")
    lat, d = g.lattice, g.dim
    vden, sden = N**3, N**2
    anchors = [lat.point(tuple(Fraction(i, N) for i in idx))
               for idx in itertools.product(range(N), repeat=d)]
    af = np.array(anchors, dtype=float)
    vals_f, grads_f = g.value(af), g.grad(af)
    pieces, veps, seps = [], [], []
    for i, a in enumerate(anchors):
        v, grad = g.exact_value(a), g.exact_grad(a)
        exact = v is not None and grad is not None
        if not exact:
            v, grad = Fraction(float(vals_f[i])), ex.vec(float(x) for x in grads_f[i])
        slope = tuple(ex.round_to(x, sden) for x in grad)
        serr = ex.sub(grad, slope)
        serr_sq = ex.dot(serr, serr)
        margin = Fraction(float(serr_sq) / (2 * bounds.h_g)) * (1 + Fraction(1, 10**6)) if serr_sq else 0
        if not exact:
            margin += Fraction(_FLOAT_GUARD) * (1 + abs(v))
        value = ex.floor_to(v - margin, vden)
        eps = v - value
        snorm = math.sqrt(serr_sq)
        if not (eps < Fraction(1, N**2) and snorm < 1 / N):
            raise RefineNError(
                f"N={N} too coarse to rationalize the tangent at {[float(t) for t in a]}: "
                f"value shift {float(eps):.3g} (needs < {1 / N**2:.3g}), slope shift {snorm:.3g}")
        pieces.append(AffinePiece(slope, value - ex.dot(slope, a), a, (i, (0,) * d)))
        veps.append(float(eps))
        seps.append(snorm)
    return PLGreenFunction(g.data, N, tuple(pieces), bounds, tuple(veps), tuple(seps))


def evaluate(f: PLGreenFunction, x: Sequence) -> tuple[Fraction, frozenset[AffinePiece]]:
    """Exact value of ``g^(N)`` at a rational point and the set of maximizing pieces."""
    x0, k = reduce_coords(x, f.lattice)
    best, active = f._eval_window.active_exact(x0, f.locality_radius)
    lam = f.lattice.point(k)
    shifted = frozenset(f.piece((p.label[0], tuple(a + b for a, b in zip(p.label[1], k))))
                        for p in active)
    return best + f.data.z(lam, x0), shifted


@dataclass(frozen=True)
class VertexClass:
    point: ex.Vec
    active: tuple[Label, ...]


@dataclass(frozen=True)
class Cell:
    piece_index: int
    piece: AffinePiece
    vertices: tuple[ex.Vec, ...]
    volume: Fraction
    diameter_sq: Fraction
    vertex_labels: tuple[tuple[int, tuple[int, ...]], ...] = field(default=(), compare=False)


@dataclass(frozen=True, eq=False)
class PeriodicDecomposition:
    lattice: Lattice
    source: PLGreenFunction
    vertices: tuple[VertexClass, ...]
    cells: tuple[Cell, ...]

    def vertex_index(self, v: Sequence) -> int:
        v0, _ = reduce_coords(v, self.lattice)
        for i, vc in enumerate(self.vertices):
            if vc.point == v0:
                return i
        raise KeyError(v0)

    @cached_property
    def injective(self) -> bool:
        short = self.lattice.shortest_vector_sq
        return all(c.diameter_sq < short for c in self.cells)

    def face_lattice(self) -> dict[int, list[tuple[ex.Vec, ...]]]:
        """Faces by dimension, one representative per Lambda-class.

        Faces of a cell are the nonempty intersections of its facet vertex
        sets; a facet is the vertex set shared with one neighbouring piece.
        """
        faces: dict[int, dict[tuple, tuple]] = {k: {} for k in range(self.lattice.dim + 1)}
        for cell in self.cells:
            verts = []
            for vid, shift in cell.vertex_labels:
                vc = self.vertices[vid]
                lam = self.lattice.point(shift)
                labels = {(j, tuple(a - b for a, b in zip(k, shift))) for j, k in vc.active}
                verts.append((ex.sub(vc.point, lam), labels))
            own = (cell.piece_index, (0,) * self.lattice.dim)
            neighbours = set().union(*(lab for _, lab in verts)) - {own}
            facet_sets = []
            for nb in neighbours:
                ids = frozenset(i for i, (_, lab) in enumerate(verts) if nb in lab)
                if ex.affine_rank([verts[i][0] for i in ids]) == self.lattice.dim - 1:
                    facet_sets.append(ids)
            closure = {frozenset(range(len(verts)))} | set(facet_sets)
            frontier = set(facet_sets)
            while frontier:
                new = set()
                for a in frontier:
                    for b in facet_sets:
                        c = a & b
                        if c and c not in closure:
                            new.add(c)
                closure |= new
                frontier = new
            for ids in closure:
                pts = [verts[i][0] for i in ids]
                dim = ex.affine_rank(pts)
                key = self._face_key(pts)
                faces[dim].setdefault(key, key)
        return {k: sorted(v.values()) for k, v in faces.items()}

    def _face_key(self, pts: list[ex.Vec]) -> tuple[ex.Vec, ...]:
        anchor = min(pts)
        _, k = reduce_coords(anchor, self.lattice)
        lam = self.lattice.point(k)
        return tuple(sorted(ex.sub(p, lam) for p in pts))

    def to_json(self) -> dict:
        return {
            "lattice": self.lattice.to_json(),
            "N": self.source.N,
            "cells": [{
                "vertices": [[ex.fmt(v) for v in p] for p in c.vertices],
                "slope": [ex.fmt(v) for v in c.piece.slope],
                "intercept": ex.fmt(c.piece.intercept),
                "volume": ex.fmt(c.volume),
            } for c in self.cells],
            "vertices": [{"x": [ex.fmt(v) for v in vc.point],
                          "active": [[j, list(k)] for j, k in vc.active]} for vc in self.vertices],
        }


def _in_closed_domain(t: ex.Vec) -> bool:
    return all(0 <= ti <= 1 for ti in t)


def _vertex_classes(f: PLGreenFunction) -> dict[ex.Vec, VertexClass]:
    d = f.dim
    radius = f.locality_radius
    w = f.window(radius)
    lifted = np.column_stack([w.slopes, -w.intercepts])
    try:
        hull = ConvexHull(lifted)
    except QhullError as err:
        raise ConstructionError(f"lifted hull failed: {err}") from err
    lower = hull.equations[:, d] < -1e-12 * np.linalg.norm(hull.equations[:, :d + 1], axis=1)
    inv = f.lattice.inverse_f
    found: dict[ex.Vec, VertexClass] = {}
    seen: set[tuple[int, ...]] = set()
    for simplex, normal in zip(hull.simplices[lower], hull.equations[lower]):
        key = tuple(sorted(int(s) for s in simplex))
        if key in seen:
            continue
        seen.add(key)
        # cheap float rejection of facets whose vertex is far outside the domain
        vf = -normal[:d] / normal[d]
        tf = vf @ inv
        if np.any(tf < -1e-6) or np.any(tf > 1 + 1e-6):
            continue
        ps = [w.exact(i) for i in key]
        rows = [ex.sub(p.slope, ps[0].slope) for p in ps[1:]]
        rhs = [ps[0].intercept - p.intercept for p in ps[1:]]
        v = ex.solve(rows, rhs)
        if v is None or not _in_closed_domain(f.lattice.coords(v)):
            continue
        v0, k = reduce_coords(v, f.lattice)
        if v0 in found:
            continue
        value, active = w.active_exact(v, radius)
        if any(p(v) != value for p in ps):
            continue  # spurious facet from the window boundary
        labels = tuple(sorted((p.label[0], tuple(a - b for a, b in zip(p.label[1], k)))
                              for p in active))
        found[v0] = VertexClass(v0, labels)
    return found


def induced_decomposition(f: PLGreenFunction, check_injective: bool = True) -> PeriodicDecomposition:
    """Exact Lambda-periodic decomposition into the maximal affine regions of ``f``.

    Raises :class:`RefineNError` when ``check_injective`` is set and some cell
    is at least as long as the shortest lattice vector.
    """
    d = f.dim
    if d > polytope.MAX_EXACT_DIM:
        raise InputError(f"exact decompositions are supported for d <= {polytope.MAX_EXACT_DIM}")
    classes = _vertex_classes(f)
    vertices = tuple(classes[k] for k in sorted(classes))
    per_cell: dict[int, list[tuple[ex.Vec, tuple[int, tuple[int, ...]]]]] = {}
    for vid, vc in enumerate(vertices):
        for j, k in vc.active:
            lam = f.lattice.point(k)
            per_cell.setdefault(j, []).append((ex.sub(vc.point, lam), (vid, k)))
    cells = []
    for j in sorted(per_cell):
        pts = [p for p, _ in per_cell[j]]
        if ex.affine_rank(pts) < d:
            continue  # piece touches the maximum only on a lower-dimensional set
        try:
            vol = polytope.hull_volume(pts)
            hull_pts = tuple(polytope.hull_vertices(pts))
        except DegeneratePolytopeError:
            continue
        labels = tuple(lab for p, lab in per_cell[j] if p in set(hull_pts))
        cells.append(Cell(j, f.pieces[j], hull_pts, vol, polytope.diameter_sq(hull_pts), labels))
    total = sum((c.volume for c in cells), Fraction(0))
    if total != f.lattice.volume:
        raise ConstructionError(
            f"cells cover volume {total} instead of vol(Lambda) = {f.lattice.volume}; "
            "vertex enumeration is incomplete")
    dec = PeriodicDecomposition(f.lattice, f, vertices, tuple(cells))
    if check_injective and not dec.injective:
        worst = max(math.sqrt(c.diameter_sq) for c in cells)
        raise RefineNError(
            f"cell diameter {worst:.4g} >= shortest lattice vector "
            f"{math.sqrt(f.lattice.shortest_vector_sq):.4g} at N={f.N}; refine N "
            f"(the a-priori sufficient threshold is N >= {f.injectivity_threshold})")
    return dec


@dataclass
class ErrorBoundReport:
    N: int
    samples: int
    min_gap: float
    max_gap: float
    gap_bound: float
    sup_gap: float
    max_grad_dev: float
    grad_bound: float
    max_diameter: float
    diameter_bound: float

    @property
    def value_ok(self) -> bool:
        return self.min_gap >= 0 and self.max_gap < self.gap_bound

    @property
    def gradient_ok(self) -> bool:
        return self.max_grad_dev <= self.grad_bound

    @property
    def diameter_ok(self) -> bool:
        return self.max_diameter <= self.diameter_bound

    @property
    def ok(self) -> bool:
        return self.value_ok and self.gradient_ok and self.diameter_ok


def check_error_bounds(
    f: PLGreenFunction,
    g: GreenFunction,
    bounds: HessianBounds,
    samples: int = 1000,
    seed: int = 0,
    decomposition: PeriodicDecomposition | None = None,
    strict: bool = True,
) -> ErrorBoundReport:
    """Check the value, slope and cell-diameter bounds on random samples.

    The value gap ``g - f`` is sampled uniformly on the domain and at all
    anchors and vertices. Its supremum is attained at a vertex (``g - f`` is
    convex on each cell), which gives the ``eps`` fed into the slope and
    diameter bounds. Lower-bound checks allow float round-off of ``g`` only
    when ``g`` has no exact evaluation path.
    """
    if f.data.lattice != g.lattice:
        raise InputError("f and g live on different lattices")
    dec = decomposition or induced_decomposition(f, check_injective=False)
    rng = np.random.default_rng(seed)
    lat, d = f.lattice, f.dim
    pts = lat.point_f(rng.random((samples, d)))
    gap = g.value(pts) - f.value_f(pts)
    slack = _FLOAT_GUARD * (1 + np.abs(g.value(pts)))
    min_gap = float(np.min(gap + slack))
    # exact gaps at anchors and vertices when g allows it
    special = [p.anchor for p in f.pieces] + [vc.point for vc in dec.vertices]
    exact_gaps = []
    for x in special:
        gv = g.exact_value(x)
        fv, _ = evaluate(f, x)
        if gv is not None:
            exact_gaps.append(gv - fv)
        else:
            gf = float(g.value(np.array([x], dtype=float))[0])
            exact_gaps.append(Fraction(gf - float(fv) + _FLOAT_GUARD * (1 + abs(gf))))
    min_gap = min(min_gap, float(min(exact_gaps)))
    sup_gap = max(float(np.max(gap)), float(max(exact_gaps)))
    eps = max(sup_gap, 0.0)
    grad_bound = 2 * math.sqrt(eps * bounds.H_g)
    diam_bound = 4 / bounds.h_g * math.sqrt(eps * bounds.H_g)
    per_cell = max(2, -(-samples // max(1, len(dec.cells))))
    max_dev, max_diam = 0.0, 0.0
    for cell in dec.cells:
        verts = np.array(cell.vertices, dtype=float)
        weights = rng.dirichlet(np.ones(len(verts)), size=per_cell)
        xs = np.vstack([verts, weights @ verts])
        dev = np.linalg.norm(g.grad(xs) - np.array(cell.piece.slope, dtype=float), axis=1)
        max_dev = max(max_dev, float(dev.max()))
        max_diam = max(max_diam, math.sqrt(cell.diameter_sq))
    report = ErrorBoundReport(f.N, samples, min_gap, sup_gap, f.value_bound, sup_gap,
                              max_dev, grad_bound, max_diam, diam_bound)
    if strict and not report.ok:
        raise ConstructionError(f"approximation bound violated: {report}")
    return report
