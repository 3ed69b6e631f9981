"""Dual polytopes, discrete Chambert-Loir measures and weak-distance diagnostics."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import _exact as ex
from . import polytope
from .errors import DegeneratePolytopeError, InputError
from .green import GreenFunction, mixed_hessian_from_matrices
from .lattice import Lattice, reduce_coords
from .periodic import grid_points
from .plapprox import PeriodicDecomposition, PLGreenFunction, induced_decomposition


def thread_count() -> int:
    """Data-parallel width, capped by ``TROPMA_THREADS``."""
    try:
        cap = int(os.environ.get("TROPMA_THREADS", "0"))
    except ValueError:
        cap = 0
    n = os.cpu_count() or 1
    return max(1, min(n, cap) if cap > 0 else n)


@dataclass(frozen=True)
class DualPolytope:
    vertex: ex.Vec
    generators: tuple[ex.Vec, ...]
    hull: tuple[ex.Vec, ...]
    volume: Fraction


def dual_polytope(dec: PeriodicDecomposition, v: Sequence | int) -> DualPolytope:
    """Convex hull of the slopes of the pieces active at vertex ``v``."""
    if isinstance(v, int):
        vc = dec.vertices[v]
    else:
        try:
            vc = dec.vertices[dec.vertex_index(v)]
        except KeyError:
            raise InputError(f"{[str(x) for x in ex.vec(v)]} is not a vertex of the decomposition")
    f = dec.source
    gens = tuple(sorted({f.piece(label).slope for label in vc.active}))
    try:
        vol = polytope.hull_volume(gens)
        hull = tuple(polytope.hull_vertices(gens))
    except DegeneratePolytopeError as err:
        raise DegeneratePolytopeError(
            f"dual polytope at {[str(x) for x in vc.point]} is not full-dimensional; "
            "the PL function is not strongly convex there") from err
    return DualPolytope(vc.point, gens, hull, vol)


@dataclass(frozen=True)
class DiscreteMeasure:
    lattice: Lattice
    atoms: tuple[tuple[ex.Vec, Fraction], ...]

    def __post_init__(self):
        if any(w <= 0 for _, w in self.atoms):
            raise InputError("atom weights must be positive")
        pts = [reduce_coords(x, self.lattice)[0] for x, _ in self.atoms]
        if len(set(pts)) != len(pts):
            raise InputError("atoms must be distinct modulo the lattice")

    @property
    def mass(self) -> Fraction:
        return sum((w for _, w in self.atoms), Fraction(0))

    def points_f(self) -> np.ndarray:
        return np.array([x for x, _ in self.atoms], dtype=float).reshape(-1, self.lattice.dim)

    def weights_f(self) -> np.ndarray:
        return np.array([float(w) for _, w in self.atoms])

    def to_json(self) -> dict:
        return {"atoms": [{"x": [ex.fmt(v) for v in x], "w": ex.fmt(w)} for x, w in self.atoms]}

    @classmethod
    def from_json(cls, obj: dict, lattice: Lattice) -> "DiscreteMeasure":
        try:
            atoms = tuple((ex.vec(a["x"]), ex.frac(a["w"])) for a in obj["atoms"])
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as err:
            raise InputError(f"malformed measure JSON: {err}") from err
        return cls(lattice, atoms)

    def to_csv(self) -> str:
        d = self.lattice.dim
        header = ",".join([f"x{i + 1}" for i in range(d)] + ["w", "w_exact"])
        rows = [",".join([repr(float(v)) for v in x] + [repr(float(w)), ex.fmt(w)])
                for x, w in self.atoms]
        return "\n".join([header] + rows) + "\n"


@dataclass(frozen=True, eq=False)
class DensityMeasure:
    """``density(x) dx`` with ``density`` Lambda-periodic, integrated on a grid."""

    lattice: Lattice
    density: Callable[[np.ndarray], np.ndarray]
    grid_n: int = 128

    def samples(self, n: int | None = None) -> np.ndarray:
        n = n or self.grid_n
        vals = np.asarray(self.density(grid_points(self.lattice, n)), dtype=float)
        if np.any(vals < 0):
            raise InputError("density must be nonnegative")
        return vals

    @property
    def mass(self) -> float:
        return float(self.lattice.volume) * float(np.mean(self.samples()))

    @classmethod
    def from_samples(cls, lattice: Lattice, samples: np.ndarray) -> "DensityMeasure":
        from .periodic import GridPart

        part = GridPart(lattice, samples)
        return cls(lattice, part.value, samples.shape[0])


def hessian_density(g: GreenFunction, grid_n: int = 128) -> DensityMeasure:
    """The measure ``Hess_g dx = d! det(D^2 g) dx``."""
    return DensityMeasure(g.lattice, lambda x: mixed_hessian_from_matrices([g.hess(x)] * g.dim),
                          grid_n)


def chambert_loir_measure(f: PLGreenFunction,
                          decomposition: PeriodicDecomposition | None = None) -> DiscreteMeasure:
    """One atom per vertex class with weight ``d! * vol(dual polytope)``."""
    dec = decomposition or induced_decomposition(f, check_injective=False)
    fact = math.factorial(f.dim)
    workers = thread_count()
    if workers > 1 and len(dec.vertices) > 64:
        with ThreadPoolExecutor(workers) as pool:
            duals = list(pool.map(lambda i: dual_polytope(dec, i), range(len(dec.vertices))))
    else:
        duals = [dual_polytope(dec, i) for i in range(len(dec.vertices))]
    return DiscreteMeasure(f.lattice, tuple((dp.vertex, fact * dp.volume) for dp in duals))


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A continuous Lambda-periodic test function with known ``sup |f|``."""

    __test__ = False  # not a pytest class

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    sup: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.fn(np.atleast_2d(np.asarray(x, dtype=float)))


def constant_test(lattice: Lattice) -> TestFunction:
    return TestFunction("1", lambda x: np.ones(len(x)), 1.0)


def harmonic_test(lattice: Lattice, k: Sequence[int], kind: str = "cos") -> TestFunction:
    """``cos`` or ``sin`` of ``2 pi k . t`` in lattice coordinates."""
    kv = np.asarray(k, dtype=float)
    trig = np.cos if kind == "cos" else np.sin
    name = f"{kind}({','.join(str(int(v)) for v in k)})"
    return TestFunction(name, lambda x: trig(2 * np.pi * lattice.coords_f(x) @ kv), 1.0)


def bump_test(lattice: Lattice, seed: int = 0, sharpness: float = 2.0) -> TestFunction:
    """Smooth periodic bump ``prod_i exp(s (cos 2 pi (t_i - c_i) - 1))``, random center."""
    center = np.random.default_rng(seed).random(lattice.dim)

    def fn(x):
        t = lattice.coords_f(x)
        return np.exp(sharpness * (np.cos(2 * np.pi * (t - center)) - 1).sum(axis=1))

    return TestFunction(f"bump{seed}", fn, 1.0)


def harmonic_battery(lattice: Lattice) -> list[TestFunction]:
    """Constant, ``cos``/``sin`` of each first harmonic, and ``cos`` of twice the first."""
    d = lattice.dim
    unit = [tuple(int(i == j) for j in range(d)) for i in range(d)]
    out = [constant_test(lattice)]
    for k in unit:
        out += [harmonic_test(lattice, k, "cos"), harmonic_test(lattice, k, "sin")]
    out.append(harmonic_test(lattice, tuple(2 * v for v in unit[0]), "cos"))
    return out


def default_battery(lattice: Lattice, seed: int = 0) -> list[TestFunction]:
    return harmonic_battery(lattice) + [bump_test(lattice, seed)]


def pair(m: DiscreteMeasure | DensityMeasure, testfn: Callable, grid_n: int | None = None) -> float:
    """``m(testfn)``: a weighted sum for atoms, trapezoid quadrature for densities."""
    if isinstance(m, DiscreteMeasure):
        if not m.atoms:
            return 0.0
        return float(np.dot(m.weights_f(), testfn(m.points_f())))
    n = grid_n or m.grid_n
    pts = grid_points(m.lattice, n)
    return float(m.lattice.volume) * float(np.mean(m.samples(n) * testfn(pts)))


def weak_distance(m1, m2, testfns: Sequence[TestFunction], grid_n: int | None = None) -> float:
    """``max_f |m1(f) - m2(f)| / (1 + sup|f|)`` over the given test functions."""
    if not testfns:
        raise InputError("weak_distance needs at least one test function")
    if m1.lattice != m2.lattice:
        raise InputError("measures live on different lattices")
    return max(abs(pair(m1, f, grid_n) - pair(m2, f, grid_n)) / (1 + f.sup) for f in testfns)
