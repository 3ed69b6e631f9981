"""Complete lattices in R^d with a fixed half-open fundamental parallelepiped."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _exact as ex
from .errors import DegenerateLatticeError, InputError


@dataclass(frozen=True)
class Lattice:
    """Lattice spanned by the rows of ``basis``.

    A point ``x`` has lattice coordinates ``t`` with ``x = t @ basis``; the
    fundamental domain is ``{t @ basis : 0 <= t_i < 1}``.
    """

    basis: ex.Mat

    def __post_init__(self):
        basis = ex.mat(self.basis)
        if not basis or any(len(r) != len(basis) for r in basis):
            raise DegenerateLatticeError("basis must be d vectors in R^d, d >= 1")
        if ex.det(basis) == 0:
            raise DegenerateLatticeError("basis vectors are linearly dependent")
        object.__setattr__(self, "basis", basis)

    @classmethod
    def standard(cls, d: int) -> "Lattice":
        return cls(tuple(tuple(Fraction(int(i == j)) for j in range(d)) for i in range(d)))

    @property
    def dim(self) -> int:
        return len(self.basis)

    @cached_property
    def gram(self) -> ex.Mat:
        return tuple(tuple(ex.dot(u, v) for v in self.basis) for u in self.basis)

    @cached_property
    def volume(self) -> Fraction:
        return abs(ex.det(self.basis))

    @cached_property
    def inverse(self) -> ex.Mat:
        """``basis^{-1}``: lattice coordinates are ``x @ inverse``."""
        return ex.inverse(self.basis)

    @cached_property
    def basis_f(self) -> np.ndarray:
        return np.array(self.basis, dtype=float)

    @cached_property
    def inverse_f(self) -> np.ndarray:
        return np.array(self.inverse, dtype=float)

    def coords(self, x: Sequence[Fraction]) -> ex.Vec:
        return ex.vecmat(ex.vec(x), self.inverse)

    def point(self, t: Sequence) -> ex.Vec:
        return ex.vecmat(ex.vec(t), self.basis)

    def coords_f(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.inverse_f

    def point_f(self, t: np.ndarray) -> np.ndarray:
        return np.asarray(t, dtype=float) @ self.basis_f

    @cached_property
    def shortest_vector_sq(self) -> Fraction:
        """Squared length of a shortest nonzero lattice vector (exact)."""
        best = min(ex.dot(v, v) for v in self.basis)
        # |t_i| <= |v| * |column i of basis^{-1}| for v = t @ basis
        dual_sq = [ex.dot(col, col) for col in ex.transpose(self.inverse)]
        bounds = [math.isqrt(math.floor(best * q)) + 1 for q in dual_sq]
        for t in itertools.product(*(range(-k, k + 1) for k in bounds)):
            if any(t):
                v = self.point(t)
                best = min(best, ex.dot(v, v))
        return best

    def to_json(self) -> dict:
        return {"dim": self.dim, "basis": [[ex.fmt(q) for q in row] for row in self.basis]}

    @classmethod
    def from_json(cls, obj: dict) -> "Lattice":
        try:
            basis = ex.mat(obj["basis"])
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as err:
            raise InputError(f"malformed lattice: {err}") from err
        if "dim" in obj and obj["dim"] != len(basis):
            raise InputError("lattice 'dim' disagrees with basis size")
        return cls(basis)


@dataclass(frozen=True)
class FundamentalDomain:
    owner: Lattice
    volume: Fraction
    diameter_sq: Fraction
    inradius_sq: Fraction
    diameter: float = field(init=False)
    inradius: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "diameter", math.sqrt(self.diameter_sq))
        object.__setattr__(self, "inradius", math.sqrt(self.inradius_sq))


def reduce(x: Sequence, lattice: Lattice) -> tuple[ex.Vec, ex.Vec]:
    """Split ``x`` as ``point + lam`` with ``point`` in the half-open domain.

    Exact for rational input. Returns ``(point, lam)`` where ``lam`` is the
    lattice vector (in R^d, not coordinates).
    """
    xq = ex.vec(x)
    t = lattice.coords(xq)
    k = tuple(Fraction(math.floor(ti)) for ti in t)
    lam = lattice.point(k)
    return ex.sub(xq, lam), lam


def reduce_coords(x: Sequence, lattice: Lattice) -> tuple[ex.Vec, tuple[int, ...]]:
    """Like :func:`reduce` but returns the integer lattice coordinates of ``lam``."""
    xq = ex.vec(x)
    t = lattice.coords(xq)
    k = tuple(math.floor(ti) for ti in t)
    return ex.sub(xq, lattice.point(k)), k


def reduce_f(x: np.ndarray, lattice: Lattice) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized float version; returns points and integer coordinate shifts."""
    t = lattice.coords_f(x)
    k = np.floor(t)
    return lattice.point_f(t - k), k.astype(int)


def domain_constants(lattice: Lattice) -> FundamentalDomain:
    d = lattice.dim
    corners = [lattice.point(t) for t in itertools.product((0, 1), repeat=d)]
    diam_sq = max(ex.dot(ex.sub(p, q), ex.sub(p, q)) for p, q in itertools.combinations(corners, 2))
    # width between the facets t_i = 0 and t_i = 1 is 1 / |column i of basis^{-1}|
    dual_sq = [ex.dot(col, col) for col in ex.transpose(lattice.inverse)]
    inradius_sq = min(Fraction(1, 4) / q for q in dual_sq)
    return FundamentalDomain(lattice, lattice.volume, diam_sq, inradius_sq)
