"""Green functions of line bundles on the torus R^d / Lambda.

A Green function satisfies ``g(x + lam) = g(x) + z_lam(x)`` with the affine
cocycle ``z_lam(x) = q(lam) + c(lam) + b(x, lam)``, ``q(x) = b(x, x) / 2``.
Every such ``g`` is ``q + c~ + phi`` with ``c~`` the linear extension of
``c`` and ``phi`` Lambda-periodic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _exact as ex
from .errors import AmplenessError, InputError, StrictConvexityError
from .lattice import Lattice
from .periodic import (
    CombinedPart,
    ConstantPart,
    PeriodicPart,
    ShiftedPart,
    zero_part,
)


@dataclass(frozen=True)
class GreenData:
    """Bilinear form ``b`` and linear correction ``c``.

    ``c`` is given in lattice coordinates: ``c[i] = c(lambda_i)``.
    """

    lattice: Lattice
    b: ex.Mat
    c: ex.Vec = None

    def __post_init__(self):
        d = self.lattice.dim
        b = ex.mat(self.b)
        c = ex.vec(self.c) if self.c is not None else tuple(Fraction(0) for _ in range(d))
        if len(b) != d or any(len(r) != d for r in b) or len(c) != d:
            raise InputError(f"b must be {d}x{d} and c must have {d} entries")
        if any(b[i][j] != b[j][i] for i in range(d) for j in range(d)):
            raise InputError("bilinear form b must be symmetric")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def dim(self) -> int:
        return self.lattice.dim

    @cached_property
    def is_positive_definite(self) -> bool:
        d = self.dim
        return all(ex.det([row[:k] for row in self.b[:k]]) > 0 for k in range(1, d + 1))

    def require_ample(self) -> None:
        if not self.is_positive_definite:
            raise AmplenessError("bilinear form b is not positive definite (line bundle not ample)")

    @cached_property
    def c_slope(self) -> ex.Vec:
        """Vector ``s`` with ``c~(x) = s . x``."""
        return ex.matvec(self.lattice.inverse, self.c)

    @cached_property
    def b_f(self) -> np.ndarray:
        return np.array(self.b, dtype=float)

    @cached_property
    def c_slope_f(self) -> np.ndarray:
        return np.array(self.c_slope, dtype=float)

    def bform(self, x: Sequence, y: Sequence) -> Fraction:
        return ex.dot(ex.vec(x), ex.matvec(self.b, ex.vec(y)))

    def q(self, x: Sequence) -> Fraction:
        return self.bform(x, x) / 2

    def c_lin(self, x: Sequence) -> Fraction:
        return ex.dot(self.c_slope, ex.vec(x))

    def z(self, lam: Sequence, x: Sequence) -> Fraction:
        """Cocycle ``z_lam(x)`` for a lattice vector ``lam``."""
        return self.q(lam) + self.c_lin(lam) + self.bform(x, lam)

    def z_f(self, lam: np.ndarray, x: np.ndarray) -> np.ndarray:
        lam = np.atleast_2d(lam)
        x = np.atleast_2d(x)
        blam = lam @ self.b_f
        return 0.5 * np.sum(lam * blam, axis=1) + lam @ self.c_slope_f + np.sum(x * blam, axis=1)

    def to_json(self) -> dict:
        return {
            "lattice": self.lattice.to_json(),
            "b": [[ex.fmt(v) for v in row] for row in self.b],
            "c": [ex.fmt(v) for v in self.c],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GreenData":
        try:
            lattice = Lattice.from_json(obj["lattice"])
            return cls(lattice, ex.mat(obj["b"]), ex.vec(obj.get("c", [0] * lattice.dim)))
        except (KeyError, TypeError, ZeroDivisionError) as err:
            raise InputError(f"malformed green data: {err}") from err


@dataclass(frozen=True)
class HessianBounds:
    h_g: float
    H_g: float
    min_eig: float = field(default=float("nan"), compare=False)
    max_eig: float = field(default=float("nan"), compare=False)


@dataclass(frozen=True, eq=False)
class GreenFunction:
    data: GreenData
    periodic: PeriodicPart = None

    def __post_init__(self):
        if self.periodic is None:
            object.__setattr__(self, "periodic", zero_part(self.data.lattice))
        elif self.periodic.lattice != self.data.lattice:
            raise InputError("periodic part lives on a different lattice")

    @property
    def lattice(self) -> Lattice:
        return self.data.lattice

    @property
    def dim(self) -> int:
        return self.data.dim

    @property
    def smoothness(self) -> int:
        return self.periodic.smoothness

    @property
    def is_canonical(self) -> bool:
        return isinstance(self.periodic, ConstantPart) and self.periodic.is_zero

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        quad = 0.5 * np.einsum("pi,ij,pj->p", x, self.data.b_f, x)
        return quad + x @ self.data.c_slope_f + self.periodic.value(x)

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return x @ self.data.b_f + self.data.c_slope_f + self.periodic.grad(x)

    def hess(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.data.b_f + self.periodic.hess(x)

    def exact_value(self, x: Sequence) -> Fraction | None:
        x = ex.vec(x)
        per = self.periodic.exact_value(x)
        return None if per is None else self.data.q(x) + self.data.c_lin(x) + per

    def exact_grad(self, x: Sequence) -> ex.Vec | None:
        x = ex.vec(x)
        per = self.periodic.exact_grad(x)
        if per is None:
            return None
        return ex.add(ex.add(ex.matvec(self.data.b, x), self.data.c_slope), per)

    def hess_on_grid(self, m: int) -> np.ndarray:
        """Hessians at the ``m^d`` lattice-coordinate grid (C order)."""
        return self.data.b_f + self.periodic.on_grid(m, 2)


def canonical_green(data: GreenData) -> GreenFunction:
    return GreenFunction(data, zero_part(data.lattice))


def combine(coefs: Sequence[int], greens: Sequence[GreenFunction]) -> GreenFunction:
    """``sum coefs[i] * greens[i]``, a Green function of the tensor-power bundle."""
    lattice = greens[0].lattice
    if any(g.lattice != lattice for g in greens):
        raise InputError("Green functions live on different lattices")
    coefs = tuple(Fraction(a) for a in coefs)
    d = lattice.dim
    b = tuple(tuple(sum((a * g.data.b[i][j] for a, g in zip(coefs, greens)), Fraction(0))
                    for j in range(d)) for i in range(d))
    c = tuple(sum((a * g.data.c[i] for a, g in zip(coefs, greens)), Fraction(0)) for i in range(d))
    part = CombinedPart(coefs, tuple(g.periodic for g in greens))
    return GreenFunction(GreenData(lattice, b, c), part)


def translate(g: GreenFunction, a: Sequence) -> GreenFunction:
    """Green function ``x -> g(x - a)`` (of the translated bundle)."""
    a = ex.vec(a)
    data = g.data
    c = tuple(ci - data.bform(lam, a) for ci, lam in zip(data.c, data.lattice.basis))
    constant = data.q(a) - data.c_lin(a)
    return GreenFunction(GreenData(data.lattice, data.b, c), ShiftedPart(g.periodic, a, constant))


def degree(data: GreenData) -> Fraction:
    """``vol(Lambda) * d! * det(b)``."""
    data.require_ample()
    return data.lattice.volume * math.factorial(data.dim) * ex.det(data.b)


def _perm_sign(p: Sequence[int]) -> int:
    inversions = sum(1 for i, j in itertools.combinations(range(len(p)), 2) if p[i] > p[j])
    return -1 if inversions % 2 else 1


def _check_tuple(gs: Sequence[GreenFunction]) -> int:
    if not gs:
        raise InputError("need d Green functions")
    d = gs[0].dim
    if len(gs) != d:
        raise InputError(f"mixed Hessian in dimension {d} needs {d} functions, got {len(gs)}")
    if any(g.lattice != gs[0].lattice for g in gs):
        raise InputError("Green functions live on different lattices")
    if any(g.smoothness < 2 for g in gs):
        raise InputError("mixed Hessian needs C^2 Green functions")
    return d


def mixed_hessian_from_matrices(hs: Sequence[np.ndarray]) -> np.ndarray:
    """Permutation sum over Hessian stacks ``hs[i]`` of shape ``(P, d, d)``."""
    d = hs[0].shape[-1]
    perms = [(p, _perm_sign(p)) for p in itertools.permutations(range(d))]
    total = np.zeros(hs[0].shape[0])
    for mu, smu in perms:
        for nu, snu in perms:
            term = np.full(hs[0].shape[0], float(smu * snu))
            for i in range(d):
                term = term * hs[i][:, mu[i], nu[i]]
            total += term
    return total


def mixed_hessian(gs: Sequence[GreenFunction], x: np.ndarray) -> np.ndarray | float:
    _check_tuple(gs)
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    out = mixed_hessian_from_matrices([g.hess(pts) for g in gs])
    return float(out[0]) if np.ndim(x) <= 1 else out


def integrate_mixed_hessian(gs: Sequence[GreenFunction], grid_n: int) -> float:
    """Periodic trapezoid rule on the ``grid_n^d`` lattice-coordinate grid."""
    d = _check_tuple(gs)
    if grid_n < 2:
        raise InputError("grid_n must be >= 2")
    vals = mixed_hessian_from_matrices([g.hess_on_grid(grid_n) for g in gs])
    return float(gs[0].lattice.volume) * float(np.mean(vals))


def hessian_bounds(g: GreenFunction, sample_n: int, safety: float = 0.1) -> HessianBounds:
    """Eigenvalue range of ``D^2 g`` over a grid, widened by ``safety``."""
    if g.smoothness < 2:
        raise InputError("Hessian bounds need a C^2 Green function")
    if not 0 <= safety < 1:
        raise InputError("safety factor must lie in [0, 1)")
    eig = np.linalg.eigvalsh(g.hess_on_grid(sample_n))
    lo, hi = float(eig.min()), float(eig.max())
    if lo <= 0:
        raise StrictConvexityError(
            f"Green function is not strictly convex: Hessian eigenvalue {lo:.6g} <= 0")
    return HessianBounds(lo * (1 - safety), hi * (1 + safety), lo, hi)
