"""Lattice-periodic scalar functions with value, gradient and Hessian access.

All periodic parts are evaluated on float arrays of points of shape
``(P, d)`` in Euclidean coordinates. Internally they work in lattice
coordinates ``t = x @ basis^{-1}`` and pull derivatives back:
``grad_x = M grad_t`` and ``hess_x = M hess_t M^T`` with ``M = basis^{-1}``.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _exact as ex
from .errors import InputError
from .lattice import Lattice

ANALYTIC = 10**6  # smoothness class for analytic parts
_CHUNK = 2048


class PeriodicPart:
    """Base class; subclasses implement :meth:`_derivs_t`."""

    lattice: Lattice
    smoothness: int = ANALYTIC

    def _derivs_t(self, t: np.ndarray, order: int) -> list[np.ndarray]:
        raise NotImplementedError

    def _eval(self, x: np.ndarray, order: int) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = self.lattice.coords_f(x)
        out = self._derivs_t(t, order)[order]
        m = self.lattice.inverse_f
        if order == 1:
            return out @ m.T
        if order == 2:
            return np.einsum("ia,pab,jb->pij", m, out, m)
        return out

    def value(self, x: np.ndarray) -> np.ndarray:
        return self._eval(x, 0)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self._eval(x, 1)

    def hess(self, x: np.ndarray) -> np.ndarray:
        return self._eval(x, 2)

    def on_grid(self, m: int, order: int) -> np.ndarray:
        """Derivative of the given order at :func:`grid_points` ``(lattice, m)``."""
        return self._eval(grid_points(self.lattice, m), order)

    def exact_value(self, x: Sequence[Fraction]) -> Fraction | None:
        """Exact value at a rational point, when the representation allows it."""
        return None

    def exact_grad(self, x: Sequence[Fraction]) -> ex.Vec | None:
        return None


@dataclass(frozen=True, eq=False)
class ConstantPart(PeriodicPart):
    lattice: Lattice
    constant: Fraction = Fraction(0)

    def _derivs_t(self, t, order):
        p, d = t.shape
        return [np.full(p, float(self.constant)), np.zeros((p, d)), np.zeros((p, d, d))]

    def exact_value(self, x):
        return Fraction(self.constant)

    def exact_grad(self, x):
        return tuple(Fraction(0) for _ in range(self.lattice.dim))

    @property
    def is_zero(self) -> bool:
        return self.constant == 0


def zero_part(lattice: Lattice) -> ConstantPart:
    return ConstantPart(lattice, Fraction(0))


@dataclass(frozen=True)
class Harmonic:
    """``cos_coef*cos(2 pi k.t) + sin_coef*sin(2 pi k.t)`` in lattice coordinates."""

    k: tuple[int, ...]
    cos_coef: float = 0.0
    sin_coef: float = 0.0


@dataclass(frozen=True, eq=False)
class TrigSeries(PeriodicPart):
    lattice: Lattice
    harmonics: tuple[Harmonic, ...]
    constant: float = 0.0

    def _derivs_t(self, t, order):
        p, d = t.shape
        val = np.full(p, float(self.constant))
        grad = np.zeros((p, d))
        hess = np.zeros((p, d, d))
        for h in self.harmonics:
            k = np.asarray(h.k, dtype=float)
            w = 2 * np.pi * k
            phase = t @ w
            c, s = np.cos(phase), np.sin(phase)
            val += h.cos_coef * c + h.sin_coef * s
            if order >= 1:
                grad += np.outer(-h.cos_coef * s + h.sin_coef * c, w)
            if order >= 2:
                hess += (-h.cos_coef * c - h.sin_coef * s)[:, None, None] * np.outer(w, w)
        return [val, grad, hess]


@dataclass(frozen=True, eq=False)
class GridPart(PeriodicPart):
    """Trigonometric interpolant of samples on the grid ``t = i / n``.

    Even-length axes split the Nyquist mode symmetrically so that the
    interpolant is real and its derivatives are real.
    """

    lattice: Lattice
    samples: np.ndarray
    smoothness: int = ANALYTIC

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != self.lattice.dim:
            raise InputError("grid samples must have one axis per lattice dimension")
        if min(samples.shape) < 2:
            raise InputError("grid_n must be at least 2")
        object.__setattr__(self, "samples", samples)
        coef = np.fft.fftn(samples) / samples.size
        axes = []
        for n in samples.shape:
            freqs = np.fft.fftfreq(n, 1.0 / n).astype(int)
            entries = []
            for idx, k in enumerate(freqs):
                if n % 2 == 0 and idx == n // 2:
                    entries += [(idx, k, 0.5), (idx, -k, 0.5)]
                else:
                    entries.append((idx, k, 1.0))
            axes.append(entries)
        ks, cs = [], []
        for combo in itertools.product(*axes):
            idx = tuple(e[0] for e in combo)
            c = coef[idx] * np.prod([e[2] for e in combo])
            if c != 0:
                ks.append([e[1] for e in combo])
                cs.append(c)
        object.__setattr__(self, "_modes", np.array(ks, dtype=float).reshape(-1, samples.ndim))
        object.__setattr__(self, "_coefs", np.array(cs, dtype=complex))

    @property
    def grid_n(self) -> tuple[int, ...]:
        return self.samples.shape

    def _derivs_t(self, t, order):
        p, d = t.shape
        out = [np.empty(p), np.empty((p, d)), np.empty((p, d, d))]
        w = 2j * np.pi * self._modes
        for start in range(0, p, _CHUNK):
            sl = slice(start, start + _CHUNK)
            e = np.exp(2j * np.pi * (t[sl] @ self._modes.T)) * self._coefs
            out[0][sl] = e.sum(axis=1).real
            if order >= 1:
                out[1][sl] = (e @ w).real
            if order >= 2:
                out[2][sl] = np.einsum("pk,ka,kb->pab", e, w, w).real
        return out

    def on_grid(self, m: int, order: int) -> np.ndarray:
        if m < max(self.samples.shape):
            return super().on_grid(m, order)
        # fold each mode onto the m-grid (no aliasing for m >= n) and transform back
        d = self.lattice.dim
        idx = tuple((self._modes.astype(int) % m).T)
        w = 2j * np.pi * self._modes

        def back(weights):
            arr = np.zeros((m,) * d, dtype=complex)
            np.add.at(arr, idx, self._coefs * weights)
            return (np.fft.ifftn(arr) * m**d).real.ravel()

        if order == 0:
            return back(1.0)
        mi = self.lattice.inverse_f
        if order == 1:
            gt = np.stack([back(w[:, a]) for a in range(d)], axis=-1)
            return gt @ mi.T
        ht = np.empty((m**d, d, d))
        for a in range(d):
            for b in range(a, d):
                ht[:, a, b] = ht[:, b, a] = back(w[:, a] * w[:, b])
        return np.einsum("ia,pab,jb->pij", mi, ht, mi)

    def to_csv(self) -> str:
        lines = [",".join(str(n) for n in self.samples.shape)]
        rows = self.samples.reshape(-1, self.samples.shape[-1])
        lines += [",".join(format(float(v), ".17g") for v in row) for row in rows]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, lattice: Lattice) -> "GridPart":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines:
            raise InputError("empty grid CSV")
        try:
            shape = tuple(int(v) for v in lines[0].split(","))
            values = [float(v) for ln in lines[1:] for v in ln.split(",")]
        except ValueError as err:
            raise InputError(f"malformed grid CSV: {err}") from err
        if len(shape) != lattice.dim or math.prod(shape) != len(values):
            raise InputError(f"grid CSV header {shape} does not match {len(values)} values")
        return cls(lattice, np.array(values).reshape(shape))


@dataclass(frozen=True, eq=False)
class ShiftedPart(PeriodicPart):
    """``x -> part(x - shift) + constant``."""

    part: PeriodicPart
    shift: ex.Vec
    constant: Fraction = Fraction(0)

    @property
    def lattice(self):
        return self.part.lattice

    @property
    def smoothness(self):
        return self.part.smoothness

    def _eval(self, x, order):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = self.part._eval(x - np.array(self.shift, dtype=float), order)
        return out + float(self.constant) if order == 0 else out

    def exact_value(self, x):
        inner = self.part.exact_value(ex.sub(x, self.shift))
        return None if inner is None else inner + self.constant

    def exact_grad(self, x):
        return self.part.exact_grad(ex.sub(x, self.shift))


@dataclass(frozen=True, eq=False)
class CombinedPart(PeriodicPart):
    """Integer (or rational) linear combination of periodic parts."""

    coefs: tuple[Fraction, ...]
    parts: tuple[PeriodicPart, ...]

    @property
    def lattice(self):
        return self.parts[0].lattice

    @property
    def smoothness(self):
        return min(p.smoothness for p in self.parts)

    def _eval(self, x, order):
        return sum(float(c) * p._eval(x, order) for c, p in zip(self.coefs, self.parts))

    def exact_value(self, x):
        vals = [p.exact_value(x) for p in self.parts]
        if any(v is None for v in vals):
            return None
        return sum((c * v for c, v in zip(self.coefs, vals)), Fraction(0))

    def exact_grad(self, x):
        grads = [p.exact_grad(x) for p in self.parts]
        if any(g is None for g in grads):
            return None
        out = tuple(Fraction(0) for _ in x)
        for c, g in zip(self.coefs, grads):
            out = ex.add(out, ex.scale(c, g))
        return out


# Harmonic expressions: "1/10*cos(1) - 0.05*sin(0,1) + 2".
# cos(k1,...,kd) means cos(2 pi (k1 t1 + ... + kd td)) in lattice coordinates.
_TERM = re.compile(
    r"\s*(?P<sign>[+-])?\s*(?P<coef>\d+(?:\.\d*)?(?:/\d+)?)?\s*\*?\s*"
    r"(?:(?P<fn>cos|sin)\s*\(\s*(?P<k>-?\d+(?:\s*,\s*-?\d+)*)\s*\))?\s*"
)


def parse_harmonics(expr: str, lattice: Lattice) -> TrigSeries:
    """Parse a sum of rational multiples of ``cos(k)``/``sin(k)`` and constants."""
    pos, constant, harmonics = 0, Fraction(0), []
    text = expr.strip()
    if not text:
        return TrigSeries(lattice, (), 0.0)
    first = True
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos or (not first and m.group("sign") is None):
            raise InputError(f"cannot parse harmonic expression at {text[pos:]!r}")
        if m.group("coef") is None and m.group("fn") is None:
            raise InputError(f"empty term in harmonic expression at {text[pos:]!r}")
        coef = Fraction(m.group("coef")) if m.group("coef") else Fraction(1)
        if m.group("sign") == "-":
            coef = -coef
        if m.group("fn"):
            k = tuple(int(v) for v in m.group("k").split(","))
            if len(k) != lattice.dim:
                raise InputError(f"harmonic {m.group(0).strip()!r} needs {lattice.dim} indices")
            if m.group("fn") == "cos":
                harmonics.append(Harmonic(k, cos_coef=float(coef)))
            else:
                harmonics.append(Harmonic(k, sin_coef=float(coef)))
        else:
            constant += coef
        pos, first = m.end(), False
    return TrigSeries(lattice, tuple(harmonics), float(constant))


def grid_points(lattice: Lattice, n: int) -> np.ndarray:
    """Points ``(i_1/n, ..., i_d/n) @ basis`` in C order, shape ``(n**d, d)``."""
    axes = np.meshgrid(*([np.arange(n) / n] * lattice.dim), indexing="ij")
    t = np.stack([a.ravel() for a in axes], axis=-1)
    return lattice.point_f(t)
