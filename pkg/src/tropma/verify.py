"""Runnable invariant suite behind ``tropma verify``.

Every check is bound-based and deterministic given the seed. Failures and
unexpected exceptions become report entries; nothing here raises.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from . import _exact as ex
from . import clmeasure as cl
from . import masolver as ms
from . import plapprox as pl
from .green import (
    GreenData,
    GreenFunction,
    canonical_green,
    combine,
    degree,
    hessian_bounds,
    integrate_mixed_hessian,
    mixed_hessian,
    translate,
)
from .lattice import Lattice, reduce, reduce_coords
from .periodic import Harmonic, TrigSeries, grid_points, parse_harmonics

INJECTABLE = ("value_bound",)


@dataclass
class CheckResult:
    name: str
    passed: bool
    observed: float
    bound: float
    runtime: float = field(default=0.0, compare=False)
    detail: str = ""

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"

    def to_json(self) -> dict:
        # runtime is left out so that reports are reproducible byte for byte
        out = {"name": self.name, "status": self.status,
               "observed": float(self.observed), "bound": float(self.bound)}
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class VerifyReport:
    seed: int
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        return {"seed": self.seed, "status": self.status,
                "checks": [c.to_json() for c in self.checks]}

    def table(self) -> str:
        width = max(len(c.name) for c in self.checks)
        rows = [f"{c.name:<{width}}  {c.status:<4}  observed={c.observed:<12.4g} "
                f"bound={c.bound:<12.4g} {c.runtime:6.2f}s" for c in self.checks]
        return "\n".join(rows + [f"overall: {self.status}"])


# fixtures -------------------------------------------------------------------

def _lattices() -> list[Lattice]:
    return [Lattice.standard(2), Lattice(((1, 0), (0, 2))),
            Lattice(((2, 1), (Fraction(1, 2), Fraction(3, 2))))]


def _rand_frac(rng: np.random.Generator, lo: int = -5, hi: int = 5) -> Fraction:
    den = int(rng.integers(1, 13))
    return Fraction(int(rng.integers(lo * den, hi * den + 1)), den)


def _rand_trig(lattice: Lattice, rng: np.random.Generator, amp: float = 0.05,
               terms: int = 3) -> TrigSeries:
    d = lattice.dim
    harmonics = []
    for _ in range(terms):
        k = tuple(int(v) for v in rng.integers(-2, 3, size=d))
        if not any(k):
            k = (1,) + (0,) * (d - 1)
        c, s = rng.uniform(-1, 1, size=2) * amp / (2 * terms)
        harmonics.append(Harmonic(k, float(c), float(s)))
    return TrigSeries(lattice, tuple(harmonics), float(rng.uniform(-1, 1)))


def _smooth_green(data: GreenData, rng: np.random.Generator, amp: float = 0.005) -> GreenFunction:
    """A smooth Green function that stays strictly convex for the fixtures used here."""
    return GreenFunction(data, _rand_trig(data.lattice, rng, amp))


# lattice ---------------------------------------------------------------------

def check_reduce(rng) -> tuple[float, float]:
    bad = 0
    for lat in _lattices():
        for _ in range(40):
            x = tuple(_rand_frac(rng) for _ in range(lat.dim))
            x0, lam = reduce(x, lat)
            again, lam0 = reduce(x0, lat)
            bad += again != x0 or any(lam0)
            k = tuple(int(v) for v in rng.integers(-4, 5, size=lat.dim))
            bad += reduce(ex.add(x, lat.point(k)), lat)[0] != x0
    return bad, 0


def _unimodular(d: int, rng) -> ex.Mat:
    u = [[Fraction(int(i == j)) for j in range(d)] for i in range(d)]
    for _ in range(6):
        i, j = rng.choice(d, size=2, replace=False)
        c = int(rng.integers(-2, 3))
        u[i] = [a + c * b for a, b in zip(u[i], u[j])]
    if rng.random() < 0.5:
        u[0], u[1] = u[1], u[0]
    return ex.mat(u)


def check_unimodular_volume(rng) -> tuple[float, float]:
    bad = 0
    for lat in _lattices():
        for _ in range(10):
            other = Lattice(ex.mat([ex.vecmat(row, lat.basis) for row in _unimodular(lat.dim, rng)]))
            bad += other.volume != lat.volume
    return bad, 0


# green -----------------------------------------------------------------------

def _greens(rng) -> list[GreenFunction]:
    lat = _lattices()[2]
    data = GreenData(lat, ((2, 1), (1, 2)), (Fraction(1, 2), Fraction(-1, 3)))
    return [GreenFunction(data, _rand_trig(lat, rng)) for _ in range(2)]


def check_quasi_periodicity(rng) -> tuple[float, float]:
    worst = 0.0
    for g in _greens(rng):
        lat = g.lattice
        x = lat.point_f(rng.random((50, 2)) * 3 - 1)
        k = rng.integers(-3, 4, size=(50, 2))
        lam = k @ lat.basis_f
        dev = g.value(x + lam) - g.value(x) - g.data.z_f(lam, x)
        worst = max(worst, float(np.max(np.abs(dev) / (1 + np.abs(g.value(x + lam))))))
    return worst, 1e-12


def check_mixed_hessian_algebra(rng) -> tuple[float, float]:
    g1, g2 = _greens(rng)
    x = rng.random((20, 2))
    worst = float(np.max(np.abs(mixed_hessian([g1, g2], x) - mixed_hessian([g2, g1], x))))
    a, b = int(rng.integers(0, 4)), int(rng.integers(0, 4))
    combo = combine([a, b], [g1, g2]) if a + b else combine([1], [g1])
    a, b = (a, b) if a + b else (1, 0)
    lhs = mixed_hessian([combo, g2], x)
    rhs = a * mixed_hessian([g1, g2], x) + b * mixed_hessian([g2, g2], x)
    worst = max(worst, float(np.max(np.abs(lhs - rhs) / (1 + np.abs(rhs)))))
    det = 2 * np.linalg.det(g1.hess(x))
    worst = max(worst, float(np.max(np.abs(mixed_hessian([g1, g1], x) - det) / (1 + np.abs(det)))))
    return worst, 1e-12


def check_mixed_hessian_integral(rng) -> tuple[float, float]:
    worst = 0.0
    for lat, b in [(Lattice.standard(1), ((1,),)), (_lattices()[1], ((2, 1), (1, 2)))]:
        data = GreenData(lat, b)
        gs = [_smooth_green(data, rng, 0.05) for _ in range(lat.dim)]
        worst = max(worst, abs(integrate_mixed_hessian(gs, 64) - float(degree(data))))
    return worst, 1e-8


def check_fd_consistency(rng) -> tuple[float, float]:
    """Central-difference error ratio under step halving; observed is the worst offset from 4."""
    g = _greens(rng)[0]
    x = rng.random((5, 2))
    worst = 0.0
    for what in ("grad", "hess"):
        errs = []
        for step in (1e-2, 5e-3):
            e = np.eye(2) * step
            if what == "grad":
                fd = np.stack([(g.value(x + e[i]) - g.value(x - e[i])) / (2 * step)
                               for i in range(2)], axis=1)
                errs.append(np.max(np.abs(fd - g.grad(x))))
            else:
                fd = np.stack([(g.grad(x + e[i]) - g.grad(x - e[i])) / (2 * step)
                               for i in range(2)], axis=1)
                errs.append(np.max(np.abs(fd - g.hess(x))))
        worst = max(worst, abs(errs[0] / errs[1] - 4))
    return worst, 0.5


# plapprox --------------------------------------------------------------------

def _pl_suite() -> list[tuple[GreenFunction, int]]:
    out = []
    l1 = Lattice.standard(1)
    for c in (0, Fraction(1, 2)):
        g = canonical_green(GreenData(l1, ((1,),), (c,)))
        out += [(g, n) for n in (2, 4, 8)]
    for lat in _lattices()[:2]:
        for b in (((1, 0), (0, 1)), ((2, 1), (1, 2))):
            g = canonical_green(GreenData(lat, b))
            out += [(g, n) for n in (1, 2)]
    return out


def check_translation_identity(rng) -> tuple[float, float]:
    data = GreenData(_lattices()[1], ((2, 1), (1, 2)), (Fraction(1, 2), 0))
    g = canonical_green(data)
    f = pl.build_pl_approx(g, 3, hessian_bounds(g, 8))
    bad = 0
    for _ in range(30):
        x = tuple(_rand_frac(rng, -2, 2) for _ in range(2))
        k = tuple(int(v) for v in rng.integers(-3, 4, size=2))
        lam = data.lattice.point(k)
        j = int(rng.integers(len(f.pieces)))
        p0, p1 = f.piece((j, (0, 0))), f.piece((j, k))
        xl = ex.add(x, lam)
        bad += g.exact_value(x) - p0(x) != g.exact_value(xl) - p1(xl)
        if any(k):
            _, act = pl.evaluate(f, x)
            labels = {p.label for p in pl.evaluate(f, xl)[1]}
            for p in act:
                j0, k0 = p.label
                bad += (j0, tuple(a + b for a, b in zip(k0, k))) not in labels
    return bad, 0


def _error_reports(rng, inject: frozenset[str]) -> list[pl.ErrorBoundReport]:
    out = []
    for g, n in _pl_suite():
        hb = hessian_bounds(g, 8)
        f = pl.build_pl_approx(g, n, hb)
        rep = pl.check_error_bounds(f, g, hb, samples=1000, seed=int(rng.integers(2**31)),
                                    strict=False)
        if "value_bound" in inject:
            # push the approximation down by twice its bound: a genuine violation
            low = f.add_affine((0,) * g.dim, -2 * Fraction(f.value_bound))
            bad = pl.check_error_bounds(low, g, hb, samples=200, seed=0, strict=False)
            rep.max_gap = max(rep.max_gap, bad.max_gap)
        out.append(rep)
    return out


def check_tiling(rng) -> tuple[float, float]:
    bad = 0
    for g, n in _pl_suite():
        f = pl.build_pl_approx(g, n, hessian_bounds(g, 8))
        dec = pl.induced_decomposition(f, check_injective=False)
        bad += sum((c.volume for c in dec.cells), Fraction(0)) != g.lattice.volume
    return bad, 0


# clmeasure -------------------------------------------------------------------

def check_mass_identity(rng) -> tuple[float, float]:
    worst = Fraction(0)
    for g, n in _pl_suite():
        m = cl.chambert_loir_measure(pl.build_pl_approx(g, n, hessian_bounds(g, 8)))
        worst = max(worst, abs(m.mass - degree(g.data)))
    return float(worst), 0


def _atoms_mod(m: cl.DiscreteMeasure) -> dict:
    return {reduce_coords(x, m.lattice)[0]: w for x, w in m.atoms}


def check_translation_equivariance(rng) -> tuple[float, float]:
    bad = 0
    data = GreenData(_lattices()[1], ((2, 1), (1, 2)))
    g = canonical_green(data)
    n = 2
    m0 = cl.chambert_loir_measure(pl.build_pl_approx(g, n, hessian_bounds(g, 8)))
    for _ in range(3):
        k = tuple(Fraction(int(v), n) for v in rng.integers(0, 2 * n, size=2))
        a = data.lattice.point(k)
        ga = translate(g, a)
        ma = cl.chambert_loir_measure(pl.build_pl_approx(ga, n, hessian_bounds(ga, 8)))
        shifted = {reduce_coords(ex.add(x, a), data.lattice)[0]: w for x, w in m0.atoms}
        bad += shifted != _atoms_mod(ma)
    return bad, 0


def check_affine_invariance(rng) -> tuple[float, float]:
    data = GreenData(_lattices()[0], ((2, 1), (1, 2)))
    g = canonical_green(data)
    f = pl.build_pl_approx(g, 2, hessian_bounds(g, 8))
    base = _atoms_mod(cl.chambert_loir_measure(f))
    bad = 0
    for _ in range(3):
        slope = (_rand_frac(rng), _rand_frac(rng))
        moved = _atoms_mod(cl.chambert_loir_measure(f.add_affine(slope, _rand_frac(rng))))
        bad += moved != base
    return bad, 0


def check_weak_convergence(rng) -> tuple[float, float]:
    """``d_N`` decreases and stays under the ``C/N`` envelope fitted at the coarsest N.

    Observed is ``max_N N d_N / (4 d_4)``; the bound is the allowed factor 2.
    """
    lat = Lattice.standard(1)
    g = GreenFunction(GreenData(lat, ((1,),)), parse_harmonics("1/50*cos(1)", lat))
    hb = hessian_bounds(g, 64)
    dens = cl.hessian_density(g, 256)
    battery = cl.harmonic_battery(lat)
    ns = (4, 8, 16, 32)
    ds = [cl.weak_distance(cl.chambert_loir_measure(pl.build_pl_approx(g, n, hb)), dens, battery)
          for n in ns]
    if any(b > a for a, b in zip(ds, ds[1:])):
        return math.inf, 2.0
    c0 = ns[0] * ds[0]
    return max(n * d for n, d in zip(ns, ds)) / c0, 2.0


# masolver --------------------------------------------------------------------

def _manufactured(d: int, n: int) -> tuple[ms.MAProblem, np.ndarray]:
    lat = Lattice.standard(d)
    data = GreenData(lat, tuple(tuple(int(i == j) for j in range(d)) for i in range(d)))
    amp = 0.01 if d == 1 else 0.005
    cs = np.cos(2 * np.pi * grid_points(lat, n))
    f = np.log(np.prod(1 - 4 * np.pi**2 * amp * cs, axis=1))
    exact = amp * cs.sum(axis=1)
    return ms.MAProblem(data, f, n), exact - exact.mean()


def check_grid_convergence(rng) -> tuple[float, float]:
    """Worst offset of the error ratio from 4; the allowed offset is 0.5."""
    worst = 0.0
    for d in (1, 2):
        errs = []
        for n in (32, 64, 128):
            p, exact = _manufactured(d, n)
            errs.append(float(np.max(np.abs(ms.solve(p).phi.ravel() - exact))))
        worst = max(worst, *(abs(a / b - 4) for a, b in zip(errs, errs[1:])))
    return worst, 0.5


def _random_density(rng, lat: Lattice, symmetric: bool = False) -> TrigSeries:
    harmonics = []
    for _ in range(3):
        k = tuple(int(v) for v in rng.integers(-2, 3, size=lat.dim))
        if not any(k):
            k = (1,) + (0,) * (lat.dim - 1)
        c, s = rng.uniform(-0.1, 0.1, size=2)
        harmonics.append(Harmonic(k, float(c), 0.0 if symmetric else float(s)))
    return TrigSeries(lat, tuple(harmonics), 0.0)


def check_gauge_invariance(rng) -> tuple[float, float]:
    lat = _lattices()[1]
    data = GreenData(lat, ((2, 1), (1, 2)))
    f = _random_density(rng, lat)
    shift = float(rng.uniform(-5, 5))
    s1 = ms.solve(ms.normalize_density(f, data, 24))
    s2 = ms.solve(ms.normalize_density(lambda x: f.value(x) + shift, data, 24))
    return float(np.max(np.abs(s1.phi - s2.phi))), 1e-10


def check_newton_iterates(rng) -> tuple[float, float]:
    """Mean-zero and positivity at every accepted Newton step.

    Observed is the worst ``|mean phi|``; a non-positive iterate makes it infinite.
    """
    lat = _lattices()[1]
    data = GreenData(lat, ((2, 1), (1, 2)))
    worst = [0.0]

    def watch(_, phi, min_eig):
        worst[0] = max(worst[0], abs(float(phi.mean())) if min_eig > 0 else math.inf)

    ms.solve(ms.normalize_density(_random_density(rng, lat), data, 24), callback=watch)
    return worst[0], 1e-14


def check_symmetry(rng) -> tuple[float, float]:
    lat = Lattice.standard(2)
    data = GreenData(lat, ((2, 1), (1, 2)))
    n = 24
    phi = ms.solve(ms.normalize_density(_random_density(rng, lat, symmetric=True), data, n)).phi
    flipped = phi[(-np.arange(n)) % n][:, (-np.arange(n)) % n]
    return float(np.max(np.abs(phi - flipped))), 1e-12


def check_ma_measure(rng) -> tuple[float, float]:
    worst = 0.0
    for lat, b in [(Lattice.standard(1), ((1,),)), (_lattices()[1], ((2, 1), (1, 2)))]:
        data = GreenData(lat, b)
        p = ms.normalize_density(_random_density(rng, lat), data, 32)
        g = ms.solution_to_green(p, ms.solve(p))
        worst = max(worst, abs(integrate_mixed_hessian([g] * lat.dim, 64) - float(degree(data))))
    return worst, 1e-8


def _bound_check(rep_key: str) -> Callable:
    def run(reports):
        worst, ok = 0.0, True
        for r in reports:
            if rep_key == "value":
                ok &= r.value_ok
                worst = max(worst, r.max_gap / r.gap_bound)
            elif rep_key == "gradient":
                ok &= r.gradient_ok
                worst = max(worst, r.max_grad_dev / r.grad_bound if r.grad_bound else 0.0)
            else:
                ok &= r.diameter_ok
                worst = max(worst, r.max_diameter / r.diameter_bound if r.diameter_bound else 0.0)
        return worst, ok
    return run


CHECKS: tuple[tuple[str, Callable], ...] = (
    ("lattice.reduce", check_reduce),
    ("lattice.unimodular_volume", check_unimodular_volume),
    ("green.quasi_periodicity", check_quasi_periodicity),
    ("green.mixed_hessian_algebra", check_mixed_hessian_algebra),
    ("green.mixed_hessian_integral", check_mixed_hessian_integral),
    ("green.fd_consistency", check_fd_consistency),
    ("plapprox.translation_identity", check_translation_identity),
    ("plapprox.tiling", check_tiling),
    ("clmeasure.mass_identity", check_mass_identity),
    ("clmeasure.translation_equivariance", check_translation_equivariance),
    ("clmeasure.affine_invariance", check_affine_invariance),
    ("clmeasure.weak_convergence", check_weak_convergence),
    ("masolver.grid_convergence", check_grid_convergence),
    ("masolver.gauge_invariance", check_gauge_invariance),
    ("masolver.newton_iterates", check_newton_iterates),
    ("masolver.symmetry", check_symmetry),
    ("masolver.ma_measure", check_ma_measure),
)

_BOUND_CHECKS = (("plapprox.value_bound", "value"), ("plapprox.gradient_bound", "gradient"),
                 ("plapprox.diameter_bound", "diameter"))


def _run(name: str, fn: Callable[[], tuple[float, float, bool]]) -> CheckResult:
    start = time.perf_counter()
    try:
        observed, bound, ok = fn()
        detail = ""
    except Exception as err:  # a crashing check is a failing check
        observed, bound, ok, detail = math.nan, math.nan, False, f"{type(err).__name__}: {err}"
    return CheckResult(name, bool(ok), float(observed), float(bound),
                       time.perf_counter() - start, detail)


def cmd_verify(seed: int = 0, inject: Iterable[str] = (), only: Iterable[str] | None = None) -> VerifyReport:
    """Run the invariant suite. ``inject`` names checks to sabotage (test hook)."""
    inject = frozenset(inject)
    unknown = inject - set(INJECTABLE)
    if unknown:
        raise ValueError(f"cannot inject faults into {sorted(unknown)}")
    only = None if only is None else set(only)
    results = []
    for i, (name, fn) in enumerate(CHECKS):
        if only is not None and name not in only:
            continue
        rng = np.random.default_rng([seed, i])

        def run(fn=fn, rng=rng):
            observed, bound = fn(rng)
            return observed, bound, observed <= bound
        results.append(_run(name, run))
    if only is None or any(name in only for name, _ in _BOUND_CHECKS):
        rng = np.random.default_rng([seed, len(CHECKS)])
        start = time.perf_counter()
        try:
            reports = _error_reports(rng, inject)
            error = None
        except Exception as err:
            reports, error = [], f"{type(err).__name__}: {err}"
        shared = time.perf_counter() - start
        for name, key in _BOUND_CHECKS:
            if only is not None and name not in only:
                continue
            if error:
                results.append(CheckResult(name, False, math.nan, 1.0, shared, error))
                continue
            worst, ok = _bound_check(key)(reports)
            results.append(CheckResult(name, ok, worst, 1.0, shared / 3))
    return VerifyReport(seed, results)
