import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tropma import masolver as ms
from tropma.clmeasure import chambert_loir_measure
from tropma.errors import (
    AmplenessError,
    DensityRangeError,
    InputError,
    NonConvergenceError,
    RefineGridError,
)
from tropma.green import GreenData, degree, hessian_bounds, integrate_mixed_hessian
from tropma.lattice import Lattice
from tropma.periodic import Harmonic, TrigSeries, grid_points, parse_harmonics
from tropma.plapprox import build_pl_approx

B2 = ((2, 1), (1, 2))


def identity_data(d):
    return GreenData(Lattice.standard(d), tuple(tuple(int(i == j) for j in range(d)) for i in range(d)))


def manufactured(d, n):
    """``phi*`` and ``f* = log det(I + D^2 phi*)`` with analytic derivatives."""
    data = identity_data(d)
    amp = 0.01 if d == 1 else 0.005
    cs = np.cos(2 * np.pi * grid_points(data.lattice, n))
    f = np.log(np.prod(1 - 4 * np.pi**2 * amp * cs, axis=1))
    exact = amp * cs.sum(axis=1)
    return ms.MAProblem(data, f, n), exact.reshape((n,) * d)


def test_normalize_examples(z1):
    data = GreenData(z1, ((1,),))
    p = ms.normalize_density(np.zeros(16), data, 16)
    assert p.normalized and np.array_equal(p.f, np.zeros(16))
    p = ms.normalize_density(np.full(16, 5.0), data, 16)
    assert np.allclose(p.f, 0, atol=1e-15)
    p = ms.normalize_density(parse_harmonics("0.1*cos(1)", z1), data, 64)
    t = np.arange(64) / 64
    shift = math.log(np.i0(0.1))  # mean of e^{0.1 cos} is I_0(0.1)
    assert shift == pytest.approx(0.0025, abs=2e-6)
    assert np.allclose(p.f, 0.1 * np.cos(2 * np.pi * t) - shift, atol=1e-14)
    assert np.mean(np.exp(p.f)) == pytest.approx(1, abs=1e-12)


def test_normalize_non_unit_volume(rect):
    data = GreenData(rect, B2)
    p = ms.normalize_density(lambda x: x[:, 1] * 0 + np.sin(np.pi * x[:, 1]) ** 2, data, 16)
    # torus integral of e^f equals vol(Lambda)
    assert float(rect.volume) * np.mean(np.exp(p.f)) == pytest.approx(2, abs=1e-12)


def test_normalize_errors(z1):
    data = GreenData(z1, ((1,),))
    with pytest.raises(DensityRangeError):
        ms.normalize_density(np.linspace(0, 800, 16), data, 16)
    with pytest.raises(InputError):
        ms.normalize_density(np.array([np.nan] * 16), data, 16)
    with pytest.raises(InputError):
        ms.normalize_density(np.zeros(4), data, 4)
    with pytest.raises(AmplenessError):
        ms.normalize_density(np.zeros(16), GreenData(z1, ((-1,),)), 16)


@pytest.mark.parametrize("d", [1, 2])
def test_zero_density_gives_zero(d):
    p = ms.normalize_density(np.zeros(16**d), identity_data(d), 16)
    s = ms.solve(p)
    assert s.newton_iters <= 1 and np.max(np.abs(s.phi)) <= 1e-12
    assert ms.residual(p, s.phi) == 0
    assert ms.solution_to_green(p, s).is_canonical


def test_residual_examples(z1):
    data = GreenData(z1, ((1,),))
    p = ms.MAProblem(data, np.zeros(64), 64)
    assert ms.residual(p, np.zeros(64)) == 0
    phi = np.cos(2 * np.pi * np.arange(64) / 64)
    # the discrete second difference of cos is -4 sin^2(pi h) / h^2 * cos
    oracle = 4 * math.sin(math.pi / 64) ** 2 * 64**2
    assert ms.residual(p, phi) == pytest.approx(oracle, rel=1e-12)
    assert ms.residual(p, phi) == pytest.approx(4 * math.pi**2, rel=1e-3)
    pm, exact = manufactured(1, 64)
    assert ms.residual(pm, exact) <= 1e-3


@pytest.mark.parametrize("d", [1, 2])
def test_grid_convergence_second_order(d):
    errs = []
    for n in (32, 64, 128):
        p, exact = manufactured(d, n)
        s = ms.solve(p)
        assert s.residual_inf <= 1e-9 and s.min_eig > 0
        errs.append(np.max(np.abs(s.phi - exact)))
    assert errs[1] <= 1e-3
    for a, b in zip(errs, errs[1:]):
        assert 3.5 <= a / b <= 4.5


def test_skew_lattice_pullback():
    # phi*(x) = a cos(2 pi t_1) with t = x @ basis^{-1}; its Euclidean Hessian is M H_t M^T
    lat = Lattice(((2, 1), (1, 2)))
    data = GreenData(lat, B2)
    a, errs = 0.01, []
    for n in (32, 64):
        t = lat.coords_f(grid_points(lat, n))
        m = lat.inverse_f
        ht = -(2 * np.pi) ** 2 * a * np.cos(2 * np.pi * t[:, 0])
        hx = np.einsum("i,j,p->pij", m[:, 0], m[:, 0], ht)
        f = np.log(np.linalg.det(data.b_f + hx) / 3)
        exact = a * np.cos(2 * np.pi * t[:, 0])
        s = ms.solve(ms.MAProblem(data, f, n))
        errs.append(np.max(np.abs(s.phi.ravel() - exact)))
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_gauge_invariance(rect):
    data = GreenData(rect, B2)
    f = parse_harmonics("0.1*cos(1,0) + 0.05*sin(1,1)", rect)
    s1 = ms.solve(ms.normalize_density(f, data, 24))
    s2 = ms.solve(ms.normalize_density(lambda x: f.value(x) + 3.7, data, 24))
    assert np.max(np.abs(s1.phi - s2.phi)) <= 1e-12


def test_every_iterate_is_mean_zero_and_positive(rect):
    data = GreenData(rect, B2)
    seen = []
    ms.solve(ms.normalize_density(parse_harmonics("0.3*cos(1,1) - 0.2*sin(0,1)", rect), data, 24),
             callback=lambda i, phi, lam: seen.append((abs(phi.mean()), lam)))
    assert seen
    assert all(m <= 1e-14 and lam > 0 for m, lam in seen)


@given(c1=st.floats(-0.2, 0.2), c2=st.floats(-0.2, 0.2))
def test_symmetry_inheritance(c1, c2):
    lat = Lattice.standard(2)
    data = GreenData(lat, B2)
    f = TrigSeries(lat, (Harmonic((1, 0), c1), Harmonic((1, -1), c2)))
    n = 16
    phi = ms.solve(ms.normalize_density(f, data, n)).phi
    idx = (-np.arange(n)) % n
    assert np.max(np.abs(phi - phi[idx][:, idx])) <= 1e-12


def test_nonconvergence_carries_residual(z1):
    data = GreenData(z1, ((1,),))
    p = ms.normalize_density(parse_harmonics("0.5*cos(1)", z1), data, 32)
    with pytest.raises(NonConvergenceError) as err:
        ms.solve(p, max_iters=1)
    assert err.value.last_residual > 0


def test_solution_to_green_examples(z1):
    p, _ = manufactured(1, 64)
    s = ms.solve(p)
    g = ms.solution_to_green(p, s)
    hb = hessian_bounds(g, 256, safety=0.0)
    assert hb.min_eig == pytest.approx(1 - 0.04 * math.pi**2, abs=1e-3)
    assert hb.max_eig == pytest.approx(1 + 0.04 * math.pi**2, abs=1e-3)
    m = chambert_loir_measure(build_pl_approx(g, 8, hessian_bounds(g, 128)))
    assert m.mass == degree(p.data) == 1


def test_solution_to_green_rejects_nonconvex(z1):
    p, _ = manufactured(1, 16)
    bad = ms.MASolution(np.cos(2 * np.pi * np.arange(16) / 16), 0.0, 1, 0.5)
    with pytest.raises(RefineGridError):
        ms.solution_to_green(p, bad)


@pytest.mark.parametrize("lat, b", [(Lattice.standard(1), ((1,),)), (Lattice(((1, 0), (0, 2))), B2)])
def test_monge_ampere_measure_consistency(lat, b):
    data = GreenData(lat, b)
    expr = "0.2*cos(1)" if lat.dim == 1 else "0.2*cos(1,0) + 0.1*sin(1,1)"
    p = ms.normalize_density(parse_harmonics(expr, lat), data, 32)
    g = ms.solution_to_green(p, ms.solve(p))
    assert integrate_mixed_hessian([g] * lat.dim, 64) == pytest.approx(float(degree(data)), abs=1e-8)


def test_problem_shape_checked(z1):
    with pytest.raises(ValueError):
        ms.MAProblem(GreenData(z1, ((1,),)), np.zeros(10), 16)
