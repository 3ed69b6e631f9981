from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tropma import _exact as ex
from tropma.clmeasure import (
    DensityMeasure,
    DiscreteMeasure,
    chambert_loir_measure,
    constant_test,
    default_battery,
    dual_polytope,
    harmonic_battery,
    harmonic_test,
    hessian_density,
    pair,
    thread_count,
    weak_distance,
)
from tropma.errors import InputError
from tropma.green import GreenData, canonical_green, degree, hessian_bounds, translate
from tropma.lattice import Lattice, reduce_coords
from tropma.plapprox import build_pl_approx, induced_decomposition

B2 = ((2, 1), (1, 2))


def cl_of(g, n):
    return chambert_loir_measure(build_pl_approx(g, n, hessian_bounds(g, 8)))


def atoms_mod(m):
    return {reduce_coords(x, m.lattice)[0]: w for x, w in m.atoms}


def test_dual_polytope_examples(g_quad):
    dec = induced_decomposition(build_pl_approx(g_quad, 2, hessian_bounds(g_quad, 8)))
    dp = dual_polytope(dec, (F(1, 4),))
    assert dp.generators == ((0,), (F(1, 2),)) and dp.volume == F(1, 2)
    dec4 = induced_decomposition(build_pl_approx(g_quad, 4, hessian_bounds(g_quad, 8)))
    dp = dual_polytope(dec4, (F(1, 8),))
    assert dp.generators == ((0,), (F(1, 4),)) and dp.volume == F(1, 4)
    # a translate of a vertex names the same class
    assert dual_polytope(dec4, (F(17, 8),)).volume == F(1, 4)
    with pytest.raises(InputError):
        dual_polytope(dec, (F(1, 3),))


def test_dual_polytope_unit_square():
    g = canonical_green(GreenData(Lattice.standard(2), ((1, 0), (0, 1))))
    dec = induced_decomposition(build_pl_approx(g, 1, hessian_bounds(g, 8)), check_injective=False)
    dp = dual_polytope(dec, (F(1, 2), F(1, 2)))
    assert sorted(dp.generators) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert dp.volume == 1


def test_cl_measure_examples(g_quad, z1):
    m = cl_of(g_quad, 2)
    assert m.atoms == (((F(1, 4),), F(1, 2)), ((F(3, 4),), F(1, 2)))
    g2 = canonical_green(GreenData(Lattice.standard(2), ((1, 0), (0, 1))))
    assert cl_of(g2, 1).atoms == (((F(1, 2), F(1, 2)), F(2)),)
    gc = canonical_green(GreenData(z1, ((1,),), (F(1, 2),)))
    # g + x/2 adds x/2 to every tangent line, so the breakpoints do not move
    mc = cl_of(gc, 2)
    assert mc.mass == 1 and mc.atoms == m.atoms


def test_eight_equal_atoms(g_quad, z1):
    m = cl_of(g_quad, 8)
    assert [w for _, w in m.atoms] == [F(1, 8)] * 8
    lebesgue = hessian_density(g_quad)
    assert weak_distance(m, lebesgue, harmonic_battery(z1)) <= 0.05


@pytest.mark.parametrize("lat, b, c, ns", [
    (Lattice.standard(1), ((1,),), (0,), (2, 4, 8, 16)),
    (Lattice.standard(1), ((1,),), (F(1, 2),), (2, 4, 8, 16)),
    (Lattice.standard(1), ((3,),), (F(-2, 7),), (3, 5)),
    (Lattice.standard(2), B2, (0, 0), (1, 2, 3)),
    (Lattice(((1, 0), (0, 2))), ((1, 0), (0, 1)), (0, 0), (1, 2, 4)),
    (Lattice(((2, 1), (F(1, 2), F(3, 2)))), B2, (F(1, 3), 1), (2, 3)),
])
def test_mass_identity_exact(lat, b, c, ns):
    data = GreenData(lat, b, c)
    for n in ns:
        assert cl_of(canonical_green(data), n).mass == degree(data)


def test_mass_identity_smooth_g():
    from tropma.green import GreenFunction
    from tropma.periodic import parse_harmonics

    lat = Lattice(((1, 0), (0, 2)))
    data = GreenData(lat, B2)
    g = GreenFunction(data, parse_harmonics("0.01*cos(1,0) + 0.01*sin(1,1)", lat))
    assert chambert_loir_measure(build_pl_approx(g, 3, hessian_bounds(g, 32))).mass == 12


@given(k=st.tuples(st.integers(0, 3), st.integers(0, 3)))
def test_translation_equivariance(k):
    lat = Lattice(((1, 0), (0, 2)))
    g = canonical_green(GreenData(lat, B2))
    n = 2
    a = lat.point(tuple(F(v, n) for v in k))
    m0, ma = cl_of(g, n), cl_of(translate(g, a), n)
    shifted = {reduce_coords(ex.add(x, a), lat)[0]: w for x, w in m0.atoms}
    assert shifted == atoms_mod(ma)


@given(slope=st.tuples(st.fractions(-3, 3, max_denominator=8), st.fractions(-3, 3, max_denominator=8)),
       const=st.fractions(-3, 3, max_denominator=8))
def test_affine_invariance_of_dual_volumes(slope, const):
    g = canonical_green(GreenData(Lattice.standard(2), B2))
    f = build_pl_approx(g, 2, hessian_bounds(g, 8))
    assert atoms_mod(chambert_loir_measure(f.add_affine(slope, const))) == atoms_mod(
        chambert_loir_measure(f))


def test_pair_examples(g_quad, z1):
    m = cl_of(g_quad, 2)
    assert pair(m, constant_test(z1)) == 1
    assert pair(m, harmonic_test(z1, (1,))) == pytest.approx(0, abs=1e-15)
    dens = hessian_density(g_quad)
    assert pair(dens, harmonic_test(z1, (1,))) == pytest.approx(0, abs=1e-14)
    assert dens.mass == pytest.approx(1)


def test_weak_distance_examples(g_quad, z1):
    m = cl_of(g_quad, 4)
    assert weak_distance(m, m, default_battery(z1)) == 0
    doubled = DiscreteMeasure(z1, tuple((x, 2 * w) for x, w in m.atoms))
    assert weak_distance(m, doubled, [constant_test(z1)]) == pytest.approx(0.5)
    with pytest.raises(InputError):
        weak_distance(m, m, [])


def test_weak_distance_shrinks_for_smooth_g(z1):
    from tropma.green import GreenFunction
    from tropma.periodic import parse_harmonics

    g = GreenFunction(GreenData(z1, ((1,),)), parse_harmonics("1/50*cos(1)", z1))
    hb = hessian_bounds(g, 64)
    dens = hessian_density(g, 256)
    ds = [weak_distance(chambert_loir_measure(build_pl_approx(g, n, hb)), dens,
                        harmonic_battery(z1)) for n in (4, 8, 16, 32)]
    assert all(b < a for a, b in zip(ds, ds[1:]))
    assert max(n * d for n, d in zip((4, 8, 16, 32), ds)) <= 2 * 4 * ds[0]


def test_battery_shape(z1, rect):
    names = [t.name for t in harmonic_battery(z1)]
    assert names == ["1", "cos(1)", "sin(1)", "cos(2)"]
    assert len(default_battery(rect)) == 7


def test_measure_validation(z1):
    with pytest.raises(InputError):
        DiscreteMeasure(z1, (((F(1, 4),), F(0)),))
    with pytest.raises(InputError):
        DiscreteMeasure(z1, (((F(1, 4),), F(1)), ((F(5, 4),), F(1))))
    with pytest.raises(InputError):
        DensityMeasure(z1, lambda x: -np.ones(len(x)), 8).mass


def test_json_csv(g_quad, z1):
    m = cl_of(g_quad, 2)
    obj = m.to_json()
    assert obj == {"atoms": [{"x": ["1/4"], "w": "1/2"}, {"x": ["3/4"], "w": "1/2"}]}
    assert DiscreteMeasure.from_json(obj, z1) == m
    assert m.to_csv().splitlines() == ["x1,w,w_exact", "0.25,0.5,1/2", "0.75,0.5,1/2"]


def test_parallel_path_matches_serial(monkeypatch):
    g = canonical_green(GreenData(Lattice.standard(2), B2, (F(1, 5), 0)))
    f = build_pl_approx(g, 6, hessian_bounds(g, 8))
    monkeypatch.setenv("TROPMA_THREADS", "1")
    assert thread_count() == 1
    serial = chambert_loir_measure(f)
    monkeypatch.setenv("TROPMA_THREADS", "4")
    assert len(serial.atoms) > 64
    assert chambert_loir_measure(f) == serial
    assert serial.mass == 6
