import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tropma import _exact as ex
from tropma.errors import DegenerateLatticeError, InputError
from tropma.lattice import Lattice, domain_constants, reduce, reduce_f

fracs = st.fractions(min_value=-20, max_value=20, max_denominator=50)
LATTICES = [Lattice.standard(2), Lattice(((1, 0), (0, 2))),
            Lattice(((2, 1), (F(1, 2), F(3, 2)))), Lattice(((1, 0), (1, 1)))]


def test_reduce_examples(z1, rect):
    assert reduce((0,), z1) == ((0,), (0,))
    assert reduce((F(7, 4),), z1) == ((F(3, 4),), (1,))
    assert reduce((F(3, 2), F(-1, 2)), rect) == ((F(1, 2), F(3, 2)), (1, -2))


def test_reduce_upper_face_goes_to_translate(z1):
    assert reduce((1,), z1) == ((0,), (1,))


def test_domain_constants():
    dom = domain_constants(Lattice.standard(1))
    assert (dom.volume, dom.diameter_sq, dom.inradius_sq) == (1, 1, F(1, 4))
    dom = domain_constants(Lattice(((1, 0), (0, 2))))
    assert dom.volume == 2 and dom.diameter_sq == 5 and dom.inradius == pytest.approx(0.5)
    # parallelogram: vertices 0, (1,0), (1,1), (2,1); longest pair is 0 -> (2,1)
    dom = domain_constants(Lattice(((1, 0), (1, 1))))
    assert dom.volume == 1 and dom.diameter == pytest.approx(math.sqrt(5))
    assert 0 < dom.inradius <= dom.diameter


def test_skew_inradius_is_half_min_layer_width():
    lat = Lattice(((1, 0), (1, 1)))
    # layer widths are 1/|column of basis^-1|: 1/sqrt(2) and 1
    assert domain_constants(lat).inradius == pytest.approx(0.5 / math.sqrt(2))


def test_degenerate_basis_rejected():
    with pytest.raises(DegenerateLatticeError):
        Lattice(((1, 2), (2, 4)))
    with pytest.raises(InputError):
        Lattice(((1, 0),))


def test_json_roundtrip(skew):
    obj = skew.to_json()
    assert obj["basis"][1] == ["1/2", "3/2"]
    assert Lattice.from_json(obj) == skew


def test_shortest_vector(skew):
    assert Lattice(((1, 0), (0, 2))).shortest_vector_sq == 1
    # brute-force oracle over a generous box
    best = min(ex.dot(v, v) for i in range(-6, 7) for j in range(-6, 7) if (i, j) != (0, 0)
               for v in [skew.point((i, j))])
    assert skew.shortest_vector_sq == best


def test_reduce_f_matches_exact_off_boundary(skew):
    rng = np.random.default_rng(1)
    t = rng.uniform(-5, 5, size=(200, 2))
    x = skew.point_f(t)
    x0, k = reduce_f(x, skew)
    assert np.array_equal(k, np.floor(t).astype(int))
    assert np.allclose(x0 + k @ skew.basis_f, x)
    assert np.all((skew.coords_f(x0) > -1e-12) & (skew.coords_f(x0) < 1 + 1e-12))


@pytest.mark.parametrize("lat", LATTICES)
@given(x=st.tuples(fracs, fracs), k=st.tuples(st.integers(-5, 5), st.integers(-5, 5)))
def test_reduce_idempotent_and_periodic(lat, x, k):
    x0, lam = reduce(x, lat)
    assert ex.add(x0, lam) == x
    assert all(0 <= t < 1 for t in lat.coords(x0))
    assert reduce(x0, lat) == (x0, (0, 0))
    assert reduce(ex.add(x, lat.point(k)), lat)[0] == x0


@pytest.mark.parametrize("lat", LATTICES)
@given(ops=st.lists(st.tuples(st.booleans(), st.integers(-3, 3)), min_size=1, max_size=6),
       swap=st.booleans())
def test_volume_invariant_under_unimodular_change(lat, ops, swap):
    u = [[1, 0], [0, 1]]
    for top, c in ops:
        i, j = (0, 1) if top else (1, 0)
        u[i] = [a + c * b for a, b in zip(u[i], u[j])]
    if swap:
        u.reverse()
    other = Lattice(tuple(ex.vecmat(row, lat.basis) for row in ex.mat(u)))
    assert other.volume == lat.volume
