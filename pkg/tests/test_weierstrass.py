import numpy as np
import pytest
from hypothesis import given, strategies as st

from ellnewton import lattice as lat
from ellnewton import weierstrass as wsf
from ellnewton.errors import InverseNotFound, PoleAtInput

from conftest import cell_points

unit = st.floats(0.02, 0.98)


def test_laurent_low_order_coefficients():
    g2, g3 = 3.0 - 1.0j, 0.5 + 2.0j
    c = wsf.laurent_coefficients(g2, g3)
    assert c[0] == g2 / 20
    assert c[1] == g3 / 28
    assert abs(c[2] - g2 ** 2 / 1200) < 1e-15
    assert abs(c[3] - 3 * g2 * g3 / 6160) < 1e-15


def test_series_against_oracle(lattices, rng):
    for L in lattices.values():
        ev = wsf.evaluator_for(L)
        z = cell_points(L, 8, rng)
        for zi in z:
            ref = wsf.wp_series_oracle(L, zi, radius=60.0)
            assert abs(wsf.wp(ev, zi) - ref) < 1e-9 * max(1, abs(ref))


@pytest.mark.parametrize("name", ["square", "hexagonal", "skew", "rect", "long"])
def test_differential_equation(lattices, rng, name):
    L = lattices[name]
    ev = wsf.evaluator_for(L)
    z = cell_points(L, 300, rng)
    p, dp, pole = wsf.wp_pair_array(ev, z)
    assert not pole.any()
    scale = np.abs(dp) ** 2 + np.abs(4 * p ** 3) + np.abs(L.g2 * p) + abs(L.g3)
    assert np.max(np.abs(dp ** 2 - (4 * p ** 3 - L.g2 * p - L.g3)) / scale) < 1e-11


@given(unit, unit, st.integers(-3, 3), st.integers(-3, 3))
def test_periodic_and_even(a, b, m, n):
    L = lat.make_lattice(1.0, 0.9 + 1.1j)
    ev = wsf.evaluator_for(L)
    z = a * L.reduced_gen1 + b * L.reduced_gen2
    if lat.torus_distance(z, 0, L) < 0.05:
        return
    p = wsf.wp(ev, z)
    dp = wsf.wp_prime(ev, z)
    s = max(1, abs(p))
    assert abs(wsf.wp(ev, z + L.point(m, n)) - p) < 1e-11 * s
    assert abs(wsf.wp(ev, -z) - p) < 1e-11 * s
    assert abs(wsf.wp_prime(ev, -z) + dp) < 1e-11 * max(1, abs(dp))


def test_pole_behaviour(skew):
    ev = wsf.evaluator_for(skew)
    for z in (1e-3, 1e-3j, 2e-4 * (1 + 1j)):
        assert abs(wsf.wp(ev, z) * z * z - 1) < 1e-5
        assert abs(wsf.wp_prime(ev, z) * z ** 3 + 2) < 1e-5
    with pytest.raises(PoleAtInput):
        wsf.wp(ev, 0.0)
    with pytest.raises(PoleAtInput):
        wsf.wp_prime(ev, skew.gen1 + skew.gen2)
    p, dp, pole = wsf.wp_pair_array(ev, np.array([0.0, 0.3 + 0.2j]))
    assert pole.tolist() == [True, False]
    assert np.isnan(p[0]) and np.isfinite(p[1])


def test_scaling_law():
    a = lat.make_lattice(1.0, 0.9 + 1.1j)
    t = 1.7 - 0.4j
    b = lat.make_lattice(t, t * (0.9 + 1.1j))
    z = 0.31 + 0.22j
    pa = wsf.wp(wsf.evaluator_for(a), z)
    pb = wsf.wp(wsf.evaluator_for(b), t * z)
    assert abs(pb - pa / t ** 2) < 1e-12 * abs(pb)


def test_second_third_derivatives(skew):
    ev = wsf.evaluator_for(skew)
    z = 0.37 + 0.41j
    h = 1e-4
    d2 = (wsf.wp_prime(ev, z + h) - wsf.wp_prime(ev, z - h)) / (2 * h)
    d3 = (wsf.wp_second(ev, z + h) - wsf.wp_second(ev, z - h)) / (2 * h)
    assert abs(d2 - wsf.wp_second(ev, z)) < 1e-6 * abs(d2)
    assert abs(d3 - wsf.wp_third(ev, z)) < 1e-6 * abs(d3)


def test_scalar_and_array_agree(hexagonal, rng):
    ev = wsf.evaluator_for(hexagonal)
    z = cell_points(hexagonal, 10, rng)
    vals = wsf.wp(ev, z)
    assert isinstance(wsf.wp(ev, complex(z[0])), complex)
    for zi, v in zip(z, vals):
        assert wsf.wp(ev, complex(zi)) == v


def test_array_evaluation_is_position_independent(skew, rng):
    ev = wsf.evaluator_for(skew)
    z = cell_points(skew, 64, rng)
    full = wsf.wp(ev, z)
    part = wsf.wp(ev, z[13:40])
    assert np.array_equal(full[13:40], part)


@given(unit, unit)
def test_inverse_roundtrip(a, b):
    L = lat.make_lattice(1.0, 0.9 + 1.1j)
    ev = wsf.evaluator_for(L)
    z = a * L.reduced_gen1 + b * L.reduced_gen2
    if lat.torus_distance(z, 0, L) < 0.1:
        return
    w = wsf.wp(ev, z)
    if min(abs(w - e) for e in lat.critical_values(L).as_tuple()) < 1e-3:
        return
    pre = wsf.wp_inverse(ev, w)
    assert pre.multiplicity == 1
    d = min(lat.torus_distance(pre.z1, z, L), lat.torus_distance(pre.z2, z, L))
    assert d < 1e-7
    assert lat.torus_distance(pre.z1, -pre.z2, L) < 1e-9
    assert abs(wsf.wp(ev, pre.z1) - w) < 1e-9 * max(1, abs(w))


def test_inverse_at_critical_values(lattices):
    for L in lattices.values():
        ev = wsf.evaluator_for(L)
        for e, om in zip(lat.critical_values(L).as_tuple(), lat.half_periods(L).as_tuple()):
            pre = wsf.wp_inverse(ev, e)
            assert pre.multiplicity == 2
            assert pre.z1 == pre.z2
            assert lat.torus_distance(pre.z1, om, L) < 1e-12


def test_inverse_of_zero_on_triangular(tri):
    ev = wsf.evaluator_for(tri)
    pre = wsf.wp_inverse(ev, 0.0)
    for z in (pre.z1, pre.z2):
        assert abs(wsf.wp(ev, z)) < 1e-12
        assert abs(wsf.wp_prime(ev, z) ** 2 + tri.g3) < 1e-10 * abs(tri.g3)


def test_inverse_failure_is_reported(skew):
    ev = wsf.evaluator_for(skew)
    with pytest.raises(InverseNotFound):
        wsf.wp_inverse(ev, 1e30, max_steps=2)
