import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ellnewton import lattice as lat
from ellnewton import newton as nw
from ellnewton.dynamics import (
    OrbitParams, Tag, classify_orbit, classify_orbit_symmetry_check, classify_orbits,
    classify_orbits_wpb, dedrifted_excursion, free_critical_orbit_summary, reduced_excursion,
)

from conftest import cell_points


@pytest.fixture(scope="module")
def skew_map():
    return nw.wp_plus_b_map(lat.make_lattice(1.0, 0.37 + 1.13j), 1.0 + 0.5j)


@pytest.fixture(scope="module")
def wandering(tri_module):
    lam = tri_module.gen1 + tri_module.gen2
    b = nw.wandering_parameter(tri_module, lam)
    return nw.wp_plus_b_map(tri_module, b), nw.wandering_seed(tri_module), lam


@pytest.fixture(scope="module")
def tri_module():
    return lat.Lattice.from_half_periods(np.exp(1j * np.pi / 6), np.exp(-1j * np.pi / 6))


@pytest.mark.parametrize("kw", [
    dict(max_iter=50, transient_skip=50),
    dict(max_iter=100, transient_skip=10, max_cycle_period=90),
    dict(max_cycle_period=0),
    dict(root_tol=0.0),
    dict(cycle_tol=-1.0),
])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        OrbitParams(**kw)


def test_params_json():
    assert OrbitParams().to_json()["max_cycle_period"] == 64


def test_start_on_zero(skew_map):
    for k, (z, _) in enumerate(skew_map.zeros):
        out = classify_orbit(skew_map, z)
        assert out.tag is Tag.RootCapture
        assert out.root_index == k
        assert out.iterations <= 1


def test_start_on_prepole(skew_map):
    for p in skew_map.poles:
        out = classify_orbit(skew_map, p)
        assert out.tag is Tag.PrepoleHit
        assert out.iterations == 0


def test_near_zero_is_captured_in_its_basin(skew_map):
    z, _ = skew_map.zeros[1]
    out = classify_orbit(skew_map, z + 1e-3 * (1 + 1j))
    assert out.tag is Tag.RootCapture and out.root_index == 1
    assert abs(out.final_point - z) < 1e-6


def test_wandering_drift_cycle(wandering):
    N, c, lam = wandering
    out = classify_orbit(N, c)
    assert out.tag is Tag.DriftCycle
    assert out.period == 1
    assert abs(out.drift + lam) < 1e-9
    mirror = classify_orbit(N, lam - c)
    assert mirror.tag is Tag.DriftCycle
    assert abs(mirror.drift - lam) < 1e-9


def test_symmetry_check(wandering, skew_map, rng):
    N, c, lam = wandering
    a, b = classify_orbit_symmetry_check(N, c, lam / 2)
    assert a.tag is b.tag is Tag.DriftCycle
    assert abs(a.drift + b.drift) < 1e-9
    for z0 in cell_points(skew_map.lattice, 20, rng):
        o1, o2 = classify_orbit_symmetry_check(skew_map, z0, 0j)
        assert o1.tag is o2.tag
        if o1.tag is Tag.DriftCycle:
            assert o1.period == o2.period
            assert abs(o1.drift + o2.drift) < 1e-9
    with pytest.raises(ValueError):
        classify_orbit_symmetry_check(skew_map, 0.3, 0.2)


def test_free_critical_orbits(wandering):
    N, c, lam = wandering
    rows = free_critical_orbit_summary(N)
    assert len(rows) == 2
    drifts = sorted((o.drift for _, o in rows), key=lambda d: d.real)
    assert all(o.tag is Tag.DriftCycle for _, o in rows)
    assert abs(drifts[0] + lam) < 1e-9 and abs(drifts[1] - lam) < 1e-9


def test_double_root_capture():
    L = lat.make_lattice(1.0, 0.37 + 1.13j)
    for e in lat.critical_values(L).as_tuple():
        N = nw.wp_plus_b_map(L, -e)
        out = classify_orbit(N, 0.21 * L.reduced_gen1 + 0.13 * L.reduced_gen2)
        assert out.tag in (Tag.RootCapture, Tag.PrepoleHit)
        # close to the double zero the linear convergence still captures it
        z, m = N.zeros[0]
        assert m == 2
        near = classify_orbit(N, z + 1e-2 * L.shortest_vector_len)
        assert near.tag is Tag.RootCapture and near.root_index == 0


def test_budget_exhaustion_is_unresolved(skew_map):
    p = OrbitParams(max_iter=3, transient_skip=1, max_cycle_period=1)
    far = classify_orbits(skew_map, cell_points(skew_map.lattice, 50, np.random.default_rng(3)), p)
    assert (far.tag == 4).any()
    assert far.iterations.max() <= 3


@settings(max_examples=20)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.integers(-3, 3), st.integers(-3, 3))
def test_translation_equivariance(a, b, m, n):
    L = lat.make_lattice(1.0, 0.37 + 1.13j)
    N = nw.wp_plus_b_map(L, 1.0 + 0.5j)
    z = a * L.reduced_gen1 + b * L.reduced_gen2
    o1 = classify_orbit(N, z)
    o2 = classify_orbit(N, z + L.point(m, n))
    assert o1.tag is o2.tag
    assert o1.root_index == o2.root_index and o1.period == o2.period
    assert abs(o1.drift - o2.drift) < 1e-9


def test_batch_matches_scalar_and_is_deterministic(skew_map, rng):
    z = cell_points(skew_map.lattice, 30, rng)
    batch = classify_orbits(skew_map, z)
    again = classify_orbits(skew_map, z)
    for name in ("tag", "root_index", "period", "drift_m", "drift_n", "iterations", "final"):
        assert np.array_equal(getattr(batch, name), getattr(again, name))
    for i in (0, 7, 29):
        assert batch.outcome(i) == classify_orbit(skew_map, z[i])


def test_per_orbit_parameters_match_single_map(skew_map, rng):
    z = cell_points(skew_map.lattice, 30, rng)
    ref = classify_orbits(skew_map, z)
    got = classify_orbits_wpb(skew_map.lattice, z, skew_map.f.b)
    assert np.array_equal(ref.tag, got.tag)
    assert np.array_equal(ref.period, got.period)
    assert (got.root_index == -1).all()


def test_small_b_is_all_root_capture(rng):
    L = lat.make_lattice(1.0, 0.37 + 1.13j)
    N = nw.wp_plus_b_map(L, 0.05)
    batch = classify_orbits(N, cell_points(L, 200, rng))
    assert set(np.unique(batch.tag)) <= {0, 3}


def test_excursions(wandering):
    N, c, lam = wandering
    red = reduced_excursion(N, np.array([c]), 20)
    assert red[0] <= 1.0 + 1e-12
    dd = dedrifted_excursion(N, np.array([c]), -lam, 1, 20)
    assert dd[0] < 1e-8


def test_bound_cycle_reports_minimal_period(square):
    # wp - e1 on the square lattice: a free critical orbit falls into an
    # attracting 2-cycle whose multiplier is negative
    N = nw.wp_plus_b_map(square, -lat.critical_values(square).e1)
    tags = [o for _, o in free_critical_orbit_summary(N)]
    bound = [o for o in tags if o.tag is Tag.BoundCycle]
    assert bound and all(o.period == 2 and o.drift == 0 for o in bound)
