"""Numerical evaluation of the Weierstrass function and its derivatives.

Evaluation reduces the argument to the Voronoi cell of the lattice, halves it
until it sits inside a disc around the origin, sums the Laurent series
there and walks back up with the doubling law of the curve
``y^2 = 4x^3 - g2 x - g3``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import lattice as lat
from .errors import InverseNotFound, PoleAtInput

SERIES_RADIUS_FACTOR = 0.72
POLE_TOL_FACTOR = 1e-6
N_TERMS = 80


def laurent_coefficients(g2, g3, count=N_TERMS):
    """Coefficients ``c_k`` (k >= 2) of ``wp(z) = z^-2 + sum c_k z^(2k-2)``.

    Uses the standard quadratic recurrence. With the lattice scaled to unit
    shortest vector the series converges for ``|z| < 1``; at the series radius
    0.72 the omitted tail after 80 terms is far below double precision. The
    radius covers the whole Voronoi cell of square and hexagonal lattices, so
    those never need a doubling step.
    """
    c = {2: complex(g2) / 20, 3: complex(g3) / 28}
    for k in range(4, count + 2):
        s = sum(c[m] * c[k - m] for m in range(2, k - 1))
        c[k] = 3 * s / ((2 * k + 1) * (k - 3))
    return [c[i] for i in range(2, count + 2)]


@dataclass(frozen=True)
class WpEvaluator:
    """Evaluator for ``wp`` on one lattice.

    Internally everything is computed for the lattice scaled to unit
    shortest vector; ``laurent_coeffs`` reports the unscaled coefficients.
    """

    lattice: lat.Lattice
    series_radius: float
    duplication_threshold: float
    _unit_coeffs: tuple = field(repr=False)
    _unit_lattice: lat.Lattice = field(repr=False)

    @property
    def laurent_coeffs(self):
        s = self.lattice.shortest_vector_len
        return [a / s ** (2 * (i + 2)) for i, a in enumerate(self._unit_coeffs)]

    @property
    def g2(self):
        return self.lattice.g2

    @property
    def g3(self):
        return self.lattice.g3


def make_evaluator(lattice):
    s = lattice.shortest_vector_len
    unit = lat.Lattice(
        gen1=lattice.gen1 / s,
        gen2=lattice.gen2 / s,
        g2=lattice.g2 * s ** 4,
        g3=lattice.g3 * s ** 6,
        reduced_gen1=lattice.reduced_gen1 / s,
        reduced_gen2=lattice.reduced_gen2 / s,
        shortest_vector_len=1.0,
        reduction=lattice.reduction,
    )
    coeffs = tuple(laurent_coefficients(unit.g2, unit.g3))
    return WpEvaluator(
        lattice=lattice,
        series_radius=SERIES_RADIUS_FACTOR * s,
        duplication_threshold=SERIES_RADIUS_FACTOR * s,
        _unit_coeffs=coeffs,
        _unit_lattice=unit,
    )


@lru_cache(maxsize=256)
def evaluator_for(lattice):
    return make_evaluator(lattice)


def wp_pair_array(ev, z):
    """Vectorised ``(wp(z), wp'(z), pole_mask)`` without raising.

    Entries flagged in ``pole_mask`` hold NaN.
    """
    z = np.asarray(z, dtype=np.complex128)
    shape = z.shape
    z = z.ravel()
    s = ev.lattice.shortest_vector_len
    unit = ev._unit_lattice
    u = np.asarray(lat.torus_offset(z, ev.lattice)) / s
    u = np.asarray(u).ravel().copy()
    r2 = u.real * u.real + u.imag * u.imag
    pole = r2 <= POLE_TOL_FACTOR ** 2
    u[pole] = 0.5  # placeholder, overwritten with NaN below
    r2 = np.where(pole, 0.25, r2)

    thr2 = SERIES_RADIUS_FACTOR ** 2
    k = np.zeros(u.shape, dtype=np.int64)
    big = r2 > thr2
    while np.any(big):
        u[big] *= 0.5
        r2[big] *= 0.25
        k[big] += 1
        big = r2 > thr2

    g2 = unit.g2
    t = u * u
    coeffs = ev._unit_coeffs
    # series part: sum c_j t^(j-1), derivative sum (2j-2) c_j u^(2j-3)
    ps = np.zeros_like(u)
    dps = np.zeros_like(u)
    n = len(coeffs)
    for idx in range(n - 1, -1, -1):
        j = idx + 2
        ps = ps * t + coeffs[idx]
        dps = dps * t + (2 * j - 2) * coeffs[idx]
    inv_t = 1.0 / t
    x = inv_t + ps * t
    y = -2.0 * inv_t / u + dps * u

    kmax = int(k.max()) if k.size else 0
    for step in range(kmax):
        act = k > step
        xa, ya = x[act], y[act]
        m = (12.0 * xa * xa - g2) / (2.0 * ya)
        x2 = 0.25 * m * m - 2.0 * xa
        y2 = -ya - m * (x2 - xa)
        x[act] = x2
        y[act] = y2

    p = x / s ** 2
    dp = y / s ** 3
    p[pole] = np.nan
    dp[pole] = np.nan
    return p.reshape(shape), dp.reshape(shape), pole.reshape(shape)


def _scalar_or_array(values, like):
    return values.item() if np.ndim(like) == 0 else values


def _checked_pair(ev, z):
    p, dp, pole = wp_pair_array(ev, z)
    if np.any(pole):
        raise PoleAtInput(f"argument within pole tolerance of a lattice point: {z}")
    return p, dp


def wp(ev, z):
    p, _ = _checked_pair(ev, z)
    return _scalar_or_array(p, z)


def wp_prime(ev, z):
    _, dp = _checked_pair(ev, z)
    return _scalar_or_array(dp, z)


def wp_second(ev, z):
    p, _ = _checked_pair(ev, z)
    return _scalar_or_array(6 * p * p - ev.g2 / 2, z)


def wp_third(ev, z):
    p, dp = _checked_pair(ev, z)
    return _scalar_or_array(12 * p * dp, z)


def wp_series_oracle(lattice, z, radius=80.0):
    """Direct summation of ``z^-2 + sum' [(z-lam)^-2 - lam^-2]``.

    The lattice sum runs over ``|lam| <= radius`` with the same smooth radial
    window used for the invariants, which removes the slowly decaying
    truncation error of a sharp cutoff. Test-only; cost grows like radius^2.
    """
    z = complex(z)
    if lat.is_lattice_point(z, lattice, POLE_TOL_FACTOR):
        raise PoleAtInput(f"oracle argument on a lattice point: {z}")
    lam = lat.lattice_points_in_disc(
        lattice.reduced_gen1, lattice.reduced_gen2, radius
    )
    w = lat._smooth_window(np.abs(lam) / radius)
    terms = (1.0 / (z - lam) ** 2 - 1.0 / lam ** 2) * w
    return complex(1.0 / z ** 2 + np.sum(terms))


class Preimages(NamedTuple):
    z1: complex
    z2: complex
    multiplicity: int  # 2 when w is a critical value and z1 == z2


def _sort_key(z, lattice):
    a, b = lat.lattice_coords(z, lattice)
    return (round(float(a), 9), round(float(b), 9))


def wp_inverse(ev, w, tol=1e-9, grid=16, max_steps=50):
    """The two solutions of ``wp(z) = w`` in the principal cell.

    Multi-start damped Newton on a ``grid x grid`` seed lattice. When ``w`` is
    a critical value ``e_i`` the single double preimage ``w_i`` is returned
    twice with multiplicity 2.
    """
    lattice = ev.lattice
    w = complex(w)
    scale = max(1.0, abs(w))
    for e, om in zip(lattice_critical_values(lattice), lat.half_periods(lattice).as_tuple()):
        if abs(w - e) <= tol * max(1.0, abs(e)):
            om_red, _ = lat.reduce_mod_lattice(om, lattice)
            return Preimages(om_red, om_red, 2)

    r1, r2 = lattice.reduced_gen1, lattice.reduced_gen2
    frac = (np.arange(grid) + 0.5) / grid
    z = (frac[None, :] * r1 + frac[:, None] * r2).ravel()
    damp = np.ones(z.shape)
    p, dp, pole = wp_pair_array(ev, z)
    res = np.abs(p - w)
    alive = ~pole
    for _ in range(max_steps):
        with np.errstate(all="ignore"):
            step = (p - w) / dp
        trial = z - damp * step
        tp, tdp, tpole = wp_pair_array(ev, trial)
        tres = np.abs(tp - w)
        ok = alive & ~tpole & np.isfinite(tres) & (tres < res)
        z = np.where(ok, trial, z)
        p = np.where(ok, tp, p)
        dp = np.where(ok, tdp, dp)
        res = np.where(ok, tres, res)
        damp = np.where(ok, np.minimum(1.0, damp * 2.0), damp * 0.5)
        if np.all(res[alive] < tol * scale * 1e-3):
            break
    found = alive & (res < tol * scale)
    if not np.any(found):
        raise InverseNotFound(f"no preimage of {w} converged")
    cands = np.asarray(lat.reduce_mod_lattice(z[found], lattice)[0])
    cres = res[found]
    clusters = []
    for zc, rc in sorted(zip(cands, cres), key=lambda t: t[1]):
        if all(lat.torus_distance(zc, c, lattice) > 1e-6 * lattice.shortest_vector_len
               for c in clusters):
            clusters.append(zc)
    z1 = clusters[0]
    z2 = lat.reduce_mod_lattice(-z1, lattice)[0]
    if lat.torus_distance(z1, z2, lattice) <= 1e-6 * lattice.shortest_vector_len:
        raise InverseNotFound(f"preimages of {w} collapsed but w is not a critical value")
    for c in clusters[1:]:
        if min(lat.torus_distance(c, z1, lattice), lat.torus_distance(c, z2, lattice)) \
                > 1e-5 * lattice.shortest_vector_len:
            raise InverseNotFound(f"more than two preimage classes of {w}")
    if abs(wp(ev, z2) - w) >= tol * scale:
        raise InverseNotFound(f"mirror preimage of {w} failed the residual check")
    z1, z2 = sorted([complex(z1), complex(z2)], key=lambda q: _sort_key(q, lattice))
    return Preimages(z1, z2, 1)


@lru_cache(maxsize=256)
def lattice_critical_values(lattice):
    return lat.critical_values(lattice).as_tuple()
