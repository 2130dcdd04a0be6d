"""Period lattices: construction, invariants, distinguished points and
reduction of complex numbers modulo the lattice.

All point-wise helpers accept scalars or numpy arrays and return the same
shape.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DegenerateLattice, RootMatchFailed, ToleranceUnreachable

# Relative size of Im(gen2/gen1) below which generators count as collinear.
COLLINEAR_EPS = 1e-12
# Coordinates within this distance of an integer are snapped before flooring,
# so that reducing an already reduced point is the identity.
COORD_SNAP = 1e-12
# Hard cap on the number of lattice points visited by one Eisenstein sum.
MAX_SUM_POINTS = 40_000_000

DEFAULT_INVARIANT_TOL = 1e-8
DEFAULT_MEMBER_TOL = 1e-10


@dataclass(frozen=True)
class HalfPeriods:
    w1: complex
    w2: complex
    w3: complex

    def as_tuple(self):
        return (self.w1, self.w2, self.w3)


@dataclass(frozen=True)
class CriticalValues:
    e1: complex
    e2: complex
    e3: complex

    def as_tuple(self):
        return (self.e1, self.e2, self.e3)


@dataclass(frozen=True)
class Lattice:
    """A rank-two period lattice ``{m*gen1 + n*gen2}``.

    ``gen1, gen2`` are the input generators oriented so that
    ``Im(gen2/gen1) > 0``; ``reduced_gen1, reduced_gen2`` is the
    Lagrange-reduced basis of the same lattice (also positively oriented).
    ``reduction`` holds the integer matrix ``((a, b), (c, d))`` with
    ``reduced_gen1 = a*gen1 + b*gen2`` and ``reduced_gen2 = c*gen1 + d*gen2``.
    """

    gen1: complex
    gen2: complex
    g2: complex
    g3: complex
    reduced_gen1: complex
    reduced_gen2: complex
    shortest_vector_len: float
    reduction: tuple = ((1, 0), (0, 1))

    @classmethod
    def from_half_periods(cls, w1, w2, tol=DEFAULT_INVARIANT_TOL):
        """Lattice whose generators are ``2*w1`` and ``2*w2``."""
        return make_lattice(2 * complex(w1), 2 * complex(w2), tol)

    @property
    def area(self):
        return abs((self.reduced_gen1.conjugate() * self.reduced_gen2).imag)

    @property
    def discriminant(self):
        return self.g2 ** 3 - 27 * self.g3 ** 2

    def point(self, m, n):
        """Lattice point ``m*gen1 + n*gen2`` (original basis)."""
        return m * self.gen1 + n * self.gen2

    def reduced_point(self, m, n):
        """Lattice point in reduced-basis coordinates."""
        return m * self.reduced_gen1 + n * self.reduced_gen2

    def to_json(self):
        return {
            "gen1": _pair(self.gen1),
            "gen2": _pair(self.gen2),
            "g2": _pair(self.g2),
            "g3": _pair(self.g3),
        }

    @classmethod
    def from_json(cls, obj, tol=DEFAULT_INVARIANT_TOL):
        gen1 = complex(*obj["gen1"])
        gen2 = complex(*obj["gen2"])
        return make_lattice(gen1, gen2, tol)


def _pair(z):
    z = complex(z)
    return [z.real, z.imag]


def lagrange_reduce(u, v):
    """Lagrange-Gauss reduction of the basis ``(u, v)``.

    Returns ``(r1, r2, matrix)`` where ``|r1| <= |r2|``, ``|Re(r2/r1)| <= 1/2``,
    ``Im(r2/r1) > 0`` and ``matrix`` expresses ``r1, r2`` in terms of ``u, v``.
    """
    u, v = complex(u), complex(v)
    hu, hv = (1, 0), (0, 1)
    if abs(v) < abs(u):
        u, v, hu, hv = v, u, hv, hu
    for _ in range(10_000):
        mu = math.floor((v / u).real + 0.5)
        if mu:
            v = v - mu * u
            hv = (hv[0] - mu * hu[0], hv[1] - mu * hu[1])
        if abs(v) >= abs(u):
            break
        u, v, hu, hv = v, u, hv, hu
    else:  # pragma: no cover
        raise RuntimeError("Lagrange reduction did not terminate")
    if (v / u).imag < 0:
        v = -v
        hv = (-hv[0], -hv[1])
    return u, v, (hu, hv)


def make_lattice(gen1, gen2, tol=DEFAULT_INVARIANT_TOL):
    gen1, gen2 = complex(gen1), complex(gen2)
    if not all(math.isfinite(x) for x in (gen1.real, gen1.imag, gen2.real, gen2.imag)):
        raise DegenerateLattice("lattice generators must be finite")
    if gen1 == 0 or gen2 == 0:
        raise DegenerateLattice("lattice generators must be nonzero")
    ratio = gen2 / gen1
    if abs(ratio.imag) <= COLLINEAR_EPS * abs(ratio):
        raise DegenerateLattice(f"generators {gen1} and {gen2} are collinear")
    if ratio.imag < 0:
        gen1, gen2 = gen2, gen1
    r1, r2, matrix = lagrange_reduce(gen1, gen2)
    g2, g3 = eisenstein_invariants(r1, r2, tol)
    lat = Lattice(gen1, gen2, g2, g3, r1, r2, abs(r1), matrix)
    return lat


def invariants(lattice, tol=DEFAULT_INVARIANT_TOL):
    return eisenstein_invariants(lattice.reduced_gen1, lattice.reduced_gen2, tol)


def _smooth_window(t, start=0.25):
    """C-infinity radial window: 1 for t <= start, 0 for t >= 1."""
    s = np.clip((t - start) / (1.0 - start), 0.0, 1.0)
    inner = s > 0
    outer = s < 1
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(inner, np.exp(-1.0 / np.where(inner, s, 1.0)), 0.0)
        b = np.where(outer, np.exp(-1.0 / np.where(outer, 1.0 - s, 1.0)), 0.0)
    return 1.0 - a / (a + b)


def lattice_points_in_disc(r1, r2, radius, include_zero=False):
    """All points ``m*r1 + n*r2`` with modulus <= radius (reduced basis)."""
    # For a reduced basis |m r1 + n r2|^2 >= (m^2|r1|^2 + n^2|r2|^2) / 2.
    mmax = int(math.ceil(radius * math.sqrt(2) / abs(r1)))
    nmax = int(math.ceil(radius * math.sqrt(2) / abs(r2)))
    m = np.arange(-mmax, mmax + 1, dtype=np.float64)
    n = np.arange(-nmax, nmax + 1, dtype=np.float64)
    pts = (m[None, :] * r1 + n[:, None] * r2).ravel()
    keep = np.abs(pts) <= radius
    if not include_zero:
        keep &= pts != 0
    return pts[keep]


def _windowed_sums(r1, r2, radius):
    lam = lattice_points_in_disc(r1, r2, radius)
    w = _smooth_window(np.abs(lam) / radius)
    inv2 = 1.0 / (lam * lam)
    inv4 = inv2 * inv2
    return np.sum(inv4 * w), np.sum(inv4 * inv2 * w)


def eisenstein_invariants(r1, r2, tol=DEFAULT_INVARIANT_TOL):
    """``g2 = 60 sum' lam^-4`` and ``g3 = 140 sum' lam^-6`` for a reduced basis.

    The sums are taken over a disc with a smooth radial cutoff, which makes the
    truncation error decay faster than any power of the radius (the angular
    integral of ``lam^-k`` vanishes, leaving only a rapidly decaying
    lattice-sum remainder). The radius doubles until successive estimates
    agree within ``tol``; the absolute tolerance is floored at a small
    multiple of double-precision roundoff of the sums themselves.
    """
    r1, r2 = complex(r1), complex(r2)
    scale = abs(r1)
    u1, u2 = r1 / scale, r2 / scale
    # Work with the lattice scaled to unit shortest vector.
    tol2 = tol * scale ** 4
    tol3 = tol * scale ** 6
    radius = 10.0 * abs(u2)
    prev = _windowed_sums(u1, u2, radius)
    area = abs((u1.conjugate() * u2).imag)
    while True:
        radius *= 2.0
        if math.pi * radius ** 2 / area > MAX_SUM_POINTS:
            raise ToleranceUnreachable(
                f"invariant sums did not reach tol={tol} within the point cap"
            )
        cur = _windowed_sums(u1, u2, radius)
        d2 = 60 * abs(cur[0] - prev[0])
        d3 = 140 * abs(cur[1] - prev[1])
        floor2 = 1e-14 * 60 * max(1.0, abs(cur[0]))
        floor3 = 1e-14 * 140 * max(1.0, abs(cur[1]))
        if d2 <= max(tol2, floor2) and d3 <= max(tol3, floor3):
            break
        prev = cur
    g2 = complex(60 * cur[0]) / scale ** 4
    g3 = complex(140 * cur[1]) / scale ** 6
    return g2, g3


def is_triangular(lattice, tol=1e-8):
    return abs(lattice.g2) <= tol * max(1.0, abs(lattice.g3) ** (2.0 / 3.0))


def half_periods(lattice):
    g1, g2 = lattice.gen1, lattice.gen2
    return HalfPeriods(g1 / 2, g2 / 2, (g1 + g2) / 2)


def solve_depressed_cubic(p, q):
    """Roots of ``t^3 + p t + q = 0`` by Cardano, then one Newton polish each."""
    p, q = complex(p), complex(q)
    if p == 0 and q == 0:
        return [0j, 0j, 0j]
    disc = (q / 2) ** 2 + (p / 3) ** 3
    sq = disc ** 0.5
    # Pick the branch that avoids cancellation in -q/2 +- sqrt(disc).
    a = -q / 2 + sq
    b = -q / 2 - sq
    base = a if abs(a) >= abs(b) else b
    u = base ** (1.0 / 3.0)
    rot = complex(-0.5, math.sqrt(3) / 2)
    roots = []
    for k in range(3):
        uk = u * rot ** k
        t = uk - p / (3 * uk) if uk != 0 else 0j
        dt = 3 * t * t + p
        if dt != 0:
            t = t - (t ** 3 + p * t + q) / dt
        roots.append(t)
    return roots


def weierstrass_cubic_roots(g2, g3):
    """Roots of ``4t^3 - g2 t - g3``, re-centred so they sum to zero."""
    roots = solve_depressed_cubic(-complex(g2) / 4, -complex(g3) / 4)
    mean = sum(roots) / 3
    return [r - mean for r in roots]


def critical_values(lattice):
    """``e_i = wp(w_i)``: cubic roots paired with the half-periods."""
    from .weierstrass import evaluator_for, wp

    roots = weierstrass_cubic_roots(lattice.g2, lattice.g3)
    scale = max(abs(r) for r in roots)
    ev = evaluator_for(lattice)
    values = [wp(ev, w) for w in half_periods(lattice).as_tuple()]
    chosen = []
    for v in values:
        dists = [abs(v - r) for r in roots]
        i = int(np.argmin(dists))
        ordered = sorted(dists)
        if ordered[0] > 1e-6 * scale or ordered[1] < 10 * ordered[0] + 1e-12 * scale:
            raise RootMatchFailed(f"cannot pair wp(w)={v} with a cubic root")
        chosen.append(i)
    if sorted(chosen) != [0, 1, 2]:
        raise RootMatchFailed("half-periods do not map to distinct roots")
    return CriticalValues(*(roots[i] for i in chosen))


# ---------------------------------------------------------------------------
# Lattice coordinates and reduction


def _as_array(z):
    arr = np.asarray(z, dtype=np.complex128)
    return arr, arr.ndim == 0


def _ret(x, scalar):
    if scalar:
        return x.item() if hasattr(x, "item") else x
    return x


def lattice_coords(z, lattice):
    """Real coordinates ``(a, b)`` with ``z = a*reduced_gen1 + b*reduced_gen2``."""
    z = np.asarray(z, dtype=np.complex128)
    r1, r2 = lattice.reduced_gen1, lattice.reduced_gen2
    det = (r2.conjugate() * r1).imag
    a = (np.conj(r2) * z).imag / det
    b = (np.conj(r1) * z).imag / (-det)
    return a, b


def _split(x):
    """Veltkamp split: ``x = hi + lo`` with ``hi`` carrying 26 significant bits."""
    c = 134217729.0 * x
    hi = c - (c - x)
    return hi, x - hi


def subtract_lattice_vector(z, m, n, lattice):
    """``z - (m r1 + n r2)`` with the products formed exactly.

    Each generator component is split so that ``m * hi`` is exact for
    ``|m| < 2^26``; the large cancellation then happens between exact
    numbers and the result carries an error relative to itself, not to ``z``.
    """
    r1, r2 = lattice.reduced_gen1, lattice.reduced_gen2
    out = []
    for zc, a, b in ((z.real, r1.real, r2.real), (z.imag, r1.imag, r2.imag)):
        ah, al = _split(a)
        bh, bl = _split(b)
        out.append(((zc - m * ah) - n * bh) - (m * al + n * bl))
    return out[0] + 1j * out[1]


def reduce_coords(z, lattice):
    """Vectorised reduction: ``(z_red, m, n)`` with ``z = z_red + m r1 + n r2``.

    ``m, n`` are float arrays holding integers; ``z_red`` lies in the
    half-open parallelogram spanned by the reduced basis.
    """
    z = np.asarray(z, dtype=np.complex128)
    a, b = lattice_coords(z, lattice)
    m = np.floor(a + COORD_SNAP)
    n = np.floor(b + COORD_SNAP)
    z_red = subtract_lattice_vector(z, m, n, lattice)
    return z_red, m, n


def reduce_mod_lattice(z, lattice):
    arr, scalar = _as_array(z)
    z_red, m, n = reduce_coords(arr, lattice)
    shift = arr - z_red
    return _ret(z_red, scalar), _ret(shift, scalar)


def nearest_coords(z, lattice):
    """Reduced-basis integer coordinates of the lattice point nearest ``z``."""
    z = np.asarray(z, dtype=np.complex128)
    a, b = lattice_coords(z, lattice)
    fa, fb = np.floor(a), np.floor(b)
    best_m, best_n = fa, fb
    best_d = None
    for dm in (0.0, 1.0):
        for dn in (0.0, 1.0):
            cm, cn = fa + dm, fb + dn
            diff = subtract_lattice_vector(z, cm, cn, lattice)
            d = diff.real * diff.real + diff.imag * diff.imag
            if best_d is None:
                best_m, best_n, best_d = cm, cn, d
            else:
                better = d < best_d
                best_m = np.where(better, cm, best_m)
                best_n = np.where(better, cn, best_n)
                best_d = np.where(better, d, best_d)
    return best_m, best_n


def nearest_lattice_point(z, lattice):
    arr, scalar = _as_array(z)
    m, n = nearest_coords(arr, lattice)
    pt = m * lattice.reduced_gen1 + n * lattice.reduced_gen2
    return _ret(np.asarray(pt), scalar)


def torus_offset(z, lattice):
    """``z`` minus its nearest lattice point (the Voronoi representative)."""
    arr, scalar = _as_array(z)
    m, n = nearest_coords(arr, lattice)
    return _ret(subtract_lattice_vector(arr, m, n, lattice), scalar)


def torus_distance(z, w, lattice):
    """Distance between ``z`` and ``w`` in the torus C / lattice."""
    off = np.asarray(torus_offset(np.asarray(z) - np.asarray(w), lattice))
    d = np.sqrt(off.real * off.real + off.imag * off.imag)
    return d.item() if d.ndim == 0 else d


def is_lattice_point(z, lattice, tol=DEFAULT_MEMBER_TOL):
    off = np.asarray(torus_offset(z, lattice))
    res = np.abs(off) <= tol * lattice.shortest_vector_len
    return bool(res) if res.ndim == 0 else res


def is_half_period(z, lattice, tol=DEFAULT_MEMBER_TOL):
    z = np.asarray(z, dtype=np.complex128)
    res = is_lattice_point(2 * z, lattice, 2 * tol) & ~np.asarray(
        is_lattice_point(z, lattice, tol)
    )
    return bool(res) if np.ndim(res) == 0 else res


def lattice_vector_from_coords(m, n, lattice):
    return m * lattice.reduced_gen1 + n * lattice.reduced_gen2


def original_coords(z, lattice):
    """Integer coordinates of a lattice point with respect to ``(gen1, gen2)``."""
    g1, g2 = lattice.gen1, lattice.gen2
    det = (g2.conjugate() * g1).imag
    a = (g2.conjugate() * complex(z)).imag / det
    b = (g1.conjugate() * complex(z)).imag / (-det)
    return round(a), round(b)
