"""Newton maps of elliptic functions.

``N(z) = z - f(z)/f'(z)`` commutes with lattice translations, so every
evaluation reduces its argument to the Voronoi cell first. Close to a lattice
point (a pole of ``f`` of order ``m``) and close to a zero of ``f`` the map is
replaced by its exact linearisation, which avoids the cancellation in
``f/f'`` there.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import elliptic as ell
from . import lattice as lat
from . import weierstrass as wsf
from .errors import NotLatticePoint, NotTriangular, PoleOfNewtonMap

# Radius (in shortest-vector units) inside which the local linear model is used.
SWITCH_RADIUS = 1e-4
# Distance (in shortest-vector units) at which a point counts as a pole of N.
POLE_TOL = 1e-9


@dataclass(frozen=True)
class NewtonMap:
    f: object  # EllipticFunction or WpPlusB
    lattice: lat.Lattice
    kind: str  # "general" or "wp_plus_b"

    @property
    def evaluator(self):
        return wsf.evaluator_for(self.lattice)

    @property
    def order(self):
        return self.f.order

    @cached_property
    def zeros(self):
        """Zeros of f in the cell as ``[(z, multiplicity), ...]``."""
        if self.kind == "wp_plus_b":
            pre = wsf.wp_inverse(self.evaluator, -self.f.b)
            if pre.multiplicity == 2:
                return [(pre.z1, 2)]
            return [(pre.z1, 1), (pre.z2, 1)]
        return ell.zeros_in_cell(self.f)

    @cached_property
    def poles(self):
        return poles_of_newton_in_cell(self)

    @cached_property
    def fscale(self):
        return ell.natural_scale(self.f)

    @cached_property
    def _zero_arrays(self):
        zs = np.array([z for z, _ in self.zeros], dtype=np.complex128)
        ms = np.array([m for _, m in self.zeros], dtype=np.float64)
        return zs, ms

    @cached_property
    def _pole_array(self):
        return np.array(self.poles, dtype=np.complex128)

    def to_json(self):
        out = {"kind": self.kind, "lattice": self.lattice.to_json()}
        if self.kind == "wp_plus_b":
            out["b"] = [self.f.b.real, self.f.b.imag]
        else:
            out["P"] = [[c.real, c.imag] for c in self.f.P]
            out["S"] = [[c.real, c.imag] for c in self.f.S]
        return out


def newton_map(f):
    if isinstance(f, ell.WpPlusB):
        return NewtonMap(f, f.lattice, "wp_plus_b")
    return NewtonMap(f, f.lattice, "general")


def wp_plus_b_map(lattice, b):
    return newton_map(ell.WpPlusB(lattice, b))


# ---------------------------------------------------------------------------
# vectorised kernels


def _sqabs(z):
    return z.real * z.real + z.imag * z.imag


def step_arrays(N, z, local_model=True):
    """One Newton step on an array: ``(N(z), f(z), pole_mask)``.

    Entries flagged in ``pole_mask`` hold NaN in ``N(z)``.
    """
    z = np.asarray(z, dtype=np.complex128)
    L = N.lattice.shortest_vector_len
    p, dp, latpole = wsf.wp_pair_array(N.evaluator, z)
    if N.kind == "wp_plus_b":
        fv = p + N.f.b
        fp = dp
    else:
        fv, fp = ell.values_from_wp(N.f, p, dp, 1)
    with np.errstate(all="ignore"):
        out = z - fv / fp
    pole = ~np.isfinite(out) & ~latpole
    for pz in N._pole_array:
        off = np.asarray(lat.torus_offset(z - pz, N.lattice))
        pole |= _sqabs(off) <= (POLE_TOL * L) ** 2
    if local_model:
        thr = (SWITCH_RADIUS * L) ** 2
        off = np.asarray(lat.torus_offset(z, N.lattice))
        near = _sqabs(off) < thr
        out = np.where(near, z + off / N.order, out)
        zs, ms = N._zero_arrays
        for zj, mj in zip(zs, ms):
            off = np.asarray(lat.torus_offset(z - zj, N.lattice))
            near = _sqabs(off) < thr
            out = np.where(near, z - off / mj, out)
            pole &= ~near
    else:
        pole |= latpole
    pole &= ~(latpole & local_model)
    fv = np.where(latpole, np.inf, fv)
    out = np.where(pole, np.nan, out)
    return out, fv, pole


def wpb_step_arrays(lattice, z, b):
    """Newton step for ``wp + b`` with one ``b`` per entry (parameter planes).

    No zero list is available here, so only the lattice-point linearisation is
    used; half-periods are poles unless ``f`` vanishes there.
    """
    z = np.asarray(z, dtype=np.complex128)
    L = lattice.shortest_vector_len
    ev = wsf.evaluator_for(lattice)
    p, dp, latpole = wsf.wp_pair_array(ev, z)
    fv = p + b
    with np.errstate(all="ignore"):
        out = z - fv / dp
    scale = L ** -2 + np.abs(b)
    pole = ~np.isfinite(out) & ~latpole
    for om in lat.half_periods(lattice).as_tuple():
        off = np.asarray(lat.torus_offset(z - om, lattice))
        pole |= (_sqabs(off) <= (POLE_TOL * L) ** 2) & (np.abs(fv) > 1e-12 * scale)
    off = np.asarray(lat.torus_offset(z, lattice))
    near = _sqabs(off) < (SWITCH_RADIUS * L) ** 2
    out = np.where(near, z + off / 2.0, out)
    pole &= ~near
    fv = np.where(latpole, np.inf, fv)
    out = np.where(pole, np.nan, out)
    return out, fv, pole


def derivative_arrays(N, z):
    """``N'(z) = f f'' / f'^2`` with the local multipliers near poles/zeros."""
    z = np.asarray(z, dtype=np.complex128)
    L = N.lattice.shortest_vector_len
    p, dp, latpole = wsf.wp_pair_array(N.evaluator, z)
    fv, f1, f2 = ell.values_from_wp(N.f, p, dp, 2)
    with np.errstate(all="ignore"):
        out = fv * f2 / (f1 * f1)
    thr = (SWITCH_RADIUS * L) ** 2
    off = np.asarray(lat.torus_offset(z, N.lattice))
    m = N.order
    out = np.where(_sqabs(off) < thr, (m + 1) / m, out)
    pole = ~np.isfinite(out)
    for pz in N._pole_array:
        o = np.asarray(lat.torus_offset(z - pz, N.lattice))
        pole |= _sqabs(o) <= (POLE_TOL * L) ** 2
    zs, ms = N._zero_arrays
    for zj, mj in zip(zs, ms):
        if mj > 1:
            o = np.asarray(lat.torus_offset(z - zj, N.lattice))
            near = _sqabs(o) < thr
            out = np.where(near, (mj - 1) / mj, out)
            pole &= ~near
    return out, pole


# ---------------------------------------------------------------------------
# scalar API


def newton_eval(N, z):
    out, _, pole = step_arrays(N, np.array([complex(z)]))
    if pole[0]:
        raise PoleOfNewtonMap(f"{z} is a pole of the Newton map", step=0)
    return complex(out[0])


def newton_eval_direct(N, z):
    """``z - f/f'`` without the local models (used to measure multipliers)."""
    out, _, pole = step_arrays(N, np.array([complex(z)]), local_model=False)
    if pole[0]:
        raise PoleOfNewtonMap(f"{z} is a pole of the Newton map", step=0)
    return complex(out[0])


def newton_derivative(N, z):
    out, pole = derivative_arrays(N, np.array([complex(z)]))
    if pole[0]:
        raise PoleOfNewtonMap(f"{z} is a pole of the Newton map", step=0)
    return complex(out[0])


def newton_iterate(N, z, k):
    z = complex(z)
    for i in range(k):
        out, _, pole = step_arrays(N, np.array([z]))
        if pole[0]:
            raise PoleOfNewtonMap(f"orbit hit a pole at step {i}", step=i)
        z = complex(out[0])
    return z


def measure_multiplier(N, z0, h=None, direction=complex(np.cos(0.3), np.sin(0.3))):
    """Multiplier of the fixed point ``z0`` from difference quotients.

    Uses ``(N(z0 + h) - z0) / h`` at ``h, h/2, h/4`` with Richardson
    elimination of the O(h) and O(h^2) terms.
    """
    if h is None:
        h = 1e-3 * N.lattice.shortest_vector_len
    r = []
    for s in (h, h / 2, h / 4):
        d = s * direction
        r.append((newton_eval_direct(N, z0 + d) - z0) / d)
    return (8 * r[2] - 6 * r[1] + r[0]) / 3


# ---------------------------------------------------------------------------
# structure of N


class CriticalPoint(NamedTuple):
    z: complex
    local_degree: int  # order of vanishing of N' (1 = simple critical point)


@dataclass(frozen=True)
class CriticalSet:
    free_points: list
    fixed_critical_points: list


def _dedupe(points, lattice, tol):
    out = []
    for z in points:
        if all(lat.torus_distance(z, q, lattice) > tol for q in out):
            out.append(z)
    return out


def _near_any(z, others, lattice, tol):
    return any(lat.torus_distance(z, q, lattice) <= tol for q in others)


def critical_set(N, tol=1e-6):
    lattice = N.lattice
    L = lattice.shortest_vector_len
    close = tol * L
    zeros = [z for z, _ in N.zeros]
    fixed = [z for z, m in N.zeros if m == 1]
    poles = N.poles
    free = []
    if N.kind == "wp_plus_b":
        ev = N.evaluator
        if lat.is_triangular(lattice):
            pre = wsf.wp_inverse(ev, 0.0)
            cands = [(pre.z1, 2), (pre.z2, 2)]
        else:
            s = (lattice.g2 / 12) ** 0.5
            cands = []
            for w in (s, -s):
                pre = wsf.wp_inverse(ev, w)
                if pre.multiplicity == 1:
                    cands += [(pre.z1, 1), (pre.z2, 1)]
        for z, d in cands:
            if not _near_any(z, zeros, lattice, close) and not _near_any(z, poles, lattice, close):
                free.append(CriticalPoint(complex(z), d))
    else:
        second = N.f.derivative.derivative
        first_zeros = [z for z, _ in ell.zeros_in_cell(N.f.derivative)]
        for z, m in ell.zeros_in_cell(second):
            if _near_any(z, zeros, lattice, close) or _near_any(z, first_zeros, lattice, close):
                continue
            free.append(CriticalPoint(complex(z), m))
    free.sort(key=lambda c: wsf._sort_key(c.z, lattice))
    return CriticalSet(free, fixed)


def poles_of_newton_in_cell(N, tol=1e-6):
    lattice = N.lattice
    close = tol * lattice.shortest_vector_len
    zeros = [z for z, _ in N.zeros]
    if N.kind == "wp_plus_b":
        cands = [lat.reduce_mod_lattice(w, lattice)[0] for w in lat.half_periods(lattice).as_tuple()]
    else:
        cands = [z for z, _ in ell.zeros_in_cell(N.f.derivative)]
    out = [complex(z) for z in cands if not _near_any(z, zeros, lattice, close)]
    out.sort(key=lambda z: wsf._sort_key(z, lattice))
    return out


class FixedPoint(NamedTuple):
    z: complex
    multiplier: complex  # measured
    expected: float  # (m-1)/m for a zero of order m, (m+1)/m for the pole
    kind: str  # superattracting | attracting | repelling


def fixed_points_in_cell(N):
    out = []
    for z, m in N.zeros:
        expected = (m - 1) / m
        if m == 1:
            p, dp, _ = wsf.wp_pair_array(N.evaluator, np.array([z]))
            fv, f1, f2 = (v[0] for v in ell.values_from_wp(N.f, p, dp, 2))
            measured = complex(fv * f2 / (f1 * f1))
            kind = "superattracting"
        else:
            measured = complex(measure_multiplier(N, z))
            kind = "attracting"
        out.append(FixedPoint(complex(z), measured, expected, kind))
    m = N.order
    out.append(FixedPoint(0j, complex(measure_multiplier(N, 0j)), (m + 1) / m, "repelling"))
    return out


# ---------------------------------------------------------------------------
# shifted maps and the wandering construction


@dataclass(frozen=True)
class ShiftedMap:
    """``F(z) = N(z) + shift`` for a nonzero lattice vector ``shift``."""

    base: NewtonMap
    shift: complex

    def __post_init__(self):
        object.__setattr__(self, "shift", complex(self.shift))
        lattice = self.base.lattice
        if (not lat.is_lattice_point(self.shift, lattice, 1e-9)
                or abs(self.shift) < 0.5 * lattice.shortest_vector_len):
            raise NotLatticePoint(f"shift {self.shift} is not a nonzero lattice point")


def shifted_eval(F, z):
    return newton_eval(F.base, z) + F.shift


def shifted_iterate(F, z, k):
    z = complex(z)
    for i in range(k):
        try:
            z = shifted_eval(F, z)
        except PoleOfNewtonMap as exc:
            raise PoleOfNewtonMap(f"orbit hit a pole at step {i}", step=i) from exc
    return z


def _check_triangular(lattice):
    if not lat.is_triangular(lattice):
        raise NotTriangular(f"lattice has g2 = {lattice.g2}, not triangular")


def wandering_seed(lattice, which_zero="first"):
    """One of the two zeros of ``wp`` in the cell (canonical order)."""
    _check_triangular(lattice)
    pre = wsf.wp_inverse(wsf.evaluator_for(lattice), 0.0)
    if which_zero == "first":
        return pre.z1
    if which_zero == "second":
        return pre.z2
    raise ValueError(f"which_zero must be 'first' or 'second', got {which_zero!r}")


def wandering_parameter(lattice, lam, which_zero="first"):
    """``b = lam * wp'(c)`` for ``c`` a zero of ``wp``: then ``N_b(c) = c - lam``."""
    _check_triangular(lattice)
    lam = complex(lam)
    if not lat.is_lattice_point(lam, lattice, 1e-9) or abs(lam) < 0.5 * lattice.shortest_vector_len:
        raise NotLatticePoint(f"{lam} is not a nonzero lattice point")
    c = wandering_seed(lattice, which_zero)
    return lam * wsf.wp_prime(wsf.evaluator_for(lattice), c)


def standard_shifts(lattice):
    """``+-gen1, +-gen2, +-(gen1 + gen2)`` with labels."""
    g1, g2 = lattice.gen1, lattice.gen2
    return [
        ("gen1", g1), ("-gen1", -g1), ("gen2", g2), ("-gen2", -g2),
        ("gen1+gen2", g1 + g2), ("-(gen1+gen2)", -(g1 + g2)),
    ]


def wandering_candidates(lattice, target=None):
    """All wandering parameters over the standard shifts and both zeros.

    Sorted by distance to ``target`` when given.
    """
    rows = []
    for label, lam in standard_shifts(lattice):
        for which in ("first", "second"):
            b = wandering_parameter(lattice, lam, which)
            rows.append({
                "lambda_label": label,
                "lambda": lam,
                "zero": which,
                "c": wandering_seed(lattice, which),
                "b": b,
            })
    if target is not None:
        for r in rows:
            r["distance"] = abs(r["b"] - complex(target))
        rows.sort(key=lambda r: r["distance"])
    return rows
