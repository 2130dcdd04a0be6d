"""Elliptic functions with poles exactly on the lattice.

Such a function is written ``f = P(wp) + wp' * S(wp)`` with polynomials ``P``
and ``S``. The derivative of a function of this form is again of this form,
which is how ``f'`` and ``f''`` are evaluated: only ``wp`` and ``wp'`` are
ever computed numerically.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import lattice as lat
from . import weierstrass as wsf
from .errors import PoleAtInput, RootCountMismatch

MAX_DEGREE = 16
MULTIPLE_ZERO_THRESHOLD = 1e-4


def _trim(coeffs):
    c = [complex(x) for x in coeffs]
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


def _degree(c):
    return len(c) - 1 if c else None


def _poly_deriv(c):
    if len(c) <= 1:
        return ()
    return _trim(npoly.polyder(np.array(c, dtype=np.complex128)))


def _poly_mul(a, b):
    if not a or not b:
        return ()
    return _trim(npoly.polymul(np.array(a), np.array(b)))


def _poly_add(a, b):
    if not a:
        return tuple(b)
    if not b:
        return tuple(a)
    return _trim(npoly.polyadd(np.array(a), np.array(b)))


@dataclass(frozen=True)
class EllipticFunction:
    """``f = P(wp) + wp' S(wp)``; coefficient tuples in ascending powers."""

    lattice: lat.Lattice
    P: tuple
    S: tuple = ()

    def __post_init__(self):
        P, S = _trim(self.P), _trim(self.S)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "S", S)
        if not P and not S:
            raise ValueError("P and S are both identically zero")
        if self.order < 2:
            raise ValueError("f is constant; an elliptic function has order >= 2")

    @property
    def order(self):
        """Pole order at 0, which is the order of f (poles lie only on the lattice)."""
        dp = 2 * _degree(self.P) if self.P else 0
        ds = 3 + 2 * _degree(self.S) if self.S else 0
        return max(dp, ds)

    @property
    def parity(self):
        if not self.S:
            return "even"
        if not self.P:
            return "odd"
        return "neither"

    @cached_property
    def derivative(self):
        """``f'`` in the same representation.

        ``d/dz [P(wp)] = wp' P'(wp)`` and
        ``d/dz [wp' S(wp)] = wp'' S(wp) + wp'^2 S'(wp)`` with
        ``wp'' = 6t^2 - g2/2`` and ``wp'^2 = 4t^3 - g2 t - g3``.
        """
        g2, g3 = self.lattice.g2, self.lattice.g3
        second = (-g2 / 2, 0, 6)
        square = (-g3, -g2, 0, 4)
        new_p = _poly_add(_poly_mul(second, self.S), _poly_mul(square, _poly_deriv(self.S)))
        new_s = _poly_deriv(self.P)
        return _DerivedFunction(self.lattice, new_p, new_s)

    @property
    def evaluator(self):
        return wsf.evaluator_for(self.lattice)

    def to_json(self):
        return {
            "P": [[c.real, c.imag] for c in self.P],
            "S": [[c.real, c.imag] for c in self.S],
            "lattice": self.lattice.to_json(),
        }

    @classmethod
    def from_json(cls, obj, lattice=None):
        if lattice is None:
            lattice = lat.Lattice.from_json(obj["lattice"])
        P = [complex(*c) for c in obj.get("P", [])]
        S = [complex(*c) for c in obj.get("S", [])]
        return make_elliptic(lattice, P, S)


class _DerivedFunction(EllipticFunction):
    """Derivatives may exceed the user-facing degree cap; skip validation."""

    def __init__(self, lattice, P, S):
        object.__setattr__(self, "lattice", lattice)
        object.__setattr__(self, "P", _trim(P))
        object.__setattr__(self, "S", _trim(S))


def make_elliptic(lattice, P, S=()):
    P, S = _trim(P), _trim(S)
    for name, c in (("P", P), ("S", S)):
        if c and _degree(c) > MAX_DEGREE:
            raise ValueError(f"degree of {name} exceeds {MAX_DEGREE}")
    return EllipticFunction(lattice, P, S)


@dataclass(frozen=True)
class WpPlusB:
    """The family ``wp + b``."""

    lattice: lat.Lattice
    b: complex

    def __post_init__(self):
        object.__setattr__(self, "b", complex(self.b))

    @cached_property
    def as_elliptic(self):
        return EllipticFunction(self.lattice, (self.b, 1.0))

    @property
    def order(self):
        return 2

    @property
    def parity(self):
        return "even"

    @property
    def evaluator(self):
        return wsf.evaluator_for(self.lattice)

    def to_json(self):
        return {"b": [self.b.real, self.b.imag], "lattice": self.lattice.to_json()}


def _as_elliptic(f):
    return f.as_elliptic if isinstance(f, WpPlusB) else f


def _polyval(c, t):
    if not c:
        return np.zeros_like(t)
    return npoly.polyval(t, np.array(c, dtype=np.complex128))


def values_from_wp(f, p, dp, nderiv=0):
    """``[f, f', ...]`` up to ``nderiv`` from arrays of ``wp`` and ``wp'``."""
    g = _as_elliptic(f)
    out = []
    for _ in range(nderiv + 1):
        out.append(_polyval(g.P, p) + dp * _polyval(g.S, p))
        g = g.derivative
    return out


def _evaluate(f, z, nderiv):
    p, dp, pole = wsf.wp_pair_array(f.evaluator, z)
    if np.any(pole):
        raise PoleAtInput(f"f has a pole at {z}")
    vals = values_from_wp(f, p, dp, nderiv)[nderiv]
    return vals.item() if np.ndim(z) == 0 else vals


def eval_f(f, z):
    return _evaluate(f, z, 0)


def eval_f_prime(f, z):
    return _evaluate(f, z, 1)


def eval_f_second(f, z):
    return _evaluate(f, z, 2)


def natural_scale(f):
    """Typical magnitude of ``f`` on the lattice scale (``wp ~ L^-2``)."""
    g = _as_elliptic(f)
    L = f.lattice.shortest_vector_len
    s = sum(abs(c) * L ** (-2 * k) for k, c in enumerate(g.P))
    s += sum(abs(c) * L ** (-3 - 2 * k) for k, c in enumerate(g.S))
    return s


def zeros_in_cell(f, tol=1e-9, max_steps=100):
    """Zeros of ``f`` in the principal cell (reduced basis) with multiplicities.

    Multi-start Newton on a seed grid whose density grows with the order of
    ``f``; multiplicity is read from the first derivative that does not
    vanish at the root.
    """
    g = _as_elliptic(f)
    lattice = f.lattice
    L = lattice.shortest_vector_len
    ev = f.evaluator
    order = g.order
    n = max(16, 6 * order)
    frac = (np.arange(n) + 0.5) / n
    z = (frac[None, :] * lattice.reduced_gen1 + frac[:, None] * lattice.reduced_gen2).ravel()
    alive = np.ones(z.shape, dtype=bool)
    fscale = natural_scale(f)
    # derivative scales for the multiplicity test, sampled on the seed grid
    p0, dp0, pole0 = wsf.wp_pair_array(ev, z)
    _, d1_all, d2_all = values_from_wp(g, p0[~pole0], dp0[~pole0], 2)
    scale1 = float(np.median(np.abs(d1_all)))
    scale2 = float(np.median(np.abs(d2_all)))
    for _ in range(max_steps):
        p, dp, pole = wsf.wp_pair_array(ev, z)
        fv, f1 = values_from_wp(g, p, dp, 1)
        alive &= ~pole
        with np.errstate(all="ignore"):
            step = fv / f1
        bad = ~np.isfinite(step)
        alive &= ~bad
        step = np.where(alive, step, 0)
        z = np.asarray(lat.reduce_mod_lattice(z - step, lattice)[0])
        if np.all(np.abs(step[alive]) < 1e-15 * L):
            break
    p, dp, pole = wsf.wp_pair_array(ev, z)
    alive &= ~pole
    fv, f1, f2 = values_from_wp(g, p, dp, 2)
    converged = alive & (np.abs(fv) < tol * fscale)
    if not np.any(converged):
        raise RootCountMismatch("no zeros of f were located")
    idx = np.flatnonzero(converged)
    idx = idx[np.argsort(np.abs(fv[idx]), kind="stable")]
    clusters = []
    for i in idx:
        zi = z[i]
        if all(lat.torus_distance(zi, c, lattice) > 1e-5 * L for c in clusters):
            clusters.append(zi)
    result = []
    for c in clusters:
        p, dp, _ = wsf.wp_pair_array(ev, np.array([c]))
        _, d1, d2 = (v[0] for v in values_from_wp(g, p, dp, 2))
        if abs(d1) > MULTIPLE_ZERO_THRESHOLD * scale1:
            m = 1
        elif abs(d2) > MULTIPLE_ZERO_THRESHOLD * scale2:
            m = 2
        else:
            m = 3
        result.append((complex(c), m))
    total = sum(m for _, m in result)
    if total != order:
        raise RootCountMismatch(
            f"found zeros of total multiplicity {total}, expected order {order}"
        )
    result.sort(key=lambda t: wsf._sort_key(t[0], lattice))
    return result
