"""Forward-orbit classification for Newton maps.

Orbits are tracked on the torus: the state is a point of the principal cell
plus an integer lattice shift, so the raw orbit ``z_k`` is never formed in
floating point and lattice drift is read off exactly.
"""

from dataclasses import dataclass
from enum import Enum
import math

import numpy as np

from . import lattice as lat
from . import newton as nwt


class Tag(str, Enum):
    RootCapture = "RootCapture"
    DriftCycle = "DriftCycle"
    BoundCycle = "BoundCycle"
    PrepoleHit = "PrepoleHit"
    Unresolved = "Unresolved"


TAG_CODES = {
    Tag.RootCapture: 0,
    Tag.DriftCycle: 1,
    Tag.BoundCycle: 2,
    Tag.PrepoleHit: 3,
    Tag.Unresolved: 4,
}
TAGS_BY_CODE = {v: k for k, v in TAG_CODES.items()}
_ACTIVE = -1

CHUNK = 4096


@dataclass(frozen=True)
class OrbitParams:
    max_iter: int = 500
    root_tol: float = 1e-9
    cycle_tol: float = 1e-8
    max_cycle_period: int = 64
    transient_skip: int = 50

    def __post_init__(self):
        if self.max_iter <= self.transient_skip:
            raise ValueError("max_iter must exceed transient_skip")
        if self.max_cycle_period >= self.max_iter - self.transient_skip:
            raise ValueError("max_cycle_period must be < max_iter - transient_skip")
        if self.max_cycle_period < 1:
            raise ValueError("max_cycle_period must be positive")
        if self.root_tol <= 0 or self.cycle_tol <= 0:
            raise ValueError("tolerances must be positive")

    def to_json(self):
        return {
            "max_iter": self.max_iter,
            "root_tol": self.root_tol,
            "cycle_tol": self.cycle_tol,
            "max_cycle_period": self.max_cycle_period,
            "transient_skip": self.transient_skip,
        }


@dataclass(frozen=True)
class OrbitOutcome:
    tag: Tag
    root_index: int = -1
    period: int = 0
    drift: complex = 0j
    iterations: int = 0
    final_point: complex = 0j

    def to_json(self):
        return {
            "tag": self.tag.value,
            "root_index": self.root_index,
            "period": self.period,
            "drift": [self.drift.real, self.drift.imag],
            "iterations": self.iterations,
            "final": [self.final_point.real, self.final_point.imag],
        }


@dataclass
class OrbitBatch:
    """Column arrays for a batch of classified orbits."""

    tag: np.ndarray  # int8 codes, see TAG_CODES
    root_index: np.ndarray
    period: np.ndarray
    drift_m: np.ndarray  # drift in reduced-basis integer coordinates
    drift_n: np.ndarray
    iterations: np.ndarray
    final: np.ndarray
    lattice: lat.Lattice

    def __len__(self):
        return len(self.tag)

    @property
    def drift(self):
        return self.drift_m * self.lattice.reduced_gen1 + self.drift_n * self.lattice.reduced_gen2

    def outcome(self, i):
        d = self.drift_m[i] * self.lattice.reduced_gen1 + self.drift_n[i] * self.lattice.reduced_gen2
        return OrbitOutcome(
            tag=TAGS_BY_CODE[int(self.tag[i])],
            root_index=int(self.root_index[i]),
            period=int(self.period[i]),
            drift=complex(d),
            iterations=int(self.iterations[i]),
            final_point=complex(self.final[i]),
        )

    @classmethod
    def concat(cls, parts, lattice):
        return cls(
            *(np.concatenate([getattr(p, name) for p in parts]) for name in
              ("tag", "root_index", "period", "drift_m", "drift_n", "iterations", "final")),
            lattice=lattice,
        )


def _nearest_root_index(w, zeros, lattice):
    if len(zeros) == 0:
        return np.full(w.shape, -1, dtype=np.int16)
    best = None
    idx = np.zeros(w.shape, dtype=np.int16)
    for j, zj in enumerate(zeros):
        off = np.asarray(lat.torus_offset(w - zj, lattice))
        d = off.real * off.real + off.imag * off.imag
        if best is None:
            best = d
        else:
            better = d < best
            idx = np.where(better, j, idx).astype(np.int16)
            best = np.where(better, d, best)
    return idx


def _minimal_period(w, q, hist_w, t, Q, lattice, loose2):
    """Smallest divisor ``d`` of each detected period ``q`` that also closes up.

    An attracting cycle with a negative multiplier approaches its points from
    alternating sides, so a multiple of the true period can pass the strict
    test first. Divisors are accepted under the looser tolerance.
    """
    out = q.copy()
    for i in range(q.size):
        for d in range(1, int(q[i])):
            if q[i] % d:
                continue
            off = complex(lat.torus_offset(w[i] - hist_w[i, (t - d) % Q], lattice))
            if off.real * off.real + off.imag * off.imag < loose2:
                out[i] = d
                break
    return out


def _classify_chunk(stepper, z0, params, lattice, zeros, fscale):
    n = z0.size
    L = lattice.shortest_vector_len
    r1, r2 = lattice.reduced_gen1, lattice.reduced_gen2
    Q = params.max_cycle_period

    w, sm, sn = lat.reduce_coords(z0, lattice)
    w = np.asarray(w).copy()
    tag = np.full(n, _ACTIVE, dtype=np.int8)
    root_index = np.full(n, -1, dtype=np.int16)
    period = np.zeros(n, dtype=np.int16)
    dm = np.zeros(n, dtype=np.int64)
    dn = np.zeros(n, dtype=np.int64)
    iters = np.zeros(n, dtype=np.int32)
    final = np.zeros(n, dtype=np.complex128)

    hist_w = np.zeros((n, Q), dtype=np.complex128)
    hist_m = np.zeros((n, Q))
    hist_n = np.zeros((n, Q))

    root_f = params.root_tol * np.broadcast_to(np.asarray(fscale, dtype=np.float64), (n,))
    root_step2 = (math.sqrt(params.root_tol) * L) ** 2
    cyc2 = (params.cycle_tol * L) ** 2
    loose2 = (math.sqrt(params.cycle_tol) * L) ** 2
    hist_start = max(0, params.transient_skip + 1 - Q)

    act = np.arange(n)
    for k in range(params.max_iter):
        if act.size == 0:
            break
        if k >= hist_start:
            slot = k % Q
            hist_w[act, slot] = w[act]
            hist_m[act, slot] = sm[act]
            hist_n[act, slot] = sn[act]
        wa = w[act]
        nxt, fv, pole = stepper(wa, act)

        hit = pole
        if np.any(hit):
            ids = act[hit]
            tag[ids] = TAG_CODES[Tag.PrepoleHit]
            iters[ids] = k
            final[ids] = wa[hit] + sm[ids] * r1 + sn[ids] * r2

        d = nxt - wa
        cap = ~pole & (np.abs(fv) < root_f[act]) & (d.real * d.real + d.imag * d.imag < root_step2)
        if np.any(cap):
            ids = act[cap]
            tag[ids] = TAG_CODES[Tag.RootCapture]
            iters[ids] = k
            period[ids] = 1
            final[ids] = wa[cap] + sm[ids] * r1 + sn[ids] * r2
            root_index[ids] = _nearest_root_index(wa[cap], zeros, lattice)

        keep = ~(pole | cap)
        act = act[keep]
        if act.size == 0:
            break
        nw, jm, jn = lat.reduce_coords(nxt[keep], lattice)
        w[act] = nw
        sm[act] += jm
        sn[act] += jn
        t = k + 1

        if t > params.transient_skip:
            wt = w[act]
            found = np.zeros(act.size, dtype=bool)
            q_found = np.zeros(act.size, dtype=np.int64)
            for q in range(1, min(Q, t - hist_start) + 1):
                slot = (t - q) % Q
                diff = wt - hist_w[act, slot]
                off = np.asarray(lat.torus_offset(diff, lattice))
                close = ~found & (off.real * off.real + off.imag * off.imag < cyc2)
                q_found[close] = q
                found |= close
            if np.any(found):
                ids = act[found]
                q = _minimal_period(w[ids], q_found[found], hist_w[ids], t, Q, lattice,
                                    loose2)
                slots = (t - q) % Q
                diff = w[ids] - hist_w[ids, slots]
                am, an = lat.nearest_coords(diff, lattice)
                Dm = (am + sm[ids] - hist_m[ids, slots]).astype(np.int64)
                Dn = (an + sn[ids] - hist_n[ids, slots]).astype(np.int64)
                bound = (Dm == 0) & (Dn == 0)
                tags = np.where(bound, TAG_CODES[Tag.BoundCycle], TAG_CODES[Tag.DriftCycle])
                idx = _nearest_root_index(w[ids], zeros, lattice)
                # a bound 1-cycle is a fixed point, hence a zero of f
                fixed = bound & (q == 1)
                tags = np.where(fixed, TAG_CODES[Tag.RootCapture], tags)
                tag[ids] = tags
                root_index[ids] = np.where(fixed, idx, -1)
                period[ids] = q
                dm[ids] = Dm
                dn[ids] = Dn
                iters[ids] = t
                final[ids] = w[ids] + sm[ids] * r1 + sn[ids] * r2
                act = act[~found]

    if act.size:
        tag[act] = TAG_CODES[Tag.Unresolved]
        iters[act] = params.max_iter
        final[act] = w[act] + sm[act] * r1 + sn[act] * r2
    return OrbitBatch(tag, root_index, period, dm, dn, iters, final, lattice)


def classify_orbits(N, z0, params=None):
    """Classify many starting points under one Newton map; returns an OrbitBatch."""
    params = params or OrbitParams()
    z0 = np.asarray(z0, dtype=np.complex128).ravel()
    zeros = np.array([z for z, _ in N.zeros], dtype=np.complex128)

    def stepper(w, _idx):
        return nwt.step_arrays(N, w)

    parts = [
        _classify_chunk(stepper, z0[i:i + CHUNK], params, N.lattice, zeros, N.fscale)
        for i in range(0, max(z0.size, 1), CHUNK)
    ]
    return OrbitBatch.concat(parts, N.lattice)


def classify_orbits_wpb(lattice, z0, b, params=None):
    """Classify orbits of ``wp + b`` with one ``b`` per starting point.

    Root indices are not available (-1) because zeros are not precomputed.
    """
    params = params or OrbitParams()
    z0 = np.asarray(z0, dtype=np.complex128).ravel()
    b = np.broadcast_to(np.asarray(b, dtype=np.complex128), z0.shape)
    parts = []
    for i in range(0, max(z0.size, 1), CHUNK):
        bc = b[i:i + CHUNK]

        def stepper(w, idx, bc=bc):
            return nwt.wpb_step_arrays(lattice, w, bc[idx])

        fscale = lattice.shortest_vector_len ** -2 + np.abs(bc)
        parts.append(_classify_chunk(stepper, z0[i:i + CHUNK], params, lattice,
                                     np.array([], dtype=np.complex128), fscale))
    return OrbitBatch.concat(parts, lattice)


def classify_orbit(N, z0, params=None):
    return classify_orbits(N, np.array([complex(z0)]), params).outcome(0)


def classify_orbit_symmetry_check(N, z0, p, params=None):
    """Outcomes for ``z0`` and its mirror ``2p - z0`` about a half-period ``p``."""
    if N.f.parity == "neither":
        raise ValueError("symmetric orbits require an even or odd function")
    if not (lat.is_half_period(p, N.lattice, 1e-9) or lat.is_lattice_point(p, N.lattice, 1e-9)):
        raise ValueError(f"{p} is not in the half-lattice")
    z0 = complex(z0)
    batch = classify_orbits(N, np.array([z0, 2 * complex(p) - z0]), params)
    return batch.outcome(0), batch.outcome(1)


def free_critical_orbit_summary(N, params=None):
    crit = nwt.critical_set(N)
    pts = [c.z for c in crit.free_points]
    if not pts:
        return []
    keyed = sorted(pts, key=lambda z: (lat.reduce_mod_lattice(z, N.lattice)[0].real,
                                       lat.reduce_mod_lattice(z, N.lattice)[0].imag))
    batch = classify_orbits(N, np.array(keyed), params)
    return [(z, batch.outcome(i)) for i, z in enumerate(keyed)]


def reduced_excursion(N, z0, steps):
    """Largest ``|N^k(z0) mod lattice - z0|`` over ``k <= steps``, in cell diameters.

    The orbit is represented in the principal cell of the reduced basis.
    Pole hits freeze the orbit at its last point.
    """
    lattice = N.lattice
    z0 = np.asarray(z0, dtype=np.complex128).ravel()
    diam = abs(lattice.reduced_gen1) + abs(lattice.reduced_gen2)
    w = np.asarray(lat.reduce_coords(z0, lattice)[0])
    worst = np.abs(w - z0) / diam
    for _ in range(int(steps)):
        nxt, _, pole = nwt.step_arrays(N, w)
        w = np.asarray(lat.reduce_coords(np.where(pole, w, nxt), lattice)[0])
        worst = np.maximum(worst, np.abs(w - z0) / diam)
    return worst


def dedrifted_excursion(N, z0, drift, period, steps):
    """Largest distance, in cell diameters, of ``N^k(z0) - (k/period) drift`` from ``z0``.

    Vectorised over ``z0``; ``drift`` and ``period`` broadcast against it.
    """
    lattice = N.lattice
    z0 = np.asarray(z0, dtype=np.complex128).ravel()
    drift = np.broadcast_to(np.asarray(drift, dtype=np.complex128), z0.shape)
    period = np.broadcast_to(np.asarray(period, dtype=np.float64), z0.shape)
    w, sm, sn = lat.reduce_coords(z0, lattice)
    w = np.asarray(w).copy()
    r1, r2 = lattice.reduced_gen1, lattice.reduced_gen2
    diam = abs(r1) + abs(r2)
    worst = np.zeros(z0.shape)
    for k in range(1, int(steps) + 1):
        nxt, _, pole = nwt.step_arrays(N, w)
        nxt = np.where(pole, w, nxt)
        nw, jm, jn = lat.reduce_coords(nxt, lattice)
        w = np.asarray(nw)
        sm = sm + jm
        sn = sn + jn
        raw = w + sm * r1 + sn * r2
        dev = np.abs(raw - (k / period) * drift - z0) / diam
        worst = np.maximum(worst, dev)
    return worst
