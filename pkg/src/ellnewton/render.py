"""Rasters of dynamical and parameter planes, with PPM/JSON/CSV encoders."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import hashlib
import json
import math
import os

import numpy as np

from . import dynamics as dyn
from . import lattice as lat
from . import newton as nwt
from .errors import IoFailure

PALETTE_VERSION = 1
WORKERS_ENV = "ELLNEWTON_WORKERS"
SIDECAR_SCHEMA = "ellnewton.raster/1"

# dynamical-plane palette, version 1
ROOT_BASES = (
    (255, 140, 0),
    (255, 196, 64),
    (214, 90, 16),
    (255, 112, 72),
    (232, 164, 32),
    (200, 120, 40),
)
DRIFT_BASES = (  # six drift-direction sectors, counterclockwise from arg = 0
    (40, 90, 230),
    (20, 60, 170),
    (70, 40, 200),
    (10, 40, 120),
    (30, 120, 200),
    (60, 70, 150),
)
LIGHT_BLUE = (150, 200, 255)
WHITE = (255, 255, 255)
BLACK = (0, 0, 0)

# parameter-plane classes
PARAM_CLASSES = ("Orange", "Blue", "LightBlue", "White", "Black")
PARAM_COLORS = ((255, 140, 0), (40, 90, 230), LIGHT_BLUE, WHITE, BLACK)


@dataclass(frozen=True)
class RasterConfig:
    center: complex
    width: float
    pixels_x: int
    pixels_y: int
    orbit_params: dyn.OrbitParams = field(default_factory=dyn.OrbitParams)
    palette_version: int = PALETTE_VERSION
    worker_hint: int = 0

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        for n in (self.pixels_x, self.pixels_y):
            if not (16 <= int(n) <= 8192):
                raise ValueError("pixel dimensions must lie in [16, 8192]")
        if not (self.width > 0 and math.isfinite(self.width)):
            raise ValueError("width must be positive")
        if self.palette_version != PALETTE_VERSION:
            raise ValueError(f"unsupported palette version {self.palette_version}")
        if self.worker_hint < 0:
            raise ValueError("worker_hint must be >= 0")

    @property
    def height(self):
        return self.width * self.pixels_y / self.pixels_x

    def pixel_centers(self):
        """Complex pixel centers, row-major, top row first."""
        nx, ny = self.pixels_x, self.pixels_y
        dx = self.width / nx
        xs = self.center.real - self.width / 2 + (np.arange(nx) + 0.5) * dx
        ys = self.center.imag + self.height / 2 - (np.arange(ny) + 0.5) * dx
        return xs[None, :] + 1j * ys[:, None]

    def to_json(self):
        return {
            "center": [self.center.real, self.center.imag],
            "width": self.width,
            "pixels_x": self.pixels_x,
            "pixels_y": self.pixels_y,
            "orbit_params": self.orbit_params.to_json(),
            "palette_version": self.palette_version,
        }


@dataclass
class Raster:
    config: RasterConfig
    cells: dyn.OrbitBatch
    lattice_snapshot: lat.Lattice
    map_snapshot: dict
    kind: str = "dynamical"  # or "parameter"
    pixel_class: np.ndarray = None  # parameter planes only
    checksum: str = ""

    def __post_init__(self):
        if len(self.cells) != self.config.pixels_x * self.config.pixels_y:
            raise ValueError("cell count does not match the raster size")
        self.checksum = cells_checksum(self.cells, self.pixel_class)

    @property
    def shape(self):
        return (self.config.pixels_y, self.config.pixels_x)

    def cell(self, row, col):
        return self.cells.outcome(row * self.config.pixels_x + col)

    def tag_grid(self):
        return self.cells.tag.reshape(self.shape)

    def class_counts(self):
        if self.kind == "parameter":
            counts = np.bincount(self.pixel_class, minlength=len(PARAM_CLASSES))
            return {name: int(counts[i]) for i, name in enumerate(PARAM_CLASSES)}
        counts = np.bincount(self.cells.tag, minlength=len(dyn.TAG_CODES))
        return {t.value: int(counts[c]) for t, c in dyn.TAG_CODES.items()}


def cells_checksum(cells, pixel_class=None):
    h = hashlib.sha256()
    for arr, dt in ((cells.tag, "<i1"), (cells.root_index, "<i2"), (cells.period, "<i2"),
                    (cells.drift_m, "<i8"), (cells.drift_n, "<i8"),
                    (cells.iterations, "<i4")):
        h.update(np.ascontiguousarray(arr, dtype=dt).tobytes())
    h.update(np.ascontiguousarray(cells.final.real, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(cells.final.imag, dtype="<f8").tobytes())
    if pixel_class is not None:
        h.update(np.ascontiguousarray(pixel_class, dtype="<i1").tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# parallel row bands


def resolve_workers(hint):
    if hint and hint > 0:
        return int(hint)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
            if n > 0:
                return n
        except ValueError:
            pass
    return os.cpu_count() or 1


def _bands(ny, workers):
    # a few bands per worker keeps the pool busy; boundaries depend only on ny
    nb = max(1, min(ny, 4 * workers))
    edges = [round(i * ny / nb) for i in range(nb + 1)]
    return [(edges[i], edges[i + 1]) for i in range(nb) if edges[i + 1] > edges[i]]


def _dyn_band(args):
    N, z, params = args
    return dyn.classify_orbits(N, z, params)


def _param_band(args):
    lattice, seeds, b, params = args
    return parameter_classes(lattice, b, params, seeds)


def parameter_classes(lattice, b, params=None, seeds=None):
    """Classify parameters ``b`` of ``wp + b``: ``(deciding orbits, class codes)``.

    Class codes index ``PARAM_CLASSES``.
    """
    seeds = parameter_seeds(lattice) if seeds is None else seeds
    b = np.asarray(b, dtype=np.complex128).ravel()
    # one orbit per (pixel, free critical point); seeds vary fastest
    k = len(seeds)
    z0 = np.tile(np.asarray(seeds, dtype=np.complex128), b.size)
    bb = np.repeat(b, k)
    batch = dyn.classify_orbits_wpb(lattice, z0, bb, params)
    return _combine_param(batch, k)


def _combine_param(batch, k):
    tags = batch.tag.reshape(-1, k)
    code = dyn.TAG_CODES
    drift = tags == code[dyn.Tag.DriftCycle]
    bound = tags == code[dyn.Tag.BoundCycle]
    prepole = tags == code[dyn.Tag.PrepoleHit]
    cls = np.full(tags.shape[0], 4, dtype=np.int8)
    cls = np.where(prepole.any(1), 3, cls)
    cls = np.where(bound.any(1) & ~drift.any(1), 2, cls)
    cls = np.where(drift.any(1), 1, cls)
    cls = np.where((tags == code[dyn.Tag.RootCapture]).all(1), 0, cls)
    # the deciding orbit: first critical orbit carrying the pixel's class tag
    want = np.select(
        [cls == 0, cls == 1, cls == 2, cls == 3],
        [code[dyn.Tag.RootCapture], code[dyn.Tag.DriftCycle], code[dyn.Tag.BoundCycle],
         code[dyn.Tag.PrepoleHit]],
        code[dyn.Tag.Unresolved],
    )
    pick = np.argmax(tags == want[:, None], axis=1)
    idx = np.arange(tags.shape[0]) * k + pick
    sub = dyn.OrbitBatch(*(getattr(batch, name)[idx] for name in
                           ("tag", "root_index", "period", "drift_m", "drift_n",
                            "iterations", "final")), lattice=batch.lattice)
    return sub, cls


def _run_bands(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def render_dynamical_plane(N, cfg):
    grid = cfg.pixel_centers()
    workers = resolve_workers(cfg.worker_hint)
    bands = _bands(cfg.pixels_y, workers)
    jobs = [(N, grid[r0:r1].ravel(), cfg.orbit_params) for r0, r1 in bands]
    parts = _run_bands(_dyn_band, jobs, workers)
    cells = dyn.OrbitBatch.concat(parts, N.lattice)
    return Raster(cfg, cells, N.lattice, N.to_json(), kind="dynamical")


def parameter_seeds(lattice):
    """Free critical points of ``wp + b``; they do not depend on ``b``."""
    N = nwt.wp_plus_b_map(lattice, 1.0 + 0.5j)
    return sorted((c.z for c in nwt.critical_set(N).free_points),
                  key=lambda z: (z.real, z.imag))


def default_parameter_window(lattice):
    """Window containing 0, all ``-e_i`` and the wandering parameters (if triangular)."""
    pts = [0j] + [-e for e in lat.critical_values(lattice).as_tuple()]
    if lat.is_triangular(lattice):
        pts += [c["b"] for c in nwt.wandering_candidates(lattice)]
    reach = max(abs(p) for p in pts)
    return 0j, 2.2 * reach


def render_parameter_plane(lattice, b_center, b_width, cfg):
    """Classify ``b`` pixels by the fate of the free critical orbits of ``wp + b``.

    ``b_center`` and ``b_width`` override the window in ``cfg``.
    """
    cfg = RasterConfig(b_center, b_width, cfg.pixels_x, cfg.pixels_y, cfg.orbit_params,
                       cfg.palette_version, cfg.worker_hint)
    seeds = parameter_seeds(lattice)
    grid = cfg.pixel_centers()
    workers = resolve_workers(cfg.worker_hint)
    bands = _bands(cfg.pixels_y, workers)
    jobs = [(lattice, seeds, grid[r0:r1].ravel(), cfg.orbit_params) for r0, r1 in bands]
    parts = _run_bands(_param_band, jobs, workers)
    cells = dyn.OrbitBatch.concat([p[0] for p in parts], lattice)
    cls = np.concatenate([p[1] for p in parts])
    snap = {
        "kind": "wp_plus_b_parameter_plane",
        "free_critical_points": [[z.real, z.imag] for z in seeds],
        "lattice": lattice.to_json(),
    }
    return Raster(cfg, cells, lattice, snap, kind="parameter", pixel_class=cls)


# ---------------------------------------------------------------------------
# colouring and encoders


def drift_sector(drift):
    ang = np.arctan2(drift.imag, drift.real)
    return (np.floor(ang / (2 * np.pi) * 6 + 0.5).astype(np.int64)) % 6


def colorize_cells(cells, kind="dynamical", pixel_class=None):
    """``(n, 3)`` uint8 colours following palette version 1."""
    if kind == "parameter":
        return np.array(PARAM_COLORS, dtype=np.uint8)[pixel_class]
    c = cells
    rgb = np.zeros((len(c), 3), dtype=np.int64)
    code = dyn.TAG_CODES
    m = c.tag == code[dyn.Tag.RootCapture]
    if np.any(m):
        base = np.array(ROOT_BASES)[np.maximum(c.root_index[m], 0) % len(ROOT_BASES)]
        lvl = np.minimum(c.iterations[m].astype(np.int64), 60) // 6
        rgb[m] = (base * (16 - lvl)[:, None]) // 16
    m = c.tag == code[dyn.Tag.DriftCycle]
    if np.any(m):
        base = np.array(DRIFT_BASES)[drift_sector(c.drift[m])]
        lvl = 2 * (np.minimum(c.period[m].astype(np.int64), 5) - 1)
        rgb[m] = (base * (16 - lvl)[:, None]) // 16
    rgb[c.tag == code[dyn.Tag.BoundCycle]] = LIGHT_BLUE
    rgb[c.tag == code[dyn.Tag.PrepoleHit]] = WHITE
    rgb[c.tag == code[dyn.Tag.Unresolved]] = BLACK
    return rgb.astype(np.uint8)


def colorize(r):
    """``(ny, nx, 3)`` uint8 image of a raster."""
    if r.config.palette_version != PALETTE_VERSION:
        raise ValueError(f"unsupported palette version {r.config.palette_version}")
    return colorize_cells(r.cells, r.kind, r.pixel_class).reshape(r.shape + (3,))


def ppm_from_rgb(rgb):
    """Binary P6 bytes for an ``(ny, nx, 3)`` uint8 array, top row first."""
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    ny, nx = rgb.shape[:2]
    return f"P6\n{nx} {ny}\n255\n".encode("ascii") + rgb.tobytes()


def ppm_bytes(r):
    return ppm_from_rgb(colorize(r))


def _write(path, data, mode):
    if not path:
        raise IoFailure("empty output path")
    try:
        with open(path, mode) as fh:
            fh.write(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def encode_image(r, path):
    _write(path, ppm_bytes(r), "wb")


def sidecar_dict(r):
    return {
        "schema": SIDECAR_SCHEMA,
        "kind": r.kind,
        "config": r.config.to_json(),
        "lattice": r.lattice_snapshot.to_json(),
        "map": r.map_snapshot,
        "palette_version": r.config.palette_version,
        "class_counts": r.class_counts(),
        "checksum": r.checksum,
    }


def encode_sidecar(r, path):
    _write(path, json.dumps(sidecar_dict(r), indent=2, sort_keys=True) + "\n", "w")


def csv_text(r):
    c = r.cells
    d = c.drift
    names = {v: k.value for k, v in dyn.TAG_CODES.items()}
    lines = ["tag,root_index,period,drift_re,drift_im,iters"]
    for i in range(len(c)):
        lines.append(
            f"{names[int(c.tag[i])]},{int(c.root_index[i])},{int(c.period[i])},"
            f"{float(d[i].real)!r},{float(d[i].imag)!r},{int(c.iterations[i])}"
        )
    return "\n".join(lines) + "\n"


def encode_csv(r, path):
    _write(path, csv_text(r), "w")
