import json
from pathlib import Path

import numpy as np
import pytest

from ellnewton import acceptance as ac
from ellnewton import dynamics as dyn
from ellnewton import lattice as lat
from ellnewton import newton as nw
from ellnewton import render as rd
from ellnewton.errors import IoFailure

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="module")
def wandering_map():
    L = ac.triangular_lattice()
    return nw.wp_plus_b_map(L, nw.wandering_parameter(L, L.gen1 + L.gen2))


@pytest.fixture(scope="module")
def small_raster(wandering_map):
    cfg = rd.RasterConfig(3 ** 0.5, 2.632, 16, 16, worker_hint=1)
    return rd.render_dynamical_plane(wandering_map, cfg)


def _batch(tags, root_index=None, iterations=None, period=None, dm=None, dn=None, lattice=None):
    n = len(tags)
    z = np.zeros(n, dtype=np.int64)
    return dyn.OrbitBatch(
        np.array(tags, dtype=np.int8),
        np.array(root_index if root_index is not None else [-1] * n, dtype=np.int16),
        np.array(period if period is not None else [0] * n, dtype=np.int16),
        np.array(dm, dtype=np.int64) if dm is not None else z,
        np.array(dn, dtype=np.int64) if dn is not None else z,
        np.array(iterations if iterations is not None else [0] * n, dtype=np.int32),
        np.zeros(n, dtype=np.complex128),
        lattice or lat.make_lattice(1, 1j),
    )


@pytest.mark.parametrize("kw", [
    dict(pixels_x=15), dict(pixels_y=8193), dict(width=0.0), dict(width=float("inf")),
    dict(palette_version=2), dict(worker_hint=-1),
])
def test_config_validation(kw):
    base = dict(center=0j, width=1.0, pixels_x=16, pixels_y=16)
    base.update(kw)
    with pytest.raises(ValueError):
        rd.RasterConfig(**base)


def test_pixel_centers():
    cfg = rd.RasterConfig(1 + 1j, 2.0, 16, 32)
    g = cfg.pixel_centers()
    assert g.shape == (32, 16)
    assert cfg.height == 4.0
    assert g[0, 0] == complex(1 - 1 + 1 / 16, 1 + 2 - 1 / 16)
    assert g[-1, -1] == complex(1 + 1 - 1 / 16, 1 - 2 + 1 / 16)
    assert abs(g.mean() - (1 + 1j)) < 1e-12


def test_two_pixel_ppm():
    cells = _batch([0, 4], root_index=[0, -1])
    rgb = rd.colorize_cells(cells).reshape(1, 2, 3)
    data = rd.ppm_from_rgb(rgb)
    assert data == b"P6\n2 1\n255\n" + bytes([255, 140, 0, 0, 0, 0])


def test_palette():
    L = lat.make_lattice(1, 1j)
    cells = _batch([0, 0, 1, 2, 3, 1], root_index=[1, 0, -1, -1, -1, -1],
                   iterations=[0, 60, 0, 0, 0, 0], period=[0, 0, 1, 2, 0, 9],
                   dm=[0, 0, 1, 0, 0, -1], dn=[0, 0, 0, 0, 0, 0], lattice=L)
    rgb = rd.colorize_cells(cells)
    assert tuple(rgb[0]) == rd.ROOT_BASES[1]
    assert tuple(rgb[1]) == tuple(np.array(rd.ROOT_BASES[0]) * 6 // 16)
    assert tuple(rgb[2]) == rd.DRIFT_BASES[0]
    assert tuple(rgb[3]) == rd.LIGHT_BLUE
    assert tuple(rgb[4]) == rd.WHITE
    assert tuple(rgb[5]) == tuple(np.array(rd.DRIFT_BASES[3]) * 8 // 16)


def test_drift_sectors():
    d = np.exp(1j * np.pi / 3 * np.arange(6))
    assert rd.drift_sector(d).tolist() == [0, 1, 2, 3, 4, 5]
    assert rd.drift_sector(np.array([np.exp(-0.1j)])).tolist() == [0]


def test_golden_ppm(small_raster):
    assert rd.ppm_bytes(small_raster) == (GOLDEN / "wandering_16x16.ppm").read_bytes()


def test_worker_count_does_not_change_output(wandering_map, small_raster):
    cfg = rd.RasterConfig(3 ** 0.5, 2.632, 16, 16, worker_hint=3)
    r = rd.render_dynamical_plane(wandering_map, cfg)
    assert r.checksum == small_raster.checksum
    assert rd.ppm_bytes(r) == rd.ppm_bytes(small_raster)


def test_bands_cover_rows():
    for ny in (16, 17, 100, 8192):
        for w in (1, 3, 8):
            bands = rd._bands(ny, w)
            assert bands[0][0] == 0 and bands[-1][1] == ny
            assert all(a[1] == b[0] for a, b in zip(bands, bands[1:]))


def test_workers_env(monkeypatch):
    monkeypatch.setenv(rd.WORKERS_ENV, "3")
    assert rd.resolve_workers(0) == 3
    assert rd.resolve_workers(2) == 2
    monkeypatch.setenv(rd.WORKERS_ENV, "junk")
    assert rd.resolve_workers(0) >= 1


def test_small_b_has_no_drift():
    L = ac.triangular_lattice()
    N = nw.wp_plus_b_map(L, 0.05)
    r = rd.render_dynamical_plane(N, rd.RasterConfig(0.3 + 0.2j, 2.0, 16, 16, worker_hint=1))
    assert r.class_counts()["DriftCycle"] == 0


def test_window_inside_a_basin_is_uniform():
    L = lat.make_lattice(1.0, 0.37 + 1.13j)
    N = nw.wp_plus_b_map(L, 1.0 + 0.5j)
    z, _ = N.zeros[0]
    cfg = rd.RasterConfig(z, 1e-3, 16, 16, worker_hint=1)
    r = rd.render_dynamical_plane(N, cfg)
    assert (r.cells.tag == 0).all()
    assert (r.cells.root_index == 0).all()


def test_translation_redundancy():
    L = lat.make_lattice(1.0, 1j)
    N = nw.wp_plus_b_map(L, 2.0 + 1.0j)
    a = rd.render_dynamical_plane(N, rd.RasterConfig(0.5 + 0.5j, 1.0, 32, 32, worker_hint=1))
    b = rd.render_dynamical_plane(N, rd.RasterConfig(1.5 + 0.5j, 1.0, 32, 32, worker_hint=1))
    assert np.array_equal(a.cells.tag, b.cells.tag)
    assert np.array_equal(a.cells.root_index, b.cells.root_index)
    assert np.array_equal(rd.colorize(a), rd.colorize(b))


def test_outputs_roundtrip(small_raster, tmp_path):
    img, side, csv = tmp_path / "a.ppm", tmp_path / "a.json", tmp_path / "a.csv"
    rd.encode_image(small_raster, str(img))
    rd.encode_sidecar(small_raster, str(side))
    rd.encode_csv(small_raster, str(csv))
    meta = json.loads(side.read_text())
    assert meta["schema"] == rd.SIDECAR_SCHEMA
    assert meta["checksum"] == small_raster.checksum
    assert sum(meta["class_counts"].values()) == 256
    assert meta["class_counts"] == small_raster.class_counts()
    lines = csv.read_text().splitlines()
    assert lines[0] == "tag,root_index,period,drift_re,drift_im,iters"
    assert len(lines) == 257
    counts = {}
    for row in lines[1:]:
        counts[row.split(",")[0]] = counts.get(row.split(",")[0], 0) + 1
    assert counts == {k: v for k, v in meta["class_counts"].items() if v}
    img2 = tmp_path / "b.ppm"
    rd.encode_image(small_raster, str(img2))
    assert img.read_bytes() == img2.read_bytes()
    assert img.read_bytes().startswith(b"P6\n16 16\n255\n")


def test_write_failures(small_raster, tmp_path):
    with pytest.raises(IoFailure):
        rd.encode_image(small_raster, "")
    with pytest.raises(IoFailure):
        rd.encode_sidecar(small_raster, str(tmp_path / "missing" / "x.json"))


def test_raster_size_mismatch(small_raster):
    with pytest.raises(ValueError):
        rd.Raster(rd.RasterConfig(0j, 1.0, 16, 17), small_raster.cells,
                  small_raster.lattice_snapshot, {})


def test_parameter_classes_at_known_points():
    L = ac.triangular_lattice()
    lam = L.gen1 + L.gen2
    bstar = nw.wandering_parameter(L, lam)
    minus_e = [-e for e in lat.critical_values(L).as_tuple()]
    ring = [bstar + 1e-3 * np.exp(2j * np.pi * k / 8) for k in range(8)]
    b = np.array([bstar, -11.68, 0.0, 0.3] + minus_e + ring)
    sub, cls = rd.parameter_classes(L, b)
    assert cls[0] == 1 and cls[1] == 1
    assert cls[2] == cls[3] == 0
    assert (cls[4:7] == 0).all()
    assert (cls[7:] == 1).all()
    assert sub.tag[0] == 1


def test_parameter_class_bound_cycle_on_square():
    L = lat.make_lattice(1.0, 1j)
    sub, cls = rd.parameter_classes(L, np.array([0.1, -lat.critical_values(L).e1]))
    assert cls.tolist() == [0, 2]
    assert sub.period[1] == 2


def test_parameter_plane_render():
    L = ac.triangular_lattice()
    center, width = rd.default_parameter_window(L)
    cfg = rd.RasterConfig(0j, 1.0, 16, 16, worker_hint=1)
    r = rd.render_parameter_plane(L, center, width, cfg)
    assert r.kind == "parameter"
    assert r.config.width == width
    counts = r.class_counts()
    assert sum(counts.values()) == 256
    assert counts["Orange"] > 0
    assert rd.colorize(r).shape == (16, 16, 3)
    assert len(r.map_snapshot["free_critical_points"]) == 2
