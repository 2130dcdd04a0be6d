import cmath
import json
import math
import subprocess
import sys

import pytest

from ellnewton import cli


def run(capsys, *argv):
    code = cli.run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("text,value", [
    ("1", 1), ("-2.5", -2.5), ("3i", 3j), ("1+2i", 1 + 2j), ("1-2j", 1 - 2j), ("i", 1j),
    ("-i", -1j), ("1e-3i", 1e-3j), ("2*i", 2j), ("exp:pi/6", cmath.exp(1j * math.pi / 6)),
    ("exp(i*pi/3)", cmath.exp(1j * math.pi / 3)), ("sqrt(3)", math.sqrt(3)),
    ("conj(1+i)", 1 - 1j), ("(1+i)/2", 0.5 + 0.5j), ("1.5e2", 150.0),
])
def test_complex_grammar(text, value):
    assert abs(cli.parse_complex(text) - value) < 1e-15


def test_grammar_names():
    assert cli.parse_complex("gen1+gen2", {"gen1": 1, "gen2": 1j}) == 1 + 1j


@pytest.mark.parametrize("text", ["", "1+", "foo", "__import__('os')", "1e999", "exp:i",
                                  "[1]", "1 if 1 else 2", "(1).real"])
def test_grammar_rejects(text):
    with pytest.raises(cli.UsageError):
        cli.parse_complex(text)


def test_coefficient_lists():
    assert cli.parse_coeffs("1, 2i,3") == (1, 2j, 3)
    assert cli.parse_coeffs("") == ()
    assert cli.parse_coeffs(None) is None


def test_lattice_info_default(capsys):
    code, out, _ = run(capsys, "lattice-info")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == "ellnewton.lattice-info/1"
    g2 = complex(*doc["lattice"]["g2"])
    assert abs(g2) < 1e-8


def test_lattice_info_half_periods(capsys):
    code, out, _ = run(capsys, "lattice-info", "--half-periods")
    g3 = complex(*json.loads(out)["lattice"]["g3"])
    assert code == 0 and abs(g3 + 12.8254) < 5e-3


def test_square_lattice_info(capsys):
    code, out, _ = run(capsys, "lattice-info", "--gen1", "1", "--gen2", "i")
    g2 = complex(*json.loads(out)["lattice"]["g2"])
    assert abs(g2 - 189.072720129234) < 1e-8


def test_eval(capsys):
    code, out, _ = run(capsys, "eval", "--z", "0.3+0.2i", "--b", "1")
    doc = json.loads(out)
    assert code == 0
    assert complex(*doc["f"]) == complex(*doc["wp"]) + 1
    assert doc["order"] == 2


def test_general_function(capsys):
    code, out, _ = run(capsys, "eval", "--z", "0.3+0.2i", "--P", "0.3,-1,0.5", "--S", "0.2")
    assert code == 0 and json.loads(out)["order"] == 4


def test_wandering_b(capsys):
    code, out, _ = run(capsys, "wandering-b", "--half-periods", "--target", "-11.68")
    doc = json.loads(out)
    assert code == 0
    best = doc["candidates"][0]
    assert abs(complex(*best["b"]) + 12.405828547598796) < 1e-9
    assert best["residual"] < 1e-9


def test_classify_snapshot(capsys):
    code, out, _ = run(capsys, "classify", "--b", "-11.68", "--z", "0.1+0.2i")
    doc = json.loads(out)
    assert code == 0
    assert doc["tag"] == "RootCapture"
    assert doc["root_index"] == 1 and doc["iterations"] == 7


@pytest.mark.parametrize("argv,code", [
    (["bogus"], 2),
    (["eval", "--z", "0.1"], 2),
    (["eval", "--z", "1+", "--b", "1"], 2),
    (["eval", "--z", "0", "--b", "1"], 1),
    (["lattice-info", "--gen1", "1", "--gen2", "2"], 1),
    (["render-dyn", "--b", "1", "--px", "8", "--out", "x.ppm"], 2),
    (["render-dyn", "--b", "1", "--out", ""], 2),
    (["classify", "--b", "1", "--z", "0.1", "--max-iter", "10"], 2),
    (["wandering-b", "--gen1", "1", "--gen2", "i"], 1),
])
def test_exit_codes(capsys, argv, code):
    got, out, err = run(capsys, *argv)
    assert got == code
    assert out == ""
    if code == 1:
        assert "error" in json.loads(err)


def test_strict_json_and_stable_stdout():
    cmd = [sys.executable, "-m", "ellnewton.cli", "classify", "--b", "1+0.5i", "--z", "0.2+0.3i"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b
    doc = json.loads(a, parse_constant=lambda s: pytest.fail(f"non-strict JSON {s}"))
    assert doc["schema"] == "ellnewton.classify/1"


def test_pretty_output(capsys):
    code, out, _ = run(capsys, "lattice-info", "--pretty")
    assert code == 0 and not out.startswith("{")


def test_render_dyn_files(capsys, tmp_path):
    out_ppm = tmp_path / "d.ppm"
    code, out, _ = run(capsys, "render-dyn", "--b", "1", "--px", "16", "--workers", "1",
                       "--out", str(out_ppm), "--sidecar", str(tmp_path / "d.json"),
                       "--csv", str(tmp_path / "d.csv"))
    assert code == 0
    doc = json.loads(out)
    assert out_ppm.read_bytes().startswith(b"P6\n16 16\n255\n")
    side = json.loads((tmp_path / "d.json").read_text())
    assert side["checksum"] == doc["checksum"]


def test_render_param_small(capsys, tmp_path):
    code, out, _ = run(capsys, "render-param", "--half-periods", "--px", "16", "--workers", "1",
                       "--max-iter", "200", "--out", str(tmp_path / "p.ppm"))
    assert code == 0
    assert sum(json.loads(out)["class_counts"].values()) == 256


def test_render_io_failure(capsys, tmp_path):
    code, _, err = run(capsys, "render-dyn", "--b", "1", "--px", "16", "--workers", "1",
                       "--out", str(tmp_path / "nope" / "x.ppm"))
    assert code == 1 and json.loads(err)["error"] == "IoFailure"


def test_verify_filter(capsys):
    code, out, err = run(capsys, "verify", "--filter", "weierstrass")
    doc = json.loads(out)
    assert code == 0
    assert [r["id"] for r in doc["results"]] == [3, 4, 5]
    assert all(r["passed"] for r in doc["results"])
    assert "criterion  3" in err


def test_generator_names_follow_half_periods(capsys):
    code, out, _ = run(capsys, "wandering-b", "--half-periods", "--lambda", "gen1+gen2")
    doc = json.loads(out)
    assert code == 0
    assert abs(complex(*doc["lambda"]) - 2 * math.sqrt(3)) < 1e-12
    assert abs(complex(*doc["b"]) + 12.405828547598796) < 1e-9
