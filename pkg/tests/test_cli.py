import csv
import io
import json
import math

import pytest

from hnspectral import PartialSpectrum, Spectrum
from hnspectral.cli import dumps, main

from conftest import CONST2, LINEAR, ONE_POLE, Q0, Q1, ROBIN1, ZERO, eigenvalues_closed, spectrum_of


def _config(tmp_path, q, f, F, n_max, name="problem.json"):
    path = tmp_path / name
    path.write_text(json.dumps({"potential": q.to_dict(), "f": f.to_dict(), "F": F.to_dict(), "solver": {"n_max": n_max}}))
    return str(path)


def _spectrum_file(tmp_path, spectrum, name="spectrum.json"):
    path = tmp_path / name
    path.write_text(dumps(spectrum.to_dict()))
    return str(path)


def _run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# --- spectrum -------------------------------------------------------------------


def test_spectrum_neumann(tmp_path, capsys):
    code, out, _ = _run(["spectrum", _config(tmp_path, Q0, ZERO, ZERO, 4)], capsys)
    assert code == 0
    s = Spectrum.from_dict(json.loads(out))
    assert s.lambdas == pytest.approx([0.0, 1.0, 4.0, 9.0], abs=1e-9)
    assert s.gammas == pytest.approx([math.pi] + [math.pi / 2] * 3, rel=1e-9)
    assert [math.copysign(1, b) for b in s.betas] == [1, -1, 1, -1]


def test_spectrum_robin_matches_closed_form(tmp_path, capsys):
    code, out, _ = _run(["spectrum", _config(tmp_path, Q0, ROBIN1, CONST2, 10)], capsys)
    assert code == 0
    s = Spectrum.from_dict(json.loads(out))
    assert s.lambdas == pytest.approx(eigenvalues_closed(ROBIN1, CONST2, 10), abs=1e-8)


def test_n_max_zero_is_config_error(tmp_path, capsys):
    code, out, err = _run(["spectrum", _config(tmp_path, Q0, ZERO, ZERO, 4), "--n-max", "0"], capsys)
    assert code == 2
    assert "n_max must be ≥ 1" in err
    assert out == ""


def test_bad_config_files(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert _run(["spectrum", str(bad)], capsys)[0] == 2
    bad.write_text(json.dumps({"potential": {"type": "zero"}, "g": {}}))
    code, _, err = _run(["spectrum", str(bad)], capsys)
    assert code == 2 and "unknown config keys" in err
    bad.write_text(json.dumps({"f": {"h0": -1.0}}))
    assert _run(["spectrum", str(bad)], capsys)[0] == 2
    assert _run(["spectrum", str(tmp_path / "missing.json")], capsys)[0] == 2


def test_csv_output(tmp_path, capsys):
    out_path = tmp_path / "s.csv"
    code, _, _ = _run(["spectrum", _config(tmp_path, Q0, ZERO, ZERO, 3), "--format", "csv", "-o", str(out_path)], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out_path.read_text())))
    assert rows[0] == ["n", "lambda", "gamma", "beta", "chi_prime"]
    assert [float(r[1]) for r in rows[1:]] == pytest.approx([0.0, 1.0, 4.0], abs=1e-9)


def test_output_is_byte_identical(tmp_path, capsys):
    cfg = _config(tmp_path, Q1, ONE_POLE, ROBIN1, 20)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert _run(["spectrum", cfg, "-o", str(a)], capsys)[0] == 0
    assert _run(["spectrum", cfg, "-o", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_spectrum_round_trips_through_file(tmp_path, capsys):
    cfg = _config(tmp_path, Q1, ONE_POLE, ROBIN1, 10)
    saved = tmp_path / "saved.json"
    code, out, _ = _run(["spectrum", cfg, "--spectrum-out", str(saved)], capsys)
    assert code == 0
    code, again, _ = _run(["spectrum", "--spectrum-in", str(saved)], capsys)
    assert code == 0 and again == out


# --- verify ---------------------------------------------------------------------


@pytest.mark.parametrize("f", [ZERO, LINEAR])
def test_verify_passes_on_exact_data(tmp_path, capsys, f):
    s = spectrum_of(Q0, f, ZERO, 300)
    cfg = _config(tmp_path, Q0, f, ZERO, 300)
    code, out, err = _run(["verify", cfg, "--spectrum-in", _spectrum_file(tmp_path, s)], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["passed"] and report["max_residual"] < 1e-4
    assert "residual[0]" in err


def test_verify_fails_on_corrupted_data(tmp_path, capsys):
    d = spectrum_of(Q0, LINEAR, ZERO, 300).to_dict()
    d["data"][0]["gamma"] *= 2.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(d))
    code, out, _ = _run(["verify", _config(tmp_path, Q0, LINEAR, ZERO, 300), "--spectrum-in", str(path)], capsys)
    assert code == 1
    assert json.loads(out)["passed"] is False


# --- recover-bc -----------------------------------------------------------------


def test_recover_bc_constant(tmp_path, capsys):
    path = _spectrum_file(tmp_path, spectrum_of(Q0, CONST2, ZERO, 300))
    code, out, _ = _run(["recover-bc", "--spectrum-in", path, "--ind-f", "0"], capsys)
    assert code == 0
    assert json.loads(out)["f"]["h"] == pytest.approx(2.0, rel=1e-4)


def test_recover_bc_single_pole(tmp_path, capsys):
    path = _spectrum_file(tmp_path, spectrum_of(Q1, ONE_POLE, ROBIN1, 300))
    code, out, _ = _run(["recover-bc", "--spectrum-in", path, "--ind-f", "2"], capsys)
    assert code == 0
    pole = json.loads(out)["f"]["poles"][0]
    assert pole["hk"] == pytest.approx(2.0, rel=1e-3)
    assert pole["delta"] == pytest.approx(1.0, rel=1e-3)


def test_recover_bc_wrong_index(tmp_path, capsys):
    path = _spectrum_file(tmp_path, spectrum_of(Q0, CONST2, ZERO, 300))
    code, out, err = _run(["recover-bc", "--spectrum-in", path, "--ind-f", "2"], capsys)
    assert code == 4
    assert out == "" and "NotHerglotz" in err


# --- recover-missing --------------------------------------------------------------


def _partial_file(tmp_path, spectrum, delete):
    path = tmp_path / "partial.json"
    path.write_text(dumps(PartialSpectrum.from_spectrum(spectrum, delete).to_dict()))
    return str(path)


def test_recover_missing_gamma0(tmp_path, capsys):
    s = spectrum_of(Q0, CONST2, ROBIN1, 300)
    cfg = _config(tmp_path, Q0, CONST2, ROBIN1, 300)
    code, out, _ = _run(["recover-missing", cfg, _partial_file(tmp_path, s, {0: "gamma"})], capsys)
    assert code == 0
    rec = json.loads(out)["recovered"]
    assert len(rec) == 1 and rec[0]["n"] == 0
    assert rec[0]["gamma"] == pytest.approx(s.data[0].gamma_n, rel=1e-4)


def test_recover_missing_underdetermined_writes_nothing(tmp_path, capsys):
    s = spectrum_of(Q0, CONST2, ZERO, 300)
    cfg = _config(tmp_path, Q0, CONST2, ZERO, 300)
    target = tmp_path / "out.json"
    argv = ["recover-missing", cfg, _partial_file(tmp_path, s, {0: "both", 1: "both"}), "-o", str(target)]
    code, _, err = _run(argv, capsys)
    assert code == 5
    assert "underdetermined" in err
    assert not target.exists()
    assert [p.name for p in tmp_path.iterdir() if p.name.startswith(".tmp-")] == []


def test_recover_missing_nothing_missing_echoes_input(tmp_path, capsys):
    s = spectrum_of(Q1, LINEAR, ROBIN1, 300)
    cfg = _config(tmp_path, Q1, LINEAR, ROBIN1, 300)
    code, out, _ = _run(["recover-missing", cfg, _partial_file(tmp_path, s, {})], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["recovered"] == []
    assert Spectrum.from_dict(report["spectrum"]) == s


# --- selfcheck ------------------------------------------------------------------


def test_selfcheck(capsys):
    code, out, _ = _run(["selfcheck"], capsys)
    assert code == 0
    assert out.count("PASS") == 4 and "FAIL" not in out
