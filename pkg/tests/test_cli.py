import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from otfs_lab.cli import main
from otfs_lab.maps import read_map_binary, read_map_csv
from otfs_lab.modem import load_frame_csv
from otfs_lab.params import load_params

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.mark.parametrize("preset", ["isi-regime", "ici-regime"])
def test_limits_golden(capsys, preset):
    code, out, _ = run(capsys, "limits", "--params", preset)
    assert code == 0
    assert out == (GOLDEN / f"limits_{preset}.csv").read_text()


def test_limits_values(capsys):
    _, out, _ = run(capsys, "limits", "--params", "isi-regime")
    table = {r["quantity"]: float(r["value"]) for r in rows(out)}
    for key, ref in [("max_range", 192), ("max_range_isi", 1152), ("max_velocity", 976.6)]:
        assert table[key] == pytest.approx(ref, rel=1e-3)
    _, out, _ = run(capsys, "limits", "--params", "ici-regime")
    table = {r["quantity"]: float(r["value"]) for r in rows(out)}
    assert table["max_range"] == pytest.approx(3072, rel=1e-3)
    assert table["max_velocity"] == pytest.approx(61, rel=1e-3)
    assert table["velocity_resolution"] == pytest.approx(15.3, abs=0.06)


def test_limits_malformed_file(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "carrier_hz": 6e10,\n  "n_symbols": 64,,\n}')
    out_path = tmp_path / "table.csv"
    code, out, err = run(capsys, "limits", "--params", str(bad), "--out", str(out_path))
    assert code != 0 and out == "" and not out_path.exists()
    assert "line 3" in err
    bad.write_text(json.dumps(load_params("isi-regime").to_config() | {"n_subcarriers": -4}))
    code, out, err = run(capsys, "limits", "--params", str(bad))
    assert code != 0 and out == "" and "n_subcarriers" in err


def _local_maxima_above(table, axis):
    a = np.array([float(r[axis]) for r in table])
    v = np.array([float(r["statistic_db"]) for r in table])
    t = np.array([float(r["threshold_db"]) for r in table])
    idx = [i for i in range(1, len(v) - 1) if v[i] > v[i - 1] and v[i] > v[i + 1] and v[i] > t[i]]
    return a[idx]


def test_profile_glrt_range_shows_four_targets(capsys):
    code, out, _ = run(capsys, "profile", "--scenario", "isi-a", "--method", "glrt", "--axis", "range", "--at", "20", "--seed", "0")
    assert code == 0
    table = rows(out)
    assert list(table[0]) == ["range_m", "statistic_db", "threshold_db"]
    peaks = _local_maxima_above(table, "range_m")
    assert len(peaks) == 4
    np.testing.assert_allclose(np.sort(peaks), [50, 120, 242, 312], atol=3.0)


def test_profile_fft_range_is_folded(capsys):
    _, out, _ = run(capsys, "profile", "--scenario", "isi-a", "--method", "fft2d", "--axis", "range", "--at", "20", "--seed", "0")
    table = rows(out)
    r = np.array([float(x["range_m"]) for x in table])
    v = np.array([float(x["statistic_db"]) for x in table])
    assert r.max() < 192
    assert r[np.argmax(v)] < 192


def test_profile_velocity_axis(capsys):
    code, out, _ = run(capsys, "profile", "--scenario", "ici-a", "--axis", "velocity", "--at", "120", "--seed", "1")
    assert code == 0
    peaks = _local_maxima_above(rows(out), "velocity_mps")
    for v in (20, -35, 142, 87):
        assert np.min(np.abs(peaks - v)) < 15.3


def test_profile_empty_scene_rarely_crosses(capsys, tmp_path):
    cfg = json.loads((Path(__file__).parents[1] / "src/otfs_lab/data/scenarios/isi-a.json").read_text())
    cfg["targets"] = []
    path = tmp_path / "empty.json"
    path.write_text(json.dumps(cfg))
    crossings = cells = 0
    for seed in range(5):
        _, out, _ = run(capsys, "profile", "--scenario", str(path), "--axis", "range", "--at", "20", "--seed", str(seed))
        t = rows(out)
        crossings += sum(float(r["statistic_db"]) > float(r["threshold_db"]) for r in t)
        cells += len(t)
    assert crossings <= 3  # expected ~ P_fa * cells = 0.2


def test_profile_slice_outside_grid(capsys):
    code, out, err = run(capsys, "profile", "--scenario", "isi-a", "--axis", "velocity", "--at", "5000")
    assert code != 0 and out == ""
    assert "range" in err or "outside" in err


def test_mc_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["mc", "--scenario", "isi-a", "--trials", "0"])
    assert exc.value.code == 2
    assert "--trials" in capsys.readouterr().err


def test_mc_golden_and_provenance(tmp_path):
    out = tmp_path / "m.csv"
    assert main(["mc", "--scenario", "isi-a", "--method", "fft2d", "--trials", "3", "--snr", "10", "25", "--seed", "11", "--out", str(out)]) == 0
    assert out.read_text() == (GOLDEN / "mc_isi-a_fft2d.csv").read_text()
    prov = json.loads(Path(str(out) + ".provenance.json").read_text())
    assert prov["root_seed"] == 11 and prov["association"] == "folded"
    assert len(prov["config_hash"]) == 16 and prov["code_version"]
    again = tmp_path / "again.csv"
    main(["mc", "--scenario", "isi-a", "--method", "fft2d", "--trials", "3", "--snr", "10", "25", "--seed", "11", "--out", str(again)])
    assert again.read_bytes() == out.read_bytes()


def test_mc_default_snr_row(capsys):
    code, out, _ = run(capsys, "mc", "--scenario", "isi-a", "--method", "fft2d", "--trials", "2", "--assoc", "unambiguous")
    assert code == 0
    t = rows(out)
    assert len(t) == 1 and t[0]["snr_db"] == "10" and t[0]["n_trials"] == "2"


def test_calibrate_cfar_one_percent(capsys):
    code, out, _ = run(capsys, "calibrate-cfar", "--pfa", "1e-2", "--cells", "1000000", "--doppler-bins", "4096")
    rep = json.loads(out)
    assert code == 0 and rep["n_cells"] >= 10**6
    assert 0.5e-2 <= rep["empirical_rate"] <= 2e-2
    assert rep["wilson_low"] <= rep["empirical_rate"] <= rep["wilson_high"]


def test_calibrate_cfar_half(capsys):
    _, out, _ = run(capsys, "calibrate-cfar", "--pfa", "0.5", "--cells", "200000", "--doppler-bins", "512")
    assert json.loads(out)["empirical_rate"] == pytest.approx(0.5, rel=0.1)


@pytest.mark.slow
def test_calibrate_cfar_operating_point(capsys):
    _, out, _ = run(capsys, "calibrate-cfar", "--pfa", "1e-4", "--cells", "10000000", "--doppler-bins", "4096")
    rep = json.loads(out)
    assert rep["wilson_low"] <= 1e-4 <= rep["wilson_high"]


def test_calibrate_cfar_bad_pfa():
    with pytest.raises(SystemExit):
        main(["calibrate-cfar", "--pfa", "1.5"])


def test_dump_outputs(tmp_path):
    p = load_params("isi-regime")
    f = tmp_path / "frame.csv"
    assert main(["dump", "--scenario", "isi-a", "--what", "frame-csv", "--out", str(f)]) == 0
    assert load_frame_csv(p, f).x_dd.shape == (64, 64)
    m = tmp_path / "map.csv"
    main(["dump", "--scenario", "isi-a", "--what", "map-csv", "--out", str(m)])
    assert m.read_text().splitlines()[0] == "delay_bin,doppler_bin,value"
    mb = tmp_path / "map.bin"
    main(["dump", "--scenario", "isi-a", "--what", "map-bin", "--out", str(mb)])
    np.testing.assert_allclose(read_map_binary(mb, 385), read_map_csv(m), rtol=1e-12)
    b = tmp_path / "b.csv"
    main(["dump", "--scenario", "isi-a", "--what", "steering-b", "--delay", "2e-8", "--out", str(b)])
    vec = np.loadtxt(b, delimiter=",")
    assert vec.shape == (4096, 2) and np.allclose(np.hypot(vec[:, 0], vec[:, 1]), 1)
    with pytest.raises(SystemExit):
        main(["dump", "--scenario", "isi-a", "--what", "steering-c", "--out", str(b)])
