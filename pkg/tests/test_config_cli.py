import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import oracles as o
import synthetic as syn
from nanopan.cli import _workers, main, run_sweep
from nanopan.config import ConfigError, RunConfig
from nanopan.purcell import zpl_purcell
from nanopan.spectra import read_xy_csv, write_xy_csv

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


# ---------------------------------------------------------------- config


@pytest.mark.parametrize("name", ["nanopan900.yaml", "pec.yaml", "ple.yaml"])
def test_shipped_configs_round_trip(name):
    cfg = RunConfig.load(CONFIGS / name)
    again = RunConfig.from_yaml(cfg.to_yaml())
    assert again.to_dict() == cfg.to_dict()
    assert again.to_yaml() == cfg.to_yaml()


def test_defaults():
    cfg = RunConfig.from_dict({})
    sol = cfg.solver()
    assert sol["h"] == pytest.approx(5e-9) and sol["m"] == [6]
    assert cfg.geometry().disk_diameter == pytest.approx(900e-9)
    assert cfg.material("silver").drude_params.gamma == pytest.approx(3.2e13)


def test_device_config_values():
    cfg = RunConfig.load(CONFIGS / "nanopan900.yaml")
    assert cfg.material("silver").drude_params.gamma == pytest.approx(3.2e12)
    assert cfg.material("silver").drude_params.omega_p == 1.4e16
    assert cfg.sweep_diameters_nm() == [600 + 50 * i for i in range(9)]
    assert cfg.sweep_orders() == [6]
    assert cfg.spin_params().gamma_rad == pytest.approx(1 / 2.7e-9)
    assert cfg.dipoles()[0].orientation == (0.0, 0.0, 1.0)


@pytest.mark.parametrize("text", [
    "geometry:\n  diameter_nm: 900\n",
    "solvr:\n  h_nm: 5\n",
    "geometry:\n  disk_material: gold\n",
    "materials:\n  sic:\n    kind: constant\n    index: 2.6\n    eps: 6.76\n",
    "solver:\n  h_nm: -5\n",
    "sweep:\n  diameter_start_nm: 1000\n  diameter_stop_nm: 600\n",
    "spin:\n  n_points: 3\n",
    "geometry: [1, 2\n",
    "dipoles:\n  - r_nm: 10\n    z_nm: 0\n    orientation: [0, 0, 0]\n",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        RunConfig.from_yaml(text)


def test_float_resolver():
    cfg = RunConfig.from_yaml("solver:\n  pml_reflection: 1e-6\n")
    assert cfg.solver()["pml"].reflection == 1e-6


def test_workers_precedence(monkeypatch):
    cfg = RunConfig.from_yaml("sweep:\n  workers: 3\n")
    monkeypatch.delenv("NANOPAN_WORKERS", raising=False)
    assert _workers(cfg) == 3
    monkeypatch.setenv("NANOPAN_WORKERS", "5")
    assert _workers(cfg) == 5
    monkeypatch.setenv("NANOPAN_WORKERS", "zero")
    with pytest.raises(ConfigError):
        _workers(cfg)
    monkeypatch.delenv("NANOPAN_WORKERS")
    assert _workers(RunConfig.from_dict({})) >= 1


# ---------------------------------------------------------------- modes


def test_modes_pec_oracle(capsys, tmp_path):
    cfg = write(tmp_path, "pec.yaml", (CONFIGS / "pec.yaml").read_text())
    code, out, _ = run(capsys, "modes", cfg, "--field-dir", tmp_path / "fields")
    assert code == 0
    rec = json.loads(out)[0]
    f = 299792458.0 / rec["lambda_res_m"]
    assert f == pytest.approx(o.F_TM010, rel=0.01)
    assert rec["Q"] is None and rec["polarization"] == "TM-like"
    files = list((tmp_path / "fields").iterdir())
    assert [p.name for p in files] == ["mode_m0_0_rz.csv"]


def test_modes_device_config(capsys):
    code, out, _ = run(capsys, "modes", CONFIGS / "nanopan900.yaml")
    assert code == 0
    recs = json.loads(out)
    assert any(r["polarization"] == "TM-like" and 850e-9 <= r["lambda_res_m"] <= 875e-9
               for r in recs)


def test_modes_malformed_config(capsys, tmp_path):
    cfg = write(tmp_path, "bad.yaml", "geometry:\n  bogus: 1\n")
    out_dir = tmp_path / "fields"
    code, _, err = run(capsys, "modes", cfg, "--field-dir", out_dir, "-o", tmp_path / "o.json")
    assert code == 1
    assert "bogus" in err
    assert sorted(p.name for p in tmp_path.iterdir()) == ["bad.yaml"]


def test_modes_missing_config(capsys, tmp_path):
    assert run(capsys, "modes", tmp_path / "absent.yaml")[0] == 1


def test_modes_no_mode_exit_2(capsys, tmp_path):
    # grid coarser than the axis rule allows for every order: nothing solves
    cfg = write(tmp_path, "pec.yaml",
                (CONFIGS / "pec.yaml").read_text().replace("h_nm: 5", "h_nm: 50"))
    assert run(capsys, "modes", cfg)[0] == 2


# ---------------------------------------------------------------- sweep


@pytest.fixture(scope="module")
def coarse_sweep_rows():
    cfg = RunConfig.load(CONFIGS / "nanopan900.yaml")
    data = cfg.to_dict()
    data["solver"]["h_nm"] = 10.0
    return run_sweep(RunConfig.from_dict(data), workers=2)


def test_sweep_monotone(coarse_sweep_rows):
    rows = coarse_sweep_rows
    assert len(rows) >= 9
    dia = [r["diameter_m"] for r in rows]
    assert dia == sorted(dia)
    lam = [r["lambda_res_m"] for r in rows]
    assert np.all(np.diff(lam) > 0)


def test_sweep_resonant_diameter_wins():
    # at equal xi the diameter resonant with the ZPL has the largest F_zpl
    lam_zpl = 861e-9
    lam_res = np.array([840e-9, 852e-9, 861.3e-9, 870e-9, 885e-9])
    f = zpl_purcell(300.0, 0.5, 400.0, lam_zpl, lam_res)
    best = int(np.argmin(abs(lam_res - lam_zpl)))
    assert abs(lam_res[best] - lam_zpl) <= 0.5e-9
    assert all(f[best] > f[i] for i in range(len(f)) if i != best)


def test_sweep_cli_deterministic(capsys, tmp_path, monkeypatch):
    text = (CONFIGS / "nanopan900.yaml").read_text().replace("h_nm: 5", "h_nm: 10")
    text = text.replace("diameter_start_nm: 600", "diameter_start_nm: 850")
    text = text.replace("diameter_stop_nm: 1000", "diameter_stop_nm: 900")
    cfg = write(tmp_path, "sweep.yaml", text)
    monkeypatch.setenv("NANOPAN_WORKERS", "2")
    assert run(capsys, "sweep", cfg, "-o", tmp_path / "a.csv")[0] == 0
    assert run(capsys, "sweep", cfg, "--workers", "1", "-o", tmp_path / "b.csv")[0] == 0
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()
    rows = list(csv.DictReader(io.StringIO(a.decode())))
    assert list(rows[0]) == ["diameter_m", "m", "lambda_res_m", "Q", "Vmode_m3", "xi", "F_zpl"]
    assert [float(r["diameter_m"]) for r in rows] == [850e-9, 900e-9]


def test_sweep_requires_section(capsys, tmp_path):
    cfg = write(tmp_path, "pec.yaml", (CONFIGS / "pec.yaml").read_text())
    assert run(capsys, "sweep", cfg)[0] == 1


# ---------------------------------------------------------------- fit


def test_fit_q700(capsys, tmp_path):
    s = syn.cavity_peak(700, 862.0e-9, 0)
    path = tmp_path / "peak.csv"
    path.write_text(write_xy_csv(s))
    code, out, _ = run(capsys, "fit", path, "--model", "lorentzian1")
    assert code == 0
    rep = json.loads(out)
    assert rep["peaks"][0]["Q"] == pytest.approx(700, rel=0.02)


def test_fit_decay(capsys, tmp_path):
    tr = syn.decay(2.7e-9, 0)
    path = tmp_path / "decay.csv"
    path.write_text(write_xy_csv(tr))
    code, out, _ = run(capsys, "fit", path, "--model", "expdecay")
    assert code == 0
    rep = json.loads(out)
    assert abs(rep["tau_s"] - 2.7e-9) <= 3 * rep["tau_err_s"]
    assert rep["tau_err_s"] < 0.05 * 2.7e-9


def test_fit_double(capsys, tmp_path):
    path = tmp_path / "ple.csv"
    path.write_text(write_xy_csv(syn.ple_pair(1, n=401), unit="mhz"))
    code, out, _ = run(capsys, "fit", path, "--model", "lorentzian2")
    assert code == 0
    c = [p["center"] for p in json.loads(out)["peaks"]]
    assert c[1] - c[0] == pytest.approx(0.998e9, abs=5e6)


@pytest.mark.parametrize("text", ["", "wavelength_nm,counts\n", "junk\n1,2\n"])
def test_fit_bad_files(capsys, tmp_path, text):
    path = write(tmp_path, "f.csv", text)
    assert run(capsys, "fit", path, "--model", "lorentzian1")[0] == 1


def test_fit_model_axis_mismatch(capsys, tmp_path):
    path = tmp_path / "decay.csv"
    path.write_text(write_xy_csv(syn.decay(2.7e-9, None)))
    assert run(capsys, "fit", path, "--model", "lorentzian1")[0] == 1


def test_fit_failure_exit_2(capsys, tmp_path):
    t = np.linspace(0, 1e-8, 50)
    path = tmp_path / "flat.csv"
    from nanopan.spectra import TimeTrace

    path.write_text(write_xy_csv(TimeTrace(t, np.full(50, 3.0))))
    assert run(capsys, "fit", path, "--model", "expdecay")[0] == 2


def test_fit_missing_file(capsys, tmp_path):
    assert run(capsys, "fit", tmp_path / "nope.csv", "--model", "expdecay")[0] == 1


# ---------------------------------------------------------------- ple


def test_ple_on_off(capsys, tmp_path):
    cfg = CONFIGS / "ple.yaml"
    code, out, _ = run(capsys, "ple", cfg, "--mw", "on", "--out-dir", tmp_path)
    assert code == 0
    on = json.loads(out)
    code, out, _ = run(capsys, "ple", cfg, "--mw", "off", "--out-dir", tmp_path)
    assert code == 0
    off = json.loads(out)
    assert off["peak_signal"] <= 0.05 * on["peak_signal"]
    spectrum = read_xy_csv(tmp_path / "ple_mw_on.csv")
    step = float(np.diff(spectrum.x).max())
    assert abs(on["fit"]["separation_Hz"] - 0.998e9) <= step
    assert (tmp_path / "ple_mw_off.csv").exists()


def test_ple_byte_identical(capsys, tmp_path):
    cfg = CONFIGS / "ple.yaml"
    for sub in ("a", "b"):
        assert run(capsys, "ple", cfg, "--out-dir", tmp_path / sub)[0] == 0
    assert (tmp_path / "a" / "ple_mw_on.csv").read_bytes() == \
        (tmp_path / "b" / "ple_mw_on.csv").read_bytes()


def test_ple_tuned(capsys, tmp_path):
    code, out, _ = run(capsys, "ple", CONFIGS / "nanopan900.yaml", "--out-dir", tmp_path)
    assert code == 0
    a1 = json.loads(out)["fit"]["peaks"][0]
    assert a1["fwhm_Hz"] == pytest.approx(130e6, abs=0.1e6)
    assert a1["spectral_diffusion_Hz"] == pytest.approx(87e6, abs=1e6)


def test_ple_needs_spin(capsys, tmp_path):
    assert run(capsys, "ple", CONFIGS / "pec.yaml", "--out-dir", tmp_path)[0] == 1


# ---------------------------------------------------------------- purcell


def test_purcell_lifetime(capsys):
    code, out, _ = run(capsys, "purcell", "--tau0-ns", 6.8, "--eta", 0.038,
                       "--tau-on-ns", 2.7, "--tau-off-ns", 9.72)
    assert code == 0
    assert json.loads(out)["F_lifetime"] == pytest.approx(47.8, abs=0.1)


def test_purcell_intensity(capsys):
    code, out, _ = run(capsys, "purcell", "--i-on", 33, "--i-off", 1)
    assert json.loads(out)["F_intensity"] == 32


def test_purcell_cavity(capsys):
    code, out, _ = run(capsys, "purcell", "--q", 2000, "--vmode-norm", 0.45, "--xi", 1)
    rep = json.loads(out)
    assert rep["F_max"] == pytest.approx(337.7, abs=0.05)
    assert rep["F_zpl"] == pytest.approx(rep["F_max"])
    lam = 861e-9 / 2.6
    code, out, _ = run(capsys, "purcell", "--q", 2000, "--vmode-um3", 0.45 * lam**3 * 1e18)
    assert json.loads(out)["F_max"] == pytest.approx(337.7, abs=0.05)


@pytest.mark.parametrize("argv", [
    [], ["--q", "2000"], ["--q", "2000", "--vmode-norm", "1", "--vmode-um3", "1"],
    ["--i-on", "3"], ["--tau0-ns", "6.8"], ["--i-on", "3", "--i-off", "0"],
    ["--q", "0.5", "--vmode-norm", "1"],
])
def test_purcell_incomplete(capsys, argv):
    assert run(capsys, "purcell", *argv)[0] == 1


def test_purcell_output_file(capsys, tmp_path):
    out = tmp_path / "r.json"
    assert run(capsys, "purcell", "--i-on", 13, "--i-off", 1, "-o", out)[0] == 0
    assert json.loads(out.read_text())["F_intensity"] == 12


# ---------------------------------------------------------------- entry points


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "nanopan", "purcell", "--i-on", "33",
                          "--i-off", "1"], capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert json.loads(res.stdout)["F_intensity"] == 32


def test_usage_errors(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["--help"]) == 0
    capsys.readouterr()
