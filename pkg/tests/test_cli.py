import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from radreact.cli import build_parser, main


def read_csv(path):
    with open(path) as fh:
        header = fh.readline()
        rows = list(csv.reader(fh))
    return header, rows[0], np.array(rows[1:], dtype=float)


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def test_sweep_two_points(tmp_path, capsys):
    assert run(tmp_path, "sweep", "--points", "2") == 0
    header, cols, data = read_csv(tmp_path / "sweep.csv")
    assert header.startswith("# radreact sweep; units: ") and "config_sha256=" in header
    assert cols == ["omega", "re_alpha_ald", "im_alpha_ald", "re_alpha_fo", "im_alpha_fo", "rel_diff"]
    assert data.shape == (2, 6)
    assert data[0, 0] == 1e13 and data[-1, 0] == 1e18
    assert json.loads(capsys.readouterr().out)["rows"] == 2


def test_sweep_default_matches_below_10_omega0(tmp_path):
    assert run(tmp_path, "sweep") == 0
    _, _, data = read_csv(tmp_path / "sweep.csv")
    assert data.shape == (2000, 6)
    low = data[:, 0] <= 10 * 2.45e15
    assert np.max(data[low, 5]) <= 1e-6


def test_sweep_reaching_high_band_diverges(tmp_path):
    assert run(tmp_path, "sweep", "--grid-max", "1e23", "--points", "400") == 0
    _, _, data = read_csv(tmp_path / "sweep.csv")
    assert np.max(data[:, 5]) > 0.1


def test_determinism_and_threads(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["sweep", "--out", str(a), "--threads", "1"]) == 0
    assert main(["sweep", "--out", str(b), "--threads", "1"]) == 0
    assert main(["sweep", "--out", str(c), "--threads", "4"]) == 0
    one = (a / "sweep.csv").read_bytes()
    assert one == (b / "sweep.csv").read_bytes()
    # the thread count is part of neither the hash nor the values
    assert one == (c / "sweep.csv").read_bytes()


def test_flags_before_or_after_subcommand(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--preset", "electron-cgs", "--out", str(a), "sweep", "--points", "3"]) == 0
    assert main(["sweep", "--points", "3", "--preset", "electron-cgs", "--out", str(b)]) == 0
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()


def test_out_csv_file(tmp_path):
    target = tmp_path / "deep" / "x.csv"
    assert main(["sweep", "--points", "2", "--out", str(target)]) == 0
    assert target.exists()


def test_verify_default(tmp_path, capsys):
    assert run(tmp_path, "verify") == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["verdict"] == "pass"
    assert summary["checks"]["fo"] == {"optical": True, "crossing": True, "causal": True, "kk": True}
    assert summary["checks"]["ald"]["causal"] is False
    assert summary["checks"]["ald"]["optical"] and summary["checks"]["ald"]["crossing"]
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["models"]["ald"]["failed"] == ["causal"]
    assert report["models"]["fo"]["kk_high_band_diagnostic"]["max_relative_error"] < 1e-3
    assert report["models"]["ald"]["kk_high_band_diagnostic"]["max_relative_error"] > 0.1
    _, cols, data = read_csv(tmp_path / "scattering_fo.csv")
    assert cols[-1] == "residual" and np.max(data[:, -1]) <= 1e-12


def test_verify_single_model(tmp_path):
    assert run(tmp_path, "verify", "--model", "fo") == 0
    report = json.loads((tmp_path / "verify.json").read_text())
    assert list(report["models"]) == ["fo"]
    assert not (tmp_path / "scattering_ald.csv").exists()


def test_verify_crossing_defect(tmp_path):
    assert run(tmp_path, "verify", "--model", "fo", "--crossing-defect", "1e-6") == 1
    report = json.loads((tmp_path / "verify.json").read_text())
    assert "crossing" in report["models"]["fo"]["failed"]


def test_poles(tmp_path, capsys):
    assert run(tmp_path, "poles", "--model", "ald") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["causal"] is False
    assert sum(1 for r in payload["roots"] if r["half_plane"] == "upper") == 1
    assert run(tmp_path, "poles", "--model", "general", "--form-cutoff", "1e22") == 0
    assert json.loads(capsys.readouterr().out)["causal"] is True
    assert (tmp_path / "poles_general.json").exists()


def test_kk(tmp_path, capsys):
    assert run(tmp_path, "kk") == 0
    out = json.loads(capsys.readouterr().out)
    assert out["max_relative_error"] <= 1e-3
    _, cols, data = read_csv(tmp_path / "kk_fo.csv")
    assert cols == ["omega", "re_direct", "re_reconstructed", "rel_err"]
    assert np.all(np.isfinite(data))


@pytest.mark.parametrize(
    "extra, aux",
    [
        (["--model", "fo", "--force", "step", "--t-on", "1e-15"], "y"),
        (["--model", "fo", "--force", "sin", "--omega", "3e15", "--t-end", "1e-14"], "y"),
        (["--model", "ald", "--force", "zero", "--a0", "1", "--omega0", "0"], "A"),
        (["--model", "ald-nonrunaway", "--force", "step", "--omega0", "0", "--t-start=-5e-23"], "A"),
    ],
)
def test_timedomain(tmp_path, capsys, extra, aux):
    assert run(tmp_path, "timedomain", *extra) == 0
    _, cols, data = read_csv(tmp_path / "timedomain.csv")
    assert cols == ["t", "R", "V", aux]
    side = json.loads((tmp_path / "timedomain.json").read_text())
    assert side["steps"] == data.shape[0] - 1
    if extra[1] == "ald":
        assert side["verdict"]["runaway"] is True
    if extra[1] == "fo":
        assert side["verdict"]["runaway"] is False
        if "--t-on" in extra:
            assert np.all(data[data[:, 0] < 1e-15, 1] == 0.0)


def test_figure1(tmp_path, capsys):
    assert run(tmp_path, "figure1", "--points", "50", "--inset-points", "60") == 0
    meta = json.loads((tmp_path / "figure1.json").read_text())
    _, cols, main_band = read_csv(tmp_path / "figure1_main.csv")
    _, _, inset = read_csv(tmp_path / "figure1_inset.csv")
    assert cols[1] == "re_e2alpha_ald"
    assert main_band.shape == (50, 6) and inset.shape == (60, 6)
    assert np.all(np.isfinite(main_band)) and np.all(np.isfinite(inset))
    assert np.max(main_band[:, 5]) <= 1e-6
    assert np.max(inset[:, 5]) > 1e-2
    assert inset[-1, 0] == pytest.approx(1e24)
    assert meta["convention"] == "e2alpha"


def test_figure1_ealpha_convention(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["figure1", "--points", "5", "--inset-points", "5", "--out", str(a)]) == 0
    assert main(["figure1", "--points", "5", "--inset-points", "5", "--convention", "ealpha", "--out", str(b)]) == 0
    _, cols, e2 = read_csv(a / "figure1_main.csv")
    _, cols_e, e1 = read_csv(b / "figure1_main.csv")
    assert cols_e[1] == "re_ealpha_ald"
    np.testing.assert_allclose(e2[:, 1], e1[:, 1] * 4.80320e-10, rtol=1e-14)


def test_omega0_hz(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    f = 2.45e15 / (2 * np.pi)
    assert main(["sweep", "--points", "3", "--omega0-units", "hz", "--omega0", repr(f), "--out", str(a)]) == 0
    assert main(["sweep", "--points", "3", "--out", str(b)]) == 0
    _, _, x = read_csv(a / "sweep.csv")
    _, _, y = read_csv(b / "sweep.csv")
    np.testing.assert_allclose(x, y, rtol=1e-14)


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("preset = electron-cgs\npoints = 4\nomega0 = 3e15\n")
    assert run(tmp_path, "sweep", "--config", str(cfg)) == 0
    _, _, data = read_csv(tmp_path / "sweep.csv")
    assert data.shape[0] == 4


@pytest.mark.parametrize(
    "argv",
    [
        ["sweep", "--mass", "-1"],
        ["sweep", "--config", "/nonexistent/file.cfg"],
        ["sweep", "--grid-min", "1e18", "--grid-max", "1e13"],
        ["sweep", "--points", "1"],
        ["sweep", "--threads", "0"],
        ["sweep", "--cutoff", "banana"],
    ],
)
def test_config_errors_exit_2(tmp_path, capsys, argv):
    assert main([*argv, "--out", str(tmp_path)]) == 2
    diag = json.loads(capsys.readouterr().err)
    assert diag["command"] == "sweep" and diag["error"]


def test_unwritable_output_exit_2(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["sweep", "--points", "2", "--out", str(blocker / "sub")]) == 2


def test_bad_step_is_config_error(tmp_path, capsys):
    assert run(tmp_path, "timedomain", "--model", "fo", "--dt", "1e-10") == 2
    assert json.loads(capsys.readouterr().err)["error"] == "StepTooLarge"


def test_numeric_failure_exit_3(tmp_path, capsys):
    assert run(tmp_path, "kk", "--grid-min", "1e15", "--grid-max", "1e17") == 3
    assert json.loads(capsys.readouterr().err)["error"] == "InsufficientResolution"


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "radreact", "sweep", "--points", "2", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "sweep.csv").exists()


def test_parser_lists_subcommands():
    text = build_parser().format_help()
    for name in ("sweep", "verify", "poles", "kk", "timedomain", "figure1"):
        assert name in text
