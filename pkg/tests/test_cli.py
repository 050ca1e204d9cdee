import csv
import subprocess
import sys

import pytest

from spdcqubits.cli import build_run_config, main, make_parser, read_config_file
from spdcqubits.fockspace import ConfigError


def _data_rows(path):
    lines = [line for line in open(path, encoding="utf-8") if not line.startswith("#")]
    return list(csv.DictReader(lines))


def _verify_lines(out):
    return {line.split()[0]: line.split()[1] for line in out.splitlines()
            if line and not line.startswith("#")}


def test_evolve_writes_samples(tmp_path, capsys):
    rc = main(["evolve", "--g0", "0.1", "--t-final", "10", "--cutoff", "3", "--out", str(tmp_path)])
    assert rc == 0
    (path,) = tmp_path.glob("trajectory_*.csv")
    rows = _data_rows(path)
    assert len(rows) >= 40
    assert all(abs(float(r["P_expect"]) - 1) < 1e-8 for r in rows)
    text = path.read_text(encoding="utf-8")
    for key in ("version", "config_hash", "method", "dt", "cutoffs"):
        assert f"# {key} = " in text


def test_evolve_zero_pump_constant(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("g0 = 0\ng = 0\ncutoffs = 2\nt_final = 2  # short\n")
    assert main(["evolve", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    (path,) = tmp_path.glob("trajectory_*.csv")
    rows = _data_rows(path)
    for col in rows[0]:
        if col != "t":
            vals = [float(r[col]) for r in rows]
            assert max(vals) - min(vals) < 1e-12, col


def test_missing_config_exit_2(tmp_path, capsys):
    missing = tmp_path / "nope.cfg"
    assert main(["evolve", "--config", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


@pytest.mark.parametrize("text", ["bogus = 1\n", "g0 0.1\n", "cutoffs = 1,2\n", "dt = fast\n",
                                  "strict = maybe\n", "mode_freqs = 1, 0, 1\n"])
def test_bad_config_exit_2(tmp_path, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    assert main(["evolve", "--config", str(cfg), "--t-final", "0.1", "--cutoff", "1",
                 "--out", str(tmp_path)]) == 2


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["evolve", "--method", "z"])
    assert exc.value.code == 2


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("g0 = 0.3\nmethod = b\nomega = 1, 1, 1\ndrive_freq = none\n")
    assert read_config_file(cfg)["mode_freqs"] == (1.0, 1.0, 1.0)
    args = make_parser().parse_args(["sweep", "--config", str(cfg), "--g0", "0.2",
                                     "--grid-t", "1,2 3"])
    rc = build_run_config(args)
    assert rc.g0 == 0.2 and rc.method == "b" and rc.grid_t == (1.0, 2.0, 3.0)
    assert rc.space_config().drive_freq == 3.0
    assert rc.effective()["drive_freq"] == 3.0


def test_invalid_values():
    args = make_parser().parse_args(["evolve", "--jobs", "0"])
    with pytest.raises(ConfigError):
        build_run_config(args)


def test_sweep_single_cell_deterministic(tmp_path, capsys):
    outs = []
    for sub in ("a", "b"):
        rc = main(["sweep", "--grid-g0", "0.1", "--grid-t", "5", "--cutoff", "3",
                   "--out", str(tmp_path / sub)])
        assert rc == 0
        (path,) = (tmp_path / sub).glob("sweep_*.csv")
        outs.append(path)
    assert outs[0].name == outs[1].name
    assert outs[0].read_bytes() == outs[1].read_bytes()
    assert len(_data_rows(outs[0])) == 1


def test_sweep_strict_failure(tmp_path):
    args = ["sweep", "--grid-g0", "0.1", "--grid-t", "2", "--cutoff", "2", "--dt", "0.5",
            "--out", str(tmp_path)]
    assert main(args) == 0
    assert main(args + ["--strict"]) == 1


def test_reference_tables(capsys):
    assert main(["reference", "ghz"]) == 0
    ghz = capsys.readouterr().out
    assert "Δ²Sz1Sz2 0.25" in ghz
    assert main(["reference", "mimic"]) == 0
    mimic = capsys.readouterr().out
    assert "Δ²Sz1Sz2 0.0833333333333" in mimic
    assert main(["reference", "zbound", "--samples", "5000", "--seed", "2"]) == 0
    out = capsys.readouterr().out
    value = float(next(l for l in out.splitlines() if l.startswith("zcov_max")).split()[1])
    assert 0.2499 <= value <= 0.25 + 1e-9


def _quick_verify(*extra):
    return ["verify", "--t-final", "2.5", "--samples", "2000", *extra]


def test_verify_literal_projector_fails(capsys):
    rc = main(_quick_verify("--cutoff", "2", "--use-literal-P"))
    status = _verify_lines(capsys.readouterr().out)
    assert rc == 1
    assert status["commutator_H_P"] == "FAIL"
    assert status["hermiticity"] == "PASS"


def test_verify_small_cutoff_fails_convergence(capsys):
    rc = main(_quick_verify("--cutoff", "1"))
    status = _verify_lines(capsys.readouterr().out)
    assert rc == 1
    assert status["cutoff_convergence"] == "FAIL"
    assert status["commutator_H_P"] == "PASS"


def test_verify_report_format(capsys, tmp_path):
    main(_quick_verify("--cutoff", "3", "--g0", "0.05", "--out", str(tmp_path)))
    out = capsys.readouterr().out
    checks = [l for l in out.splitlines() if l and not l.startswith("#")]
    assert len(checks) >= 15
    for line in checks:
        name, status, value, tol = line.split()
        assert status in ("PASS", "FAIL")
        float(value), float(tol)
    assert "Sy_extended matches" in out
    assert (tmp_path / "verify_report.txt").read_text(encoding="utf-8") == out


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "spdcqubits.cli", "reference", "w"],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0
    assert "state w" in proc.stdout
