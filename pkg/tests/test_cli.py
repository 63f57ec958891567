import subprocess
import sys

import pytest

from fieldnewton import cli

ASYMMETRIC = """
name = "bad_force"
task = "newton"
[metric]
catalog = "flat"
n = 2
[initial]
q = [0.0, 0.0]
qdot = [[1.0, 0.0], [0.0, 1.0]]
[grid]
k = 2
[force]
entries = [[["0", "q1"], ["q2", "0"]], [["0", "0"], ["0", "0"]]]
"""


def write(tmp_path, text, name="s.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def bundled(name):
    return str(cli.resolve_scenario(name))


@pytest.mark.parametrize("name", cli.bundled_scenarios())
def test_bundled_scenarios_pass(name, tmp_path, capsys):
    assert cli.main(["run", name, "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "status: PASS" in out
    assert (tmp_path / "report.txt").read_text() == out


def test_flat_example_reports_harmonic_target(tmp_path, capsys):
    assert cli.main(["run", "flat_example", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "Newton residual of sheet harmonic: 2.000e+00" in out and "(target 2)" in out


def test_asymmetric_force_exit_2(tmp_path, capsys):
    assert cli.main(["run", write(tmp_path, ASYMMETRIC), "--out", str(tmp_path / "o")]) == 2
    assert "not symmetric in (α,β)" in capsys.readouterr().err


def test_parse_error_reports_offset(tmp_path, capsys):
    text = ASYMMETRIC.replace('"q1"], ["q2"', '"*q1"], ["*q1"')
    assert cli.main(["run", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 2
    assert "at offset 0" in capsys.readouterr().err


def test_unknown_tolerance_and_missing_file(tmp_path, capsys):
    text = open(bundled("flat_example")).read() + "bogus = 1e-3\n"
    assert cli.main(["run", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 2
    assert "bogus" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "nope.toml"), "--out", str(tmp_path / "o")]) == 2


def test_refuses_to_overwrite(tmp_path, capsys):
    assert cli.main(["run", "flat_newton", "--out", str(tmp_path)]) == 0
    assert cli.main(["run", "flat_newton", "--out", str(tmp_path)]) == 2
    assert "overwrite" in capsys.readouterr().err
    assert cli.main(["run", "flat_newton", "--out", str(tmp_path), "--overwrite"]) == 0


def test_csv_artifact_not_clobbered(tmp_path, capsys):
    assert cli.main(["run", "sphere_geodesic", "--out", str(tmp_path)]) == 0
    csvs = list(tmp_path.glob("*.csv"))
    assert csvs and csvs[0].read_text().startswith("t1,t2,q1,q2\n")
    (tmp_path / "report.txt").unlink()
    assert cli.main(["run", "sphere_geodesic", "--out", str(tmp_path)]) == 2


def test_deterministic_and_seed_recorded(tmp_path, capsys):
    for d in ("a", "b"):
        assert cli.main(["run", "sphere_verify", "--out", str(tmp_path / d), "--seed", "11"]) == 0
    a = (tmp_path / "a" / "report.txt").read_bytes()
    assert a == (tmp_path / "b" / "report.txt").read_bytes()
    assert b"seed: 11" in a
    assert cli.main(["run", "sphere_verify", "--out", str(tmp_path / "c"), "--seed", "-1"]) == 2


def test_tolerance_failure_exit_1(tmp_path, capsys):
    text = open(bundled("sphere_noether")).read().replace("noether_divergence = 1e-5", "noether_divergence = 1e-12")
    assert cli.main(["run", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "status: FAIL" in out


def test_scenarios_listing(capsys):
    assert cli.main(["scenarios"]) == 0
    assert "flat_example" in capsys.readouterr().out.split()


def test_console_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "fieldnewton.cli", "run", "flat_example", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0 and "status: PASS" in res.stdout
