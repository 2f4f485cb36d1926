import json

import pytest

from postrand.cli import main
from postrand.sdpa import parse_sdpa


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_certify_singlet(capsys):
    code, out, _ = run(capsys, "certify", "--model", "singlet_vacuum", "--nu", "0.5")
    assert code == 0
    rep = json.loads(out)
    assert rep["p_valid"] == pytest.approx(0.5)
    assert rep["guessing_probability"] == pytest.approx(0.4267767, abs=1e-6)
    assert "solve_time" not in rep["diagnostics"]


def test_certify_output_is_deterministic(capsys):
    argv = ("certify", "--model", "one_pair", "--eta", "0.9", "--nu", "1", "--strategy", "c")
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_certify_behavior_file(tmp_path, capsys):
    from postrand.photonics import singlet_with_vacuum
    f = tmp_path / "b.json"
    f.write_text(singlet_with_vacuum(1.0).to_json())
    code, out, _ = run(capsys, "certify", "--behavior", str(f), "--mode", "alice", "--strategy", "a")
    assert code == 0
    assert json.loads(out)["guessing_probability"] == pytest.approx(0.5, abs=1e-6)


def test_certify_signaling_behavior_exits_2(tmp_path, capsys):
    from postrand.behaviors import Behavior
    from postrand.photonics import singlet_with_vacuum
    t = singlet_with_vacuum(1.0).table.copy()
    t[0, 0, 0, 0] += 0.05
    t[0, 0, 1, 0] -= 0.05
    f = tmp_path / "bad.json"
    f.write_text(Behavior(singlet_with_vacuum(1.0).scenario, t, tolerance=1.0).to_json())
    assert run(capsys, "certify", "--behavior", str(f))[0] == 2


@pytest.mark.parametrize("argv", [
    ("--bogus",),
    ("certify",),
    ("certify", "--model", "spdc", "--strategy", "z"),
    ("scan", "--model", "singlet_vacuum", "--parameter", "nu", "--grid", ""),
    ("scan", "--model", "singlet_vacuum", "--parameter", "nu", "--grid", "a,b"),
    ("scan", "--model", "singlet_vacuum", "--parameter", "nu", "--grid", "0.5", "--strategies", "q"),
    ("noniid", "--example", "3"),
    ("noniid", "--example", "1", "--runs", "0"),
    ("certify", "--behavior", "/nonexistent/b.json"),
])
def test_usage_errors_exit_1(capsys, argv):
    assert run(capsys, *argv)[0] == 1


def test_scan_csv(tmp_path, capsys):
    out = tmp_path / "s.csv"
    argv = ("scan", "--model", "singlet_vacuum", "--parameter", "nu", "--grid", "0.5,0.25",
            "--strategies", "a,b", "--workers", "1", "--output", str(out))
    assert run(capsys, *argv)[0] == 0
    first = out.read_text()
    lines = first.splitlines()
    assert lines[0] == "parameter,strategy,p_valid,G,H,rate,status"
    # the grid is sorted
    assert lines[1].startswith("0.25,a")
    assert run(capsys, *argv)[0] == 0
    assert out.read_text() == first


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "singlet_vacuum", "nu": 0.25}))
    code, out, _ = run(capsys, "--config", str(cfg), "certify")
    assert code == 0
    assert json.loads(out)["p_valid"] == pytest.approx(0.25)
    cfg.write_text(json.dumps({"colour": "blue"}))
    assert run(capsys, "--config", str(cfg), "certify")[0] == 1


def test_export_sdp(tmp_path, capsys):
    out = tmp_path / "p.dat-s"
    code, msg, _ = run(capsys, "export-sdp", "--model", "singlet_vacuum", "--nu", "0.5",
                       "--strategy", "a", "--output", str(out))
    assert code == 0
    data = parse_sdpa(out.read_text())
    assert data.block_sizes == [25] * 9
    assert "9 blocks of size [25]" in msg
    assert run(capsys, "export-sdp", "--model", "spdc", "--strategy", "h", "--output",
               str(out))[0] == 1


def test_noniid_example1(tmp_path, capsys):
    f = tmp_path / "r.csv"
    code, out, _ = run(capsys, "noniid", "--example", "1", "--runs", "2000", "--seed", "4",
                       "--csv", str(f), "--reveal")
    assert code == 0
    assert "decoder accuracy = 1.000000" in out
    assert f.read_text().splitlines()[0] == "index,a,b,valid,box,lambda,mu"
