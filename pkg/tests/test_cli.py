import json

import pytest

from dpplog.cli import EXIT_PRECONDITION, EXIT_USAGE, run_subcommand
from dpplog.io import read_csv


def _run(argv, capsys):
    code = run_subcommand(argv)
    return code, capsys.readouterr()


def test_unknown_subcommand(capsys):
    code, out = _run(["frobnicate"], capsys)
    assert code == EXIT_USAGE and "usage" in out.err.lower()


def test_unknown_flag(capsys):
    code, _ = _run(["sample", "--bogus", "1"], capsys)
    assert code == EXIT_USAGE


def test_sample_byte_identical(tmp_path, capsys):
    outs = []
    for i in range(2):
        p = tmp_path / f"s{i}.jsonl"
        code, _ = _run(["sample", "--kernel", "hermite:3", "--samples", "10", "--seed", "1",
                        "--out", str(p)], capsys)
        assert code == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
    lines = outs[0].decode().splitlines()
    meta = json.loads(lines[0])["meta"]
    assert meta["seed"] == 1 and meta["kernel"] == "hermite:3"
    assert all(len(json.loads(l)["points"]) == 3 for l in lines[1:]) and len(lines) == 11


def test_config_file_overridden_by_flags(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kernel": "hermite:2", "samples": 4, "seed": 9}))
    p = tmp_path / "s.jsonl"
    code, _ = _run(["sample", "--config", str(cfg), "--samples", "2", "--out", str(p)], capsys)
    assert code == 0
    lines = p.read_text().splitlines()
    meta = json.loads(lines[0])["meta"]
    assert meta["samples"] == 2 and meta["seed"] == 9 and len(lines) == 3
    assert all(len(json.loads(l)["points"]) == 2 for l in lines[1:])
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert run_subcommand(["sample", "--config", str(cfg)]) == EXIT_USAGE


def test_logderiv_csv(tmp_path, capsys):
    p, s = tmp_path / "l.csv", tmp_path / "s.json"
    code, _ = _run(["logderiv", "--kernel", "hermite:4", "--a", "0.3", "--schedule",
                    "6:0.1,7:0.05,8:0.01", "--points", "-1.2,0.9,2.0", "--out", str(p),
                    "--summary", str(s)], capsys)
    assert code == 0
    assert p.read_text().startswith("# program:")
    rows = read_csv(p)
    assert list(rows[0]) == ["R", "delta", "value", "stderr"] and len(rows) == 3
    exact = -0.6 + sum(2 / (0.3 - x) for x in (-1.2, 0.9, 2.0))
    assert float(rows[-1]["value"]) == pytest.approx(exact, abs=1e-4)
    assert json.loads(s.read_text())["converged"] is True


def test_precondition_exit(capsys):
    code, out = _run(["logderiv", "--kernel", "sine", "--window", "-5:5", "--schedule",
                      "4:0.1,5:0.05,9:0.01", "--points", "1"], capsys)
    assert code == EXIT_PRECONDITION and "exceeds" in out.err


def test_check_kernel(capsys):
    code, out = _run(["check-kernel", "--kernel", "hermite:5", "--grid-size", "200"], capsys)
    assert code == 0 and json.loads(out.out)["passed"] is True


def test_intensity_and_rn_check(tmp_path, capsys):
    p = tmp_path / "i.csv"
    assert run_subcommand(["intensity", "--kernel", "hermite:2", "--samples", "200",
                           "--bins", "-2:2:4", "--out", str(p)]) == 0
    rows = read_csv(p)
    assert len(rows) == 8 and rows[1]["name"].startswith("exact")
    q = tmp_path / "r.csv"
    assert run_subcommand(["rn-check", "--kernel", "hermite:4", "--samples", "300",
                           "--eps", "0.1,0.01", "--out", str(q)]) == 0
    assert [r["name"] for r in read_csv(q)][-1] == "dlnC[eps=0]"


def test_diffuse_and_ibp(tmp_path, capsys):
    p, snaps = tmp_path / "d.json", tmp_path / "d.jsonl"
    assert run_subcommand(["diffuse", "--kernel", "hermite:3", "--dt", "1e-3", "--T", "0.01",
                           "--trajectories", "20", "--snapshots", str(snaps),
                           "--snapshot-every", "5", "--out", str(p)]) == 0
    rep = json.loads(p.read_text())["report"]
    assert rep["n_trajectories"] == 20
    assert len(snaps.read_text().splitlines()) == 4
    q = tmp_path / "b.jsonl"
    assert run_subcommand(["ibp-test", "--kernel", "hermite:3", "--samples", "50",
                           "--schedule", "6:0.1,7:0.05,8:0.01", "--out", str(q)]) == 0
    assert len(q.read_text().splitlines()) == 4


def test_acceptance_single_quick(tmp_path, capsys):
    p = tmp_path / "a.json"
    code, out = _run(["acceptance", "--quick", "--only", "4", "--out", str(p)], capsys)
    assert code == 0 and "[PASS] criterion 4" in out.out
    assert json.loads(p.read_text())["criteria"][0]["passed"] is True
