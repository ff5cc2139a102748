import json
import subprocess
import sys

import pytest

from mcident.cli import main
from mcident.hard import sparse_hard_instance, symmetric_hard_instance
from mcident.io import save_chain, save_matrix, sha256_text
from mcident.sparse import default_m_for


@pytest.fixture
def files(tmp_path):
    inst = symmetric_hard_instance(5, 0.05, 1)
    save_matrix(inst.Q, tmp_path / "q.json")
    save_matrix(inst.P, tmp_path / "p.json")
    sh = sparse_hard_instance(3, 0.2, 0)
    save_chain(sh.Q, tmp_path / "sq.json")
    save_chain(sh.P, tmp_path / "sp.json")
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def test_distance_equal_chains(files, capsys):
    out = files / "d.csv"
    assert run("distance", "--p", files / "q.json", "--q", files / "q.json", "--out", out) == 0
    header, row = out.read_text().splitlines()
    rec = dict(zip(header.split(","), row.split(",")))
    assert float(rec["spectral_distance"]) == pytest.approx(0.0, abs=1e-12)
    assert json.loads(capsys.readouterr().out)["minimal_length"] is None


def test_manifest_hash_and_config(files):
    out = files / "d.json"
    run("distance", "--p", files / "p.json", "--q", files / "q.json", "--length", 4, "--out", out)
    man = json.loads((files / "d.json.manifest.json").read_text())
    assert man["sha256"] == sha256_text(out.read_text())
    assert man["config"]["length"] == 4
    assert "wall_seconds" in man
    assert "wall" not in out.read_text()


def test_same_config_same_bytes(files):
    cfg = files / "lb.json"
    cfg.write_text(json.dumps({"command": "lowerbound", "family": "symmetric", "n": 4,
                               "epsilon": 0.05, "m_grid": [40, 200], "trials": 12, "seed": 9}))
    run("--config", cfg, "--out", files / "a.csv", "--jobs", 1)
    run("--config", cfg, "--out", files / "b.csv", "--jobs", 3)
    a, b = (files / "a.csv").read_bytes(), (files / "b.csv").read_bytes()
    assert a == b
    assert a.startswith(b"family,n,epsilon,m,trials,type1,type2,combined")


def test_simulate_seed_and_env(files, capsys, monkeypatch):
    run("simulate", "--chain", files / "q.json", "--m", 20, "--seed", 4)
    a = capsys.readouterr().out
    monkeypatch.setenv("MCIDENT_SEED", "4")
    run("simulate", "--chain", files / "q.json", "--m", 20)
    assert capsys.readouterr().out == a
    assert len(a.split()) == 21


def test_simulate_sparse_words(files, capsys):
    run("simulate", "--chain", files / "sq.json", "--m", 5)
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 5 and all(l.split()[0] == "0" for l in lines)


def test_calibrate_then_test_symmetric_uses_profile_tau(files, capsys):
    prof = files / "prof.json"
    assert run("calibrate", "--kind", "iid", "--chain", files / "q.json", "--epsilon", 0.05,
               "--m", 3000, "--trials", 500, "--out", prof) == 0
    tau = json.loads(prof.read_text())["entries"][0]["tau"]
    capsys.readouterr()
    run("test-symmetric", "--chain", files / "q.json", "--epsilon", 0.05, "--m", 3000,
        "--constants", prof)
    v = json.loads(capsys.readouterr().out)
    assert v["diagnostics"]["tau"] == tau
    assert v["diagnostics"]["tau_source"].startswith("profile:")


def test_test_symmetric_from_trajectory_file(files, capsys):
    run("simulate", "--chain", files / "q.json", "--m", 4000, "--out", files / "w.txt")
    run("test-symmetric", "--chain", files / "q.json", "--epsilon", 0.05, "--trajectory", files / "w.txt")
    v = json.loads(capsys.readouterr().out)
    assert v["decision"] in ("accept", "reject") and v["diagnostics"]["m"] == 4000


def test_test_sparse(files, capsys):
    run("test-sparse", "--chain", files / "sq.json", "--epsilon", 0.2, "--m", 300,
        "--sample-from", files / "sp.json", "--seed", 2)
    v = json.loads(capsys.readouterr().out)
    assert v["reason"] in ("chi2", "pruning")
    run("simulate", "--chain", files / "sq.json", "--m", 400, "--out", files / "w.txt")
    run("test-sparse", "--chain", files / "sq.json", "--epsilon", 0.2, "--words", files / "w.txt")
    v = json.loads(capsys.readouterr().out)
    assert v["diagnostics"]["m"] == default_m_for(400)


def test_shuffle_simulate_and_test(files, capsys):
    recs = files / "s.txt"
    run("shuffle-simulate", "--n-cards", 6, "--count", 400, "--out", recs, "--seed", 1)
    lines = recs.read_text().splitlines()
    assert len(lines) == 400 and lines[0].startswith("1,2,3,4,5,6;")
    run("test-shuffle", "--shuffles", recs, "--epsilon", 0.3, "--seed", 1)
    v = json.loads(capsys.readouterr().out)
    assert v["decision"] == "accept"
    assert v["diagnostics"]["void_records_resampled"] > 0


def test_shuffle_record_errors(files, capsys):
    bad = files / "bad.txt"
    bad.write_text("1,2,3,4;1,2,3,4\n1,2,3,4;4,3,2,1\n")
    assert run("test-shuffle", "--shuffles", bad, "--epsilon", 0.3) == 2
    assert "record 2" in capsys.readouterr().err
    bad.write_text("1,2,3,4;1,2,3\n")
    assert run("test-shuffle", "--shuffles", bad, "--epsilon", 0.3) == 2
    assert "bad.txt:1" in capsys.readouterr().err


def test_config_errors(files, capsys):
    cfg = files / "c.json"
    cfg.write_text(json.dumps({"command": "distance", "bogus": 1}))
    assert run("--config", cfg) == 2
    assert "bogus" in capsys.readouterr().err
    cfg.write_text('{"command": "distance",\n "p": }')
    assert run("--config", cfg) == 2
    assert "c.json:2" in capsys.readouterr().err
    assert run("distance", "--p", files / "q.json") == 2
    assert "--q" in capsys.readouterr().err


def test_lowerbound_requires_ascending_grid(files, capsys):
    assert run("lowerbound", "--family", "symmetric", "--n", 4, "--epsilon", 0.05,
               "--m-grid", "200,40", "--trials", 5) == 2
    assert "ascending" in capsys.readouterr().err


def test_experiment_config(files, capsys):
    cfg = files / "e.json"
    cfg.write_text(json.dumps({"command": "experiment", "name": "block-cyclic", "params": {"pairs": 5}}))
    run("--config", cfg, "--out", files / "e.csv")
    text = (files / "e.csv").read_text()
    assert text.startswith("experiment,pairs,max_abs_error,passed\nblock-cyclic,5,")


def test_module_entry_point(files):
    r = subprocess.run([sys.executable, "-m", "mcident", "distance", "--p", str(files / "q.json"),
                        "--q", str(files / "p.json")], capture_output=True, text=True, check=True)
    assert json.loads(r.stdout)["spectral_distance"] > 0
