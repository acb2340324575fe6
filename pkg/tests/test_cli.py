import json
import math

import pytest

from nibble_forge import cli
from nibble_forge.errors import RetryExhausted
from nibble_forge.hypergraph import Hypergraph, load_hypergraph, save_hypergraph
from nibble_forge.ledger import CodegreeLedger, run_schedule


def run(argv):
    return cli.main([str(a) for a in argv])


def strip(path):
    data = json.loads(open(path).read())
    data.pop("timestamp", None)
    return data


def test_gen_complete(tmp_path, capsys):
    out = tmp_path / "k60.hg"
    assert run(["gen", "--kind", "complete", "--n", 60, "--u", 3, "--out", out]) == 0
    assert load_hypergraph(out).m == math.comb(60, 3)


def test_gen_design_prints_degree(tmp_path, capsys):
    assert run(["gen", "--kind", "design", "--n", 15, "--t", 2, "--r", 3, "--out", tmp_path / "d.hg"]) == 0
    assert "D=13 " in capsys.readouterr().out


def test_gen_and_verify_triangle(tmp_path, capsys):
    path = tmp_path / "tri.hg"
    assert run(["gen", "--kind", "triangle-aux", "--n", 30, "--out", path]) == 0
    printed = capsys.readouterr().out
    c2 = int(printed.split("C_2 = ")[1].split()[0])
    assert c2 <= 90
    assert run(["verify", path]) == 0
    assert "C_6 <= 2: ok" in capsys.readouterr().out


def test_gen_cyclic_coloring(tmp_path):
    path = tmp_path / "col.json"
    assert run(["gen", "--kind", "cyclic-coloring", "--n", 5, "--out", path]) == 0
    assert json.loads(path.read_text())["color"][1][2] == 3


@pytest.fixture
def design(tmp_path):
    path = tmp_path / "d15.hg"
    run(["gen", "--kind", "design", "--n", 15, "--t", 2, "--r", 3, "--out", path])
    return path


def test_run_mcwa_is_reproducible(tmp_path, design):
    args = ["run", "mcwa", "--instance", design, "--gamma", 0.2, "--mode", "empirical", "--seed", 7]
    assert run(args + ["--out", tmp_path / "a"]) == 0
    assert run(args + ["--out", tmp_path / "b"]) == 0
    a, b = (tmp_path / "a.json").read_text(), (tmp_path / "b.json").read_text()
    drop = lambda s: [line for line in s.splitlines() if '"timestamp"' not in line]
    assert drop(a) == drop(b)
    rep = strip(tmp_path / "a.json")
    assert rep["seed"] == 7 and rep["params"]["gamma"] == 0.2 and rep["build_id"]


def test_verify_run_report(tmp_path, design, capsys):
    run(["run", "mcwa", "--instance", design, "--seed", 1, "--out", tmp_path / "r"])
    assert run(["verify", tmp_path / "r.json", "--instance", design]) == 0
    assert "valid=True" in capsys.readouterr().out


def test_seed_from_environment(tmp_path, design, monkeypatch):
    monkeypatch.setenv(cli.SEED_ENV, "42")
    run(["run", "mcwa", "--instance", design, "--out", tmp_path / "e"])
    assert strip(tmp_path / "e.json")["seed"] == 42


def test_flags_beat_config(tmp_path, design):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 5, "gamma": 0.3}))
    run(["run", "mcwa", "--instance", design, "--config", cfg, "--seed", 6, "--out", tmp_path / "c"])
    rep = strip(tmp_path / "c.json")
    assert rep["seed"] == 6 and rep["gamma"] == 0.3


def test_trials_keyed_by_seed_and_independent_of_jobs(tmp_path, design):
    base = ["run", "chomp", "--instance", design, "--x", 2, "--seed", 3, "--trials", 3]
    assert run(base + ["--out", tmp_path / "one"]) == 0
    assert run(base + ["--jobs", 2, "--out", tmp_path / "two"]) == 0
    one, two = strip(tmp_path / "one.json"), strip(tmp_path / "two.json")
    assert sorted(one["trials"]) == ["3", "4", "5"]
    for rep in list(one["trials"].values()) + list(two["trials"].values()):
        rep["params"].pop("jobs")
    assert one["trials"] == two["trials"]


def test_chomp_writes_csv_trace(tmp_path, design):
    assert run(["run", "chomp", "--instance", design, "--x", 2, "--out", tmp_path / "ch"]) == 0
    header = (tmp_path / "ch.trace.csv").read_text().splitlines()[0]
    assert header.startswith("i,theta,p,p_star")


def test_theta_at_min_degree_is_an_error(tmp_path):
    path = tmp_path / "path.hg"
    save_hypergraph(Hypergraph(3, [(0, 1), (1, 2)]), path)
    assert run(["run", "nibble", "--instance", path, "--theta", 1.0, "--out", tmp_path / "n"]) != 0
    assert run(["run", "nibble", "--instance", path, "--theta", 0.9, "--out", tmp_path / "n"]) == 0


def test_strict_hypothesis_failure_exits_2(tmp_path, design):
    code = run(["run", "nibble", "--instance", design, "--theta", 0.1, "--eps", 0.9,
                "--mode", "strict", "--out", tmp_path / "h"])
    assert code == 2
    assert "N3" in strip(tmp_path / "h.json")["hypotheses"]["failed"]


def test_retry_exhaustion_exits_3(tmp_path, design, monkeypatch):
    def give_up(*a, **k):
        raise RetryExhausted("none accepted", best=None, attempts=2)
    monkeypatch.setattr(cli, "nibble_with_retry", give_up)
    monkeypatch.setattr(cli, "check_nibble_hypotheses", lambda *a, **k: type(
        "Ok", (), {"holds": True, "to_dict": lambda self: {}})())
    code = run(["run", "nibble", "--instance", design, "--theta", 0.1, "--mode", "strict",
                "--out", tmp_path / "x"])
    assert code == 3
    assert "none accepted" in strip(tmp_path / "x.json")["error"]


def test_verify_trajectory(tmp_path, capsys):
    traj = run_schedule(CodegreeLedger.create(2, 2.3e5, [3e4, 0.0], -1e5, 0.2, logB=1e5))
    good = tmp_path / "traj.json"
    traj.save(good)
    assert run(["verify", good]) == 0
    data = traj.to_json()
    data["rows"][10][0] = repr(float(data["rows"][10][0]) - 3.0)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    capsys.readouterr()
    assert run(["verify", bad]) == 1
    assert "O4" in capsys.readouterr().out
