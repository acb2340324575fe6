import csv
import json
import math

import numpy as np
import pytest

from nibble_forge.chomp import ChompParams, check_chomp_hypotheses, chomp_size, leftover_count, run_chomp
from nibble_forge.hypergraph import verify_matching
from nibble_forge.instances import gen_complete_uniform, gen_sts
from nibble_forge.weights import indicator_family


def test_chomp_size():
    # log D = 2 so theta = 1/4; log x = 1 gives exactly 4 nibbles
    theta, T = chomp_size(math.e**2, math.e)
    assert theta == pytest.approx(0.25) and T == 4
    theta, T = chomp_size(1000.0, 4.0)
    assert T == math.floor(math.log(4) * math.log(1000) ** 2)
    assert chomp_size(1000.0, 4.0, theta_override=0.5)[1] == 2
    assert chomp_size(1000.0, 1.01, min_nibbles=1)[1] == 1
    assert chomp_size(1000.0, 4.0, T_override=7)[1] == 7
    assert chomp_size(1000.0, 4.0, theta_cap=0.01)[0] == 0.01


def _check_accounting(H, res):
    M = [int(e) for e in res.matching]
    assert verify_matching(H, M).valid
    covered = {v for e in M for v in H.edge(e)}
    survivors = set(res.survivor.vertex_map.tolist())
    waste = set(res.waste.tolist())
    assert not covered & survivors
    assert not waste & survivors
    assert len(covered) + len(waste - covered) + len(survivors) == H.n
    # survivor edges are exactly the input edges inside the survivor set
    inside = [e for e in range(H.m) if set(H.edge(e)) <= survivors]
    assert sorted(res.survivor.edge_map.tolist()) == inside
    for e_new, e_old in enumerate(res.survivor.edge_map):
        assert tuple(res.survivor.vertex_map[list(res.survivor.edge(e_new))]) == H.edge(e_old)


@pytest.mark.parametrize("seed", range(4))
def test_chomp_accounting(seed):
    H = gen_sts(31).hypergraph
    res = run_chomp(H, ChompParams(x=3, seed=seed, theta_override=0.2))
    _check_accounting(H, res)
    assert leftover_count(H, res.matching) == H.n - len({v for e in res.matching for v in H.edge(e)})


def test_chomp_is_deterministic():
    H = gen_complete_uniform(30, 3).hypergraph
    p = ChompParams(x=2, seed=5, jstar={2})
    a, b = run_chomp(H, p), run_chomp(H, p)
    assert a.matching.tolist() == b.matching.tolist()
    assert a.trace.to_json() == b.trace.to_json()
    c = run_chomp(H, ChompParams(x=2, seed=6, jstar={2}))
    assert c.matching.tolist() != a.matching.tolist()


def test_chomp_trace_files(tmp_path):
    H = gen_complete_uniform(24, 3).hypergraph
    res = run_chomp(H, ChompParams(x=2, seed=1, theta_override=0.1))
    res.trace.save_csv(tmp_path / "t.csv")
    res.trace.save_json(tmp_path / "t.json")
    rows = list(csv.DictReader(open(tmp_path / "t.csv")))
    assert len(rows) == len(res.trace.records) == res.trace.T
    assert json.loads((tmp_path / "t.json").read_text())["T"] == res.trace.T
    # nibble sizes in the trace are all the frozen theta
    assert {float(r["theta"]) for r in rows} == {0.1}


def test_chomp_with_weights_reports_per_weight_bands():
    H = gen_complete_uniform(40, 3).hypergraph
    fam = indicator_family(H.n, [range(20), range(10, 40)])
    res = run_chomp(H, ChompParams(x=2, seed=0, theta_override=0.1), weights=fam)
    names = set(res.report.to_dict()["checks"])
    assert {"tau_survivor[set0]", "tau_waste[set1]", "n_final", "D_final"} <= names
    alive = np.zeros(H.n, dtype=bool)
    alive[res.survivor.vertex_map] = True
    assert list(res.survivor_weights.totals()) == [w.total_on(alive) for w in fam]


def test_chomp_stops_when_edges_run_out():
    H = gen_sts(7).hypergraph
    res = run_chomp(H, ChompParams(x=50, seed=0, theta_override=0.9, inert_isolated=True))
    assert res.stop_reason in ("no edges left", "survivor empty", "completed")
    _check_accounting(H, res)


def test_chomp_hypotheses_named_by_tracked_indices():
    H = gen_complete_uniform(30, 4).hypergraph
    rep = check_chomp_hypotheses(H, ChompParams(x=2, jstar={2, 3}))
    names = set(rep.to_dict()["entries"])
    assert {"C1", "C3[2]", "C4[3]", "C5", "CP4"} <= names
    rep = check_chomp_hypotheses(H, ChompParams(x=2, jstar={3}))
    assert "C2" in rep.to_dict()["entries"]
