import math

import numpy as np
import pytest

from nibble_forge.hypergraph import Hypergraph, covered_vertices, verify_matching
from nibble_forge.instances import gen_complete_uniform, gen_design_hypergraph, gen_sts
from nibble_forge.mcwa import MCWAParams, run_mcwa
from nibble_forge.weights import indicator_family


def _accounting(H, res):
    M = res.matching.tolist()
    assert verify_matching(H, M).valid
    covered = set(covered_vertices(H, M).tolist())
    surv = set(res.survivor.vertex_map.tolist())
    waste = set(res.waste.tolist())
    assert not covered & surv and not waste & surv
    assert len(covered) + len(waste - covered) + len(surv) == H.n
    rep = res.report
    assert rep["matched_vertices"] + rep["waste"] + rep["survivors"] == rep["n"] == H.n
    assert rep["leftover"] == H.n - len(covered)


@pytest.mark.parametrize("mode", ["empirical", "theoretical"])
def test_mcwa_accounting_and_determinism(mode):
    H = gen_design_hypergraph(15, 2, 3).hypergraph
    p = MCWAParams(gamma=0.2, seed=3, mode=mode)
    a = run_mcwa(H, p)
    _accounting(H, a)
    b = run_mcwa(H, p)
    assert a.matching.tolist() == b.matching.tolist()
    assert a.report["per_step"] == b.report["per_step"]


def test_mcwa_report_fields():
    H = gen_sts(31).hypergraph
    fam = indicator_family(H.n, [range(10), range(15, 31)])
    res = run_mcwa(H, MCWAParams(gamma=0.2, seed=1), weights=fam)
    rep = res.report
    assert rep["t_star"] == 600 and rep["A"] == pytest.approx(10 / 0.2**4)
    assert rep["x"] == pytest.approx(math.exp(0.2**4 * rep["logB"]))
    assert [row["name"] for row in rep["per_tau"]] == ["set0", "set1"]
    assert rep["stop_reason"]
    _accounting(H, res)


def test_mcwa_graph_case_runs_a_single_chomp():
    # 2-uniform: k = 1
    n = 12
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    H = Hypergraph(n, edges)
    res = run_mcwa(H, MCWAParams(gamma=0.3, seed=0))
    assert res.report["k"] == 1 and res.report["t_reached"] <= 1
    _accounting(H, res)


def test_mcwa_max_steps_caps_the_run():
    H = gen_complete_uniform(20, 3).hypergraph
    res = run_mcwa(H, MCWAParams(gamma=0.2, seed=0, max_steps=2))
    assert res.report["t_reached"] <= 2
    _accounting(H, res)


def test_mcwa_rejects_bad_params():
    with pytest.raises(ValueError):
        MCWAParams(gamma=1.5)
    with pytest.raises(ValueError):
        MCWAParams(gamma=0.2, mode="other")
    with pytest.raises(ValueError):
        MCWAParams(gamma=0.2, strictness="other")


def test_small_x_schedule_break_is_noted_in_lenient_mode():
    # log x is far below 2 here, so a frozen 4-codegree bound is overtaken by the 5-codegree one
    from nibble_forge.errors import ObservationViolation
    from nibble_forge.instances import gen_cyclic_coloring, gen_triangle_aux
    H = gen_triangle_aux(gen_cyclic_coloring(12)).hypergraph
    res = run_mcwa(H, MCWAParams(gamma=0.2, seed=0))
    assert any("non-increasing" in note for note in res.report["notes"])
    _accounting(H, res)
    with pytest.raises(ObservationViolation):
        run_mcwa(H, MCWAParams(gamma=0.2, seed=0, strictness="strict"))
