import numpy as np
import pytest

from nibble_forge.checks import Band, ConclusionReport, HypothesisReport
from nibble_forge.weights import WeightFamily, indicator_family


def test_weight_family_basics(tmp_path):
    fam = WeightFamily(6)
    fam.add("a", [3, 1], [2.0, 0.5])
    fam.add("b", [0, 1, 2])
    assert fam.names() == ["a", "b"] and fam.totals() == [2.5, 3.0]
    assert fam.max_value() == 2.0 and fam.max_support() == 3 and fam.involvement() == 2
    mask = np.array([False, True, False, True, False, False])
    assert [w.total_on(mask) for w in fam] == [2.5, 1.0]
    fam.save(tmp_path / "w.json")
    again = WeightFamily.load(6, tmp_path / "w.json")
    assert again.to_json() == fam.to_json()


@pytest.mark.parametrize("verts,vals", [([6], [1.0]), ([1, 1], [1.0, 1.0]), ([1], [-1.0]), ([1], [np.inf]), ([1, 2], [1.0])])
def test_weight_validation(verts, vals):
    with pytest.raises(ValueError):
        WeightFamily(6).add("bad", verts, vals)


def test_restrict_follows_vertex_map():
    fam = indicator_family(6, [[0, 2, 4], [1, 5]])
    sub = fam.restrict(np.array([2, 3, 5]))
    assert sub.n == 3
    assert sub.weights[0].vertices.tolist() == [0] and sub.weights[1].vertices.tolist() == [2]


def test_band_and_reports():
    assert Band(1.0, 0.5, 2.0).ok and Band(1.0).violation == 0
    assert Band(3.0, hi=2.0).violation == pytest.approx(0.5)
    assert Band(0.25, lo=0.5).violation == pytest.approx(0.5)
    rep = ConclusionReport()
    rep.add("x", 1.0, 0.0, 2.0)
    rep.add("y", 5.0, hi=4.0)
    rep.note("z", 10.0, hi=1.0)
    assert rep.failed == ["y"] and rep.n_failed == 1 and not rep.passed
    assert rep.max_violation == pytest.approx(0.25)
    assert rep.to_dict()["diagnostics"]["z"]["ok"] is False
    hyp = HypothesisReport()
    hyp.require("ge", 2.0, 1.0)
    hyp.require("le", 2.0, 1.0, at_most=True)
    hyp.require("skip", 0, 1, skipped=True)
    assert hyp.failed == ["le"] and not hyp.holds
    hyp.require("inf", float("inf"), 0.0)
    assert hyp.to_dict()["entries"]["inf"]["lhs"] == "inf"
