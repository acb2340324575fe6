import json
import math

import pytest

from nibble_forge.errors import LedgerError, ObservationViolation
from nibble_forge.ledger import (
    CodegreeLedger,
    Trajectory,
    check_observations,
    classify_logs,
    compute_log_B,
    log_target_leftover,
    replay,
    run_schedule,
    stop_time,
)


@pytest.mark.parametrize("gamma,want", [(0.1, 9900), (0.2, 600), (0.25, 240), (0.5, 12), (0.15, 1930)])
def test_stop_time(gamma, want):
    # 0.15: 1/0.15^4 = 1975.308..., 1/0.15^2 = 44.444..., difference 1930.86
    assert stop_time(gamma) == want


def test_compute_log_B_by_hand():
    # terms: (10-4)/2 = 3, -log eps = 5, (10-1)/(4-1) = 3
    assert compute_log_B(10, [4, 3, 1], -5) == 3
    assert compute_log_B(10, [4, 3, 1], -2) == 2
    assert compute_log_B(1, [4, 3], -2) == 0
    with pytest.raises(LedgerError):
        compute_log_B(1, [], 0)


def test_compute_log_B_triangle_bounds():
    # D = n^2, D_2 = D_3 = 3n, D_4..D_6 = 6, eps = 10/sqrt(n): the j=6 term wins for large n
    n = 1e12
    logD, l3n, l6 = 2 * math.log(n), math.log(3 * n), math.log(6)
    logB = compute_log_B(logD, [l3n, l3n, l6, l6, l6], math.log(10 / math.sqrt(n)))
    assert logB == pytest.approx((logD - l6) / 5, rel=1e-12)


def test_classification_ties_are_not_stuck():
    # gamma = 0.5, logB = 8: semi threshold 1, super threshold 2*2*0.0625*8 = 2
    c = classify_logs([5.0, 4.0, 1.0], 8.0, 0.5)
    assert c.semi_stuck == frozenset()
    assert c.super_stuck == frozenset({2})
    assert c.clusters == ((2,), (3,), (4,))
    c = classify_logs([5.0, 4.5, 4.5], 8.0, 0.5)
    assert c.semi_stuck == {2, 3}
    assert c.clusters == ((2, 3, 4),) and c.slowpokes == {4} and c.dormant == (2, 3, 4)
    assert c.slowpoke_of(2) == 4


def synthetic():
    return CodegreeLedger.create(4, 1e5, [24000, 12000, 1000, 0], -1e4, 0.1, logB=1e4)


def test_synthetic_schedule_by_hand():
    # log x = 1, per-step changes: j=2 -1, j=3 0, j=4 +1; no gap gets near 8 before t* = 9900
    led = synthetic()
    assert led.log_x == pytest.approx(1.0)
    assert led.thr_super == pytest.approx(8.0) and led.thr_semi == pytest.approx(10.0)
    traj = run_schedule(led, assert_observations=False)
    assert traj.t_end == 9900 and traj.stop_reason == "reached stop time"
    assert traj.rows[-1] == pytest.approx([14100, 12000, 10900, 0])
    assert all(traj.jstar_at(t) == {2, 3, 4} for t in range(0, 9900, 991))
    # Ct1 margin is 56792 - 3t (hand computation)
    assert traj.ct1_margins[0] == pytest.approx(56792)
    assert traj.ct1_margins[-1] == pytest.approx(56792 - 3 * 9899)


def test_synthetic_schedule_breaks_o5_below_the_hierarchy():
    # logB = 1e4 is far below 2/(k gamma^7) = 5e6, so the e^2 per-step gains are
    # not negligible: the 2-codegree bound is 24000 - t against an O5 ceiling
    # of 80 + (24000 - 3t), first exceeded at t = 41
    traj = run_schedule(synthetic(), assert_observations=False)
    found = check_observations(traj)
    assert {v.observation for v in found} == {"O5"}
    assert found[0].t == 41 and found[0].margin == pytest.approx(2.0)


def admissible():
    # k = 2, gamma = 0.2: hierarchy needs logB >= 78125
    return CodegreeLedger.create(2, 2.3e5, [3e4, 0.0], -1e5, 0.2, logB=1e5)


def test_admissible_schedule_keeps_every_observation():
    traj = run_schedule(admissible())
    assert traj.t_end == 600
    assert check_observations(traj) == []


def test_advance_matches_run_schedule():
    led = synthetic()
    traj = run_schedule(led.copy(), assert_observations=False)
    step = synthetic()
    for t in range(50):
        rec = step.advance()
        assert not rec.terminated
        assert rec.jstar == traj.jstar_at(t)
        assert step.logDj == pytest.approx(traj.rows[t + 1])


def test_ct1_stops_schedule():
    # j=2 is super-stuck (gap 0.01 < 0.064), so D_2 never drops while the
    # ratio's log falls by 2 per step from 3.136: negative at t = 2
    def make():
        return CodegreeLedger.create(2, 20.01, [0.01, 0.0], -10.0, 0.2, logB=10.0)
    led = make()
    assert led.ct1_margin() == pytest.approx(3.136)
    traj = run_schedule(led, assert_observations=False)
    assert traj.stop_reason == "codegree-to-degree ratio too small" and traj.t_end == 2
    traj = run_schedule(make(), assert_observations=False, enforce_ct1=False)
    assert traj.t_end == stop_time(0.2)


def test_create_validates():
    with pytest.raises(LedgerError):
        CodegreeLedger.create(3, 10, [1, 2], -1, 0.1)
    with pytest.raises(LedgerError):
        CodegreeLedger.create(2, 10, [1, 2], -1, 0.1)
    with pytest.raises(LedgerError):
        CodegreeLedger.create(2, 10, [2, 1], -1, 0.1, logB=5)
    with pytest.raises(LedgerError):
        CodegreeLedger.create(2, 10, [2, 1], -1, 1.5)


def test_tampered_trajectory_is_caught():
    traj = run_schedule(admissible())
    data = traj.to_json()
    data["rows"][100][0] = repr(float(data["rows"][100][0]) + 1.0)
    bad = Trajectory.from_json(json.loads(json.dumps(data)))
    found = check_observations(bad)
    assert found and found[0].observation == "O4" and found[0].t == 100 and found[0].j == 2
    with pytest.raises(ObservationViolation):
        check_observations(bad, raise_first=True)


def test_replay_and_round_trip(tmp_path):
    traj = run_schedule(admissible())
    assert replay(traj.start, traj.jstar_masks) == pytest.approx(traj.rows[-1])
    traj.save(tmp_path / "traj.json")
    again = Trajectory.load(tmp_path / "traj.json")
    assert again.rows == traj.rows and again.jstar_masks == traj.jstar_masks
    led = synthetic()
    assert CodegreeLedger.from_json(json.loads(json.dumps(led.to_json()))) == led


def test_log_target_leftover():
    got = log_target_leftover(math.log(1000), 10.0, 0.5, math.e)
    assert got == pytest.approx(math.log(1000) - 5 + 160 * 1.0)
