"""Timeline simulator: worked numbers, invariants, sweeps."""

import random

import pytest

from mgwfbp import (
    Collective,
    CollectiveParams,
    CommModel,
    MergePlan,
    OverlapCase,
    Strategy,
    SweepResult,
    SweepRow,
    allreduce_time,
    classify_case,
    crossing_node_count,
    find_merge_plan,
    resnet50_like,
    simulate_mgwfbp,
    simulate_naive,
    simulate_sync_easgd,
    simulate_wfbp,
    speedup,
    sweep,
)

from conftest import draw_instance, draw_mixed_instance, make_profile, worked_instance


def test_worked_instance_all_strategies():
    profile, model = worked_instance()
    naive = simulate_naive(profile, model)
    assert naive.t_iter == 22.0  # 4 forward + 8 backward + 4 * 2.5 comm
    assert naive.case is OverlapCase.NOT_APPLICABLE

    wfbp = simulate_wfbp(profile, model)
    assert wfbp.tau_c == (13.5, 11.0, 8.5, 6.0)
    assert wfbp.t_iter == 16.0
    assert wfbp.t_c_no == 4.0
    assert wfbp.case is OverlapCase.CASE_3

    sync = simulate_sync_easgd(profile, model)
    assert sync.t_iter == 17.5  # 12 compute + (1.5 + 0.25 * 16)
    assert sync.t_c_no == 5.5

    mg = simulate_mgwfbp(profile, model, MergePlan(frozenset({2}), 4))
    assert mg.t_iter == 15.5
    assert mg.t_c == (3.5, 0.0, 2.5, 2.5)


def test_timeline_invariants_random():
    rng = random.Random(5)
    for _ in range(300):
        profile, model = draw_mixed_instance(rng) if rng.random() < 0.4 else draw_instance(rng)
        plan = find_merge_plan(profile, model)
        for tl in (
            simulate_naive(profile, model),
            simulate_wfbp(profile, model),
            simulate_sync_easgd(profile, model),
            simulate_mgwfbp(profile, model, plan),
        ):
            n = profile.num_layers
            for i in range(n):
                assert tl.comm_end[i] == tl.tau_c[i] + tl.t_c[i]
                assert tl.tau_c[i] >= tl.tau_b[i] + profile.backward_times()[i]
                if i < n - 1:
                    assert tl.tau_c[i] >= tl.comm_end[i + 1]  # one serialized channel
            assert tl.t_iter == tl.comm_end[0]
            assert tl.t_c_no >= 0.0
            assert tl.t_iter >= tl.compute_time


def test_single_layer_network_collapses_strategies():
    profile = make_profile([5000], [3e-3], 2e-3)
    model = CommModel(a=1e-3, b=2e-9)
    t = 2e-3 + 3e-3 + allreduce_time(4 * 5000, model)
    assert simulate_naive(profile, model).t_iter == pytest.approx(t)
    assert simulate_wfbp(profile, model).t_iter == pytest.approx(t)
    assert simulate_sync_easgd(profile, model).t_iter == pytest.approx(t)


def test_silent_profile_sends_nothing():
    # layers without parameters produce no messages under any strategy
    profile = make_profile([0, 0, 0], [1e-3] * 3, 1e-3)
    model = CommModel(a=0.5, b=1e-9)
    for tl in (simulate_naive(profile, model), simulate_wfbp(profile, model), simulate_sync_easgd(profile, model)):
        assert tl.t_iter == tl.compute_time
        assert tl.t_c_no == 0.0


def test_degeneracy_empty_plan_is_wfbp():
    rng = random.Random(9)
    for _ in range(100):
        profile, model = draw_mixed_instance(rng)
        a = simulate_wfbp(profile, model)
        b = simulate_mgwfbp(profile, model, MergePlan(frozenset(), profile.num_layers))
        assert (a.tau_c, a.t_c, a.comm_end, a.t_iter) == (b.tau_c, b.t_c, b.comm_end, b.t_iter)


def test_degeneracy_full_plan_is_single_message():
    rng = random.Random(13)
    for _ in range(100):
        profile, model = draw_mixed_instance(rng)
        n = profile.num_layers
        if n < 2:
            continue
        a = simulate_sync_easgd(profile, model)
        b = simulate_mgwfbp(profile, model, MergePlan(frozenset(range(2, n + 1)), n))
        assert (a.t_c, a.comm_end, a.t_iter, a.t_c_no) == (b.t_c, b.comm_end, b.t_iter, b.t_c_no)


def test_case_classification():
    # fully hidden: every message fits under the next backward step; dyadic
    # costs keep the subtraction t_iter - compute exact
    hidden = make_profile([10, 10, 10], [1.0, 1.0, 1.0], 1.0)
    cheap = CommModel(a=2.0 ** -10, b=2.0 ** -20)
    assert classify_case(hidden, cheap) is OverlapCase.CASE_1
    tl = simulate_wfbp(hidden, cheap)
    assert tl.t_c_no == tl.t_c[0]

    # layer 4's message outlasts layer 3's backward, but cumulative slack
    # absorbs it: layer 1's send still starts at its own readiness
    partial = make_profile([1, 1, 1, 1], [4.0, 4.0, 1.0, 1.0], 1.0)
    mid = CommModel(a=1.0, b=0.25)  # t_c = 2.0 each
    tl = simulate_wfbp(partial, mid)
    assert tl.t_c[3] > 1.0  # violates the per-layer condition
    assert tl.tau_c[0] == tl.tau_b[0] + 4.0
    assert tl.case is OverlapCase.CASE_2
    assert tl.t_c_no == tl.t_c[0]

    # channel-bound: startup dwarfs compute
    bound = make_profile([1, 1, 1], [1e-4] * 3, 1e-4)
    assert classify_case(bound, CommModel(a=1.0, b=0.0)) is OverlapCase.CASE_3


def test_speedup_edges():
    profile = make_profile([10, 10], [1.0, 1.0], 1.0)
    free = simulate_wfbp(profile, CommModel(a=0.0, b=0.0))
    assert speedup(16, profile, free) == 16.0
    # t_iter exactly twice compute: half the linear rate
    sync = simulate_sync_easgd(profile, CommModel(a=3.0, b=0.0))
    assert sync.t_iter == 6.0
    assert speedup(16, profile, sync) == 8.0
    with pytest.raises(ValueError):
        speedup(0, profile, free)
    other = make_profile([1, 1, 1], [1.0] * 3, 1.0)
    with pytest.raises(ValueError):
        speedup(4, other, free)


def test_speedup_bounded_by_node_count():
    rng = random.Random(19)
    for _ in range(200):
        profile, model = draw_instance(rng)
        tl = simulate_wfbp(profile, model)
        s = speedup(32, profile, tl)
        assert 0.0 < s <= 32.0


def test_sweep_shape_and_accessor():
    profile = resnet50_like()
    params = CollectiveParams(Collective.RING, 4, 45.26e-6, 8e-10, 5e-11)
    result = sweep(profile, params, [4, 8], [Strategy.WFBP, Strategy.SYNC_EASGD])
    assert result.profile_name == profile.name
    assert len(result.rows) == 4
    assert {r.n_nodes for r in result.rows} == {4, 8}
    assert result.t_iter(8, Strategy.WFBP) > 0
    with pytest.raises(KeyError):
        result.t_iter(8, Strategy.MGWFBP)
    for row in result.rows:
        assert 0 < row.speedup <= row.n_nodes
    with pytest.raises(ValueError):
        sweep(profile, params, [])


def test_sweep_replans_per_node_count_unless_frozen():
    profile = resnet50_like()
    params = CollectiveParams(Collective.RING, 4, 45.26e-6, 8e-10, 5e-11)
    fresh = sweep(profile, params, [4, 64], [Strategy.MGWFBP])
    frozen = sweep(profile, params, [4, 64], [Strategy.MGWFBP], freeze_plan=True)
    # same plan at the planning point
    assert fresh.t_iter(4, Strategy.MGWFBP) == frozen.t_iter(4, Strategy.MGWFBP)
    # the 4-node plan is stale at 64 nodes where startup is 16x larger
    assert frozen.t_iter(64, Strategy.MGWFBP) > fresh.t_iter(64, Strategy.MGWFBP)


def _rows(pairs):
    out = []
    for n, (w, s) in pairs:
        out.append(SweepRow(n, Strategy.WFBP, w, 1.0, 0.0))
        out.append(SweepRow(n, Strategy.SYNC_EASGD, s, 1.0, 0.0))
    return SweepResult("x", tuple(out))


def test_crossing_detection():
    flips = _rows([(4, (1.0, 2.0)), (8, (2.0, 2.1)), (16, (4.0, 3.0)), (32, (8.0, 4.0))])
    assert crossing_node_count(flips) == 16
    never = _rows([(4, (1.0, 2.0)), (8, (2.0, 2.5))])
    assert crossing_node_count(never) is None
    # sync ahead from the start is not a crossing
    always = _rows([(4, (2.0, 1.0)), (8, (3.0, 1.5))])
    assert crossing_node_count(always) is None
    missing = SweepResult("x", (SweepRow(4, Strategy.WFBP, 1.0, 1.0, 0.0),))
    assert crossing_node_count(missing) is None


def test_events_rows():
    profile, model = worked_instance()
    mg = simulate_mgwfbp(profile, model, MergePlan(frozenset({2}), 4))
    rows = mg.events(profile)
    backward = [r for r in rows if r[1] == "backward"]
    comm = [r for r in rows if r[1] == "comm"]
    assert [r[0] for r in backward] == [4, 3, 2, 1]
    assert [r[0] for r in comm] == [4, 3, 1]  # layer 2 rides with layer 1
    for layer, _, start, end in backward:
        assert end - start == 2.0
    (l1,) = [r for r in comm if r[0] == 1]
    assert l1[2] == 12.0 and l1[3] == 15.5
    starts = [r[2] for r in rows]
    assert starts == sorted(starts)

    silent = make_profile([0, 5], [1.0, 1.0], 1.0)
    rows = simulate_wfbp(silent, CommModel(a=0.1, b=1e-9)).events(silent)
    assert [r[0] for r in rows if r[1] == "comm"] == [2]
