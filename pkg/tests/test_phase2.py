import math

import pytest

from conftest import TINY_CONNECT_SUITE, UNIT, elbow, segment, square_loop, tee
from xcity.assets import Placement, Pose, RoadAsset
from xcity.constraints import feasibility_report
from xcity.assets import boundary_nodes
from xcity.geometry import Space, segments_disjoint
from xcity.phase1 import OracleRefusal, SearchConfig, search_placement
from xcity.phase2 import (
    InfeasiblePlacement,
    TransitionCandidate,
    candidate_valid,
    direct_connectivity,
    optimize_connectivity,
    oracle_connectivity_max,
    transition_candidates,
)

BIG = Space.rectangle(100, 100)
FAST = SearchConfig(seed=2, restarts=4, iterations=4000, time_budget=20)

# square loop with one spoke leaving through its right side; only the spoke tip is a boundary node
FENCE = RoadAsset(
    "fence",
    [(0, 0), (4, 0), (4, 2), (4, 4), (0, 4), (6, 2)],
    [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (2, 5)],
)


def _pl(assets, poses):
    return Placement.build(assets, {a.id: Pose(*p) for a, p in zip(assets, poses)})


def test_candidate_counts():
    a, b = segment("a", 1), segment("b", 1)
    assert len(transition_candidates([a, b])) == 4
    assert len(transition_candidates([tee("t"), segment("s", 1)])) == 6
    assert transition_candidates([tee("t")]) == []


def test_candidate_valid_parallel_segments():
    a, b = segment("a", 1), segment("b", 1)
    pl = _pl([a, b], [(0, 0, 0), (0, 1, 0)])
    assert candidate_valid(TransitionCandidate("a", 1, "b", 1), [a, b], pl)


def test_candidate_blocked_by_third_asset():
    a, b, wall = segment("a", 1), segment("b", 1), segment("w", 4)
    pl = _pl([a, b, wall], [(0, 0, 0), (3, 0, 0), (2, -2, math.pi / 2)])
    assert not candidate_valid(TransitionCandidate("a", 1, "b", 0), [a, b, wall], pl)


def test_candidate_own_incident_segment_is_exempt():
    # the transition leaves the spoke tip back along the spoke's own line
    s = segment("s", 1)
    pl = _pl([FENCE, s], [(0, 0, 0), (7, 2, 0)])
    assert candidate_valid(TransitionCandidate("fence", 5, "s", 0), [FENCE, s], pl)


def test_candidate_rejects_interior_nodes():
    t, s = tee("t"), segment("s", 1)
    pl = _pl([t, s], [(0, 0, 0), (5, 5, 0)])
    with pytest.raises(ValueError):
        candidate_valid(TransitionCandidate("t", 2, "s", 0), [t, s], pl)


def test_candidate_degenerate_is_invalid(caplog):
    a, b = segment("a", 1), segment("b", 1)
    pl = _pl([a, b], [(0, 0, 0), (1, 0, math.pi / 2)])
    assert not candidate_valid(TransitionCandidate("a", 1, "b", 0), [a, b], pl)
    assert "degenerate" in caplog.text


def test_direct_connectivity_examples():
    a, b = segment("a", 1), segment("b", 1)
    r = direct_connectivity([a, b], _pl([a, b], [(10, 10, 0), (80, 80, 1)]), space=BIG)
    assert r.C == 1 and r.connected_pairs == [("a", "b")]
    c = segment("c", 1)
    r = direct_connectivity([a, b, c], _pl([a, b, c], [(10, 10, 0), (50, 80, 0), (80, 20, 0)]), space=BIG)
    assert r.C == 3
    for cand in r.chosen_transitions.values():
        assert candidate_valid(cand, [a, b, c], r.placement)


def test_fenced_asset_contributes_nothing():
    inner = segment("in", 1)
    pl = _pl([FENCE, inner], [(10, 10, 0), (12, 11.5, math.pi / 2)])
    assert feasibility_report(pl, [FENCE, inner], BIG).feasible
    assert direct_connectivity([FENCE, inner], pl, space=BIG).C == 0
    # exhaustive scan over every candidate
    assert not any(candidate_valid(c, [FENCE, inner], pl) for c in transition_candidates([FENCE, inner]))


def test_direct_connectivity_is_pure():
    a, b = tee("a"), tee("b")
    pl = _pl([a, b], [(10, 10, 0), (30, 30, 2)])
    before = pl.to_json()
    r1 = direct_connectivity([a, b], pl, space=BIG)
    r2 = direct_connectivity([a, b], pl, space=BIG)
    assert pl.to_json() == before and r1.to_json() == r2.to_json()


def test_direct_connectivity_rejects_infeasible():
    a, b = tee("a"), tee("b")
    with pytest.raises(InfeasiblePlacement):
        direct_connectivity([a, b], _pl([a, b], [(1, 1, 0), (1, 1, 0)]))
    with pytest.raises(InfeasiblePlacement):
        direct_connectivity([a], _pl([a], [(500, 1, 0)]), space=BIG)


def test_optimize_three_assets_reaches_complete_pairing():
    assets = [tee("t"), elbow("e"), segment("s", 0.5)]
    start = search_placement(assets, BIG, FAST)
    r = optimize_connectivity(assets, start.placement, BIG, FAST)
    assert r.C == 3
    assert feasibility_report(r.placement, assets, BIG).feasible


def test_optimize_never_worse_than_start():
    assets = [tee("a", 0.6, 0.4), tee("b", 0.6, 0.4)]
    space = Space.rectangle(1.3, 0.75)
    start = search_placement(assets, space, FAST)
    assert start.feasible
    c0 = direct_connectivity(assets, start.placement, space=space).C
    r = optimize_connectivity(assets, start.placement, space, SearchConfig(seed=0, restarts=1, iterations=300))
    assert r.C >= c0


def test_optimize_single_asset_and_errors():
    t = tee("t")
    pl = _pl([t], [(50, 50, 0)])
    assert optimize_connectivity([t], pl, BIG, FAST).C == 0
    with pytest.raises(InfeasiblePlacement):
        optimize_connectivity([t], _pl([t], [(500, 50, 0)]), BIG, FAST)


def test_optimize_is_deterministic():
    assets = [tee("t"), segment("s", 0.5)]
    start = search_placement(assets, UNIT, FAST)
    r1 = optimize_connectivity(assets, start.placement, UNIT, FAST)
    r2 = optimize_connectivity(assets, start.placement, UNIT, FAST)
    assert r1.to_json() == r2.to_json()


def test_oracle_examples():
    assert oracle_connectivity_max([segment("a", 0.2), segment("b", 0.2)], UNIT, 0.1, math.pi / 4) == 1
    assert oracle_connectivity_max([tee("t")], UNIT, 0.1, math.pi / 4) == 0
    too_big = [square_loop("a", 0.6), square_loop("b", 0.6)]
    assert oracle_connectivity_max(too_big, UNIT, 0.1, math.pi / 8) == -1
    with pytest.raises(OracleRefusal):
        oracle_connectivity_max([segment(c, 0.1) for c in "abc"], UNIT, 0.1, 0.5)


@pytest.mark.parametrize("case", TINY_CONNECT_SUITE, ids=[c[0] for c in TINY_CONNECT_SUITE])
def test_optimize_matches_oracle(case):
    name, assets, space, step_xy, step_theta = case
    start = search_placement(assets, space, FAST)
    assert start.feasible
    got = optimize_connectivity(assets, start.placement, space, FAST).C
    assert got == oracle_connectivity_max(assets, space, step_xy, step_theta)


def _valid_without_exemption(c, assets, placement):
    start = tuple(placement.coords[c.from_asset][c.from_node])
    end = tuple(placement.coords[c.to_asset][c.to_node])
    if start == end:
        return False
    return all(
        segments_disjoint((start, end), (tuple(placement.coords[a.id][i]), tuple(placement.coords[a.id][j])))
        for a in assets
        for i, j in a.segments
    )


def test_exemption_only_adds_connections():
    # every transition touches its own incident segments at the endpoint, so
    # without the exemption nothing connects
    assets = [tee("a"), elbow("b"), segment("c", 0.5)]
    checked = 0
    for seed in range(30):
        start = search_placement(assets, Space.rectangle(3, 3), SearchConfig(seed=seed, restarts=1, iterations=3000))
        if not start.feasible:
            continue
        checked += 1
        pl = start.placement
        with_ex = direct_connectivity(assets, pl).C
        without = len(
            {
                (c.from_asset, c.to_asset)
                for c in transition_candidates(assets)
                if _valid_without_exemption(c, assets, pl)
            }
        )
        assert without <= with_ex
    assert checked >= 20


def test_connectivity_bounds_and_boundary_pairs():
    assets = [tee("a"), square_loop("q", 0.3), segment("c", 0.5), elbow("e")]
    start = search_placement(assets, Space.rectangle(4, 4), FAST)
    r = direct_connectivity(assets, start.placement)
    assert 0 <= r.C <= math.comb(len(assets), 2)
    by_id = {a.id: a for a in assets}
    for a, b in r.connected_pairs:
        assert boundary_nodes(by_id[a]) and boundary_nodes(by_id[b])
    assert all("q" not in pair for pair in r.connected_pairs)
