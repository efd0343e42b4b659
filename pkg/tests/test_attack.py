from fractions import Fraction

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from conftest import NO_FUZZ, make_graph, simulate_observations
from lnanon.attack import (AnonymityResult, AssumeAll, AttackConfig, Blind, Known, attack, brute_force_anonymity,
                           collude, downstream_state, phase1_enumerate, phase1_shadow)
from lnanon.errors import InconsistentObservation
from lnanon.payment import HopObservation
from lnanon.routing import CostParams, fee
from lnanon.snapshot import Client, assign_balances, assign_clients, Distribution
from lnanon.synthetic import WIDE_BASE_FEES_MSAT, WIDE_FEE_RATES_PPM, random_connected_graph

LND = AttackConfig(depth=30, params=NO_FUZZ)


def _obs(g, pre, a, nxt, amt_next, ttl_next, pid="p"):
    e = g.edges_between(a, nxt)[0]
    return HopObservation(a, pre, nxt, amt_next + fee(e.policy, amt_next), ttl_next + e.policy.timelock_delta, pid)


def test_path_graph_recipient_is_end():
    g = make_graph([("A", "B", 10), ("B", "C", 20), ("C", "D", 30)])
    obs = _obs(g, "A", "B", "C", 5000, 30)
    res = attack(g, obs, LND)
    assert res.recipients == {"D"} and res.senders == {"A"}
    assert (res.senders, res.recipients) == brute_force_anonymity(g, obs, LND)


def test_zero_residual_means_next_is_recipient():
    g = make_graph([("A", "B", 10), ("B", "C", 20), ("C", "D", 30)])
    res = attack(g, _obs(g, "A", "B", "C", 5000, 0), LND)
    assert res.recipients == {"C"}


def test_fig1b_fixture_matches_oracle(fig1b):
    obs = _obs(fig1b, "pre", "a", "nxt", 1_000_000, 7)
    assert obs.ttl_in == 9 and obs.amt_in == 1_001_001
    res = attack(fig1b, obs, AttackConfig(depth=3))
    assert res.phase1_complete
    assert (res.senders, res.recipients) == brute_force_anonymity(fig1b, obs, AttackConfig(depth=12))
    assert res.recipients == {"r2", "y", "z"}
    assert res.senders == {"pre", "s1", "s2"}


def test_phase1_candidates_consume_exact_ttl(fig1b):
    obs = _obs(fig1b, "pre", "a", "nxt", 1_000_000, 7)
    cands, complete = phase1_enumerate(fig1b, obs, 3)
    assert complete
    assert {c.terminal for c in cands} == {"r2", "y", "z"}
    assert all(c.timelock_consumed == 7 for c in cands)
    for c in cands:
        assert "a" not in c.nodes and "pre" not in c.nodes and len(set(c.nodes)) == len(c.nodes)


def test_step2_rejects_divergent_route():
    # from B, LND prefers B-X-D (cheap) over B-C-D, so the candidate via C is rejected
    g = make_graph([("A", "B", 10), ("B", "C", 20, 9000), ("C", "D", 30), ("B", "X", 20), ("X", "D", 30)])
    obs = _obs(g, "A", "B", "C", 5000, 30)
    cands, _ = phase1_enumerate(g, obs, 3)
    assert [c.terminal for c in cands] == ["D"]
    res = attack(g, obs, LND)
    assert res.recipients == set() and res.senders == set()
    assert brute_force_anonymity(g, obs, LND) == (set(), set())


def test_leaf_pre_is_unique_sender():
    g = make_graph([("L", "B", 10), ("B", "C", 20), ("C", "D", 30), ("D", "E", 10), ("B", "F", 10), ("F", "G", 10)])
    obs = _obs(g, "L", "B", "C", 5000, 30)
    res = attack(g, obs, LND)
    assert res.recipients
    assert all(s == {"L"} for s in res.senders_by_recipient.values() if s)
    assert (res.senders, res.recipients) == brute_force_anonymity(g, obs, LND)


def test_depth_zero_is_degenerate():
    g = random_connected_graph(12, 8, seed=3)
    for tx, route, j, obs in simulate_observations(g, 15, 3)[:10]:
        res = attack(g, obs, AttackConfig(depth=0, params=NO_FUZZ))
        assert res.recipients <= {obs.next}


def test_inconsistent_ttl_raises():
    g = make_graph([("A", "B", 10), ("B", "C", 20), ("C", "D", 30)])
    bad = HopObservation("B", "A", "C", Fraction(10**6), 5, "p")
    with pytest.raises(InconsistentObservation):
        attack(g, bad)
    assert brute_force_anonymity(g, bad, LND) == (set(), set())


def test_impossible_ttl_gives_empty_sets():
    g = make_graph([("A", "B", 10), ("B", "C", 20), ("C", "D", 30)])
    obs = _obs(g, "A", "B", "C", 5000, 29)
    assert attack(g, obs, LND).recipients == set()
    assert brute_force_anonymity(g, obs, LND) == (set(), set())


def test_amount_too_small_raises():
    g = make_graph([("A", "B"), ("B", "C")])
    with pytest.raises(InconsistentObservation):
        attack(g, HopObservation("B", "A", "C", Fraction(500), 40, "p"))


def test_ambiguous_parallel_channels_need_ids():
    g = make_graph([("A", "B"), ("B", "C"), ("B", "C")])
    obs = HopObservation("B", "A", "C", Fraction(20_000), 40, "p")
    with pytest.raises(InconsistentObservation):
        attack(g, obs)
    ok = HopObservation("B", "A", "C", Fraction(20_000), 40, "p", "c000", "c001")
    assert attack(g, ok, LND).recipients == {"C"}
    # equal-cost parallel channels tie on the lower id, so c002 is never chosen
    tied = HopObservation("B", "A", "C", Fraction(20_000), 40, "p", "c000", "c002")
    assert attack(g, tied, LND).recipients == set()


def test_inverted_amount_is_what_next_received():
    g = random_connected_graph(14, 10, seed=8)
    for tx, route, j, obs in simulate_observations(g, 30, 8):
        ttl_next, amt_next = downstream_state(g, obs)
        assert amt_next == route.amounts[j]
        assert ttl_next == route.residual_timelocks[j + 1]


def test_completeness_on_simulated_payments():
    g = assign_balances(random_connected_graph(20, 12, seed=4), 4)
    n = 0
    for tx, route, j, obs in simulate_observations(g, 40, 4):
        res = attack(g, obs, AttackConfig(depth=3, params=NO_FUZZ))
        if res.phase1_complete:
            n += 1
            assert tx.recipient in res.recipients
            assert tx.sender in res.senders_by_recipient[tx.recipient]
    assert n > 0


def test_lnd_matches_oracle_with_wide_fees():
    g = assign_balances(random_connected_graph(18, 12, seed=12, base_fees=WIDE_BASE_FEES_MSAT,
                                               fee_rates=WIDE_FEE_RATES_PPM), 12)
    cfg = AttackConfig(depth=18, params=NO_FUZZ)
    obs = simulate_observations(g, 30, 12)
    assert len(obs) > 20
    for tx, route, j, o in obs:
        res = attack(g, o, cfg)
        assert (res.senders, res.recipients) == brute_force_anonymity(g, o, cfg)


@pytest.mark.parametrize("client", [Client.CLIGHTNING, Client.ECLAIR])
def test_other_clients_match_oracle(client):
    params = CostParams(fuzz_enabled=False)
    g = assign_clients(random_connected_graph(14, 8, seed=6), Distribution(0, 0, 1) if client is Client.ECLAIR
                       else Distribution(0, 1, 0))
    cfg = AttackConfig(depth=30, view=AssumeAll(client), params=params)
    seen = 0
    for tx, route, j, obs in simulate_observations(g, 25, 6, client=client, params=params):
        res = attack(g, obs, cfg)
        assert (res.senders, res.recipients) == brute_force_anonymity(g, obs, cfg)
        assert tx.recipient in res.recipients and tx.sender in res.senders
        seen += 1
    assert seen > 5


def test_known_and_blind_views():
    mix = Distribution(Fraction(1, 2), Fraction(1, 4), Fraction(1, 4))
    g = assign_clients(random_connected_graph(16, 10, seed=2), mix, seed=2)
    obs_list = simulate_observations(g, 30, 2)
    for tx, route, j, obs in obs_list[:12]:
        per = {c: attack(g, obs, AttackConfig(depth=4, view=AssumeAll(c), params=NO_FUZZ)) for c in Client}
        blind = attack(g, obs, AttackConfig(depth=4, view=Blind(), params=NO_FUZZ))
        known = attack(g, obs, AttackConfig(depth=4, view=Known(), params=NO_FUZZ))
        assert blind.recipients == set().union(*(r.recipients for r in per.values()))
        assert blind.senders == set().union(*(r.senders for r in per.values()))
        for s in known.senders:
            assert s in per[g.client_of(s)].senders
        assert known.senders <= blind.senders and known.recipients <= blind.recipients


graphs = st.builds(lambda seed: random_connected_graph(14, 10, seed=seed), st.integers(0, 400))


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(graphs, st.integers(0, 1000))
def test_shadow_recipients_superset(g, seed):
    for tx, route, j, obs in simulate_observations(g, 4, seed)[:4]:
        normal = attack(g, obs, AttackConfig(depth=2, params=NO_FUZZ))
        shadow = attack(g, obs, AttackConfig(depth=2, shadow=True, params=NO_FUZZ))
        assert normal.recipients <= shadow.recipients
        # shadow candidates are a superset of timelock-matching ones
        assert len(phase1_shadow(g, obs, 2)[0]) >= len(phase1_enumerate(g, obs, 2)[0])


def _res(pid, senders, recipients, complete=True):
    r = AnonymityResult("x", pid, phase1_complete=complete)
    for rec in recipients:
        r.senders_by_recipient[rec] = set(senders)
    return r


def test_collude_identity_and_intersection():
    a = _res("p", {"s1", "s2"}, {"x", "y"})
    assert collude([a])[:2] == (a.senders, a.recipients)
    b = _res("p", {"s2"}, {"y", "z"})
    c = collude([a, b])
    assert c.recipients == {"y"} and c.senders == {"s2"} and c.n_used == 2


def test_collude_complete_only_and_fallback():
    a = _res("p", {"s1"}, {"x", "y"}, complete=True)
    b = _res("p", {"s1"}, {"z"}, complete=False)
    assert collude([a, b], complete_only=True).recipients == {"x", "y"}
    c = collude([_res("p", {"s"}, {"x"}, False), _res("p", {"s"}, {"x", "y"}, False)], complete_only=True)
    assert c.fallback and c.recipients == {"x"}


def test_collude_errors():
    with pytest.raises(ValueError):
        collude([])
    with pytest.raises(ValueError):
        collude([_res("p", {"s"}, {"x"}), _res("q", {"s"}, {"x"})])


names = st.sets(st.sampled_from("abcdefgh"), min_size=1)


@given(st.lists(st.tuples(names, names), min_size=1, max_size=5))
def test_collusion_monotone(sets):
    results = [_res("p", s, r) for s, r in sets]
    c = collude(results)
    for r in results:
        assert c.recipients <= r.recipients and c.senders <= r.senders
    common = set.intersection(*(r.recipients for r in results))
    assert common == c.recipients


def test_brute_force_guards():
    g = random_connected_graph(40, 10, seed=1)
    obs = HopObservation("n01", "n00", "n02", Fraction(10**6), 100, "p")
    with pytest.raises(ValueError):
        brute_force_anonymity(g, obs)
    small = make_graph([("A", "B"), ("B", "C")])
    with pytest.raises(ValueError):
        brute_force_anonymity(small, HopObservation("B", "A", "C", Fraction(10**6), 40, "p"),
                              AttackConfig(shadow=True))
