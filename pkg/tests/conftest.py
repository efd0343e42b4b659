from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from lnanon.errors import NoRouteError
from lnanon.payment import Payment, execute_payment, generate_transactions
from lnanon.routing import CostParams, find_route
from lnanon.snapshot import ChannelPolicy, ChannelRecord, Client, NetworkGraph, NodeRecord, assign_balances

DATA = Path(__file__).parent / "data"
NO_FUZZ = CostParams(fuzz_enabled=False)


def make_graph(edges, client=Client.LND, capacity=1_000_000, base_fee=1000, ppm=1, timelock=40):
    """Graph from (a, b[, timelock[, base_fee]]) tuples; both directions share a policy."""
    names = []
    chans = []
    for i, e in enumerate(edges):
        a, b = e[0], e[1]
        tl = e[2] if len(e) > 2 else timelock
        bf = e[3] if len(e) > 3 else base_fee
        for n in (a, b):
            if n not in names:
                names.append(n)
        pol = ChannelPolicy(bf, Fraction(ppm, 10**6), tl)
        ch = ChannelRecord(f"c{i:03d}", a, b, capacity, 100, pol, pol)
        ch.balance_a = ch.balance_b = Fraction(ch.capacity_msat // 2)
        chans.append(ch)
    return NetworkGraph([NodeRecord(n, client) for n in names], chans)


def simulate_observations(graph, n_tx, seed, client=Client.LND, params=NO_FUZZ):
    """Route and execute ``n_tx`` payments; yields (transaction, route, observation index, observation)."""
    g = graph.copy()
    out = []
    for tx in generate_transactions(g, n_tx, seed):
        try:
            route = find_route(g, tx.sender, tx.recipient, tx.amount, client, params, seed=seed)
        except NoRouteError:
            continue
        res = execute_payment(g, Payment(tx.payment_id, tx.sender, tx.recipient, tx.amount, route))
        for obs in res.observations:
            out.append((tx, route, route.nodes.index(obs.observer), obs))
    return out


@pytest.fixture
def diamond():
    # s -> {u, v} -> t; the s-u-t branch is cheaper
    return make_graph([("s", "u"), ("u", "t"), ("s", "v", 40, 5000), ("v", "t", 40, 5000)])


@pytest.fixture
def fig1b():
    from lnanon.snapshot import load_snapshot

    return load_snapshot(DATA / "fig1b.json")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
