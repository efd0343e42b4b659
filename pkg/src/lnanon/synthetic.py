"""Seeded synthetic topologies for experiments and tests.

Timelock deltas follow the observed snapshot mix (144, 40 and 30 blocks in
proportion 51:25:10). Fees and capacities are drawn from small menus that
resemble common node defaults.
"""

from __future__ import annotations

import networkx as nx
import numpy as np

from .rational import Q
from .snapshot import ChannelPolicy, ChannelRecord, Client, NetworkGraph, NodeRecord

TIMELOCKS = (144, 40, 30)
TIMELOCK_WEIGHTS = (0.51, 0.25, 0.10)
BASE_FEES_MSAT = (1000,) * 9 + (2000,)
FEE_RATES_PPM = (1,) * 8 + (10, 100)


def _node_ids(n: int) -> list[str]:
    width = len(str(max(n - 1, 0)))
    return [f"n{i:0{width}d}" for i in range(n)]


# wider menus, for stress tests where fees rather than hop counts drive routing
WIDE_BASE_FEES_MSAT = (0, 1000, 1000, 1000, 2000)
WIDE_FEE_RATES_PPM = (1, 10, 100, 100, 500, 1000)


def _policy(rng: np.random.Generator, base_fees=BASE_FEES_MSAT, fee_rates=FEE_RATES_PPM) -> ChannelPolicy:
    p = np.asarray(TIMELOCK_WEIGHTS) / sum(TIMELOCK_WEIGHTS)
    tl = int(rng.choice(TIMELOCKS, p=p))
    bf = int(rng.choice(base_fees))
    ppm = int(rng.choice(fee_rates))
    return ChannelPolicy(bf, Q(ppm, 10**6), tl)


def graph_from_edges(n: int, edges, seed: int, min_cap_sat: int = 200_000,
                     max_cap_sat: int = 20_000_000, base_fees=BASE_FEES_MSAT,
                     fee_rates=FEE_RATES_PPM) -> NetworkGraph:
    """Attach random policies, capacities and ages to an undirected edge list.

    The default fee menus are dominated by the common 1000 msat / 1 ppm
    setting, which keeps routes short as on the real network.
    """
    rng = np.random.default_rng(seed)
    ids = _node_ids(n)
    nodes = [NodeRecord(i, Client.LND, True) for i in ids]
    channels = []
    lo, hi = np.log(min_cap_sat), np.log(max_cap_sat)
    for k, (u, v) in enumerate(sorted((min(a, b), max(a, b)) for a, b in edges)):
        cap = int(np.exp(rng.uniform(lo, hi)))
        age = int(rng.integers(0, 100_000))
        ch = ChannelRecord(f"c{k:05d}", ids[u], ids[v], cap, age, _policy(rng, base_fees, fee_rates),
                           _policy(rng, base_fees, fee_rates))
        ch.balance_a = Q(ch.capacity_msat // 2)
        ch.balance_b = Q(ch.capacity_msat - ch.capacity_msat // 2)
        channels.append(ch)
    return NetworkGraph(nodes, channels)


def scale_free_graph(n: int, m: int = 2, seed: int = 0, **kw) -> NetworkGraph:
    """Barabasi-Albert preferential-attachment topology with random policies."""
    G = nx.barabasi_albert_graph(n, m, seed=seed)
    return graph_from_edges(n, G.edges(), seed + 1, **kw)


def random_connected_graph(n: int, extra_edges: int, seed: int, **kw) -> NetworkGraph:
    """Random spanning tree plus ``extra_edges`` distinct chords."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    edges = set()
    for i in range(1, n):
        j = int(rng.integers(0, i))
        a, b = int(order[i]), int(order[j])
        edges.add((min(a, b), max(a, b)))
    attempts = 0
    target = len(edges) + extra_edges
    while len(edges) < target and attempts < 50 * max(extra_edges, 1):
        a, b = (int(x) for x in rng.integers(0, n, size=2))
        if a != b:
            edges.add((min(a, b), max(a, b)))
        attempts += 1
    return graph_from_edges(n, edges, seed + 7919, **kw)
