"""Write the small timelock example graph used by the CLI tests.

The observer ``a`` forwards to ``nxt`` over a channel with delta 2, so a
payment arriving with TTL 9 leaves with 7 blocks for the remaining hops.

    python3 scripts/make_fig1b_fixture.py tests/data/fig1b.json
"""

import sys
from fractions import Fraction

from lnanon.snapshot import ChannelPolicy, ChannelRecord, Client, NetworkGraph, NodeRecord, dump_snapshot

NODES = ["s1", "s2", "s3", "pre", "a", "nxt", "r1", "r2", "r3", "x", "y", "z"]
# (node_a, node_b, timelock delta used in both directions)
EDGES = [
    ("s1", "pre", 1), ("s2", "pre", 1), ("s3", "s1", 1), ("s2", "s3", 1),
    ("pre", "a", 3), ("a", "nxt", 2),
    ("nxt", "r1", 3), ("r1", "r2", 4), ("nxt", "x", 2), ("x", "y", 5),
    ("nxt", "z", 7), ("z", "r2", 1), ("y", "r3", 1), ("s3", "x", 2),
]


def build() -> NetworkGraph:
    nodes = [NodeRecord(n, Client.LND, True) for n in NODES]
    chans = []
    for i, (u, v, tl) in enumerate(EDGES):
        pol = ChannelPolicy(1000, Fraction(1, 10**6), tl)
        chans.append(ChannelRecord(f"ch{i:02d}", u, v, 1_000_000, 1000, pol, pol))
    return NetworkGraph(nodes, chans)


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "fig1b.json"
    dump_snapshot(build(), out)
    print(out)
