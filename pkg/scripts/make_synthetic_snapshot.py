"""Write a seeded scale-free snapshot in the JSON input format.

    python3 scripts/make_synthetic_snapshot.py --nodes 500 --m 2 --seed 1 out.json
"""

import argparse

from lnanon.snapshot import MEASURED_CLIENT_MIX, assign_clients, dump_snapshot, graph_stats
from lnanon.synthetic import scale_free_graph


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("out")
    p.add_argument("--nodes", type=int, default=500)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--mixed-clients", action="store_true", help="tag nodes with the 92/6/2 client mix")
    args = p.parse_args()
    g = scale_free_graph(args.nodes, args.m, seed=args.seed)
    if args.mixed_clients:
        g = assign_clients(g, MEASURED_CLIENT_MIX, args.seed)
    dump_snapshot(g, args.out)
    st = graph_stats(g)
    print(f"{args.out}: {st.n_nodes} nodes, {st.n_channels} channels, clients {st.client_histogram}")


if __name__ == "__main__":
    main()
