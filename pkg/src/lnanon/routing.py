"""Fee model, client cost functions and backward route search.

All routing arithmetic is exact rational (see :mod:`lnanon.rational`). Routes are
searched from the recipient towards the sender, so the amount carried by each
channel already includes the fees of every downstream intermediary.

The search is a label-setting Dijkstra that keeps up to ``k`` loop-free labels
per node (``k = 1`` for LND and c-Lightning, ``k = 3`` for Eclair). Every node
is treated as a fee-charging intermediary inside the search; the sender's own
first hop is priced separately, without a fee, when a concrete route is
requested.
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import NoRouteError, StructuralRouteError
from .rational import Q, to_q
from .snapshot import ChannelPolicy, Client, DirectedEdge, NetworkGraph

Amount = Union[int, Fraction]


@dataclass(frozen=True)
class CostParams:
    lnd_risk_factor: Fraction = Fraction(15, 10**9)
    cl_fuzz: Fraction = Fraction(5, 100)
    cl_risk_factor: Fraction = Fraction(10)
    cl_bias: Fraction = Fraction(1)
    eclair_tl_ratio: Fraction = Fraction(15, 100)
    eclair_cap_ratio: Fraction = Fraction(50, 100)
    eclair_age_ratio: Fraction = Fraction(35, 100)
    eclair_k: int = 3
    tl_bounds: tuple[int, int] = (9, 2016)
    cap_bounds: tuple[int, int] = (1, 10 * 10**8)  # satoshi
    age_bounds: tuple[int, int] = (0, 10**6)
    fuzz_enabled: bool = True
    fuzz_key: bytes = b"lnanon-fuzz"

    def __post_init__(self):
        for name in ("lnd_risk_factor", "cl_fuzz", "cl_risk_factor", "cl_bias",
                     "eclair_tl_ratio", "eclair_cap_ratio", "eclair_age_ratio"):
            v = getattr(self, name)
            object.__setattr__(self, name, to_q(v))
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("tl_bounds", "cap_bounds", "age_bounds"):
            lo, hi = getattr(self, name)
            if not hi > lo:
                raise ValueError(f"{name}: max must exceed min")
        if self.eclair_k < 1:
            raise ValueError("eclair_k must be >= 1")

    def k_for(self, client: Client) -> int:
        return self.eclair_k if client is Client.ECLAIR else 1


DEFAULT_PARAMS = CostParams()


# -- fees ------------------------------------------------------------------

def fee(policy: ChannelPolicy, amt: Amount) -> Fraction:
    """Forwarding fee charged for sending ``amt`` over a channel direction."""
    return policy.base_fee + policy.fee_rate * amt


def invert_fee(policy: ChannelPolicy, amt_in: Amount) -> Fraction:
    """Amount forwarded downstream given the amount received, ``amt_in``."""
    return (amt_in - policy.base_fee) / (1 + policy.fee_rate)


# -- cost functions --------------------------------------------------------

def lnd_cost(edge: DirectedEdge, amt: Amount, fee_: Amount,
             params: CostParams = DEFAULT_PARAMS, bias: Amount = 0) -> Fraction:
    return amt * edge.policy.timelock_delta * params.lnd_risk_factor + fee_ + bias


def clightning_cost(edge: DirectedEdge, amt: Amount, fee_: Amount, scale: Amount = 1,
                    params: CostParams = DEFAULT_PARAMS) -> Fraction:
    return (amt + scale * fee_) * edge.policy.timelock_delta * params.cl_risk_factor + params.cl_bias


def _normalize(value: int, bounds: tuple[int, int]) -> Fraction:
    lo, hi = bounds
    v = min(max(value, lo), hi)
    return Q(v - lo, hi - lo)


def eclair_weight(edge: DirectedEdge, params: CostParams = DEFAULT_PARAMS) -> Fraction:
    n_tl = _normalize(edge.policy.timelock_delta, params.tl_bounds)
    n_cap = _normalize(edge.capacity_sat, params.cap_bounds)
    n_age = _normalize(edge.age, params.age_bounds)
    return (n_tl * params.eclair_tl_ratio + (1 - n_cap) * params.eclair_cap_ratio
            + n_age * params.eclair_age_ratio)


def eclair_cost(edge: DirectedEdge, amt: Amount, fee_: Amount,
                params: CostParams = DEFAULT_PARAMS) -> Fraction:
    return fee_ * eclair_weight(edge, params)


def fuzz_scale(channel_id: str, payment_id: str, params: CostParams = DEFAULT_PARAMS) -> Fraction:
    """Per-(channel, payment) c-Lightning scale in ``[1 - fuzz, 1 + fuzz]``.

    A keyed 64-bit hash stands in for c-Lightning's siphash, so the scale is
    stable for a payment and varies across payments.
    """
    h = hashlib.blake2b(f"{channel_id}|{payment_id}".encode(), digest_size=8,
                        key=params.fuzz_key[:64]).digest()
    u = Q(int.from_bytes(h, "big"), 2**64 - 1)
    return 1 - params.cl_fuzz + 2 * params.cl_fuzz * u


CostFn = Callable[[DirectedEdge, Fraction, bool], Fraction]


def cost_function(client: Client, params: CostParams = DEFAULT_PARAMS,
                  payment_id: Optional[str] = None) -> CostFn:
    """Edge cost ``f(edge, amount_over_edge, charges_fee)`` for a client.

    ``charges_fee`` is False only for the sender's own channel. c-Lightning
    fuzz applies when a payment id is given and fuzz is enabled; otherwise
    the scale is 1.
    """
    if client is Client.LND:
        def f(edge, amt, charges_fee):
            return lnd_cost(edge, amt, fee(edge.policy, amt) if charges_fee else 0, params)
    elif client is Client.CLIGHTNING:
        fuzzed = params.fuzz_enabled and payment_id is not None

        def f(edge, amt, charges_fee):
            scale = fuzz_scale(edge.channel_id, payment_id, params) if fuzzed else 1
            return clightning_cost(edge, amt, fee(edge.policy, amt) if charges_fee else 0, scale, params)
    elif client is Client.ECLAIR:
        weights: dict[tuple[str, str], Fraction] = {}

        def f(edge, amt, charges_fee):
            if not charges_fee:
                return Q(0)
            w = weights.get((edge.channel_id, edge.src))
            if w is None:
                w = weights[(edge.channel_id, edge.src)] = eclair_weight(edge, params)
            return fee(edge.policy, amt) * w
    else:
        raise ValueError(client)
    return f


# -- routes ----------------------------------------------------------------

class Hop(NamedTuple):
    src: str
    dst: str
    channel_id: str


@dataclass(frozen=True)
class Route:
    """A path with per-hop forwarded amounts and per-node residual timelocks.

    ``amounts[i]`` is carried by ``hops[i]``; ``residual_timelocks[i]`` is the
    total timelock from ``nodes[i]`` to the recipient, ending at 0.
    ``inbound_amount`` is set for routes whose first node forwards as an
    intermediary: it is what that node must receive, its own fee included.
    """

    hops: tuple[Hop, ...]
    amounts: tuple[Fraction, ...]
    residual_timelocks: tuple[int, ...]
    cost: Optional[Fraction] = None
    inbound_amount: Optional[Fraction] = None

    @property
    def nodes(self) -> tuple[str, ...]:
        if not self.hops:
            return ()
        return (self.hops[0].src,) + tuple(h.dst for h in self.hops)

    @property
    def sender(self) -> str:
        return self.hops[0].src

    @property
    def recipient(self) -> str:
        return self.hops[-1].dst

    @property
    def amount(self) -> Fraction:
        return self.amounts[-1]

    @property
    def total_fee(self) -> Fraction:
        start = self.inbound_amount if self.inbound_amount is not None else self.amounts[0]
        return start - self.amounts[-1]

    @property
    def total_timelock(self) -> int:
        return self.residual_timelocks[0]

    def __len__(self) -> int:
        return len(self.hops)


def _resolve_hops(graph: NetworkGraph, path: Sequence) -> list[DirectedEdge]:
    edges = []
    if path and isinstance(path[0], (tuple, list)):
        for h in path:
            src, dst, cid = h
            try:
                e = graph.edge(cid, src)
            except KeyError:
                raise StructuralRouteError(f"no enabled channel {cid!r} from {src!r}") from None
            if e.dst != dst:
                raise StructuralRouteError(f"channel {cid!r} does not connect {src!r} to {dst!r}")
            edges.append(e)
    else:
        for u, v in zip(path, path[1:]):
            cands = graph.edges_between(u, v) if u in graph else []
            if not cands:
                raise StructuralRouteError(f"no enabled channel from {u!r} to {v!r}")
            edges.append(cands[0])
    return edges


def annotate_route(graph: NetworkGraph, path: Sequence, amount: Amount,
                   intermediary_source: bool = False, cost: Optional[Fraction] = None) -> Route:
    """Compute per-hop amounts and residual timelocks for a fixed path.

    ``path`` is either a node list (the lowest channel id is used between
    consecutive nodes) or a list of ``(src, dst, channel_id)`` hops.
    """
    edges = _resolve_hops(graph, path)
    if not edges:
        raise StructuralRouteError("a route needs at least one hop")
    seen = {edges[0].src}
    for e in edges:
        if e.dst in seen:
            raise StructuralRouteError(f"route revisits node {e.dst!r}")
        seen.add(e.dst)
    amount = to_q(amount)
    amounts = [amount]
    for i in range(len(edges) - 1, 0, -1):
        amounts.append(amounts[-1] + fee(edges[i].policy, amounts[-1]))
    amounts.reverse()
    residual = [0]
    for e in reversed(edges):
        residual.append(residual[-1] + e.policy.timelock_delta)
    residual.reverse()
    inbound = amounts[0] + fee(edges[0].policy, amounts[0]) if intermediary_source else None
    hops = tuple(Hop(e.src, e.dst, e.channel_id) for e in edges)
    return Route(hops, tuple(amounts), tuple(residual), cost, inbound)


def route_cost(graph: NetworkGraph, route: Route, client: Client,
               params: CostParams = DEFAULT_PARAMS, payment_id: Optional[str] = None) -> Fraction:
    """Evaluate the client cost of an annotated route (sender hop fee-free)."""
    f = cost_function(client, params, payment_id)
    total = Q(0)
    for i, (h, amt) in enumerate(zip(route.hops, route.amounts)):
        e = graph.edge(h.channel_id, h.src)
        total += f(e, amt, i > 0 or route.inbound_amount is not None)
    return total


# -- label-setting search --------------------------------------------------

class Label:
    """One settled path from ``node`` to the recipient."""

    __slots__ = ("node", "cost", "amount_in", "edge", "next", "hops", "nodes", "chans")

    def __init__(self, node, cost, amount_in, edge, nxt, hops, nodes, chans):
        self.node = node
        self.cost = cost
        self.amount_in = amount_in
        self.edge = edge
        self.next = nxt
        self.hops = hops
        self.nodes = nodes
        self.chans = chans

    @property
    def key(self):
        return (self.cost, self.hops, self.nodes, self.chans)

    def hop_list(self) -> tuple[Hop, ...]:
        out = []
        lab = self
        while lab.edge is not None:
            out.append(Hop(lab.edge.src, lab.edge.dst, lab.edge.channel_id))
            lab = lab.next
        return tuple(out)

    def amounts(self) -> tuple[Fraction, ...]:
        out = []
        lab = self
        while lab.edge is not None:
            out.append(lab.next.amount_in)
            lab = lab.next
        return tuple(out)

    def residuals(self) -> tuple[int, ...]:
        tls = []
        lab = self
        while lab.edge is not None:
            tls.append(lab.edge.policy.timelock_delta)
            lab = lab.next
        res = [0]
        for t in reversed(tls):
            res.append(res[-1] + t)
        return tuple(reversed(res))

    def contains(self, other: "Label") -> bool:
        """True if ``other`` is a suffix of this label's path."""
        lab = self
        while lab is not None:
            if lab is other:
                return True
            lab = lab.next
        return False

    def to_route(self) -> Route:
        return Route(self.hop_list(), self.amounts(), self.residuals(), self.cost, self.amount_in)

    def __repr__(self) -> str:
        return f"Label({'->'.join(self.nodes)}, cost={float(self.cost):.6g})"


class BackwardSearch:
    """Lazy label-setting search towards ``recipient`` at a delivered amount.

    Labels settle in key order ``(cost, hops, node ids, channel ids)``, which
    fixes tie-breaking. Callers can pull labels one node at a time; the
    search only advances as far as needed.
    """

    def __init__(self, graph: NetworkGraph, recipient: str, amount: Amount, cost_fn: CostFn, k: int = 1):
        if recipient not in graph:
            raise KeyError(recipient)
        self.graph = graph
        self.recipient = recipient
        self.amount = to_q(amount)
        self.cost_fn = cost_fn
        self.k = k
        root = Label(recipient, Q(0), self.amount, None, None, 0, (recipient,), ())
        self.labels: dict[str, list[Label]] = {recipient: [root]}
        self.settled: list[Label] = []
        self._heap: list = []
        self._relax(root)

    @property
    def exhausted(self) -> bool:
        return not self._heap

    def min_pending_cost(self) -> Optional[Fraction]:
        return self._heap[0][0] if self._heap else None

    def _relax(self, lab: Label) -> None:
        amt = lab.amount_in
        for e in self.graph.in_edges(lab.node):
            u = e.src
            if u in lab.nodes or amt > e.capacity_msat:
                continue
            cost = lab.cost + self.cost_fn(e, amt, True)
            nodes = (u,) + lab.nodes
            chans = (e.channel_id,) + lab.chans
            heapq.heappush(self._heap, (cost, lab.hops + 1, nodes, chans, e, lab))

    def step(self) -> Optional[Label]:
        """Settle the next label; return it, or None when the search is done."""
        while self._heap:
            cost, hops, nodes, chans, e, nxt = heapq.heappop(self._heap)
            u = nodes[0]
            have = self.labels.setdefault(u, [])
            if len(have) >= self.k:
                continue
            lab = Label(u, cost, nxt.amount_in + fee(e.policy, nxt.amount_in), e, nxt, hops, nodes, chans)
            have.append(lab)
            self.settled.append(lab)
            self._relax(lab)
            return lab
        return None

    def iter_labels(self, node: str) -> Iterator[Label]:
        """Yield ``node``'s labels best first, advancing the search lazily."""
        i = 0
        while i < self.k:
            have = self.labels.get(node, ())
            if i < len(have):
                yield have[i]
                i += 1
            elif node == self.recipient or self.step() is None:
                return

    def labels_of(self, node: str) -> list[Label]:
        return list(self.iter_labels(node))

    def run(self) -> "BackwardSearch":
        while self.step() is not None:
            pass
        return self


def _search(graph, recipient, amount, client, params, payment_id=None, k=None) -> BackwardSearch:
    return BackwardSearch(graph, recipient, amount, cost_function(client, params, payment_id),
                          params.k_for(client) if k is None else k)


def dijkstra_tree(graph: NetworkGraph, recipient: str, amt: Amount, client: Client = Client.LND,
                  params: CostParams = DEFAULT_PARAMS) -> dict[str, Route]:
    """Best intermediary route from every node that can reach ``recipient``."""
    s = _search(graph, recipient, amt, client, params, k=1).run()
    return {n: labs[0].to_route() for n, labs in s.labels.items() if n != recipient and labs}


def k_route_tree(graph: NetworkGraph, recipient: str, amt: Amount, client: Client = Client.ECLAIR,
                 params: CostParams = DEFAULT_PARAMS, k: Optional[int] = None) -> dict[str, list[Route]]:
    s = _search(graph, recipient, amt, client, params, k=k).run()
    return {n: [lab.to_route() for lab in labs] for n, labs in s.labels.items() if n != recipient and labs}


def _sender_candidates(graph: NetworkGraph, search: BackwardSearch, sender: str, k: int,
                       check_balance: bool) -> list[tuple]:
    """Best ``k`` sender routes as (key, first edge, label) triples.

    The sender's first channel carries no fee. Candidate first hops whose
    downstream label passes through the sender are skipped (loops).
    """
    out_edges = graph.out_edges(sender)
    by_dst: dict[str, list[DirectedEdge]] = {}
    for e in out_edges:
        by_dst.setdefault(e.dst, []).append(e)
    best: list[tuple] = []
    seen_labels: dict[str, int] = {}

    def consider(lab: Label) -> None:
        for e in by_dst.get(lab.node, ()):
            amt = lab.amount_in
            if sender in lab.nodes or amt > e.capacity_msat:
                continue
            if check_balance and graph.balance(e) < amt:
                continue
            cost = lab.cost + search.cost_fn(e, amt, False)
            key = (cost, lab.hops + 1, (sender,) + lab.nodes, (e.channel_id,) + lab.chans)
            best.append((key, e, lab))
        best.sort(key=lambda t: t[0])
        del best[k:]

    def absorb() -> None:
        for node in by_dst:
            labs = search.labels.get(node, ())
            for lab in labs[seen_labels.get(node, 0):]:
                consider(lab)
            seen_labels[node] = len(labs)

    absorb()
    while not search.exhausted:
        if len(best) >= k and search.min_pending_cost() > best[-1][0][0]:
            break
        lab = search.step()
        if lab is not None and lab.node in by_dst:
            absorb()
    return best


def _combo_route(graph: NetworkGraph, edge: DirectedEdge, lab: Label, cost: Fraction) -> Route:
    hops = (Hop(edge.src, edge.dst, edge.channel_id),) + lab.hop_list()
    amounts = (lab.amount_in,) + lab.amounts()
    res = lab.residuals()
    residuals = (res[0] + edge.policy.timelock_delta,) + res
    return Route(hops, amounts, residuals, cost)


def find_k_routes(graph: NetworkGraph, sender: str, recipient: str, amt: Amount,
                  params: CostParams = DEFAULT_PARAMS, k: Optional[int] = None,
                  client: Client = Client.ECLAIR, payment_id: Optional[str] = None,
                  check_balance: bool = True) -> list[Route]:
    """Up to ``k`` cheapest loop-free routes, ascending by cost.

    Each node keeps ``k`` labels in a single backward pass (a k-label
    generalization of Dijkstra), rather than running Yen's spur searches.
    """
    if sender == recipient:
        raise ValueError("sender and recipient must differ")
    if amt <= 0:
        raise ValueError("amount must be positive")
    k = params.eclair_k if k is None else k
    search = _search(graph, recipient, amt, client, params, payment_id, k=k)
    cands = _sender_candidates(graph, search, sender, k, check_balance)
    return [_combo_route(graph, e, lab, key[0]) for key, e, lab in cands]


def find_route(graph: NetworkGraph, sender: str, recipient: str, amt: Amount,
               client: Client = Client.LND, params: CostParams = DEFAULT_PARAMS,
               seed: Optional[int] = None, payment_id: Optional[str] = None,
               check_balance: bool = True) -> Route:
    """Route a payment the way ``client`` would.

    Eclair draws uniformly among its ``k`` cheapest routes using ``seed``
    (the cheapest when ``seed`` is None). Raises :class:`NoRouteError`.
    """
    k = params.k_for(client)
    routes = find_k_routes(graph, sender, recipient, amt, params, k, client, payment_id, check_balance)
    if not routes:
        raise NoRouteError(f"no feasible route {sender} -> {recipient} for {amt} msat")
    if client is Client.ECLAIR and seed is not None and len(routes) > 1:
        return routes[int(np.random.default_rng(seed).integers(len(routes)))]
    return routes[0]


def enumerate_simple_paths(graph: NetworkGraph, src: str, dst: str,
                           max_hops: Optional[int] = None) -> Iterable[list[DirectedEdge]]:
    """Every loop-free directed channel path from ``src`` to ``dst`` (DFS)."""
    stack = [(src, [], {src})]
    while stack:
        node, path, seen = stack.pop()
        if node == dst and path:
            yield path
            continue
        if max_hops is not None and len(path) >= max_hops:
            continue
        for e in graph.out_edges(node):
            if e.dst not in seen:
                stack.append((e.dst, path + [e], seen | {e.dst}))
