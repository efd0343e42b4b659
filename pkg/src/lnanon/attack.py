"""Sender and recipient anonymity sets from a single intermediary observation.

Phase I enumerates loop-free paths from the observer's successor whose
timelocks sum to the observed residual (or, under shadow routing, every
loop-free path up to the depth cap). Phase II keeps a candidate recipient
only if the client's own route computation towards it would reproduce the
observed sub-path, and then collects every node that could have started
such a route.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Optional, Union

from .errors import InconsistentObservation
from .payment import HopObservation
from .routing import (DEFAULT_PARAMS, BackwardSearch, CostParams, Hop, Label, annotate_route,
                      cost_function, invert_fee)
from .snapshot import Client, DirectedEdge, NetworkGraph

BRUTE_FORCE_MAX_NODES = 30


@dataclass(frozen=True)
class CandidatePath:
    """A Phase I path starting at the observer's successor."""

    nodes: tuple[str, ...]
    hops: tuple[Hop, ...]
    amount_at_terminal: Fraction
    timelock_consumed: int

    @property
    def terminal(self) -> str:
        return self.nodes[-1]

    @property
    def channel_ids(self) -> tuple[str, ...]:
        return tuple(h.channel_id for h in self.hops)


@dataclass
class AnonymityResult:
    observer: str
    payment_id: str
    senders_by_recipient: dict[str, set[str]] = field(default_factory=dict)
    phase1_complete: bool = True
    depth_used: int = 0
    shadow: bool = False
    n_candidates: int = 0

    @property
    def recipients(self) -> set[str]:
        return {r for r, s in self.senders_by_recipient.items() if s}

    @property
    def senders(self) -> set[str]:
        out: set[str] = set()
        for s in self.senders_by_recipient.values():
            out |= s
        return out


# -- client views ----------------------------------------------------------

@dataclass(frozen=True)
class AssumeAll:
    """Every sender is assumed to run ``client``."""

    client: Client = Client.LND


@dataclass(frozen=True)
class Known:
    """Node clients are public; ``None`` means read them from the graph."""

    assignments: Optional[Mapping[str, Client]] = None


@dataclass(frozen=True)
class Blind:
    """Clients unknown: union of the outcomes under each client."""


ClientView = Union[AssumeAll, Known, Blind]


def expand_view(graph: NetworkGraph, view: ClientView) -> list[tuple[Client, Optional[frozenset]]]:
    """(client, allowed senders or None for unrestricted) pairs to evaluate."""
    if isinstance(view, AssumeAll):
        return [(view.client, None)]
    if isinstance(view, Blind):
        return [(c, None) for c in Client]
    if isinstance(view, Known):
        assign = view.assignments
        if assign is None:
            assign = {n: rec.client for n, rec in graph.nodes.items()}
        groups: dict[Client, set[str]] = {}
        for n, c in assign.items():
            groups.setdefault(c, set()).add(n)
        return [(c, frozenset(groups[c])) for c in Client if c in groups]
    raise TypeError(f"unknown client view {view!r}")


@dataclass(frozen=True)
class AttackConfig:
    depth: int = 3
    shadow: bool = False
    view: ClientView = AssumeAll(Client.LND)
    params: CostParams = DEFAULT_PARAMS

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be >= 0")


# -- observation helpers ---------------------------------------------------

def _resolve_edge(graph: NetworkGraph, src: str, dst: str, channel_id: Optional[str]) -> DirectedEdge:
    if src not in graph or dst not in graph:
        raise InconsistentObservation(f"unknown node in hop {src!r} -> {dst!r}")
    if channel_id is not None:
        try:
            e = graph.edge(channel_id, src)
        except KeyError:
            raise InconsistentObservation(f"channel {channel_id!r} has no enabled direction from {src!r}") from None
        if e.dst != dst:
            raise InconsistentObservation(f"channel {channel_id!r} does not connect {src!r} to {dst!r}")
        return e
    edges = graph.edges_between(src, dst)
    if len(edges) != 1:
        raise InconsistentObservation(
            f"{len(edges)} enabled channels from {src!r} to {dst!r}; the channel id is needed")
    return edges[0]


def observation_edges(graph: NetworkGraph, obs: HopObservation) -> tuple[DirectedEdge, DirectedEdge]:
    """(PRE -> observer, observer -> NEXT) channel directions of ``obs``."""
    return (_resolve_edge(graph, obs.pre, obs.observer, obs.in_channel),
            _resolve_edge(graph, obs.observer, obs.next, obs.out_channel))


def downstream_state(graph: NetworkGraph, obs: HopObservation) -> tuple[int, Fraction]:
    """Residual timelock from NEXT and the exact amount NEXT receives."""
    _, out_edge = observation_edges(graph, obs)
    ttl_next = obs.ttl_in - out_edge.policy.timelock_delta
    amt_next = invert_fee(out_edge.policy, obs.amt_in)
    return ttl_next, amt_next


# -- phase I ---------------------------------------------------------------

class _Partial(NamedTuple):
    nodes: tuple[str, ...]
    hops: tuple[Hop, ...]
    ttl: int
    amount: Fraction


def _extend(graph: NetworkGraph, p: _Partial, e: DirectedEdge, excluded: set[str],
            ttl_limit: Optional[int]) -> Optional[_Partial]:
    if e.dst in excluded or e.dst in p.nodes:
        return None
    ttl = p.ttl + e.policy.timelock_delta
    if ttl_limit is not None and ttl > ttl_limit:
        return None
    amt = invert_fee(e.policy, p.amount)
    if amt <= 0 or amt > e.capacity_msat:
        return None
    return _Partial(p.nodes + (e.dst,), p.hops + (Hop(e.src, e.dst, e.channel_id),), ttl, amt)


def _enumerate(graph: NetworkGraph, obs: HopObservation, d: int, shadow: bool):
    ttl_next, amt_next = downstream_state(graph, obs)
    if ttl_next < 0:
        raise InconsistentObservation(
            f"observed ttl {obs.ttl_in} is below the outgoing delta of {obs.observer!r}")
    if amt_next <= 0:
        raise InconsistentObservation(f"observed amount {obs.amt_in} does not cover the outgoing fee")
    excluded = {obs.observer, obs.pre}
    limit = None if shadow else ttl_next

    def accept(p: _Partial) -> bool:
        return shadow or p.ttl == ttl_next

    start = _Partial((obs.next,), (), 0, amt_next)
    frontier = [start]
    found = [start] if accept(start) else []
    for _ in range(d):
        nxt = []
        for p in frontier:
            for e in graph.out_edges(p.nodes[-1]):
                q = _extend(graph, p, e, excluded, limit)
                if q is not None:
                    nxt.append(q)
                    if accept(q):
                        found.append(q)
        frontier = nxt
        if not frontier:
            break
    complete = not any(_extend(graph, p, e, excluded, limit) is not None
                       for p in frontier for e in graph.out_edges(p.nodes[-1]))
    cands = [CandidatePath(p.nodes, p.hops, p.amount, p.ttl) for p in found]
    return cands, complete


def phase1_enumerate(graph: NetworkGraph, obs: HopObservation, d: int) -> tuple[list[CandidatePath], bool]:
    """Loop-free paths from NEXT, at most ``d`` hops, consuming exactly the residual timelock.

    ``complete`` is False when some depth-``d`` path could still be extended.
    """
    return _enumerate(graph, obs, d, shadow=False)


def phase1_shadow(graph: NetworkGraph, obs: HopObservation, d: int) -> tuple[list[CandidatePath], bool]:
    """As :func:`phase1_enumerate` without the timelock constraint."""
    return _enumerate(graph, obs, d, shadow=True)


# -- phase II --------------------------------------------------------------

def _matching_label(search: BackwardSearch, node: str, chans: tuple[str, ...]) -> Optional[Label]:
    for lab in search.iter_labels(node):
        if lab.chans == chans:
            return lab
    return None


def _descendants(search: BackwardSearch, anchor: Label) -> list[Label]:
    """Every settled label whose path has ``anchor``'s path as a suffix."""
    search.run()
    marked = {id(anchor)}
    out = [anchor]
    for lab in search.settled:
        if lab.next is not None and id(lab.next) in marked and id(lab) not in marked:
            marked.add(id(lab))
            out.append(lab)
    return out


class SearchCache:
    """Backward searches keyed by (client, recipient, delivered amount)."""

    def __init__(self, graph: NetworkGraph, params: CostParams):
        self.graph = graph
        self.params = params
        self._cache: dict = {}

    def get(self, client: Client, recipient: str, amount: Fraction) -> BackwardSearch:
        key = (client, recipient, amount)
        s = self._cache.get(key)
        if s is None:
            s = BackwardSearch(self.graph, recipient, amount, cost_function(client, self.params),
                               self.params.k_for(client))
            self._cache[key] = s
        return s


def _senders_for(graph: NetworkGraph, search: BackwardSearch, cand: CandidatePath,
                 in_edge: DirectedEdge, out_edge: DirectedEdge,
                 allowed: Optional[frozenset]) -> Optional[set[str]]:
    """Sender set for one candidate, or None if the candidate is rejected."""
    chans = cand.channel_ids
    # intermediate nodes first: cheap early rejection before A's label settles
    for j in range(len(cand.nodes) - 2, -1, -1):
        if _matching_label(search, cand.nodes[j], chans[j:]) is None:
            return None
    a_chans = (out_edge.channel_id,) + chans
    lab_a = _matching_label(search, out_edge.src, a_chans)
    if lab_a is None:
        return None
    pre = in_edge.src
    senders: set[str] = set()
    if allowed is None or pre in allowed:
        senders.add(pre)
    lab_pre = _matching_label(search, pre, (in_edge.channel_id,) + a_chans)
    if lab_pre is None:
        return senders
    for lab in _descendants(search, lab_pre):
        for e in graph.in_edges(lab.node):
            s = e.src
            if s in lab.nodes or lab.amount_in > e.capacity_msat:
                continue
            if allowed is None or s in allowed:
                senders.add(s)
    return senders


def phase2_filter(graph: NetworkGraph, candidates: Iterable[CandidatePath], obs: HopObservation,
                  view: ClientView = AssumeAll(Client.LND), params: CostParams = DEFAULT_PARAMS,
                  cache: Optional[SearchCache] = None) -> AnonymityResult:
    """Keep candidates whose recomputed route reproduces PRE -> A -> NEXT.

    Under each client (per the view), a candidate recipient survives if the
    observer's recomputed route to it equals the candidate path. PRE is then
    a sender; if PRE's own recomputed route also matches, every node whose
    route runs through PRE contributes its channel neighbours that could
    have handed it the payment.
    """
    candidates = list(candidates)
    in_edge, out_edge = observation_edges(graph, obs)
    cache = cache or SearchCache(graph, params)
    result = AnonymityResult(obs.observer, obs.payment_id, n_candidates=len(candidates))
    for client, allowed in expand_view(graph, view):
        for cand in candidates:
            search = cache.get(client, cand.terminal, cand.amount_at_terminal)
            senders = _senders_for(graph, search, cand, in_edge, out_edge, allowed)
            if senders:
                result.senders_by_recipient.setdefault(cand.terminal, set()).update(senders)
    return result


def attack(graph: NetworkGraph, obs: HopObservation, config: AttackConfig = AttackConfig(),
           cache: Optional[SearchCache] = None) -> AnonymityResult:
    """Phase I (normal or shadow) followed by Phase II.

    ``cache`` may be shared across observations on the same graph; only
    capacities and policies are read, never balances.
    """
    enum = phase1_shadow if config.shadow else phase1_enumerate
    cands, complete = enum(graph, obs, config.depth)
    res = phase2_filter(graph, cands, obs, config.view, config.params, cache)
    res.phase1_complete = complete
    res.depth_used = config.depth
    res.shadow = config.shadow
    return res


# -- collusion -------------------------------------------------------------

class CollusionResult(NamedTuple):
    senders: set[str]
    recipients: set[str]
    n_used: int
    fallback: bool


def collude(results: list[AnonymityResult], complete_only: bool = False) -> CollusionResult:
    """Intersect the sets of several observers of one payment.

    With ``complete_only`` only observers whose Phase I finished are used;
    if none did, all are used and ``fallback`` is set.
    """
    if not results:
        raise ValueError("collude needs at least one result")
    if len({r.payment_id for r in results}) != 1:
        raise ValueError("results belong to different payments")
    used = results
    fallback = False
    if complete_only:
        used = [r for r in results if r.phase1_complete]
        if not used:
            used, fallback = results, True
    senders = set.intersection(*(r.senders for r in used))
    recipients = set.intersection(*(r.recipients for r in used))
    return CollusionResult(senders, recipients, len(used), fallback)


# -- verification oracle ---------------------------------------------------

def _exact_ttl_amounts(graph: NetworkGraph, start: str, amount: Fraction, ttl: int,
                       excluded: set[str]) -> dict[str, set[Fraction]]:
    """Delivered amounts per terminal over every simple path with timelock sum ``ttl``."""
    out: dict[str, set[Fraction]] = {}

    def dfs(node: str, amt: Fraction, used: int, seen: set[str]) -> None:
        if used == ttl:
            out.setdefault(node, set()).add(amt)
        for e in graph.out_edges(node):
            if e.dst in seen or e.dst in excluded:
                continue
            t = used + e.policy.timelock_delta
            if t > ttl:
                continue
            nxt = invert_fee(e.policy, amt)
            if nxt <= 0:
                continue
            seen.add(e.dst)
            dfs(e.dst, nxt, t, seen)
            seen.discard(e.dst)

    dfs(start, amount, 0, {start})
    return out


def brute_force_anonymity(graph: NetworkGraph, obs: HopObservation,
                          config: AttackConfig = AttackConfig()) -> tuple[set[str], set[str]]:
    """Exhaustive (senders, recipients) consistent with ``obs``.

    For every recipient and every delivered amount reachable by a simple
    timelock-consistent path, and for every sender and first channel (the
    sender's own balances are unknown, so any first hop with enough capacity
    is possible), the client's route is recomputed and kept if it runs
    PRE -> A -> NEXT with the observed amount and timelock at A.
    """
    if len(graph) > BRUTE_FORCE_MAX_NODES:
        raise ValueError(f"brute force refuses graphs above {BRUTE_FORCE_MAX_NODES} nodes")
    if config.shadow:
        raise ValueError("brute force needs the exact timelock; shadow mode is unsupported")
    in_edge, out_edge = observation_edges(graph, obs)
    ttl_next = obs.ttl_in - out_edge.policy.timelock_delta
    amt_next = invert_fee(out_edge.policy, obs.amt_in)
    if ttl_next < 0 or amt_next <= 0:
        return set(), set()
    pair = (Hop(in_edge.src, in_edge.dst, in_edge.channel_id),
            Hop(out_edge.src, out_edge.dst, out_edge.channel_id))
    amounts = _exact_ttl_amounts(graph, obs.next, amt_next, ttl_next, {obs.observer, obs.pre})
    S: set[str] = set()
    R: set[str] = set()
    for client, allowed in expand_view(graph, config.view):
        f = cost_function(client, config.params)
        k = config.params.k_for(client)
        for r in sorted(amounts):
            for a in sorted(amounts[r]):
                search = BackwardSearch(graph, r, a, f, k).run()
                for x in sorted(search.labels):
                    for lab in search.labels[x]:
                        tail = lab.hop_list()
                        for e in graph.in_edges(x):
                            s = e.src
                            if s in lab.nodes or lab.amount_in > e.capacity_msat:
                                continue
                            if allowed is not None and s not in allowed:
                                continue
                            hops = (Hop(s, x, e.channel_id),) + tail
                            idx = next((i for i in range(len(hops) - 1) if hops[i:i + 2] == pair), None)
                            if idx is None:
                                continue
                            route = annotate_route(graph, hops, a)
                            if route.amounts[idx] == obs.amt_in and route.residual_timelocks[idx + 1] == obs.ttl_in:
                                S.add(s)
                                R.add(r)
    return S, R
