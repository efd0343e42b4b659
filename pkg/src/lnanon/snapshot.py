"""Network snapshot data model, loading, filtering and parameterization.

Amounts are millisatoshi. Channel capacities are kept in satoshi as published
and converted on demand. Fee rates are exact fractions so that fee inversion
downstream is lossless; balances are fractions for the same reason, since the
amounts forwarded over upstream hops carry proportional fees.
"""

from __future__ import annotations

import dataclasses
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import IO, Iterable, Mapping, NamedTuple, Union

import numpy as np

from .errors import ConfigError, IntegrityError, SnapshotParseError
from .rational import to_q

log = logging.getLogger(__name__)

MSAT_PER_SAT = 1000
PPM = 10**6


class Client(str, Enum):
    LND = "LND"
    CLIGHTNING = "CLightning"
    ECLAIR = "Eclair"

    @classmethod
    def parse(cls, value: str) -> "Client":
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        aliases = {
            "lnd": cls.LND,
            "clightning": cls.CLIGHTNING,
            "cln": cls.CLIGHTNING,
            "corelightning": cls.CLIGHTNING,
            "eclair": cls.ECLAIR,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown client {value!r}") from None


@dataclass(frozen=True)
class NodeRecord:
    node_id: str
    client: Client = Client.LND
    active: bool = True


@dataclass(frozen=True)
class ChannelPolicy:
    """Forwarding policy for one direction of a channel."""

    base_fee: int = 0
    fee_rate: Fraction = Fraction(0)
    timelock_delta: int = 0
    enabled: bool = True

    def __post_init__(self):
        if self.base_fee < 0 or self.fee_rate < 0 or self.timelock_delta < 0:
            raise ValueError(f"negative policy parameter in {self!r}")
        object.__setattr__(self, "fee_rate", to_q(self.fee_rate))

    @classmethod
    def from_ppm(cls, base_fee_msat: int, fee_rate_ppm, timelock_delta: int, enabled: bool = True):
        return cls(int(base_fee_msat), to_q(Fraction(str(fee_rate_ppm))) / PPM, int(timelock_delta), bool(enabled))

    @property
    def fee_rate_ppm(self) -> Fraction:
        return self.fee_rate * PPM


@dataclass
class ChannelRecord:
    channel_id: str
    node_a: str
    node_b: str
    capacity: int
    age: int = 0
    policy_ab: ChannelPolicy = field(default_factory=ChannelPolicy)
    policy_ba: ChannelPolicy = field(default_factory=ChannelPolicy)
    balance_a: Fraction = Fraction(0)
    balance_b: Fraction = Fraction(0)

    def __post_init__(self):
        if self.capacity < 0 or self.age < 0:
            raise ValueError(f"channel {self.channel_id!r}: negative capacity or age")
        if self.node_a == self.node_b:
            raise ValueError(f"channel {self.channel_id!r}: self loop")

    @property
    def capacity_msat(self) -> int:
        return self.capacity * MSAT_PER_SAT

    @property
    def endpoints(self) -> tuple[str, str]:
        return (self.node_a, self.node_b)

    def other(self, node: str) -> str:
        if node == self.node_a:
            return self.node_b
        if node == self.node_b:
            return self.node_a
        raise KeyError(node)

    def policy_from(self, node: str) -> ChannelPolicy:
        if node == self.node_a:
            return self.policy_ab
        if node == self.node_b:
            return self.policy_ba
        raise KeyError(node)

    def balance_of(self, node: str) -> Fraction:
        if node == self.node_a:
            return self.balance_a
        if node == self.node_b:
            return self.balance_b
        raise KeyError(node)

    def move(self, src: str, amount: Fraction) -> None:
        """Shift ``amount`` from ``src``'s side to the other side."""
        if src == self.node_a:
            self.balance_a -= amount
            self.balance_b += amount
        elif src == self.node_b:
            self.balance_b -= amount
            self.balance_a += amount
        else:
            raise KeyError(src)


class DirectedEdge(NamedTuple):
    src: str
    dst: str
    channel_id: str
    policy: ChannelPolicy
    capacity_msat: int
    capacity_sat: int
    age: int


class NetworkGraph:
    """Directed multigraph view over a set of nodes and bidirectional channels.

    The topology and policies are fixed after construction. Only the channel
    balances change, and only through :mod:`lnanon.payment`.
    """

    def __init__(self, nodes: Iterable[NodeRecord], channels: Iterable[ChannelRecord]):
        self.nodes: dict[str, NodeRecord] = {}
        for n in nodes:
            if n.node_id in self.nodes:
                raise IntegrityError(f"duplicate node id {n.node_id!r}")
            self.nodes[n.node_id] = n
        self.channels: dict[str, ChannelRecord] = {}
        for c in channels:
            if c.channel_id in self.channels:
                raise IntegrityError(f"duplicate channel id {c.channel_id!r}")
            for end in c.endpoints:
                if end not in self.nodes:
                    raise IntegrityError(f"channel {c.channel_id!r} references unknown node {end!r}")
            self.channels[c.channel_id] = c
        self._build_index()
        self.load_report: dict[str, int] = {}

    def _build_index(self) -> None:
        out: dict[str, list[DirectedEdge]] = {n: [] for n in self.nodes}
        inc: dict[str, list[DirectedEdge]] = {n: [] for n in self.nodes}
        chans: dict[str, list[str]] = {n: [] for n in self.nodes}
        for cid in sorted(self.channels):
            c = self.channels[cid]
            chans[c.node_a].append(cid)
            chans[c.node_b].append(cid)
            for src, dst, pol in ((c.node_a, c.node_b, c.policy_ab), (c.node_b, c.node_a, c.policy_ba)):
                if not pol.enabled:
                    continue
                e = DirectedEdge(src, dst, cid, pol, c.capacity_msat, c.capacity, c.age)
                out[src].append(e)
                inc[dst].append(e)
        self._out = out
        self._in = inc
        self._chans = chans
        self._edge = {(e.channel_id, e.src): e for es in out.values() for e in es}

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def node_ids(self) -> list[str]:
        return sorted(self.nodes)

    def out_edges(self, node: str) -> list[DirectedEdge]:
        """Enabled channel directions leaving ``node``, ordered by channel id."""
        return self._out[node]

    def in_edges(self, node: str) -> list[DirectedEdge]:
        return self._in[node]

    def edge(self, channel_id: str, src: str) -> DirectedEdge:
        """The enabled direction of ``channel_id`` leaving ``src``."""
        try:
            return self._edge[(channel_id, src)]
        except KeyError:
            raise KeyError(f"no enabled direction of channel {channel_id!r} from {src!r}") from None

    def edges_between(self, src: str, dst: str) -> list[DirectedEdge]:
        return [e for e in self._out.get(src, ()) if e.dst == dst]

    def degree(self, node: str) -> int:
        return len(self._chans[node])

    def neighbors(self, node: str) -> set[str]:
        return {self.channels[cid].other(node) for cid in self._chans[node]}

    def client_of(self, node: str) -> Client:
        return self.nodes[node].client

    def balance(self, edge: DirectedEdge) -> Fraction:
        return self.channels[edge.channel_id].balance_of(edge.src)

    def copy(self) -> "NetworkGraph":
        g = NetworkGraph(self.nodes.values(), (dataclasses.replace(c) for c in self.channels.values()))
        g.load_report = dict(self.load_report)
        return g

    def with_clients(self, clients: Mapping[str, Client]) -> "NetworkGraph":
        nodes = [dataclasses.replace(n, client=clients.get(n.node_id, n.client)) for n in self.nodes.values()]
        g = NetworkGraph(nodes, (dataclasses.replace(c) for c in self.channels.values()))
        g.load_report = dict(self.load_report)
        return g

    def to_networkx(self):
        """Undirected simple graph of channel endpoints (parallel channels collapsed)."""
        import networkx as nx

        G = nx.Graph()
        G.add_nodes_from(self.node_ids())
        G.add_edges_from(c.endpoints for c in self.channels.values())
        return G

    def __repr__(self) -> str:
        return f"NetworkGraph(nodes={len(self.nodes)}, channels={len(self.channels)})"


def filter_graph(nodes: Iterable[NodeRecord], channels: Iterable[ChannelRecord],
                 closed: Iterable[str] = ()) -> tuple[list[NodeRecord], list[ChannelRecord]]:
    """Drop inactive nodes, closed channels and channels touching inactive nodes."""
    closed = set(closed)
    keep_nodes = [n for n in nodes if n.active]
    live = {n.node_id for n in keep_nodes}
    keep_channels = [c for c in channels
                     if c.channel_id not in closed and c.node_a in live and c.node_b in live]
    return keep_nodes, keep_channels


# -- loading ---------------------------------------------------------------

Source = Union[bytes, str, Path, IO]


def _read_source(source: Source) -> object:
    if isinstance(source, Path):
        raw = source.read_bytes()
    elif isinstance(source, (bytes, bytearray)):
        raw = bytes(source)
    elif isinstance(source, str):
        if source.lstrip().startswith("{"):
            raw = source.encode()
        else:
            raw = Path(source).read_bytes()
    else:
        raw = source.read()
        if isinstance(raw, str):
            raw = raw.encode()
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SnapshotParseError(f"snapshot is not valid JSON: {exc}") from exc


def _req(rec: Mapping, key: str, what: str):
    if key not in rec:
        raise SnapshotParseError(f"{what}: missing field {key!r}")
    return rec[key]


def _as_int(value, what: str, key: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise SnapshotParseError(f"{what}: field {key!r} must be an integer, got {value!r}")
    try:
        out = int(value)
    except ValueError:
        raise SnapshotParseError(f"{what}: field {key!r} must be an integer, got {value!r}") from None
    if out < minimum:
        raise SnapshotParseError(f"{what}: field {key!r} must be >= {minimum}, got {out}")
    return out


def _parse_policy(rec, what: str) -> ChannelPolicy:
    if not isinstance(rec, Mapping):
        raise SnapshotParseError(f"{what}: policy must be an object")
    bf = _as_int(_req(rec, "base_fee_msat", what), what, "base_fee_msat")
    ppm_raw = _req(rec, "fee_rate_ppm", what)
    try:
        ppm = Fraction(str(ppm_raw))
    except (ValueError, ZeroDivisionError):
        raise SnapshotParseError(f"{what}: field 'fee_rate_ppm' is not a number: {ppm_raw!r}") from None
    if ppm < 0:
        raise SnapshotParseError(f"{what}: field 'fee_rate_ppm' must be >= 0")
    tl = _as_int(_req(rec, "timelock_delta", what), what, "timelock_delta")
    enabled = rec.get("enabled", True)
    if not isinstance(enabled, bool):
        raise SnapshotParseError(f"{what}: field 'enabled' must be a boolean")
    return ChannelPolicy(bf, ppm / PPM, tl, enabled)


def parse_snapshot(doc: object) -> NetworkGraph:
    if not isinstance(doc, Mapping):
        raise SnapshotParseError("snapshot top level must be an object")
    raw_nodes = doc.get("nodes", [])
    raw_channels = doc.get("channels", [])
    if not isinstance(raw_nodes, list) or not isinstance(raw_channels, list):
        raise SnapshotParseError("'nodes' and 'channels' must be lists")

    nodes: list[NodeRecord] = []
    for i, rec in enumerate(raw_nodes):
        if not isinstance(rec, Mapping):
            raise SnapshotParseError(f"node #{i}: record must be an object")
        nid = _req(rec, "id", f"node #{i}")
        what = f"node {nid!r}"
        try:
            client = Client.parse(_req(rec, "client", what))
        except ValueError as exc:
            raise SnapshotParseError(f"{what}: {exc}") from None
        active = rec.get("active", True)
        if not isinstance(active, bool):
            raise SnapshotParseError(f"{what}: field 'active' must be a boolean")
        nodes.append(NodeRecord(str(nid), client, active))

    channels: list[ChannelRecord] = []
    closed: list[str] = []
    for i, rec in enumerate(raw_channels):
        if not isinstance(rec, Mapping):
            raise SnapshotParseError(f"channel #{i}: record must be an object")
        cid = str(_req(rec, "id", f"channel #{i}"))
        what = f"channel {cid!r}"
        a = str(_req(rec, "node_a", what))
        b = str(_req(rec, "node_b", what))
        if a == b:
            raise SnapshotParseError(f"{what}: endpoints are identical")
        cap = _as_int(_req(rec, "capacity_sat", what), what, "capacity_sat")
        age = _as_int(rec.get("age_blocks", 0), what, "age_blocks")
        pab = _parse_policy(_req(rec, "policy_ab", what), what + " policy_ab")
        pba = _parse_policy(_req(rec, "policy_ba", what), what + " policy_ba")
        ch = ChannelRecord(cid, a, b, cap, age, pab, pba)
        if "balance_a_msat" in rec:
            bal = _as_int(rec["balance_a_msat"], what, "balance_a_msat")
            if bal > ch.capacity_msat:
                raise SnapshotParseError(f"{what}: balance_a_msat exceeds capacity")
            ch.balance_a, ch.balance_b = to_q(bal), to_q(ch.capacity_msat - bal)
        else:
            ch.balance_a, ch.balance_b = to_q(ch.capacity_msat), to_q(0)
        if rec.get("closed", False):
            closed.append(cid)
        channels.append(ch)

    known = {n.node_id for n in nodes}
    if len(known) != len(nodes):
        dup = [k for k, v in Counter(n.node_id for n in nodes).items() if v > 1]
        raise IntegrityError(f"duplicate node ids: {dup[:5]}")
    for c in channels:
        for end in c.endpoints:
            if end not in known:
                raise IntegrityError(f"channel {c.channel_id!r} references unknown node {end!r}")

    kept_nodes, kept_channels = filter_graph(nodes, channels, closed)
    g = NetworkGraph(kept_nodes, kept_channels)
    g.load_report = {
        "raw_nodes": len(nodes),
        "raw_channels": len(channels),
        "nodes": len(kept_nodes),
        "channels": len(kept_channels),
    }
    log.info("loaded snapshot: %d/%d nodes, %d/%d channels after filtering",
             len(kept_nodes), len(nodes), len(kept_channels), len(channels))
    return g


def load_snapshot(source: Source) -> NetworkGraph:
    """Parse a snapshot document (path, bytes, JSON text or binary stream)."""
    return parse_snapshot(_read_source(source))


def snapshot_dict(graph: NetworkGraph, include_balances: bool = False) -> dict:
    def pol(p: ChannelPolicy) -> dict:
        ppm = p.fee_rate_ppm
        return {
            "base_fee_msat": p.base_fee,
            "fee_rate_ppm": int(ppm) if ppm.denominator == 1 else str(ppm),
            "timelock_delta": p.timelock_delta,
            "enabled": p.enabled,
        }

    channels = []
    for cid in sorted(graph.channels):
        c = graph.channels[cid]
        rec = {
            "id": cid,
            "node_a": c.node_a,
            "node_b": c.node_b,
            "capacity_sat": c.capacity,
            "age_blocks": c.age,
            "policy_ab": pol(c.policy_ab),
            "policy_ba": pol(c.policy_ba),
        }
        if include_balances and c.balance_a.denominator == 1:
            rec["balance_a_msat"] = int(c.balance_a)
        channels.append(rec)
    nodes = [{"id": n.node_id, "client": n.client.value, "active": n.active}
             for n in (graph.nodes[k] for k in sorted(graph.nodes))]
    return {"nodes": nodes, "channels": channels}


def dump_snapshot(graph: NetworkGraph, sink: Union[str, Path, IO, None] = None, **kw) -> str:
    text = json.dumps(snapshot_dict(graph, **kw), indent=1, sort_keys=True)
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text)
    elif sink is not None:
        sink.write(text)
    return text


# -- parameterization --------------------------------------------------------

def assign_balances(graph: NetworkGraph, seed: int) -> NetworkGraph:
    """Split each channel's capacity uniformly at random between its endpoints."""
    rng = np.random.default_rng(seed)
    g = graph.copy()
    for cid in sorted(g.channels):
        c = g.channels[cid]
        a = int(rng.integers(0, c.capacity_msat, endpoint=True)) if c.capacity_msat else 0
        c.balance_a = to_q(a)
        c.balance_b = to_q(c.capacity_msat - a)
    return g


FROM_SNAPSHOT = "from_snapshot"
ALL_LND = "all_lnd"


@dataclass(frozen=True)
class Distribution:
    p_lnd: Fraction
    p_cl: Fraction
    p_ec: Fraction

    def __post_init__(self):
        for name in ("p_lnd", "p_cl", "p_ec"):
            v = getattr(self, name)
            if not isinstance(v, Fraction):
                object.__setattr__(self, name, Fraction(str(v)))
        probs = (self.p_lnd, self.p_cl, self.p_ec)
        if any(p < 0 for p in probs) or sum(probs) != 1:
            raise ConfigError(f"client probabilities must be non-negative and sum to 1, got {[str(p) for p in probs]}")


MEASURED_CLIENT_MIX = Distribution(Fraction("0.92"), Fraction("0.06"), Fraction("0.02"))


def assign_clients(graph: NetworkGraph, mode: Union[str, Distribution], seed: int = 0) -> NetworkGraph:
    if mode == FROM_SNAPSHOT:
        return graph.copy()
    ids = graph.node_ids()
    if mode == ALL_LND:
        return graph.with_clients({n: Client.LND for n in ids})
    if not isinstance(mode, Distribution):
        raise ConfigError(f"unknown client assignment mode {mode!r}")
    rng = np.random.default_rng(seed)
    draws = rng.random(len(ids))
    cut1 = float(mode.p_lnd)
    cut2 = float(mode.p_lnd + mode.p_cl)
    out = {}
    for nid, u in zip(ids, draws):
        out[nid] = Client.LND if u < cut1 else (Client.CLIGHTNING if u < cut2 else Client.ECLAIR)
    return graph.with_clients(out)


@dataclass
class StatsReport:
    n_nodes: int
    n_channels: int
    timelock_histogram: dict[int, float]
    client_histogram: dict[str, int]
    degree_distribution: dict[int, int]

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "n_channels": self.n_channels,
            "timelock_histogram": {str(k): v for k, v in sorted(self.timelock_histogram.items())},
            "client_histogram": dict(sorted(self.client_histogram.items())),
            "degree_distribution": {str(k): v for k, v in sorted(self.degree_distribution.items())},
        }


def graph_stats(graph: NetworkGraph) -> StatsReport:
    """Counts plus timelock (per channel direction), client and degree histograms."""
    tl = Counter()
    for c in graph.channels.values():
        tl[c.policy_ab.timelock_delta] += 1
        tl[c.policy_ba.timelock_delta] += 1
    total = sum(tl.values())
    hist = {k: v / total for k, v in sorted(tl.items())} if total else {}
    clients = Counter(n.client.value for n in graph.nodes.values())
    degrees = Counter(graph.degree(n) for n in graph.nodes)
    return StatsReport(len(graph.nodes), len(graph.channels), hist, dict(clients), dict(sorted(degrees.items())))


def empty_graph() -> NetworkGraph:
    return load_snapshot(io.BytesIO(b'{"nodes": [], "channels": []}'))
