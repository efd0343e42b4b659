"""Hop-by-hop payment execution and per-intermediary observations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import NamedTuple, Optional

import numpy as np

from .errors import StructuralRouteError
from .routing import Route
from .snapshot import MSAT_PER_SAT, NetworkGraph


@dataclass(frozen=True)
class Payment:
    payment_id: str
    sender: str
    recipient: str
    amount: Fraction
    route: Route
    shadow_timelock: int = 0

    def __post_init__(self):
        if self.amount <= 0:
            raise ValueError("payment amount must be positive")
        r = self.route
        if not r.hops or r.sender != self.sender or r.recipient != self.recipient:
            raise StructuralRouteError("route endpoints do not match the payment")
        if r.amount != self.amount:
            raise StructuralRouteError("route delivers a different amount")


@dataclass(frozen=True)
class HopObservation:
    """What one intermediary learns when an HTLC reaches it.

    ``ttl_in`` is the total timelock from the observer to the recipient,
    the observer's own outgoing delta included.
    """

    observer: str
    pre: str
    next: str
    amt_in: Fraction
    ttl_in: int
    payment_id: str
    in_channel: Optional[str] = None
    out_channel: Optional[str] = None


class Status(str, Enum):
    DELIVERED = "Delivered"
    FAILED_INSUFFICIENT_BALANCE = "FailedInsufficientBalance"


@dataclass
class PaymentResult:
    status: Status
    observations: list[HopObservation] = field(default_factory=list)
    failed_hop: Optional[int] = None

    @property
    def delivered(self) -> bool:
        return self.status is Status.DELIVERED


def observation_at(payment: Payment, j: int) -> HopObservation:
    """Observation of the intermediary at node index ``j`` of the route."""
    r = payment.route
    nodes = r.nodes
    if not 0 < j < len(nodes) - 1:
        raise IndexError(f"node index {j} is not an intermediary")
    return HopObservation(
        observer=nodes[j],
        pre=nodes[j - 1],
        next=nodes[j + 1],
        amt_in=r.amounts[j - 1],
        ttl_in=r.residual_timelocks[j] + payment.shadow_timelock,
        payment_id=payment.payment_id,
        in_channel=r.hops[j - 1].channel_id,
        out_channel=r.hops[j].channel_id,
    )


def _validate(graph: NetworkGraph, route: Route) -> None:
    for i, h in enumerate(route.hops):
        try:
            graph.edge(h.channel_id, h.src)
        except KeyError:
            raise StructuralRouteError(f"hop {i}: no enabled channel {h.channel_id!r} from {h.src!r}") from None
        if graph.channels[h.channel_id].other(h.src) != h.dst:
            raise StructuralRouteError(f"hop {i}: channel {h.channel_id!r} does not reach {h.dst!r}")
        if i and route.hops[i - 1].dst != h.src:
            raise StructuralRouteError(f"hop {i}: route is not contiguous")
    if len(route.amounts) != len(route.hops) or len(route.residual_timelocks) != len(route.hops) + 1:
        raise StructuralRouteError("route is not annotated")


def execute_payment(graph: NetworkGraph, payment: Payment) -> PaymentResult:
    """Forward ``payment`` along its route, mutating ``graph``'s balances.

    Each hop needs the forwarding side's balance to cover the amount. On a
    shortfall at hop ``i`` the earlier hops are rolled back; intermediaries
    already reached still report what they saw.
    """
    route = payment.route
    _validate(graph, route)
    n_nodes = len(route.hops) + 1
    moved = []
    for i, (h, amt) in enumerate(zip(route.hops, route.amounts)):
        ch = graph.channels[h.channel_id]
        if ch.balance_of(h.src) < amt:
            for ch_prev, src, a in reversed(moved):
                ch_prev.move(ch_prev.other(src), a)
            obs = [observation_at(payment, j) for j in range(1, min(i, n_nodes - 2) + 1)]
            return PaymentResult(Status.FAILED_INSUFFICIENT_BALANCE, obs, i)
        ch.move(h.src, amt)
        moved.append((ch, h.src, amt))
    obs = [observation_at(payment, j) for j in range(1, n_nodes - 1)]
    return PaymentResult(Status.DELIVERED, obs)


# -- workload generation ---------------------------------------------------

@dataclass(frozen=True)
class AmountModel:
    """Exponential amounts truncated to ``[min_sat, max_sat]``."""

    rate_per_sat: float = 1 / 20000
    min_sat: int = 1
    max_sat: int = 100_000

    def sample_msat(self, rng: np.random.Generator, size: int) -> list[int]:
        span = self.max_sat - self.min_sat
        u = rng.random(size)
        tail = -math.expm1(-self.rate_per_sat * span)
        x = self.min_sat - np.log1p(-u * tail) / self.rate_per_sat
        msat = np.clip(np.rint(x * MSAT_PER_SAT), self.min_sat * MSAT_PER_SAT, self.max_sat * MSAT_PER_SAT)
        return [int(v) for v in msat]


class Transaction(NamedTuple):
    sender: str
    recipient: str
    amount: int  # msat
    payment_id: str


def generate_transactions(graph: NetworkGraph, n: int, seed: int,
                          amount_model: AmountModel = AmountModel()) -> list[Transaction]:
    """Uniform distinct sender/recipient pairs with truncated-exponential amounts."""
    if n < 0:
        raise ValueError("n must be >= 0")
    ids = graph.node_ids()
    if n == 0:
        return []
    if len(ids) < 2:
        raise ValueError("need at least two nodes")
    rng = np.random.default_rng(seed)
    amounts = amount_model.sample_msat(rng, n)
    out = []
    for amt in amounts:
        s, r = rng.choice(len(ids), size=2, replace=False)
        out.append(Transaction(ids[int(s)], ids[int(r)], amt, rng.bytes(32).hex()))
    return out


def shadow_offset(graph: NetworkGraph, start: str, rng: np.random.Generator, max_hops: int = 3) -> int:
    """Sum of timelock deltas along a short random walk from ``start``."""
    total, node = 0, start
    for _ in range(max_hops):
        edges = graph.out_edges(node)
        if not edges:
            break
        e = edges[int(rng.integers(len(edges)))]
        total += e.policy.timelock_delta
        node = e.dst
    return total
