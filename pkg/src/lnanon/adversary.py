"""Observer selection by centrality or at random."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, NamedTuple, Optional

import networkx as nx
import numpy as np

from .errors import ConfigError
from .snapshot import NetworkGraph


class Metric(str, Enum):
    BETWEENNESS = "betweenness"
    CLOSENESS = "closeness"
    DEGREE = "degree"
    EIGENVECTOR = "eigenvector"

    @classmethod
    def parse(cls, value) -> "Metric":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown centrality metric {value!r}") from None


EIGEN_TOL = 1e-9
EIGEN_MAX_ITER = 1000
LOW_POOL_PER_METRIC = 5


def _component_scores(G: nx.Graph, metric: Metric) -> dict[str, float]:
    if metric is Metric.BETWEENNESS:
        return nx.betweenness_centrality(G, normalized=True)
    if metric is Metric.CLOSENESS:
        return nx.closeness_centrality(G)
    if metric is Metric.DEGREE:
        return nx.degree_centrality(G)
    if len(G) == 1:
        return {v: 1.0 for v in G}
    return nx.eigenvector_centrality(G, max_iter=EIGEN_MAX_ITER, tol=EIGEN_TOL)


def centrality(graph: NetworkGraph, metric) -> dict[str, float]:
    """Centrality score of every node, computed separately on each connected component.

    Betweenness counts unweighted shortest paths. Eigenvector scores come
    from power iteration, normalised within each component.
    """
    metric = Metric.parse(metric)
    G = graph.to_networkx()
    scores: dict[str, float] = {}
    for comp in sorted(nx.connected_components(G), key=min):
        scores.update(_component_scores(G.subgraph(comp).copy(), metric))
    return {v: float(scores[v]) for v in sorted(scores)}


def ranked(scores: Mapping[str, float], descending: bool = True) -> list[str]:
    sign = -1 if descending else 1
    return sorted(scores, key=lambda v: (sign * scores[v], v))


class Tag(NamedTuple):
    kind: str  # "TopCentral", "LowCentral" or "Random"
    metric: Optional[Metric] = None

    def __str__(self) -> str:
        return f"{self.kind}({self.metric.value})" if self.metric else self.kind


@dataclass(frozen=True)
class AdversarySpec:
    top_k: int = 6
    low_k: int = 5
    random_k: int = 10
    metrics: tuple = tuple(Metric)

    def __post_init__(self):
        for name in ("top_k", "low_k", "random_k"):
            if getattr(self, name) < 0:
                raise ConfigError(f"adversary {name} must be >= 0")
        object.__setattr__(self, "metrics", tuple(Metric.parse(m) for m in self.metrics))
        if not self.metrics and (self.top_k or self.low_k):
            raise ConfigError("centrality-based selection needs at least one metric")

    @property
    def total(self) -> int:
        return self.top_k + self.low_k + self.random_k


@dataclass(frozen=True)
class AdversarySelection:
    observers: frozenset
    tags: Mapping[str, Tag] = field(default_factory=dict)

    def __contains__(self, node: str) -> bool:
        return node in self.observers

    def __len__(self) -> int:
        return len(self.observers)

    def by_kind(self, kind: str) -> list[str]:
        return sorted(v for v, t in self.tags.items() if t.kind == kind)


def select_adversaries(graph: NetworkGraph, spec: AdversarySpec, seed: int,
                       scores: Optional[Mapping[Metric, Mapping[str, float]]] = None) -> AdversarySelection:
    """Pick top-central, low-central and random observers as disjoint classes.

    The top class takes the metrics' top-k lists in rank order, round robin
    across metrics, until ``top_k`` distinct nodes are chosen. The low class is
    sampled from the union of each metric's bottom five among nodes with at
    least two channels. Random observers are uniform over what remains.
    """
    eligible = [v for v in graph.node_ids() if graph.degree(v) >= 1]
    if spec.total > len(eligible):
        raise ConfigError(f"asked for {spec.total} adversaries but only {len(eligible)} nodes have channels")
    if scores is None:
        scores = {m: centrality(graph, m) for m in spec.metrics} if (spec.top_k or spec.low_k) else {}
    rng = np.random.default_rng(seed)
    tags: dict[str, Tag] = {}

    if spec.top_k:
        lists = [(m, [v for v in ranked(scores[m]) if v in set(eligible)]) for m in spec.metrics]
        for rank in range(len(eligible)):
            for m, order in lists:
                if len(tags) == spec.top_k:
                    break
                if rank < len(order) and order[rank] not in tags:
                    tags[order[rank]] = Tag("TopCentral", m)
            if len(tags) == spec.top_k:
                break

    if spec.low_k:
        pool: dict[str, Metric] = {}
        for m in spec.metrics:
            low = [v for v in ranked(scores[m], descending=False)
                   if graph.degree(v) >= 2 and v not in tags]
            for v in low[:LOW_POOL_PER_METRIC]:
                pool.setdefault(v, m)
        if len(pool) < spec.low_k:
            raise ConfigError(f"only {len(pool)} low-centrality candidates with degree >= 2, need {spec.low_k}")
        names = sorted(pool)
        for i in sorted(rng.choice(len(names), size=spec.low_k, replace=False).tolist()):
            tags[names[i]] = Tag("LowCentral", pool[names[i]])

    if spec.random_k:
        rest = [v for v in eligible if v not in tags]
        for i in sorted(rng.choice(len(rest), size=spec.random_k, replace=False).tolist()):
            tags[rest[i]] = Tag("Random")

    return AdversarySelection(frozenset(tags), dict(sorted(tags.items())))
