"""End-to-end experiment pipeline."""

from __future__ import annotations

import contextlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .adversary import AdversarySelection, select_adversaries
from .attack import AnonymityResult, AttackConfig, AssumeAll, Blind, Known, SearchCache, attack, collude
from .config import ExperimentConfig, Scenario, derive_seed
from .errors import InvariantViolation, LabError, NoRouteError
from .metrics import (AttackRecord, CollusionRecord, ExperimentMetrics, compute_metrics, export,
                      metrics_to_dict, summarize_collusion, write_attacks_csv, write_collusion_csv)
from .payment import HopObservation, Payment, Transaction, execute_payment, generate_transactions, shadow_offset
from .routing import CostParams, Route, find_route
from .snapshot import ALL_LND, Client, NetworkGraph, assign_balances, assign_clients, load_snapshot
from .synthetic import scale_free_graph

log = logging.getLogger(__name__)


@contextlib.contextmanager
def stage(name: str):
    """Prefix errors raised inside the block with the pipeline stage."""
    try:
        yield
    except LabError as e:
        e.args = (f"[{name}] {e}",)
        raise
    except (ValueError, KeyError, TypeError, ArithmeticError) as e:
        raise InvariantViolation(f"[{name}] {type(e).__name__}: {e}") from e


def build_params(config: ExperimentConfig) -> CostParams:
    key = derive_seed(config.seed, "fuzz").to_bytes(8, "big")
    return CostParams(fuzz_enabled=config.fuzz, fuzz_key=key)


def attack_view(config: ExperimentConfig):
    if config.scenario is Scenario.LND_ONLY:
        return AssumeAll(Client.LND)
    if config.scenario is Scenario.CLIENTS_KNOWN:
        return Known()
    return Blind()


def load_graph(config: ExperimentConfig) -> NetworkGraph:
    if config.snapshot is not None:
        return load_snapshot(Path(config.snapshot))
    s = config.synthetic
    return scale_free_graph(s.nodes, s.m, seed=s.seed)


def prepare_graph(config: ExperimentConfig) -> NetworkGraph:
    """Snapshot (or synthetic graph) with balances and clients assigned."""
    with stage("load"):
        g = load_graph(config)
    with stage("balances"):
        g = assign_balances(g, derive_seed(config.seed, "balances"))
    with stage("clients"):
        mode = ALL_LND if config.scenario is Scenario.LND_ONLY else config.client_distribution()
        g = assign_clients(g, mode, derive_seed(config.seed, "clients"))
    return g


@dataclass
class PaymentTrace:
    index: int
    tx: Transaction
    client: Client
    route: Optional[Route] = None
    status: str = "NoRoute"
    shadow_timelock: int = 0
    observations: list = field(default_factory=list)


def simulate(graph: NetworkGraph, config: ExperimentConfig, params: CostParams) -> list[PaymentTrace]:
    """Generate and execute the transactions in order; mutates ``graph``'s balances."""
    with stage("transactions"):
        txs = generate_transactions(graph, config.n_transactions, derive_seed(config.seed, "transactions"),
                                    config.amount)
    shadow_rng = np.random.default_rng(derive_seed(config.seed, "shadow"))
    traces = []
    with stage("simulate"):
        for i, tx in enumerate(txs):
            client = graph.client_of(tx.sender)
            tr = PaymentTrace(i, tx, client)
            try:
                route = find_route(graph, tx.sender, tx.recipient, tx.amount, client, params,
                                   seed=derive_seed(config.seed, "eclair-choice", i), payment_id=tx.payment_id)
            except NoRouteError:
                traces.append(tr)
                continue
            tr.route = route
            if config.shadow:
                tr.shadow_timelock = shadow_offset(graph, tx.recipient, shadow_rng)
            pay = Payment(tx.payment_id, tx.sender, tx.recipient, tx.amount, route, tr.shadow_timelock)
            res = execute_payment(graph, pay)
            tr.status = res.status.value
            tr.observations = res.observations
            traces.append(tr)
    return traces


# attack fan-out; one graph and cache per worker process
_WORKER: dict = {}


def _init_worker(graph: NetworkGraph, cfg: AttackConfig) -> None:
    _WORKER["graph"] = graph
    _WORKER["cfg"] = cfg
    _WORKER["cache"] = SearchCache(graph, cfg.params)


def _attack_one(obs: HopObservation) -> AnonymityResult:
    return attack(_WORKER["graph"], obs, _WORKER["cfg"], _WORKER["cache"])


def run_attacks(graph: NetworkGraph, observations: list[HopObservation], cfg: AttackConfig,
                workers: int = 1) -> list[AnonymityResult]:
    if workers <= 1 or len(observations) < 2:
        _init_worker(graph, cfg)
        try:
            return [_attack_one(o) for o in observations]
        finally:
            _WORKER.clear()
    with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(graph, cfg)) as pool:
        return list(pool.map(_attack_one, observations, chunksize=4))


@dataclass
class ExperimentOutcome:
    config: ExperimentConfig
    adversaries: AdversarySelection
    traces: list
    attacks: list
    collusion: list
    metrics: ExperimentMetrics
    files: dict = field(default_factory=dict)


def execute(config: ExperimentConfig) -> ExperimentOutcome:
    """Run the whole pipeline in memory."""
    params = build_params(config)
    graph = prepare_graph(config)
    with stage("adversaries"):
        adv = select_adversaries(graph, config.adversaries, derive_seed(config.seed, "adversaries"))
    static = graph.copy()  # attacks read only capacities and policies
    traces = simulate(graph, config, params)

    jobs = []  # (trace, node index, observation), ordered by (payment index, observer id)
    for tr in traces:
        picked = sorted((o for o in tr.observations if o.observer in adv), key=lambda o: o.observer)
        for o in picked:
            jobs.append((tr, tr.route.nodes.index(o.observer), o))
    acfg = AttackConfig(depth=config.effective_depth, shadow=config.shadow, view=attack_view(config), params=params)
    with stage("attack"):
        results = run_attacks(static, [o for _, _, o in jobs], acfg, config.workers)

    scen = config.scenario.value
    records = [AttackRecord(res, tr.tx.sender, tr.tx.recipient, j, len(tr.route) - j, scen)
               for (tr, j, _), res in zip(jobs, results)]

    with stage("collusion"):
        collusion = []
        by_payment: dict[int, list[AnonymityResult]] = {}
        for (tr, _, _), res in zip(jobs, results):
            by_payment.setdefault(tr.index, []).append(res)
        for idx in sorted(by_payment):
            group = by_payment[idx]
            if len(group) < 2:
                continue
            tx = traces[idx].tx
            for variant, only in (("all", False), ("complete_only", True)):
                collusion.append(CollusionRecord(tx.payment_id, variant, len(group), collude(group, only),
                                                 tx.sender, tx.recipient, scen))

    with stage("metrics"):
        metrics = compute_metrics(records, config.n_transactions, scen)
        bad = metrics.check()
        if bad:
            raise InvariantViolation("; ".join(bad))
    return ExperimentOutcome(config, adv, traces, records, collusion, metrics)


def _with_hash(body: bytes, digest: str) -> bytes:
    return f"# config_sha256={digest}\n".encode() + body


def summary_dict(out: ExperimentOutcome) -> dict:
    statuses: dict[str, int] = {}
    for tr in out.traces:
        statuses[tr.status] = statuses.get(tr.status, 0) + 1
    return {
        "config_sha256": out.config.config_hash(),
        "config": out.config.to_dict(),
        "metrics": metrics_to_dict(out.metrics),
        "collusion": [asdict(summarize_collusion(out.collusion, v)) for v in ("all", "complete_only")],
        "payments": dict(sorted(statuses.items())),
        "adversaries": {v: str(t) for v, t in out.adversaries.tags.items()},
    }


def write_outputs(out: ExperimentOutcome, output_dir: Optional[str] = None) -> dict:
    d = Path(output_dir or out.config.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    h = out.config.config_hash()
    files = {
        "attacks.csv": _with_hash(write_attacks_csv(out.attacks), h),
        "collusion.csv": _with_hash(write_collusion_csv(out.collusion), h),
        "cdf.csv": _with_hash(export(out.metrics, None, "CSV"), h),
        "summary.json": (json.dumps(summary_dict(out), indent=2, sort_keys=True) + "\n").encode(),
    }
    for name, data in files.items():
        (d / name).write_bytes(data)
    out.files = {name: d / name for name in files}
    return out.files


def run_experiment(config: ExperimentConfig) -> ExperimentOutcome:
    """Execute the pipeline and write attacks.csv, collusion.csv, cdf.csv and summary.json."""
    out = execute(config)
    with stage("write"):
        write_outputs(out)
    log.info("wrote %s", ", ".join(str(p) for p in out.files.values()))
    return out


def simulation_rows(traces: list[PaymentTrace]) -> list[tuple]:
    rows = []
    for tr in traces:
        hops = len(tr.route) if tr.route else 0
        rows.append((tr.index, tr.tx.payment_id, tr.tx.sender, tr.tx.recipient, tr.tx.amount,
                     tr.client.value, tr.status, hops, tr.shadow_timelock, len(tr.observations)))
    return rows


SIMULATION_COLUMNS = ("index", "payment_id", "sender", "recipient", "amount_msat", "client", "status",
                      "hops", "shadow_timelock", "n_observations")
