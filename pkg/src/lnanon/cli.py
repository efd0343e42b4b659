"""Command line entry point (``lnanon``)."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import adversary
from .attack import AssumeAll, AttackConfig, Blind, Known, attack
from .config import load_config
from .errors import ConfigError, InvariantViolation, LabError
from .experiment import SIMULATION_COLUMNS, build_params, prepare_graph, run_experiment, simulate, simulation_rows
from .payment import HopObservation
from .routing import CostParams
from .snapshot import Client, graph_stats, load_snapshot

# flag dest -> dotted config key
OVERRIDES = {
    "snapshot": "snapshot",
    "scenario": "scenario",
    "shadow": "shadow",
    "n_transactions": "n_transactions",
    "depth": "depth",
    "seed": "seed",
    "output_dir": "output_dir",
    "workers": "workers",
    "fuzz": "fuzz",
    "client_mix": "client_mix",
    "top_k": "adversaries.top_k",
    "low_k": "adversaries.low_k",
    "random_k": "adversaries.random_k",
    "amount_rate": "amount.rate_per_sat",
    "amount_min_sat": "amount.min_sat",
    "amount_max_sat": "amount.max_sat",
    "synthetic_nodes": "synthetic.nodes",
    "synthetic_m": "synthetic.m",
    "synthetic_seed": "synthetic.seed",
}


def _client_mix(text: str):
    if "," not in text:
        return text
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad client mix {text!r}") from None


def _experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML experiment config")
    p.add_argument("--snapshot", help="snapshot JSON; a synthetic scale-free graph is used if absent")
    p.add_argument("--scenario", choices=["LNDOnly", "ClientsKnown", "Blind"])
    p.add_argument("--shadow", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--fuzz", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--n-transactions", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--workers", type=int)
    p.add_argument("--client-mix", type=_client_mix, help="'from_snapshot', 'measured' or p_lnd,p_cl,p_ec")
    p.add_argument("--top-k", type=int)
    p.add_argument("--low-k", type=int)
    p.add_argument("--random-k", type=int)
    p.add_argument("--amount-rate", type=float, help="exponential rate per satoshi")
    p.add_argument("--amount-min-sat", type=int)
    p.add_argument("--amount-max-sat", type=int)
    p.add_argument("--synthetic-nodes", type=int)
    p.add_argument("--synthetic-m", type=int)
    p.add_argument("--synthetic-seed", type=int)


def _config(args):
    overrides = {key: getattr(args, dest) for dest, key in OVERRIDES.items()}
    return load_config(args.config, overrides)


def _dump(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def cmd_ingest(args) -> int:
    g = load_snapshot(args.snapshot)
    _dump({"load": g.load_report, "stats": graph_stats(g).to_dict()})
    return 0


def cmd_centrality(args) -> int:
    g = load_snapshot(args.snapshot)
    metrics = [adversary.Metric.parse(m) for m in args.metric] if args.metric else list(adversary.Metric)
    scores = {m: adversary.centrality(g, m) for m in metrics}
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["node"] + [m.value for m in metrics])
    for v in g.node_ids():
        w.writerow([v] + [repr(scores[m][v]) for m in metrics])
    return 0


def _view(name: str):
    low = name.lower()
    if low == "blind":
        return Blind()
    if low == "known":
        return Known()
    return AssumeAll(Client.parse(name))


def cmd_attack_one(args) -> int:
    g = load_snapshot(args.snapshot)
    obs = HopObservation(args.observer, args.pre, args.next, Fraction(args.amt_msat), args.ttl,
                         args.payment_id, args.in_channel, args.out_channel)
    cfg = AttackConfig(depth=args.depth, shadow=args.shadow, view=_view(args.client),
                       params=CostParams(fuzz_enabled=False))
    res = attack(g, obs, cfg)
    _dump({
        "observer": res.observer,
        "recipients": sorted(res.recipients),
        "senders": sorted(res.senders),
        "senders_by_recipient": {r: sorted(s) for r, s in sorted(res.senders_by_recipient.items()) if s},
        "phase1_complete": res.phase1_complete,
        "depth": res.depth_used,
        "shadow": res.shadow,
        "n_candidates": res.n_candidates,
    })
    return 0


def cmd_simulate(args) -> int:
    config = _config(args)
    g = prepare_graph(config)
    traces = simulate(g, config, build_params(config))
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "payments.csv"
    with path.open("w", newline="") as fh:
        fh.write(f"# config_sha256={config.config_hash()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SIMULATION_COLUMNS)
        w.writerows(simulation_rows(traces))
    _dump({"payments": str(path), "n": len(traces)})
    return 0


def cmd_run(args) -> int:
    out = run_experiment(_config(args))
    m = out.metrics
    _dump({"files": {k: str(v) for k, v in out.files.items()},
           "r_att": m.r_att, "n_attacks": m.n_attacks, "nat_end": m.nat_end,
           "sing_any": m.sing_any, "comp_att": m.comp_att})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lnanon", description="Payment channel network anonymity lab")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="load a snapshot and print statistics")
    s.add_argument("snapshot", type=Path)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("centrality", help="print centrality scores as CSV")
    s.add_argument("snapshot", type=Path)
    s.add_argument("--metric", action="append", choices=[m.value for m in adversary.Metric])
    s.set_defaults(func=cmd_centrality)

    s = sub.add_parser("attack-one", help="anonymity sets for a single observation")
    s.add_argument("snapshot", type=Path)
    s.add_argument("--pre", required=True)
    s.add_argument("--observer", required=True)
    s.add_argument("--next", required=True)
    s.add_argument("--amt-msat", required=True, type=int)
    s.add_argument("--ttl", required=True, type=int)
    s.add_argument("--in-channel")
    s.add_argument("--out-channel")
    s.add_argument("--payment-id", default="cli")
    s.add_argument("--depth", type=int, default=3)
    s.add_argument("--shadow", action="store_true")
    s.add_argument("--client", default="LND", help="LND, CLightning, Eclair, known or blind")
    s.set_defaults(func=cmd_attack_one)

    s = sub.add_parser("simulate", help="execute payments without attacking")
    _experiment_flags(s)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("run", help="full experiment")
    _experiment_flags(s)
    s.set_defaults(func=cmd_run)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except LabError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return ConfigError.exit_code if isinstance(e, ValueError) else InvariantViolation.exit_code
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
