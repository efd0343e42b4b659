"""Run the LND-only, clients-known, blind and shadow settings and tabulate them.

    python3 scripts/run_scenarios.py [--snapshot snap.json] [--n-transactions 200] [--workers 4]

Each setting writes its CSV/JSON artifacts under ``results/<setting>/``.
"""

import argparse
from pathlib import Path

from lnanon.config import load_config
from lnanon.experiment import run_experiment
from lnanon.metrics import summarize_collusion

CONFIGS = Path(__file__).parent / "configs"
SETTINGS = ("lnd_only", "clients_known", "blind", "lnd_shadow")
FIELDS = ("r_att", "av_att", "corr_d_s", "corr_d_r", "sing_s", "sing_r", "sing_any", "sing_all", "nat_end", "comp_att")


def _fmt(v) -> str:
    return "  n/a" if v is None else f"{v:5.2f}"


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--snapshot")
    p.add_argument("--n-transactions", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--only", choices=SETTINGS, action="append")
    args = p.parse_args()
    overrides = {"snapshot": args.snapshot, "n_transactions": args.n_transactions, "workers": args.workers}
    print(f"{'setting':14s}" + "".join(f"{f:>9s}" for f in FIELDS) + "  coll_R=1")
    for name in args.only or SETTINGS:
        out = run_experiment(load_config(CONFIGS / f"{name}.toml", overrides))
        m = out.metrics
        coll = summarize_collusion(out.collusion, "all").singleton_recipient
        print(f"{name:14s}" + "".join(f"{_fmt(getattr(m, f)):>9s}" for f in FIELDS) + f"  {_fmt(coll)}", flush=True)


if __name__ == "__main__":
    main()
