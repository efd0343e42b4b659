import csv
import io
import json

import pytest

from conftest import DATA, make_graph
from lnanon.cli import main
from lnanon.config import ExperimentConfig, Scenario, derive_seed, load_config
from lnanon.errors import ConfigError
from lnanon.experiment import run_experiment
from lnanon.snapshot import dump_snapshot

SMALL = ["--synthetic-nodes", "40", "--n-transactions", "25", "--top-k", "3", "--low-k", "2", "--random-k", "4"]


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_defaults():
    c = ExperimentConfig()
    assert c.scenario is Scenario.LND_ONLY and c.effective_depth == 3 and c.n_transactions == 1000
    assert c.adversaries.total == 21
    assert ExperimentConfig(shadow=True).effective_depth == 2


def test_toml_then_flags_precedence(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('scenario = "Blind"\ndepth = 4\nseed = 9\n[adversaries]\ntop_k = 2\n')
    c = load_config(p, {"depth": 5, "adversaries.low_k": 1, "seed": None})
    assert c.scenario is Scenario.BLIND and c.depth == 5 and c.seed == 9
    assert (c.adversaries.top_k, c.adversaries.low_k, c.adversaries.random_k) == (2, 1, 10)


@pytest.mark.parametrize("text", ['bogus = 1\n', 'depth = -1\n', 'scenario = "Nope"\n',
                                  'client_mix = [0.5, 0.5, 0.5]\n', '[amount]\nmin_sat = 0\n', 'depth = [\n'])
def test_invalid_configs(tmp_path, text):
    p = tmp_path / "c.toml"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_config(p)


def test_config_hash_ignores_output_location():
    a = ExperimentConfig(output_dir="x", workers=1)
    assert a.config_hash() == ExperimentConfig(output_dir="y", workers=3).config_hash()
    assert a.config_hash() != ExperimentConfig(seed=1).config_hash()


def test_derive_seed_labels_differ():
    seeds = {derive_seed(0, lab) for lab in ("balances", "clients", "transactions", "adversaries")}
    assert len(seeds) == 4 and derive_seed(0, "x") == derive_seed(0, "x")


def test_ingest_empty(tmp_path, capsys):
    p = tmp_path / "empty.json"
    p.write_text('{"nodes": [], "channels": []}')
    code, out, _ = _run(capsys, "ingest", p)
    assert code == 0
    st = json.loads(out)["stats"]
    assert st["n_nodes"] == 0 and st["n_channels"] == 0


def test_ingest_bad_snapshot_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"nodes": [{"id": "a", "client": "LND"}], "channels": [{"id": "c", "node_a": "a"}]}')
    code, _, err = _run(capsys, "ingest", p)
    assert code == 3 and "'c'" in err
    code, _, _ = _run(capsys, "ingest", tmp_path / "missing.json")
    assert code == 2


def test_centrality_path(tmp_path, capsys):
    p = tmp_path / "path.json"
    dump_snapshot(make_graph([("a", "b"), ("b", "c"), ("c", "d"), ("d", "e")]), p)
    code, out, _ = _run(capsys, "centrality", p, "--metric", "betweenness")
    assert code == 0
    rows = {r["node"]: float(r["betweenness"]) for r in csv.DictReader(io.StringIO(out))}
    assert max(rows, key=rows.get) == "c" and rows["a"] == 0


def test_attack_one_fig1b(capsys):
    code, out, _ = _run(capsys, "attack-one", DATA / "fig1b.json", "--pre", "pre", "--observer", "a",
                        "--next", "nxt", "--amt-msat", 1_001_001, "--ttl", 9)
    assert code == 0
    res = json.loads(out)
    assert res["recipients"] == ["r2", "y", "z"]
    assert res["senders"] == ["pre", "s1", "s2"]


def test_attack_one_inconsistent(capsys):
    code, _, err = _run(capsys, "attack-one", DATA / "fig1b.json", "--pre", "pre", "--observer", "a",
                        "--next", "nxt", "--amt-msat", 1_001_001, "--ttl", 1)
    assert code == 3 and "ttl" in err


def test_unknown_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as e:
        main(["run", "--no-such-flag"])
    assert e.value.code == 2


def test_run_zero_transactions(tmp_path, capsys):
    code, out, _ = _run(capsys, "run", *SMALL[:2], "--n-transactions", 0, "--output-dir", tmp_path)
    assert code == 0
    lines = (tmp_path / "attacks.csv").read_text().splitlines()
    assert lines[0].startswith("# config_sha256=") and len(lines) == 2
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["metrics"]["r_att"] == 0 and summary["metrics"]["n_attacks"] == 0


def test_run_writes_artifacts(tmp_path, capsys):
    code, out, _ = _run(capsys, "run", *SMALL, "--output-dir", tmp_path, "--scenario", "ClientsKnown")
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    digest = summary["config_sha256"]
    for name in ("attacks.csv", "collusion.csv", "cdf.csv"):
        assert (tmp_path / name).read_text().startswith(f"# config_sha256={digest}\n")
    m = summary["metrics"]
    assert m["n_transactions"] == 25 and 0 <= m["r_att"] <= 1
    assert {"r_att", "av_att", "corr_d_s", "corr_d_r", "sing_s", "sing_r", "sing_any", "sing_all",
            "nat_end", "comp_att"} <= set(m)
    assert len(summary["adversaries"]) == 9


def test_run_config_error_exit(tmp_path, capsys):
    code, _, err = _run(capsys, "run", "--depth", "-2", "--output-dir", tmp_path)
    assert code == 2


def test_simulate(tmp_path, capsys):
    code, out, _ = _run(capsys, "simulate", *SMALL, "--output-dir", tmp_path)
    assert code == 0
    rows = list(csv.DictReader(l for l in (tmp_path / "payments.csv").open() if not l.startswith("#")))
    assert len(rows) == 25 and {r["status"] for r in rows} <= {"Delivered", "FailedInsufficientBalance", "NoRoute"}


@pytest.mark.parametrize("overrides", [{}, {"shadow": True}, {"scenario": "Blind", "fuzz": False}])
def test_pipeline_deterministic(tmp_path, overrides):
    base = {"synthetic.nodes": 40, "n_transactions": 20, "adversaries.top_k": 3, "adversaries.low_k": 2,
            "adversaries.random_k": 4, **overrides}
    outs = []
    for i in range(2):
        run_experiment(load_config(None, {**base, "output_dir": str(tmp_path / str(i))}))
        outs.append({n: (tmp_path / str(i) / n).read_bytes() for n in ("attacks.csv", "collusion.csv", "cdf.csv")})
    assert outs[0] == outs[1]


def test_workers_match_sequential(tmp_path):
    base = {"synthetic.nodes": 40, "n_transactions": 20, "adversaries.random_k": 4}
    a = run_experiment(load_config(None, {**base, "output_dir": str(tmp_path / "a")}))
    b = run_experiment(load_config(None, {**base, "output_dir": str(tmp_path / "b"), "workers": 2}))
    assert (tmp_path / "a" / "attacks.csv").read_bytes() == (tmp_path / "b" / "attacks.csv").read_bytes()
    assert a.metrics == b.metrics
