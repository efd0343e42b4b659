"""Aggregate statistics over attack outcomes and their CSV/JSON exports."""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import IO, Iterable, Optional, Sequence, Union

from .attack import AnonymityResult, CollusionResult

Sink = Union[str, Path, IO, None]

ATTACK_COLUMNS = ("scenario", "adversary_id", "payment_id", "set_kind", "set_size",
                  "phase1_complete", "hops_to_sender", "hops_to_recipient")
COLLUSION_COLUMNS = ("scenario", "payment_id", "variant", "n_observers", "n_used", "fallback",
                     "sender_set_size", "recipient_set_size", "contains_sender", "contains_recipient")
CDF_COLUMNS = ("scenario", "set_kind", "completion", "size", "cumulative_fraction")


@dataclass(frozen=True)
class AttackRecord:
    """One observation by one adversary, with the simulator's ground truth.

    Hop distances count hops along the actual payment route.
    """

    result: AnonymityResult
    true_sender: str
    true_recipient: str
    hops_to_sender: int
    hops_to_recipient: int
    scenario: str = ""

    @property
    def sender_size(self) -> int:
        return len(self.result.senders)

    @property
    def recipient_size(self) -> int:
        return len(self.result.recipients)


@dataclass(frozen=True)
class CollusionRecord:
    payment_id: str
    variant: str  # "all" or "complete_only"
    n_observers: int
    outcome: CollusionResult
    true_sender: str
    true_recipient: str
    scenario: str = ""


def cdf(sizes: Iterable[int]) -> list[tuple[int, float]]:
    """Empirical CDF as (size, cumulative fraction) rows, one per distinct size."""
    sizes = sorted(sizes)
    n = len(sizes)
    rows = []
    for i, s in enumerate(sizes):
        if i + 1 == n or sizes[i + 1] != s:
            rows.append((s, float(Fraction(i + 1, n))))
    return rows


def _pearson(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    if len(xs) < 2:
        return None
    try:
        return statistics.correlation(xs, ys)
    except statistics.StatisticsError:
        return None


def _frac(num: int, den: int) -> float:
    return num / den if den else 0.0


@dataclass
class ExperimentMetrics:
    """Summary statistics of one experiment.

    ``sing_all`` counts attacks where both sets are singletons (sometimes
    called sing_both). Correlations are ``None`` when undefined, as are the
    recipient-containment rates when there is nothing to average over.
    """

    scenario: str = ""
    n_transactions: int = 0
    n_attacks: int = 0
    n_attacked_transactions: int = 0
    r_att: float = 0.0
    av_att: float = 0.0
    corr_d_s: Optional[float] = None
    corr_d_r: Optional[float] = None
    sing_s: float = 0.0
    sing_r: float = 0.0
    sing_any: float = 0.0
    sing_all: float = 0.0
    nat_end: float = 0.0
    comp_att: Optional[float] = None
    comp_att_complete: Optional[float] = None
    cdf_s: dict = field(default_factory=lambda: {"complete": [], "incomplete": []})
    cdf_r: dict = field(default_factory=lambda: {"complete": [], "incomplete": []})

    def check(self) -> list[str]:
        """Violated consistency conditions, empty when all hold."""
        bad = []
        for f in ("r_att", "sing_s", "sing_r", "sing_any", "sing_all", "nat_end", "comp_att", "comp_att_complete"):
            v = getattr(self, f)
            if v is not None and not 0 <= v <= 1:
                bad.append(f"{f} outside [0, 1]")
        if not self.sing_all <= min(self.sing_s, self.sing_r) <= self.sing_any <= self.sing_s + self.sing_r + 1e-12:
            bad.append("singleton fractions out of order")
        for name in ("cdf_s", "cdf_r"):
            for part, rows in getattr(self, name).items():
                fr = [c for _, c in rows]
                if fr and (fr != sorted(fr) or fr[-1] != 1.0):
                    bad.append(f"{name}[{part}] is not a CDF")
        return bad


def compute_metrics(records: Sequence[AttackRecord], n_transactions: int, scenario: str = "") -> ExperimentMetrics:
    n = len(records)
    attacked = {r.result.payment_id for r in records}
    m = ExperimentMetrics(scenario=scenario, n_transactions=n_transactions, n_attacks=n,
                          n_attacked_transactions=len(attacked))
    m.r_att = _frac(len(attacked), n_transactions)
    m.av_att = _frac(n, len(attacked))
    m.corr_d_s = _pearson([r.hops_to_sender for r in records], [r.sender_size for r in records])
    m.corr_d_r = _pearson([r.hops_to_recipient for r in records], [r.recipient_size for r in records])
    s1 = [r.sender_size == 1 for r in records]
    r1 = [r.recipient_size == 1 for r in records]
    m.sing_s = _frac(sum(s1), n)
    m.sing_r = _frac(sum(r1), n)
    m.sing_any = _frac(sum(a or b for a, b in zip(s1, r1)), n)
    m.sing_all = _frac(sum(a and b for a, b in zip(s1, r1)), n)
    complete = [r for r in records if r.result.phase1_complete]
    m.nat_end = _frac(len(complete), n)
    if records:
        m.comp_att = _frac(sum(r.true_recipient in r.result.recipients for r in records), n)
    if complete:
        m.comp_att_complete = _frac(sum(r.true_recipient in r.result.recipients for r in complete), len(complete))
    for part, subset in (("complete", complete), ("incomplete", [r for r in records if not r.result.phase1_complete])):
        m.cdf_s[part] = cdf(r.sender_size for r in subset)
        m.cdf_r[part] = cdf(r.recipient_size for r in subset)
    return m


@dataclass(frozen=True)
class CollusionSummary:
    variant: str
    n_payments: int
    contains_recipient: Optional[float]
    contains_sender: Optional[float]
    singleton_recipient: Optional[float]
    singleton_sender: Optional[float]
    n_fallback: int


def summarize_collusion(records: Sequence[CollusionRecord], variant: str) -> CollusionSummary:
    rs = [r for r in records if r.variant == variant]
    n = len(rs)

    def rate(pred):
        return sum(map(pred, rs)) / n if n else None

    return CollusionSummary(
        variant, n,
        rate(lambda r: r.true_recipient in r.outcome.recipients),
        rate(lambda r: r.true_sender in r.outcome.senders),
        rate(lambda r: len(r.outcome.recipients) == 1),
        rate(lambda r: len(r.outcome.senders) == 1),
        sum(r.outcome.fallback for r in rs),
    )


# -- export ----------------------------------------------------------------

def _emit(text: str, sink: Sink) -> bytes:
    data = text.encode("utf-8")
    if sink is None:
        return data
    if isinstance(sink, (str, Path)):
        Path(sink).write_bytes(data)
    elif isinstance(sink, io.TextIOBase):
        sink.write(text)
    else:
        sink.write(data)
    return data


def _csv(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def cdf_rows(metrics: ExperimentMetrics) -> list[tuple]:
    rows = []
    for kind, table in (("sender", metrics.cdf_s), ("recipient", metrics.cdf_r)):
        for part in ("complete", "incomplete"):
            for size, frac in table.get(part, []):
                rows.append((metrics.scenario, kind, part, size, repr(float(frac))))
    return rows


def metrics_to_dict(metrics: ExperimentMetrics) -> dict:
    d = asdict(metrics)
    for name in ("cdf_s", "cdf_r"):
        d[name] = {k: [list(row) for row in v] for k, v in d[name].items()}
    return d


def metrics_from_dict(d: dict) -> ExperimentMetrics:
    known = {f.name for f in fields(ExperimentMetrics)}
    kw = {k: v for k, v in d.items() if k in known}
    for name in ("cdf_s", "cdf_r"):
        if name in kw:
            kw[name] = {k: [(int(s), float(c)) for s, c in v] for k, v in kw[name].items()}
    return ExperimentMetrics(**kw)


def export(metrics: Optional[ExperimentMetrics], sink: Sink = None, format: str = "CSV") -> bytes:
    """Write ``metrics`` as CDF rows (CSV) or as a JSON object; returns the bytes written."""
    fmt = format.upper()
    if fmt == "CSV":
        rows = cdf_rows(metrics) if metrics is not None else []
        return _emit(_csv(CDF_COLUMNS, rows), sink)
    if fmt == "JSON":
        body = metrics_to_dict(metrics if metrics is not None else ExperimentMetrics())
        return _emit(json.dumps(body, indent=2, sort_keys=True) + "\n", sink)
    raise ValueError(f"unknown export format {format!r}")


def import_json(source: Union[str, bytes, Path, IO]) -> ExperimentMetrics:
    if isinstance(source, Path):
        source = source.read_text()
    elif hasattr(source, "read"):
        source = source.read()
    return metrics_from_dict(json.loads(source))


def attack_rows(records: Iterable[AttackRecord]) -> list[tuple]:
    rows = []
    for r in records:
        res = r.result
        for kind, size in (("sender", r.sender_size), ("recipient", r.recipient_size)):
            rows.append((r.scenario, res.observer, res.payment_id, kind, size,
                         int(res.phase1_complete), r.hops_to_sender, r.hops_to_recipient))
    return rows


def collusion_rows(records: Iterable[CollusionRecord]) -> list[tuple]:
    return [(r.scenario, r.payment_id, r.variant, r.n_observers, r.outcome.n_used, int(r.outcome.fallback),
             len(r.outcome.senders), len(r.outcome.recipients),
             int(r.true_sender in r.outcome.senders), int(r.true_recipient in r.outcome.recipients))
            for r in records]


def write_attacks_csv(records: Iterable[AttackRecord], sink: Sink = None) -> bytes:
    return _emit(_csv(ATTACK_COLUMNS, attack_rows(records)), sink)


def write_collusion_csv(records: Iterable[CollusionRecord], sink: Sink = None) -> bytes:
    return _emit(_csv(COLLUSION_COLUMNS, collusion_rows(records)), sink)
