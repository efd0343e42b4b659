"""Experiment configuration: TOML file, command-line overrides, seed splitting."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, fields
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .adversary import AdversarySpec
from .errors import ConfigError
from .payment import AmountModel
from .snapshot import FROM_SNAPSHOT, MEASURED_CLIENT_MIX, Distribution


class Scenario(str, Enum):
    LND_ONLY = "LNDOnly"
    CLIENTS_KNOWN = "ClientsKnown"
    BLIND = "Blind"

    @classmethod
    def parse(cls, value) -> "Scenario":
        if isinstance(value, cls):
            return value
        norm = str(value).replace("_", "").replace("-", "").lower()
        for s in cls:
            if s.value.lower() == norm:
                return s
        raise ConfigError(f"unknown scenario {value!r}; expected one of {[s.value for s in cls]}")


@dataclass(frozen=True)
class SyntheticSpec:
    """Scale-free topology used when no snapshot file is given."""

    nodes: int = 300
    m: int = 2
    seed: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    snapshot: Optional[str] = None
    synthetic: SyntheticSpec = SyntheticSpec()
    scenario: Scenario = Scenario.LND_ONLY
    shadow: bool = False
    n_transactions: int = 1000
    amount: AmountModel = AmountModel()
    depth: Optional[int] = None  # None: 3, or 2 with shadow routing
    adversaries: AdversarySpec = AdversarySpec()
    client_mix: tuple = (0.92, 0.06, 0.02)  # or "from_snapshot" / "measured"
    fuzz: bool = True
    seed: int = 0
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario.parse(self.scenario))
        if self.depth is not None and self.depth < 0:
            raise ConfigError("depth must be >= 0")
        if self.n_transactions < 0:
            raise ConfigError("n_transactions must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        a = self.amount
        if not (0 < a.min_sat <= a.max_sat) or a.rate_per_sat <= 0:
            raise ConfigError("amount model needs 0 < min_sat <= max_sat and a positive rate")
        if self.synthetic.nodes < 2 or self.synthetic.m < 1 or self.synthetic.m >= self.synthetic.nodes:
            raise ConfigError("synthetic graph needs nodes >= 2 and 1 <= m < nodes")
        self.client_distribution()

    @property
    def effective_depth(self) -> int:
        if self.depth is not None:
            return self.depth
        return 2 if self.shadow else 3

    def client_distribution(self) -> Union[str, Distribution]:
        mix = self.client_mix
        if isinstance(mix, str):
            if mix.lower() in (FROM_SNAPSHOT, "snapshot"):
                return FROM_SNAPSHOT
            if mix.lower() == "measured":
                return MEASURED_CLIENT_MIX
            raise ConfigError(f"unknown client mix {mix!r}")
        if len(mix) != 3:
            raise ConfigError("client_mix needs three probabilities (LND, CLightning, Eclair)")
        return Distribution(*(Fraction(str(p)) for p in mix))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scenario"] = self.scenario.value
        d["adversaries"]["metrics"] = [m.value for m in self.adversaries.metrics]
        d["client_mix"] = mix if isinstance(mix := self.client_mix, str) else [float(p) for p in mix]
        d["amount"] = {k: float(v) if k == "rate_per_sat" else v for k, v in d["amount"].items()}
        return d

    def config_hash(self) -> str:
        """Digest of every field that influences results (not output_dir or workers)."""
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


_NESTED = {"synthetic": SyntheticSpec, "amount": AmountModel, "adversaries": AdversarySpec}


def _build(cls, data: Mapping[str, Any], where: str):
    names = {f.name: f for f in fields(cls)}
    kw = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"unknown config key {where}{key!r}")
        if cls is ExperimentConfig and key in _NESTED:
            if not isinstance(value, Mapping):
                raise ConfigError(f"config key {key!r} must be a table")
            value = _build(_NESTED[key], value, f"{key}.")
        elif key in ("client_mix", "metrics") and isinstance(value, list):
            value = tuple(value)
        kw[key] = value
    try:
        return cls(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid {where or 'config'}: {e}") from None


def config_from_mapping(data: Mapping[str, Any]) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "")


def load_toml(path: Union[str, Path]) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config file {path}: {e}") from None


def merge(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> dict:
    """Apply dotted-key overrides (``"adversaries.top_k": 4``) on top of ``base``."""
    out = {k: dict(v) if isinstance(v, Mapping) else v for k, v in base.items()}
    for dotted, value in overrides.items():
        if value is None:
            continue
        *parents, leaf = dotted.split(".")
        node = out
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    return out


def load_config(path: Optional[Union[str, Path]] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """Defaults, then the TOML file, then overrides."""
    data = load_toml(path) if path is not None else {}
    return config_from_mapping(merge(data, overrides or {}))


SEED_LABELS = ("balances", "clients", "transactions", "adversaries", "eclair-choice", "fuzz", "shadow")


def derive_seed(master: int, label: str, *extra) -> int:
    """64-bit sub-seed from the master seed and a stage label."""
    text = ":".join(str(x) for x in (master, label) + extra)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")

