"""Security labels resolved against a netlist."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from pydantic import ValidationError

from src.diagnostics import LabelConfigError
from src.hdl.netlist import FlatNetlist
from src.schemas.target import SignalRange, TargetConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Bits:
    """A resolved bit range of one signal."""

    name: str
    msb: int
    lsb: int

    def overlaps(self, other: "Bits") -> bool:
        return self.name == other.name and self.lsb <= other.msb and other.lsb <= self.msb

    def covers(self, other: "Bits") -> bool:
        return self.name == other.name and self.lsb <= other.lsb and other.msb <= self.msb

    @property
    def mask(self) -> int:
        return ((1 << (self.msb - self.lsb + 1)) - 1) << self.lsb

    def __str__(self) -> str:
        if self.msb == self.lsb:
            return f"{self.name}[{self.msb}]"
        return f"{self.name}[{self.msb}:{self.lsb}]"


@dataclass(frozen=True)
class LabelConfig:
    sources: tuple[Bits, ...]
    sinks: tuple[Bits, ...]
    declassifiers: frozenset[str] = frozenset()

    def as_dict(self) -> dict:
        return {
            "sources": [str(b) for b in self.sources],
            "sinks": [str(b) for b in self.sinks],
            "declassifiers": sorted(self.declassifiers),
        }


def load_target_config(path: str | Path) -> TargetConfig:
    """Read a TargetConfig; RTL paths become relative to the config file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
        config = TargetConfig.model_validate(data)
    except (OSError, json.JSONDecodeError) as exc:
        raise LabelConfigError(f"cannot read target config: {exc}", file=str(path)) from exc
    except ValidationError as exc:
        raise LabelConfigError(f"invalid target config: {exc.errors()[0]['msg']}", file=str(path)) from exc
    config.rtl = [str((path.parent / p).resolve()) if not Path(p).is_absolute() else p for p in config.rtl]
    return config


def _resolve(netlist: FlatNetlist, r: SignalRange, role: str) -> Bits:
    if r.signal not in netlist.by_name:
        raise LabelConfigError(f"{role} '{r.signal}' is not a signal of {netlist.name}")
    width = netlist.signal(r.signal).width
    if r.msb is None:
        return Bits(r.signal, width - 1, 0)
    if r.msb >= width:
        raise LabelConfigError(f"{role} range {r} exceeds the {width}-bit signal")
    return Bits(r.signal, r.msb, r.lsb)


def resolve_labels(config: TargetConfig, netlist: FlatNetlist) -> LabelConfig:
    """Validate labels against the netlist: names exist, ranges fit, sources and sinks are disjoint."""
    sources = tuple(sorted({_resolve(netlist, r, "source") for r in config.sources}))
    sinks = tuple(sorted({_resolve(netlist, r, "sink") for r in config.sinks}))
    for s in sources:
        for t in sinks:
            if s.overlaps(t):
                raise LabelConfigError(f"{s} is labelled both sensitive and untrusted")
    for name in config.declassifiers:
        if name not in netlist.by_name:
            raise LabelConfigError(f"declassifier '{name}' is not a signal of {netlist.name}")
        if any(b.name == name for b in sources + sinks):
            raise LabelConfigError(f"declassifier '{name}' is also a source or sink")
    labels = LabelConfig(sources, sinks, frozenset(config.declassifiers))
    logger.debug("Labels: %d source(s), %d sink(s), %d declassifier(s)", len(sources), len(sinks), len(labels.declassifiers))
    return labels
