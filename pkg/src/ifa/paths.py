"""Leakage path enumeration and ranking."""

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

from src.config.settings import settings
from src.hdl.expr import to_text
from src.hdl.netlist import FlatNetlist
from src.ifa.edges import AssignmentEdge, build_edges
from src.ifa.labels import Bits, LabelConfig
from src.pipeline.cache import get_cached_paths, set_cached_paths

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LeakagePath:
    edges: tuple[AssignmentEdge, ...]
    source: Bits
    sink: Bits

    @cached_property
    def id(self) -> str:
        return hashlib.sha1("|".join(e.key for e in self.edges).encode()).hexdigest()[:12]

    @property
    def conditional_edges(self) -> int:
        return sum(1 for e in self.edges if e.conditional)

    @property
    def rank_key(self) -> tuple:
        """Fewer conditions first (easier to activate), then shorter, then edge ids."""
        return (self.conditional_edges, len(self.edges), tuple(e.key for e in self.edges))

    def describe(self) -> str:
        return " -> ".join([str(self.edges[0].src.name)] + [e.dst.name for e in self.edges])

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "source": str(self.source),
            "sink": str(self.sink),
            "conditional_edges": self.conditional_edges,
            "edges": [
                {
                    "from": str(e.src),
                    "to": str(e.dst),
                    "sequential": e.sequential,
                    "condition": to_text(e.condition),
                    "assignments": [a.assignment for a in e.activations],
                }
                for e in self.edges
            ],
        }


@dataclass
class PathSet:
    paths: list[LeakagePath] = field(default_factory=list)
    truncated: bool = False  # max_paths reached
    edge_limit_hit: bool = False  # some route was cut at max_edges

    @property
    def limited(self) -> bool:
        return self.truncated or self.edge_limit_hit

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)


def rank_paths(paths: list[LeakagePath]) -> list[LeakagePath]:
    return sorted(paths, key=lambda p: p.rank_key)


class _Search:
    def __init__(self, edges: list[AssignmentEdge], labels: LabelConfig, max_paths: int, max_edges: int):
        self.out: dict[str, list[AssignmentEdge]] = {}
        # name order: a truncated search must not depend on declaration order
        for e in sorted(edges, key=lambda e: e.key):
            self.out.setdefault(e.src.name, []).append(e)
        self.labels = labels
        self.max_paths = max_paths
        self.max_edges = max_edges
        self.found: list[LeakagePath] = []
        self.truncated = False
        self.edge_limit_hit = False

    def sink_for(self, e: AssignmentEdge) -> Optional[Bits]:
        for sink in self.labels.sinks:
            if sink.overlaps(e.dst):
                return sink
        return None

    def run(self) -> None:
        # Paths are produced shortest first, so raising either limit keeps
        # every previously reported path.
        for length in range(1, self.max_edges + 1):
            for source in self.labels.sources:
                for e in self.out.get(source.name, []):
                    if e.src.overlaps(source) and not self.truncated:
                        self._extend(source, [e], {source.name, e.dst.name}, length)
            if self.truncated:
                return

    def _extend(self, source: Bits, stack: list[AssignmentEdge], seen: set[str], length: int) -> None:
        last = stack[-1]
        if len(stack) == length:
            sink = self.sink_for(last)
            if sink is not None:
                if len(self.found) >= self.max_paths:
                    self.truncated = True
                    return
                self.found.append(LeakagePath(tuple(stack), source, sink))
            if length == self.max_edges and any(
                n.dst.name not in seen and n.src.overlaps(last.dst) for n in self.out.get(last.dst.name, [])
            ):
                self.edge_limit_hit = True
            return
        for n in self.out.get(last.dst.name, []):
            if self.truncated:
                return
            if n.dst.name in seen or not n.src.overlaps(last.dst):
                continue
            stack.append(n)
            seen.add(n.dst.name)
            self._extend(source, stack, seen, length)
            seen.discard(n.dst.name)
            stack.pop()


def enumerate_paths(
    netlist: FlatNetlist,
    labels: LabelConfig,
    max_paths: Optional[int] = None,
    max_edges: Optional[int] = None,
    edges: Optional[list[AssignmentEdge]] = None,
) -> PathSet:
    """All simple source-to-sink paths within the limits, ranked."""
    start = time.perf_counter()
    max_paths = settings.max_paths if max_paths is None else max_paths
    max_edges = settings.max_edges if max_edges is None else max_edges
    search = _Search(edges if edges is not None else build_edges(netlist, labels), labels, max_paths, max_edges)
    search.run()
    result = PathSet(rank_paths(search.found), search.truncated, search.edge_limit_hit)
    if result.limited:
        logger.warning(
            "Path enumeration hit its limits (max_paths=%d, max_edges=%d); the path list is partial",
            max_paths,
            max_edges,
        )
    logger.info("Enumerated %d leakage path(s) in %.0fms", len(result), (time.perf_counter() - start) * 1000)
    return result


def cached_paths(netlist: FlatNetlist, netlist_key: str, labels: LabelConfig, max_paths: int, max_edges: int) -> PathSet:
    limits = {"max_paths": max_paths, "max_edges": max_edges}
    cached = get_cached_paths(netlist_key, labels.as_dict(), limits)
    if cached is not None:
        return cached
    result = enumerate_paths(netlist, labels, max_paths, max_edges)
    set_cached_paths(netlist_key, labels.as_dict(), limits, result)
    return result


def export_paths(paths: PathSet, out: str | Path) -> Path:
    """JSON lines, one record per path, followed by a limits record."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as fh:
        for p in paths:
            fh.write(json.dumps(p.to_record(), sort_keys=True) + "\n")
        fh.write(json.dumps({"truncated": paths.truncated, "edge_limit_hit": paths.edge_limit_hit}) + "\n")
    return out
