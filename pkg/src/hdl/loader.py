"""Parse and elaborate RTL files, with elaborated netlists cached by content hash."""

import logging
import time
from pathlib import Path
from typing import Optional, Sequence

from src.hdl.elaborate import elaborate
from src.hdl.netlist import FlatNetlist
from src.hdl.parser import parse_rtl
from src.hdl.tree import ModuleTree
from src.pipeline.cache import get_cached_netlist, make_key, set_cached_netlist

logger = logging.getLogger(__name__)


def parse_files(paths: Sequence[str | Path]) -> ModuleTree:
    modules = []
    for path in paths:
        path = Path(path)
        modules.extend(parse_rtl(path.read_text(), str(path)).modules)
    return ModuleTree(tuple(modules), str(Path(paths[0])) if paths else "<input>")


def load_rtl(paths: Sequence[str | Path], top: Optional[str] = None) -> tuple[FlatNetlist, str]:
    """Parse and elaborate ``paths``; returns the netlist and its cache key."""
    texts = [Path(p).read_text() for p in paths]
    key = make_key(top or "", *texts)
    cached = get_cached_netlist(key)
    if cached is not None:
        return cached, key
    start = time.perf_counter()
    netlist = elaborate(parse_files(paths), top)
    set_cached_netlist(key, netlist)
    logger.info("Loaded %d RTL file(s) in %.0fms", len(paths), (time.perf_counter() - start) * 1000)
    return netlist, key
