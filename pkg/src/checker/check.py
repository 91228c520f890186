"""Per-property decision procedure: BMC, then a proof of uncoverability."""

import logging
import time
from pathlib import Path
from typing import Optional

from src.checker.bmc import NOT_WITHIN, bmc_cover
from src.checker.induction import prove_uncoverable
from src.checker.monitor import MonitorAutomaton, compile_monitor
from src.checker.ts import TransitionSystem
from src.checker.verdict import Method, Verdict, VerdictKind
from src.checker.witness import overflowed, replay_witness
from src.properties.blocks import block_count
from src.properties.property import Property
from src.schemas.run import Limits

logger = logging.getLogger(__name__)


def check_property(
    ts: TransitionSystem,
    prop: Property,
    limits: Limits,
    monitor: Optional[MonitorAutomaton] = None,
    dump_dir: Optional[str | Path] = None,
) -> Verdict:
    start = time.perf_counter()
    monitor = monitor or compile_monitor(prop.body)
    if monitor.empty:
        logger.info("%s: no accepting run in the monitor, uncoverable", prop.name)
        return Verdict(VerdictKind.UNCOVERABLE, Method.STRUCTURAL, 0)

    bound = max(limits.bound_for(block_count(prop)), limits.induction_depth)
    verdict = bmc_cover(ts, monitor, bound, limits.conflict_budget, dump_dir, prop.name)
    queries = verdict.sat_queries
    if verdict.kind == VerdictKind.UNKNOWN and verdict.reason == NOT_WITHIN:
        verdict = prove_uncoverable(ts, monitor, limits)
        verdict.sat_queries += queries

    if verdict.covered:
        replay = replay_witness(verdict.witness, ts, prop.body, monitor)
        if not replay.ok:
            logger.error("%s: witness does not replay (%s)", prop.name, replay.reason)
            verdict = Verdict(
                VerdictKind.UNKNOWN, verdict.method, verdict.bound, reason=f"replay-failed: {replay.reason}",
                sat_queries=verdict.sat_queries,
            )
        elif overflowed(verdict.witness, ts.overflow):
            # the run only exists because the call-stack monitor lost track
            verdict = Verdict(
                VerdictKind.UNKNOWN, verdict.method, verdict.bound, verdict.witness, reason="depth-overflow",
                sat_queries=verdict.sat_queries,
            )

    logger.info(
        "%s: %s via %s, bound %d, %d SAT queries (%.0fms)",
        prop.name,
        verdict.kind.value,
        verdict.method.value if verdict.method else "-",
        verdict.bound,
        verdict.sat_queries,
        (time.perf_counter() - start) * 1000,
    )
    return verdict
