"""Bounded model checking of cover monitors."""

import logging
import time
from pathlib import Path
from typing import Optional

from src.checker.monitor import MonitorAutomaton
from src.checker.sat import SatResult, SatSession
from src.checker.ts import TransitionSystem
from src.checker.unroll import Unroller
from src.checker.verdict import Method, Verdict, VerdictKind
from src.checker.witness import extract_witness

logger = logging.getLogger(__name__)

NOT_WITHIN = "not-within"


def bmc_cover(
    ts: TransitionSystem,
    monitor: MonitorAutomaton,
    max_k: int,
    conflict_budget: Optional[int] = None,
    dump_dir: Optional[str | Path] = None,
    label: str = "cover",
) -> Verdict:
    """Search for an accepting run of length 1..max_k+1.

    Returns Covered with a witness, Unknown("not-within") when every bound is
    UNSAT, or Unknown("sat-limit") when the solver budget runs out.
    """
    start = time.perf_counter()
    kwargs = {} if conflict_budget is None else {"conflict_budget": conflict_budget}
    with SatSession(**kwargs) as session:
        un = Unroller(ts, monitor, session)
        for k in range(max_k + 1):
            frame = un.frame(k)
            if frame.accept == un.c.F:
                continue
            if dump_dir:
                session.dump_dimacs(Path(dump_dir) / f"{label}_bmc{k}.cnf", [frame.accept])
            result = session.solve([frame.accept])
            if result == SatResult.SAT:
                witness = extract_witness(un, k)
                logger.debug("%s covered at k=%d (%.0fms)", label, k, (time.perf_counter() - start) * 1000)
                return Verdict(VerdictKind.COVERED, Method.BMC, k, witness, sat_queries=session.queries)
            if result == SatResult.LIMIT:
                return Verdict(VerdictKind.UNKNOWN, Method.BMC, k, reason="sat-limit", sat_queries=session.queries)
        logger.debug("%s: no cover up to k=%d (%.0fms)", label, max_k, (time.perf_counter() - start) * 1000)
        return Verdict(VerdictKind.UNKNOWN, Method.BMC, max_k, reason=NOT_WITHIN, sat_queries=session.queries)
