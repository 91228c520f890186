"""Invariant mining and k-induction on the design x monitor product."""

import logging
import time
from dataclasses import dataclass
from typing import Callable, Optional

from src.checker.explicit import explicit_oracle, within_budget
from src.checker.monitor import MonitorAutomaton
from src.checker.sat import SatResult, SatSession
from src.checker.ts import TransitionSystem
from src.checker.unroll import Unroller
from src.checker.verdict import Method, Verdict, VerdictKind
from src.hdl.expr import one_of
from src.schemas.run import Limits

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Lemma:
    """A candidate invariant as a literal builder over one frame."""

    name: str
    at: Callable[[Unroller, int], int]


def _bit(name: str, index: int, value: int) -> Callable[[Unroller, int], int]:
    def at(un: Unroller, k: int) -> int:
        lit = un.frame(k).env[name][index]
        return lit if value else -lit

    return at


def _monitor_off(q: int) -> Callable[[Unroller, int], int]:
    return lambda un, k: -un.monitor_bit(k, q)


def _monitor_holds(q: int, name: str, index: int, value: int) -> Callable[[Unroller, int], int]:
    def at(un: Unroller, k: int) -> int:
        lit = un.frame(k).env[name][index]
        return un.c.or2(-un.monitor_bit(k, q), lit if value else -lit)

    return at


def candidates(ts: TransitionSystem, monitor: Optional[MonitorAutomaton]) -> list[Lemma]:
    out: list[Lemma] = []
    bits = monitor.state_bits if monitor else 0
    for q in range(1, bits + 1):
        out.append(Lemma(f"!mon{q}", _monitor_off(q)))
    held = [r for r in ts.aux if r.init is None]
    for q in range(1, bits + 1):
        for r in held:
            for i in range(r.width):
                for v in (0, 1):
                    out.append(Lemma(f"mon{q} -> {r.name}[{i}]=={v}", _monitor_holds(q, r.name, i, v)))
    for s in ts.registers:
        if s.is_memory or s.init is None:
            continue
        for i in range(s.width):
            out.append(Lemma(f"{s.name}[{i}]=={(s.init >> i) & 1}", _bit(s.name, i, (s.init >> i) & 1)))
    for r in ts.aux:
        if r.init is None:
            continue
        for i in range(r.width):
            out.append(Lemma(f"{r.name}[{i}]=={(r.init >> i) & 1}", _bit(r.name, i, (r.init >> i) & 1)))
    if ts.reach is not None and ts.fetch_addr:
        fetch = ts.netlist.signal(ts.fetch_addr).ref()
        reach = sorted(ts.reach)
        out.append(Lemma(f"{ts.fetch_addr} in reach", lambda un, k: un.blast_at(k, one_of(fetch, reach))))
    return out


def _filter(session: SatSession, lits: list[int], assumptions: list[int], keep: list[bool], rounds: int) -> Optional[list[bool]]:
    """Drop candidates violated in a model until the rest all hold; None when undecided."""
    for _ in range(rounds):
        live = [i for i, k in enumerate(keep) if k]
        if not live:
            return keep
        act = session.new_var()
        session.add([-act] + [-lits[i] for i in live])
        result = session.solve([act] + [a for i, a in enumerate(assumptions) if keep[i]])
        session.add([-act])
        if result == SatResult.UNSAT:
            return keep
        if result == SatResult.LIMIT:
            return None
        for i in live:
            if not session.value(lits[i]):
                keep[i] = False
    return None


def mine_lemmas(ts: TransitionSystem, monitor: Optional[MonitorAutomaton], limits: Limits) -> tuple[list[Lemma], int]:
    """Houdini: the largest inductive subset of the candidates that holds initially.

    Returns the lemmas and the number of SAT queries spent. Running out of
    rounds or solver budget yields no lemmas, which is always sound.
    """
    start = time.perf_counter()
    cands = candidates(ts, monitor)
    if not cands:
        return [], 0
    queries = 0
    with SatSession(conflict_budget=limits.conflict_budget) as base:
        un = Unroller(ts, monitor, base)
        lits = [c.at(un, 0) for c in cands]
        keep = _filter(base, lits, [], [True] * len(cands), limits.houdini_rounds)
        queries += base.queries
    if keep is None:
        return [], queries
    with SatSession(conflict_budget=limits.conflict_budget) as step:
        un = Unroller(ts, monitor, step, free_init=True)
        now = [c.at(un, 0) for c in cands]
        nxt = [c.at(un, 1) for c in cands]
        keep = _filter(step, nxt, now, keep, limits.houdini_rounds)
        queries += step.queries
    if keep is None:
        return [], queries
    lemmas = [c for c, k in zip(cands, keep) if k]
    logger.debug(
        "Houdini kept %d of %d candidate(s) in %d queries (%.0fms)",
        len(lemmas), len(cands), queries, (time.perf_counter() - start) * 1000,
    )
    return lemmas, queries


def k_induction(
    ts: TransitionSystem,
    monitor: MonitorAutomaton,
    lemmas: list[Lemma],
    depth: int,
    conflict_budget: Optional[int] = None,
) -> tuple[Optional[int], int]:
    """Smallest d <= depth at which the step case holds, and the queries spent.

    The base case is the caller's: bmc_cover must have ruled out acceptance
    on frames 0..depth.
    """
    kwargs = {} if conflict_budget is None else {"conflict_budget": conflict_budget}
    with SatSession(**kwargs) as session:
        un = Unroller(ts, monitor, session, free_init=True)
        for d in range(depth + 1):
            frame = un.frame(d)
            for lemma in lemmas:
                lit = lemma.at(un, d)
                if lit != un.c.T:
                    session.add([lit])
            if d > 0:
                session.add([-un.frame(d - 1).accept])
            if frame.accept == un.c.F:
                return d, session.queries
            result = session.solve([frame.accept])
            if result == SatResult.UNSAT:
                return d, session.queries
            if result == SatResult.LIMIT:
                break
        return None, session.queries


def prove_uncoverable(ts: TransitionSystem, monitor: MonitorAutomaton, limits: Limits) -> Verdict:
    """k-induction strengthened by mined lemmas, then the explicit oracle for small systems."""
    lemmas, queries = mine_lemmas(ts, monitor, limits)
    depth, spent = k_induction(ts, monitor, lemmas, limits.induction_depth, limits.conflict_budget)
    queries += spent
    if depth is not None:
        return Verdict(VerdictKind.UNCOVERABLE, Method.K_INDUCTION, depth, sat_queries=queries)
    if within_budget(ts, monitor, limits):
        verdict = explicit_oracle(ts, monitor, limits.explicit_state_bits, limits.explicit_input_bits)
        verdict.sat_queries = queries
        return verdict
    return Verdict(
        VerdictKind.UNKNOWN,
        Method.K_INDUCTION,
        limits.induction_depth,
        reason="induction-failed",
        sat_queries=queries,
    )
