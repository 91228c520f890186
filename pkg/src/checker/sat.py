"""Incremental SAT sessions on top of pysat."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

from pysat.formula import CNF
from pysat.solvers import Solver

from src.config.settings import settings

logger = logging.getLogger(__name__)


# Backends whose solve_limited stops at conf_budget
BUDGETED_BACKENDS = frozenset({"cadical153", "cadical195", "minisat22", "minicard"})
BUDGET_FALLBACK = "cadical153"


class SatResult(str, Enum):
    SAT = "sat"
    UNSAT = "unsat"
    LIMIT = "limit"  # conflict budget exhausted; not a verdict


@dataclass
class SatSession:
    """One solver instance plus the variable allocator and names for DIMACS dumps.

    Variable 1 is the constant-true literal.
    """

    backend: str = field(default_factory=lambda: settings.sat_backend)
    conflict_budget: int = field(default_factory=lambda: settings.sat_conflict_budget)
    queries: int = 0
    num_vars: int = 1
    clauses: list[list[int]] = field(default_factory=list)
    names: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.conflict_budget > 0 and self.backend not in BUDGETED_BACKENDS:
            logger.warning(
                "SAT backend %s ignores conflict budgets; using %s", self.backend, BUDGET_FALLBACK
            )
            self.backend = BUDGET_FALLBACK
        self._solver = Solver(name=self.backend)
        self.add([1])
        self.names[1] = "true"
        self._model: Optional[set[int]] = None

    @property
    def true(self) -> int:
        return 1

    def new_var(self, name: Optional[str] = None) -> int:
        self.num_vars += 1
        if name:
            self.names[self.num_vars] = name
        return self.num_vars

    def add(self, clause: Sequence[int]) -> None:
        clause = list(clause)
        self.clauses.append(clause)
        self._solver.add_clause(clause)

    def add_all(self, clauses: Iterable[Sequence[int]]) -> None:
        for c in clauses:
            self.add(c)

    def solve(self, assumptions: Sequence[int] = ()) -> SatResult:
        self.queries += 1
        if self.conflict_budget > 0:
            self._solver.conf_budget(self.conflict_budget)
            outcome = self._solver.solve_limited(assumptions=list(assumptions))
        else:
            outcome = self._solver.solve(assumptions=list(assumptions))
        if outcome is None:
            logger.debug("SAT query %d hit the conflict budget", self.queries)
            self._model = None
            return SatResult.LIMIT
        self._model = set(self._solver.get_model()) if outcome else None
        return SatResult.SAT if outcome else SatResult.UNSAT

    def value(self, lit: int) -> bool:
        if self._model is None:
            raise RuntimeError("no model available")
        if lit in self._model:
            return True
        if -lit in self._model:
            return False
        # variables the solver never saw are unconstrained; read them as 0
        return lit < 0

    def close(self) -> None:
        self._solver.delete()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def dump_dimacs(self, path: str | Path, assumptions: Sequence[int] = ()) -> Path:
        """The current formula with the query's assumptions as unit clauses."""
        comments = [f"c query {self.queries}"]
        comments.extend(f"c var {v} {name}" for v, name in sorted(self.names.items()))
        cnf = CNF(from_clauses=self.clauses + [[a] for a in assumptions])
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        cnf.to_file(str(path), comments=comments)
        return path


def sat_solve(clauses: Iterable[Sequence[int]], backend: Optional[str] = None) -> Optional[dict[int, bool]]:
    """One-shot solve; the model maps each variable to its value, None means UNSAT."""
    clauses = [list(c) for c in clauses]
    with Solver(name=backend or settings.sat_backend, bootstrap_with=clauses) as solver:
        if not solver.solve():
            return None
        return {abs(lit): lit > 0 for lit in solver.get_model()}


def dump_dimacs(clauses: Iterable[Sequence[int]], path: str | Path, names: Optional[dict[int, str]] = None) -> Path:
    comments = [f"c var {v} {name}" for v, name in sorted((names or {}).items())]
    path = Path(path)
    CNF(from_clauses=[list(c) for c in clauses]).to_file(str(path), comments=comments)
    return path
