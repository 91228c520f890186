from dataclasses import dataclass
from enum import Enum
from typing import Optional

from src.checker.witness import Witness


class VerdictKind(str, Enum):
    COVERED = "covered"
    UNCOVERABLE = "uncoverable"
    UNKNOWN = "unknown"


class Method(str, Enum):
    BMC = "bmc"
    K_INDUCTION = "k-induction"
    EXPLICIT = "explicit-state"
    STRUCTURAL = "structural"


@dataclass
class Verdict:
    kind: VerdictKind
    method: Optional[Method] = None
    bound: int = 0  # BMC depth, induction depth, or explored state count
    witness: Optional[Witness] = None
    reason: str = ""
    sat_queries: int = 0

    @property
    def covered(self) -> bool:
        return self.kind == VerdictKind.COVERED

    @property
    def uncoverable(self) -> bool:
        return self.kind == VerdictKind.UNCOVERABLE
