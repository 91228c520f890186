from typing import Optional

from pydantic import BaseModel, Field

from src.schemas.run import Mode


class AttributedFetch(BaseModel):
    cycle: int
    address: int
    word: int = Field(description="Instruction word seen on the fetch port")
    line: Optional[str] = Field(default=None, description="'file:line: text', None when unmapped")
    mapped: bool = Field(default=False, description="Address lies in the program and holds this word")


class PropertyRecord(BaseModel):
    """One line of report.jsonl."""

    name: str = Field(description="Property name, cover_<path id>")
    path_id: str
    source: str
    sink: str
    mode: Mode = Field(description="Mode that produced the verdict (the deciding stage under Full)")
    stages: list[str] = Field(default_factory=list, description="Modes tried, in order")
    verdict: str = Field(description="covered | uncoverable | unknown")
    method: str = Field(default="", description="bmc | k-induction | explicit-state | structural")
    bound: int = Field(default=0, description="BMC bound or proof depth")
    reason: str = Field(default="", description="Why a verdict is unknown")
    wall_ms: float = 0.0
    sat_queries: int = 0
    witness_file: Optional[str] = None
    attribution: list[AttributedFetch] = Field(default_factory=list)


class Summary(BaseModel):
    total: int = 0
    covered: int = 0
    uncoverable: int = 0
    unknown: int = 0
    total_ms: float = 0.0
    sat_queries: int = 0


class Report(BaseModel):
    design: str
    program: Optional[str] = None
    mode: Mode
    fingerprint: dict = Field(default_factory=dict, description="RunConfig.fingerprint() of the run")
    instructions: int = Field(default=0, description="Program size in words")
    call_depth: int = 0
    paths: int = 0
    paths_truncated: bool = False
    records: list[PropertyRecord] = Field(default_factory=list)
    summary: Summary = Field(default_factory=Summary)
    incomplete: bool = False
    error: Optional[str] = None

    def names_with(self, verdict: str) -> set[str]:
        return {r.name for r in self.records if r.verdict == verdict}

    def recount(self) -> None:
        s = self.summary
        s.total = len(self.records)
        s.covered = sum(1 for r in self.records if r.verdict == "covered")
        s.uncoverable = sum(1 for r in self.records if r.verdict == "uncoverable")
        s.unknown = s.total - s.covered - s.uncoverable
        s.sat_queries = sum(r.sat_queries for r in self.records)
