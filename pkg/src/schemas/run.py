from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field, model_validator

from src.config.settings import settings


class Mode(str, Enum):
    """Verification cases, weakest first."""

    NONE = "none"
    LEGAL = "legal"
    USED = "used"
    JUMPS = "jumps"
    STACK = "stack"
    FULL = "full"

    @property
    def rank(self) -> int:
        return MODE_CHAIN.index(self) if self in MODE_CHAIN else len(MODE_CHAIN)

    @property
    def needs_program(self) -> bool:
        return self in (Mode.USED, Mode.JUMPS, Mode.STACK, Mode.FULL)

    @property
    def needs_metadata(self) -> bool:
        return self in (Mode.JUMPS, Mode.STACK, Mode.FULL)


MODE_CHAIN = (Mode.NONE, Mode.LEGAL, Mode.USED, Mode.JUMPS, Mode.STACK)
ESCALATION = (Mode.USED, Mode.JUMPS, Mode.STACK)


class Limits(BaseModel):
    max_paths: int = Field(default_factory=lambda: settings.max_paths)
    max_edges: int = Field(default_factory=lambda: settings.max_edges)
    max_k: int = Field(default_factory=lambda: settings.max_k, description="0 derives the bound from the path")
    induction_depth: int = Field(default_factory=lambda: settings.induction_depth)
    houdini_rounds: int = Field(default_factory=lambda: settings.houdini_rounds)
    explicit_state_bits: int = Field(default_factory=lambda: settings.explicit_state_bits)
    explicit_input_bits: int = Field(default_factory=lambda: settings.explicit_input_bits)
    conflict_budget: int = Field(default_factory=lambda: settings.sat_conflict_budget)
    call_stack_depth: int = Field(default_factory=lambda: settings.call_stack_depth)

    def bound_for(self, blocks: int) -> int:
        if self.max_k > 0:
            return self.max_k
        return 2 * max(blocks, 1) * settings.pipeline_depth

    def path_limits(self) -> dict:
        return {"max_paths": self.max_paths, "max_edges": self.max_edges}


class RunConfig(BaseModel):
    """One pipeline invocation."""

    target: str = Field(description="Path of the TargetConfig JSON file")
    program: Optional[str] = Field(default=None, description="Assembly source or hex image")
    program_meta: Optional[str] = Field(default=None, description="Sidecar JSON for a hex image")
    trigger: Optional[int] = Field(default=None, description="Value substituted for {TRIGGER} in assembly")
    mode: Mode = Field(default=Mode.NONE)
    limits: Limits = Field(default_factory=Limits)
    parallelism: int = Field(default_factory=lambda: settings.parallelism)
    output_dir: Optional[str] = Field(default=None, description="Report directory; None skips writing")
    dump_cnf: bool = Field(default=False, description="Write every BMC query as DIMACS under <output_dir>/cnf")
    select: list[str] = Field(default_factory=list, description="Check only these properties (name or path id prefix)")

    @model_validator(mode="after")
    def _program_for_mode(self):
        if self.mode.needs_program and not self.program:
            raise ValueError(f"mode {self.mode.value} needs a program")
        return self

    def fingerprint(self) -> dict:
        """Everything two reports must share to be comparable across modes."""
        return {
            "target": self.target,
            "program": self.program,
            "trigger": self.trigger,
            "limits": self.limits.model_dump(),
            "select": sorted(self.select),
        }
