"""Diagnostics and the exception hierarchy shared by every stage."""

from typing import Optional

from pydantic import BaseModel, Field


class Diagnostic(BaseModel):
    """One machine-readable diagnostic record."""

    file: str = Field(default="<input>", description="Source file the diagnostic refers to")
    line: int = Field(default=0, description="1-based line, 0 when not applicable")
    column: int = Field(default=0, description="1-based column, 0 when not applicable")
    severity: str = Field(default="error", description="error | warning | note")
    code: str = Field(description="Stable diagnostic code, e.g. hdl-syntax")
    message: str

    def to_text(self) -> str:
        if self.line:
            return f"{self.file}:{self.line}:{self.column}: {self.severity}: {self.message}"
        return f"{self.file}: {self.severity}: {self.message}"


class LeakcoverError(Exception):
    code = "error"

    def __init__(self, message: str, line: int = 0, column: int = 0, file: str = "<input>"):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column
        self.file = file

    def diagnostic(self) -> Diagnostic:
        return Diagnostic(
            file=self.file,
            line=self.line,
            column=self.column,
            code=self.code,
            message=self.message,
        )

    def __str__(self) -> str:
        return self.diagnostic().to_text()


class HdlSyntaxError(LeakcoverError):
    code = "hdl-syntax"

    def __init__(self, message: str, line: int = 0, column: int = 0, expected: Optional[list[str]] = None, file: str = "<input>"):
        self.expected = sorted(expected or [])
        if self.expected:
            message = f"{message} (expected one of: {', '.join(self.expected)})"
        super().__init__(message, line, column, file)


class UnsupportedConstruct(LeakcoverError):
    code = "hdl-unsupported"

    def __init__(self, construct: str, line: int = 0, column: int = 0, file: str = "<input>"):
        self.construct = construct
        super().__init__(f"unsupported construct: {construct}", line, column, file)


class ElaborationError(LeakcoverError):
    code = "hdl-elaboration"


class UnresolvedInstance(ElaborationError):
    code = "hdl-unresolved-instance"


class CombinationalCycle(ElaborationError):
    code = "hdl-comb-cycle"

    def __init__(self, signals: list[str]):
        self.signals = signals
        super().__init__(f"combinational cycle through {{{', '.join(signals)}}}")


class MultipleClocks(ElaborationError):
    code = "hdl-multi-clock"


class LabelConfigError(LeakcoverError):
    code = "label-config"


class ProgramError(LeakcoverError):
    code = "program"


class AssumptionError(LeakcoverError):
    code = "assumption"


class WidthMismatch(LeakcoverError):
    code = "width-mismatch"


class MultiDriverError(LeakcoverError):
    code = "multi-driver"


class PslSyntaxError(LeakcoverError):
    code = "psl-syntax"


class ExplicitStateLimit(LeakcoverError):
    code = "explicit-state-limit"


class StageError(LeakcoverError):
    """Wraps a failure with the pipeline stage it happened in."""

    code = "stage"

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        if isinstance(cause, LeakcoverError):
            super().__init__(f"[{stage}] {cause.message}", cause.line, cause.column, cause.file)
            self.code = cause.code
        else:
            super().__init__(f"[{stage}] {cause}")


class ConfigMismatch(LeakcoverError):
    """Reports that do not share design, program and limits cannot be compared."""

    code = "config-mismatch"
