import re
from typing import Optional

from pydantic import BaseModel, Field, field_validator, model_validator

_RANGE = re.compile(r"^\s*([A-Za-z_][\w.$]*)\s*(?:\[\s*(\d+)\s*(?::\s*(\d+)\s*)?\])?\s*$")


class SignalRange(BaseModel):
    """A signal or a bit range of it, written ``name``, ``name[i]`` or ``name[msb:lsb]`` in config files."""

    signal: str = Field(description="Flattened signal name")
    msb: Optional[int] = Field(default=None, description="Upper bit; None selects the whole signal")
    lsb: Optional[int] = Field(default=None, description="Lower bit; None selects the whole signal")

    model_config = {"frozen": True}

    @model_validator(mode="before")
    @classmethod
    def _from_text(cls, value):
        if isinstance(value, str):
            m = _RANGE.match(value)
            if not m:
                raise ValueError(f"malformed signal range '{value}'")
            name, msb, lsb = m.groups()
            if msb is None:
                return {"signal": name}
            return {"signal": name, "msb": int(msb), "lsb": int(lsb if lsb is not None else msb)}
        return value

    @model_validator(mode="after")
    def _check_bits(self):
        if (self.msb is None) != (self.lsb is None):
            raise ValueError("msb and lsb must be given together")
        if self.msb is not None and self.msb < self.lsb:
            raise ValueError(f"range [{self.msb}:{self.lsb}] of '{self.signal}' is reversed")
        return self

    def __str__(self) -> str:
        if self.msb is None:
            return self.signal
        if self.msb == self.lsb:
            return f"{self.signal}[{self.msb}]"
        return f"{self.signal}[{self.msb}:{self.lsb}]"


class CoreBinding(BaseModel):
    """Names through which the assumption generators talk to a processor core."""

    fetch_addr: str = Field(default="imem_addr", description="Program-memory read address (the pc)")
    fetch_data: str = Field(default="imem_rdata", description="Program-memory read data port")
    register_file: Optional[str] = Field(default="rf", description="Register-file memory array")
    return_register: int = Field(default=1, description="Index of the return-address register")
    lp_start: Optional[str] = Field(default=None, description="Hardware-loop start register")
    lp_end: Optional[str] = Field(default=None, description="Hardware-loop end register")
    lp_count: Optional[str] = Field(default=None, description="Hardware-loop iteration counter")
    program_memory: Optional[str] = Field(
        default=None, description="Internal program-memory array, when the core does not fetch through ports"
    )
    # Concrete execution only (run_program)
    data_addr: Optional[str] = Field(default=None, description="Data-memory address port")
    data_wdata: Optional[str] = Field(default=None, description="Data-memory write data port")
    data_we: Optional[str] = Field(default=None, description="Data-memory write enable port")
    data_rdata: Optional[str] = Field(default=None, description="Data-memory read data port")
    key_addr: Optional[str] = Field(default=None, description="Key-memory address port")
    key_rdata: Optional[str] = Field(default=None, description="Key-memory read data port")

    def names(self) -> list[str]:
        """Every signal the binding refers to."""
        fields = (
            "fetch_addr", "fetch_data", "register_file", "lp_start", "lp_end", "lp_count",
            "program_memory", "data_addr", "data_wdata", "data_we", "data_rdata", "key_addr", "key_rdata",
        )
        return [v for v in (getattr(self, f) for f in fields) if v]

    @property
    def has_hwloops(self) -> bool:
        return bool(self.lp_start and self.lp_end and self.lp_count)


class TargetConfig(BaseModel):
    """Design under verification: RTL files, security labels and the optional core binding."""

    rtl: list[str] = Field(default_factory=list, description="RTL files, relative to the config file")
    top: Optional[str] = Field(default=None, description="Top module; inferred when omitted")
    sources: list[SignalRange] = Field(description="Sensitive sources")
    sinks: list[SignalRange] = Field(description="Untrusted sinks")
    declassifiers: list[str] = Field(default_factory=list, description="Signals through which flow is permitted")
    core: Optional[CoreBinding] = Field(default=None, description="Processor binding for software constraints")

    @field_validator("sources", "sinks")
    @classmethod
    def _nonempty(cls, value):
        if not value:
            raise ValueError("at least one signal is required")
        return value

    def label_dict(self) -> dict:
        return {
            "sources": [str(s) for s in self.sources],
            "sinks": [str(s) for s in self.sinks],
            "declassifiers": sorted(self.declassifiers),
        }
