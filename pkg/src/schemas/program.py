from pydantic import BaseModel, Field


class CallSiteModel(BaseModel):
    call: int = Field(description="Address of the call instruction")
    callee: int = Field(description="Address of the called function")
    ret: int = Field(description="Return address (call + 4)")


class HwLoopModel(BaseModel):
    start: int = Field(description="First instruction of the loop body")
    end: int = Field(description="Last instruction of the loop body")
    exit: int = Field(description="Address execution continues at after the last iteration")


class ProgramMeta(BaseModel):
    """Sidecar metadata written by the assembler next to the hex image."""

    source: str = Field(default="<input>", description="Assembly source the image was built from")
    entry: int = Field(default=0, description="Start address")
    call_sites: list[CallSiteModel] = Field(default_factory=list)
    hwloops: list[HwLoopModel] = Field(default_factory=list)
    symbols: dict[int, str] = Field(default_factory=dict, description="Address -> 'file:line: text'")
    labels: dict[str, int] = Field(default_factory=dict, description="Label -> address")
