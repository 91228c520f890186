from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from src.hdl.expr import Ref
from src.properties.sere import Seq


class PropertyKind(str, Enum):
    COVER = "cover"
    ASSUME = "assume"


@dataclass(frozen=True)
class HeldAddress:
    """Frozen free variable naming the memory word a path tracks."""

    name: str
    memory: str
    width: int
    depth: int

    def ref(self) -> Ref:
        return Ref(self.name, self.width - 1, 0, self.width)


def held_name(memory: str) -> str:
    return "aux_held_" + memory.replace(".", "_")


@dataclass(frozen=True)
class Property:
    kind: PropertyKind
    body: Seq
    name: str = ""
    origin: str = field(default="", compare=False)
    clock: Optional[str] = field(default=None, compare=False)
    aux: tuple[HeldAddress, ...] = field(default=(), compare=False)
    source: str = field(default="", compare=False)
    sink: str = field(default="", compare=False)

    def manifest_entry(self, file: str) -> dict:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "origin": self.origin,
            "source": self.source,
            "sink": self.sink,
            "file": file,
            "aux": [h.name for h in self.aux],
        }
