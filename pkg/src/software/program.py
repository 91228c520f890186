"""Program images: hex words plus the sidecar metadata the assembler writes."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from src.diagnostics import ProgramError
from src.schemas.program import CallSiteModel, HwLoopModel, ProgramMeta
from src.software.isa import INSTR_BYTES, InstrClass, Instruction, decode

logger = logging.getLogger(__name__)

TRAP_VECTOR = 0x0


@dataclass
class ProgramImage:
    words: dict[int, int]  # byte address -> encoding
    entry: int = 0
    call_sites: list[CallSiteModel] = field(default_factory=list)
    hwloops: list[HwLoopModel] = field(default_factory=list)
    symbols: dict[int, str] = field(default_factory=dict)
    labels: dict[str, int] = field(default_factory=dict)
    source: str = "<input>"
    # False for a bare hex image loaded without its sidecar
    has_metadata: bool = True

    @property
    def size(self) -> int:
        return len(self.words)

    @property
    def encodings(self) -> list[int]:
        return sorted(set(self.words.values()))

    @property
    def return_addresses(self) -> list[int]:
        return sorted({c.ret for c in self.call_sites})

    def instruction(self, address: int) -> Instruction:
        return decode(self.words.get(address, 0), address)

    def instructions(self) -> list[Instruction]:
        return [decode(w, a) for a, w in sorted(self.words.items())]

    def line_at(self, address: int) -> Optional[str]:
        return self.symbols.get(address)

    def meta(self) -> ProgramMeta:
        return ProgramMeta(
            source=self.source,
            entry=self.entry,
            call_sites=self.call_sites,
            hwloops=self.hwloops,
            symbols=self.symbols,
            labels=self.labels,
        )

    def dump(self, hex_path: str | Path, meta_path: Optional[str | Path] = None) -> None:
        """Hex-word text (``@addr`` opens a run of consecutive words) and the JSON sidecar."""
        lines = []
        expected = None
        for addr, word in sorted(self.words.items()):
            if addr != expected:
                lines.append(f"@{addr:08x}")
            lines.append(f"{word:08x}")
            expected = addr + INSTR_BYTES
        Path(hex_path).write_text("\n".join(lines) + "\n")
        if meta_path:
            Path(meta_path).write_text(self.meta().model_dump_json(indent=2) + "\n")


def parse_hex(text: str, file: str = "<input>") -> dict[int, int]:
    words: dict[int, int] = {}
    addr = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("@"):
                addr = int(line[1:], 16)
                if addr % INSTR_BYTES:
                    raise ProgramError(f"unaligned address {line}", lineno, 1, file)
                continue
            for token in line.split():
                value = int(token, 16)
                if value >> 32:
                    raise ProgramError(f"word '{token}' wider than 32 bits", lineno, 1, file)
                words[addr] = value
                addr += INSTR_BYTES
        except ValueError:
            raise ProgramError(f"malformed hex line '{raw.strip()}'", lineno, 1, file) from None
    return words


def load_program(hex_path: str | Path, meta_path: Optional[str | Path] = None) -> ProgramImage:
    hex_path = Path(hex_path)
    try:
        words = parse_hex(hex_path.read_text(), str(hex_path))
    except OSError as exc:
        raise ProgramError(f"cannot read program image: {exc}", file=str(hex_path)) from exc
    if meta_path is None:
        return ProgramImage(words=words, source=str(hex_path), has_metadata=False)
    try:
        meta = ProgramMeta.model_validate(json.loads(Path(meta_path).read_text()))
    except OSError as exc:
        raise ProgramError(f"cannot read program metadata: {exc}", file=str(meta_path)) from exc
    except (json.JSONDecodeError, ValidationError) as exc:
        raise ProgramError(f"invalid program metadata: {exc}", file=str(meta_path)) from exc
    for site in meta.call_sites:
        if site.ret != site.call + INSTR_BYTES:
            raise ProgramError(f"call site 0x{site.call:x} returns to 0x{site.ret:x}", file=str(meta_path))
    return ProgramImage(
        words=words,
        entry=meta.entry,
        call_sites=list(meta.call_sites),
        hwloops=list(meta.hwloops),
        symbols=dict(meta.symbols),
        labels=dict(meta.labels),
        source=meta.source,
    )


def _successors(program: ProgramImage, ins: Instruction, loop_ends: dict[int, list[int]]) -> list[int]:
    pc = ins.address
    nxt = pc + INSTR_BYTES
    if pc not in program.words or not ins.legal:
        return [TRAP_VECTOR]
    out: list[int]
    if ins.cls == InstrClass.BRANCH:
        out = [nxt, pc + ins.imm]
    elif ins.cls == InstrClass.JUMP and ins.mnemonic == "jal":
        out = [pc + ins.imm]
    elif ins.cls == InstrClass.JUMP:
        # computed jump; any word may be next
        out = sorted(set(program.words) | {TRAP_VECTOR})
    elif ins.cls in (InstrClass.CALL, InstrClass.RETURN):
        out = []  # handled by the caller
    else:
        out = [nxt]
    return out + loop_ends.get(pc, [])


def static_reach(program: ProgramImage) -> frozenset[int]:
    """Fetch addresses reachable from the entry when returns only go back to reachable call sites."""
    loop_ends: dict[int, list[int]] = {}
    for loop in program.hwloops:
        loop_ends.setdefault(loop.end, []).append(loop.start)
    calls = {c.call: c for c in program.call_sites}

    reached: set[int] = set()
    returns_seen = False
    called: list[CallSiteModel] = []
    work = [program.entry]

    def visit(addr: int) -> None:
        if addr not in reached:
            reached.add(addr)
            work.append(addr)

    while work:
        pc = work.pop()
        reached.add(pc)
        ins = program.instruction(pc)
        if pc in program.words and ins.cls == InstrClass.CALL:
            site = calls.get(pc) or CallSiteModel(call=pc, callee=pc + ins.imm, ret=pc + INSTR_BYTES)
            called.append(site)
            visit(site.callee)
            if returns_seen:
                visit(site.ret)
        elif pc in program.words and ins.cls == InstrClass.RETURN:
            returns_seen = True
            for site in called:
                visit(site.ret)
        for addr in _successors(program, ins, loop_ends):
            visit(addr)
    return frozenset(reached)


def _function_calls(program: ProgramImage, start: int) -> set[int]:
    """Callees invoked directly from the function starting at ``start``."""
    loop_ends: dict[int, list[int]] = {}
    for loop in program.hwloops:
        loop_ends.setdefault(loop.end, []).append(loop.start)
    seen: set[int] = set()
    callees: set[int] = set()
    work = [start]
    while work:
        pc = work.pop()
        if pc in seen:
            continue
        seen.add(pc)
        ins = program.instruction(pc)
        if pc not in program.words or ins.cls == InstrClass.RETURN:
            continue
        if ins.cls == InstrClass.CALL:
            callees.add(pc + ins.imm)
            work.append(pc + INSTR_BYTES)
            continue
        work.extend(a for a in _successors(program, ins, loop_ends) if a != TRAP_VECTOR or start == TRAP_VECTOR)
    return callees


def static_call_depth(program: ProgramImage) -> int:
    """Deepest nesting of calls from the entry; recursion is an error."""
    depth: dict[int, int] = {}
    active: set[int] = set()

    def visit(fn: int) -> int:
        if fn in depth:
            return depth[fn]
        if fn in active:
            label = next((k for k, v in program.labels.items() if v == fn), f"0x{fn:x}")
            raise ProgramError(f"recursive call through '{label}'", file=program.source)
        active.add(fn)
        d = max((1 + visit(callee) for callee in _function_calls(program, fn)), default=0)
        active.discard(fn)
        depth[fn] = d
        return d

    return visit(program.entry)
