"""Two-pass assembler for the MiniRV fixture ISA.

Each instruction sits on its own line, optionally preceded by ``label:``;
``#`` starts a comment. ``{TRIGGER}`` is replaced by the trigger value before
assembly. ``li`` always expands to ``lui`` + ``addi`` so the image size does
not depend on the constant.
"""

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from src.diagnostics import ProgramError
from src.schemas.program import CallSiteModel, HwLoopModel
from src.software import isa
from src.software.program import ProgramImage, load_program

logger = logging.getLogger(__name__)

TRIGGER = "{TRIGGER}"

ABI_NAMES = {
    "zero": 0, "ra": 1, "sp": 2, "gp": 3, "tp": 4, "t0": 5, "t1": 6, "t2": 7,
    "s0": 8, "fp": 8, "s1": 9, "a0": 10, "a1": 11, "a2": 12, "a3": 13, "a4": 14, "a5": 15,
}

_LABEL = re.compile(r"^\s*([A-Za-z_.][\w.]*)\s*:(.*)$")
_MEM_OPERAND = re.compile(r"^(-?\w+)\s*\(\s*(\w+)\s*\)$")

I_TYPE = {name: f3 for f3, name in isa.IMM_F3.items()}
SHIFTS = {name: key for key, name in isa.SHIFT_IMM.items()}
R_TYPE = {name: key for key, name in isa.REG_OPS.items()}
BRANCHES = {name: f3 for f3, name in isa.BRANCH_F3.items()}


@dataclass
class _Line:
    lineno: int
    text: str
    mnemonic: str
    operands: list[str]
    address: int = 0


def _size(mnemonic: str) -> int:
    return 2 if mnemonic == "li" else 1


class _Assembler:
    def __init__(self, file: str):
        self.file = file
        self.labels: dict[str, int] = {}
        self.lines: list[_Line] = []

    def error(self, line: _Line | int, message: str) -> ProgramError:
        lineno = line.lineno if isinstance(line, _Line) else line
        return ProgramError(message, lineno, 1, self.file)

    # --- pass 1 ---

    def scan(self, text: str) -> None:
        addr = 0
        for lineno, raw in enumerate(text.splitlines(), 1):
            body = raw.split("#", 1)[0].strip()
            while True:
                m = _LABEL.match(body)
                if not m:
                    break
                name = m.group(1)
                if name in self.labels:
                    raise self.error(lineno, f"label '{name}' defined twice")
                self.labels[name] = addr
                body = m.group(2).strip()
            if not body:
                continue
            mnemonic, _, rest = body.partition(" ")
            operands = [o.strip() for o in rest.split(",")] if rest.strip() else []
            line = _Line(lineno, body, mnemonic.lower(), operands, addr)
            self.lines.append(line)
            addr += _size(line.mnemonic) * isa.INSTR_BYTES

    # --- operand parsing ---

    def reg(self, line: _Line, token: str) -> int:
        token = token.strip().lower()
        if token in ABI_NAMES:
            return ABI_NAMES[token]
        if re.fullmatch(r"x\d+", token):
            index = int(token[1:])
            if index < isa.NUM_REGS:
                return index
        raise self.error(line, f"unknown register '{token}'")

    def imm(self, line: _Line, token: str, bits: Optional[int] = None, signed: bool = True) -> int:
        try:
            value = int(token.strip(), 0)
        except ValueError:
            if token.strip() in self.labels:
                value = self.labels[token.strip()]
            else:
                raise self.error(line, f"bad immediate '{token}'") from None
        if bits is not None:
            lo, hi = (-(1 << (bits - 1)), (1 << (bits - 1)) - 1) if signed else (0, (1 << bits) - 1)
            if not lo <= value <= hi:
                raise self.error(line, f"immediate {value} does not fit in {bits} bits")
        return value

    def mem(self, line: _Line, token: str) -> tuple[int, int]:
        m = _MEM_OPERAND.match(token.strip())
        if not m:
            raise self.error(line, f"expected offset(register), got '{token}'")
        return self.imm(line, m.group(1), 12), self.reg(line, m.group(2))

    def target(self, line: _Line, token: str, bits: int) -> int:
        name = token.strip()
        if name not in self.labels:
            raise self.error(line, f"undefined label '{name}'")
        offset = self.labels[name] - line.address
        if not -(1 << (bits - 1)) <= offset < (1 << (bits - 1)):
            raise self.error(line, f"'{name}' is out of range")
        return offset

    def arity(self, line: _Line, n: int) -> None:
        if len(line.operands) != n:
            raise self.error(line, f"'{line.mnemonic}' takes {n} operand(s), got {len(line.operands)}")

    # --- pass 2 ---

    def encode(self, line: _Line) -> list[int]:
        handler: Optional[Callable[[_Line], list[int]]] = getattr(self, "op_" + line.mnemonic.replace(".", "_"), None)
        if line.mnemonic in I_TYPE:
            return [self.alu_imm(line)]
        if line.mnemonic in SHIFTS:
            return [self.shift(line)]
        if line.mnemonic in R_TYPE:
            return [self.alu_reg(line)]
        if line.mnemonic in BRANCHES:
            return [self.branch(line)]
        if handler is None:
            raise self.error(line, f"unknown mnemonic '{line.mnemonic}'")
        return handler(line)

    def alu_imm(self, line: _Line) -> int:
        self.arity(line, 3)
        rd, rs1 = self.reg(line, line.operands[0]), self.reg(line, line.operands[1])
        return isa.enc_i(self.imm(line, line.operands[2], 12), rs1, I_TYPE[line.mnemonic], rd, isa.OP_IMM)

    def shift(self, line: _Line) -> int:
        self.arity(line, 3)
        f3, f7 = SHIFTS[line.mnemonic]
        rd, rs1 = self.reg(line, line.operands[0]), self.reg(line, line.operands[1])
        shamt = self.imm(line, line.operands[2], 5, signed=False)
        return isa.enc_r(f7, shamt, rs1, f3, rd, isa.OP_IMM)

    def alu_reg(self, line: _Line) -> int:
        self.arity(line, 3)
        f3, f7 = R_TYPE[line.mnemonic]
        rd, rs1, rs2 = (self.reg(line, o) for o in line.operands)
        return isa.enc_r(f7, rs2, rs1, f3, rd, isa.OP_REG)

    def branch(self, line: _Line) -> int:
        self.arity(line, 3)
        rs1, rs2 = self.reg(line, line.operands[0]), self.reg(line, line.operands[1])
        return isa.enc_b(self.target(line, line.operands[2], 13), rs2, rs1, BRANCHES[line.mnemonic])

    def op_lui(self, line: _Line) -> list[int]:
        self.arity(line, 2)
        return [isa.enc_u(self.imm(line, line.operands[1], 20, signed=False), self.reg(line, line.operands[0]))]

    def op_li(self, line: _Line) -> list[int]:
        self.arity(line, 2)
        rd = self.reg(line, line.operands[0])
        value = self.imm(line, line.operands[1]) & 0xFFFFFFFF
        lo = value & 0xFFF
        lo = lo - 0x1000 if lo & 0x800 else lo
        hi = ((value - lo) >> 12) & 0xFFFFF
        return [isa.enc_u(hi, rd), isa.enc_i(lo, rd, 0, rd, isa.OP_IMM)]

    def op_nop(self, line: _Line) -> list[int]:
        self.arity(line, 0)
        return [isa.NOP_WORD]

    def op_mv(self, line: _Line) -> list[int]:
        self.arity(line, 2)
        rd, rs = self.reg(line, line.operands[0]), self.reg(line, line.operands[1])
        return [isa.enc_i(0, rs, 0, rd, isa.OP_IMM)]

    def op_jal(self, line: _Line) -> list[int]:
        if len(line.operands) == 1:
            line.operands.insert(0, "ra")
        self.arity(line, 2)
        return [isa.enc_j(self.target(line, line.operands[1], 21), self.reg(line, line.operands[0]))]

    def op_j(self, line: _Line) -> list[int]:
        self.arity(line, 1)
        return [isa.enc_j(self.target(line, line.operands[0], 21), 0)]

    def op_call(self, line: _Line) -> list[int]:
        self.arity(line, 1)
        return [isa.enc_j(self.target(line, line.operands[0], 21), 1)]

    def op_ret(self, line: _Line) -> list[int]:
        self.arity(line, 0)
        return [isa.RET_WORD]

    def op_jalr(self, line: _Line) -> list[int]:
        self.arity(line, 2)
        offset, rs1 = self.mem(line, line.operands[1])
        return [isa.enc_i(offset, rs1, 0, self.reg(line, line.operands[0]), isa.OP_JALR)]

    def op_lw(self, line: _Line) -> list[int]:
        self.arity(line, 2)
        offset, rs1 = self.mem(line, line.operands[1])
        return [isa.enc_i(offset, rs1, 2, self.reg(line, line.operands[0]), isa.OP_LOAD)]

    def op_sw(self, line: _Line) -> list[int]:
        self.arity(line, 2)
        offset, rs1 = self.mem(line, line.operands[1])
        return [isa.enc_s(offset, self.reg(line, line.operands[0]), rs1, 2, isa.OP_STORE)]

    def op_ldk(self, line: _Line) -> list[int]:
        self.arity(line, 2)
        offset, rs1 = self.mem(line, line.operands[1])
        return [isa.enc_i(offset, rs1, 0, self.reg(line, line.operands[0]), isa.OP_CUSTOM0)]

    def op_aesk(self, line: _Line) -> list[int]:
        self.arity(line, 3)
        rd, rs1 = self.reg(line, line.operands[0]), self.reg(line, line.operands[1])
        return [isa.enc_i(self.imm(line, line.operands[2], 12), rs1, 1, rd, isa.OP_CUSTOM0)]

    def op_lp_setupi(self, line: _Line) -> list[int]:
        self.arity(line, 2)
        count = self.imm(line, line.operands[0], 5, signed=False)
        offset = self.target(line, line.operands[1], 12)
        if offset <= 0:
            raise self.error(line, "hardware loop end must follow lp.setupi")
        return [isa.enc_i(offset, count, 2, 0, isa.OP_CUSTOM0)]


def assemble(text: str, file: str = "<input>", trigger: Optional[int] = None, entry: str = "") -> ProgramImage:
    """Assemble ``text`` starting at address 0; ``entry`` optionally names the start label."""
    if TRIGGER in text:
        if trigger is None:
            raise ProgramError("program needs a trigger value", file=file)
        text = text.replace(TRIGGER, str(trigger))
    asm = _Assembler(file)
    asm.scan(text)

    words: dict[int, int] = {}
    symbols: dict[int, str] = {}
    call_sites: list[CallSiteModel] = []
    hwloops: list[HwLoopModel] = []
    for line in asm.lines:
        for i, word in enumerate(asm.encode(line)):
            addr = line.address + i * isa.INSTR_BYTES
            words[addr] = word
            symbols[addr] = f"{file}:{line.lineno}: {line.text}"
            ins = isa.decode(word, addr)
            if ins.cls == isa.InstrClass.CALL:
                call_sites.append(CallSiteModel(call=addr, callee=addr + ins.imm, ret=addr + isa.INSTR_BYTES))
            elif ins.cls == isa.InstrClass.HWLOOP:
                end = addr + ins.imm
                hwloops.append(HwLoopModel(start=addr + isa.INSTR_BYTES, end=end, exit=end + isa.INSTR_BYTES))

    if entry and entry not in asm.labels:
        raise ProgramError(f"entry label '{entry}' is not defined", file=file)
    image = ProgramImage(
        words=words,
        entry=asm.labels[entry] if entry else 0,
        call_sites=call_sites,
        hwloops=hwloops,
        symbols=symbols,
        labels=dict(asm.labels),
        source=file,
    )
    logger.info("Assembled %s: %d words, %d call sites, %d hardware loops", file, image.size, len(call_sites), len(hwloops))
    return image


def assemble_file(path: str | Path, trigger: Optional[int] = None) -> ProgramImage:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProgramError(f"cannot read program: {exc}", file=str(path)) from exc
    return assemble(text, path.name, trigger)


def load_any(path: str | Path, meta: Optional[str | Path] = None, trigger: Optional[int] = None) -> ProgramImage:
    """Assembly sources end in ``.s``; anything else is a hex image."""
    if Path(path).suffix == ".s":
        return assemble_file(path, trigger)
    return load_program(path, meta)
