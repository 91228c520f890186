"""MiniRV instruction set: RV32E integer subset plus the custom-0 key, AES and hardware-loop ops.

Encodings follow the RV32I formats. Any register field at or above 16, any
unknown opcode/funct combination and the all-zero word are illegal.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from src.hdl.expr import Const, Expr, Ref, Slice, and_, eq, one_of, or_

INSTR_BYTES = 4
NUM_REGS = 16
RET_WORD = 0x00008067  # jalr x0, 0(x1)
NOP_WORD = 0x00000013  # addi x0, x0, 0

OP_LUI = 0x37
OP_JAL = 0x6F
OP_JALR = 0x67
OP_BRANCH = 0x63
OP_LOAD = 0x03
OP_STORE = 0x23
OP_IMM = 0x13
OP_REG = 0x33
OP_CUSTOM0 = 0x0B

BRANCH_F3 = {0: "beq", 1: "bne", 4: "blt", 5: "bge", 6: "bltu", 7: "bgeu"}
IMM_F3 = {0: "addi", 2: "slti", 3: "sltiu", 4: "xori", 6: "ori", 7: "andi"}
SHIFT_IMM = {(1, 0x00): "slli", (5, 0x00): "srli", (5, 0x20): "srai"}
REG_OPS = {
    (0, 0x00): "add", (0, 0x20): "sub", (1, 0x00): "sll", (2, 0x00): "slt", (3, 0x00): "sltu",
    (4, 0x00): "xor", (5, 0x00): "srl", (5, 0x20): "sra", (6, 0x00): "or", (7, 0x00): "and",
}
CUSTOM_F3 = {0: "ldk", 1: "aesk", 2: "lp.setupi"}


class InstrClass(str, Enum):
    ALU = "alu"
    LOAD = "load"
    STORE = "store"
    LOAD_KEY = "load-key"
    BRANCH = "branch"
    JUMP = "jump"
    CALL = "call"
    RETURN = "return"
    HWLOOP = "hwloop"
    ILLEGAL = "illegal"


@dataclass(frozen=True)
class Instruction:
    encoding: int
    mnemonic: str
    cls: InstrClass
    operands: tuple[str, ...] = ()
    rd: Optional[int] = None
    rs1: Optional[int] = None
    rs2: Optional[int] = None
    imm: int = 0
    address: Optional[int] = field(default=None, compare=False)

    @property
    def legal(self) -> bool:
        return self.cls != InstrClass.ILLEGAL

    def text(self) -> str:
        return f"{self.mnemonic} {', '.join(self.operands)}".strip()


def _bits(word: int, msb: int, lsb: int) -> int:
    return (word >> lsb) & ((1 << (msb - lsb + 1)) - 1)


def _sext(value: int, bits: int) -> int:
    return value - (1 << bits) if value & (1 << (bits - 1)) else value


def imm_i(word: int) -> int:
    return _sext(_bits(word, 31, 20), 12)


def imm_s(word: int) -> int:
    return _sext((_bits(word, 31, 25) << 5) | _bits(word, 11, 7), 12)


def imm_b(word: int) -> int:
    value = (_bits(word, 31, 31) << 12) | (_bits(word, 7, 7) << 11) | (_bits(word, 30, 25) << 5) | (_bits(word, 11, 8) << 1)
    return _sext(value, 13)


def imm_j(word: int) -> int:
    value = (_bits(word, 31, 31) << 20) | (_bits(word, 19, 12) << 12) | (_bits(word, 20, 20) << 11) | (_bits(word, 30, 21) << 1)
    return _sext(value, 21)


def _illegal(word: int, address: Optional[int] = None) -> Instruction:
    return Instruction(word, "illegal", InstrClass.ILLEGAL, (f"0x{word:08x}",), address=address)


def decode(word: int, address: Optional[int] = None) -> Instruction:
    """Total decoder; anything outside the instruction set is ``illegal``."""
    word &= 0xFFFFFFFF
    opcode = _bits(word, 6, 0)
    rd, f3, rs1, rs2, f7 = _bits(word, 11, 7), _bits(word, 14, 12), _bits(word, 19, 15), _bits(word, 24, 20), _bits(word, 31, 25)

    def regs(*indices: int) -> bool:
        return all(i < NUM_REGS for i in indices)

    def x(i: int) -> str:
        return f"x{i}"

    if opcode == OP_LUI and regs(rd):
        imm = _bits(word, 31, 12)
        return Instruction(word, "lui", InstrClass.ALU, (x(rd), f"0x{imm:x}"), rd=rd, imm=imm << 12, address=address)
    if opcode == OP_JAL and regs(rd):
        imm = imm_j(word)
        cls = InstrClass.CALL if rd == 1 else InstrClass.JUMP
        return Instruction(word, "jal", cls, (x(rd), str(imm)), rd=rd, imm=imm, address=address)
    if opcode == OP_JALR and f3 == 0 and regs(rd, rs1):
        imm = imm_i(word)
        cls = InstrClass.RETURN if (rd, rs1, imm) == (0, 1, 0) else InstrClass.JUMP
        return Instruction(word, "jalr", cls, (x(rd), f"{imm}({x(rs1)})"), rd=rd, rs1=rs1, imm=imm, address=address)
    if opcode == OP_BRANCH and f3 in BRANCH_F3 and regs(rs1, rs2):
        imm = imm_b(word)
        return Instruction(word, BRANCH_F3[f3], InstrClass.BRANCH, (x(rs1), x(rs2), str(imm)), rs1=rs1, rs2=rs2, imm=imm, address=address)
    if opcode == OP_LOAD and f3 == 2 and regs(rd, rs1):
        imm = imm_i(word)
        return Instruction(word, "lw", InstrClass.LOAD, (x(rd), f"{imm}({x(rs1)})"), rd=rd, rs1=rs1, imm=imm, address=address)
    if opcode == OP_STORE and f3 == 2 and regs(rs1, rs2):
        imm = imm_s(word)
        return Instruction(word, "sw", InstrClass.STORE, (x(rs2), f"{imm}({x(rs1)})"), rs1=rs1, rs2=rs2, imm=imm, address=address)
    if opcode == OP_IMM and regs(rd, rs1):
        if f3 in IMM_F3:
            imm = imm_i(word)
            return Instruction(word, IMM_F3[f3], InstrClass.ALU, (x(rd), x(rs1), str(imm)), rd=rd, rs1=rs1, imm=imm, address=address)
        if (f3, f7) in SHIFT_IMM:
            return Instruction(word, SHIFT_IMM[(f3, f7)], InstrClass.ALU, (x(rd), x(rs1), str(rs2)), rd=rd, rs1=rs1, imm=rs2, address=address)
    if opcode == OP_REG and (f3, f7) in REG_OPS and regs(rd, rs1, rs2):
        return Instruction(word, REG_OPS[(f3, f7)], InstrClass.ALU, (x(rd), x(rs1), x(rs2)), rd=rd, rs1=rs1, rs2=rs2, address=address)
    if opcode == OP_CUSTOM0:
        imm = imm_i(word)
        if f3 == 0 and regs(rd, rs1):
            return Instruction(word, "ldk", InstrClass.LOAD_KEY, (x(rd), f"{imm}({x(rs1)})"), rd=rd, rs1=rs1, imm=imm, address=address)
        if f3 == 1 and regs(rd, rs1):
            return Instruction(word, "aesk", InstrClass.ALU, (x(rd), x(rs1), str(imm)), rd=rd, rs1=rs1, imm=imm, address=address)
        if f3 == 2 and rd == 0:
            # rs1 field carries the iteration count, imm the offset of the last body instruction
            return Instruction(word, "lp.setupi", InstrClass.HWLOOP, (str(rs1), str(imm)), rs1=rs1, imm=imm, address=address)
    return _illegal(word, address)


# --- encoders used by the assembler ---


def enc_r(f7: int, rs2: int, rs1: int, f3: int, rd: int, opcode: int) -> int:
    return (f7 << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode


def enc_i(imm: int, rs1: int, f3: int, rd: int, opcode: int) -> int:
    return ((imm & 0xFFF) << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode


def enc_s(imm: int, rs2: int, rs1: int, f3: int, opcode: int) -> int:
    imm &= 0xFFF
    return ((imm >> 5) << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) | ((imm & 0x1F) << 7) | opcode


def enc_b(imm: int, rs2: int, rs1: int, f3: int, opcode: int = OP_BRANCH) -> int:
    imm &= 0x1FFF
    return (
        (((imm >> 12) & 1) << 31) | (((imm >> 5) & 0x3F) << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12)
        | (((imm >> 1) & 0xF) << 8) | (((imm >> 11) & 1) << 7) | opcode
    )


def enc_u(imm20: int, rd: int, opcode: int = OP_LUI) -> int:
    return ((imm20 & 0xFFFFF) << 12) | (rd << 7) | opcode


def enc_j(imm: int, rd: int, opcode: int = OP_JAL) -> int:
    imm &= 0x1FFFFF
    return (
        (((imm >> 20) & 1) << 31) | (((imm >> 1) & 0x3FF) << 21) | (((imm >> 11) & 1) << 20)
        | (((imm >> 12) & 0xFF) << 12) | (rd << 7) | opcode
    )


# --- symbolic legality ---


def _field(fetch: Expr, msb: int, lsb: int) -> Expr:
    if isinstance(fetch, Ref):
        return Ref(fetch.name, fetch.lsb + msb, fetch.lsb + lsb, fetch.size)
    return Slice(fetch, msb, lsb)


def legal_expr(fetch: Expr) -> Expr:
    """Boolean over the 32-bit ``fetch`` word that holds exactly when ``decode`` is not illegal."""
    opcode = _field(fetch, 6, 0)
    f3 = _field(fetch, 14, 12)
    f7 = _field(fetch, 31, 25)
    rd_ok = eq(_field(fetch, 11, 11), Const(0, 1))
    rs1_ok = eq(_field(fetch, 19, 19), Const(0, 1))
    rs2_ok = eq(_field(fetch, 24, 24), Const(0, 1))
    rd_zero = eq(_field(fetch, 11, 7), Const(0, 5))

    def op(code: int) -> Expr:
        return eq(opcode, Const(code, 7))

    def funct3(*values: int) -> Expr:
        return one_of(f3, list(values))

    def funct7(value: int) -> Expr:
        return eq(f7, Const(value, 7))

    return or_(
        and_(op(OP_LUI), rd_ok),
        and_(op(OP_JAL), rd_ok),
        and_(op(OP_JALR), funct3(0), rd_ok, rs1_ok),
        and_(op(OP_BRANCH), funct3(*BRANCH_F3), rs1_ok, rs2_ok),
        and_(op(OP_LOAD), funct3(2), rd_ok, rs1_ok),
        and_(op(OP_STORE), funct3(2), rs1_ok, rs2_ok),
        and_(
            op(OP_IMM),
            rd_ok,
            rs1_ok,
            or_(funct3(*IMM_F3), and_(funct3(1), funct7(0x00)), and_(funct3(5), one_of(f7, [0x00, 0x20]))),
        ),
        and_(
            op(OP_REG),
            rd_ok,
            rs1_ok,
            rs2_ok,
            or_(funct7(0x00), and_(funct7(0x20), funct3(0, 5))),
        ),
        and_(op(OP_CUSTOM0), or_(and_(funct3(0, 1), rd_ok, rs1_ok), and_(funct3(2), rd_zero))),
    )


def is_call_word(word: int) -> bool:
    return decode(word).cls == InstrClass.CALL
