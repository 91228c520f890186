import pytest

from src.diagnostics import AssumptionError, ProgramError
from src.hdl.expr import evaluate, ref
from src.schemas.run import Mode
from src.schemas.target import CoreBinding
from src.software.assembler import assemble, assemble_file, load_any
from src.software.assumptions import assumption_psl, assumptions_for, gen_memory_table, write_assumptions
from src.software.execute import run_program
from src.software.isa import OP_CUSTOM0, RET_WORD, InstrClass, decode, legal_expr
from src.software.program import load_program, static_call_depth, static_reach
from tests.conftest import PROGRAMS, fixture_target, netlist_of

OPCODES = (0x37, 0x6F, 0x67, 0x63, 0x03, 0x23, 0x13, 0x33, OP_CUSTOM0, 0x7F, 0x00)

WRITABLE_PM = """
module pm (
    input clk,
    input we,
    input [3:0] waddr,
    input [31:0] wdata,
    input [3:0] addr,
    output [31:0] insn
);
  reg [31:0] mem [0:15];
  always @(posedge clk) begin
    if (we) mem[waddr] <= wdata;
  end
  assign insn = mem[addr];
endmodule
"""


def _program(name, trigger=None):
    return assemble_file(PROGRAMS / f"{name}.s", trigger)


class TestAssembler:
    def test_naive_layout(self):
        program = _program("naive")
        labels = program.labels
        assert labels["main"] == 0
        assert [c.callee for c in program.call_sites] == [labels["f1"], labels["f2"], labels["f3"], labels["f4"]]
        assert all(c.ret == c.call + 4 for c in program.call_sites)
        (loop,) = program.hwloops
        assert loop.end == labels["body_end"]
        assert loop.start == labels["body_end"] - 4
        assert "ldk t2, 0(t1)" in program.line_at(labels["f4"])
        assert program.words[labels["f4"] + 8] == RET_WORD

    def test_calls_fixture(self):
        program = _program("calls")
        assert program.labels["inc"] == 12
        assert program.return_addresses == [4, 8]

    def test_trigger(self):
        with pytest.raises(ProgramError, match="trigger"):
            _program("trojan")
        program = _program("trojan", trigger=0x5A)
        li_lo = program.words[program.labels["process"] + 8]
        assert decode(li_lo).imm == 0x5A

    def test_errors_carry_position(self):
        with pytest.raises(ProgramError) as exc:
            assemble("main: nop\n  frob x1, x2\n", "bad.s")
        assert exc.value.line == 2
        with pytest.raises(ProgramError):
            assemble("main: j nowhere\n")
        with pytest.raises(ProgramError):
            assemble("main: nop\n", entry="start")

    def test_hex_image(self, tmp_path):
        program = _program("naive")
        program.dump(tmp_path / "naive.hex", tmp_path / "naive.json")
        loaded = load_any(tmp_path / "naive.hex", tmp_path / "naive.json")
        assert loaded.words == program.words
        assert loaded.call_sites == program.call_sites
        assert loaded.hwloops == program.hwloops
        bare = load_program(tmp_path / "naive.hex")
        assert bare.words == program.words
        assert not bare.has_metadata

    def test_malformed_hex(self, tmp_path):
        (tmp_path / "bad.hex").write_text("@00000002\n00000013\n")
        with pytest.raises(ProgramError, match="unaligned"):
            load_program(tmp_path / "bad.hex")


class TestIsa:
    def test_legal_expr_matches_decoder(self, rng):
        fetch = ref("w", 32)
        legal = legal_expr(fetch)
        seen = set()
        for _ in range(3000):
            word = (rng.getrandbits(25) << 7) | rng.choice(OPCODES)
            ins = decode(word)
            seen.add(ins.legal)
            assert evaluate(legal, {"w": word}) == int(ins.legal), hex(word)
        assert seen == {True, False}

    def test_classes(self):
        program = _program("naive")
        classes = {ins.cls for ins in program.instructions()}
        assert {InstrClass.CALL, InstrClass.RETURN, InstrClass.HWLOOP, InstrClass.LOAD_KEY, InstrClass.STORE} <= classes
        assert all(ins.legal for ins in program.instructions())


class TestStaticAnalysis:
    def test_reach_skips_dead_code(self):
        program = _program("naive")
        reach = static_reach(program)
        assert program.labels["f4"] in reach
        assert program.labels["dead"] not in reach
        assert program.labels["dead"] + 4 not in reach

    def test_call_depth(self):
        assert static_call_depth(_program("naive")) == 4
        assert static_call_depth(_program("calls")) == 1
        assert static_call_depth(_program("patched")) == 1

    def test_recursion(self):
        program = assemble("main: call f\nhalt: j halt\nf: call f\n  ret\n")
        with pytest.raises(ProgramError, match="recursive"):
            static_call_depth(program)


class TestAssumptions:
    def test_modes_accumulate(self):
        target, netlist, _ = fixture_target("minirv_labels")
        program = _program("naive")
        names = {
            mode: assumptions_for(mode, netlist, target.core, program, 8).names
            for mode in (Mode.NONE, Mode.LEGAL, Mode.USED, Mode.JUMPS, Mode.STACK)
        }
        assert names[Mode.NONE] == []
        assert names[Mode.LEGAL] == ["assume_legal"]
        assert names[Mode.USED] == ["assume_legal", "assume_used"]
        assert names[Mode.JUMPS][:2] == names[Mode.USED]
        assert {"assume_table", "assume_ret", "assume_hwloop"} <= set(names[Mode.JUMPS])
        assert names[Mode.STACK][-1] == "assume_stack"

    def test_stack_depth_below_static_depth(self):
        target, netlist, _ = fixture_target("minirv_labels")
        with pytest.raises(AssumptionError, match="static call depth"):
            assumptions_for(Mode.STACK, netlist, target.core, _program("naive"), 2)

    def test_jumps_need_metadata(self, tmp_path):
        target, netlist, _ = fixture_target("minirv_labels")
        program = _program("naive")
        program.dump(tmp_path / "naive.hex")
        bare = load_program(tmp_path / "naive.hex")
        assert assumptions_for(Mode.USED, netlist, target.core, bare).names[-1] == "assume_used"
        with pytest.raises(AssumptionError, match="metadata"):
            assumptions_for(Mode.JUMPS, netlist, target.core, bare)

    def test_program_modes_need_a_program(self):
        target, netlist, _ = fixture_target("minirv_labels")
        with pytest.raises(AssumptionError):
            assumptions_for(Mode.USED, netlist, target.core, None)

    def test_audit_text(self, tmp_path):
        target, netlist, _ = fixture_target("minirv_labels")
        aset = assumptions_for(Mode.STACK, netlist, target.core, _program("naive"), 8)
        text = assumption_psl(aset)
        assert text.startswith("// mode stack\n")
        assert "// aux aux_cs_sp [3:0] init 0" in text
        assert "assume_stack: assume {" in text
        path = write_assumptions(aset, tmp_path / "a" / "stack.psl")
        assert path.read_text() == text

    def test_writable_program_memory_is_rejected(self):
        netlist = netlist_of(WRITABLE_PM)
        program = assemble("main: j main\n")
        internal = CoreBinding(fetch_addr="addr", fetch_data="insn", register_file=None, program_memory="mem")
        with pytest.raises(AssumptionError, match="reachable from untrusted inputs"):
            gen_memory_table(netlist, internal, program)
        ported = internal.model_copy(update={"program_memory": None})
        assert gen_memory_table(netlist, ported, program).names == ["assume_table"]


def _last_checks(aset, netlist, program, pcs, ra):
    """Step the aux registers along ``pcs``; the constraint values on the last fetch."""
    base = {s.name: [0] * s.depth if s.is_memory else 0 for s in netlist.signals}
    regs = [0] * 16
    regs[1] = ra
    aux = {r.name: r.init or 0 for r in aset.aux}
    held = {}
    for pc in pcs:
        env = {**base, "imem_addr": pc, "imem_rdata": program.words[pc], "rf": regs, **aux}
        held = {name: bool(evaluate(cond, env)) for name, cond in aset.expressions()}
        aux = {r.name: evaluate(r.next, env) & ((1 << r.width) - 1) for r in aset.aux}
    return held


class TestReturnTargets:
    """inc is called from two sites: Jumps accepts either return address, Stack only the caller's."""

    @pytest.mark.parametrize(
        "sites, ra, stack_ok",
        [((0,), 4, True), ((0,), 8, False), ((0, 4), 8, True), ((0, 4), 4, False)],
    )
    def test_return_address(self, sites, ra, stack_ok):
        target, netlist, _ = fixture_target("minirv_labels")
        program = _program("calls")
        ret = program.labels["inc"] + 4
        assert program.words[ret] == RET_WORD
        pcs = [pc for site in sites for pc in (site, program.labels["inc"], ret)]
        jumps = _last_checks(assumptions_for(Mode.JUMPS, netlist, target.core, program), netlist, program, pcs, ra)
        stack = _last_checks(assumptions_for(Mode.STACK, netlist, target.core, program, 8), netlist, program, pcs, ra)
        assert jumps["assume_ret"] and stack["assume_ret"]
        assert "assume_stack" not in jumps
        assert stack["assume_stack"] == stack_ok

    def test_unknown_return_address(self):
        target, netlist, _ = fixture_target("minirv_labels")
        program = _program("calls")
        pcs = [0, program.labels["inc"], program.labels["inc"] + 4]
        jumps = _last_checks(assumptions_for(Mode.JUMPS, netlist, target.core, program), netlist, program, pcs, 12)
        assert not jumps["assume_ret"]


class TestExecution:
    """Generated assumptions must hold on every cycle of a real run."""

    @pytest.mark.parametrize("name", ["naive", "patched", "calls"])
    def test_stack_assumptions_hold(self, name):
        target, netlist, _ = fixture_target("minirv_labels")
        program = _program(name)
        aset = assumptions_for(Mode.STACK, netlist, target.core, program, 8)
        result = run_program(netlist, target.core, program, 300, aset, seed=7)
        assert result.ok, result.violations[:3]
        assert set(result.fetches) <= static_reach(program)

    @pytest.mark.slow
    @pytest.mark.parametrize("name, trigger", [("naive", None), ("patched", None), ("calls", None), ("trojan", 0x7F)])
    def test_stack_assumptions_hold_for_long_runs(self, name, trigger):
        target, netlist, _ = fixture_target("minirv_labels")
        program = _program(name, trigger)
        aset = assumptions_for(Mode.STACK, netlist, target.core, program, 8)
        result = run_program(netlist, target.core, program, 10_000, aset, seed=11)
        assert result.ok, result.violations[:3]
        assert set(result.fetches) <= static_reach(program)

    def test_trojan_holds_for_any_trigger(self):
        target, netlist, _ = fixture_target("minirv_labels")
        for trigger in (0x5A, 0x13):
            program = _program("trojan", trigger)
            aset = assumptions_for(Mode.STACK, netlist, target.core, program, 8)
            assert run_program(netlist, target.core, program, 200, aset, seed=trigger).ok

    def test_naive_stores_a_key_byte(self):
        target, netlist, _ = fixture_target("minirv_labels")
        result = run_program(netlist, target.core, _program("naive"), 120, seed=3)
        assert 64 in result.stores

    def test_foreign_assumptions_are_violated(self):
        target, netlist, _ = fixture_target("minirv_labels")
        foreign = assumptions_for(Mode.USED, netlist, target.core, _program("patched"))
        result = run_program(netlist, target.core, _program("naive"), 60, foreign)
        assert not result.ok
        assert {v.assumption for v in result.violations} == {"assume_used"}
