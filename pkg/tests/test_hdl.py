import random

import pytest

from src.diagnostics import (
    CombinationalCycle,
    ElaborationError,
    HdlSyntaxError,
    MultipleClocks,
    UnresolvedInstance,
    UnsupportedConstruct,
)
from src.hdl.netlist import SignalKind
from src.hdl.parser import parse_rtl
from src.hdl.printer import pretty_print
from src.hdl.simulate import Simulator, TreeInterpreter
from src.software.assembler import assemble_file
from tests.conftest import FIXTURES, PROGRAMS, fixture_target, netlist_of, random_circuit


class TestParse:
    def test_fixture_round_trip(self):
        for name in ("mux", "blocks", "hier", "minirv", "decoder_notrap"):
            tree = parse_rtl((FIXTURES / "rtl" / f"{name}.v").read_text())
            again = parse_rtl(pretty_print(tree))
            assert again.modules == tree.modules, name

    def test_random_circuit_round_trip(self, rng):
        for i in range(30):
            tree = parse_rtl(random_circuit(rng, i))
            assert parse_rtl(pretty_print(tree)).modules == tree.modules

    def test_syntax_error_has_position(self):
        with pytest.raises(HdlSyntaxError) as info:
            parse_rtl("module m (input a, output b);\n  assign b = a +;\nendmodule\n")
        assert info.value.line == 2
        assert info.value.expected

    def test_multiplication_is_unsupported(self):
        with pytest.raises(UnsupportedConstruct):
            parse_rtl("module m (input [3:0] a, output [3:0] b);\n  assign b = a * a;\nendmodule\n")

    def test_unsupported_keyword(self):
        with pytest.raises(UnsupportedConstruct):
            parse_rtl("module m (input a, output b);\n  initial b = 0;\nendmodule\n")


class TestElaborate:
    def test_mux_signals(self):
        netlist = netlist_of((FIXTURES / "rtl" / "mux.v").read_text())
        assert netlist.signal("sel").kind == SignalKind.INPUT
        assert netlist.signal("out").width == 4
        assert netlist.clock is None
        assert len(netlist.drivers_of("out")) == 1

    def test_hierarchical_names(self):
        _, netlist, _ = fixture_target("hier")
        assert "hier.u_mid.u_leaf.r" in netlist.by_name
        assert netlist.signal("hier.u_mid.u_leaf.r").kind == SignalKind.REGISTER
        assert netlist.clock_name == "clk"

    def test_reset_values_become_initial_state(self):
        _, netlist, _ = fixture_target("minirv_labels")
        assert netlist.signal("pc").init == 0
        assert netlist.signal("dbg_en").init == 0
        assert netlist.signal("rf").kind == SignalKind.MEMORY
        assert netlist.signal("rf").depth == 16
        assert netlist.signal("rf").init is None
        assert netlist.reset_name == "rst"

    def test_unresolved_instance(self):
        with pytest.raises(UnresolvedInstance):
            netlist_of("module top (input a, output b);\n  ghost u (.x(a));\n  assign b = a;\nendmodule\n")

    def test_combinational_cycle_names_signals(self):
        text = (
            "module m (input a, output y);\n"
            "  wire p, q;\n"
            "  assign p = q ^ a;\n"
            "  assign q = p;\n"
            "  assign y = q;\n"
            "endmodule\n"
        )
        with pytest.raises(CombinationalCycle) as info:
            netlist_of(text)
        assert {"p", "q"} <= set(info.value.signals)

    def test_two_clocks(self):
        text = (
            "module m (input clk, input clk2, input d, output q);\n"
            "  reg r1, r2;\n"
            "  always @(posedge clk) r1 <= d;\n"
            "  always @(posedge clk2) r2 <= r1;\n"
            "  assign q = r2;\n"
            "endmodule\n"
        )
        with pytest.raises(MultipleClocks):
            netlist_of(text)

    def test_unassigned_output(self):
        with pytest.raises(ElaborationError):
            netlist_of("module m (input a, output b, output c);\n  assign b = a;\nendmodule\n")
        netlist_of("module m (input a, output b, (* unused *) output c);\n  assign b = a;\nendmodule\n")

    def test_comb_block_reading_its_target(self):
        text = (
            "module m (input [1:0] a, output [1:0] y);\n"
            "  reg [1:0] t;\n"
            "  always @(*) begin\n"
            "    t = a;\n"
            "    if (t == 2'd3) t = 2'd0;\n"
            "  end\n"
            "  assign y = t;\n"
            "endmodule\n"
        )
        with pytest.raises(UnsupportedConstruct):
            netlist_of(text)


class TestSimulation:
    """The flat netlist and the procedural tree must agree cycle by cycle."""

    @staticmethod
    def _compare(text: str, top, frames, signals):
        TestSimulation._agree(parse_rtl(text), netlist_of(text, top), top, frames, signals)

    @staticmethod
    def _agree(tree, netlist, top, frames, signals):
        sim = Simulator(netlist)
        interp = TreeInterpreter(tree, top)
        state = sim.zero_state()
        for cycle, inputs in enumerate(frames):
            env, state = sim.step(state, inputs)
            ref = interp.step(inputs)
            for name in signals:
                assert env[name] == ref[name], f"{name} differs on cycle {cycle}"

    def test_random_circuits(self, rng):
        for i in range(25):
            text = random_circuit(rng, i)
            netlist = netlist_of(text)
            frames = Simulator(netlist).random_inputs(rng, 12)
            self._compare(text, None, frames, ["out", "r0", "r1", "mid"])

    def test_hierarchy(self, rng):
        text = (FIXTURES / "rtl" / "hier.v").read_text()
        frames = [{"secret": rng.getrandbits(4), "en": rng.getrandbits(1)} for _ in range(20)]
        self._compare(text, "hier", frames, ["out", "hier.u_mid.t"])

    def test_minirv_on_program_words(self, rng):
        text = (FIXTURES / "rtl" / "minirv.v").read_text()
        words = assemble_file(PROGRAMS / "naive.s").encodings
        frames = [
            {
                "imem_rdata": rng.choice(words) if rng.random() < 0.8 else rng.getrandbits(32),
                "dmem_rdata": rng.getrandbits(8),
                "kmem_rdata": rng.getrandbits(8),
            }
            for _ in range(60)
        ]
        self._compare(text, "minirv", frames, ["imem_addr", "dmem_addr", "dmem_wdata", "dmem_we", "kmem_addr", "npc"])

    @pytest.mark.slow
    @pytest.mark.parametrize("name", ["mux", "blocks", "hier", "decoder_notrap", "minirv_labels"])
    def test_flattening_on_long_random_runs(self, rng, name):
        target, netlist, _ = fixture_target(name)
        tree = parse_rtl("\n".join((FIXTURES / path).read_text() for path in target.rtl))
        signals = [s.name for s in netlist.signals if s.kind in (SignalKind.OUTPUT, SignalKind.REGISTER)]
        words = assemble_file(PROGRAMS / "naive.s").encodings
        sim = Simulator(netlist)
        for _ in range(1000):
            frames = sim.random_inputs(rng, 20)
            for frame in frames:
                if "imem_rdata" in frame and rng.random() < 0.8:
                    frame["imem_rdata"] = rng.choice(words)
                if "instr" in frame and rng.random() < 0.5:
                    funct3 = rng.choice((0, 7)) << 12
                    frame["instr"] = (frame["instr"] & ~0x707F) | funct3 | rng.choice((0x0B, 0x13))
            self._agree(tree, netlist, target.top, frames, signals)

    def test_undriven_wire_reads_zero(self):
        netlist = netlist_of(
            "module m (input a, output y);\n  wire u;\n  assign y = a & !u;\nendmodule\n"
        )
        env = Simulator(netlist).evaluate_cycle({}, {"a": 1})
        assert env["u"] == 0
        assert env["y"] == 1

    def test_reset_held_inactive(self):
        _, netlist, _ = fixture_target("blocks")
        sim = Simulator(netlist)
        trace = sim.run([{"s2": 9, "en1": 1}, {"a": 1, "b": 1, "en2": 1}, {"go": 1}])
        assert trace[1]["s3"] == 9
        assert trace[2]["s6"] == 9
        assert trace[2]["s8"] == 9


def test_random_state_respects_reset_values():
    _, netlist, _ = fixture_target("minirv_labels")
    state = Simulator(netlist).initial_state(random.Random(3))
    assert state["pc"] == 0
    assert state["lp_count"] == 0
    assert len(state["rf"]) == 16
