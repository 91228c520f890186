import itertools

import pytest

from src.checker.bitblast import Blaster, Circuit
from src.checker.bmc import NOT_WITHIN, bmc_cover
from src.checker.check import check_property
from src.checker.explicit import explicit_oracle, within_budget
from src.checker.induction import k_induction, mine_lemmas
from src.checker.monitor import compile_monitor
from src.checker.sat import BUDGETED_BACKENDS, SatResult, SatSession, dump_dimacs, sat_solve
from src.checker.ts import compile_ts, held_registers
from src.checker.verdict import Method, VerdictKind
from src.checker.witness import export_witness, load_witness_table, replay_witness
from src.config.settings import settings
from src.diagnostics import AssumptionError, ExplicitStateLimit
from src.hdl.expr import Const, eq, ref
from src.hdl.simulate import Simulator
from src.ifa.paths import enumerate_paths
from src.ifa.labels import resolve_labels
from src.properties.blocks import build_property
from src.properties.property import Property, PropertyKind
from src.properties.sere import Atom
from src.schemas.run import Limits, Mode
from src.schemas.target import TargetConfig
from src.software.assumptions import AssumptionSet, AuxRegister
from tests.conftest import fixture_target, netlist_of, random_circuit

LIMITS = Limits(max_k=0, induction_depth=4, explicit_state_bits=20, explicit_input_bits=12, conflict_budget=0)


def _first_property(name):
    _, netlist, labels = fixture_target(name)
    (path,) = enumerate_paths(netlist, labels).paths
    return netlist, build_property(path, netlist)


def _sel_low(netlist):
    assume = Property(PropertyKind.ASSUME, Atom(eq(ref("sel", 1), Const(0, 1))), "assume_sel_low")
    return AssumptionSet(Mode.NONE, (assume,))


def _holds(clauses, assignment):
    return all(any((lit > 0) == assignment[abs(lit)] for lit in c) for c in clauses)


class TestSat:
    def test_random_3cnf_against_brute_force(self, rng):
        n = 6
        for _ in range(60):
            clauses = [
                [v if rng.random() < 0.5 else -v for v in rng.sample(range(1, n + 1), 3)]
                for _ in range(rng.randint(10, 30))
            ]
            model = sat_solve(clauses)
            brute = any(
                _holds(clauses, dict(zip(range(1, n + 1), bits)))
                for bits in itertools.product((False, True), repeat=n)
            )
            assert (model is not None) == brute
            if model is not None:
                full = {v: model.get(v, False) for v in range(1, n + 1)}
                assert _holds(clauses, full)

    def test_session_assumptions(self):
        with SatSession() as s:
            a, b = s.new_var("a"), s.new_var("b")
            s.add([-a, b])
            assert s.solve([a]) == SatResult.SAT
            assert s.value(b)
            assert s.solve([a, -b]) == SatResult.UNSAT
            assert s.queries == 2

    @pytest.mark.parametrize("backend", ["cadical153", "minisat22", "glucose3"])
    def test_conflict_budget(self, backend):
        # six pigeons, five holes
        pigeons, holes = 6, 5
        with SatSession(backend=backend, conflict_budget=1) as s:
            var = {(p, h): s.new_var() for p in range(pigeons) for h in range(holes)}
            for p in range(pigeons):
                s.add([var[p, h] for h in range(holes)])
            for h in range(holes):
                for p, q in itertools.combinations(range(pigeons), 2):
                    s.add([-var[p, h], -var[q, h]])
            assert s.solve() == SatResult.LIMIT
            assert s.backend in BUDGETED_BACKENDS

    def test_backend_choice(self):
        assert settings.sat_backend in BUDGETED_BACKENDS
        with SatSession(backend="glucose3") as s:
            assert s.backend == "glucose3"

    def test_dump_dimacs(self, tmp_path):
        path = dump_dimacs([[1, -2], [2, 3]], tmp_path / "q.cnf", {1: "a", 2: "b"})
        text = path.read_text()
        assert "p cnf 3 2" in text
        assert "c var 1 a" in text
        assert "1 -2 0" in text


class TestMux:
    def test_covered_at_zero(self):
        netlist, prop = _first_property("mux")
        ts = compile_ts(netlist)
        verdict = check_property(ts, prop, LIMITS)
        assert verdict.covered
        assert verdict.method == Method.BMC
        assert verdict.bound == 0
        assert verdict.witness.column("sel") == [1]
        assert replay_witness(verdict.witness, ts, prop.body).ok

    def test_assumption_makes_it_uncoverable(self):
        netlist, prop = _first_property("mux")
        ts = compile_ts(netlist, _sel_low(netlist))
        monitor = compile_monitor(prop.body)
        assert bmc_cover(ts, monitor, 4).reason == NOT_WITHIN
        verdict = check_property(ts, prop, LIMITS, monitor)
        assert verdict.uncoverable
        assert verdict.method == Method.K_INDUCTION
        assert verdict.bound <= 1

    def test_broken_witness_does_not_replay(self):
        netlist, prop = _first_property("mux")
        ts = compile_ts(netlist)
        witness = check_property(ts, prop, LIMITS).witness
        witness.inputs[0]["sel"] = 0
        replay = replay_witness(witness, ts, prop.body)
        assert not replay.ok
        assert "does not match" in replay.reason
        constrained = compile_ts(netlist, _sel_low(netlist))
        witness.inputs[0]["sel"] = 1
        assert "assume_sel_low violated" in replay_witness(witness, constrained, prop.body).reason

    def test_empty_monitor_is_structural(self):
        netlist, prop = _first_property("mux")
        never = Property(PropertyKind.COVER, Atom(Const(0, 1)), "cover_never")
        verdict = check_property(compile_ts(netlist), never, LIMITS)
        assert verdict.uncoverable
        assert verdict.method == Method.STRUCTURAL

    def test_witness_table_round_trip(self, tmp_path):
        netlist, prop = _first_property("mux")
        witness = check_property(compile_ts(netlist), prop, LIMITS).witness
        text = export_witness(witness, tmp_path / "w.txt")
        assert (tmp_path / "w.txt").read_text() == text
        assert load_witness_table(text) == witness.signals

    def test_overflowed_witness_is_unknown(self):
        netlist, prop = _first_property("mux")
        lost = AuxRegister("aux_cs_ovf", 1, Const(1, 1), init=1)
        ts = compile_ts(netlist, AssumptionSet(Mode.STACK, aux=(lost,), overflow="aux_cs_ovf"))
        verdict = check_property(ts, prop, LIMITS)
        assert verdict.kind == VerdictKind.UNKNOWN
        assert verdict.reason == "depth-overflow"
        assert verdict.witness.column("aux_cs_ovf") == [1]

    def test_overflow_after_the_hit_is_ignored(self):
        netlist, prop = _first_property("mux")
        later = AuxRegister("aux_cs_ovf", 1, Const(1, 1), init=0)
        ts = compile_ts(netlist, AssumptionSet(Mode.STACK, aux=(later,), overflow="aux_cs_ovf"))
        verdict = check_property(ts, prop, LIMITS)
        assert verdict.covered
        assert verdict.bound == 0


class TestBlocks:
    def test_bmc_agrees_with_explicit(self):
        netlist, prop = _first_property("blocks")
        ts = compile_ts(netlist)
        monitor = compile_monitor(prop.body)
        assert within_budget(ts, monitor, LIMITS)
        explicit = explicit_oracle(ts, monitor, LIMITS.explicit_state_bits, LIMITS.explicit_input_bits)
        bmc = bmc_cover(ts, monitor, 8)
        assert explicit.covered and bmc.covered
        assert explicit.bound == bmc.bound == 2
        assert replay_witness(explicit.witness, ts, prop.body, monitor).ok
        assert replay_witness(bmc.witness, ts, prop.body, monitor).ok

    def test_state_budget(self):
        netlist, prop = _first_property("blocks")
        ts = compile_ts(netlist)
        with pytest.raises(ExplicitStateLimit):
            explicit_oracle(ts, compile_monitor(prop.body), state_limit=1)
        with pytest.raises(ExplicitStateLimit):
            explicit_oracle(ts, compile_monitor(prop.body), state_limit=64, input_limit=2)

    def test_held_register_stays_free(self):
        netlist, prop = _first_property("blocks")
        assert held_registers(prop.aux) == ()
        ts = compile_ts(netlist, extra_aux=(AuxRegister("aux_tag", 2, ref("aux_tag", 2), init=None),))
        assert ts.state_bits == netlist.state_bits + 2

    def test_aux_name_clash(self):
        netlist, _ = _first_property("blocks")
        with pytest.raises(AssumptionError):
            compile_ts(netlist, extra_aux=(AuxRegister("s3", 4, ref("s3", 4)),))


class TestRandomCircuits:
    """SAT engines against exhaustive search on designs small enough to enumerate."""

    def test_agreement(self, rng):
        # the oracle being compared against must not also decide the pipeline verdict
        no_oracle = LIMITS.model_copy(update={"explicit_state_bits": 0})
        checked = covered = decided = 0
        for i in range(30):
            netlist = netlist_of(random_circuit(rng, i))
            labels = resolve_labels(TargetConfig(sources=["secret"], sinks=["out"]), netlist)
            for path in enumerate_paths(netlist, labels):
                prop = build_property(path, netlist)
                ts = compile_ts(netlist, extra_aux=held_registers(prop.aux))
                monitor = compile_monitor(prop.body)
                if monitor.empty:
                    continue
                explicit = explicit_oracle(ts, monitor, LIMITS.explicit_state_bits, LIMITS.explicit_input_bits)
                bmc = bmc_cover(ts, monitor, 6)
                verdict = check_property(ts, prop, no_oracle, monitor)
                checked += 1
                if explicit.covered and explicit.bound <= 6:
                    covered += 1
                    assert bmc.covered
                    assert bmc.bound == explicit.bound
                    assert replay_witness(bmc.witness, ts, prop.body, monitor).ok
                    assert verdict.kind == VerdictKind.COVERED
                    assert verdict.bound == explicit.bound
                if explicit.uncoverable:
                    assert not bmc.covered
                    assert verdict.kind in (VerdictKind.UNCOVERABLE, VerdictKind.UNKNOWN)
                    assert check_property(ts, prop, LIMITS, monitor).kind == VerdictKind.UNCOVERABLE
                if verdict.kind != VerdictKind.UNKNOWN:
                    decided += 1
                    assert verdict.kind == explicit.kind
                    assert verdict.method in (Method.BMC, Method.K_INDUCTION)
        assert checked > 0
        assert covered > 0
        assert decided >= covered

    def test_induction_is_sound(self, rng):
        for i in range(30):
            netlist = netlist_of(random_circuit(rng, 100 + i))
            labels = resolve_labels(TargetConfig(sources=["secret"], sinks=["out"]), netlist)
            for path in enumerate_paths(netlist, labels):
                prop = build_property(path, netlist)
                ts = compile_ts(netlist)
                monitor = compile_monitor(prop.body)
                if monitor.empty:
                    continue
                lemmas, _ = mine_lemmas(ts, monitor, LIMITS)
                depth, _ = k_induction(ts, monitor, lemmas, LIMITS.induction_depth)
                if depth is None or bmc_cover(ts, monitor, depth).covered:
                    continue
                explicit = explicit_oracle(ts, monitor, LIMITS.explicit_state_bits, LIMITS.explicit_input_bits)
                assert explicit.kind == VerdictKind.UNCOVERABLE


BRANCHES = """
module br (
    input clk,
    input [1:0] op,
    input a,
    input b,
    output [1:0] y,
    output [1:0] z
);
  reg [1:0] yc;
  reg [1:0] zr;
  always @(*) begin
    if (a) yc = 2'd1;
    else if (b) yc = 2'd2;
    else if (op == 2'd3) yc = 2'd3;
    else yc = 2'd0;
  end
  always @(posedge clk) begin
    case (op)
      2'd0: zr <= 2'd1;
      2'd1, 2'd2: zr <= {a, b};
      default: zr <= 2'd3;
    endcase
  end
  assign y = yc;
  assign z = zr;
endmodule
"""


class TestBranchConditions:
    """Sibling branches of an if/else chain or a case get pairwise exclusive conditions."""

    @pytest.mark.parametrize("target, arms", [("yc", 4), ("zr", 3)])
    def test_siblings_exclusive_and_complete(self, target, arms):
        netlist = netlist_of(BRANCHES)
        with SatSession() as s:
            c = Circuit(s)
            env = {sig.name: c.fresh(sig.width, sig.name) for sig in netlist.signals if not sig.is_memory}
            blaster = Blaster(c, env)
            conds = [blaster.truth(a.condition) for a in netlist.drivers_of(target)]
            assert len(conds) == arms
            for x, y in itertools.combinations(conds, 2):
                assert s.solve([x, y]) == SatResult.UNSAT
            for x in conds:
                assert s.solve([x]) == SatResult.SAT
            # a final else or default leaves no input uncovered
            assert s.solve([-c.or_all(conds)]) == SatResult.UNSAT


class TestShift:
    def test_unsigned_arithmetic_shift_fills_zeros(self):
        netlist = netlist_of("module sh (input [3:0] a, input [1:0] n, output [3:0] y);\n  assign y = a >>> n;\nendmodule\n")
        (driver,) = netlist.drivers_of("y")
        sim = Simulator(netlist)
        with SatSession() as s:
            c = Circuit(s)
            env = {"a": c.fresh(4, "a"), "n": c.fresh(2, "n")}
            out = Blaster(c, env).blast(driver.source)
            for a, n in itertools.product(range(16), range(4)):
                fixed = [lit if (v >> i) & 1 else -lit for name, v in (("a", a), ("n", n)) for i, lit in enumerate(env[name])]
                assert s.solve(fixed) == SatResult.SAT
                assert sum(1 << i for i, lit in enumerate(out) if s.value(lit)) == a >> n
                assert sim.evaluate_cycle({}, {"a": a, "n": n})["y"] == a >> n
