import itertools
import json
from functools import lru_cache

import pytest

from src.checker.monitor import compile_monitor
from src.diagnostics import PslSyntaxError
from src.hdl.expr import ref
from src.hdl.simulate import Simulator
from src.ifa.paths import enumerate_paths
from src.ifa.taint import taint_simulate
from src.properties.blocks import (
    alive_condition,
    block_count,
    block_sequence,
    build_property,
    sequence_skeleton,
    split_blocks,
)
from src.properties.property import Property, PropertyKind
from src.properties.psl import emit_psl, parse_psl, signal_table, write_properties
from src.properties.sere import (
    Atom,
    Concat,
    Fuse,
    RepInf,
    collapse_fuse,
    cover_ends,
    match_ends,
    match_trace,
    matches_ending_at,
)
from tests.conftest import fixture_target

NAMES = ("p", "q", "r")
TABLE = {n: (1, 0) for n in NAMES}
# one letter per atom plus the letter where all of them hold
LETTERS = [{n: int(n == m) for n in NAMES} for m in NAMES] + [{n: 1 for n in NAMES}]


def _random_seq(rng, depth=3):
    if depth == 0 or rng.random() < 0.3:
        return Atom(ref(rng.choice(NAMES), 1))
    kind = rng.choice(("fuse", "concat", "rep"))
    if kind == "rep":
        return RepInf(_random_seq(rng, depth - 1))
    a, b = _random_seq(rng, depth - 1), _random_seq(rng, depth - 1)
    return Fuse(a, b) if kind == "fuse" else Concat(a, b)


def _random_trace(rng, cycles):
    return [{n: rng.getrandbits(1) for n in NAMES} for _ in range(cycles)]


@lru_cache(maxsize=None)
def _shapes(size):
    """Tree shapes with exactly ``size`` nodes; leaves are None."""
    if size == 1:
        return (None,)
    shapes = [("rep", s) for s in _shapes(size - 1)]
    for left in range(1, size - 1):
        for a in _shapes(left):
            for b in _shapes(size - 1 - left):
                shapes += [("fuse", a, b), ("concat", a, b)]
    return tuple(shapes)


def _leaves(shape):
    if shape is None:
        return 1
    return sum(_leaves(s) for s in shape[1:])


def _namings(count):
    """Atom names up to renaming: the first leaf is p, later leaves reuse a name or take the next one."""
    if count == 0:
        yield ()
        return
    for rest in _namings(count - 1):
        used = len(set(rest))
        for k in range(min(used + 1, len(NAMES))):
            yield rest + (NAMES[k],)


def _build(shape, names):
    if shape is None:
        return Atom(ref(next(names), 1))
    if shape[0] == "rep":
        return RepInf(_build(shape[1], names))
    a = _build(shape[1], names)
    b = _build(shape[2], names)
    return Fuse(a, b) if shape[0] == "fuse" else Concat(a, b)


def _all_seqs(max_size):
    for size in range(1, max_size + 1):
        for shape in _shapes(size):
            for naming in _namings(_leaves(shape)):
                yield _build(shape, iter(naming))


def _blocks_path():
    _, netlist, labels = fixture_target("blocks")
    (path,) = enumerate_paths(netlist, labels).paths
    return netlist, path


def _env(netlist, **values):
    env = {s.name: 0 for s in netlist.signals}
    env.update(values)
    return env


class TestBlocks:
    def test_split(self):
        _, path = _blocks_path()
        blocks = split_blocks(path)
        assert [b.terminator for b in blocks] == ["s3", "s6", None]
        assert [len(b.edges) for b in blocks] == [1, 3, 2]
        assert block_count(path) == 3

    def test_skeleton(self):
        netlist, path = _blocks_path()
        prop = build_property(path, netlist)
        assert sequence_skeleton(prop.body) == [";", "[*]", ";", ":", ":", ";", "[*]", ";"]
        assert block_count(prop) == 3
        assert prop.name == f"cover_{path.id}"
        assert prop.clock == "clk"

    def test_alive_is_no_write(self):
        netlist, _ = _blocks_path()
        alive = alive_condition(netlist.signal("s3"), netlist).expression
        held = Atom(alive)
        assert match_trace(held, [_env(netlist, en1=0)])
        assert not match_trace(held, [_env(netlist, en1=1)])

    def test_block_activation_is_fused(self):
        netlist, path = _blocks_path()
        seq = block_sequence(split_blocks(path)[1], netlist)
        assert match_trace(seq, [_env(netlist, a=1, b=1, en2=1)])
        for off in ("a", "b", "en2"):
            values = {"a": 1, "b": 1, "en2": 1, off: 0}
            assert not match_trace(seq, [_env(netlist, **values)])

    def test_cover_trace(self):
        netlist, path = _blocks_path()
        body = build_property(path, netlist).body
        direct = [_env(netlist, en1=1), _env(netlist, a=1, b=1, en2=1), _env(netlist, go=1)]
        assert match_trace(body, direct)
        waiting = [direct[0], _env(netlist), direct[1], _env(netlist), direct[2]]
        assert match_trace(body, waiting)
        overwritten = [direct[0], _env(netlist, en1=1), direct[1], direct[2]]
        assert not match_trace(body, overwritten)

    def test_memory_path_holds_an_address(self):
        _, netlist, labels = fixture_target("minirv_labels")
        path = next(p for p in enumerate_paths(netlist, labels) if p.sink.name == "dmem_wdata")
        prop = build_property(path, netlist)
        assert [h.name for h in prop.aux] == ["aux_held_rf"]
        assert prop.aux[0].width == 4
        assert "aux_held_rf" in emit_psl(prop)


class TestSere:
    def test_collapse_fuse_keeps_matches(self, rng):
        for _ in range(100):
            seq = _random_seq(rng)
            trace = _random_trace(rng, 6)
            assert match_ends(seq, trace, 0) == match_ends(collapse_fuse(seq), trace, 0)

    def test_fuse_shares_a_cycle(self):
        p, q = Atom(ref("p", 1)), Atom(ref("q", 1))
        assert match_trace(Fuse(p, q), [{"p": 1, "q": 1, "r": 0}])
        assert not match_trace(Concat(p, q), [{"p": 1, "q": 1, "r": 0}])
        assert match_trace(Concat(p, q), [{"p": 1, "q": 0, "r": 0}, {"p": 0, "q": 1, "r": 0}])

    def test_repetition_may_be_empty(self):
        p, q = Atom(ref("p", 1)), Atom(ref("q", 1))
        seq = Concat(RepInf(p), q)
        assert match_trace(seq, [{"p": 0, "q": 1, "r": 0}])
        assert match_trace(seq, [{"p": 1, "q": 0, "r": 0}] * 3 + [{"p": 0, "q": 1, "r": 0}])

    def test_cover_ends_from_any_start(self):
        p, q = Atom(ref("p", 1)), Atom(ref("q", 1))
        trace = [{"p": 1, "q": 0, "r": 0}, {"p": 0, "q": 1, "r": 0}, {"p": 1, "q": 1, "r": 0}]
        assert cover_ends(Concat(p, q), trace) == [1]
        assert cover_ends(Fuse(p, q), trace) == [2]
        assert cover_ends(RepInf(p), trace) == [0, 2]
        assert [e for e in range(3) if matches_ending_at(Concat(p, q), trace, e)] == [1]


class TestMonitor:
    def test_agrees_with_trace_matching(self, rng):
        for _ in range(150):
            seq = _random_seq(rng)
            monitor = compile_monitor(seq)
            trace = _random_trace(rng, 7)
            expected = [end for end in range(len(trace)) if matches_ending_at(seq, trace, end)]
            assert monitor.accepts_at(trace) == expected

    def test_blocks_property(self, rng):
        netlist, path = _blocks_path()
        body = build_property(path, netlist).body
        monitor = compile_monitor(body)
        assert not monitor.empty
        for _ in range(50):
            trace = [_env(netlist, **{n: rng.getrandbits(1) for n in ("en1", "a", "b", "en2", "go")}) for _ in range(8)]
            expected = [end for end in range(8) if matches_ending_at(body, trace, end)]
            assert monitor.accepts_at(trace) == expected

    @pytest.mark.slow
    @pytest.mark.parametrize("max_size, cycles", [(7, 4), (5, 6)])
    def test_exhaustive_small_sequences(self, max_size, cycles):
        traces = [list(t) for t in itertools.product(LETTERS, repeat=cycles)]
        checked = 0
        for seq in _all_seqs(max_size):
            monitor = compile_monitor(seq)
            for trace in traces:
                assert monitor.accepts_at(trace) == cover_ends(seq, trace), seq
            checked += 1
        assert checked >= sum(len(_shapes(n)) for n in range(1, max_size + 1))


class TestCoverSemantics:
    """A cover sequence matches from a cycle exactly when data tainted on that cycle reaches the sink."""

    @pytest.mark.parametrize("name", ["mux", "blocks"])
    def test_match_iff_taint_reaches_sink(self, rng, name):
        _, netlist, labels = fixture_target(name)
        (path,) = enumerate_paths(netlist, labels).paths
        body = build_property(path, netlist).body
        sim = Simulator(netlist)
        reached = missed = 0
        for _ in range(1500):
            cycles = rng.randint(1, 6)
            trace = taint_simulate(netlist, path.source, sim.random_inputs(rng, cycles), seed_cycles={0})
            ends = match_ends(body, trace.values, 0)
            for cycle in range(cycles):
                flows = trace.tainted(cycle, path.sink)
                assert flows == (cycle + 1 in ends), f"cycle {cycle} of {trace.values}"
                if flows:
                    reached += 1
                else:
                    missed += 1
        assert reached > 0 and missed > 0


class TestPsl:
    def test_round_trip_random(self, rng):
        for i in range(500):
            prop = Property(PropertyKind.COVER, _random_seq(rng, rng.randint(1, 5)), name=f"cover_{i}", clock="clk")
            parsed = parse_psl(emit_psl(prop), TABLE)
            assert parsed == prop
            assert parsed.clock == "clk"

    @pytest.mark.parametrize("name", ["mux", "blocks", "hier", "minirv_labels"])
    def test_round_trip_fixtures(self, name):
        _, netlist, labels = fixture_target(name)
        for path in enumerate_paths(netlist, labels):
            prop = build_property(path, netlist)
            text = emit_psl(prop)
            parsed = parse_psl(text, signal_table(netlist, prop.aux))
            assert parsed.name == prop.name
            assert parsed.clock == prop.clock
            assert emit_psl(parsed) == text
            assert sequence_skeleton(parsed.body) == sequence_skeleton(prop.body)

    def test_syntax_error(self):
        with pytest.raises(PslSyntaxError):
            parse_psl("cover { ; };", TABLE)

    def test_write_properties(self, tmp_path):
        _, netlist, labels = fixture_target("minirv_labels")
        props = [build_property(p, netlist) for p in enumerate_paths(netlist, labels)]
        manifest = write_properties(props, tmp_path / "props")
        entries = json.loads(manifest.read_text())
        assert [e["name"] for e in entries] == [p.name for p in props]
        for entry in entries:
            text = (tmp_path / "props" / entry["file"]).read_text()
            assert text.startswith(f"// origin {entry['origin']}")
            assert f"{entry['name']}: cover {{" in text
