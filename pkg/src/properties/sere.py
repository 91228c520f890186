"""Sequential extended regular expressions over Boolean atoms."""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator, Mapping, Sequence, Union

from src.hdl.expr import Expr, and_, evaluate, is_boolean, truth


class Seq:
    def nodes(self) -> Iterator["Seq"]:
        yield self

    def atoms(self) -> list["Atom"]:
        return [n for n in self.nodes() if isinstance(n, Atom)]


@dataclass(frozen=True)
class Atom(Seq):
    """A Boolean that must hold for exactly one cycle."""

    cond: Expr

    def __post_init__(self):
        if not is_boolean(self.cond):
            object.__setattr__(self, "cond", truth(self.cond))


@dataclass(frozen=True)
class Fuse(Seq):
    """``a : b`` - b starts on the cycle a ends."""

    a: Seq
    b: Seq

    def nodes(self):
        yield self
        yield from self.a.nodes()
        yield from self.b.nodes()


@dataclass(frozen=True)
class Concat(Seq):
    """``a ; b`` - b starts on the cycle after a ends."""

    a: Seq
    b: Seq

    def nodes(self):
        yield self
        yield from self.a.nodes()
        yield from self.b.nodes()


@dataclass(frozen=True)
class RepInf(Seq):
    """``a[*]`` - zero or more back-to-back repetitions."""

    a: Seq

    def nodes(self):
        yield self
        yield from self.a.nodes()


SeqNode = Union[Atom, Fuse, Concat, RepInf]


def concat_all(items: Sequence[Seq]) -> Seq:
    result = items[0]
    for item in items[1:]:
        result = Concat(result, item)
    return result


def fuse_all(items: Sequence[Seq]) -> Seq:
    result = items[0]
    for item in items[1:]:
        result = Fuse(result, item)
    return result


def collapse_fuse(seq: Seq) -> Seq:
    """Fuse of two atoms is their conjunction in one cycle."""
    if isinstance(seq, Fuse):
        a, b = collapse_fuse(seq.a), collapse_fuse(seq.b)
        if isinstance(a, Atom) and isinstance(b, Atom):
            return Atom(and_(a.cond, b.cond))
        return Fuse(a, b)
    if isinstance(seq, Concat):
        return Concat(collapse_fuse(seq.a), collapse_fuse(seq.b))
    if isinstance(seq, RepInf):
        return RepInf(collapse_fuse(seq.a))
    return seq


def match_trace(seq: Seq, trace: Sequence[Mapping[str, object]]) -> bool:
    """True when the whole trace is one tight match of ``seq``."""
    return len(trace) in match_ends(seq, trace, 0)


def _matcher(trace: Sequence[Mapping[str, object]]) -> Callable[[Seq, int], frozenset[int]]:
    """``ends(s, i)``: positions j such that trace[i:j] matches ``s``, memoised per trace."""
    n = len(trace)
    holds = [dict() for _ in range(n)]

    def atom(a: Atom, i: int) -> bool:
        cache = holds[i]
        if a not in cache:
            cache[a] = bool(evaluate(a.cond, trace[i]))
        return cache[a]

    @lru_cache(maxsize=None)
    def ends(s: Seq, i: int) -> frozenset[int]:
        if isinstance(s, Atom):
            return frozenset({i + 1}) if i < n and atom(s, i) else frozenset()
        if isinstance(s, Concat):
            return frozenset(j for k in ends(s.a, i) for j in ends(s.b, k))
        if isinstance(s, Fuse):
            # both sides non-empty, sharing the cycle k-1
            return frozenset(j for k in ends(s.a, i) if k > i for j in ends(s.b, k - 1) if j >= k)
        if isinstance(s, RepInf):
            reached = {i}
            frontier = [i]
            while frontier:
                k = frontier.pop()
                for j in ends(s.a, k):
                    if j > k and j not in reached:
                        reached.add(j)
                        frontier.append(j)
            return frozenset(reached)
        raise TypeError(f"unknown sequence node {type(s).__name__}")

    return ends


def match_ends(seq: Seq, trace: Sequence[Mapping[str, object]], start: int) -> frozenset[int]:
    """End positions j such that trace[start:j] matches ``seq``."""
    return _matcher(trace)(seq, start)


def cover_ends(seq: Seq, trace: Sequence[Mapping[str, object]]) -> list[int]:
    """Cycles on which some non-empty match of ``seq`` ends, from any start."""
    ends = _matcher(trace)
    hits = {j - 1 for i in range(len(trace)) for j in ends(seq, i) if j > i}
    return sorted(hits)


def matches_ending_at(seq: Seq, trace: Sequence[Mapping[str, object]], end: int) -> bool:
    """Some non-empty match of ``seq`` ends on cycle ``end`` (the cover semantics)."""
    return end in cover_ends(seq, trace[: end + 1])
