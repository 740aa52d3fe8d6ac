"""Combinatorics of Rauzy diagrams.

A permutation pair is stored as two rows of letters.  The alphabet is always
the *sorted* set of letters, so every vertex of a Rauzy class shares the same
basis for the matrices built in :mod:`rauzy_lab.cocycle`, and the class built
from any seed vertex compares equal to the class built from any other.

Text formats::

    top=ABCD;bottom=DCBA        # permutation pair (``ABCD/DCBA`` also accepted)
    start:top=AB;bottom=BA|moves:tbtbb
"""
from __future__ import annotations

import enum
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from .errors import (DuplicateLetter, LengthMismatch, NotALoop, ParseError,
                     ReduciblePair)

__all__ = [
    "Alphabet", "MoveType", "TOP", "BOTTOM", "PermutationPair", "RauzyArrow",
    "RauzyPath", "RauzyClass", "make_pair", "parse_pair", "parse_path",
    "is_irreducible", "apply_move", "rauzy_class", "end_vertex",
    "contains_subpath", "is_complete", "is_k_complete", "greedy_complete_cuts",
    "is_neat",
]


class MoveType(enum.Enum):
    TOP = "t"
    BOTTOM = "b"

    @property
    def other(self) -> "MoveType":
        return BOTTOM if self is TOP else TOP

    @classmethod
    def parse(cls, ch: str) -> "MoveType":
        try:
            return _MOVE_CHARS[ch.lower()]
        except KeyError:
            raise ParseError(f"unknown move {ch!r}; expected 't' or 'b'") from None

    def __repr__(self):
        return f"MoveType.{self.name}"


TOP = MoveType.TOP
BOTTOM = MoveType.BOTTOM
_MOVE_CHARS = {"t": TOP, "b": BOTTOM}
# Deterministic enumeration order used by every search in the package.
MOVES = (TOP, BOTTOM)


@dataclass(frozen=True)
class Alphabet:
    letters: tuple

    def __post_init__(self):
        if len(set(self.letters)) != len(self.letters):
            raise DuplicateLetter(f"repeated letters in {self.letters!r}")
        if len(self.letters) < 2:
            raise LengthMismatch("an alphabet needs at least two letters")

    @cached_property
    def index(self) -> dict:
        return {a: i for i, a in enumerate(self.letters)}

    def __len__(self):
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)


@dataclass(frozen=True)
class PermutationPair:
    alphabet: Alphabet
    top: tuple
    bottom: tuple

    @property
    def d(self) -> int:
        return len(self.alphabet)

    @cached_property
    def top_pos(self) -> dict:
        """Letter -> 1-based position in the top row."""
        return {a: i + 1 for i, a in enumerate(self.top)}

    @cached_property
    def bottom_pos(self) -> dict:
        return {a: i + 1 for i, a in enumerate(self.bottom)}

    def text(self) -> str:
        return f"top={''.join(map(str, self.top))};bottom={''.join(map(str, self.bottom))}"

    def short(self) -> str:
        return f"{''.join(map(str, self.top))}/{''.join(map(str, self.bottom))}"

    def __str__(self):
        return self.short()

    def __repr__(self):
        return f"PermutationPair({self.short()})"


def make_pair(top: Sequence, bottom: Sequence) -> PermutationPair:
    """Build a pair from two rows.  Strings are split into single letters."""
    top, bottom = tuple(top), tuple(bottom)
    if len(top) != len(bottom):
        raise LengthMismatch(f"rows have lengths {len(top)} and {len(bottom)}")
    if len(set(top)) != len(top) or len(set(bottom)) != len(bottom):
        raise DuplicateLetter("a row repeats a letter")
    if set(top) != set(bottom):
        raise LengthMismatch("rows use different letters")
    return PermutationPair(Alphabet(tuple(sorted(top))), top, bottom)


_PAIR_RE = re.compile(r"^\s*top=([^;]+);\s*bottom=(.+?)\s*$")


def parse_pair(text: str) -> PermutationPair:
    """Parse ``top=ABCD;bottom=DCBA`` or the short form ``ABCD/DCBA``."""
    m = _PAIR_RE.match(text)
    if m:
        return make_pair(m.group(1), m.group(2))
    if "/" in text:
        top, _, bottom = text.strip().partition("/")
        return make_pair(top, bottom)
    raise ParseError(f"cannot parse permutation pair {text!r}")


def is_irreducible(pair: PermutationPair) -> bool:
    seen_top, seen_bottom = set(), set()
    for k in range(pair.d - 1):
        seen_top.add(pair.top[k])
        seen_bottom.add(pair.bottom[k])
        if seen_top == seen_bottom:
            return False
    return True


@dataclass(frozen=True)
class RauzyArrow:
    source: PermutationPair
    move: MoveType
    target: PermutationPair
    winner: object
    loser: object

    def text(self) -> str:
        return (f"{self.source.text()} -{self.move.value}-> {self.target.text()} "
                f"winner={self.winner} loser={self.loser}")


def _relocate(row: tuple, anchor, mover) -> tuple:
    # ``mover`` is the last letter of ``row``; put it right after ``anchor``.
    rest = list(row[:-1])
    rest.insert(rest.index(anchor) + 1, mover)
    return tuple(rest)


def apply_move(pair: PermutationPair, move: MoveType) -> RauzyArrow:
    if not is_irreducible(pair):
        raise ReduciblePair(f"{pair.short()} is reducible")
    alpha, beta = pair.top[-1], pair.bottom[-1]
    if move is TOP:
        target = PermutationPair(pair.alphabet, pair.top, _relocate(pair.bottom, alpha, beta))
        return RauzyArrow(pair, move, target, alpha, beta)
    target = PermutationPair(pair.alphabet, _relocate(pair.top, beta, alpha), pair.bottom)
    return RauzyArrow(pair, move, target, beta, alpha)


@dataclass(frozen=True)
class RauzyPath:
    start: PermutationPair
    moves: tuple = ()

    def __post_init__(self):
        if isinstance(self.moves, str):
            object.__setattr__(self, "moves", tuple(MoveType.parse(c) for c in self.moves))
        else:
            object.__setattr__(self, "moves", tuple(self.moves))

    @cached_property
    def arrows(self) -> tuple:
        out, v = [], self.start
        for m in self.moves:
            a = apply_move(v, m)
            out.append(a)
            v = a.target
        return tuple(out)

    @cached_property
    def vertices(self) -> tuple:
        return (self.start,) + tuple(a.target for a in self.arrows)

    @property
    def end(self) -> PermutationPair:
        return self.vertices[-1]

    @property
    def is_loop(self) -> bool:
        return self.end == self.start

    @property
    def winners(self) -> tuple:
        return tuple(a.winner for a in self.arrows)

    def __len__(self):
        return len(self.moves)

    def __add__(self, other: "RauzyPath") -> "RauzyPath":
        if other.start != self.end:
            raise ValueError("paths do not compose: end and start differ")
        return RauzyPath(self.start, self.moves + other.moves)

    def __mul__(self, k: int) -> "RauzyPath":
        if k and not self.is_loop:
            raise NotALoop("only loops can be repeated")
        return RauzyPath(self.start, self.moves * k)

    def word(self) -> str:
        return "".join(m.value for m in self.moves)

    def text(self) -> str:
        return f"start:{self.start.text()}|moves:{self.word()}"

    def __repr__(self):
        return f"RauzyPath({self.start.short()}, {self.word()!r})"


def parse_path(text: str) -> RauzyPath:
    head, sep, tail = text.partition("|")
    if not sep or not head.startswith("start:") or not tail.startswith("moves:"):
        raise ParseError(f"cannot parse path {text!r}")
    return RauzyPath(parse_pair(head[len("start:"):]), tail[len("moves:"):].strip())


def end_vertex(path: RauzyPath) -> PermutationPair:
    return path.end


@dataclass
class RauzyClass:
    """Vertices in BFS discovery order plus the two outgoing arrows of each."""
    vertices: list
    arrows: list
    _out: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        self._out = {(a.source, a.move): a for a in self.arrows}
        self.index = {v: i for i, v in enumerate(self.vertices)}

    def __len__(self):
        return len(self.vertices)

    def __contains__(self, pair):
        return pair in self.index

    def out(self, vertex: PermutationPair, move: MoveType) -> RauzyArrow:
        return self._out[(vertex, move)]

    def incoming(self, vertex: PermutationPair) -> list:
        return [a for a in self.arrows if a.target == vertex]

    def shortest_path(self, src: PermutationPair, dst: PermutationPair) -> RauzyPath:
        """Shortest oriented path, ties broken by the Top-first move order."""
        prev = {src: None}
        queue = deque([src])
        while queue:
            v = queue.popleft()
            if v == dst:
                break
            for m in MOVES:
                w = self._out[(v, m)].target
                if w not in prev:
                    prev[w] = (v, m)
                    queue.append(w)
        moves = []
        v = dst
        while prev[v] is not None:
            v, m = prev[v]
            moves.append(m)
        return RauzyPath(src, tuple(reversed(moves)))

    def edge_list(self) -> str:
        return "\n".join(a.text() for a in self.arrows)


def rauzy_class(pair: PermutationPair) -> RauzyClass:
    if not is_irreducible(pair):
        raise ReduciblePair(f"{pair.short()} is reducible")
    seen = {pair}
    order, arrows = [pair], []
    queue = deque([pair])
    while queue:
        v = queue.popleft()
        for m in MOVES:
            a = apply_move(v, m)
            arrows.append(a)
            if a.target not in seen:
                seen.add(a.target)
                order.append(a.target)
                queue.append(a.target)
    return RauzyClass(order, arrows)


def contains_subpath(haystack: RauzyPath, needle: RauzyPath) -> list:
    """Offsets at which ``needle`` occurs in ``haystack`` (vertex-aware)."""
    n, h = len(needle.moves), haystack.moves
    if n > len(h):
        return []
    verts = haystack.vertices
    return [i for i in range(len(h) - n + 1)
            if h[i:i + n] == needle.moves and verts[i] == needle.start]


def greedy_complete_cuts(path: RauzyPath) -> list:
    """Cut positions of the greedy decomposition into complete pieces."""
    letters = set(path.start.alphabet)
    cuts, won = [], set()
    for i, w in enumerate(path.winners):
        won.add(w)
        if won == letters:
            cuts.append(i + 1)
            won = set()
    return cuts


def is_complete(path: RauzyPath) -> bool:
    return set(path.winners) == set(path.start.alphabet)


def is_k_complete(path: RauzyPath, k: int) -> bool:
    # Leftover arrows after the last greedy cut can be glued onto the last piece.
    if k < 1:
        raise ValueError("k must be positive")
    return len(greedy_complete_cuts(path)) >= k


def _require_loop(path: RauzyPath):
    if not path.is_loop:
        raise NotALoop(f"{path!r} does not return to its start")


def is_neat(path: RauzyPath) -> bool:
    """No proper nonempty prefix equals the suffix of the same length."""
    _require_loop(path)
    moves, verts = path.moves, path.vertices
    n = len(moves)
    for ell in range(1, n):
        if moves[:ell] == moves[n - ell:] and verts[0] == verts[n - ell]:
            return False
    return True


def iter_loops(start: PermutationPair, length: int) -> Iterable[RauzyPath]:
    """All loops of exactly ``length`` arrows at ``start``, Top-first order."""
    def rec(v, acc):
        if len(acc) == length:
            if v == start:
                yield RauzyPath(start, tuple(acc))
            return
        for m in MOVES:
            acc.append(m)
            yield from rec(apply_move(v, m).target, acc)
            acc.pop()
    yield from rec(start, [])
