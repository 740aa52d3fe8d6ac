import itertools

import pytest
from hypothesis import given, strategies as st

from rauzy_lab.errors import DuplicateLetter, LengthMismatch, NotALoop, ParseError, ReduciblePair
from rauzy_lab.rauzy import (BOTTOM, MOVES, TOP, MoveType, RauzyPath, apply_move,
                             contains_subpath, end_vertex, greedy_complete_cuts,
                             is_complete, is_irreducible, is_k_complete, is_neat,
                             iter_loops, make_pair, parse_pair, parse_path, rauzy_class)

from conftest import all_classes


def test_make_pair_basic():
    p = make_pair("AB", "BA")
    assert p.d == 2
    assert make_pair("ABCD", "DCBA").d == 4
    assert not is_irreducible(make_pair("AB", "AB"))


@pytest.mark.parametrize("top,bottom,exc", [("AAB", "ABA", DuplicateLetter),
                                            ("ABC", "AB", LengthMismatch)])
def test_make_pair_errors(top, bottom, exc):
    with pytest.raises(exc):
        make_pair(top, bottom)


def test_irreducibility_examples():
    assert is_irreducible(parse_pair("AB/BA"))
    assert is_irreducible(parse_pair("ABCD/DCBA"))
    assert not is_irreducible(parse_pair("ABC/BAC"))


def test_text_formats_round_trip(hyper4):
    assert parse_pair(hyper4.text()) == hyper4
    assert hyper4.text() == "top=ABCD;bottom=DCBA"
    with pytest.raises(ParseError):
        parse_pair("nonsense")
    path = RauzyPath(hyper4, "tbbt")
    assert parse_path(path.text()) == path
    assert path.text() == "start:top=ABCD;bottom=DCBA|moves:tbbt"


def test_torus_moves(torus):
    a = apply_move(torus, TOP)
    assert (a.target, a.winner, a.loser) == (torus, "B", "A")
    b = apply_move(torus, BOTTOM)
    assert (b.target, b.winner, b.loser) == (torus, "A", "B")


def test_hyperelliptic_top_move(hyper4):
    a = apply_move(hyper4, TOP)
    assert (a.winner, a.loser) == ("D", "A")
    # A is relocated right after D in the bottom row
    assert a.target == parse_pair("ABCD/DACB")


def test_move_on_reducible_pair_raises():
    with pytest.raises(ReduciblePair):
        apply_move(make_pair("AB", "AB"), TOP)


@pytest.mark.parametrize("text,n_vertices", [("AB/BA", 1), ("ABC/CBA", 3), ("ABCD/DCBA", 7),
                                             ("ABCDE/EDCBA", 15)])
def test_class_sizes(text, n_vertices):
    cls = rauzy_class(parse_pair(text))
    assert len(cls.vertices) == n_vertices
    assert len(cls.arrows) == 2 * n_vertices


def test_class_degrees_and_seed_independence():
    for cls in all_classes(5):
        for v in cls.vertices:
            assert is_irreducible(v)
            for m in MOVES:
                assert sum(1 for a in cls.arrows if a.source == v and a.move is m) == 1
                assert sum(1 for a in cls.arrows if a.target == v and a.move is m) == 1
        # reseeding from another vertex gives the same vertex set
        other = rauzy_class(cls.vertices[-1])
        assert set(other.vertices) == set(cls.vertices)


def test_edge_list_format(torus):
    lines = rauzy_class(torus).edge_list().splitlines()
    assert lines[0] == "top=AB;bottom=BA -t-> top=AB;bottom=BA winner=B loser=A"


def test_end_vertex(torus, hyper4):
    assert end_vertex(RauzyPath(torus, "")) == torus
    assert end_vertex(RauzyPath(torus, "tb")) == torus
    assert end_vertex(RauzyPath(hyper4, "t")) == apply_move(hyper4, TOP).target


def test_contains_subpath(torus):
    p = RauzyPath(torus, "tbtb")
    assert contains_subpath(p, p) == [0]
    assert contains_subpath(RauzyPath(torus, "t"), p) == []
    assert contains_subpath(p, RauzyPath(torus, "tb")) == [0, 2]


def test_neat_occurrences_are_disjoint(torus):
    g0 = RauzyPath(torus, "tb")
    assert is_neat(g0)
    for mid in ["", "t", "tt", "bbt", "tbbt"]:
        gp = RauzyPath(torus, mid)
        hay = g0 + gp + g0
        occ = contains_subpath(hay, g0)
        assert occ[0] == 0 and occ[-1] == len(g0) + len(gp)
        assert all(b - a >= len(g0) for a, b in zip(occ, occ[1:]))


def test_completeness(torus):
    assert is_complete(RauzyPath(torus, "tb"))
    assert not is_complete(RauzyPath(torus, "t"))
    assert is_k_complete(RauzyPath(torus, "tbtb"), 2)
    assert not is_k_complete(RauzyPath(torus, "tbtb"), 3)
    assert greedy_complete_cuts(RauzyPath(torus, "ttbbt")) == [3, 5]


def test_neatness_examples(torus):
    assert is_neat(RauzyPath(torus, "t"))
    assert not is_neat(RauzyPath(torus, "tt"))
    # a long Top run followed by one Bottom arrow
    assert is_neat(RauzyPath(torus, "tttb"))
    with pytest.raises(NotALoop):
        is_neat(RauzyPath(parse_pair("ABCD/DCBA"), "t"))


def _affix_oracle(path):
    n = len(path)
    return not any(path.moves[:k] == path.moves[n - k:] and path.vertices[n - k] == path.start
                   for k in range(1, n))


@given(st.text(alphabet="tb", min_size=1, max_size=12))
def test_neat_matches_affix_oracle(word):
    pair = parse_pair("AB/BA")
    path = RauzyPath(pair, word)
    assert is_neat(path) == _affix_oracle(path)


@given(st.text(alphabet="tb", max_size=10), st.text(alphabet="tb", max_size=10))
def test_concatenation_end_vertex(w1, w2):
    pair = parse_pair("ABCD/DCBA")
    p1 = RauzyPath(pair, w1)
    p2 = RauzyPath(p1.end, w2)
    assert (p1 + p2).end == p2.end
    assert (p1 + p2).moves == p1.moves + p2.moves


def test_iter_loops_counts(hyper4):
    # brute force over all words of the given length
    for n in range(1, 7):
        brute = [w for w in itertools.product(MOVES, repeat=n) if RauzyPath(hyper4, w).is_loop]
        got = [p.moves for p in iter_loops(hyper4, n)]
        assert got == brute


def test_move_type_parse():
    assert MoveType.parse("t") is TOP
    assert TOP.other is BOTTOM
