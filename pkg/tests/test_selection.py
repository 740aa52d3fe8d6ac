import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rauzy_lab.cocycle import SpElement, induced_sp, theta_star_of_path
from rauzy_lab.errors import NotALoop, ValidationError
from rauzy_lab.rauzy import (MOVES, RauzyPath, contains_subpath, is_k_complete,
                             is_neat, iter_loops, parse_pair, rauzy_class)
from rauzy_lab.rvgroup import spanning_tree_loops
from rauzy_lab.selection import (PathSelection, build_gamma0, complete_loop_ending_bottom,
                                 enumerate_adapted, enumerate_adapted_by_norm,
                                 is_strongly_positive, make_selection, make_upsilon)

from conftest import all_classes


def test_strong_positivity_torus(torus):
    assert not is_strongly_positive(RauzyPath(torus, "t"))
    assert is_strongly_positive(RauzyPath(torus, "tb"))
    with pytest.raises(NotALoop):
        is_strongly_positive(RauzyPath(parse_pair("ABCD/DCBA"), "t"))


@given(st.text(alphabet="tb", max_size=14))
def test_two_complete_torus_loops_are_strongly_positive(word):
    path = RauzyPath(parse_pair("AB/BA"), word)
    if is_k_complete(path, 2):
        assert is_strongly_positive(path)


def _random_k_complete_loop(cls, base, k, rng):
    moves, v = [], base
    path = RauzyPath(base, ())
    while not is_k_complete(path, k):
        m = MOVES[rng.integers(2)]
        moves.append(m)
        v = cls.out(v, m).target
        path = RauzyPath(base, tuple(moves))
    back = cls.shortest_path(v, base)
    return path + back


@pytest.mark.parametrize("cls_index", range(8))
def test_k_complete_loops_are_strongly_positive(cls_index):
    classes = all_classes(5)
    if cls_index >= len(classes):
        pytest.skip("fewer classes")
    cls = classes[cls_index]
    base = cls.vertices[0]
    k = 3 * base.d - 4
    rng = np.random.default_rng(cls_index)
    for _ in range(3):
        loop = _random_k_complete_loop(cls, base, k, rng)
        assert loop.is_loop and is_k_complete(loop, k)
        assert is_strongly_positive(loop)


def test_make_upsilon_single_loop(torus):
    g = RauzyPath(torus, "tbb")
    ups, sigma = make_upsilon([g])
    assert ups == [g, g + g]
    m = induced_sp(g)
    assert m in sigma and m.inverse() in sigma and SpElement.identity(1) in sigma
    assert make_upsilon([]) == ([], [])


def test_make_upsilon_torus_elementary(torus):
    _, sigma = make_upsilon([RauzyPath(torus, "t"), RauzyPath(torus, "b")])
    assert SpElement(1, None, ((1, 1), (0, 1))) in sigma
    assert SpElement(1, None, ((1, 0), (1, 1))) in sigma


def test_make_upsilon_gamma0_conjugates(torus):
    ups0 = [RauzyPath(torus, "t"), RauzyPath(torus, "b")]
    g0 = RauzyPath(torus, "tb")
    _, plain = make_upsilon(ups0)
    _, conj = make_upsilon(ups0, g0)
    c = induced_sp(g0)
    assert set(conj) == {c @ s @ c.inverse() for s in plain}


def test_make_upsilon_rejects_mixed_bases(torus, hyper4):
    with pytest.raises(ValidationError):
        make_upsilon([RauzyPath(torus, "t"), RauzyPath(hyper4, "tttt")])


def _check_selection(sel):
    g0 = sel.gamma0
    assert is_strongly_positive(g0)
    assert is_neat(g0)
    for u in sel.upsilon:
        assert contains_subpath(u, g0) == []


def test_build_gamma0_torus_upsilon(torus):
    ups = [RauzyPath(torus, w) for w in ("t", "b", "tt", "bb")]
    sel = build_gamma0(rauzy_class(torus), torus, ups)
    sel = PathSelection(sel.gamma0, [], ups)
    assert len(sel.gamma0) >= 3
    _check_selection(sel)


def test_build_gamma0_empty_upsilon_is_shortest(torus):
    assert build_gamma0(rauzy_class(torus), torus).gamma0.word() == "tb"


@pytest.mark.parametrize("text", ["AB/BA", "ABCD/DCBA"])
def test_build_gamma0_spanning_tree_upsilon(text):
    pair = parse_pair(text)
    loops = spanning_tree_loops(rauzy_class(pair), pair)
    sel = make_selection(pair, None, loops)
    assert sel.upsilon0 == loops
    assert len(sel.upsilon) == 2 * len(loops)
    _check_selection(sel)
    assert sel.sigma_set


def test_build_gamma0_base_outside_class(torus, hyper4):
    with pytest.raises(ValidationError):
        build_gamma0(rauzy_class(torus), hyper4)


def test_complete_loop_ending_bottom(hyper4):
    g = complete_loop_ending_bottom(rauzy_class(hyper4), hyper4)
    assert g.is_loop and g.moves[-1].value == "b"
    assert set(g.winners) == set(hyper4.alphabet)


def _adapted_oracle(sel, max_len):
    g0 = sel.gamma0
    out = []
    for n in range(1, max_len + 1):
        for loop in iter_loops(sel.base, n):
            if contains_subpath(loop + g0, g0) == [0, len(loop)]:
                out.append(loop)
    return sorted(out, key=lambda p: tuple(m.value == "b" for m in p.moves))


def test_enumerate_adapted_small_cases(torus_sel):
    l0 = len(torus_sel.gamma0)
    assert enumerate_adapted(torus_sel, l0 - 1) == []
    assert enumerate_adapted(torus_sel, l0) == [torus_sel.gamma0]


@pytest.mark.parametrize("word,text", [("tb", "AB/BA"), ("t", "AB/BA"), ("tbb", "AB/BA"),
                                       ("ttbtb", "AB/BA")])
def test_enumerate_adapted_matches_oracle(word, text):
    sel = PathSelection(RauzyPath(parse_pair(text), word))
    for extra in range(0, 6):
        max_len = len(word) + extra
        got = enumerate_adapted(sel, max_len)
        assert sorted(got, key=lambda p: p.word()) == sorted(_adapted_oracle(sel, max_len),
                                                            key=lambda p: p.word())
        # lexicographic (Top < Bottom) order
        keys = [tuple(m.value == "b" for m in p.moves) for p in got]
        assert keys == sorted(keys)


def test_enumerate_adapted_hyperelliptic_oracle(hyper4_sel):
    max_len = len(hyper4_sel.gamma0) + 4
    got = {p.moves for p in enumerate_adapted(hyper4_sel, max_len)}
    assert got == {p.moves for p in _adapted_oracle(hyper4_sel, max_len)}


def test_enumerate_by_norm_consistent(torus_sel):
    pairs = enumerate_adapted_by_norm(torus_sel, 60)
    assert pairs
    for path, th in pairs:
        assert theta_star_of_path(path).entries == th
        assert max(map(sum, zip(*th))) <= 60
    # every adapted loop up to length 8 with small norm is present
    present = {p.moves for p, _ in pairs}
    for p in enumerate_adapted(torus_sel, 8):
        if max(map(sum, zip(*theta_star_of_path(p).entries))) <= 60:
            assert p.moves in present
