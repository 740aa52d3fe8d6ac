"""Strong positivity and the choice of the distinguished loop ``gamma0``.

``gamma0`` is a loop at a base vertex that is

* strongly positive: every entry of its Rauzy matrix is >= 1 and the inverse
  transpose maps the closed height cone (minus the origin) into the open cone;
* neat: it cannot overlap itself, so its occurrences in any path are disjoint;
* avoided: no loop in a prescribed finite set ``upsilon`` contains it.

Loops starting with ``gamma0`` and containing no other copy of it (until the
next one) are the branches of the first-return map used everywhere else.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .cocycle import (SpElement, cone_contains_exact, cone_extreme_rays,
                      induced_sp, symplectic_basis, theta_star_inverse_of_path,
                      theta_star_of_path)
from .errors import ConstructionFailed, NotALoop, ValidationError
from .rauzy import (BOTTOM, MOVES, TOP, PermutationPair, RauzyClass, RauzyPath,
                    apply_move, contains_subpath, is_complete, is_neat,
                    iter_loops)

__all__ = ["PathSelection", "is_strongly_positive", "make_upsilon",
           "build_gamma0", "make_selection", "enumerate_adapted", "enumerate_adapted_by_norm",
           "complete_loop_ending_bottom"]


def is_strongly_positive(path: RauzyPath) -> bool:
    if not path.is_loop:
        raise NotALoop(f"{path!r} is not a loop")
    ts = theta_star_of_path(path).entries
    if any(x < 1 for row in ts for x in row):
        return False
    rays = cone_extreme_rays(path.start)
    if not rays:
        return False
    inv = theta_star_inverse_of_path(path)
    return all(cone_contains_exact(path.start, inv @ r) for r in rays)


def _check_common_base(paths) -> PermutationPair | None:
    bases = {p.start for p in paths}
    if len(bases) > 1:
        raise ValidationError("loops do not share a base vertex")
    for p in paths:
        if not p.is_loop:
            raise NotALoop(f"{p!r} is not a loop")
    return next(iter(bases), None)


def make_upsilon(upsilon0, gamma0: RauzyPath | None = None):
    """Return ``(upsilon, sigma)``.

    ``upsilon`` adds the square of each loop.  ``sigma`` holds the integral
    symplectic matrices ``Theta_g* (Theta_h*)^{-1}`` for ``g, h`` in upsilon.
    When ``gamma0`` is given the loops are prefixed by it, which conjugates
    every element of ``sigma`` by ``Theta_gamma0*``.
    """
    upsilon0 = list(dict.fromkeys(upsilon0))
    base = _check_common_base(upsilon0)
    if base is None:
        return [], []
    upsilon = list(dict.fromkeys(upsilon0 + [g + g for g in upsilon0]))
    basis = symplectic_basis(base)
    pre = [(gamma0 + g) if gamma0 is not None else g for g in upsilon]
    mats = [induced_sp(g, basis) for g in pre]
    inv = [m.inverse() for m in mats]
    sigma = list(dict.fromkeys(a @ b for a in mats for b in inv))
    return upsilon, sigma


@dataclass
class PathSelection:
    gamma0: RauzyPath
    upsilon0: list = field(default_factory=list)
    upsilon: list = field(default_factory=list)
    sigma_set: list = field(default_factory=list)

    @property
    def base(self) -> PermutationPair:
        return self.gamma0.start

    def gamma0_upsilon(self) -> list:
        return [self.gamma0 + g for g in self.upsilon]


def complete_loop_ending_bottom(cls: RauzyClass, base: PermutationPair) -> RauzyPath:
    """Shortest complete loop at ``base`` whose last arrow is a Bottom arrow."""
    full = frozenset(base.alphabet)
    start = (base, frozenset(), None)
    prev = {start: None}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        v, won, last = state
        if v == base and won == full and last is BOTTOM:
            moves = []
            while prev[state] is not None:
                state, m = prev[state]
                moves.append(m)
            return RauzyPath(base, tuple(reversed(moves)))
        for m in MOVES:
            a = cls.out(v, m)
            nxt = (a.target, won | {a.winner}, m)
            if nxt not in prev:
                prev[nxt] = (state, m)
                queue.append(nxt)
    raise ConstructionFailed("no complete loop ending in a Bottom arrow")


def _verify(gamma0: RauzyPath, upsilon) -> str | None:
    if not is_strongly_positive(gamma0):
        return "strongly positive"
    if not is_neat(gamma0):
        return "neat"
    for g in upsilon:
        if contains_subpath(g, gamma0):
            return "upsilon avoidance"
    return None


def _shortest_loop(base: PermutationPair, max_len: int) -> RauzyPath | None:
    for n in range(1, max_len + 1):
        for loop in iter_loops(base, n):
            if is_neat(loop) and is_strongly_positive(loop):
                return loop
    return None


def _return_paths(cls: RauzyClass, src: PermutationPair, dst: PermutationPair, depth: int):
    """All paths src -> dst of length <= depth, by length then Top-first order."""
    frontier = [((), src)]
    for n in range(depth + 1):
        for moves, v in frontier:
            if v == dst:
                yield moves
        if n == depth:
            return
        frontier = [(moves + (m,), cls.out(v, m).target) for moves, v in frontier for m in MOVES]


def build_gamma0(cls: RauzyClass, base: PermutationPair, upsilon=(), *,
                 shortest_search_len: int = 14, depth_cap: int | None = None) -> PathSelection:
    """Choose ``gamma0`` at ``base`` avoided by every loop of ``upsilon``.

    ``upsilon`` here is the *final* set (already closed under squaring; see
    :func:`make_upsilon`).  With an empty set the shortest strongly positive
    neat loop (Top-first order) is returned when one exists within
    ``shortest_search_len`` arrows.  Otherwise the loop is assembled as
    ``gamma' gamma_*^k`` where ``gamma_*`` is a complete loop ending in Bottom
    and ``gamma'`` opens with a long run of Top arrows, which forces neatness.
    """
    if base not in cls:
        raise ValidationError(f"{base.short()} is not in the class")
    upsilon = list(upsilon)
    _check_common_base(upsilon)
    if upsilon and upsilon[0].start != base:
        raise ValidationError("upsilon loops are not based at base")

    if not upsilon:
        loop = _shortest_loop(base, shortest_search_len)
        if loop is not None:
            return PathSelection(loop)

    gstar = complete_loop_ending_bottom(cls, base)
    d, nrr = base.d, len(cls)
    longest = max((len(g) for g in upsilon), default=0)
    k = max(3 * d - 4, math.ceil(longest / len(gstar)), 1)
    n_top = len(gstar) * k + nrr
    head = RauzyPath(base, (TOP,) * n_top)
    if depth_cap is None:
        depth_cap = 2 * nrr
    failure = "no return path"
    for back in _return_paths(cls, head.end, base, depth_cap):
        gprime = RauzyPath(base, head.moves + back)
        gamma0 = gprime + gstar * k
        failure = _verify(gamma0, upsilon)
        if failure is None:
            return PathSelection(gamma0)
    raise ConstructionFailed(f"no candidate passed the {failure} check")


def make_selection(base: PermutationPair, gamma0: RauzyPath | None = None,
                   upsilon0=(), **kwargs) -> PathSelection:
    """``PathSelection`` with upsilon and sigma filled in.

    Without ``gamma0`` one is built (see :func:`build_gamma0`) so that it is
    avoided by the closure of ``upsilon0`` under squaring.
    """
    from .rauzy import rauzy_class
    upsilon0 = list(upsilon0)
    upsilon, _ = make_upsilon(upsilon0)
    if gamma0 is None:
        gamma0 = build_gamma0(rauzy_class(base), base, upsilon, **kwargs).gamma0
    elif gamma0.start != base or not gamma0.is_loop:
        raise ValidationError("gamma0 must be a loop at the base vertex")
    _, sigma = make_upsilon(upsilon0, gamma0)
    return PathSelection(gamma0, upsilon0, upsilon, sigma)


def _adapted_dfs(selection: PathSelection, max_len: int | None, max_norm: int | None):
    """Depth-first walk over loops gamma0.gamma', Top before Bottom.

    Yields ``(moves, theta_star)`` for each adapted loop.  A branch is cut as
    soon as a second full copy of gamma0 appears (it can never disappear) or
    a bound is exceeded; both bounds are monotone along a path.
    """
    g0 = selection.gamma0
    base, l0, m0 = g0.start, len(g0), g0.moves
    ix = base.alphabet.index
    neat = is_neat(g0)
    moves = list(m0)
    verts = list(g0.vertices)
    wl = []
    mat = [list(r) for r in theta_star_of_path(g0).entries]
    if max_norm is not None and max(map(sum, zip(*mat))) > max_norm:
        return
    if max_len is not None and max_len < l0:
        return

    def adapted() -> bool:
        if verts[-1] != base:
            return False
        if neat:
            # Interior copies were pruned; a copy straddling the final gamma0
            # would overlap it, which neatness rules out.
            return True
        path = RauzyPath(base, tuple(moves))
        return contains_subpath(path + g0, g0) == [0, len(moves)]

    if adapted():
        yield tuple(moves), tuple(map(tuple, mat))
    stack = [0]
    while stack:
        k = stack[-1]
        if k == len(MOVES) or (max_len is not None and len(moves) >= max_len):
            stack.pop()
            if stack:
                w, l = wl.pop()
                for row in mat:
                    row[l] -= row[w]
                moves.pop()
                verts.pop()
            continue
        stack[-1] += 1
        m = MOVES[k]
        a = apply_move(verts[-1], m)
        w, l = ix[a.winner], ix[a.loser]
        if max_norm is not None and sum(row[l] + row[w] for row in mat) > max_norm:
            continue
        n = len(moves) + 1
        if n >= l0 and verts[n - l0] == base and tuple(moves[n - l0:]) + (m,) == m0:
            continue
        moves.append(m)
        verts.append(a.target)
        wl.append((w, l))
        for row in mat:
            row[l] += row[w]
        if adapted():
            yield tuple(moves), tuple(map(tuple, mat))
        stack.append(0)


def enumerate_adapted(selection: PathSelection, max_len: int) -> list:
    """Loops ``gamma`` with len <= max_len whose only gamma0-occurrences in
    ``gamma.gamma0`` are the prefix and the suffix, in Top < Bottom
    lexicographic order."""
    base = selection.base
    return [RauzyPath(base, m) for m, _ in _adapted_dfs(selection, max_len, None)]


def enumerate_adapted_by_norm(selection: PathSelection, max_norm: int) -> list:
    """Adapted loops whose matrix ``Theta*`` has max column sum <= max_norm.

    Returns ``(path, theta_star)`` pairs with ``theta_star`` a nested tuple,
    in Top < Bottom lexicographic order.
    """
    base = selection.base
    return [(RauzyPath(base, m), t) for m, t in _adapted_dfs(selection, None, max_norm)]
