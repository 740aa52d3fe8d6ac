"""Rauzy-Veech groups: loop generators, mod-q images and Cayley-graph gaps."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .cocycle import SpElement, induced_sp, sp_order, symplectic_basis
from .errors import CapExceeded, NotSurjective, ValidationError
from .finite_group import DEFAULT_CAP, MatrixGroup, as_mod_array, enumerate_group
from .rauzy import MOVES, PermutationPair, RauzyClass, RauzyPath, rauzy_class
from .selection import make_upsilon

log = logging.getLogger(__name__)

__all__ = ["RVGroupSpec", "CayleyGap", "spanning_tree_loops", "rv_generators",
           "make_upsilon", "mod_q_closure", "cayley_gap", "dense_gap",
           "invariance_defect", "symmetrize"]


@dataclass
class RVGroupSpec:
    base: PermutationPair
    generators: list          # (RauzyPath, SpElement) pairs
    label: str = ""

    @property
    def loops(self) -> list:
        return [p for p, _ in self.generators]

    @property
    def matrices(self) -> list:
        return [m for _, m in self.generators]


@dataclass
class CayleyGap:
    q: int
    generating_set: list
    group_order: int
    lambda1: float
    iterations: int
    residual: float = 0.0
    method: str = "power"


def _tree_paths(cls: RauzyClass, base: PermutationPair, reverse: bool) -> dict:
    """BFS tree paths: base -> v (out-tree) or v -> base (in-tree)."""
    paths = {base: ()}
    queue = deque([base])
    if reverse:
        incoming = {}
        for a in cls.arrows:
            incoming.setdefault(a.target, []).append(a)
    while queue:
        v = queue.popleft()
        if not reverse:
            for m in MOVES:
                w = cls.out(v, m).target
                if w not in paths:
                    paths[w] = paths[v] + (m,)
                    queue.append(w)
        else:
            for a in sorted(incoming.get(v, []), key=lambda a: (cls.index[a.source], a.move.value)):
                if a.source not in paths:
                    paths[a.source] = (a.move,) + paths[v]
                    queue.append(a.source)
    return paths


def spanning_tree_loops(cls: RauzyClass, base: PermutationPair) -> list:
    """Loops at ``base`` generating the fundamental group of the diagram.

    With ``T_v`` the out-tree path base -> v and ``R_v`` the in-tree path
    v -> base, the loops are ``T_u e R_v`` for each non-tree arrow ``e: u -> v``
    together with the ``T_v R_v`` (skipping the empty one at the base).
    """
    out_tree = _tree_paths(cls, base, reverse=False)
    in_tree = _tree_paths(cls, base, reverse=True)
    tree_arrows = set()
    for v, moves in out_tree.items():
        if moves:
            tree_arrows.add((RauzyPath(base, moves[:-1]).end, moves[-1]))
    loops = []
    for a in cls.arrows:
        if (a.source, a.move) in tree_arrows:
            continue
        loops.append(out_tree[a.source] + (a.move,) + in_tree[a.target])
    for v in cls.vertices:
        w = out_tree[v] + in_tree[v]
        if w:
            loops.append(w)
    return [RauzyPath(base, m) for m in dict.fromkeys(loops)]


def rv_generators(pair: PermutationPair, base: PermutationPair | None = None) -> RVGroupSpec:
    cls = rauzy_class(pair)
    base = base or pair
    basis = symplectic_basis(base)
    gens = [(p, induced_sp(p, basis)) for p in spanning_tree_loops(cls, base)]
    return RVGroupSpec(base, gens, base.short())


def _genus(generators) -> int:
    m = generators[0]
    return m.g if isinstance(m, SpElement) else len(m) // 2


def mod_q_closure(generators, q: int, cap: int = DEFAULT_CAP, *, return_group: bool = False):
    """``(size, surjective)`` of the subgroup of Sp_{2g}(Z/q) generated by
    the reduced generators."""
    if q < 2:
        raise ValidationError("q must be at least 2")
    generators = list(generators)
    g = _genus(generators)
    full = sp_order(g, q)
    if full > cap:
        raise CapExceeded(f"|Sp_{2*g}(Z/{q})| = {full} exceeds cap {cap}")
    group = enumerate_group(generators, q, cap)
    size = len(group)
    result = (size, size == full)
    return result + (group,) if return_group else result


def symmetrize(group: MatrixGroup, generators) -> np.ndarray:
    """Distinct group indices of the generators and their inverses."""
    idx = group.index(as_mod_array(list(generators), group.q))
    idx = np.concatenate([idx, group.inverse_indices[idx]])
    return np.array(sorted(set(idx.tolist())), dtype=np.int64)


def _averaging_operator(group: MatrixGroup, sym: np.ndarray):
    perms = [group.right_perm(group.elements[s]) for s in sym]

    def apply(f):
        acc = np.zeros_like(f)
        for p in perms:
            acc += f[p]
        return acc / len(perms)
    return apply


def cayley_gap(generators, q: int, *, seed: int = 0, tol: float = 1e-8,
               max_iter: int = 100_000, cap: int = DEFAULT_CAP,
               group: MatrixGroup | None = None) -> CayleyGap:
    """Second-smallest eigenvalue of ``I - (1/|S|) sum_s R(s)``, S symmetric.

    Power iteration runs on ``(I + A)/2`` restricted to mean-zero functions,
    whose top eigenvalue is ``1 - lambda1/2``.  If it has not reached the
    residual ``tol`` after ``max_iter`` steps, a Lanczos solve on the same
    operator finishes the job and ``method`` records that.
    """
    generators = list(generators)
    if group is None:
        size, surj, group = mod_q_closure(generators, q, cap, return_group=True)
        if not surj:
            raise NotSurjective(f"generators do not surject onto level {q}")
    sym = symmetrize(group, generators)
    avg = _averaging_operator(group, sym)
    n = len(group)
    if n == 1:
        return CayleyGap(q, [group.to_sp(i) for i in sym], n, 0.0, 0, 0.0)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v -= v.mean()
    v /= np.linalg.norm(v)
    mu, resid, it = 0.0, np.inf, 0
    for it in range(1, max_iter + 1):
        w = 0.5 * (v + avg(v))
        w -= w.mean()
        mu = float(v @ w)
        resid = float(np.linalg.norm(w - mu * v))
        nw = np.linalg.norm(w)
        if resid < tol or nw == 0:
            break
        v = w / nw
    method = "power"
    if resid >= tol:
        log.info("power iteration stalled at residual %.2e; switching to Lanczos", resid)
        op = LinearOperator((n, n), matvec=lambda x: (lambda y: y - y.mean())(0.5 * (x + avg(x - x.mean()))),
                            dtype=float)
        vals, vecs = eigsh(op, k=1, which="LA", v0=v, tol=tol * 1e-2)
        mu = float(vals[0])
        x = vecs[:, 0]
        resid = float(np.linalg.norm(op.matvec(x) - mu * x))
        method = "lanczos"
    lam1 = 2.0 * (1.0 - mu)
    return CayleyGap(q, [group.to_sp(i) for i in sym], n, lam1, it, resid, method)


def dense_gap(group: MatrixGroup, generators) -> float:
    """Reference value of the normalized Laplacian gap via ``numpy.linalg.eigh``."""
    sym = symmetrize(group, generators)
    n = len(group)
    a = np.zeros((n, n))
    for s in sym:
        p = group.right_perm(group.elements[s])
        a[np.arange(n), p] += 1.0 / len(sym)
    lap = np.eye(n) - a
    vals = np.linalg.eigvalsh(0.5 * (lap + lap.T))
    return float(vals[1])


def invariance_defect(phi: np.ndarray, sigma, group: MatrixGroup) -> float:
    """max over g in sigma of ||g.phi - phi||, with (g.phi)(x) = phi(g^{-1} x)."""
    phi = np.asarray(phi)
    if phi.shape != (len(group),):
        raise ValidationError("phi must be indexed by the group elements")
    idx = group.index(as_mod_array(list(sigma), group.q))
    best = 0.0
    for s in idx:
        p = group.left_perm(group.elements[group.inverse_indices[s]])
        best = max(best, float(np.linalg.norm(phi[p] - phi)))
    return best
