"""Exact integer matrices attached to Rauzy paths.

Everything here works with Python integers (and :class:`fractions.Fraction`
where a rational step is unavoidable), because products of Rauzy matrices
along long paths overflow 64-bit integers almost immediately.

Conventions
-----------
``theta_of_move`` returns ``I + E[loser, winner]``.  One induction step acts on
lengths by ``lambda' = (Theta*)^{-1} lambda``, where ``*`` is the transpose, so
that for a path with arrows ``1..N``::

    Theta_path* = Theta_1* Theta_2* ... Theta_N*      (Theta_path = Theta_N ... Theta_1)

and ``(Theta_path*)^{-1} lambda`` is the result of inducing ``N`` times.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd, prod
from typing import Sequence

import numpy as np

from .errors import (DimensionMismatch, NonUnimodularForm, NotALoop,
                     NotSymplectic, OddRank, ParseError, ValidationError)
from .rauzy import Alphabet, PermutationPair, RauzyArrow, RauzyPath

__all__ = [
    "CocycleMatrix", "IntersectionMatrix", "SymplecticBasis", "SpElement",
    "theta_of_move", "theta_of_path", "theta_star_of_path",
    "theta_star_inverse_of_path", "sp_from_theta_star", "omega",
    "check_intertwining", "symplectic_basis", "induced_sp", "reduce_mod",
    "sp_order", "standard_form", "cone_constraints", "cone_contains_exact",
    "cone_extreme_rays", "parse_matrix", "format_matrix", "parse_sp",
]


# ---------------------------------------------------------------------------
# small exact helpers on tuple-of-tuple matrices

def _mul(a, b):
    bt = list(zip(*b))
    return tuple(tuple(sum(x * y for x, y in zip(row, col)) for col in bt) for row in a)


def _transpose(a):
    return tuple(zip(*a))


def _identity(n):
    return tuple(tuple(int(i == j) for j in range(n)) for i in range(n))


def _matvec(a, v):
    return tuple(sum(x * y for x, y in zip(row, v)) for row in a)


def int_det(a) -> int:
    """Determinant by fraction-free (Bareiss) elimination."""
    m = [list(r) for r in a]
    n = len(m)
    sign, prev = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[-1][-1] if n else 1


def rational_rref(rows) -> tuple[list, list]:
    """Reduced row echelon form over Q; returns (rows, pivot columns)."""
    m = [[Fraction(x) for x in r] for r in rows]
    if not m:
        return m, []
    ncols = len(m[0])
    pivots, r = [], 0
    for c in range(ncols):
        p = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m, pivots


def exact_rank(rows) -> int:
    return len(rational_rref(rows)[1])


def rational_nullspace(rows, ncols: int) -> list:
    """Basis of the rational null space, each vector scaled to primitive integers."""
    if not rows:
        return [tuple(int(i == j) for j in range(ncols)) for i in range(ncols)]
    m, pivots = rational_rref(rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for i, p in enumerate(pivots):
            v[p] = -m[i][f]
        basis.append(_primitive(v))
    return basis


def _primitive(v) -> tuple:
    den = 1
    for x in v:
        den = den * Fraction(x).denominator // gcd(den, Fraction(x).denominator)
    ints = [int(Fraction(x) * den) for x in v]
    g = 0
    for x in ints:
        g = gcd(g, x)
    return tuple(x // g for x in ints) if g else tuple(ints)


def unimodular_inverse(a):
    """Exact inverse of an integer matrix with determinant +-1."""
    n = len(a)
    aug = [list(r) + [int(i == j) for j in range(n)] for i, r in enumerate(a)]
    m, pivots = rational_rref(aug)
    if pivots[:n] != list(range(n)):
        raise ValidationError("matrix is singular")
    inv = [[m[i][n + j] for j in range(n)] for i in range(n)]
    if any(x.denominator != 1 for r in inv for x in r):
        raise ValidationError("matrix is not unimodular")
    return tuple(tuple(int(x) for x in r) for r in inv)


def _rows(x) -> tuple:
    if isinstance(x, (CocycleMatrix, IntersectionMatrix, SpElement)):
        return x.entries
    return tuple(tuple(int(v) for v in r) for r in x)


# ---------------------------------------------------------------------------
# matrix types

@dataclass(frozen=True)
class CocycleMatrix:
    entries: tuple
    basis: Alphabet

    @property
    def dim(self) -> int:
        return len(self.entries)

    @property
    def T(self) -> "CocycleMatrix":
        return CocycleMatrix(_transpose(self.entries), self.basis)

    def __matmul__(self, other):
        if isinstance(other, CocycleMatrix):
            if other.basis != self.basis:
                raise DimensionMismatch("matrices use different alphabets")
            return CocycleMatrix(_mul(self.entries, other.entries), self.basis)
        if isinstance(other, (tuple, list)) and other and not isinstance(other[0], (tuple, list)):
            return _matvec(self.entries, other)
        return NotImplemented

    def det(self) -> int:
        return int_det(self.entries)

    def inverse(self) -> "CocycleMatrix":
        return CocycleMatrix(unimodular_inverse(self.entries), self.basis)

    def __getitem__(self, ij):
        # Accepts integer indices or letters of the alphabet.
        i, j = (x if isinstance(x, int) else self.basis.index[x] for x in ij)
        return self.entries[i][j]

    def to_numpy(self, dtype=object) -> np.ndarray:
        return np.array(self.entries, dtype=dtype)

    def text(self) -> str:
        return format_matrix(self.entries)

    @classmethod
    def identity(cls, basis: Alphabet) -> "CocycleMatrix":
        return cls(_identity(len(basis)), basis)


@dataclass(frozen=True)
class IntersectionMatrix:
    entries: tuple
    basis: Alphabet

    @property
    def dim(self) -> int:
        return len(self.entries)

    def rank(self) -> int:
        return exact_rank(self.entries)

    def to_numpy(self, dtype=np.int64) -> np.ndarray:
        return np.array(self.entries, dtype=dtype)

    def form(self, x, y) -> int:
        return sum(xi * sum(o * yj for o, yj in zip(row, y)) for xi, row in zip(x, self.entries))


@dataclass(frozen=True)
class SpElement:
    """A 2g x 2g symplectic matrix, integral (``q is None``) or mod ``q``."""
    g: int
    q: int | None
    entries: tuple

    def __post_init__(self):
        n = 2 * self.g
        if len(self.entries) != n or any(len(r) != n for r in self.entries):
            raise DimensionMismatch(f"expected {n}x{n} entries")
        if self.q is not None:
            object.__setattr__(self, "entries",
                               tuple(tuple(x % self.q for x in r) for r in self.entries))

    def __matmul__(self, other: "SpElement") -> "SpElement":
        if other.g != self.g or other.q != self.q:
            raise DimensionMismatch("incompatible symplectic elements")
        return SpElement(self.g, self.q, _mul(self.entries, other.entries))

    def is_symplectic(self) -> bool:
        j = standard_form(self.g)
        lhs = _mul(_mul(_transpose(self.entries), j), self.entries)
        if self.q is None:
            return lhs == j
        return all((a - b) % self.q == 0 for ra, rb in zip(lhs, j) for a, b in zip(ra, rb))

    def inverse(self) -> "SpElement":
        # M^{-1} = J^{-1} M^T J = -J M^T J for symplectic M.
        j = standard_form(self.g)
        inv = _mul(_mul(j, _transpose(self.entries)), j)
        return SpElement(self.g, self.q, tuple(tuple(-x for x in r) for r in inv))

    def to_numpy(self, dtype=np.int64) -> np.ndarray:
        return np.array(self.entries, dtype=dtype)

    def text(self) -> str:
        return f"g={self.g};q={'inf' if self.q is None else self.q}\n{format_matrix(self.entries)}"

    @classmethod
    def identity(cls, g: int, q: int | None = None) -> "SpElement":
        return cls(g, q, _identity(2 * g))


def standard_form(g: int) -> tuple:
    """J0 = [[0, I], [-I, 0]], so that omega(a_i, b_i) = 1."""
    n = 2 * g
    return tuple(tuple(1 if j == i + g and i < g else -1 if i == j + g and j < g else 0
                       for j in range(n)) for i in range(n))


def format_matrix(entries) -> str:
    return ";".join(",".join(str(int(x)) for x in r) for r in entries)


def parse_matrix(text: str) -> tuple:
    try:
        rows = tuple(tuple(int(x) for x in r.split(",")) for r in text.strip().split(";"))
    except ValueError as exc:
        raise ParseError(f"bad matrix entry in {text!r}") from exc
    if len({len(r) for r in rows}) != 1:
        raise ParseError("ragged matrix")
    return rows


def parse_sp(text: str) -> SpElement:
    head, _, body = text.strip().partition("\n")
    try:
        fields = dict(kv.split("=") for kv in head.split(";"))
        g = int(fields["g"])
        q = None if fields["q"] == "inf" else int(fields["q"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad SpElement header {head!r}") from exc
    return SpElement(g, q, parse_matrix(body))


# ---------------------------------------------------------------------------
# Theta and Omega

def theta_of_move(arrow: RauzyArrow) -> CocycleMatrix:
    basis = arrow.source.alphabet
    ix = basis.index
    m = [list(r) for r in _identity(len(basis))]
    m[ix[arrow.loser]][ix[arrow.winner]] = 1
    return CocycleMatrix(tuple(map(tuple, m)), basis)


def theta_star_of_path(path: RauzyPath) -> CocycleMatrix:
    """Theta_path* computed by column updates (column loser += column winner)."""
    basis = path.start.alphabet
    ix = basis.index
    m = [list(r) for r in _identity(len(basis))]
    for a in path.arrows:
        w, l = ix[a.winner], ix[a.loser]
        for row in m:
            row[l] += row[w]
    return CocycleMatrix(tuple(map(tuple, m)), basis)


def theta_of_path(path: RauzyPath) -> CocycleMatrix:
    return theta_star_of_path(path).T


def theta_star_inverse_of_path(path: RauzyPath) -> CocycleMatrix:
    """(Theta_path*)^{-1}, i.e. the linear map 'induce along the path'."""
    basis = path.start.alphabet
    ix = basis.index
    m = [list(r) for r in _identity(len(basis))]
    for a in path.arrows:
        w, l = ix[a.winner], ix[a.loser]
        m[w] = [x - y for x, y in zip(m[w], m[l])]
    return CocycleMatrix(tuple(map(tuple, m)), basis)


def omega(pair: PermutationPair) -> IntersectionMatrix:
    letters = pair.alphabet.letters
    pt, pb = pair.top_pos, pair.bottom_pos
    rows = []
    for a in letters:
        row = []
        for b in letters:
            if pt[a] > pt[b] and pb[a] < pb[b]:
                row.append(1)
            elif pt[a] < pt[b] and pb[a] > pb[b]:
                row.append(-1)
            else:
                row.append(0)
        rows.append(tuple(row))
    return IntersectionMatrix(tuple(rows), pair.alphabet)


def check_intertwining(arrow: RauzyArrow) -> bool:
    th = theta_of_move(arrow).entries
    lhs = _mul(_mul(th, omega(arrow.source).entries), _transpose(th))
    return lhs == omega(arrow.target).entries


# ---------------------------------------------------------------------------
# symplectic reduction

@dataclass(frozen=True)
class SymplecticBasis:
    pair: PermutationPair
    genus: int
    lift: tuple          # d x 2g, columns a_1..a_g, b_1..b_g in Z^A
    projection: tuple    # 2g x d, kills ker(Omega) and inverts ``lift``
    kernel: tuple        # d x (d-2g), columns span ker(Omega) over Z
    form: tuple          # J0

    def project(self, v: Sequence[int]) -> tuple:
        return _matvec(self.projection, v)


def _column_echelon(a):
    """Unimodular U, V=U^{-1} with the trailing columns of a @ U equal to zero.

    Returns (U, V, rank).  Column operations are mirrored as inverse row
    operations on V so no inversion is needed afterwards.
    """
    nr, nc = len(a), len(a[0])
    m = [list(r) for r in a]
    u = [[int(i == j) for j in range(nc)] for i in range(nc)]
    v = [[int(i == j) for j in range(nc)] for i in range(nc)]

    def addcol(dst, src, k):       # col_dst -= k * col_src
        for M in (m, u):
            for row in M:
                row[dst] -= k * row[src]
        v[src] = [x + k * y for x, y in zip(v[src], v[dst])]

    def swapcol(i, j):
        for M in (m, u):
            for row in M:
                row[i], row[j] = row[j], row[i]
        v[i], v[j] = v[j], v[i]

    piv = 0
    for r in range(nr):
        if piv == nc:
            break
        while True:
            nz = [c for c in range(piv, nc) if m[r][c] != 0]
            if not nz:
                break
            c0 = min(nz, key=lambda c: abs(m[r][c]))
            if c0 != piv:
                swapcol(piv, c0)
            done = True
            for c in range(piv + 1, nc):
                if m[r][c]:
                    addcol(c, piv, m[r][c] // m[r][piv])
                    if m[r][c]:
                        done = False
            if done:
                piv += 1
                break
    return u, v, piv


def _symplectic_gram_schmidt(gram):
    """Integer change of basis T with T^T G T = J0 for unimodular antisymmetric G."""
    n = len(gram)
    vecs = [tuple(int(i == j) for j in range(n)) for i in range(n)]

    def w(x, y):
        return sum(xi * gram[i][j] * y[j] for i, xi in enumerate(x) if xi for j in range(n))

    a_list, b_list = [], []
    while vecs:
        a, rest = vecs[0], vecs[1:]
        # Euclid on the pairings omega(a, rest) by unimodular moves inside ``rest``.
        while True:
            vals = [w(a, x) for x in rest]
            nz = [i for i, x in enumerate(vals) if x]
            if not nz:
                raise NonUnimodularForm("degenerate induced form")
            i0 = min(nz, key=lambda i: abs(vals[i]))
            changed = False
            for i in nz:
                if i != i0:
                    k = vals[i] // vals[i0]
                    rest[i] = tuple(x - k * y for x, y in zip(rest[i], rest[i0]))
                    changed = True
            if not changed:
                break
        val = vals[i0]
        if abs(val) != 1:
            raise NonUnimodularForm(f"induced form is not unimodular (pairing {val})")
        partner = rest.pop(i0)
        if val == 1:
            b = partner
        else:
            # Prefer swapping roles over negating: keeps torus matrices upper triangular.
            a, b = partner, a
        new_rest = []
        for x in rest:
            wb, wa = w(x, b), w(x, a)
            new_rest.append(tuple(xi - wb * ai + wa * bi for xi, ai, bi in zip(x, a, b)))
        a_list.append(a)
        b_list.append(b)
        vecs = new_rest
    cols = a_list + b_list
    return _transpose(cols)


@lru_cache(maxsize=None)
def symplectic_basis(pair: PermutationPair) -> SymplecticBasis:
    om = omega(pair).entries
    d = len(om)
    u, v, rank = _column_echelon(om)
    if rank % 2:
        raise OddRank(f"rank {rank} of Omega is odd")
    g = rank // 2
    comp = tuple(tuple(u[i][j] for j in range(rank)) for i in range(d))
    kernel = tuple(tuple(u[i][j] for j in range(rank, d)) for i in range(d))
    gram = _mul(_mul(_transpose(comp), om), comp)
    if abs(int_det(gram)) != 1:
        raise NonUnimodularForm(f"det of induced form is {int_det(gram)}")
    t = _symplectic_gram_schmidt(gram)
    lift = _mul(comp, t)
    proj = _mul(unimodular_inverse(t), tuple(tuple(r) for r in v[:rank]))
    j0 = standard_form(g)
    if _mul(_mul(_transpose(lift), om), lift) != j0:
        raise NonUnimodularForm("symplectic reduction did not reach J0")
    return SymplecticBasis(pair, g, lift, proj, kernel, j0)


def induced_sp(path: RauzyPath, basis: SymplecticBasis | None = None) -> SpElement:
    if not path.is_loop:
        raise NotALoop(f"{path!r} is not a loop")
    if basis is None:
        basis = symplectic_basis(path.start)
    elif basis.pair != path.start:
        raise NotSymplectic("basis belongs to a different vertex")
    th = theta_star_of_path(path).entries
    m = _mul(_mul(basis.projection, th), basis.lift)
    el = SpElement(basis.genus, None, m)
    if not el.is_symplectic():
        raise NotSymplectic("induced matrix fails M^T J0 M = J0")
    return el


def sp_from_theta_star(theta_star, basis: SymplecticBasis) -> SpElement:
    """Same as :func:`induced_sp` for a precomputed Theta* (no checks)."""
    return SpElement(basis.genus, None, _mul(_mul(basis.projection, _rows(theta_star)), basis.lift))


def reduce_mod(m: SpElement, q: int) -> SpElement:
    if q < 2:
        raise ValidationError("modulus must be at least 2")
    return SpElement(m.g, q, m.entries)


def factorize(q: int) -> dict:
    from sympy import factorint
    return {int(p): int(r) for p, r in factorint(q).items()}


def sp_order(g: int, q: int) -> int:
    if q < 2:
        raise ValidationError("modulus must be at least 2")
    total = 1
    for p, r in factorize(q).items():
        total *= p ** ((r - 1) * g * (2 * g + 1)) * p ** (g * g) * prod(p ** (2 * i) - 1 for i in range(1, g + 1))
    return total


# ---------------------------------------------------------------------------
# the cone of admissible heights

def cone_constraints(pair: PermutationPair) -> tuple:
    """Rows c with tau in K_pi  <=>  c . tau > 0 for every row."""
    letters = pair.alphabet.letters
    rows = []
    for k in range(1, pair.d):
        rows.append(tuple(int(pair.top_pos[x] <= k) for x in letters))
        rows.append(tuple(-int(pair.bottom_pos[x] <= k) for x in letters))
    return tuple(rows)


def cone_contains_exact(pair: PermutationPair, tau) -> bool:
    return all(v > 0 for v in _matvec(cone_constraints(pair), tau))


@lru_cache(maxsize=None)
def cone_extreme_rays(pair: PermutationPair) -> tuple:
    """Extreme rays of the closed cone, as primitive integer vectors.

    Enumerates every (d-1)-subset of tight constraints; a one-dimensional
    solution set that satisfies the remaining inequalities is a ray.  Returns
    an empty tuple if the closed cone is not pointed.
    """
    cons = cone_constraints(pair)
    d = pair.d
    if exact_rank(cons) < d:
        return ()
    rays = set()
    for sub in itertools.combinations(range(len(cons)), d - 1):
        ns = rational_nullspace([cons[i] for i in sub], d)
        if len(ns) != 1:
            continue
        r = ns[0]
        for cand in (r, tuple(-x for x in r)):
            if all(v >= 0 for v in _matvec(cons, cand)):
                rays.add(cand)
    return tuple(sorted(rays))
