"""Finite matrix groups over Z/qZ, enumerated explicitly.

Elements are stored as an ``(N, n, n)`` int64 array in BFS discovery order
(identity first).  Each matrix also gets an integer code ``sum e_k q^k`` so
that lookups are a vectorized ``searchsorted``.
"""
from __future__ import annotations

from functools import cached_property
from itertools import product

import numpy as np

from .cocycle import SpElement, standard_form
from .errors import CapExceeded, DimensionMismatch, ModulusMismatch

__all__ = ["MatrixGroup", "enumerate_group", "sp_standard_generators",
           "reduction_map", "as_mod_array"]

DEFAULT_CAP = 10**6
TABLE_CAP = 6000


def as_mod_array(mats, q: int) -> np.ndarray:
    """Stack SpElements / nested sequences into an (m, n, n) array mod q."""
    rows = [m.entries if isinstance(m, SpElement) else m for m in mats]
    arr = np.array(rows, dtype=object) % q
    return arr.astype(np.int64).reshape(len(rows), *np.shape(rows[0]))


class _Encoder:
    def __init__(self, n: int, q: int):
        self.n, self.q = n, q
        self.fits = q ** (n * n) < 2**63
        if self.fits:
            self.weights = q ** np.arange(n * n, dtype=np.int64)

    def __call__(self, arr: np.ndarray):
        flat = arr.reshape(len(arr), -1)
        if self.fits:
            return flat @ self.weights
        # Wide moduli: fall back to byte strings (slower, still exact).
        return np.array([r.tobytes() for r in flat.astype(np.int64)], dtype=object)


class MatrixGroup:
    """Explicitly enumerated group of ``n x n`` matrices mod ``q``."""

    def __init__(self, elements: np.ndarray, q: int, g: int | None = None):
        self.elements = np.ascontiguousarray(elements, dtype=np.int64)
        self.q = q
        self.n = self.elements.shape[1]
        self.g = g if g is not None else self.n // 2
        self._enc = _Encoder(self.n, q)
        self.codes = self._enc(self.elements)
        if self._enc.fits:
            self._order = np.argsort(self.codes, kind="stable")
            self._sorted = self.codes[self._order]
        else:
            self._lookup = {c: i for i, c in enumerate(self.codes)}

    def __len__(self):
        return len(self.elements)

    @property
    def order(self) -> int:
        return len(self.elements)

    def index(self, mats: np.ndarray) -> np.ndarray:
        """Indices of the given (m, n, n) matrices; KeyError if absent."""
        mats = np.asarray(mats, dtype=np.int64) % self.q
        codes = self._enc(mats.reshape(-1, self.n, self.n))
        if not self._enc.fits:
            return np.array([self._lookup[c] for c in codes], dtype=np.int64)
        pos = np.searchsorted(self._sorted, codes)
        pos = np.minimum(pos, len(self._sorted) - 1)
        if not np.all(self._sorted[pos] == codes):
            raise KeyError("matrix not in group")
        return self._order[pos]

    def contains(self, mats: np.ndarray) -> np.ndarray:
        mats = np.asarray(mats, dtype=np.int64) % self.q
        codes = self._enc(mats.reshape(-1, self.n, self.n))
        if not self._enc.fits:
            return np.array([c in self._lookup for c in codes])
        pos = np.minimum(np.searchsorted(self._sorted, codes), len(self._sorted) - 1)
        return self._sorted[pos] == codes

    @cached_property
    def identity_index(self) -> int:
        return int(self.index(np.eye(self.n, dtype=np.int64)[None])[0])

    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.matmul(a, b) % self.q

    def right_perm(self, s) -> np.ndarray:
        """Index array p with elements[p[i]] = elements[i] @ s."""
        s = as_mod_array([s], self.q)[0] if not isinstance(s, np.ndarray) else s
        return self.index(self.matmul(self.elements, s))

    def left_perm(self, s) -> np.ndarray:
        """Index array p with elements[p[i]] = s @ elements[i]."""
        s = as_mod_array([s], self.q)[0] if not isinstance(s, np.ndarray) else s
        return self.index(self.matmul(s, self.elements))

    @cached_property
    def inverse_indices(self) -> np.ndarray:
        # Symplectic inverse: M^{-1} = -J M^T J.
        j = np.array(standard_form(self.g), dtype=np.int64)
        inv = -(j @ np.transpose(self.elements, (0, 2, 1)) @ j)
        return self.index(inv % self.q)

    @cached_property
    def table(self) -> np.ndarray:
        """Full multiplication table ``table[i, j] = index(e_i e_j)``."""
        n = len(self)
        if n > TABLE_CAP:
            raise CapExceeded(f"multiplication table for {n} elements exceeds cap {TABLE_CAP}")
        out = np.empty((n, n), dtype=np.int32)
        for i in range(n):
            out[i] = self.left_perm(self.elements[i])
        return out

    def reduce(self, q2: int) -> np.ndarray:
        """Index map into the group reduced mod q2 (which must divide q)."""
        if self.q % q2:
            raise ModulusMismatch(f"{q2} does not divide {q}")
        return self.elements % q2

    def to_sp(self, i: int) -> SpElement:
        return SpElement(self.g, self.q, tuple(map(tuple, self.elements[i].tolist())))


def enumerate_group(generators, q: int, cap: int = DEFAULT_CAP) -> MatrixGroup:
    """BFS closure of ``generators`` (and their inverses) mod ``q``."""
    gens = as_mod_array(generators, q) if len(generators) else None
    if gens is None:
        raise DimensionMismatch("need at least one generator to fix the dimension")
    n = gens.shape[1]
    g = n // 2
    j = np.array(standard_form(g), dtype=np.int64)
    inv = (-(j @ np.transpose(gens, (0, 2, 1)) @ j)) % q
    allgens = np.concatenate([gens, inv])
    enc = _Encoder(n, q)
    ident = np.eye(n, dtype=np.int64)[None] % q
    blocks = [ident]
    if enc.fits:
        seen = np.sort(enc(ident))
    else:
        seen_set = set(enc(ident).tolist())
    frontier = ident
    total = 1
    while len(frontier):
        cand = (frontier[:, None, :, :] @ allgens[None, :, :, :] % q).reshape(-1, n, n)
        codes = enc(cand)
        if enc.fits:
            codes, first = np.unique(codes, return_index=True)
            pos = np.minimum(np.searchsorted(seen, codes), len(seen) - 1)
            fresh = seen[pos] != codes
            new = cand[np.sort(first[fresh])]
            seen = np.union1d(seen, codes[fresh])
        else:
            keep = []
            for i, c in enumerate(codes.tolist()):
                if c not in seen_set:
                    seen_set.add(c)
                    keep.append(i)
            new = cand[keep]
        total += len(new)
        if total > cap:
            raise CapExceeded(f"closure exceeded cap {cap}")
        blocks.append(new)
        frontier = new
    return MatrixGroup(np.concatenate(blocks), q, g)


def sp_standard_generators(g: int) -> list:
    """Integral generators of Sp_{2g}(Z): [[I, S], [0, I]] and [[I, 0], [S, I]]
    for the elementary symmetric S = E_ii and S = E_ij + E_ji."""
    out = []
    syms = []
    for i in range(g):
        s = np.zeros((g, g), dtype=np.int64)
        s[i, i] = 1
        syms.append(s)
    for i, k in product(range(g), repeat=2):
        if i < k:
            s = np.zeros((g, g), dtype=np.int64)
            s[i, k] = s[k, i] = 1
            syms.append(s)
    eye, zero = np.eye(g, dtype=np.int64), np.zeros((g, g), dtype=np.int64)
    for s in syms:
        out.append(np.block([[eye, s], [zero, eye]]))
        out.append(np.block([[eye, zero], [s, eye]]))
    return out


def reduction_map(group: MatrixGroup, small: MatrixGroup) -> np.ndarray:
    """Index array sending each element of ``group`` to its image in ``small``."""
    if group.q % small.q:
        raise ModulusMismatch(f"{small.q} does not divide {group.q}")
    return small.index(group.elements % small.q)
