"""Measures on Gamma_q = Sp_2g(Z/q), representation-dimension bounds and
the convolution estimates built on them.

Functions on the group are dense arrays indexed by the element order of a
:class:`~rauzy_lab.finite_group.MatrixGroup`.  Convolution is

    (a * b)(x) = sum_{g h = x} a(g) b(h),

and ``l2`` norms use counting measure.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigsh
from scipy.sparse.csgraph import connected_components

from .cocycle import SpElement, factorize, sp_order, standard_form
from .errors import (CapExceeded, EmptyBranchSet, EvenModulus, EvenPrime,
                     ModulusMismatch, NoConvergence, ValidationError, ZeroModP)
from .finite_group import (DEFAULT_CAP, MatrixGroup, as_mod_array,
                           enumerate_group, sp_standard_generators)

log = logging.getLogger(__name__)

__all__ = ["gamma_q", "GroupMeasure", "convolve", "tilde", "ell1", "ell2",
           "delta", "uniform", "random_measure", "project_subspace",
           "subspace_opnorm", "flatness_sides", "flatness_bound_check",
           "trace_formula_bound", "CharacterData", "dixon_characters",
           "dixon_dims", "new_dims", "DimBound", "min_dim_bound_prime",
           "min_dim_bound", "LieAlgebraElement", "lie_algebra_elements",
           "adjoint_orbit_size", "DecouplingReport", "decoupling_check"]

DIXON_CAP = 10**5
# groups up to this order get dense convolution matrices from the table
DENSE_ORDER = 1500


@lru_cache(maxsize=32)
def gamma_q(q: int, g: int = 1, cap: int = DEFAULT_CAP) -> MatrixGroup:
    """The full group Sp_2g(Z/q), enumerated from transvection generators."""
    if q < 2:
        raise ValidationError("q must be at least 2")
    order = sp_order(g, q)
    if order > cap:
        raise CapExceeded(f"|Sp_{2 * g}(Z/{q})| = {order} exceeds cap {cap}")
    group = enumerate_group(sp_standard_generators(g), q, cap)
    assert len(group) == order
    return group


# -- measures --------------------------------------------------------------

@dataclass
class GroupMeasure:
    """Complex measure on an enumerated group, stored densely."""
    group: MatrixGroup
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (len(self.group),):
            raise ValidationError("measure must have one value per group element")

    @property
    def q(self) -> int:
        return self.group.q

    @property
    def g(self) -> int:
        return self.group.g

    @property
    def support(self) -> dict:
        nz = np.flatnonzero(self.values)
        return {self.group.to_sp(i): complex(self.values[i]) for i in nz}

    @classmethod
    def from_support(cls, group: MatrixGroup, support: dict) -> "GroupMeasure":
        vals = np.zeros(len(group), dtype=complex)
        if support:
            keys = list(support)
            idx = group.index(as_mod_array(keys, group.q))
            np.add.at(vals, idx, np.array([support[k] for k in keys], dtype=complex))
        return cls(group, vals)

    def __add__(self, other):
        _same_group(self, other)
        return GroupMeasure(self.group, self.values + other.values)

    def __mul__(self, c):
        return GroupMeasure(self.group, self.values * c)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return convolve(self, other)


def _same_group(a: GroupMeasure, b: GroupMeasure):
    if a.q != b.q or a.g != b.g:
        raise ModulusMismatch(f"measures live on Sp_{2 * a.g}(Z/{a.q}) and Sp_{2 * b.g}(Z/{b.q})")
    if a.group is not b.group and len(a.group) != len(b.group):
        raise ModulusMismatch("measures live on different enumerations")


def delta(group: MatrixGroup, i: int | None = None) -> GroupMeasure:
    vals = np.zeros(len(group), dtype=complex)
    vals[group.identity_index if i is None else i] = 1.0
    return GroupMeasure(group, vals)


def uniform(group: MatrixGroup) -> GroupMeasure:
    return GroupMeasure(group, np.full(len(group), 1.0 / len(group), dtype=complex))


def random_measure(group: MatrixGroup, rng, support_size: int | None = None) -> GroupMeasure:
    vals = np.zeros(len(group), dtype=complex)
    n = len(group) if support_size is None else support_size
    idx = rng.choice(len(group), size=n, replace=False)
    vals[idx] = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return GroupMeasure(group, vals)


def _translate_sum(group: MatrixGroup, coeffs: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``sum_g coeffs[g] f(g^{-1} .)``: left convolution of the measure with f.

    f may carry trailing axes."""
    out = np.zeros(np.shape(f), dtype=np.result_type(coeffs, f))
    inv = group.inverse_indices
    for i in np.flatnonzero(coeffs):
        p = group.left_perm(group.elements[inv[i]])
        out += coeffs[i] * f[p]
    return out


def _conv_matrix(group: MatrixGroup, coeffs: np.ndarray) -> np.ndarray:
    """Matrix of ``f -> mu * f``: entry (x, y) is ``mu(x y^-1)``."""
    return coeffs[group.table[:, group.inverse_indices]]


def convolve(a: GroupMeasure, b: GroupMeasure) -> GroupMeasure:
    _same_group(a, b)
    if len(a.group) <= DENSE_ORDER and np.count_nonzero(a.values) > 32:
        return GroupMeasure(a.group, _conv_matrix(a.group, a.values) @ b.values)
    return GroupMeasure(a.group, _translate_sum(a.group, a.values, b.values))


def tilde(a: GroupMeasure) -> GroupMeasure:
    """``a~(g) = conj(a(g^{-1}))``."""
    return GroupMeasure(a.group, np.conj(a.values[a.group.inverse_indices]))


def ell1(a: GroupMeasure) -> float:
    return float(np.abs(a.values).sum())


def ell2(a: GroupMeasure) -> float:
    return float(np.linalg.norm(a.values))


# -- subspaces ---------------------------------------------------------------

def _quotient_labels(group: MatrixGroup, q2: int) -> np.ndarray:
    red = group.elements.reshape(len(group), -1) % q2
    return np.unique(red, axis=0, return_inverse=True)[1].ravel()


def _coset_average(labels: np.ndarray, f: np.ndarray) -> np.ndarray:
    n_lab = labels.max() + 1
    flat = f.reshape(len(f), -1)
    counts = np.bincount(labels, minlength=n_lab).astype(float)
    sums = np.zeros((n_lab, flat.shape[1]), dtype=flat.dtype)
    np.add.at(sums, labels, flat)
    return (sums / counts[:, None])[labels].reshape(f.shape)


def project_subspace(group: MatrixGroup, f: np.ndarray, subspace: str) -> np.ndarray:
    """Orthogonal projection of f (first axis indexed by the group).

    ``new`` removes everything pulled back from a proper level ``q/p``.  The
    pullback projectors are conditional expectations onto normal-subgroup
    cosets, so they commute and the complement projector is their product
    of ``I - E``.
    """
    f = np.asarray(f)
    if subspace == "full":
        return f.copy()
    if subspace == "mean_zero":
        return f - f.mean(axis=0, keepdims=True)
    if subspace == "new":
        out = f.copy()
        for p in factorize(group.q):
            q2 = group.q // p
            if q2 == 1:
                out = out - out.mean(axis=0, keepdims=True)
            else:
                out = out - _coset_average(_quotient_labels(group, q2), out)
        return out
    raise ValidationError(f"unknown subspace {subspace!r}")


def subspace_opnorm(mu: GroupMeasure, subspace: str = "mean_zero", *, method: str = "power",
                    tol: float = 1e-12, max_iter: int = 10_000, seed: int = 0) -> float:
    """Norm of ``f -> mu * f`` restricted to the subspace.

    The subspaces are invariant under left and right translation, so the
    restriction commutes with the projection.  ``power`` runs Lanczos on
    ``mu~ * mu`` over projected vectors; ``dense`` takes an SVD.
    """
    group = mu.group
    n = len(group)
    if method == "dense":
        m = _conv_matrix(group, mu.values) @ project_subspace(group, np.eye(n), subspace)
        return float(np.linalg.norm(m, 2)) if m.size else 0.0
    if method != "power":
        raise ValidationError(f"unknown method {method!r}")
    if n <= DENSE_ORDER:
        conv = _conv_matrix(group, mu.values)
        apply, adjoint = (lambda v: conv @ v), (lambda v: conv.conj().T @ v)
    else:
        mt = tilde(mu).values
        apply = lambda v: _translate_sum(group, mu.values, v)      # noqa: E731
        adjoint = lambda v: _translate_sum(group, mt, v)           # noqa: E731

    def gram(v):
        v = project_subspace(group, np.asarray(v, dtype=complex).ravel(), subspace)
        return project_subspace(group, adjoint(apply(v)), subspace)

    if n <= 2:
        return subspace_opnorm(mu, subspace, method="dense")
    rng = np.random.default_rng(seed)
    v0 = project_subspace(group, rng.standard_normal(n) + 1j * rng.standard_normal(n), subspace)
    if np.linalg.norm(v0) < 1e-300:
        return 0.0
    if np.linalg.norm(gram(v0)) <= 1e-14 * ell1(mu) ** 2 * np.linalg.norm(v0):
        # a random start in the kernel means the restricted operator vanishes
        return 0.0
    op = LinearOperator((n, n), matvec=gram, dtype=complex)
    try:
        top = eigsh(op, k=1, which="LA", v0=v0, tol=tol, maxiter=max_iter,
                    return_eigenvectors=False)[0]
    except (ArpackNoConvergence, ArpackError):
        if n <= 4000:
            return subspace_opnorm(mu, subspace, method="dense")
        raise NoConvergence("Lanczos iteration for the convolution norm did not settle")
    return math.sqrt(max(float(top.real), 0.0))


def flatness_sides(nu: GroupMeasure) -> tuple[float, float]:
    """``(|nu~ * nu|_2, |nu|_1^2 / |G|^(1/2) + |nu|_1 |nu|_{l2_0})``."""
    lhs = ell2(convolve(tilde(nu), nu))
    l1 = ell1(nu)
    rhs = l1 ** 2 / math.sqrt(len(nu.group)) + l1 * subspace_opnorm(nu, "mean_zero")
    return lhs, rhs


def flatness_bound_check(nu: GroupMeasure, rtol: float = 1e-12) -> bool:
    lhs, rhs = flatness_sides(nu)
    return lhs <= rhs * (1.0 + rtol)


def trace_formula_bound(mu: GroupMeasure, dmin: int) -> float:
    """Upper bound ``(|G| |mu~ * mu|_2^2 / dmin)^(1/4)`` for the new-subspace norm."""
    if dmin < 1:
        raise ValidationError("dmin must be a positive integer")
    s = ell2(convolve(tilde(mu), mu))
    return (len(mu.group) * s * s / dmin) ** 0.25


# -- characters ------------------------------------------------------------

@dataclass
class CharacterData:
    q: int
    g: int
    class_sizes: np.ndarray
    dims: np.ndarray             # one per irreducible character
    new: np.ndarray              # bool: character does not factor through q/p
    table: np.ndarray = field(repr=False)   # chi(C_r), rows = characters


def _conjugacy_labels(group: MatrixGroup) -> np.ndarray:
    n = len(group)
    rows, cols = [], []
    for s in sp_standard_generators(group.g):
        s = s % group.q
        sinv = group.elements[group.inverse_indices[group.index(s[None])[0]]]
        rows.append(np.arange(n))
        cols.append(group.index(group.matmul(group.matmul(s, group.elements), sinv)))
    graph = coo_matrix((np.ones(len(rows) * n), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(n, n))
    return connected_components(graph, directed=True, connection="weak")[1]


def dixon_characters(q: int, g: int = 1, cap: int = DIXON_CAP, seed: int = 0) -> CharacterData:
    """Character table of Sp_2g(Z/q) by Burnside's method.

    Class-sum structure constants are counted from the exact group law; the
    characters are the simultaneous eigenvectors of the class matrices,
    separated by diagonalizing one random combination.
    """
    if sp_order(g, q) > cap:
        raise CapExceeded(f"|Sp_{2 * g}(Z/{q})| exceeds the character-table cap {cap}")
    group = gamma_q(q, g, max(cap, DEFAULT_CAP))
    n = len(group)
    cls = _conjugacy_labels(group)
    k = cls.max() + 1
    sizes = np.bincount(cls, minlength=k)
    reps = np.array([np.flatnonzero(cls == r)[0] for r in range(k)])
    inv = group.inverse_indices
    # c[j, r, s] = #{x in C_j : x^{-1} z_s in C_r}
    c = np.zeros((k, k, k))
    for s, z in enumerate(reps):
        rp = group.right_perm(group.elements[z])
        np.add.at(c[:, :, s], (cls, cls[rp[inv]]), 1.0)
    rng = np.random.default_rng(seed)
    a = np.einsum("j,jrs->rs", rng.standard_normal(k), c)
    _, vecs = np.linalg.eig(a)
    e = cls[group.identity_index]
    omega = vecs / vecs[e][None, :]           # omega_chi(C_r) in column chi
    norm = (np.abs(omega) ** 2 / sizes[:, None]).sum(axis=0)
    dims = np.sqrt(n / norm)
    rd = np.rint(dims)
    if np.max(np.abs(dims - rd)) > 1e-6:
        raise NoConvergence("character dimensions are not integral; class matrices too degenerate")
    table = (omega * rd[None, :] / sizes[:, None]).T
    new = np.ones(k, dtype=bool)
    for p in factorize(q):
        q2 = q // p
        if q2 == 1:
            kernel_classes = np.arange(k)
        else:
            lab = _quotient_labels(group, q2)
            kernel_classes = np.unique(cls[lab == lab[group.identity_index]])
        trivial_on_kernel = np.all(np.abs(table[:, kernel_classes] - rd[:, None]) < 1e-6, axis=1)
        new &= ~trivial_on_kernel
    order = np.argsort(rd, kind="stable")
    return CharacterData(q, g, sizes, rd[order].astype(int), new[order], table[order])


def dixon_dims(q: int, g: int = 1, cap: int = DIXON_CAP) -> list:
    return sorted(dixon_characters(q, g, cap).dims.tolist())


def new_dims(q: int, g: int = 1, cap: int = DIXON_CAP) -> list:
    """Dimensions of irreducible characters not pulled back from a proper level."""
    ch = dixon_characters(q, g, cap)
    return sorted(ch.dims[ch.new].tolist())


# -- dimension bounds --------------------------------------------------------

@dataclass(frozen=True)
class DimBound:
    q: int
    g: int
    bound: Fraction
    method: str


def min_dim_bound_prime(p: int, g: int = 1) -> DimBound:
    if p == 2:
        raise EvenPrime("the prime bound needs an odd prime")
    if list(factorize(p).items()) != [(p, 1)]:
        raise ValidationError(f"{p} is not prime")
    return DimBound(p, g, Fraction(p ** g - 1, 2), "prime_exact")


def min_dim_bound(q: int, g: int = 1) -> DimBound:
    """Lower bound for new representations of Sp_2g(Z/q), q odd.

    Prime factors contribute ``(p^g - 1)/2`` and higher prime powers
    ``p^floor(r/2)``; bounds multiply across coprime factors.
    """
    if q < 3:
        raise ValidationError("q must be at least 3")
    if q % 2 == 0:
        raise EvenModulus("the bound needs odd q")
    fac = factorize(q)
    bound = Fraction(1)
    for p, r in fac.items():
        bound *= Fraction(p ** g - 1, 2) if r == 1 else Fraction(p ** (r // 2))
    if len(fac) > 1:
        method = "crt_composite"
    else:
        method = "prime_exact" if next(iter(fac.values())) == 1 else "prime_power_orbit"
    return DimBound(q, g, bound, method)


# -- adjoint orbits ------------------------------------------------------------

@dataclass(frozen=True)
class LieAlgebraElement:
    p: int
    R: int
    matrix: tuple

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.int64) % self.modulus
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise ValidationError("Lie algebra elements are even-size square matrices")
        j = np.array(standard_form(m.shape[0] // 2), dtype=np.int64)
        if np.any((m.T @ j + j @ m) % self.modulus):
            raise ValidationError("matrix violates X^T J + J X = 0")
        object.__setattr__(self, "matrix", tuple(map(tuple, m.tolist())))

    @property
    def modulus(self) -> int:
        return self.p ** self.R

    @property
    def g(self) -> int:
        return len(self.matrix) // 2


def lie_algebra_elements(p: int, R: int, g: int = 1):
    """Every element of sp_2g(Z/p^R) (brute force; desk-scale only)."""
    n, mod = 2 * g, p ** R
    j = np.array(standard_form(g), dtype=np.int64)
    for flat in itertools.product(range(mod), repeat=n * n):
        m = np.array(flat, dtype=np.int64).reshape(n, n)
        if not np.any((m.T @ j + j @ m) % mod):
            yield LieAlgebraElement(p, R, tuple(map(tuple, m.tolist())))


def adjoint_orbit_size(x: LieAlgebraElement, cap: int = DEFAULT_CAP) -> int:
    """Size of ``{h X h^{-1}}`` over Sp_2g(Z/p^R), by BFS along transvections."""
    m0 = np.array(x.matrix, dtype=np.int64)
    if not np.any(m0 % x.p):
        raise ZeroModP("X vanishes mod p")
    mod = x.modulus
    gens = []
    j = np.array(standard_form(x.g), dtype=np.int64)
    for s in sp_standard_generators(x.g):
        gens.append((s % mod, (-(j @ s.T @ j)) % mod))
    seen = {m0.tobytes()}
    frontier = [m0]
    while frontier:
        nxt = []
        for m in frontier:
            for s, sinv in gens:
                for a, b in ((s, sinv), (sinv, s)):
                    y = (a @ m @ b) % mod
                    key = y.tobytes()
                    if key not in seen:
                        seen.add(key)
                        nxt.append(y)
        if len(seen) > cap:
            raise CapExceeded(f"orbit exceeded cap {cap}")
        frontier = nxt
    return len(seen)


# -- decoupling --------------------------------------------------------------

@dataclass
class DecouplingReport:
    q: int
    L: int
    K: int
    sigma: float
    n_paths: int
    c: float                 # measured distortion constant per junction
    dominated: bool          # mu1 <= mu2 entrywise
    max_excess: float        # max(mu1 - mu2), <= 0 when dominated
    B: float                 # (|mu2|_1 / |mu1|_1)^(1/K)
    block_rate: float        # max_j |eta_j|_{l2_0} / |eta_j|_1
    rate: float              # measured (|mu2 * phi| / (|mu2|_1 |phi|))^(1/K)
    mu1: GroupMeasure = field(repr=False, default=None)
    mu2: GroupMeasure = field(repr=False, default=None)


def decoupling_check(branches, sigma: float, L: int, K: int, q: int, *,
                     basepoint=None, seed: int = 0, n_trials: int = 8,
                     cap: int = 10**5) -> DecouplingReport:
    """Compare the length-``LK`` path measure with its block factorization.

    ``mu1`` puts weight ``|Theta_gamma* o|^-(sigma + d)`` at the cocycle of
    each concatenation of ``L K`` branches.  Each block of ``L`` branches
    gives ``eta`` with the weights evaluated at ``o`` separately, and
    ``mu2 = e^{c (K - 1)} eta * ... * eta``, where ``c`` is the largest
    observed log-ratio between a path weight and its block product, divided
    by ``K - 1``.
    """
    from .cocycle import sp_from_theta_star, symplectic_basis
    branches = list(branches)
    if not branches:
        raise EmptyBranchSet("decoupling needs at least one branch")
    if L < 1 or K < 1:
        raise ValidationError("L and K must be positive")
    n_paths = len(branches) ** (L * K)
    if n_paths > cap:
        raise CapExceeded(f"{n_paths} paths exceed cap {cap}")
    basis = symplectic_basis(branches[0].path.start)
    group = gamma_q(q, basis.genus)
    d = branches[0].matrix.shape[0]
    o = np.full(d, 1.0 / d) if basepoint is None else np.asarray(basepoint, float)
    mats = [np.array(b.matrix, dtype=float) for b in branches]
    cocs = []
    for b in branches:
        c = b.cocycle_mod_q if b.cocycle_mod_q is not None and b.cocycle_mod_q.q == q \
            else sp_from_theta_star(b.exact or tuple(map(tuple, np.rint(b.matrix).astype(int).tolist())), basis)
        cocs.append(np.array(c.entries, dtype=np.int64) % q)
    cocs = np.array(cocs)

    def log_weight(m):
        return -(sigma + d) * math.log(float((m @ o).sum()))

    # blocks of L branches
    blocks = list(itertools.product(range(len(branches)), repeat=L))
    bmat, bcoc, blw = [], [], []
    for blk in blocks:
        m = np.eye(d)
        c = np.eye(cocs.shape[1], dtype=np.int64)
        for i in blk:
            m = m @ mats[i]
            c = (c @ cocs[i]) % q
        bmat.append(m)
        bcoc.append(c)
        blw.append(log_weight(m))
    bidx = group.index(np.array(bcoc))
    eta = np.zeros(len(group))
    np.add.at(eta, bidx, np.exp(blw))

    # full paths as K-tuples of blocks
    mu1 = np.zeros(len(group))
    lw_full_all, idx_all, lw_prod_all = [], [], []
    for combo in itertools.product(range(len(blocks)), repeat=K):
        m = np.eye(d)
        c = np.eye(cocs.shape[1], dtype=np.int64)
        for b in combo:
            m = m @ bmat[b]
            c = (c @ bcoc[b]) % q
        lw_full_all.append(log_weight(m))
        lw_prod_all.append(sum(blw[b] for b in combo))
        idx_all.append(c)
    lw_full = np.array(lw_full_all)
    lw_prod = np.array(lw_prod_all)
    np.add.at(mu1, group.index(np.array(idx_all)), np.exp(lw_full))
    excess = lw_full - lw_prod
    cmeas = float(max(excess.max(), 0.0) / (K - 1)) if K > 1 else 0.0

    mu2 = GroupMeasure(group, eta)
    eta_m = GroupMeasure(group, eta)
    for _ in range(K - 1):
        mu2 = convolve(mu2, eta_m)
    mu2 = mu2 * math.exp(cmeas * (K - 1))
    mu1_m = GroupMeasure(group, mu1)

    diff = (mu1_m.values - mu2.values).real
    scale = max(float(np.abs(mu2.values).max()), 1e-300)
    max_excess = float(diff.max())
    dominated = bool(max_excess <= 1e-12 * scale)
    B = (ell1(mu2) / ell1(mu1_m)) ** (1.0 / K)
    block_rate = subspace_opnorm(eta_m, "mean_zero") / ell1(eta_m)
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(n_trials):
        phi = project_subspace(group, rng.standard_normal(len(group)), "mean_zero")
        out = _translate_sum(group, mu2.values, phi.astype(complex))
        ratios.append(np.linalg.norm(out) / (ell1(mu2) * np.linalg.norm(phi)))
    rate = float(max(ratios) ** (1.0 / K))
    return DecouplingReport(q, L, K, sigma, n_paths, cmeas, dominated, max_excess, B,
                            float(block_rate), rate, mu1_m, mu2)
