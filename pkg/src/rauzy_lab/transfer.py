"""Discretized transfer operators for the accelerated return map.

The section is parametrized by the standard simplex: ``mu -> y(mu) =
Theta0* mu / |Theta0* mu|``.  Grid functions live on the lattice ``k / n``
of that simplex and are interpolated piecewise linearly on the Freudenthal
(Kuhn) triangulation.

For an adapted loop ``gamma = gamma0 gamma'`` the inverse branch acts in
``mu`` coordinates through the nonnegative matrix ``A = Theta_gamma'* Theta0*``
and carries the weight ``|Theta_gamma* y|^-(s + d)``.  Branches are grouped
by their cocycle modulo ``q`` so the twisted operator is a short sum of
sparse matrices followed by fiber permutations.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy import stats

from .cocycle import SpElement, sp_from_theta_star, symplectic_basis, theta_star_of_path
from .errors import (CapExceeded, DimensionMismatch, EmptyBranchSet,
                     NoConvergence, ValidationError)
from .finite_group import DEFAULT_CAP, MatrixGroup, as_mod_array, enumerate_group
from .rauzy import RauzyPath
from .selection import PathSelection, enumerate_adapted_by_norm

log = logging.getLogger(__name__)

__all__ = ["SimplexGrid", "TransferBranch", "TransferConfig", "RPFData",
           "make_transfer_config", "branch_weight", "transfer_apply_scalar",
           "rpf_leading", "normalized_weights", "normalized_apply",
           "twisted_radius", "DecayReport", "alpha_map"]


class SimplexGrid:
    """Lattice points ``k/n`` of the standard (d-1)-simplex with P1 interpolation."""

    def __init__(self, d: int, n: int):
        if d < 2 or n < 1:
            raise ValidationError("need d >= 2 and n >= 1")
        self.d, self.n = d, n
        pts = [c for c in itertools.product(range(n + 1), repeat=d - 1) if sum(c) <= n]
        k = np.array(pts, dtype=np.int64).reshape(-1, d - 1)
        self.lattice = np.column_stack([k, n - k.sum(axis=1)])
        self.points = self.lattice / n
        self._radix = (n + 1) ** np.arange(d - 1, dtype=np.int64)
        self._lookup = np.full((n + 1) ** (d - 1), -1, dtype=np.int64)
        self._lookup[k @ self._radix] = np.arange(len(k))

    def __len__(self):
        return len(self.points)

    def locate(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vertex indices and barycentric weights, each of shape (m, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x = np.clip(x, 0.0, None)
        x = x / x.sum(axis=1, keepdims=True)
        d, n = self.d, self.n
        u = np.cumsum(x[:, :-1] * n, axis=1)              # nondecreasing in [0, n]
        u = np.clip(u, 0.0, n)
        base = np.minimum(np.floor(u), n - 1).astype(np.int64)
        frac = u - base
        order = np.argsort(-frac, axis=1, kind="stable")
        sfrac = np.take_along_axis(frac, order, axis=1)
        m = len(x)
        verts = np.empty((m, d, d - 1), dtype=np.int64)
        verts[:, 0] = base
        cur = base.copy()
        rows = np.arange(m)
        for j in range(d - 1):
            cur = cur.copy()
            cur[rows, order[:, j]] += 1
            verts[:, j + 1] = cur
        w = np.empty((m, d))
        w[:, 0] = 1.0 - sfrac[:, 0]
        for j in range(1, d - 1):
            w[:, j] = sfrac[:, j - 1] - sfrac[:, j]
        w[:, d - 1] = sfrac[:, d - 2]
        # cube coordinates back to lattice coordinates
        lat = np.diff(np.concatenate([np.zeros((m, d, 1), dtype=np.int64), verts], axis=2), axis=2)
        idx = self._lookup[lat @ self._radix]
        bad = idx < 0
        if np.any(bad & (w > 1e-12)):
            raise ValidationError("interpolation stencil left the simplex")
        idx = np.where(bad, 0, idx)
        w = np.where(bad, 0.0, w)
        return idx, w

    def interpolate(self, f: np.ndarray, x: np.ndarray) -> np.ndarray:
        idx, w = self.locate(x)
        return np.einsum("md,md...->m...", w, f[idx])

    @cached_property
    def mass(self) -> np.ndarray:
        """Lumped P1 mass weights summing to 1 (Lebesgue on the simplex)."""
        d, n = self.d, self.n
        counts = np.zeros(len(self))
        for base in itertools.product(range(n), repeat=d - 1):
            base = np.array(base, dtype=np.int64)
            for perm in itertools.permutations(range(d - 1)):
                cur = base.copy()
                vs = [cur.copy()]
                for j in perm:
                    cur[j] += 1
                    vs.append(cur.copy())
                vs = np.array(vs)
                if np.all(np.diff(vs, axis=1) >= 0) and np.all(vs >= 0) and np.all(vs <= n):
                    lat = np.diff(np.concatenate([np.zeros((d, 1), dtype=np.int64), vs], axis=1), axis=1)
                    lat = np.column_stack([lat, n - lat.sum(axis=1)])
                    if np.all(lat >= 0):
                        counts[self._lookup[lat[:, :-1] @ self._radix]] += 1
        return counts / counts.sum()


@dataclass
class TransferBranch:
    path: RauzyPath
    matrix: np.ndarray               # Theta_gamma* (float copy; exact ints in ``exact``)
    exact: tuple = field(repr=False, default=())
    cocycle_mod_q: SpElement | None = None

    @property
    def norm(self) -> float:
        return float(self.matrix.sum(axis=0).max())


def alpha_map(branch: TransferBranch, y: np.ndarray) -> np.ndarray:
    """``alpha_gamma(y) = Theta_gamma* y / |Theta_gamma* y|`` (rows of y)."""
    z = np.atleast_2d(y) @ branch.matrix.T
    return z / z.sum(axis=1, keepdims=True)


def branch_weight(branch: TransferBranch, y, s) -> np.ndarray:
    """``|Theta_gamma* y|_1^-(s + d)`` for simplex points y (rows)."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    d = y.shape[1]
    norm = (y @ branch.matrix.T).sum(axis=1)
    return np.exp(-(s + d) * np.log(norm))


@dataclass
class RPFData:
    sigma: float
    lambda_sigma: float
    h_sigma: np.ndarray
    residual: float
    iterations: int = 0


class TransferConfig:
    """Grid, truncated branch set and precomputed branch geometry."""

    def __init__(self, selection: PathSelection, grid: SimplexGrid, cutoff: int,
                 basepoint=None, q: int | None = None):
        self.selection = selection
        self.grid = grid
        self.cutoff = cutoff
        d = selection.base.d
        self.d = d
        pairs = enumerate_adapted_by_norm(selection, cutoff)
        if not pairs:
            raise EmptyBranchSet(f"no adapted loop has norm <= {cutoff}")
        self.theta0 = np.array(theta_star_of_path(selection.gamma0).entries, dtype=float)
        self.theta0_inv = np.linalg.inv(self.theta0)
        self.branches = [TransferBranch(p, np.array(t, dtype=float), t) for p, t in pairs]
        self.basepoint = np.full(d, 1.0 / d) if basepoint is None else np.asarray(basepoint, float)
        # geometry at grid nodes
        mu = grid.points
        y = mu @ self.theta0.T
        self.y_norm = y.sum(axis=1)
        self.y = y / self.y_norm[:, None]
        nb, npts = len(self.branches), len(grid)
        self.log_norm = np.empty((nb, npts))
        self._idx = np.empty((nb, npts, d), dtype=np.int64)
        self._w = np.empty((nb, npts, d))
        for b, br in enumerate(self.branches):
            z = self.y @ br.matrix.T
            zn = z.sum(axis=1)
            self.log_norm[b] = np.log(zn)
            mu2 = (z / zn[:, None]) @ self.theta0_inv.T
            self._idx[b], self._w[b] = grid.locate(mu2)
        # quadrature for Lebesgue measure on the section (y coordinates)
        dens = grid.mass * self.y_norm ** (-d)
        self.quad = dens / dens.sum()
        self._ops: dict = {}
        self._groups: dict = {}

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    def weights(self, s) -> np.ndarray:
        return np.exp(-(s + self.d) * self.log_norm)

    def _sparse(self, vals: np.ndarray, rows_sel=None) -> sp.csr_matrix:
        nb, npts, d = self._idx.shape
        sel = np.arange(nb) if rows_sel is None else rows_sel
        data = (vals[sel][:, :, None] * self._w[sel]).ravel()
        rows = np.broadcast_to(np.arange(npts)[None, :, None], (len(sel), npts, d)).ravel()
        cols = self._idx[sel].ravel()
        return sp.csr_matrix((data, (rows, cols)), shape=(npts, npts))

    def scalar_operator(self, s) -> sp.csr_matrix:
        key = complex(s)
        if key not in self._ops:
            w = self.weights(s)
            if np.isrealobj(s) or complex(s).imag == 0:
                w = w.real
            self._ops[key] = self._sparse(w)
        return self._ops[key]

    def tail_bound(self, s: float = 0.0) -> float:
        """Mass missed by the truncation: ``1 - int L_0[1] dm`` (Lebesgue
        transfer operators preserve total mass, so the full sum integrates
        to one)."""
        kept = self.scalar_operator(0.0) @ np.ones(len(self.grid))
        return float(1.0 - self.quad @ kept)

    # -- congruence fibers -------------------------------------------------
    def fiber(self, q: int, cap: int = DEFAULT_CAP):
        """Group Gamma_q, distinct cocycle classes and branch labels."""
        if q in self._groups:
            return self._groups[q]
        from .rvgroup import mod_q_closure, rv_generators
        spec = rv_generators(self.selection.base)
        size, surj, group = mod_q_closure(spec.matrices, q, cap, return_group=True)
        basis = symplectic_basis(self.selection.base)
        mats = []
        for br in self.branches:
            c = sp_from_theta_star(br.exact, basis)
            br.cocycle_mod_q = SpElement(c.g, q, c.entries)
            mats.append(br.cocycle_mod_q.entries)
        labels = group.index(as_mod_array(mats, q))
        uniq, inverse = np.unique(labels, return_inverse=True)
        perms = [group.left_perm(group.elements[u]) for u in uniq]
        self._groups[q] = (group, uniq, inverse, perms)
        return self._groups[q]

    def twisted_blocks(self, s, q: int):
        key = (complex(s), q)
        if key not in self._ops:
            group, uniq, inverse, perms = self.fiber(q)
            w = self.weights(s)
            if complex(s).imag == 0:
                w = w.real
            blocks = [self._sparse(w, np.flatnonzero(inverse == k)) for k in range(len(uniq))]
            self._ops[key] = (blocks, perms)
        return self._ops[key]


def make_transfer_config(selection: PathSelection, n: int = 64, cutoff: int = 1000,
                         basepoint=None) -> TransferConfig:
    return TransferConfig(selection, SimplexGrid(selection.base.d, n), cutoff, basepoint)


def transfer_apply_scalar(config: TransferConfig, f: np.ndarray, s=0.0) -> np.ndarray:
    f = np.asarray(f)
    if f.shape[0] != len(config.grid):
        raise DimensionMismatch("grid function has the wrong length")
    return config.scalar_operator(s) @ f


def rpf_leading(config: TransferConfig, sigma: float = 0.0, *, tol: float = 1e-12,
                max_iter: int = 20_000, window: float = 0.5) -> RPFData:
    """Leading eigenvalue and positive eigenfunction of the truncated ``L_sigma``.

    ``h`` is normalized so that its integral against Lebesgue measure on the
    section is one.
    """
    if abs(sigma) > window:
        raise ValidationError(f"|sigma| = {abs(sigma)} is outside the window {window}")
    op = config.scalar_operator(float(sigma))
    h = np.ones(len(config.grid))
    lam, resid = 0.0, np.inf
    for it in range(1, max_iter + 1):
        g = op @ h
        lam = float(config.quad @ g / (config.quad @ h))
        resid = float(np.max(np.abs(g - lam * h)))
        h = np.maximum(g / lam, 1e-300)
        h /= config.quad @ h
        if resid < tol:
            break
    else:
        raise NoConvergence(f"power iteration residual {resid:.2e} after {max_iter} steps")
    resid = float(np.max(np.abs(op @ h - lam * h)))
    return RPFData(float(sigma), lam, h, resid, it)


def normalized_weights(config: TransferConfig, rpf: RPFData, s=None) -> np.ndarray:
    """Per-branch ``e^{R_s(alpha_gamma y)}`` at every node, shape (branches, nodes)."""
    s = rpf.sigma if s is None else s
    h_at = np.einsum("bnd,bnd->bn", config._w, rpf.h_sigma[config._idx])
    return config.weights(s) * h_at / (rpf.lambda_sigma * rpf.h_sigma[None, :])


def normalized_apply(config: TransferConfig, rpf: RPFData, F: np.ndarray, s=None,
                     q: int | None = None) -> np.ndarray:
    """``(1 / (lambda h)) L_s[h F]``; with ``q`` the fiber coordinate of F
    (second axis, indexed by Gamma_q) is moved by the branch cocycles:
    ``out[:, x] = sum_gamma p_gamma * F(alpha_gamma)[c_gamma x]``."""
    s = rpf.sigma if s is None else s
    F = np.asarray(F)
    if F.shape[0] != len(config.grid):
        raise DimensionMismatch("grid function has the wrong length")
    h = rpf.h_sigma
    hF = h[:, None] * F if F.ndim == 2 else h * F
    if q is None:
        out = config.scalar_operator(s) @ hF
    else:
        group = config.fiber(q)[0]
        if F.ndim != 2 or F.shape[1] != len(group):
            raise DimensionMismatch(f"fiber axis must have length |Gamma_q| = {len(group)}")
        blocks, perms = config.twisted_blocks(s, q)
        out = np.zeros(F.shape, dtype=np.result_type(hF, complex(s).imag and 1j or 1.0))
        for m, p in zip(blocks, perms):
            out = out + m @ hF[:, p]
    denom = rpf.lambda_sigma * h
    return out / (denom[:, None] if out.ndim == 2 else denom)


@dataclass
class DecayReport:
    q: int
    subspace: str
    norms: np.ndarray
    rate: float
    residual: float
    tail_bound: float


def twisted_radius(config: TransferConfig, rpf: RPFData, q: int, k_max: int = 20,
                   subspace: str = "mean_zero", *, s=None, seed: int = 0,
                   cap: int = DEFAULT_CAP, initial: np.ndarray | None = None) -> DecayReport:
    """Fit a geometric rate to ``sup_y |L^k F(y)|`` for F in the requested
    fiber subspace (``full``, ``mean_zero`` or ``new``).

    F is random unless ``initial`` (nodes x group) is given; either way it is
    projected onto the subspace first.
    """
    from .quasirandom import project_subspace
    group = config.fiber(q, cap)[0]
    if initial is None:
        rng = np.random.default_rng(seed)
        F = rng.standard_normal((len(config.grid), len(group)))
    else:
        F = np.asarray(initial)
        if F.shape != (len(config.grid), len(group)):
            raise DimensionMismatch("initial function must have shape (nodes, |Gamma_q|)")
    F = project_subspace(group, F.T, subspace).T
    norms = []
    for _ in range(k_max):
        F = normalized_apply(config, rpf, F, s=s, q=q)
        norms.append(float(np.max(np.linalg.norm(F, axis=1))))
    norms = np.array(norms)
    k = np.arange(1, k_max + 1)
    good = norms > 1e-300
    if good.sum() < 2:
        return DecayReport(q, subspace, norms, 0.0, rpf.residual, config.tail_bound())
    fit = stats.linregress(k[good], np.log(norms[good]))
    return DecayReport(q, subspace, norms, float(np.exp(fit.slope)), rpf.residual,
                       config.tail_bound())
