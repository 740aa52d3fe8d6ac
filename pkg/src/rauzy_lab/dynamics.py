"""Suspension data, Rauzy-Veech induction, the Teichmueller flow and the
accelerated first-return map to the section cut out by ``gamma0``.

A suspension datum is ``(pi, lam, tau)`` with positive lengths ``lam`` and
heights ``tau`` in the open cone ``K_pi``.  One induction step subtracts the
loser's entries from the winner's (the inverse transpose of the Rauzy matrix);
the Teichmueller flow scales ``lam`` by ``e^t`` and ``tau`` by ``e^-t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .cocycle import (SpElement, cone_constraints, cone_extreme_rays, omega,
                      symplectic_basis, theta_star_of_path)
from .errors import (BoundaryPoint, NotSurjective, StepBudgetExceeded,
                     TieUndefined, TooFewSamples, ValidationError)
from .rauzy import (BOTTOM, MOVES, TOP, MoveType, PermutationPair, RauzyArrow,
                    RauzyPath, apply_move, rauzy_class)
from .selection import PathSelection

__all__ = [
    "SuspensionDatum", "SectionPoint", "ReturnRecord", "cone_contains", "area",
    "step_type", "induction_step", "teich_flow", "in_fundamental_domain",
    "return_map", "sample_section_point", "sample_orbit", "roof_tail_stats",
    "cocycle_distribution", "correlation_estimate", "ProductObservable",
    "hilbert_distance", "DEFAULT_BUDGET",
]

DEFAULT_BUDGET = 10**6


@dataclass(frozen=True)
class SuspensionDatum:
    pair: PermutationPair
    lam: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        tau = np.asarray(self.tau, dtype=float)
        if lam.shape != (self.pair.d,) or tau.shape != (self.pair.d,):
            raise ValidationError("lam and tau must have one entry per letter")
        if np.any(lam <= 0):
            raise ValidationError("lengths must be positive")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "tau", tau)

    def check(self) -> "SuspensionDatum":
        if not cone_contains(self.pair, self.tau):
            raise ValidationError("tau is not in the cone K_pi")
        return self


def cone_contains(pair: PermutationPair, tau) -> bool:
    c = np.array(cone_constraints(pair), dtype=float)
    return bool(np.all(c @ np.asarray(tau, dtype=float) > 0))


def area(datum: SuspensionDatum) -> float:
    """Area of the suspended surface, ``<lam, Omega tau>``.

    With this sign the area is positive on ``K_pi``.
    """
    om = omega(datum.pair).to_numpy(float)
    return float(datum.lam @ om @ datum.tau)


def step_type(pair: PermutationPair, lam) -> MoveType:
    ix = pair.alphabet.index
    la, lb = lam[ix[pair.top[-1]]], lam[ix[pair.bottom[-1]]]
    if la > lb:
        return TOP
    if la < lb:
        return BOTTOM
    raise TieUndefined("last lengths of the two rows coincide")


def induction_step(datum: SuspensionDatum) -> tuple[SuspensionDatum, RauzyArrow]:
    arrow = apply_move(datum.pair, step_type(datum.pair, datum.lam))
    ix = datum.pair.alphabet.index
    w, l = ix[arrow.winner], ix[arrow.loser]
    lam, tau = datum.lam.copy(), datum.tau.copy()
    lam[w] -= lam[l]
    tau[w] -= tau[l]
    return SuspensionDatum(arrow.target, lam, tau), arrow


def teich_flow(datum: SuspensionDatum, t: float) -> SuspensionDatum:
    return SuspensionDatum(datum.pair, datum.lam * math.exp(t), datum.tau * math.exp(-t))


def in_fundamental_domain(datum: SuspensionDatum) -> bool:
    """Membership in the standard fundamental domain for induction.

    The backward step is undefined exactly when ``sum(tau) == 0`` (the sign
    of the total height decides which arrow led into the datum).
    """
    norm = datum.lam.sum()
    try:
        nxt, _ = induction_step(datum)
    except TieUndefined:
        return 1 <= norm
    if nxt.lam.sum() < 1 <= norm:
        return True
    if datum.tau.sum() == 0 and norm < 1:
        return True
    return False


def hilbert_distance(x, y) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise BoundaryPoint("Hilbert metric needs strictly positive points")
    r = x / y
    return float(np.log(r.max() / r.min()))


# ---------------------------------------------------------------------------
# the accelerated return map

@dataclass(frozen=True)
class SectionPoint:
    datum: SuspensionDatum

    @property
    def lam(self) -> np.ndarray:
        return self.datum.lam

    @property
    def tau(self) -> np.ndarray:
        return self.datum.tau


@dataclass(frozen=True)
class ReturnRecord:
    path: RauzyPath
    roof: float
    cocycle: SpElement
    endpoint: SectionPoint
    restarted: bool = False      # the orbit was restarted just before this return


class _Walker:
    """Integer tables for fast stepping inside one Rauzy class."""

    def __init__(self, selection: PathSelection):
        base = selection.base
        cls = rauzy_class(base)
        self.base_pair = base
        self.verts = cls.vertices
        self.vix = cls.index
        ix = base.alphabet.index
        self.alpha = [ix[v.top[-1]] for v in cls.vertices]
        self.beta = [ix[v.bottom[-1]] for v in cls.vertices]
        self.nxt = [[cls.index[cls.out(v, m).target] for m in MOVES] for v in cls.vertices]
        self.base = cls.index[base]
        self.g0 = [MOVES.index(m) for m in selection.gamma0.moves]
        self.basis = symplectic_basis(base)
        self.proj = np.array(self.basis.projection, dtype=object)
        self.lift = np.array(self.basis.lift, dtype=object)

    def cocycle(self, wl, q):
        d = self.base_pair.d
        m = [[int(i == j) for j in range(d)] for i in range(d)]
        for w, l in wl:
            for row in m:
                row[l] += row[w]
            if q is not None:
                for row in m:
                    row[l] %= q
        prod = self.proj @ np.array(m, dtype=object) @ self.lift
        return SpElement(self.basis.genus, q, tuple(tuple(int(x) for x in r) for r in prod))

    def run(self, lam, tau, budget):
        """Step until the first return; returns (moves, wl, lam, tau, logacc)."""
        lam, tau = list(lam), list(tau)
        alpha, beta, nxt, g0 = self.alpha, self.beta, self.nxt, self.g0
        l0, base = len(g0), self.base
        v, logacc, n = base, 0.0, 0
        moves, wl = [], []
        pending = []          # [offset, lam, tau, logacc]
        log = math.log
        while True:
            if n and v == base:
                pending.append((n, lam[:], tau[:], logacc))
            a, b = alpha[v], beta[v]
            la, lb = lam[a], lam[b]
            if la > lb:
                m, w, l = 0, a, b
            elif la < lb:
                m, w, l = 1, b, a
            else:
                raise TieUndefined("tie between the last lengths")
            lam[w] -= lam[l]
            tau[w] -= tau[l]
            s = sum(lam)
            inv = 1.0 / s
            lam = [x * inv for x in lam]
            tau = [x * s for x in tau]
            logacc += log(s)
            moves.append(m)
            wl.append((w, l))
            v = nxt[v][m]
            n += 1
            if n <= l0 and m != g0[n - 1]:
                raise ValidationError("starting point is not in the section (itinerary does not begin with gamma0)")
            if pending:
                keep = []
                for cand in pending:
                    k = n - 1 - cand[0]
                    if m != g0[k]:
                        continue
                    if k == l0 - 1:
                        o = cand[0]
                        return moves[:o], wl[:o], cand[1], cand[2], cand[3]
                    keep.append(cand)
                pending = keep
            if n > budget:
                raise StepBudgetExceeded(f"no return within {budget} steps")


_WALKERS: dict = {}


def _walker(selection: PathSelection) -> _Walker:
    key = (selection.base, selection.gamma0.moves)
    if key not in _WALKERS:
        _WALKERS[key] = _Walker(selection)
    return _WALKERS[key]


def return_map(point: SectionPoint, selection: PathSelection, *, q: int | None = None,
               budget: int = DEFAULT_BUDGET) -> ReturnRecord:
    """First return of ``point`` to the section.  ``q=None`` gives the
    integral cocycle, otherwise it is reduced mod ``q`` along the way."""
    if point.datum.pair != selection.base:
        raise ValidationError("point does not sit at the base vertex")
    wk = _walker(selection)
    lam = point.lam / point.lam.sum()
    tau = point.tau * point.lam.sum()
    moves, wl, lam2, tau2, logacc = wk.run(lam, tau, budget)
    path = RauzyPath(selection.base, tuple(MOVES[m] for m in moves))
    end = SectionPoint(SuspensionDatum(selection.base, np.array(lam2), np.array(tau2)))
    return ReturnRecord(path, -logacc, wk.cocycle(wl, q), end)


def sample_section_point(selection: PathSelection, rng: np.random.Generator) -> SectionPoint:
    """Uniform ``lam`` on the section slice, ``tau`` from the cone mixture.

    ``lam = Theta0* mu / |Theta0* mu|`` with ``mu`` uniform on the simplex is
    accepted with probability ``(min colsum / |Theta0* mu|)^d``, which
    corrects the Jacobian ``|Theta0* mu|^-d`` of the projective map.
    ``tau`` is ``(Theta0*)^-1`` applied to a Dirichlet mixture of the extreme
    rays of the closed cone, scaled to unit area.
    """
    base, d = selection.base, selection.base.d
    t0 = np.array(theta_star_of_path(selection.gamma0).entries, dtype=float)
    colmin = t0.sum(axis=0).min()
    while True:
        mu = rng.dirichlet(np.ones(d))
        lam = t0 @ mu
        if rng.random() < (colmin / lam.sum()) ** d:
            break
    lam /= lam.sum()
    rays = np.array(cone_extreme_rays(base), dtype=float)
    tau = np.linalg.solve(t0, rng.dirichlet(np.ones(len(rays))) @ rays)
    datum = SuspensionDatum(base, lam, tau)
    tau = tau / area(datum)
    return SectionPoint(SuspensionDatum(base, lam, tau))


def sample_orbit(seed, n_returns: int, selection: PathSelection, q: int | None = None, *,
                 budget: int = DEFAULT_BUDGET, start: SectionPoint | None = None,
                 restart: bool = False) -> list:
    """``n_returns`` successive returns along one orbit from a random start.

    In floating point an orbit eventually lands next to a point with rational
    length ratios, where the next return needs an enormous number of steps or
    hits an exact tie.  With ``restart=True`` such a return is replaced by a
    fresh random section point and the next record is flagged ``restarted``;
    otherwise the error propagates.
    """
    rng = np.random.default_rng(seed)
    point = start if start is not None else sample_section_point(selection, rng)
    out = []
    fresh = False
    while len(out) < n_returns:
        try:
            rec = return_map(point, selection, q=q, budget=budget)
        except (StepBudgetExceeded, TieUndefined):
            if not restart:
                raise
            point, fresh = sample_section_point(selection, rng), True
            continue
        if fresh:
            rec = ReturnRecord(rec.path, rec.roof, rec.cocycle, rec.endpoint, True)
            fresh = False
        out.append(rec)
        point = rec.endpoint
    return out


def roof_tail_stats(samples, *, lo_q: float = 0.5, hi_q: float = 0.99) -> tuple[float, float]:
    """Least-squares slope and r^2 of ``log P(r > t)`` against ``t`` on
    ``[median, 99th percentile]``."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n < 1000:
        raise TooFewSamples(f"need at least 1000 samples, got {n}")
    lo, hi = np.quantile(x, [lo_q, hi_q])
    survival = 1.0 - np.arange(n) / n        # P(r >= x_i) at the sorted points
    keep = (x >= lo) & (x <= hi)
    fit = stats.linregress(x[keep], np.log(survival[keep]))
    return float(fit.slope), float(fit.rvalue ** 2)


# ---------------------------------------------------------------------------
# fiber statistics on the congruence cover

def running_products(records, group) -> np.ndarray:
    """Group indices of the running products ``c_1 c_2 ... c_k``."""
    q = group.q
    cur = np.eye(group.n, dtype=np.int64)
    out = np.empty(len(records), dtype=np.int64)
    mats = np.array([r.cocycle.entries for r in records], dtype=np.int64) % q
    for k, m in enumerate(mats):
        cur = cur @ m % q
        out[k] = group.index(cur[None])[0]
    return out


def cocycle_distribution(seed, n: int, selection: PathSelection, q: int, *,
                         budget: int = DEFAULT_BUDGET, records=None):
    """Occupancy histogram of the running cocycle product on Gamma_q and the
    chi-square test against the uniform distribution.

    Returns ``(group, counts, chi2, pvalue)``.
    """
    from .rvgroup import mod_q_closure, rv_generators
    spec = rv_generators(selection.base)
    size, surj, group = mod_q_closure(spec.matrices, q, return_group=True)
    if not surj:
        raise NotSurjective(f"Rauzy-Veech group does not surject at level {q}")
    counts = np.zeros(len(group), dtype=np.int64)
    if n == 0:
        return group, counts, 0.0, 1.0
    if records is None:
        records = sample_orbit(seed, n, selection, q, budget=budget, restart=True)
    idx = running_products(records[:n], group)
    counts = np.bincount(idx, minlength=len(group))
    chi2, p = stats.chisquare(counts)
    return group, counts, float(chi2), float(p)


@dataclass
class ProductObservable:
    """``u(lam, s, g) = base(lam, s) * fiber[g]``; ``fiber=None`` means 1."""
    base: callable = None
    fiber: np.ndarray | None = None

    def base_value(self, lam, s) -> float:
        return 1.0 if self.base is None else float(self.base(lam, s))


def correlation_estimate(u: ProductObservable, v: ProductObservable, t: float, seed,
                         n: int, selection: PathSelection, q: int, *,
                         orbit_length: int | None = None, group=None, records=None) -> float:
    """Monte-Carlo estimate of ``int u * (v o T_t)`` over the suspension with
    fiber ``Gamma_q`` (probability normalization).

    Points are drawn from a long orbit with weight proportional to the roof
    and a uniform time in ``[0, r)``; flowing for ``t`` crosses returns
    ``k, k+1, ...`` and moves the fiber coordinate ``g -> C^{-1} g`` with
    ``C`` the product of the crossed cocycles.  The fiber average is exact:
    ``(1/|G|) sum_g u_f(g) v_f(C^{-1} g)``.
    """
    from .finite_group import enumerate_group
    from .rvgroup import rv_generators
    rng = np.random.default_rng(seed)
    if group is None:
        group = enumerate_group(rv_generators(selection.base).matrices, q)
    if records is None:
        orbit_length = orbit_length or max(4 * n, 1000)
        records = sample_orbit(rng.integers(2**63), orbit_length, selection, q, restart=True)
    roofs = np.array([r.roof for r in records])
    lams = [r.endpoint.lam for r in records]
    # the start point of return k is the endpoint of return k-1
    starts = [None] + lams[:-1]
    # a start return needs a known start point (so not the first record of a
    # segment) and at least roof + t of orbit left before the next restart
    left = np.empty(len(records))
    acc = 0.0
    for k in range(len(records) - 1, -1, -1):
        acc = roofs[k] + (0.0 if k + 1 == len(records) or records[k + 1].restarted else acc)
        left[k] = acc
    ok = np.array([k > 0 and not r.restarted for k, r in enumerate(records)])
    usable = np.flatnonzero(ok & (left > roofs + t))
    if len(usable) == 0:
        raise StepBudgetExceeded("orbit too short for the requested time")
    p = roofs[usable] / roofs[usable].sum()
    ks = rng.choice(usable, size=n, p=p)
    mats = np.array([r.cocycle.entries for r in records], dtype=np.int64) % q
    n_fib = len(group)
    uf = np.ones(n_fib) if u.fiber is None else np.asarray(u.fiber)
    vf = np.ones(n_fib) if v.fiber is None else np.asarray(v.fiber)
    total = 0.0
    for k in ks:
        s0 = rng.random() * roofs[k]
        s, j = s0 + t, k
        cur = np.eye(group.n, dtype=np.int64)
        while s >= roofs[j]:
            s -= roofs[j]
            cur = cur @ mats[j] % q
            j += 1
            if j >= len(records):
                raise StepBudgetExceeded("orbit too short for the requested time")
        # fiber part: (1/|G|) sum_g uf(g) vf(C^{-1} g) = <uf, vf o L_{C^{-1}}>/|G|
        if u.fiber is None and v.fiber is None:
            fib = 1.0
        else:
            cinv = group.inverse_indices[group.index(cur[None])[0]]
            perm = group.left_perm(group.elements[cinv])
            fib = float(np.vdot(uf, vf[perm]).real) / n_fib
        total += u.base_value(starts[k], s0) * v.base_value(starts[j], s) * fib
    return total / n
