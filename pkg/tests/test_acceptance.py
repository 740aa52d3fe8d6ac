"""Acceptance suite: one test per criterion, at the stated tolerances.

Run on its own with ``pytest tests/test_acceptance.py`` (or
``python3 tests/test_acceptance.py``); a PASS/FAIL line per criterion is
printed in the terminal summary.
"""
import time

import numpy as np
import pytest
from scipy.optimize import linprog

from rauzy_lab.cocycle import (check_intertwining, cone_constraints, omega,
                               theta_star_of_path)
from rauzy_lab.dynamics import (SuspensionDatum, area, cocycle_distribution, induction_step,
                                roof_tail_stats, sample_orbit, teich_flow)
from rauzy_lab.finite_group import enumerate_group
from rauzy_lab.quasirandom import (LieAlgebraElement, adjoint_orbit_size, decoupling_check,
                                   flatness_bound_check, gamma_q, lie_algebra_elements,
                                   min_dim_bound, new_dims, random_measure, subspace_opnorm,
                                   trace_formula_bound)
from rauzy_lab.rauzy import apply_move, parse_pair, rauzy_class
from rauzy_lab.rvgroup import (cayley_gap, dense_gap, mod_q_closure, rv_generators,
                               spanning_tree_loops)
from rauzy_lab.selection import make_selection
from rauzy_lab.transfer import (make_transfer_config, normalized_weights, rpf_leading,
                                twisted_radius)

from conftest import all_classes

criterion = pytest.mark.criterion


@pytest.fixture(scope="module")
def torus_orbit(torus_sel):
    """10^5 torus returns with cocycles mod 3 (shared by criteria 7 and 15)."""
    return sample_orbit(20240, 100_000, torus_sel, 3, restart=True)


@pytest.fixture(scope="module")
def transfer_base(torus_sel):
    cfg = make_transfer_config(torus_sel, n=64, cutoff=1000)
    return cfg, rpf_leading(cfg, 0.0)


@criterion(1, "combinatorial exactness of Rauzy classes")
def test_criterion_01_classes():
    t0 = time.perf_counter()
    torus = rauzy_class(parse_pair("AB/BA"))
    assert (len(torus), len(torus.arrows)) == (1, 2)
    assert len(rauzy_class(parse_pair("ABC/CBA"))) == 3
    assert len(rauzy_class(parse_pair("ABCD/DCBA"))) == 7
    assert time.perf_counter() - t0 < 1.0


@criterion(2, "intertwining relation on every arrow, d <= 5")
def test_criterion_02_intertwining():
    t0 = time.perf_counter()
    n = 0
    for cls in all_classes(5):
        for arrow in cls.arrows:
            assert check_intertwining(arrow), arrow.text()
            n += 1
    assert n > 0
    assert time.perf_counter() - t0 < 10.0


@criterion(3, "genus from rank of Omega, constant on classes")
def test_criterion_03_genus():
    def genera(text):
        return {int(np.linalg.matrix_rank(omega(v).to_numpy(float))) // 2
                for v in rauzy_class(parse_pair(text)).vertices}

    assert genera("AB/BA") == {1}
    assert genera("ABC/CBA") == {1}
    assert genera("ABCD/DCBA") == {2}


@criterion(4, "spanning-tree generators surject mod q")
def test_criterion_04_surjectivity():
    t0 = time.perf_counter()
    hyper = rv_generators(parse_pair("ABCD/DCBA"))
    assert mod_q_closure(hyper.matrices, 3) == (51840, True)
    torus = rv_generators(parse_pair("AB/BA"))
    for q, size in zip((2, 3, 4, 5), (6, 24, 48, 120)):
        assert mod_q_closure(torus.matrices, q) == (size, True)
    assert time.perf_counter() - t0 < 300


def _theta_star_by_elementary_ops(path):
    """Theta* as a product of elementary matrices, one column addition per move."""
    d = path.start.d
    ix = path.start.alphabet.index
    m = np.eye(d, dtype=object)
    v = path.start
    for move in path.moves:
        arrow = apply_move(v, move)
        m[:, ix[arrow.loser]] = m[:, ix[arrow.loser]] + m[:, ix[arrow.winner]]
        v = arrow.target
    return m


def _strongly_positive_lp(path):
    """Entries >= 1 and, by linear programming, (Theta*)^-1 sends the closed
    cone minus the origin into the open cone."""
    ts = _theta_star_by_elementary_ops(path)
    if np.any(ts < 1):
        return False
    inv = np.linalg.inv(ts.astype(float))
    c = np.array(cone_constraints(path.start), dtype=float)
    w = c.sum(axis=0)                 # positive on the closed cone minus 0
    for row in c @ inv:
        res = linprog(row, A_ub=-c, b_ub=np.zeros(len(c)), A_eq=w[None, :], b_eq=[1.0],
                      bounds=[(None, None)] * len(w), method="highs")
        if res.status != 0 or res.fun <= 1e-9:
            return False
    return True


def _occurrences(path, sub):
    verts = path.vertices
    n, m = len(path), len(sub)
    return [i for i in range(n - m + 1)
            if verts[i] == sub.start and path.moves[i:i + m] == sub.moves]


def _neat_brute(path):
    # no proper shift of the loop lines up with itself
    doubled = path + path
    occ = _occurrences(doubled, path)
    return all(not (0 < a < len(path)) for a in occ)


@criterion(5, "gamma0 builder with spanning-tree upsilon")
def test_criterion_05_gamma0():
    t0 = time.perf_counter()
    for text in ("AB/BA", "ABCD/DCBA"):
        base = parse_pair(text)
        ups0 = spanning_tree_loops(rauzy_class(base), base)
        sel = make_selection(base, None, ups0)
        g0 = sel.gamma0
        assert g0.is_loop and g0.start == base
        assert _strongly_positive_lp(g0)
        assert _neat_brute(g0)
        assert all(not _occurrences(u, g0) for u in sel.upsilon)
        assert len(sel.upsilon) == len(set(ups0) | {u + u for u in ups0})
    assert time.perf_counter() - t0 < 60


@criterion(6, "area conserved by induction and flow")
def test_criterion_06_area():
    from rauzy_lab.cocycle import cone_extreme_rays
    rng = np.random.default_rng(6)
    steps = 0
    worst = 0.0
    while steps < 10_000:
        pair = parse_pair(["AB/BA", "ABC/CBA", "ABCD/DCBA", "ABCDE/EDCBA"][steps // 2500])
        rays = np.array(cone_extreme_rays(pair), dtype=float)
        x = SuspensionDatum(pair, rng.dirichlet(np.ones(pair.d)),
                            rng.dirichlet(np.ones(len(rays))) @ rays)
        x = SuspensionDatum(pair, x.lam, x.tau / area(x))
        for _ in range(100):
            y, _ = induction_step(x)
            worst = max(worst, abs(area(y) - area(x)))
            z = teich_flow(x, rng.normal())
            worst = max(worst, abs(area(z) - area(x)))
            s = y.lam.sum()
            x = SuspensionDatum(y.pair, y.lam / s, y.tau * s)
            steps += 1
    assert worst < 1e-12


@criterion(7, "torus roof tails are exponential")
def test_criterion_07_roof_tails(torus_orbit):
    roofs = np.array([r.roof for r in torus_orbit])
    assert len(roofs) == 100_000
    slope, r2 = roof_tail_stats(roofs)
    assert slope < 0
    assert r2 > 0.95
    assert roofs.min() > 0


@criterion(8, "RPF leading eigenvalue near 1, h positive")
def test_criterion_08_rpf(torus_sel, transfer_base):
    cfg, rpf = transfer_base
    assert abs(rpf.lambda_sigma - 1) < 0.05
    assert np.all(rpf.h_sigma > 0)
    fine = make_transfer_config(torus_sel, n=128, cutoff=3000)
    rpf_fine = rpf_leading(fine, 0.0)
    assert abs(rpf_fine.lambda_sigma - 1) < 0.01
    assert np.all(rpf_fine.h_sigma > 0)


@criterion(9, "normalized operator is Markoff")
def test_criterion_09_markoff(transfer_base):
    cfg, _ = transfer_base
    for sigma in (-0.1, 0.0, 0.1):
        rpf = rpf_leading(cfg, sigma)
        total = normalized_weights(cfg, rpf).sum(axis=0)
        assert np.max(np.abs(total - 1)) < 1e-9


@criterion(10, "convolution flatness inequality")
def test_criterion_10_flatness():
    rng = np.random.default_rng(10)
    for q, g in ((3, 1), (2, 2)):
        grp = gamma_q(q, g)
        for k in range(100):
            assert flatness_bound_check(random_measure(grp, rng, None if k % 2 else 6))


@criterion(11, "quasirandom bound is sound, sharp at p=5")
def test_criterion_11_dim_bound():
    for q in (3, 5, 7, 9, 15):
        assert min_dim_bound(q).bound <= min(new_dims(q))
    assert min_dim_bound(5).bound == 2 == min(new_dims(5))


@criterion(12, "adjoint orbits have size >= p^R")
def test_criterion_12_orbits():
    t0 = time.perf_counter()
    for p, R in ((3, 1), (3, 2), (5, 1)):
        mod = p ** R
        grp = gamma_q(mod)
        hs, hinv = grp.elements, grp.elements[grp.inverse_indices]
        todo = {x.matrix for x in lie_algebra_elements(p, R) if np.any(np.array(x.matrix) % p)}
        while todo:
            x = next(iter(todo))
            size = adjoint_orbit_size(LieAlgebraElement(p, R, x))
            assert size >= mod
            conj = np.einsum("nij,jk,nkl->nil", hs, np.array(x), hinv) % mod
            orbit = {tuple(map(tuple, m)) for m in conj.tolist()}
            assert len(orbit) == size
            todo -= orbit
    assert adjoint_orbit_size(LieAlgebraElement(3, 1, ((0, 1), (0, 0)))) == 4
    assert time.perf_counter() - t0 < 60


@criterion(13, "trace bound dominates the new-subspace norm")
def test_criterion_13_trace_bound():
    grp = gamma_q(3)
    dmin = min(new_dims(3))
    rng = np.random.default_rng(13)
    for k in range(100):
        mu = random_measure(grp, rng, None if k % 2 else 4)
        assert trace_formula_bound(mu, dmin) >= subspace_opnorm(mu, "new", method="dense")


@criterion(14, "decoupling majorization on the truncated torus model")
def test_criterion_14_decoupling(torus_sel):
    branches = make_transfer_config(torus_sel, n=2, cutoff=12).branches
    for K in (1, 2, 3):
        rep = decoupling_check(branches, 0.0, 1, K, 3)
        assert rep.dominated
        assert rep.block_rate < 1


@criterion(15, "fiber equidistribution and uniform twisted decay")
def test_criterion_15_equidistribution(torus_sel, torus_orbit, transfer_base):
    _, counts, _, p = cocycle_distribution(0, len(torus_orbit), torus_sel, 3,
                                           records=torus_orbit)
    assert counts.sum() == 100_000
    assert p > 0.01
    cfg, rpf = transfer_base
    r3 = twisted_radius(cfg, rpf, 3, k_max=20).rate
    r5 = twisted_radius(cfg, rpf, 5, k_max=20).rate
    assert r3 < 1 and r5 < 1
    assert abs(r3 - r5) <= 0.3 * min(r3, r5)


@criterion(16, "Cayley spectral gaps")
def test_criterion_16_cayley():
    gens = rv_generators(parse_pair("AB/BA")).matrices
    for q in (3, 5, 7):
        assert cayley_gap(gens, q).lambda1 > 0
    for q in (2, 3):
        grp = enumerate_group(gens, q)
        assert abs(cayley_gap(gens, q).lambda1 - dense_gap(grp, gens)) < 1e-8


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
