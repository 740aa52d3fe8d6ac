from fractions import Fraction

import numpy as np
import pytest

from rauzy_lab.errors import (CapExceeded, EmptyBranchSet, EvenModulus, EvenPrime,
                              ModulusMismatch, ValidationError, ZeroModP)
from rauzy_lab.quasirandom import (GroupMeasure, LieAlgebraElement, adjoint_orbit_size,
                                   convolve, decoupling_check, delta, dixon_characters,
                                   dixon_dims, ell1, ell2, flatness_bound_check,
                                   flatness_sides, gamma_q, lie_algebra_elements,
                                   min_dim_bound, min_dim_bound_prime, new_dims,
                                   project_subspace, random_measure, subspace_opnorm,
                                   tilde, trace_formula_bound, uniform)


@pytest.fixture(scope="module")
def sl2_3():
    return gamma_q(3)


def brute_convolve(a, b):
    """(a*b)(x) = sum over g h = x of a(g) b(h), straight from the table."""
    grp = a.group
    out = np.zeros(len(grp), dtype=complex)
    tab = grp.table
    for i in range(len(grp)):
        for j in range(len(grp)):
            out[tab[i, j]] += a.values[i] * b.values[j]
    return out


# -- measure algebra ---------------------------------------------------------------

def test_gamma_q_orders():
    assert [len(gamma_q(q)) for q in (2, 3, 4, 5)] == [6, 24, 48, 120]
    assert len(gamma_q(2, 2)) == 720
    with pytest.raises(CapExceeded):
        gamma_q(5, 2, cap=1000)


def test_convolution_matches_table(sl2_3, rng):
    a, b = random_measure(sl2_3, rng, 7), random_measure(sl2_3, rng)
    np.testing.assert_allclose(convolve(a, b).values, brute_convolve(a, b), atol=1e-12)
    np.testing.assert_allclose((a @ b).values, convolve(a, b).values)


def test_identity_and_tilde(sl2_3, rng):
    mu = random_measure(sl2_3, rng)
    np.testing.assert_allclose(convolve(delta(sl2_3), mu).values, mu.values)
    np.testing.assert_allclose(convolve(mu, delta(sl2_3)).values, mu.values)
    np.testing.assert_allclose(tilde(tilde(mu)).values, mu.values)
    # (a*b)~ = b~ * a~
    nu = random_measure(sl2_3, rng)
    np.testing.assert_allclose(tilde(mu @ nu).values, (tilde(nu) @ tilde(mu)).values, atol=1e-12)


def test_young_inequality(sl2_3, rng):
    for _ in range(50):
        a, b = random_measure(sl2_3, rng), random_measure(sl2_3, rng, 3)
        assert ell1(a @ b) <= ell1(a) * ell1(b) * (1 + 1e-12)
        assert ell2(a @ b) <= ell1(a) * ell2(b) * (1 + 1e-12)


def test_support_round_trip(sl2_3, rng):
    mu = random_measure(sl2_3, rng, 5)
    back = GroupMeasure.from_support(sl2_3, mu.support)
    np.testing.assert_allclose(back.values, mu.values)
    assert len(mu.support) == 5
    assert (mu + mu).values[0] == 2 * mu.values[0]
    with pytest.raises(ValidationError):
        GroupMeasure(sl2_3, np.ones(5))


def test_mismatched_groups(sl2_3):
    with pytest.raises(ModulusMismatch):
        convolve(uniform(sl2_3), uniform(gamma_q(5)))


# -- subspaces and norms -------------------------------------------------------------

@pytest.mark.parametrize("q", [3, 9, 15])
def test_projections_are_orthogonal_projectors(q):
    grp = gamma_q(q)
    rng = np.random.default_rng(q)
    f = rng.standard_normal((len(grp), 2))
    for sub in ("full", "mean_zero", "new"):
        p = project_subspace(grp, f, sub)
        np.testing.assert_allclose(project_subspace(grp, p, sub), p, atol=1e-12)
        np.testing.assert_allclose(np.sum(p * (f - p)), 0, atol=1e-9)
    with pytest.raises(ValidationError):
        project_subspace(grp, f, "old")


def test_new_subspace_kills_pullbacks():
    big, small = gamma_q(9), gamma_q(3)
    from rauzy_lab.finite_group import reduction_map
    red = reduction_map(big, small)
    f = np.random.default_rng(0).standard_normal(len(small))[red]
    np.testing.assert_allclose(project_subspace(big, f, "new"), 0, atol=1e-12)


def test_opnorm_examples(sl2_3):
    for sub in ("full", "mean_zero", "new"):
        assert subspace_opnorm(delta(sl2_3), sub) == pytest.approx(1.0)
    assert subspace_opnorm(uniform(sl2_3), "mean_zero") == pytest.approx(0.0, abs=1e-12)
    assert subspace_opnorm(uniform(sl2_3), "full") == pytest.approx(1.0)


@pytest.mark.parametrize("q", [5, 9])
def test_opnorm_chain_and_methods(q):
    grp = gamma_q(q)
    rng = np.random.default_rng(q)
    for _ in range(3):
        mu = random_measure(grp, rng, 6)
        dense = {s: subspace_opnorm(mu, s, method="dense") for s in ("full", "mean_zero", "new")}
        assert dense["new"] <= dense["mean_zero"] * (1 + 1e-9)
        assert dense["mean_zero"] <= dense["full"] * (1 + 1e-9)
        for s, v in dense.items():
            assert subspace_opnorm(mu, s) == pytest.approx(v, rel=1e-6)
        if q == 5:
            assert dense["new"] == pytest.approx(dense["mean_zero"], rel=1e-10)


# -- flatness and the trace bound -------------------------------------------------------

def test_flatness_examples(sl2_3):
    lhs, rhs = flatness_sides(delta(sl2_3, 3))
    assert lhs == pytest.approx(1.0)
    assert rhs == pytest.approx(1 / np.sqrt(24) + 1)
    u = uniform(sl2_3)
    lhs, rhs = flatness_sides(u)
    assert lhs == pytest.approx(1 / np.sqrt(24))
    assert flatness_bound_check(u)


@pytest.mark.parametrize("q,g", [(3, 1), (2, 2)])
def test_flatness_random(q, g):
    grp = gamma_q(q, g)
    rng = np.random.default_rng(0)
    for k in range(100):
        assert flatness_bound_check(random_measure(grp, rng, None if k % 2 else 5))


def test_trace_bound_dominates_new_norm(sl2_3):
    dmin = min(new_dims(3))
    rng = np.random.default_rng(1)
    for k in range(100):
        mu = random_measure(sl2_3, rng, None if k % 2 else 4)
        assert trace_formula_bound(mu, dmin) >= subspace_opnorm(mu, "new", method="dense") * (1 - 1e-12)


def test_trace_bound_examples(sl2_3, rng):
    assert trace_formula_bound(delta(sl2_3), 1) == pytest.approx(24 ** 0.25)
    mu = random_measure(sl2_3, rng)
    assert trace_formula_bound(mu * 3.0, 2) == pytest.approx(3 * trace_formula_bound(mu, 2))
    with pytest.raises(ValidationError):
        trace_formula_bound(mu, 0)


# -- characters -----------------------------------------------------------------------

def test_dixon_known_tables():
    assert dixon_dims(2) == [1, 1, 2]
    assert dixon_dims(3) == [1, 1, 1, 2, 2, 2, 3]
    # binary icosahedral group
    assert dixon_dims(5) == [1, 2, 2, 3, 3, 4, 4, 5, 6]
    # Sp_4(F_2) is the symmetric group S_6
    assert dixon_dims(2, 2) == [1, 1, 5, 5, 5, 5, 9, 9, 10, 10, 16]


@pytest.mark.parametrize("q", [3, 4, 5, 7, 9])
def test_character_table_orthogonality(q):
    ch = dixon_characters(q)
    n = ch.class_sizes.sum()
    gram = (ch.table * ch.class_sizes) @ ch.table.conj().T / n
    np.testing.assert_allclose(gram, np.eye(len(ch.dims)), atol=1e-8)
    assert int(np.sum(ch.dims ** 2)) == n


def test_new_dims():
    # prime level: every nontrivial character is new
    assert new_dims(5) == dixon_dims(5)[1:]
    # level 9: the 7 characters of SL_2(F_3) are not new
    assert len(dixon_dims(9)) - len(new_dims(9)) == 7
    with pytest.raises(CapExceeded):
        dixon_dims(7, 2)


def test_prime_bounds():
    assert min_dim_bound_prime(3, 2).bound == 4
    assert min_dim_bound_prime(5).bound == 2
    assert min_dim_bound_prime(3).bound == 1
    assert min_dim_bound_prime(7).method == "prime_exact"
    with pytest.raises(EvenPrime):
        min_dim_bound_prime(2)
    with pytest.raises(ValidationError):
        min_dim_bound_prime(9)


def test_composite_bounds():
    assert min_dim_bound(15) .bound == 2
    assert min_dim_bound(15).method == "crt_composite"
    assert min_dim_bound(9).bound == 3
    assert min_dim_bound(9).method == "prime_power_orbit"
    assert min_dim_bound(3, 2).bound == 4
    assert isinstance(min_dim_bound(27).bound, Fraction)
    with pytest.raises(EvenModulus):
        min_dim_bound(6)


@pytest.mark.parametrize("q", [3, 5, 7, 9, 15])
def test_bound_is_sound(q):
    assert min_dim_bound(q).bound <= min(new_dims(q))


def test_bound_sharp_at_five():
    assert min_dim_bound(5).bound == 2 == min(new_dims(5))


# -- adjoint orbits ----------------------------------------------------------------

def conjugation_orbits(p, R):
    """Partition of the X != 0 mod p elements into orbits by conjugating
    with every group element at once."""
    mod = p ** R
    grp = gamma_q(mod)
    hs = grp.elements
    hinv = hs[grp.inverse_indices]
    todo = {x.matrix for x in lie_algebra_elements(p, R) if np.any(np.array(x.matrix) % p)}
    orbits = []
    while todo:
        x = np.array(next(iter(todo)))
        conj = np.einsum("nij,jk,nkl->nil", hs, x, hinv) % mod
        orbit = {tuple(map(tuple, m)) for m in conj.tolist()}
        orbits.append((x, orbit))
        todo -= orbit
    return orbits


@pytest.mark.parametrize("p,R", [(3, 1), (3, 2), (5, 1)])
def test_orbits_exhaustive(p, R):
    for x, orbit in conjugation_orbits(p, R):
        size = adjoint_orbit_size(LieAlgebraElement(p, R, tuple(map(tuple, x.tolist()))))
        assert size == len(orbit)
        assert size >= p ** R


def test_nilpotent_orbit():
    assert adjoint_orbit_size(LieAlgebraElement(3, 1, ((0, 1), (0, 0)))) == 4


def test_lie_algebra_validation():
    with pytest.raises(ValidationError):
        LieAlgebraElement(3, 1, ((1, 0), (0, 0)))      # trace 1 is not in sl_2
    with pytest.raises(ZeroModP):
        adjoint_orbit_size(LieAlgebraElement(3, 2, ((0, 3), (0, 0))))
    assert sum(1 for _ in lie_algebra_elements(3, 1)) == 27


# -- decoupling ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_branches(torus_sel):
    from rauzy_lab.transfer import make_transfer_config
    return make_transfer_config(torus_sel, n=8, cutoff=12).branches


def test_decoupling_single_block(small_branches):
    rep = decoupling_check(small_branches, 0.0, 2, 1, 3)
    assert rep.dominated and rep.c == 0
    np.testing.assert_allclose(rep.mu1.values, rep.mu2.values)
    assert rep.B == pytest.approx(1.0)


@pytest.mark.parametrize("K", [2, 3])
def test_decoupling_dominates(small_branches, K):
    rep = decoupling_check(small_branches, 0.0, 1, K, 3)
    assert rep.dominated
    assert rep.max_excess <= 1e-12 * np.abs(rep.mu2.values).max()
    assert rep.B >= 1 - 1e-12
    assert rep.block_rate < 1
    assert rep.n_paths == len(small_branches) ** K


def test_decoupling_errors(small_branches):
    with pytest.raises(EmptyBranchSet):
        decoupling_check([], 0.0, 1, 1, 3)
    with pytest.raises(CapExceeded):
        decoupling_check(small_branches, 0.0, 3, 3, 3, cap=1000)
    with pytest.raises(ValidationError):
        decoupling_check(small_branches, 0.0, 0, 1, 3)
