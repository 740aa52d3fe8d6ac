"""Quasirandomness of congruence quotients.

Compares the representation-dimension lower bound with the actual smallest
new irreducible, checks the convolution flatness inequality on random
measures and prints Cayley graph gaps for the torus generators.

    python3 demos/04_quasirandom.py
"""
import numpy as np

from rauzy_lab.quasirandom import (flatness_bound_check, gamma_q, min_dim_bound, new_dims,
                                   random_measure)
from rauzy_lab.rauzy import parse_pair
from rauzy_lab.rvgroup import cayley_gap, rv_generators


def main():
    print(" q  bound  smallest new irrep")
    for q in (3, 5, 7, 9, 15):
        print(f"{q:2d}  {str(min_dim_bound(q).bound):>5s}  {min(new_dims(q)):5d}")

    rng = np.random.default_rng(1)
    grp = gamma_q(5)
    ok = sum(flatness_bound_check(random_measure(grp, rng)) for _ in range(20))
    print(f"\nflatness inequality on SL2(Z/5): {ok}/20 random measures")

    gens = rv_generators(parse_pair("AB/BA")).matrices
    for q in (2, 3, 5, 7):
        print(f"Cayley gap mod {q}: {cayley_gap(gens, q).lambda1:.4f}")


if __name__ == "__main__":
    main()
