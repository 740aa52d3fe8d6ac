"""Rauzy classes, the cocycle and the distinguished loop.

Walks through the combinatorial layer: enumerate a few classes, check the
symplectic intertwining on every arrow, read off the genus and build the
loop ``gamma0`` that defines the first-return section.

    python3 demos/01_rauzy_classes.py
"""
import numpy as np

from rauzy_lab.cocycle import check_intertwining, omega, theta_star_of_path
from rauzy_lab.rauzy import parse_pair, rauzy_class
from rauzy_lab.rvgroup import spanning_tree_loops
from rauzy_lab.selection import make_selection


def main():
    for text in ("AB/BA", "ABC/CBA", "ABCD/DCBA"):
        pair = parse_pair(text)
        cls = rauzy_class(pair)
        rank = np.linalg.matrix_rank(omega(pair).to_numpy(float))
        ok = all(check_intertwining(a) for a in cls.arrows)
        print(f"{text:10s} vertices={len(cls):2d} arrows={len(cls.arrows):2d} "
              f"genus={rank // 2} intertwining={'ok' if ok else 'BROKEN'}")

    base = parse_pair("ABCD/DCBA")
    loops = spanning_tree_loops(rauzy_class(base), base)
    print(f"\nspanning-tree loops at {base.short()}: {len(loops)}")
    sel = make_selection(base, None, loops)
    print(f"gamma0 avoiding them: {''.join(m.value for m in sel.gamma0.moves)} "
          f"(length {len(sel.gamma0)})")
    print("Theta* of gamma0:")
    print(np.array(theta_star_of_path(sel.gamma0).entries))


if __name__ == "__main__":
    main()
