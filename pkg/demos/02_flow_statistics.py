"""Sampling the first-return map of the Teichmueller flow.

Samples a torus orbit, fits the exponential tail of the roof function and
tests equidistribution of the cocycle in SL2(Z/3).

    python3 demos/02_flow_statistics.py [n_returns]
"""
import sys

import numpy as np

from rauzy_lab.dynamics import cocycle_distribution, roof_tail_stats, sample_orbit
from rauzy_lab.rauzy import parse_pair
from rauzy_lab.selection import make_selection


def main(n=20_000):
    sel = make_selection(parse_pair("AB/BA"))
    records = sample_orbit(0, n, sel, 3, restart=True)
    roofs = np.array([r.roof for r in records])
    slope, r2 = roof_tail_stats(roofs)
    print(f"{n} returns, mean roof {roofs.mean():.4f}, max {roofs.max():.2f}")
    print(f"log-survival slope {slope:.3f} (r^2 = {r2:.4f}): exponential tail")

    order, counts, chi2, p = cocycle_distribution(0, n, sel, 3, records=records)
    print(f"cocycle mod 3 over {order.order} elements: chi2 = {chi2:.1f}, p = {p:.3f}")
    print("busiest / quietest class:", counts.max(), counts.min())


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 20_000)
