"""The discretized transfer operator and its twisted versions.

Computes the leading eigenvalue as the grid is refined, shows the pressure
curve in sigma, then the decay of twisted iterates on mean-zero functions
for two moduli.

    python3 demos/03_transfer_operator.py
"""
from rauzy_lab.rauzy import parse_pair
from rauzy_lab.selection import make_selection
from rauzy_lab.transfer import make_transfer_config, rpf_leading, twisted_radius


def main():
    sel = make_selection(parse_pair("AB/BA"))
    print("grid  branches  lambda_0")
    for n in (16, 32, 64):
        cfg = make_transfer_config(sel, n=n, cutoff=300)
        print(f"{n:4d}  {len(cfg.branches):8d}  {rpf_leading(cfg, 0.0).lambda_sigma:.6f}")

    cfg = make_transfer_config(sel, n=64, cutoff=1000)
    for sigma in (-0.1, 0.0, 0.1):
        print(f"sigma={sigma:+.1f}  lambda={rpf_leading(cfg, sigma).lambda_sigma:.4f}")

    rpf = rpf_leading(cfg, 0.0)
    for q in (3, 5):
        dec = twisted_radius(cfg, rpf, q, k_max=20)
        print(f"q={q}: mean-zero decay rate {dec.rate:.3f}")


if __name__ == "__main__":
    main()
