"""How much the saturating-growth spread depends on the net family.

Runs the growth quantity q = n 2^-(n-N) P[f_n](r_n y) on y sampled from the
layers D_{n,alpha}, once with the greedy nets used everywhere else and once
with an equiangular nested family (M_N = 7 * 2^(N-1) equally spaced points).
Both families are 2^-N separated and covering; only their layout differs.

    python demos/growth_net_sensitivity.py
"""
import numpy as np

from capfield.sphere import Net, verify_net
from capfield.suites import cached_nets, growth_quantities

NS = (6, 8, 10, 12)
ALPHAS = (1.5, 2, 3)


def equiangular_nets(n_max: int) -> list[Net]:
    out = []
    for N in range(1, n_max + 1):
        m = 7 * 2 ** (N - 1)
        t = 2 * np.pi * np.arange(m) / m + np.pi / 2
        pts = np.column_stack([np.cos(t), np.sin(t)])
        if out:
            # keep the coarser points first so the family is prefix-nested
            prev = out[-1].points
            rest = pts[1::2]
            pts = np.vstack([prev, rest])
        out.append(Net(1, N, pts))
    return out


def spread(nets) -> tuple[float, dict]:
    qs = growth_quantities(nets, 1, NS, ALPHAS, samples=50, seed=0)
    mins = {k: float(v.min()) for k, v in qs.items()}
    return max(mins.values()) / min(mins.values()), mins


if __name__ == "__main__":
    greedy = list(cached_nets(1, 14, 0))
    lattice = equiangular_nets(14)
    assert all(verify_net(n, 20_000).ok for n in lattice)
    for name, nets in (("greedy", greedy), ("equiangular", lattice)):
        s, mins = spread(nets)
        print(f"{name:12s} spread {s:.2f}  " + "  ".join(f"{k}:{v:.3f}" for k, v in sorted(mins.items())))
