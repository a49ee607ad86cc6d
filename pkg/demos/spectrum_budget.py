"""Where the exponent budget of the geometric witness goes at desk scale.

For W = sum_k 2^-k f_{2^k} truncated at n = 14, prints the largest
finite-scale exponent log2 P[W](r_n y) / n over a probe net, row by row,
and the part of it lost to the mixture weight 2^-k, the 1/n normalization
and ||f~_n||_1.

    python demos/spectrum_budget.py
"""
import numpy as np

from capfield import geometric_witness
from capfield.exponents import profile_matrix
from capfield.suites import cached_nets

nets = cached_nets(1, 14, 0)
W = geometric_witness(nets, 1, 14)
probes = nets[11].points
ns = list(range(4, 15))
vals = profile_matrix(W, probes, ns)
best = vals.max(axis=1)
print(" n   max P[W](r_n y)   log2/n")
for n, v in zip(ns, best):
    print(f"{n:2d}   {v:14.3f}   {np.log2(v) / n:6.3f}")
for k, n in enumerate(W.meta["levels"], start=1):
    loss = k + np.log2(n) + np.log2(3.7)
    print(f"level n_k={n}: weight 2^-{k}, 1/n_k and 1/||f~|| cost ~{loss:.1f} bits, "
          f"{loss / n:.2f} of exponent at scale n_k")
