"""A short walk through the package on the circle.

    python demos/tour.py
"""
import numpy as np

from capfield import (CapFunction, beta_hat, cap_kernel_integral, check_domination,
                      geometric_witness, limsup_cover_sets, radial_profile, saturating_function,
                      slice_radii)
from capfield.exponents import box_dimension
from capfield.suites import cached_nets, point_divergence_witness

N = np.array([0.0, 1.0])

# Harmonic measure of a shrinking cap stays bounded below.
for r in (0.6, 0.9, 0.99, 0.999):
    print(f"r={r}: integral of P(rN, .) over the (1-r)-cap = {cap_kernel_integral(1, r, 0.0, 1 - r):.4f}")

# Slice ladder at r = 0.99 and the domination check for a point mass.
dec = slice_radii(1, 0.99)
print("slice radii:", np.round(dec.radii, 4))
res = check_domination(CapFunction.atom(N), N, 0.99)
print(f"atom at N: |P[mu]| = {res.lhs:.1f} <= {res.rhs:.1f}, chosen radius {res.delta_star:.3f}")

# A function blowing up like (1-r)^-1/2 at N, with an extra factor n.
f = point_divergence_witness(0.5, 1, truncation=40)
prof = radial_profile(f, N, 1, 14)
for n, _, v in prof.rows[::3]:
    print(f"n={n:2d}: P[f](r_n N) / 2^(n/2) = {v / 2 ** (n / 2):.2f}")

# Saturating functions are large on the sparse layers D_{n,alpha}.
nets = cached_nets(1, 14, 0)
fn = saturating_function(nets, 1, 10)
layer = limsup_cover_sets(nets, 2, 10)
ys = layer.sample(5, np.random.default_rng(0))
print("P[f_10] on D_{10,2}:", np.round([radial_profile(fn, y, 10, 10).values[0] for y in ys], 2))

# The layers have box dimension close to d / alpha.
dim = box_dimension(lambda n: limsup_cover_sets(nets, 2, n), 6, 12, nets, layered=True)
print(f"box dimension of the D_alpha layers: {dim.dim:.3f} (r^2 {dim.fit_r2:.3f})")

# The geometric mixture used for spectrum runs.
W = geometric_witness(nets, 1, 14)
print("W levels:", W.meta["levels"], "beta_hat at N:", round(beta_hat(radial_profile(W, N, 4, 14)), 3))
