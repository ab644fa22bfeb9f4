"""Walk through canonical orbit representatives for the three subgroup families.

Run: python3 demos/canonical_forms.py
"""

import numpy as np

from hgamma import Family, SubgroupSpec, element_at, inv_rep, inv_rep_any, orbit_equal_oracle
from hgamma.linalg import random_so


def show(title, spec, x, ts):
    print(f"\n{title}")
    base = inv_rep_any(x, spec)
    print(f"  x            = {np.round(x, 4)}")
    print(f"  rep(x)       = {np.round(base.rep, 6)}  status={base.status} t0={base.t0:.4f}")
    for t in ts:
        y = element_at(spec, t) @ x
        out = inv_rep_any(y, spec)
        print(f"  rep(g_{t:+.1f} x) = {np.round(out.rep, 6)}  max diff {np.max(np.abs(out.rep - base.rep)):.1e}")


rng = np.random.default_rng(0)

# Elliptic: two planes rotating at rates 1 and 2 in a random frame.
spec = SubgroupSpec(random_so(4, rng), [1, 2])
show("elliptic, rates [1, 2], random orientation", spec, rng.uniform(size=4), [0.7, 2.5, 5.9])

# Hyperbolic boosts keep v1^2 - v2^2 fixed in the first block; the pivot must be timelike.
spec = SubgroupSpec(np.eye(4), [1, 0.5], Family.HYPERBOLIC)
show("hyperbolic, rates [1, 0.5]", spec, np.array([1.5, 0.4, 0.3, -0.2]), [-1.0, 0.8])
print("  lightlike/spacelike pivot ->", inv_rep_any(np.array([0.2, 0.9, 0, 0]), spec).status)

# Parabolic shears move the first coordinate of each block by t * lambda * second coordinate.
spec = SubgroupSpec(np.eye(4), [1, 1], Family.PARABOLIC)
show("parabolic, rates [1, 1]", spec, np.array([6.0, 2.0, 1.0, 3.0]), [-2.0, 1.5])

# Two points share a canonical form exactly when one lies on the other's orbit.
spec = SubgroupSpec(random_so(4, rng), [1, 3])
x = rng.uniform(size=4)
on, off = element_at(spec, 1.1) @ x, x + 0.05 * rng.normal(size=4)
for name, y in (("on-orbit", on), ("perturbed", off)):
    same = np.allclose(inv_rep(x, spec).rep, inv_rep(y, spec).rep, atol=1e-6)
    print(f"\n{name:9s}: canonical forms equal={same}, brute-force oracle says same orbit={orbit_equal_oracle(x, y, spec)}")

# Non-integer rate ratios: the orbit never closes and the canonical form jumps at the branch cut.
spec = SubgroupSpec(np.eye(4), [1.0, 0.5])
x = np.array([np.cos(3.0), np.sin(3.0), 1.0, 0.0])
y = element_at(spec, 0.5) @ x
print("\nrate ratio 1/2, pivot angle crosses pi:")
print("  rep(x)     =", np.round(inv_rep(x, spec).rep, 4))
print("  rep(g x)   =", np.round(inv_rep(y, spec).rep, 4), "(second block flipped)")
