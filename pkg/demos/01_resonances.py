"""Which coupling ratios alpha produce exact resonances?

The quadratic interactions of the system oscillate with phases
Omega(k1, k2) that vanish on integer lines only for a thin set of
rational alpha.  This demo classifies a few values, lists the resonant
modes for alpha = 1/7, and shows how badly the golden-ratio-type and
Liouville-type inputs are approximated by rationals.
"""
from fractions import Fraction
import math

from mbtorus import classify_alpha, near_resonance_scan, resonant_modes, type_index_estimate

print("classification of a few coupling ratios")
for alpha in ("1/2", "1/7", "1/3", "4/19"):
    cls = classify_alpha(alpha, estimate_type=False)
    extra = f"  witness (p, q) = ({cls.p}, {cls.q})" if cls.special else ""
    print(f"  alpha = {alpha:>5}: {cls.kind}{extra}")

cls = classify_alpha("1/7")
print("\nresonance roots at alpha = 1/7:", {k: str(v) for k, v in cls.exact_roots.items()})
print("resonant modes with |k| <= 4 (family, root, k, partners):")
for m in resonant_modes(cls, 4):
    print(f"  {m.family} {m.root} k={m.k:>3} partners={m.partners}")

print("\nnear resonances at alpha = 1/2 (|n/k - root| < 0.02, k <= 30):")
for h in near_resonance_scan(classify_alpha("1/2"), 30, 0.02)[:6]:
    print(f"  root {h.root} k={h.k} n={h.n} distance={h.distance:.2e}")

golden = (1 + math.sqrt(5)) / 2
liouville = sum(Fraction(1, 10 ** math.factorial(n)) for n in range(1, 5))
print(f"\ntype-index estimate, golden ratio:      {type_index_estimate(golden, 10 ** 6):.3f}")
print(f"type-index estimate, Liouville-type:    {type_index_estimate(liouville, 10 ** 20):.3f}")
