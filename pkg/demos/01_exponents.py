"""Exponent table and regime for a few (n, p) pairs.

Run: python3 demos/01_exponents.py
"""

from supercrit import classify_regime, derive_exponents

CASES = [(6, 3), (6, 2.2), (11, 7), (11, 5), (20, 2)]

print(f"{'n':>3} {'p':>5} {'m':>8} {'alpha':>8} {'beta':>8} {'L':>8} {'p_c':>10}  regime")
for n, p in CASES:
    e = derive_exponents(n, p)
    print(
        f"{n:>3} {p:>5} {e.m:8.4f} {e.alpha:8.4f} {e.beta:8.4f} {e.L:8.4f} {e.p_c:10.6f}  "
        f"{classify_regime(e).name}"
    )

# the Joseph-Lundgren exponent only exists from n = 11 on
e = derive_exponents(11, 7)
print(f"\nn=11: p_c = {e.p_c:.12f}, so p=7 sits above it and the ground states are ordered")
