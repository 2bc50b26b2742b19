"""Right inverse of the linearized operator, mode by mode.

Each test source h is mapped to phi = T h and checked against L_k phi = h
in the weighted ** norm.  The ratio ||phi||_* / ||h||_** is the observed
operator bound.

Run: python3 demos/03_linear_solver.py
"""

from supercrit import LinearSolver, ModeExpansion, WeightedNormConfig, default_grid, derive_exponents, ground_state
from supercrit.linop import reference_sources, right_inverse_residual

e = derive_exponents(6, 3)
gs = ground_state(e, default_grid())
cfg = WeightedNormConfig.for_exponents(e)
T = LinearSolver(gs, cfg)

print(f"{'k':>2} {'source':<12} {'||h||_**':>10} {'||Th||_*':>10} {'ratio':>8} {'residual':>10}")
for k in (0, 1, 2, 5):
    for name, h in reference_sources(k, gs.grid, e.m)[::3]:
        H = ModeExpansion.single(k, h, e.n)
        phi = T(H)
        res = right_inverse_residual(H, phi, gs, cfg)
        info = phi.info
        print(f"{k:>2} {name:<12} {info['starstar_in']:10.4e} {info['star_out']:10.4e} {info['C_T']:8.4f} {res:10.2e}")
