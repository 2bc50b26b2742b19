"""Weighted norms and the mode-by-mode right inverse T of Delta + p w^(p-1).

Functions are handled in coefficient space: a :class:`ModeExpansion` stores
one radial profile per spherical-harmonic degree k (the n-fold multiplicity
of each degree is not resolved; a single coefficient stands for the degree).
The angular supremum in the norms is bounded by the sum of |phi_k(r)|,
exact for single-mode inputs.

Homogeneous solutions of L_k z = 0 are integrated in s = log r, where

    z_ss + (n-2) z_s + (p v(s)^(p-1) - lambda_k) z = 0,   v = r^m w,

and Wronskians are normalized to r^(n-1) (z_d z_g' - z_d' z_g) = 1, with
z_g the solution regular at the origin and z_d the other one.  With that
convention every particular solution below has the form

    phi = z_g(r) A(r) - z_d(r) B(r),  A' = z_d h r^(n-1),  B' = z_g h r^(n-1).
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .constants import mode1_solvable, mode_eigenvalue
from .radialgrid import (
    RadialProfile,
    cumulative_integrals,
    interval_integrals,
    operator_matrix,
    value_at_s,
)

WRONSKIAN_DRIFT_MAX = 1e-6
HOMOGENEOUS_RTOL = 1e-12


class SolverError(RuntimeError):
    pass


class ContractViolation(ValueError):
    pass


@dataclass(frozen=True)
class WeightedNormConfig:
    sigma: float
    m: float
    split_radius: float = 1.0
    n: int | None = None

    def __post_init__(self):
        if self.n is not None and not 0 < self.sigma < self.n - 2:
            raise ValueError(f"sigma={self.sigma} must lie in (0, n-2)")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @classmethod
    def for_exponents(cls, e, sigma=None):
        return cls(sigma=e.sigma if sigma is None else sigma, m=e.m, n=e.n)


@dataclass(frozen=True, eq=False)
class ModeExpansion:
    grid: object
    n: int
    coefficients: dict
    kmax: int
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, prof in self.coefficients.items():
            if not 0 <= k <= self.kmax:
                raise ValueError(f"mode {k} outside 0..{self.kmax}")
            if prof.grid != self.grid:
                raise ValueError("all mode coefficients must share one grid")

    @classmethod
    def zeros(cls, grid, n, kmax=0):
        return cls(grid, n, {}, kmax)

    @classmethod
    def single(cls, k, profile, n, kmax=None):
        return cls(profile.grid, n, {k: profile}, max(k, kmax or 0))

    def mode(self, k):
        prof = self.coefficients.get(k)
        return RadialProfile.zeros(self.grid) if prof is None else prof

    def modes(self):
        return sorted(self.coefficients)

    def nonzero_modes(self):
        return [k for k in self.modes() if np.any(self.coefficients[k].values != 0)]

    def abs_sum(self):
        total = np.zeros(self.grid.count)
        for prof in self.coefficients.values():
            total += np.abs(prof.values)
        return total

    def scaled(self, a):
        return ModeExpansion(
            self.grid, self.n, {k: p.scaled(a) for k, p in self.coefficients.items()}, self.kmax
        )

    def __add__(self, other):
        if other.grid != self.grid:
            raise ValueError("expansions live on different grids")
        coeffs = dict(self.coefficients)
        for k, prof in other.coefficients.items():
            coeffs[k] = coeffs[k] + prof if k in coeffs else prof
        return ModeExpansion(self.grid, self.n, coeffs, max(self.kmax, other.kmax))

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def truncated(self, kmax):
        return ModeExpansion(
            self.grid,
            self.n,
            {k: p for k, p in self.coefficients.items() if k <= kmax},
            kmax,
        )


def _weighted_sup(values, grid, inner_power, outer_power, split):
    r = grid.r_nodes
    inner = r <= split
    outer = r >= split
    a = np.max(r[inner] ** inner_power * values[inner]) if inner.any() else 0.0
    b = np.max(r[outer] ** outer_power * values[outer]) if outer.any() else 0.0
    return float(a + b)


def star_norm(phi, cfg):
    return _weighted_sup(phi.abs_sum(), phi.grid, cfg.sigma, cfg.m, cfg.split_radius)


def starstar_norm(h, cfg):
    return _weighted_sup(h.abs_sum(), h.grid, 2 + cfg.sigma, 2 + cfg.m, cfg.split_radius)


def profile_star_norm(prof, cfg):
    return _weighted_sup(np.abs(prof.values), prof.grid, cfg.sigma, cfg.m, cfg.split_radius)


def profile_starstar_norm(prof, cfg):
    return _weighted_sup(np.abs(prof.values), prof.grid, 2 + cfg.sigma, 2 + cfg.m, cfg.split_radius)


# -- homogeneous solutions --------------------------------------------------


@dataclass(frozen=True, eq=False)
class HomogeneousPair:
    k: int
    n: int
    z_growing: RadialProfile
    z_decaying: RadialProfile
    wronskian_constant: float
    wronskian_drift: float


def wronskian(n, za, zb):
    """r^(n-1) (zb za' - zb' za) sampled on the grid."""
    r = za.grid.r_nodes
    return r ** (n - 1) * (zb.values * za.derivative - zb.derivative * za.values)


class _TabulatedPotential:
    """q(s) = p v(s)^(p-1) by cubic Hermite interpolation of grid samples.

    Plain-float evaluation; the integrators call this at every stage.
    """

    def __init__(self, gs):
        e = gs.exponents
        g = gs.grid
        v = gs.v
        vs = e.m * v + gs.w_prime * g.r_nodes ** (e.m + 1)
        q = e.p * v ** (e.p - 1)
        qs = e.p * (e.p - 1) * v ** (e.p - 2) * vs
        self.s0, self.h, self.last = g.s_min, g.h, g.count - 2
        self.q = q.tolist()
        self.dq = (qs * g.h).tolist()

    def __call__(self, s):
        x = (s - self.s0) / self.h
        i = min(max(int(x), 0), self.last)
        t = x - i
        q0, q1 = self.q[i], self.q[i + 1]
        d0, d1 = self.dq[i], self.dq[i + 1]
        t2 = t * t
        t3 = t2 * t
        return (
            (2 * t3 - 3 * t2 + 1) * q0
            + (t3 - 2 * t2 + t) * d0
            + (-2 * t3 + 3 * t2) * q1
            + (t3 - t2) * d1
        )


def _potential_of_s(gs):
    if gs.dense_v is None:
        return _TabulatedPotential(gs)
    v, p, s_hi = gs.dense_v, gs.exponents.p, gs.grid.s_max

    def q(s):
        x = v(min(s, s_hi))
        return p * x ** (p - 1) if x > 0 else 0.0

    return q


def _integrate_scaled(gs, k, gamma, s0, s1, y0, yp0):
    """Solve L_k z = 0 for y = e^(-gamma s) z from s0 to s1 (either direction).

    Returns z and dz/ds on the grid nodes between s0 and s1, plus their mask.
    """
    e = gs.exponents
    g = gs.grid
    n = e.n
    lam = mode_eigenvalue(n, k)
    q = _potential_of_s(gs)
    b = 2 * gamma + n - 2
    c0 = gamma * gamma + (n - 2) * gamma - lam

    def rhs(s, y):
        return [y[1], -b * y[1] - (c0 + q(s)) * y[0]]

    lo, hi = min(s0, s1), max(s0, s1)
    mask = (g.nodes >= lo) & (g.nodes <= hi)
    nodes = g.nodes[mask]
    t_eval = nodes if s1 > s0 else nodes[::-1]
    sol = solve_ivp(
        rhs,
        (s0, s1),
        [y0, yp0],
        method="DOP853",
        rtol=HOMOGENEOUS_RTOL,
        atol=1e-30,
        t_eval=t_eval,
    )
    if sol.status != 0:
        raise SolverError(f"homogeneous mode-{k} integration failed: {sol.message}")
    y, yp = sol.y
    if s1 < s0:
        y, yp = y[::-1], yp[::-1]
    scale = np.exp(gamma * nodes)
    return scale * y, scale * (yp + gamma * y), mask


def _integrate_across(gs, k, gamma, s0, s1, y0, yp0):
    z, zs, _ = _integrate_scaled(gs, k, gamma, s0, s1, y0, yp0)
    return z, zs


def _profile_from_s(grid, z, zs, head, tail):
    return RadialProfile(grid, z, zs / grid.r_nodes, tail_exponent=tail, head_exponent=head)


def _normalize_pair(k, n, zg, zd):
    wr = wronskian(n, zg, zd)
    i0 = zg.grid.index_of(0.0)
    c = wr[i0]
    if c == 0 or not np.isfinite(c):
        raise SolverError(f"mode {k}: degenerate Wronskian")
    drift = float(np.max(np.abs(wr / c - 1.0)))
    if drift > WRONSKIAN_DRIFT_MAX:
        raise SolverError(f"mode {k}: Wronskian drifts by {drift:.2e} (under-resolved grid?)")
    zd = zd.scaled(1.0 / c)
    return HomogeneousPair(k, n, zg, zd, float(wronskian(n, zg, zd)[i0]), drift)


def _kernel_mode0(gs):
    """z_{1,0} = r w' + m w with its r-derivative, from the ground state."""
    e = gs.exponents
    r = gs.grid.r_nodes
    w, wp = gs.w, gs.w_prime
    z = r * wp + e.m * w
    zp = (e.m + 2 - e.n) * wp - r * w**e.p
    return RadialProfile(gs.grid, z, zp, tail_exponent=-(e.n - 2) / 2, head_exponent=0.0)


def kernel_mode1(gs):
    """z_1 = -w', positive on (0, infinity)."""
    e = gs.exponents
    r = gs.grid.r_nodes
    w, wp = gs.w, gs.w_prime
    z = -wp
    zp = (e.n - 1) / r * wp + w**e.p
    return RadialProfile(gs.grid, z, zp, tail_exponent=-e.m - 1, head_exponent=1.0)


def homogeneous_mode0(gs):
    """z_{1,0} from the scaling kernel and z_{2,0} ~ r^(2-n) integrated outward."""
    e = gs.exponents
    g = gs.grid
    n = e.n
    closed = _kernel_mode0(gs)
    # r w' + m w loses relative accuracy in the far field (it is a difference
    # of two O(r^-m) terms), so z_{1,0} is carried outward from the origin by
    # the same integrator as z_{2,0}.
    z1, z1s = _integrate_across(gs, 0, 0.0, g.s_min, g.s_max, closed.values[0], closed.s_derivative[0])
    z1 = _profile_from_s(g, z1, z1s, head=0.0, tail=-(n - 2) / 2)
    # Independent data at r = 1, integrated both ways; inward the r^(2-n)
    # branch dominates, so z_{2,0} ~ r^(2-n) near the origin.
    i0 = g.index_of(0.0)
    s0 = g.nodes[i0]
    a, b = z1.s_derivative[i0], -z1.values[i0]
    z2 = np.empty(g.count)
    z2s = np.empty(g.count)
    zi, zsi, mi = _integrate_scaled(gs, 0, 0.0, s0, g.s_min, a, b)
    z2[mi], z2s[mi] = zi, zsi
    zo, zso, mo = _integrate_scaled(gs, 0, 0.0, s0, g.s_max, a, b)
    z2[mo], z2s[mo] = zo, zso
    z2 = _profile_from_s(g, z2, z2s, head=2.0 - n, tail=-(n - 2) / 2)
    return _normalize_pair(0, n, z1, z2)


def decay_exponents(e, k):
    """Roots of x^2 + (n-2) x + p beta - lambda_k (far-field Euler indices)."""
    b = e.n - 2
    c = e.p * e.beta - mode_eigenvalue(e.n, k)
    disc = b * b - 4 * c
    if disc < 0:
        re = -b / 2
        return complex(re, math.sqrt(-disc) / 2), complex(re, -math.sqrt(-disc) / 2)
    return (-b + math.sqrt(disc)) / 2, (-b - math.sqrt(disc)) / 2


def homogeneous_modek(gs, k):
    """Solutions recessive at r = 0 (~ r^k) and at infinity, for k >= 2."""
    if k < 2:
        raise ValueError("homogeneous_modek needs k >= 2")
    e = gs.exponents
    g = gs.grid
    n = e.n
    _, gminus = decay_exponents(e, k)
    if isinstance(gminus, complex):
        raise SolverError(f"mode {k}: oscillatory far field, no recessive solution")
    c = -e.p / (2.0 * (2 * k + n))
    x0 = math.exp(2 * g.s_min)
    zg, zgs = _integrate_across(gs, k, float(k), g.s_min, g.s_max, 1.0 + c * x0, 2 * c * x0)
    zd, zds = _integrate_across(gs, k, gminus, g.s_max, g.s_min, 1.0, 0.0)
    zg = _profile_from_s(g, zg, zgs, head=float(k), tail=decay_exponents(e, k)[0])
    zd = _profile_from_s(g, zd, zds, head=2.0 - n - k, tail=gminus)
    if np.any(zg.values <= 0) or np.any(zd.values <= 0):
        raise SolverError(f"mode {k}: recessive solutions are not positive")
    return _normalize_pair(k, n, zg, zd)


# -- particular solutions ---------------------------------------------------


def anchored_integral(g, F, s0=0.0):
    """Integral of F(s) ds from s0 to every node, summed outward from s0."""
    pieces = interval_integrals(g.h, F)
    i0 = g.index_of(s0)
    out = np.zeros(g.count)
    out[i0 + 1 :] = np.cumsum(pieces[i0:])
    out[:i0] = -np.cumsum(pieces[:i0][::-1])[::-1]
    return out - value_at_s(g, out, s0)


def _require_integrable(ci, what, tail=True):
    if not ci.head_ok:
        raise SolverError(f"{what}: integrand not integrable at r = 0")
    if tail and not ci.tail_ok:
        raise SolverError(f"{what}: integrand not integrable at infinity")


def _estimate_exponents(grid, values):
    def rate(a, b):
        if a == 0 or b == 0 or np.sign(a) != np.sign(b):
            return 0.0
        return math.log(b / a) / grid.h

    head = rate(values[0], values[1])
    tail = -rate(values[-1], values[-2])
    return head, tail


def _assemble(grid, zg, zd, A, B):
    values = zg.values * A - zd.values * B
    derivative = zg.derivative * A - zd.derivative * B
    head, tail = _estimate_exponents(grid, values)
    return RadialProfile(grid, values, derivative, tail_exponent=tail, head_exponent=head)


def _check_inputs(h, gs):
    if h.grid != gs.grid:
        raise ValueError("source and ground state live on different grids")
    g = gs.grid
    if not g.s_min < 0.0 < g.s_max:
        raise ValueError("grid must contain r = 1")


def solve_mode0(h0, pair):
    """phi_0 = z_{1,0} int_1^r z_{2,0} h r^(n-1) - z_{2,0} int_0^r z_{1,0} h r^(n-1)."""
    z1, z2 = pair.z_growing, pair.z_decaying
    g = h0.grid
    if z1.grid != g:
        raise ValueError("source and homogeneous pair live on different grids")
    if not np.any(h0.values):
        return RadialProfile.zeros(g)
    n = pair.n
    s = g.nodes
    A = anchored_integral(g, z2.values * h0.values * np.exp(n * s))
    ci = cumulative_integrals(g, z1.values * h0.values, n - 1)
    _require_integrable(ci, "mode 0", tail=False)
    return _assemble(g, z1, z2, A, ci.from_left)


def solve_mode1(h1, gs, symmetric=False):
    """phi_1 = z_1(r) int_1^r z_1^(-2) s^(1-n) int_0^s z_1 h_1 t^(n-1) dt ds, z_1 = -w'.

    This is the reduction-of-order solution with L_1 phi_1 = h_1.
    """
    e = gs.exponents
    _check_inputs(h1, gs)
    g = gs.grid
    if symmetric or not mode1_solvable(e):
        if np.any(h1.values):
            raise ContractViolation(
                f"mode 1 source must vanish for p={e.p} <= (n+1)/(n-3)={e.p_mode1:.6g}"
                if not mode1_solvable(e)
                else "mode 1 source must vanish in symmetric mode"
            )
        return RadialProfile.zeros(g)
    z1 = kernel_mode1(gs)
    if np.any(z1.values <= 0):
        raise SolverError("z_1 = -w' is not positive on the grid")
    if not np.any(h1.values):
        return RadialProfile.zeros(g)
    n = e.n
    r = g.r_nodes
    inner = cumulative_integrals(g, z1.values * h1.values, n - 1)
    _require_integrable(inner, "mode 1", tail=False)
    I = inner.from_left
    # d/ds of the outer integral: z1^-2 r^(1-n) I * r
    J = anchored_integral(g, I * r ** (2.0 - n) / z1.values**2)
    values = z1.values * J
    derivative = z1.derivative * J + I * r ** (1.0 - n) / z1.values
    head, tail = _estimate_exponents(g, values)
    return RadialProfile(g, values, derivative, tail_exponent=tail, head_exponent=head)


def solve_modek(k, hk, gs, pair=None):
    """Bounded solution of L_k phi = h_k for k >= 2 from the two recessive solutions."""
    if k < 2:
        raise ValueError("solve_modek handles k >= 2")
    _check_inputs(hk, gs)
    g = gs.grid
    if not np.any(hk.values):
        return RadialProfile.zeros(g)
    pair = homogeneous_modek(gs, k) if pair is None else pair
    n = gs.exponents.n
    zg, zd = pair.z_growing, pair.z_decaying
    right = cumulative_integrals(g, zd.values * hk.values, n - 1)
    left = cumulative_integrals(g, zg.values * hk.values, n - 1)
    if not right.tail_ok:
        raise SolverError(f"mode {k}: integrand not integrable at infinity")
    if not left.head_ok:
        raise SolverError(f"mode {k}: integrand not integrable at r = 0")
    return _assemble(g, zg, zd, -right.from_right, left.from_left)


def solve_modek_fd(k, hk, gs):
    """Oracle: 4th-order finite-difference solve with phi = 0 at both grid ends."""
    e = gs.exponents
    g = gs.grid
    pot = e.p * gs.w ** (e.p - 1)
    mat = operator_matrix(g, e.n, k, pot).tolil()
    rhs = np.array(hk.values, dtype=float)
    for i in (0, g.count - 1):
        mat.rows[i] = [i]
        mat.data[i] = [1.0]
        rhs[i] = 0.0
    values = spla.spsolve(mat.tocsc(), rhs)
    return RadialProfile.from_function(g, lambda r: values)


def supersolution_check(gs, k):
    """L_k(-w') by finite differences next to the closed form (n-1-lambda_k) r^-2 (-w')."""
    from .radialgrid import apply_radial_operator

    e = gs.exponents
    z = kernel_mode1(gs)
    lz = apply_radial_operator(gs.grid, e, k, z, gs.profile).values
    expected = (e.n - 1 - mode_eigenvalue(e.n, k)) / gs.grid.r_nodes**2 * z.values
    return lz, expected


# -- assembled right inverse ------------------------------------------------


class LinearSolver:
    """Right inverse T of Delta + p w^(p-1), caching homogeneous solutions per mode."""

    def __init__(self, gs, cfg=None, symmetric=False):
        self.gs = gs
        self.cfg = WeightedNormConfig.for_exponents(gs.exponents) if cfg is None else cfg
        self.symmetric = symmetric
        self._pairs = {}

    def pair(self, k):
        if k not in self._pairs:
            self._pairs[k] = homogeneous_mode0(self.gs) if k == 0 else homogeneous_modek(self.gs, k)
        return self._pairs[k]

    def solve_mode(self, k, hk):
        if k == 0:
            return solve_mode0(hk, self.pair(0))
        if k == 1:
            return solve_mode1(hk, self.gs, symmetric=self.symmetric)
        if not np.any(hk.values):
            return RadialProfile.zeros(hk.grid)
        return solve_modek(k, hk, self.gs, self.pair(k))

    def __call__(self, h):
        if h.grid != self.gs.grid:
            raise ValueError("source lives on a different grid")
        coeffs = {k: self.solve_mode(k, h.coefficients[k]) for k in h.modes()}
        phi = ModeExpansion(h.grid, h.n, coeffs, h.kmax)
        hn = starstar_norm(h, self.cfg)
        phi.info["starstar_in"] = hn
        phi.info["star_out"] = star_norm(phi, self.cfg)
        phi.info["C_T"] = phi.info["star_out"] / hn if hn > 0 else 0.0
        return phi


def apply_T(h, gs, cfg=None, symmetric=False, solver=None):
    solver = LinearSolver(gs, cfg, symmetric) if solver is None else solver
    return solver(h)


def apply_L(phi, gs):
    """Mode-wise L_k by finite differences (for residual checks)."""
    from .radialgrid import apply_radial_operator

    e = gs.exponents
    coeffs = {
        k: apply_radial_operator(gs.grid, e, k, prof, gs.profile)
        for k, prof in phi.coefficients.items()
    }
    return ModeExpansion(phi.grid, phi.n, coeffs, phi.kmax)


def right_inverse_residual(h, phi, gs, cfg):
    """||L(phi) - h||_** / ||h||_** (or the absolute residual when h = 0)."""
    res = apply_L(phi, gs) - h
    hn = starstar_norm(h, cfg)
    rn = starstar_norm(res, cfg)
    return rn / hn if hn > 0 else rn


# -- reference sources ------------------------------------------------------


def reference_sources(k, grid, m):
    """Ten fixed smooth mode-k sources with finite ||.||_** (for any sigma <= m).

    Returned as (name, RadialProfile) pairs; each behaves like r^k at the
    origin and decays at least like r^(-3-m).
    """
    r = grid.r_nodes
    lr = np.log(r)
    specs = [
        ("gauss-0.5", lambda r: np.exp(-0.5 * r**2)),
        ("gauss-1", lambda r: np.exp(-(r**2))),
        ("gauss-2", lambda r: np.exp(-2.0 * r**2)),
        ("rational-1", lambda r: (1.0 + r * r) ** (-(k + 3 + m) / 2)),
        ("rational-2", lambda r: (1.0 + r * r) ** (-(k + 4 + m) / 2)),
        ("logbump-m2", lambda r: np.exp(-((np.log(r) + 2.0) ** 2) - k * np.log(r))),
        ("logbump-0", lambda r: np.exp(-(np.log(r) ** 2) - k * np.log(r))),
        ("logbump-2", lambda r: np.exp(-((np.log(r) - 2.0) ** 2) - k * np.log(r))),
        ("wave", lambda r: np.exp(-0.25 * r**2) * np.cos(r)),
        ("twobump", lambda r: np.exp(-r) * (1.0 + 0.5 * np.sin(2.0 * r))),
    ]
    del lr
    out = []
    for name, f in specs:
        values = r**k * f(r)
        out.append((name, RadialProfile.from_function(grid, lambda _r, v=values: v, head_exponent=float(k))))
    return out
