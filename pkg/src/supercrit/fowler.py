"""Radial ground state of Delta w + w^p = 0, w(0) = 1.

The canonical route integrates the Fowler form v(s) = r^m w(r), r = e^s,

    v'' + alpha v' - beta v + v^p = 0,

along the heteroclinic leaving the saddle (0, 0).  It is written as a first
order system in (v, D) with D = v' - m v = r^(m+1) w'; because m solves
x^2 + alpha x - beta = 0 this gives

    v' = m v + D,      D' = -(alpha + m) D - v^p,

which keeps w' accurate near r = 0 where v' and m v nearly cancel.
``shoot_direct`` integrates the radial ODE in r and serves as an oracle.
"""

import bisect
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .radialgrid import RadialProfile

DELTA_FACTOR = 1e-8
RTOL = 1e-13


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class HeteroclinicOrbit:
    grid: object
    v: np.ndarray
    v_prime: np.ndarray
    energy: np.ndarray
    equilibrium: float
    head_constant: float  # lim e^(-m s) v(s) of this particular orbit


@dataclass(frozen=True, eq=False)
class GroundState:
    exponents: object
    profile: RadialProfile
    L_measured: float
    normalization_shift: float
    dense_v: object = None  # callable s -> v(s), when an ODE interpolant is available

    @property
    def grid(self):
        return self.profile.grid

    @property
    def w(self):
        return self.profile.values

    @property
    def w_prime(self):
        return self.profile.derivative

    @property
    def v(self):
        """Fowler variable r^m w on the grid."""
        return self.w * self.grid.r_nodes ** self.exponents.m

    @cached_property
    def fowler_v(self):
        """Continuous v(s) on the grid range."""
        if self.dense_v is not None:
            return self.dense_v
        g = self.grid
        spline = CubicHermiteSpline(g.nodes, self.v, self.v * self.exponents.m + self.w_prime * g.r_nodes ** (self.exponents.m + 1))
        return spline


def energy(e, v, v_prime):
    return 0.5 * v_prime**2 + v ** (e.p + 1) / (e.p + 1) - 0.5 * e.beta * v**2


def _series_coefficients(e):
    # w(r) = 1 + c1 r^2 + c2 r^4 + ...
    n, p = e.n, e.p
    return -1.0 / (2 * n), p / (8.0 * n * (n + 2))


def _seed(e, s0, v0):
    """Point (v, D) at s0 on the unstable manifold with v(s0) = v0.

    Uses the small-r series of w; returns the orbit's head constant too.
    """
    c1, c2 = _series_coefficients(e)
    m, q = e.m, e.p - 1.0
    u = v0
    for _ in range(50):
        x = u**q
        u_new = v0 / (1.0 + c1 * x + c2 * x * x)
        if abs(u_new - u) <= 1e-16 * u:
            u = u_new
            break
        u = u_new
    x = u**q
    d0 = u * (2.0 * c1 * x + 4.0 * c2 * x * x)
    return d0, u * math.exp(-m * s0)


def _canonical_series(e, s):
    """(v, D) of the w(0) = 1 orbit from the small-r series (valid for e^s << 1)."""
    c1, c2 = _series_coefficients(e)
    x = np.exp(2.0 * s)
    u = np.exp(e.m * s)
    return u * (1.0 + c1 * x + c2 * x * x), u * (2.0 * c1 * x + 4.0 * c2 * x * x)


def _fowler_system(e):
    m, a = e.m, e.alpha + e.m

    def rhs(s, y):
        v, d = y
        return [m * v + d, -a * d - max(v, 0.0) ** e.p]

    return rhs


def _integrate(e, s0, s1, v0, d0, rtol):
    eq = e.equilibrium
    cap = 2.0 * eq * 1.5

    def blowup(s, y):
        return cap - y[0]

    def sign_loss(s, y):
        return y[0]

    blowup.terminal = True
    sign_loss.terminal = True
    sol = solve_ivp(
        _fowler_system(e),
        (s0, s1),
        [v0, d0],
        method="DOP853",
        rtol=rtol,
        atol=[v0 * 1e-13, 1e-300],
        dense_output=True,
        events=[blowup, sign_loss],
    )
    if sol.status != 0:
        if sol.status == 1:
            which = "exceeded 2*beta^(1/(p-1))" if len(sol.t_events[0]) else "became negative"
            raise IntegrationError(f"Fowler orbit {which} at s={sol.t[-1]:.3f}")
        raise IntegrationError(f"Fowler integration failed: {sol.message}")
    return sol


def integrate_heteroclinic(e, g, rtol=RTOL, delta=None, s_end=None):
    if not (e.alpha > 0 and e.beta > 0):
        raise IntegrationError("alpha and beta must be positive (supercritical p)")
    eq = e.equilibrium
    delta = DELTA_FACTOR * eq if delta is None else delta
    d0, head = _seed(e, g.s_min, delta)
    s_end = g.s_max if s_end is None else max(s_end, g.s_max)
    sol = _integrate(e, g.s_min, s_end, delta, d0, rtol)
    v, d = sol.sol(g.nodes)
    v[0], d[0] = delta, d0
    if np.any(v[1:] <= 0):
        raise IntegrationError("Fowler orbit lost positivity")
    vp = e.m * v + d
    orbit = HeteroclinicOrbit(g, v, vp, energy(e, v, vp), eq, head)
    return orbit, sol


def ground_state(e, g, rtol=RTOL, delta=None):
    """Ground state with w(0) = 1 on grid ``g``.

    The orbit is seeded at s_min with v = delta; its head constant A (the
    limit of e^(-m s) v) fixes the s-shift -log(A)/m that maps it onto the
    normalized orbit.
    """
    eq = e.equilibrium
    delta = DELTA_FACTOR * eq if delta is None else delta
    _, head = _seed(e, g.s_min, delta)
    shift = -math.log(head) / e.m
    orbit, sol = integrate_heteroclinic(e, g, rtol, delta, s_end=g.s_max + max(shift, 0.0) + 1.0)
    del orbit
    s = g.nodes + shift
    v = np.empty(g.count)
    d = np.empty(g.count)
    on_orbit = s >= g.s_min
    v[on_orbit], d[on_orbit] = sol.sol(s[on_orbit])
    if not np.all(on_orbit):
        v[~on_orbit], d[~on_orbit] = _canonical_series(e, g.nodes[~on_orbit])

    w = v * np.exp(-e.m * g.nodes)
    wp = d * np.exp(-(e.m + 1.0) * g.nodes)
    # e^(-m s) v must have settled over the first decade of r
    head_window = g.nodes <= g.s_min + math.log(10.0)
    spread = np.ptp(w[head_window]) / abs(w[0])
    c1, _ = _series_coefficients(e)
    expected = abs(c1) * (math.exp(2 * (g.s_min + math.log(10.0))) - math.exp(2 * g.s_min))
    if spread - expected > 1e-6:
        raise IntegrationError(f"head limit did not converge (relative spread {spread:.2e})")
    if np.any(w <= 0) or np.any(wp[1:] >= 0):
        raise IntegrationError("ground state lost positivity or monotonicity")
    profile = RadialProfile(g, w, wp, tail_exponent=-e.m, head_exponent=0.0)

    dense_v = FowlerInterpolant.from_solution(e, sol, shift, g.s_min)
    return GroundState(e, profile, float(v[-1]), shift, dense_v)


def ode_residual(gs):
    """r^(m+2) |w'' + (n-1)/r w' + w^p| on the grid.

    With D = r^(m+1) w' this equals |D_s + (alpha + m) D + v^p|, so only one
    (4th-order) difference of D is taken.
    """
    from .radialgrid import fd_derivative

    e = gs.exponents
    g = gs.grid
    d = gs.w_prime * g.r_nodes ** (e.m + 1)
    return np.abs(fd_derivative(g, d) + (e.alpha + e.m) * d + gs.v**e.p)


class FowlerInterpolant:
    """v(s) of the normalized orbit from the solver's own dense output.

    Evaluates the DOP853 step polynomials with plain floats, which is far
    cheaper than OdeSolution.__call__ for the scalar calls made by the
    linearized integrators.  Left of the seed point the series is used.
    """

    def __init__(self, e, shift, s_seed, t_old, h, y_old, F):
        self.e = e
        self.shift = float(shift)
        self.s_seed = float(s_seed)
        self.t_old = [float(x) for x in t_old]
        self.h = [float(x) for x in h]
        self.y_old = [float(x) for x in y_old]
        self.F = [[float(f) for f in row] for row in F]
        self.t_end = self.t_old[-1] + self.h[-1]

    @classmethod
    def from_solution(cls, e, sol, shift, s_seed):
        interps = sol.sol.interpolants
        return cls(
            e,
            shift,
            s_seed,
            [ip.t_old for ip in interps],
            [ip.h for ip in interps],
            [ip.y_old[0] for ip in interps],
            [ip.F[::-1, 0] for ip in interps],
        )

    def to_arrays(self):
        return {
            "seg_t_old": np.array(self.t_old),
            "seg_h": np.array(self.h),
            "seg_y_old": np.array(self.y_old),
            "seg_F": np.array(self.F),
            "seg_meta": np.array([self.shift, self.s_seed]),
        }

    @classmethod
    def from_arrays(cls, e, arrays):
        shift, s_seed = arrays["seg_meta"]
        return cls(e, shift, s_seed, arrays["seg_t_old"], arrays["seg_h"], arrays["seg_y_old"], arrays["seg_F"])

    def _scalar(self, t):
        x = t + self.shift
        if x < self.s_seed:
            return float(_canonical_series(self.e, t)[0])
        if x > self.t_end:
            raise ValueError(f"s={t} lies beyond the integrated orbit")
        j = bisect.bisect_right(self.t_old, x) - 1
        j = max(j, 0)
        u = (x - self.t_old[j]) / self.h[j]
        y = 0.0
        for i, f in enumerate(self.F[j]):
            y += f
            y *= u if i % 2 == 0 else 1.0 - u
        return y + self.y_old[j]

    def __call__(self, t):
        if np.ndim(t) == 0:
            return self._scalar(float(t))
        t = np.asarray(t, dtype=float)
        return np.array([self._scalar(x) for x in t.ravel()]).reshape(t.shape)


def shoot_direct(e, r_max=None, tol=1e-12, grid=None, r0=1e-6):
    """Oracle: integrate w'' + (n-1)/r w' + w^p = 0 outward in r from r0."""
    from .radialgrid import default_grid

    g = default_grid() if grid is None else grid
    r_max = float(g.r_nodes[-1]) if r_max is None else float(r_max)
    if r_max < g.r_nodes[-1] * (1 - 1e-12):
        raise ValueError("r_max must cover the grid")
    n, p = e.n, e.p

    def rhs(r, y):
        w, wp = y
        return [wp, -(n - 1) / r * wp - max(w, 0.0) ** p]

    def sign_loss(r, y):
        return y[0]

    sign_loss.terminal = True
    y0 = [1.0 - r0**2 / (2 * n), -r0 / n]
    sol = solve_ivp(
        rhs,
        (r0, r_max),
        y0,
        method="DOP853",
        rtol=tol,
        atol=[1e-300, 1e-300],
        dense_output=True,
        events=[sign_loss],
    )
    if sol.status != 0:
        raise IntegrationError(f"direct shooting failed at r={sol.t[-1]:.4g}: {sol.message}")
    r = g.r_nodes
    w = np.empty(g.count)
    wp = np.empty(g.count)
    inner = r < r0
    w[~inner], wp[~inner] = sol.sol(np.clip(r[~inner], r0, r_max))
    c1, c2 = _series_coefficients(e)
    w[inner] = 1.0 + c1 * r[inner] ** 2 + c2 * r[inner] ** 4
    wp[inner] = 2 * c1 * r[inner] + 4 * c2 * r[inner] ** 3
    if np.any(w <= 0):
        raise IntegrationError("direct shooting lost positivity")
    profile = RadialProfile(g, w, wp, tail_exponent=-e.m, head_exponent=0.0)
    return GroundState(e, profile, float(w[-1] * r[-1] ** e.m), 0.0)


def scale_profile(gs, lam):
    """w_lambda(r) = lambda^m w(lambda r) on the same grid."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    e = gs.exponents
    prof = gs.profile
    if lam == 1.0:
        return prof
    r = prof.grid.r_nodes
    x = lam * r
    w = lam**e.m * prof(x)
    wp = lam ** (e.m + 1) * prof.r_derivative_at(x)
    return RadialProfile(prof.grid, w, wp, prof.tail_exponent, prof.head_exponent)
