"""Uniform grids in s = log r, quadrature and the mode-k radial operator.

Every radial function is sampled on the nodes of a :class:`Grid`.  In the
variable s the mode-k operator

    L_k phi = phi'' + (n-1)/r phi' + (p w^(p-1) - lambda_k / r^2) phi

reads ``exp(-2 s) (phi_ss + (n-2) phi_s - lambda_k phi) + p w^(p-1) phi``,
which is what :func:`operator_matrix` discretizes.
"""

import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicHermiteSpline

from .constants import mode_eigenvalue

MIN_COUNT = 64
DEFAULT_S_MIN = -12.0
DEFAULT_S_MAX = 12.0
DEFAULT_COUNT = 4801
RATE_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class Grid:
    s_min: float
    s_max: float
    count: int

    def __post_init__(self):
        if not (math.isfinite(self.s_min) and math.isfinite(self.s_max)):
            raise ValueError("grid bounds must be finite")
        if not self.s_min < self.s_max:
            raise ValueError(f"inverted or empty range: s_min={self.s_min} >= s_max={self.s_max}")
        if int(self.count) != self.count or self.count < MIN_COUNT:
            raise ValueError(f"count={self.count} too small (need >= {MIN_COUNT})")

    @cached_property
    def nodes(self):
        s = np.linspace(self.s_min, self.s_max, int(self.count))
        s.flags.writeable = False
        return s

    @cached_property
    def r_nodes(self):
        r = np.exp(self.nodes)
        r.flags.writeable = False
        return r

    @property
    def h(self):
        return (self.s_max - self.s_min) / (self.count - 1)

    @property
    def key(self):
        return (float(self.s_min), float(self.s_max), int(self.count))

    def __eq__(self, other):
        return isinstance(other, Grid) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def refined(self, factor=2):
        """Same range with the spacing divided by ``factor``."""
        return Grid(self.s_min, self.s_max, (self.count - 1) * factor + 1)

    def index_of(self, s):
        return int(np.argmin(np.abs(self.nodes - s)))


def build_grid(s_min=DEFAULT_S_MIN, s_max=DEFAULT_S_MAX, count=DEFAULT_COUNT):
    return Grid(float(s_min), float(s_max), int(count))


def default_grid():
    return build_grid()


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Samples of a radial function and its r-derivative on a grid.

    ``head_exponent`` / ``tail_exponent`` are the expected powers of r as
    r -> 0 and r -> infinity; they drive extrapolation off the grid.
    """

    grid: Grid
    values: np.ndarray
    derivative: np.ndarray
    tail_exponent: float = 0.0
    head_exponent: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        derivative = np.array(self.derivative, dtype=float)
        n = self.grid.count
        if values.shape != (n,) or derivative.shape != (n,):
            raise ValueError(
                f"profile arrays must have length {n}, got {values.shape} and {derivative.shape}"
            )
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(derivative))):
            raise ValueError("profile contains NaN or Inf samples")
        values.flags.writeable = False
        derivative.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "derivative", derivative)

    @classmethod
    def from_function(cls, grid, func, dfunc=None, head_exponent=0.0, tail_exponent=0.0):
        r = grid.r_nodes
        values = np.asarray(func(r), dtype=float) * np.ones_like(r)
        if dfunc is None:
            derivative = fd_derivative(grid, values) / r
        else:
            derivative = np.asarray(dfunc(r), dtype=float) * np.ones_like(r)
        return cls(grid, values, derivative, tail_exponent, head_exponent)

    @classmethod
    def zeros(cls, grid):
        z = np.zeros(grid.count)
        return cls(grid, z, z)

    @property
    def s_derivative(self):
        """d/ds = r d/dr."""
        return self.derivative * self.grid.r_nodes

    def scaled(self, a):
        return RadialProfile(
            self.grid, a * self.values, a * self.derivative, self.tail_exponent, self.head_exponent
        )

    def __add__(self, other):
        _check_same_grid(self, other)
        return RadialProfile(
            self.grid,
            self.values + other.values,
            self.derivative + other.derivative,
            max(self.tail_exponent, other.tail_exponent),
            min(self.head_exponent, other.head_exponent),
        )

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    @cached_property
    def _spline(self):
        return CubicHermiteSpline(self.grid.nodes, self.values, self.s_derivative)

    def __call__(self, r):
        """Evaluate at arbitrary radii, with power-law extension off the grid."""
        r = np.asarray(r, dtype=float)
        s = np.log(r)
        g = self.grid
        out = np.empty_like(s)
        inside = (s >= g.s_min) & (s <= g.s_max)
        out[inside] = self._spline(s[inside])
        below = s < g.s_min
        out[below] = self.values[0] * np.exp(self.head_exponent * (s[below] - g.s_min))
        above = s > g.s_max
        out[above] = self.values[-1] * np.exp(self.tail_exponent * (s[above] - g.s_max))
        return out

    def r_derivative_at(self, r):
        r = np.asarray(r, dtype=float)
        s = np.log(r)
        g = self.grid
        out = np.empty_like(s)
        inside = (s >= g.s_min) & (s <= g.s_max)
        out[inside] = self._spline(s[inside], 1) / r[inside]
        below = s < g.s_min
        # a profile tending to a nonzero constant is taken to be even in r
        head = 1.0 if self.head_exponent == 0 else self.head_exponent - 1
        out[below] = self.derivative[0] * np.exp(head * (s[below] - g.s_min))
        above = s > g.s_max
        out[above] = self.derivative[-1] * np.exp((self.tail_exponent - 1) * (s[above] - g.s_max))
        return out

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["s", "r", "value", "derivative"])
        for row in zip(self.grid.nodes, self.grid.r_nodes, self.values, self.derivative):
            writer.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, head_exponent=0.0, tail_exponent=0.0):
        rows = list(csv.reader(io.StringIO(text)))
        if rows[0] != ["s", "r", "value", "derivative"]:
            raise ValueError(f"unexpected profile header {rows[0]}")
        data = np.array(rows[1:], dtype=float)
        grid = build_grid(data[0, 0], data[-1, 0], len(data))
        return cls(grid, data[:, 2], data[:, 3], tail_exponent, head_exponent)


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError("profiles live on different grids")


# -- finite differences -----------------------------------------------------


def fd_weights(offsets, order):
    """Fornberg weights for derivative ``order`` at 0 from integer ``offsets``."""
    x = np.asarray(offsets, dtype=float)
    npts = len(x)
    c = np.zeros((npts, order + 1))
    c1 = 1.0
    c4 = x[0]
    c[0, 0] = 1.0
    for i in range(1, npts):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


# Stencils per row position: interior rows use the 5-point centred formulas,
# the two rows nearest each end use 6-point one-sided ones (4th order).
_CENTRAL = np.arange(-2, 3)
_EDGE = {0: np.arange(0, 6), 1: np.arange(-1, 5)}


def _stencil_matrix(count, h, order):
    rows, cols, vals = [], [], []
    wc = fd_weights(_CENTRAL, order) / h**order
    for i in range(count):
        if i in _EDGE:
            offs = _EDGE[i]
            w = fd_weights(offs, order) / h**order
        elif count - 1 - i in _EDGE:
            offs = -_EDGE[count - 1 - i]
            w = fd_weights(offs, order) / h**order
        else:
            offs, w = _CENTRAL, wc
        rows.extend([i] * len(offs))
        cols.extend(i + offs)
        vals.extend(w)
    return sp.csr_matrix((vals, (rows, cols)), shape=(count, count))


_STENCIL_CACHE = {}


def derivative_matrices(grid):
    """(D1, D2): 4th-order d/ds and d^2/ds^2 on ``grid``."""
    key = (grid.count, grid.h)
    if key not in _STENCIL_CACHE:
        _STENCIL_CACHE[key] = (
            _stencil_matrix(grid.count, grid.h, 1),
            _stencil_matrix(grid.count, grid.h, 2),
        )
    return _STENCIL_CACHE[key]


def fd_derivative(grid, values):
    d1, _ = derivative_matrices(grid)
    return d1 @ np.asarray(values, dtype=float)


def operator_matrix(grid, n, k, potential):
    """Sparse matrix of L_k with the given potential samples p w^(p-1)."""
    d1, d2 = derivative_matrices(grid)
    lam = mode_eigenvalue(n, k)
    e2 = sp.diags(np.exp(-2.0 * grid.nodes))
    ident = sp.identity(grid.count, format="csr")
    return (e2 @ (d2 + (n - 2) * d1 - lam * ident) + sp.diags(potential)).tocsr()


def apply_radial_operator(g, e, k, phi, wprof):
    if phi.grid != g or wprof.grid != g:
        raise ValueError("profiles must live on the given grid")
    if np.any(wprof.values <= 0):
        raise ValueError("ground-state profile must be positive")
    potential = e.p * wprof.values ** (e.p - 1)
    out = operator_matrix(g, e.n, k, potential) @ phi.values
    return RadialProfile(
        g,
        out,
        fd_derivative(g, out) / g.r_nodes,
        phi.tail_exponent - 2.0,
        phi.head_exponent - 2.0,
    )


# -- quadrature -------------------------------------------------------------


class CumulativeIntegrals(NamedTuple):
    """Integrals of f(r) r^w dr from r = 0 up to, and from each node to infinity.

    ``head_ok`` / ``tail_ok`` are False when the power-law extension off the
    grid is not integrable; the corresponding extension is then left out.
    """

    from_left: np.ndarray
    from_right: np.ndarray
    head_ok: bool
    tail_ok: bool
    head_extension: float
    tail_extension: float

    @property
    def total(self):
        return self.from_left[-1] + self.tail_extension


def interval_integrals(h, F):
    """4th-order integrals of F over each grid interval (cubic through 4 nodes)."""
    F = np.asarray(F, dtype=float)
    out = np.empty(len(F) - 1)
    out[1:-1] = (-F[:-3] + 13.0 * F[1:-2] + 13.0 * F[2:-1] - F[3:]) * (h / 24.0)
    out[0] = (9.0 * F[0] + 19.0 * F[1] - 5.0 * F[2] + F[3]) * (h / 24.0)
    out[-1] = (F[-4] - 5.0 * F[-3] + 19.0 * F[-2] + 9.0 * F[-1]) * (h / 24.0)
    return out


def _end_exponent(F, h, at_head):
    """Local exponential rate of F(s) at one end, from the two outermost samples."""
    a, b = (F[0], F[1]) if at_head else (F[-1], F[-2])
    if a == 0.0:
        return None
    if b == 0.0 or np.sign(a) != np.sign(b):
        return math.nan
    rate = math.log(b / a) / h
    return rate if at_head else -rate


def _extension(F_end, rate, at_head):
    """Integral of F_end * exp(rate * (s - s_end)) over the half-line beyond the end."""
    if F_end == 0.0:
        return 0.0, True
    if rate is None or math.isnan(rate):
        return 0.0, True
    # rates this close to zero are a flat (log-divergent) integrand plus rounding
    if at_head:
        if rate <= RATE_FLOOR:
            return 0.0, False
        return F_end / rate, True
    if rate >= -RATE_FLOOR:
        return 0.0, False
    return -F_end / rate, True


def cumulative_integrals(g, samples, weight_power, head_exponent=None, tail_exponent=None):
    """Cumulative integrals of samples(r) * r**weight_power dr in both directions.

    In s the integrand is f(e^s) e^((w+1) s).  Off-grid tails are added from the
    power-law exponents of ``samples`` when given, otherwise estimated from the
    outermost samples.
    """
    f = np.asarray(samples, dtype=float)
    if f.shape != (g.count,):
        raise ValueError("samples do not match the grid")
    if not np.all(np.isfinite(f)):
        raise ValueError("samples must be finite")
    F = f * np.exp((weight_power + 1.0) * g.nodes)
    pieces = interval_integrals(g.h, F)

    if head_exponent is None:
        head_rate = _end_exponent(F, g.h, True)
    else:
        head_rate = head_exponent + weight_power + 1.0
    if tail_exponent is None:
        tail_rate = _end_exponent(F, g.h, False)
    else:
        tail_rate = tail_exponent + weight_power + 1.0
    head_ext, head_ok = _extension(F[0], head_rate, True)
    tail_ext, tail_ok = _extension(F[-1], tail_rate, False)

    from_left = np.empty(g.count)
    from_left[0] = head_ext
    np.cumsum(pieces, out=from_left[1:])
    from_left[1:] += head_ext
    from_right = np.empty(g.count)
    from_right[-1] = tail_ext
    np.cumsum(pieces[::-1], out=from_right[-2::-1])
    from_right[:-1] += tail_ext
    return CumulativeIntegrals(from_left, from_right, head_ok, tail_ok, head_ext, tail_ext)


def value_at_s(g, values, s):
    """Cubic interpolation of grid samples at a single abscissa (s in range)."""
    if not g.s_min <= s <= g.s_max:
        raise ValueError(f"s={s} outside the grid")
    i = min(max(int(math.floor((s - g.s_min) / g.h)) - 1, 0), g.count - 4)
    xs = g.nodes[i : i + 4]
    ys = np.asarray(values)[i : i + 4]
    total = 0.0
    for j in range(4):
        others = [xs[q] for q in range(4) if q != j]
        total += ys[j] * np.prod([(s - xo) / (xs[j] - xo) for xo in others])
    return float(total)
